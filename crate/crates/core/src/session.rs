//! The edit-time engine: scan a buffer for instances, render them under a
//! fuel budget, run GUI event handlers and turn state changes into text
//! edits.

use std::collections::BTreeMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::elaborate::{Elaborator, Phase};
use crate::interp::{EvalError, Fuel, Interp, Value, ValueMap};
use crate::reader::{char_to_byte, quote_string, read_prefix, Span};
use crate::view::{default_view, to_view_tree, ViewNode};
use crate::visr::{deserialize_state, scan_instances, serialize_state, InstanceSyntax, Registry, VisrDefinition};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Buffer {
    pub text: String,
    pub version: u64,
}

/// Replacement of `span` (in `base_version` coordinates) by `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextEdit {
    pub span: Span,
    pub replacement: String,
    pub base_version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub span: Span,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn new(span: Span, severity: Severity, message: impl Into<String>) -> Self {
        Diagnostic { span, severity, message: message.into() }
    }
}

/// What the session announces about one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub instance_id: u64,
    pub extension_ref: String,
    pub state_text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("edit is based on version {got} but the buffer is at version {expected}")]
    VersionMismatch { expected: u64, got: u64 },
    #[error("edit span {0} is outside the buffer")]
    InvalidSpan(Span),
    #[error("no instance with id {0}")]
    UnknownInstance(u64),
    #[error("handler {handler_id} is not part of the current view of instance {instance_id}")]
    StaleHandler { instance_id: u64, handler_id: String },
    #[error("{0}")]
    Serialize(String),
}

/// Fuel budgets for the session's two kinds of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionConfig {
    /// Per render or handler call.
    pub render_fuel: Fuel,
    /// Per scan of the buffer (module loading and elaboration).
    pub elaborate_fuel: Fuel,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            render_fuel: Fuel::from_env_or(Fuel::RENDER_DEFAULT),
            elaborate_fuel: Fuel::from_env_or(Fuel::ELABORATE_DEFAULT),
        }
    }
}

impl SessionConfig {
    /// One budget for everything.
    pub fn uniform(fuel: Fuel) -> Self {
        SessionConfig { render_fuel: fuel, elaborate_fuel: fuel }
    }
}

struct Live {
    id: u64,
    syntax: InstanceSyntax,
    def: Option<Rc<VisrDefinition>>,
    tree: ViewNode,
    handlers: Vec<Value>,
    /// The state cell the current view was rendered from.
    cell: Option<Value>,
    diagnostics: Vec<Diagnostic>,
}

/// Result of one GUI event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventOutcome {
    pub edit: Option<TextEdit>,
    pub tree: ViewNode,
    pub diagnostics: Vec<Diagnostic>,
}

struct RenderResult {
    tree: ViewNode,
    handlers: Vec<Value>,
    cell: Option<Value>,
    diagnostics: Vec<Diagnostic>,
}

pub struct Session {
    buffer: Buffer,
    registry: Registry,
    config: SessionConfig,
    instances: Vec<Live>,
    ids: BTreeMap<(String, usize), u64>,
    next_id: u64,
    namespace: Option<String>,
    diagnostics: Vec<Diagnostic>,
}

impl Session {
    pub fn open(text: &str, registry: Registry, config: SessionConfig) -> Session {
        let mut session = Session {
            buffer: Buffer { text: text.to_string(), version: 0 },
            registry,
            config,
            instances: Vec::new(),
            ids: BTreeMap::new(),
            next_id: 1,
            namespace: None,
            diagnostics: Vec::new(),
        };
        session.rescan();
        session
    }

    pub fn buffer(&self) -> &Buffer {
        &self.buffer
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn config(&self) -> SessionConfig {
        self.config
    }

    pub fn instances(&self) -> Vec<InstanceInfo> {
        self.instances
            .iter()
            .map(|i| InstanceInfo {
                instance_id: i.id,
                extension_ref: i.syntax.extension_ref.clone(),
                state_text: i.syntax.state_text.clone(),
                span: i.syntax.span,
            })
            .collect()
    }

    pub fn instance_ids(&self) -> Vec<u64> {
        self.instances.iter().map(|i| i.id).collect()
    }

    pub fn instance_syntax(&self, id: u64) -> Option<&InstanceSyntax> {
        self.live(id).ok().map(|i| &i.syntax)
    }

    pub fn view(&self, id: u64) -> Option<&ViewNode> {
        self.live(id).ok().map(|i| &i.tree)
    }

    /// Buffer-level diagnostics followed by each instance's, in order.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = self.diagnostics.clone();
        for inst in &self.instances {
            out.extend(inst.diagnostics.iter().cloned());
        }
        out
    }

    /// The instance's state as last rendered.
    pub fn state(&self, id: u64) -> Option<Value> {
        match &self.live(id).ok()?.cell {
            Some(Value::Cell(c)) => Some(c.borrow().clone()),
            _ => None,
        }
    }

    fn live(&self, id: u64) -> Result<&Live, SessionError> {
        self.instances.iter().find(|i| i.id == id).ok_or(SessionError::UnknownInstance(id))
    }

    /// Re-reads the buffer, registers definitions, and renders instances
    /// that are new or whose state or definition changed. Returns the ids
    /// that were (re)rendered.
    pub fn rescan(&mut self) -> Vec<u64> {
        let (forms, read_error) = read_prefix(&self.buffer.text);
        let mut diagnostics = Vec::new();
        if let Some(err) = read_error {
            let len = self.buffer.text.chars().count();
            diagnostics.push(Diagnostic::new(
                Span::new(err.offset.min(len), len),
                Severity::Error,
                format!("unreadable text: {}", err.message),
            ));
        }

        let (found, malformed) = scan_instances(&forms);
        let mut elab = Elaborator::new(&mut self.registry, self.config.elaborate_fuel).collecting();
        let _ = elab.program(&forms);
        let errors = elab.take_errors();
        self.namespace = elab.namespace().map(str::to_string);
        drop(elab);
        for err in errors {
            // Instances report their own resolve and state problems when rendered.
            let per_instance = matches!(err.phase, Phase::Resolve | Phase::Deserialize)
                && found.iter().any(|i| i.span == err.span);
            let is_malformed = malformed.iter().any(|(span, _)| *span == err.span);
            if !per_instance && !is_malformed {
                diagnostics.push(Diagnostic::new(err.span, Severity::Error, format!("{} error: {}", err.phase, err.message)));
            }
        }
        for (span, msg) in malformed {
            diagnostics.push(Diagnostic::new(span, Severity::Warning, msg));
        }
        self.diagnostics = diagnostics;

        let mut previous: BTreeMap<u64, Live> = self.instances.drain(..).map(|i| (i.id, i)).collect();
        let mut ordinals: BTreeMap<String, usize> = BTreeMap::new();
        let mut rendered = Vec::new();
        for syntax in found {
            let ordinal = ordinals.entry(syntax.extension_ref.clone()).or_default();
            let key = (syntax.extension_ref.clone(), *ordinal);
            *ordinal += 1;
            let id = *self.ids.entry(key).or_insert_with(|| {
                self.next_id += 1;
                self.next_id - 1
            });
            let def = self.registry.lookup(&syntax.extension_ref, self.namespace.as_deref());
            let reuse = previous.remove(&id).filter(|old| {
                old.syntax.state_text == syntax.state_text
                    && match (&old.def, &def) {
                        (Some(a), Some(b)) => Rc::ptr_eq(a, b),
                        (None, None) => true,
                        _ => false,
                    }
            });
            let live = match reuse {
                Some(old) => Live { syntax, ..old },
                None => {
                    let r = self.render(&syntax, def.as_deref());
                    rendered.push(id);
                    Live { id, syntax, def, tree: r.tree, handlers: r.handlers, cell: r.cell, diagnostics: r.diagnostics }
                }
            };
            self.instances.push(live);
        }
        rendered
    }

    /// Renders `id` afresh from its current state text.
    pub fn render_instance(&mut self, id: u64) -> Result<&ViewNode, SessionError> {
        let idx = self.instances.iter().position(|i| i.id == id).ok_or(SessionError::UnknownInstance(id))?;
        let r = {
            let inst = &self.instances[idx];
            self.render(&inst.syntax, inst.def.as_deref())
        };
        let inst = &mut self.instances[idx];
        inst.tree = r.tree;
        inst.handlers = r.handlers;
        inst.cell = r.cell;
        inst.diagnostics = r.diagnostics;
        Ok(&inst.tree)
    }

    fn render(&self, syntax: &InstanceSyntax, def: Option<&VisrDefinition>) -> RenderResult {
        let fallback = |severity, message: String| RenderResult {
            tree: default_view(&syntax.extension_ref, &syntax.state_text),
            handlers: Vec::new(),
            cell: None,
            diagnostics: vec![Diagnostic::new(syntax.span, severity, message)],
        };
        let Some(def) = def else {
            return fallback(Severity::Warning, format!("unresolved extension {}", syntax.extension_ref));
        };
        let state = match deserialize_state(&syntax.state_text, &def.schema.defaults) {
            Ok(s) => s,
            Err(e) => return fallback(Severity::Info, format!("pending: {e}")),
        };
        match render_state(def, state, self.config.render_fuel) {
            Ok((tree, handlers, cell)) => RenderResult { tree, handlers, cell: Some(cell), diagnostics: Vec::new() },
            Err(message) => fallback(Severity::Error, message),
        }
    }

    /// Runs the handler `handler_id` of instance `id`. A state change
    /// yields an edit of the state literal (not yet applied to the buffer)
    /// and the view rendered from the new state.
    pub fn dispatch_event(
        &mut self,
        id: u64,
        handler_id: &str,
        payload: &BTreeMap<String, String>,
    ) -> Result<EventOutcome, SessionError> {
        let idx = self.instances.iter().position(|i| i.id == id).ok_or(SessionError::UnknownInstance(id))?;
        let stale = || SessionError::StaleHandler { instance_id: id, handler_id: handler_id.to_string() };
        let inst = &self.instances[idx];
        let handler = handler_id
            .strip_prefix('h')
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|n| inst.handlers.get(n))
            .cloned()
            .ok_or_else(stale)?;
        let (Some(Value::Cell(cell)), Some(def)) = (&inst.cell, inst.def.clone()) else {
            return Err(stale());
        };
        let before = cell.borrow().clone();
        let payload_value = Value::map(payload.iter().map(|(k, v)| (Value::keyword(k), Value::str(v))).collect());
        let args = match &handler {
            Value::Closure(c) if c.params.is_empty() && c.rest.is_none() => vec![],
            _ => vec![payload_value],
        };
        let mut interp = Interp::new(self.config.render_fuel);
        let result = interp.apply(&handler, &args);
        let after = cell.borrow().clone();
        let failed = |session: &mut Session, message: String| {
            if let Some(Value::Cell(c)) = &session.instances[idx].cell {
                *c.borrow_mut() = before.clone();
            }
            let d = Diagnostic::new(session.instances[idx].syntax.span, Severity::Error, message);
            Ok(EventOutcome { edit: None, tree: session.instances[idx].tree.clone(), diagnostics: vec![d] })
        };
        if let Err(e) = result {
            return failed(self, format!("handler {handler_id} failed: {}", describe(&e)));
        }
        if after == before {
            return Ok(EventOutcome { edit: None, tree: self.instances[idx].tree.clone(), diagnostics: Vec::new() });
        }
        let text = match serialize_state(&after) {
            Ok(t) => t,
            Err(e) => return failed(self, e.to_string()),
        };
        let edit = TextEdit {
            span: self.instances[idx].syntax.state_span,
            replacement: quote_string(&text),
            base_version: self.buffer.version,
        };
        // Re-render from the written-back text so the view matches what a
        // fresh scan of the edited buffer will show.
        let syntax = InstanceSyntax { state_text: text, ..self.instances[idx].syntax.clone() };
        let r = self.render(&syntax, Some(&def));
        let inst = &mut self.instances[idx];
        inst.tree = r.tree.clone();
        inst.handlers = r.handlers;
        inst.cell = r.cell;
        inst.diagnostics = r.diagnostics.clone();
        Ok(EventOutcome { edit: Some(edit), tree: r.tree, diagnostics: r.diagnostics })
    }

    /// An edit that sets instance `id` to `state`, for programmatic writes.
    pub fn set_state(&self, id: u64, state: &Value) -> Result<TextEdit, SessionError> {
        let inst = self.live(id)?;
        let text = serialize_state(state).map_err(|e| SessionError::Serialize(e.to_string()))?;
        Ok(TextEdit { span: inst.syntax.state_span, replacement: quote_string(&text), base_version: self.buffer.version })
    }

    /// Splices `edit` into the buffer and rescans. Returns the ids that were
    /// re-rendered.
    pub fn apply_edit(&mut self, edit: &TextEdit) -> Result<Vec<u64>, SessionError> {
        if edit.base_version != self.buffer.version {
            return Err(SessionError::VersionMismatch { expected: self.buffer.version, got: edit.base_version });
        }
        let len = self.buffer.text.chars().count();
        if edit.span.start > edit.span.end || edit.span.end > len {
            return Err(SessionError::InvalidSpan(edit.span));
        }
        let start = char_to_byte(&self.buffer.text, edit.span.start);
        let end = char_to_byte(&self.buffer.text, edit.span.end);
        self.buffer.text.replace_range(start..end, &edit.replacement);
        self.buffer.version += 1;
        Ok(self.rescan())
    }

    /// Replaces the whole text, as a client `change` carrying the full
    /// buffer would.
    pub fn replace_text(&mut self, text: &str) -> Vec<u64> {
        self.buffer.text = text.to_string();
        self.buffer.version += 1;
        self.rescan()
    }
}

fn describe(e: &EvalError) -> String {
    match e {
        EvalError::FuelExhausted { .. } => "fuel budget exhausted".to_string(),
        EvalError::Runtime(r) => r.message.clone(),
    }
}

/// Runs `def`'s render function on a fresh cell holding `state`.
pub fn render_state(def: &VisrDefinition, state: ValueMap, fuel: Fuel) -> Result<(ViewNode, Vec<Value>, Value), String> {
    let cell = Value::cell(Value::map(state));
    let mut interp = Interp::new(fuel);
    let value = interp
        .apply(&def.render_fn, std::slice::from_ref(&cell))
        .map_err(|e| format!("render of {} failed: {}", def.name, describe(&e)))?;
    let rendered = to_view_tree(&value).map_err(|e| e.to_string())?;
    Ok((rendered.tree, rendered.handlers, cell))
}
