//! Compile-time rewriting of instances into runtime code.

mod vlet;

pub use vlet::eval_vlet;
pub(crate) use vlet::vlet;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::interp::{value_to_form, Env, Fuel, Interp, Value};
use crate::reader::{read_all, Form, FormKind, Span};
use crate::visr::{define_visr, deserialize_state, detect_visr, referenced_namespaces, Detection, Registry};

/// Instances found in elaborated output are elaborated again, up to this
/// many levels.
pub const MAX_NESTING: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Resolve,
    Deserialize,
    ElaborateRun,
    Splice,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Resolve => "resolve",
            Phase::Deserialize => "deserialize",
            Phase::ElaborateRun => "elaborate-run",
            Phase::Splice => "splice",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{phase} error at {span}: {message}")]
pub struct ElaborationError {
    pub span: Span,
    pub phase: Phase,
    pub message: String,
}

impl ElaborationError {
    fn new(span: Span, phase: Phase, message: impl Into<String>) -> Self {
        ElaborationError { span, phase, message: message.into() }
    }
}

/// One elaboration pass over a program, sharing a single fuel budget.
pub struct Elaborator<'r> {
    registry: &'r mut Registry,
    interp: Interp,
    ns: Option<String>,
    /// Environment in which in-program `defvisr` forms are evaluated.
    compile_env: Env,
    collected: Option<Vec<ElaborationError>>,
}

impl<'r> Elaborator<'r> {
    pub fn new(registry: &'r mut Registry, fuel: Fuel) -> Self {
        let compile_env = registry.globals().child();
        Elaborator { registry, interp: Interp::new(fuel), ns: None, compile_env, collected: None }
    }

    /// Keeps going after errors, replacing each failed instance with `nil`;
    /// errors are returned by [`Elaborator::take_errors`].
    pub fn collecting(mut self) -> Self {
        self.collected = Some(Vec::new());
        self
    }

    pub fn take_errors(&mut self) -> Vec<ElaborationError> {
        self.collected.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn fuel(&self) -> Fuel {
        self.interp.fuel()
    }

    pub fn namespace(&self) -> Option<&str> {
        self.ns.as_deref()
    }

    pub fn program(&mut self, forms: &[Form]) -> Result<Vec<Form>, ElaborationError> {
        self.preload(forms)?;
        let mut out = Vec::with_capacity(forms.len());
        for form in forms {
            if let Some(ns) = ns_declaration(form) {
                self.ns = Some(ns);
            }
            out.push(self.form(form, 0)?);
        }
        Ok(out)
    }

    /// Loads every module named by a qualified symbol so both instances and
    /// plain references resolve. A module's references to itself are left
    /// for run time.
    fn preload(&mut self, forms: &[Form]) -> Result<(), ElaborationError> {
        for (ns, span) in referenced_namespaces(forms) {
            if self.ns.as_deref() == Some(ns.as_str()) {
                continue;
            }
            if let Err(e) = self.ensure_module(&ns, span) {
                self.fail(e)?;
            }
        }
        Ok(())
    }

    fn fail(&mut self, err: ElaborationError) -> Result<(), ElaborationError> {
        match &mut self.collected {
            Some(errors) => {
                errors.push(err);
                Ok(())
            }
            None => Err(err),
        }
    }

    /// Loads `ns` if a module provides it. A namespace with no module is
    /// not an error here; the reference fails later if it is needed.
    pub fn ensure_module(&mut self, ns: &str, span: Span) -> Result<bool, ElaborationError> {
        if self.registry.is_loaded(ns) {
            return Ok(true);
        }
        if self.registry.loading.iter().any(|n| n == ns) {
            return Err(ElaborationError::new(span, Phase::Resolve, format!("module {ns} depends on itself")));
        }
        let source = match self.registry.fetch_module(ns) {
            Ok(Some(src)) => src,
            Ok(None) => return Ok(false),
            Err(e) => return Err(ElaborationError::new(span, Phase::Resolve, e)),
        };
        let located = |msg: String| ElaborationError::new(span, Phase::Resolve, format!("in module {}: {msg}", source.origin));
        let forms = read_all(&source.text).map_err(|e| located(e.to_string()))?;
        self.registry.loading.push(ns.to_string());
        let result = self.load_forms(ns, &forms);
        self.registry.loading.pop();
        let env = result.map_err(|e| located(e.to_string()))?;
        self.registry.add_module(ns, env);
        Ok(true)
    }

    fn load_forms(&mut self, ns: &str, forms: &[Form]) -> Result<Env, ElaborationError> {
        let env = self.registry.globals().child();
        let saved_ns = self.ns.replace(ns.to_string());
        let saved_env = std::mem::replace(&mut self.compile_env, env.clone());
        let saved_errors = self.collected.take();
        let result = (|| {
            self.preload(forms)?;
            for form in forms {
                let form = self.form(form, 0)?;
                self.interp
                    .eval(&form, &env)
                    .map_err(|e| ElaborationError::new(e.span().unwrap_or(form.span), Phase::ElaborateRun, e.to_string()))?;
            }
            Ok(())
        })();
        self.ns = saved_ns;
        self.compile_env = saved_env;
        self.collected = saved_errors;
        result.map(|()| env)
    }

    /// Elaborates one form found at nesting level `depth`.
    pub fn form(&mut self, form: &Form, depth: usize) -> Result<Form, ElaborationError> {
        match detect_visr(form) {
            Detection::Instance(inst) => {
                return match self.instance(&inst.extension_ref, &inst.state_text, inst.span, depth) {
                    Ok(f) => Ok(f),
                    Err(e) => self.fail(e).map(|()| Form::nil(form.span)),
                };
            }
            Detection::Malformed(msg) => {
                return self
                    .fail(ElaborationError::new(form.span, Phase::Resolve, msg))
                    .map(|()| Form::nil(form.span));
            }
            Detection::NotInstance => {}
        }
        match form.head_name() {
            Some("quote") => return Ok(form.clone()),
            Some("defvisr") => {
                let env = self.compile_env.clone();
                let ns = self.ns.clone();
                match define_visr(form, &env, ns.as_deref(), &mut self.interp) {
                    Ok(def) => {
                        self.registry.register(def);
                    }
                    Err(e) => self.fail(e)?,
                }
                return Ok(Form::nil(form.span));
            }
            _ => {}
        }
        let kind = match &form.kind {
            FormKind::List(items) => FormKind::List(self.forms(items, depth)?),
            FormKind::Vector(items) => FormKind::Vector(self.forms(items, depth)?),
            FormKind::Map(pairs) => FormKind::Map(
                pairs
                    .iter()
                    .map(|(k, v)| Ok((self.form(k, depth)?, self.form(v, depth)?)))
                    .collect::<Result<_, ElaborationError>>()?,
            ),
            _ => return Ok(form.clone()),
        };
        Ok(Form { kind, meta: form.meta.clone(), span: form.span })
    }

    fn forms(&mut self, items: &[Form], depth: usize) -> Result<Vec<Form>, ElaborationError> {
        items.iter().map(|f| self.form(f, depth)).collect()
    }

    fn instance(&mut self, extension_ref: &str, state_text: &str, span: Span, depth: usize) -> Result<Form, ElaborationError> {
        if depth >= MAX_NESTING {
            return Err(ElaborationError::new(
                span,
                Phase::Splice,
                format!("instances nested more than {MAX_NESTING} levels deep"),
            ));
        }
        if let Some((ns, _)) = extension_ref.split_once('/') {
            self.ensure_module(ns, span)?;
        }
        let def = self.registry.lookup(extension_ref, self.ns.as_deref()).ok_or_else(|| {
            ElaborationError::new(span, Phase::Resolve, format!("unknown extension {extension_ref}"))
        })?;
        deserialize_state(state_text, &def.schema.defaults)
            .map_err(|e| ElaborationError::new(span, Phase::Deserialize, e.to_string()))?;
        let code = self
            .interp
            .apply(&def.elaborate_fn, &[Value::str(state_text)])
            .map_err(|e| ElaborationError::new(span, Phase::ElaborateRun, format!("{extension_ref}: {}", e.message())))?;
        let generated = value_to_form(&code, span).map_err(|e| ElaborationError::new(span, Phase::Splice, e))?;
        self.form(&generated, depth + 1)
    }
}

fn ns_declaration(form: &Form) -> Option<String> {
    match form.as_list()? {
        [head, name, ..] if head.is_symbol_named("ns") => name.as_symbol().map(|s| s.to_string()),
        _ => None,
    }
}

/// Elaborates a whole program with one shared fuel budget, stopping at the
/// first error.
pub fn elaborate_program(forms: &[Form], registry: &mut Registry, fuel: &mut Fuel) -> Result<Vec<Form>, ElaborationError> {
    let mut elab = Elaborator::new(registry, *fuel);
    let result = elab.program(forms);
    *fuel = elab.fuel();
    result
}
