//! Interactive-syntax extensions: definitions, instance detection and state
//! serialization.

mod registry;

pub use registry::{FsLoader, MemoryLoader, ModuleLoader, ModuleSource, Registry};

use std::collections::BTreeSet;
use std::rc::Rc;

use crate::elaborate::{ElaborationError, Phase};
use crate::interp::{
    literal_value, parse_params, value_to_form, Closure, ClosureKind, Env, FieldSchema, Interp, Value, ValueMap,
};
use crate::reader::{print_form, read_one, Form, FormKind, Span};

/// A registered extension.
pub struct VisrDefinition {
    /// Qualified name (`ns/Name`), or the bare name outside any namespace.
    pub name: String,
    pub schema: Rc<FieldSchema>,
    pub render_fn: Value,
    pub elaborate_fn: Value,
    /// Span of the defining form in its own source.
    pub span: Span,
}

impl VisrDefinition {
    /// The initial state built from the field inits.
    pub fn initial_state(&self) -> ValueMap {
        self.schema.defaults.clone()
    }
}

impl std::fmt::Debug for VisrDefinition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VisrDefinition").field("name", &self.name).field("fields", &self.schema.fields).finish()
    }
}

fn define_error(span: Span, message: impl Into<String>) -> ElaborationError {
    ElaborationError { span, phase: Phase::ElaborateRun, message: message.into() }
}

/// Evaluates a `(defvisr Name [field init ...] (render [this] ...) (elaborate [state] ...))`
/// form. The closures capture `env`; `ns` qualifies the name.
pub fn define_visr(form: &Form, env: &Env, ns: Option<&str>, interp: &mut Interp) -> Result<VisrDefinition, ElaborationError> {
    let span = form.span;
    let items = form.as_list().unwrap_or(&[]);
    let (name_form, fields_form, clauses) = match items {
        [_, name, fields, clauses @ ..] => (name, fields, clauses),
        _ => return Err(define_error(span, "defvisr expects a name, a field vector, a render and an elaborate clause")),
    };
    let name_sym = name_form.as_symbol().ok_or_else(|| define_error(name_form.span, "defvisr name must be a symbol"))?;
    let name = match (&name_sym.ns, ns) {
        (Some(_), _) => name_sym.to_string(),
        (None, Some(ns)) => format!("{ns}/{}", name_sym.name),
        (None, None) => name_sym.name.clone(),
    };
    let field_items =
        fields_form.as_vector().ok_or_else(|| define_error(fields_form.span, "defvisr fields must be a vector"))?;
    if field_items.len() % 2 != 0 {
        return Err(define_error(fields_form.span, "defvisr fields must be name/init pairs"));
    }
    let mut fields: Vec<Rc<str>> = Vec::new();
    let mut defaults = ValueMap::new();
    for pair in field_items.chunks(2) {
        let field = match &pair[0].kind {
            FormKind::Symbol(s) if s.ns.is_none() => s.name.clone(),
            _ => return Err(define_error(pair[0].span, "field names must be plain symbols")),
        };
        if fields.iter().any(|f| **f == *field) {
            return Err(define_error(pair[0].span, format!("duplicate field {field} in {name}")));
        }
        let init = interp
            .eval(&pair[1], env)
            .map_err(|e| define_error(pair[1].span, format!("init of field {field} failed: {e}")))?;
        if !init.is_serializable() {
            return Err(define_error(pair[1].span, format!("init of field {field} is not serializable data")));
        }
        defaults.insert(Value::keyword(&field), init);
        fields.push(Rc::from(field.as_str()));
    }
    let schema = Rc::new(FieldSchema { fields, defaults });

    let mut render = None;
    let mut elaborate = None;
    for clause in clauses {
        let (kind, slot) = match clause.head_name() {
            Some("render") => (ClosureKind::Render(schema.clone()), &mut render),
            Some("elaborate") => (ClosureKind::Elaborate(schema.clone()), &mut elaborate),
            _ => return Err(define_error(clause.span, "defvisr clauses must be (render [this] ...) or (elaborate [state] ...)")),
        };
        let label = clause.head_name().unwrap_or_default().to_string();
        if slot.is_some() {
            return Err(define_error(clause.span, format!("duplicate {label} clause in {name}")));
        }
        let parts = clause.as_list().unwrap_or(&[]);
        let Some(params) = parts.get(1) else {
            return Err(define_error(clause.span, format!("{label} clause needs a parameter vector")));
        };
        let (params, rest) = parse_params(params).map_err(|e| define_error(params.span, e.message()))?;
        if params.len() != 1 || rest.is_some() {
            return Err(define_error(clause.span, format!("{label} takes exactly one parameter")));
        }
        *slot = Some(Value::Closure(Rc::new(Closure {
            name: Some(Rc::from(format!("{name}/{label}").as_str())),
            params,
            rest: None,
            body: parts[2..].into(),
            env: env.clone(),
            kind,
        })));
    }
    let render_fn = render.ok_or_else(|| define_error(span, format!("defvisr {name} is missing a render clause")))?;
    let elaborate_fn = elaborate.ok_or_else(|| define_error(span, format!("defvisr {name} is missing an elaborate clause")))?;
    Ok(VisrDefinition { name, schema, render_fn, elaborate_fn, span })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot serialize state: {0}")]
pub struct SerializeError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot deserialize state: {0}")]
pub struct DeserializeError(pub String);

/// Canonical text of a state value: sorted map keys, shortest round-trip
/// numbers. Equal values always produce identical text.
pub fn serialize_state(state: &Value) -> Result<String, SerializeError> {
    if !state.is_serializable() {
        return Err(SerializeError(format!("state contains a non-data value: {state}")));
    }
    let form = value_to_form(state, Span::default()).map_err(SerializeError)?;
    Ok(print_form(&form))
}

/// Parses state text as a literal map, filling absent fields from
/// `defaults`. Keys unknown to the schema are kept as they are.
pub fn deserialize_state(text: &str, defaults: &ValueMap) -> Result<ValueMap, DeserializeError> {
    let form = read_one(text).map_err(|e| DeserializeError(e.to_string()))?;
    if !matches!(form.kind, FormKind::Map(_)) {
        return Err(DeserializeError(format!("state must be a map literal, got {}", print_form(&form))));
    }
    let Value::Map(map) = literal_value(&form).map_err(DeserializeError)? else {
        unreachable!("map form yields a map value");
    };
    let mut state = (*map).clone();
    for (k, v) in defaults {
        state.entry(k.clone()).or_insert_with(|| v.clone());
    }
    Ok(state)
}

/// One textual occurrence of an extension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSyntax {
    pub extension_ref: String,
    pub state_text: String,
    /// The whole instance including its metadata prefix.
    pub span: Span,
    /// The state string literal, quotes included.
    pub state_span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Detection {
    Instance(InstanceSyntax),
    NotInstance,
    /// Tagged `:visr` but not of the instance shape.
    Malformed(String),
}

pub const MALFORMED_INSTANCE: &str = "instance must apply symbol to one string";

/// Recognizes `^{:visr ...} (ext/Ref "state")` without resolving the reference.
pub fn detect_visr(form: &Form) -> Detection {
    match form.meta_get("visr") {
        Some(hint) if hint.is_truthy() => {}
        _ => return Detection::NotInstance,
    }
    match form.as_list() {
        Some([head, state]) => match (&head.kind, &state.kind) {
            (FormKind::Symbol(sym), FormKind::Str(text)) => Detection::Instance(InstanceSyntax {
                extension_ref: sym.to_string(),
                state_text: text.clone(),
                span: form.span,
                state_span: state.span,
            }),
            _ => Detection::Malformed(MALFORMED_INSTANCE.to_string()),
        },
        _ => Detection::Malformed(MALFORMED_INSTANCE.to_string()),
    }
}

/// Depth-first, textual-order list of instances in `forms`, plus
/// diagnostics for malformed `:visr` forms. Quoted data is not searched.
pub fn scan_instances(forms: &[Form]) -> (Vec<InstanceSyntax>, Vec<(Span, String)>) {
    fn walk(form: &Form, out: &mut Vec<InstanceSyntax>, bad: &mut Vec<(Span, String)>) {
        match detect_visr(form) {
            Detection::Instance(inst) => {
                out.push(inst);
                return;
            }
            Detection::Malformed(msg) => bad.push((form.span, msg)),
            Detection::NotInstance => {}
        }
        if form.head_name() == Some("quote") {
            return;
        }
        for child in form.children() {
            walk(child, out, bad);
        }
    }
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for form in forms {
        walk(form, &mut out, &mut bad);
    }
    (out, bad)
}

/// Names of the namespaces referenced by qualified symbols in `forms`.
pub fn referenced_namespaces(forms: &[Form]) -> Vec<(String, Span)> {
    fn walk(form: &Form, seen: &mut BTreeSet<String>, out: &mut Vec<(String, Span)>) {
        if let FormKind::Symbol(sym) = &form.kind {
            if let Some(ns) = &sym.ns {
                if seen.insert(ns.clone()) {
                    out.push((ns.clone(), form.span));
                }
            }
        }
        for child in form.children() {
            walk(child, seen, out);
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for form in forms {
        walk(form, &mut seen, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{stdlib, Fuel};
    use crate::reader::read_one;

    fn counter_form() -> Form {
        read_one("(defvisr Counter [count 0] (render [this] (text count)) (elaborate [state] count))").unwrap()
    }

    #[test]
    fn counter_initial_state() {
        let env = stdlib();
        let mut i = Interp::new(Fuel::new(10_000));
        let def = define_visr(&counter_form(), &env, Some("demo.counter"), &mut i).unwrap();
        assert_eq!(def.name, "demo.counter/Counter");
        assert_eq!(serialize_state(&Value::map(def.initial_state())).unwrap(), "{:count 0}");
    }

    #[test]
    fn missing_elaborate_is_named() {
        let env = stdlib();
        let mut i = Interp::new(Fuel::new(10_000));
        let form = read_one("(defvisr C [n 0] (render [this] n))").unwrap();
        let err = define_visr(&form, &env, None, &mut i).unwrap_err();
        assert!(err.message.contains("elaborate"), "{}", err.message);
    }

    #[test]
    fn duplicate_fields_rejected() {
        let env = stdlib();
        let mut i = Interp::new(Fuel::new(10_000));
        let form = read_one("(defvisr C [n 0 n 1] (render [this] n) (elaborate [s] n))").unwrap();
        assert!(define_visr(&form, &env, None, &mut i).unwrap_err().message.contains("duplicate"));
    }

    #[test]
    fn deserialize_fills_defaults_and_keeps_extras() {
        let defaults: ValueMap = [(Value::keyword("count"), Value::Number(0.0))].into_iter().collect();
        let s = deserialize_state("{}", &defaults).unwrap();
        assert_eq!(Value::map(s).to_string(), "{:count 0}");
        let s = deserialize_state("{:count 5 :extra \"x\"}", &defaults).unwrap();
        assert_eq!(Value::map(s).to_string(), "{:count 5 :extra \"x\"}");
        assert!(deserialize_state("(fn [] 1)", &defaults).is_err());
        assert!(deserialize_state("{:a b}", &defaults).is_err());
    }

    #[test]
    fn serialize_rejects_closures() {
        let env = stdlib();
        let f = env.lookup("inc").unwrap();
        let state: ValueMap = [(Value::keyword("f"), f)].into_iter().collect();
        assert!(serialize_state(&Value::map(state)).is_err());
    }

    #[test]
    fn detection_shapes() {
        let f = read_one("^{:visr true} (geometry.core/Diagram \"{:nodes []}\")").unwrap();
        match detect_visr(&f) {
            Detection::Instance(i) => {
                assert_eq!(i.extension_ref, "geometry.core/Diagram");
                assert_eq!(i.state_text, "{:nodes []}");
                assert_eq!(i.state_span, Span::new(37, 50));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(detect_visr(&read_one("(geometry.core/Diagram \"{}\")").unwrap()), Detection::NotInstance);
        assert_eq!(
            detect_visr(&read_one("^{:visr true} (f 1 2)").unwrap()),
            Detection::Malformed(MALFORMED_INSTANCE.to_string())
        );
        assert_eq!(detect_visr(&read_one("^{:visr false} (f \"{}\")").unwrap()), Detection::NotInstance);
    }
}
