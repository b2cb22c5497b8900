//! `(vlet [instance anchor expr ...] body...)`: binds the identifiers an
//! instance's elaboration announces under `:keys` to the values of its
//! `:expr`, after binding the anchors the expression reads.

use crate::interp::{value_to_form, Env, ErrorKind, EvalError, Fuel, Interp, Value};
use crate::reader::{Form, Span};

pub(crate) fn vlet(interp: &mut Interp, args: &[Form], span: Span, env: &Env) -> Result<Value, EvalError> {
    let syntax = |msg: &str, at: Span| EvalError::new(ErrorKind::Syntax, msg).at(at);
    let [bindings, body @ ..] = args else {
        return Err(syntax("vlet expects a binding vector", span));
    };
    let Some(items) = bindings.as_vector() else {
        return Err(syntax("vlet expects a binding vector", bindings.span));
    };
    let Some((instance, anchors)) = items.split_first() else {
        return Err(syntax("vlet bindings must start with an instance", bindings.span));
    };
    if anchors.len() % 2 != 0 {
        return Err(syntax("vlet anchors must be name/value pairs", bindings.span));
    }

    let spec = interp.eval(instance, env)?;
    let keys = match spec.get_kw("keys").and_then(Value::as_seq) {
        Some(keys) => keys.iter().map(binder_name).collect::<Result<Vec<_>, _>>().map_err(|e| e.at(instance.span))?,
        None => return Err(EvalError::type_error("vlet instance must yield a map with :keys").at(instance.span)),
    };
    let expr = spec.get_kw("expr").cloned().unwrap_or(Value::Nil);

    let frame = env.child();
    for pair in anchors.chunks(2) {
        let Some(name) = pair[0].as_symbol().filter(|s| s.ns.is_none()) else {
            return Err(syntax("vlet anchor names must be symbols", pair[0].span));
        };
        let value = interp.eval(&pair[1], &frame)?;
        frame.define(&name.name, value);
    }
    let expr = value_to_form(&expr, instance.span).map_err(|e| EvalError::other(e).at(instance.span))?;
    let values = interp.eval(&expr, &frame)?;
    let values = values.as_seq().ok_or_else(|| {
        EvalError::type_error(format!("vlet :expr must yield a vector, got {}", values.type_name())).at(instance.span)
    })?;
    if values.len() != keys.len() {
        return Err(EvalError::new(
            ErrorKind::Arity,
            format!("vlet :expr yielded {} values for {} keys", values.len(), keys.len()),
        )
        .at(instance.span));
    }
    for (key, value) in keys.iter().zip(values) {
        frame.define(key, value.clone());
    }
    interp.eval_body(body, &frame)
}

fn binder_name(v: &Value) -> Result<String, EvalError> {
    match v {
        Value::Symbol(s) | Value::Str(s) | Value::Keyword(s) if !s.contains('/') => Ok(s.to_string()),
        other => Err(EvalError::type_error(format!("vlet key {other} is not a plain name"))),
    }
}

/// Evaluates a whole `(vlet ...)` form.
pub fn eval_vlet(form: &Form, env: &Env, fuel: &mut Fuel) -> Result<Value, EvalError> {
    if form.head_name() != Some("vlet") {
        return Err(EvalError::new(ErrorKind::Syntax, "not a vlet form").at(form.span));
    }
    crate::interp::eval(form, env, fuel)
}
