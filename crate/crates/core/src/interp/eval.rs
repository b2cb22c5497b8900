use std::rc::Rc;

use super::convert::form_to_value;
use super::env::Env;
use super::error::{ErrorKind, EvalError};
use super::value::{Closure, ClosureKind, Value, ValueMap};
use super::Fuel;
use crate::reader::{Form, FormKind, Span};

/// Hard cap on nested evaluation depth. Recursion is normally cut off by
/// fuel first; this bounds memory when fuel is very large.
pub const MAX_EVAL_DEPTH: usize = 20_000;

/// Hidden binding holding the state cell inside a render body.
pub(crate) const STATE_BINDING: &str = "%visr-state";
/// Hidden binding holding the field keywords inside a render body.
pub(crate) const FIELDS_BINDING: &str = "%visr-fields";

pub const SPECIAL_FORMS: &[&str] = &[
    "quote", "def", "defn", "fn", "let", "if", "do", "and", "or", "when", "cond", "vlet", "set-field!", "ns",
];

pub fn is_special_form(name: &str) -> bool {
    SPECIAL_FORMS.contains(&name)
}

/// Evaluation context: the fuel budget, nesting depth and captured output
/// of one request.
pub struct Interp {
    fuel: Fuel,
    depth: usize,
    output: String,
}

fn syntax(message: impl Into<String>, span: Span) -> EvalError {
    EvalError::new(ErrorKind::Syntax, message).at(span)
}

impl Interp {
    pub fn new(fuel: Fuel) -> Self {
        Interp { fuel, depth: 0, output: String::new() }
    }

    pub fn fuel(&self) -> Fuel {
        self.fuel
    }

    /// Steps consumed so far out of `initial`.
    pub fn fuel_used(&self, initial: Fuel) -> u64 {
        initial.remaining - self.fuel.remaining
    }

    pub fn take_output(&mut self) -> String {
        std::mem::take(&mut self.output)
    }

    pub(crate) fn write_output(&mut self, text: &str) {
        self.output.push_str(text);
    }

    /// Charges `n` steps, for builtins whose work is proportional to size.
    pub fn charge(&mut self, n: u64) -> Result<(), EvalError> {
        self.fuel.consume(n).map_err(|_| EvalError::FuelExhausted { span: None })
    }

    pub fn eval(&mut self, form: &Form, env: &Env) -> Result<Value, EvalError> {
        self.depth += 1;
        let result = if self.depth > MAX_EVAL_DEPTH {
            Err(EvalError::new(ErrorKind::Depth, "maximum evaluation depth exceeded").at(form.span))
        } else {
            stacker::maybe_grow(128 * 1024, 2 * 1024 * 1024, || self.eval_form(form, env))
        };
        self.depth -= 1;
        result
    }

    pub fn eval_body(&mut self, body: &[Form], env: &Env) -> Result<Value, EvalError> {
        let mut last = Value::Nil;
        for form in body {
            last = self.eval(form, env)?;
        }
        Ok(last)
    }

    fn eval_form(&mut self, form: &Form, env: &Env) -> Result<Value, EvalError> {
        self.fuel.tick().map_err(|_| EvalError::FuelExhausted { span: Some(form.span) })?;
        match &form.kind {
            FormKind::Nil => Ok(Value::Nil),
            FormKind::Bool(b) => Ok(Value::Bool(*b)),
            FormKind::Number(n) => Ok(Value::Number(*n)),
            FormKind::Str(s) => Ok(Value::str(s)),
            FormKind::Keyword(k) => Ok(Value::keyword(&k.to_string())),
            FormKind::Symbol(sym) => {
                let found = match &sym.ns {
                    None => env.lookup(&sym.name),
                    Some(_) => env.lookup(&sym.to_string()),
                };
                found.ok_or_else(|| {
                    EvalError::new(ErrorKind::Unbound, format!("unbound symbol {sym}")).at(form.span)
                })
            }
            FormKind::Vector(items) => {
                let values = items.iter().map(|f| self.eval(f, env)).collect::<Result<Vec<_>, _>>()?;
                Ok(Value::vector(values))
            }
            FormKind::Map(pairs) => {
                let mut map = ValueMap::new();
                for (k, v) in pairs {
                    let key = self.eval(k, env)?;
                    let value = self.eval(v, env)?;
                    map.insert(key, value);
                }
                Ok(Value::map(map))
            }
            FormKind::List(items) => {
                let Some(head) = items.first() else {
                    return Ok(Value::list(Vec::new()));
                };
                if let Some(name) = form.head_name() {
                    if is_special_form(name) {
                        return self.eval_special(name, items, form.span, env);
                    }
                }
                let f = self.eval(head, env)?;
                let mut args = Vec::with_capacity(items.len() - 1);
                for arg in &items[1..] {
                    args.push(self.eval(arg, env)?);
                }
                self.apply(&f, &args).map_err(|e| e.at(form.span))
            }
        }
    }

    /// Applies a callable to already-evaluated arguments.
    pub fn apply(&mut self, f: &Value, args: &[Value]) -> Result<Value, EvalError> {
        self.fuel.tick().map_err(|_| EvalError::FuelExhausted { span: None })?;
        match f {
            Value::Closure(c) => self.apply_closure(c, args),
            Value::Native(n) => {
                if !n.arity.accepts(args.len()) {
                    return Err(EvalError::new(
                        ErrorKind::Arity,
                        format!("{} expects {} arguments, got {}", n.name, n.arity, args.len()),
                    ));
                }
                (n.func)(self, args)
            }
            Value::Keyword(_) | Value::Map(_) => {
                if args.is_empty() || args.len() > 2 {
                    return Err(EvalError::new(ErrorKind::Arity, format!("{f} as a function expects 1 or 2 arguments")));
                }
                let (map, key) = match f {
                    Value::Map(_) => (f, &args[0]),
                    _ => (&args[0], f),
                };
                let found = map.as_map().and_then(|m| m.get(key)).cloned();
                Ok(found.or_else(|| args.get(1).cloned()).unwrap_or(Value::Nil))
            }
            other => Err(EvalError::type_error(format!("{} is not a function", other.type_name()))),
        }
    }

    fn apply_closure(&mut self, closure: &Rc<Closure>, args: &[Value]) -> Result<Value, EvalError> {
        let required = closure.params.len();
        let ok = if closure.rest.is_some() { args.len() >= required } else { args.len() == required };
        if !ok {
            let name = closure.name.as_deref().unwrap_or("anonymous fn");
            return Err(EvalError::new(
                ErrorKind::Arity,
                format!("{name} expects {required}{} arguments, got {}", if closure.rest.is_some() { "+" } else { "" }, args.len()),
            ));
        }
        let frame = closure.env.child();
        if let Some(name) = &closure.name {
            frame.define(name, Value::Closure(closure.clone()));
        }
        for (param, arg) in closure.params.iter().zip(args) {
            frame.define(param, arg.clone());
        }
        if let Some(rest) = &closure.rest {
            frame.define(rest, Value::list(args[required..].to_vec()));
        }
        match &closure.kind {
            ClosureKind::Plain => {}
            ClosureKind::Render(schema) => {
                let Value::Cell(cell) = &args[0] else {
                    return Err(EvalError::type_error("render expects a state atom"));
                };
                let state = cell.borrow().clone();
                for field in &schema.fields {
                    let key = Value::keyword(field);
                    let current = state.as_map().and_then(|m| m.get(&key)).or_else(|| schema.defaults.get(&key));
                    frame.define(field, current.cloned().unwrap_or(Value::Nil));
                }
                frame.define(STATE_BINDING, args[0].clone());
                frame.define(
                    FIELDS_BINDING,
                    Value::vector(schema.fields.iter().map(|f| Value::keyword(f)).collect()),
                );
            }
            ClosureKind::Elaborate(schema) => {
                let Value::Str(text) = &args[0] else {
                    return Err(EvalError::type_error("elaborate expects the state as a string"));
                };
                let state = crate::visr::deserialize_state(text, &schema.defaults)
                    .map_err(|e| EvalError::other(e.to_string()))?;
                for field in &schema.fields {
                    let v = state.get(&Value::keyword(field)).cloned().unwrap_or(Value::Nil);
                    frame.define(field, v);
                }
            }
        }
        let mut last = Value::Nil;
        for form in closure.body.iter() {
            last = self.eval(form, &frame).map_err(|e| e.push_trace(form.span))?;
        }
        Ok(last)
    }

    fn eval_special(&mut self, name: &str, items: &[Form], span: Span, env: &Env) -> Result<Value, EvalError> {
        let args = &items[1..];
        match name {
            "quote" => match args {
                [form] => Ok(form_to_value(form)),
                _ => Err(syntax("quote expects exactly one form", span)),
            },
            "def" => {
                let [target, rest @ ..] = args else {
                    return Err(syntax("def expects a name", span));
                };
                let name = simple_name(target).ok_or_else(|| syntax("def expects a symbol name", target.span))?;
                let value = match rest {
                    [] => Value::Nil,
                    [expr] => self.eval(expr, env)?,
                    _ => return Err(syntax("def expects a name and one value", span)),
                };
                env.define(name, value);
                Ok(Value::Nil)
            }
            "defn" => {
                let [target, params, body @ ..] = args else {
                    return Err(syntax("defn expects a name, a parameter vector and a body", span));
                };
                let name = simple_name(target).ok_or_else(|| syntax("defn expects a symbol name", target.span))?;
                let closure = make_closure(Some(name), params, body, env)?;
                env.define(name, closure);
                Ok(Value::Nil)
            }
            "fn" => match args {
                [first, params, body @ ..] if first.as_symbol().is_some() => {
                    make_closure(simple_name(first), params, body, env)
                }
                [params, body @ ..] => make_closure(None, params, body, env),
                [] => Err(syntax("fn expects a parameter vector", span)),
            },
            "let" => {
                let [bindings, body @ ..] = args else {
                    return Err(syntax("let expects a binding vector", span));
                };
                let frame = env.child();
                self.bind_pairs(bindings, &frame)?;
                self.eval_body(body, &frame)
            }
            "if" => {
                let (cond, then, otherwise) = match args {
                    [c, t] => (c, t, None),
                    [c, t, e] => (c, t, Some(e)),
                    _ => return Err(syntax("if expects a condition and one or two branches", span)),
                };
                if self.eval(cond, env)?.is_truthy() {
                    self.eval(then, env)
                } else if let Some(e) = otherwise {
                    self.eval(e, env)
                } else {
                    Ok(Value::Nil)
                }
            }
            "do" => self.eval_body(args, env),
            "when" => {
                let [cond, body @ ..] = args else {
                    return Err(syntax("when expects a condition", span));
                };
                if self.eval(cond, env)?.is_truthy() {
                    self.eval_body(body, env)
                } else {
                    Ok(Value::Nil)
                }
            }
            "and" => {
                let mut last = Value::Bool(true);
                for arg in args {
                    last = self.eval(arg, env)?;
                    if !last.is_truthy() {
                        break;
                    }
                }
                Ok(last)
            }
            "or" => {
                let mut last = Value::Nil;
                for arg in args {
                    last = self.eval(arg, env)?;
                    if last.is_truthy() {
                        break;
                    }
                }
                Ok(last)
            }
            "cond" => {
                if !args.len().is_multiple_of(2) {
                    return Err(syntax("cond expects test/expression pairs", span));
                }
                for pair in args.chunks(2) {
                    if self.eval(&pair[0], env)?.is_truthy() {
                        return self.eval(&pair[1], env);
                    }
                }
                Ok(Value::Nil)
            }
            "vlet" => crate::elaborate::vlet(self, args, span, env),
            "set-field!" => self.set_field(args, span, env),
            "ns" => Ok(Value::Nil),
            _ => unreachable!("unknown special form {name}"),
        }
    }

    pub(crate) fn bind_pairs(&mut self, bindings: &Form, frame: &Env) -> Result<(), EvalError> {
        let Some(pairs) = bindings.as_vector() else {
            return Err(syntax("expected a binding vector", bindings.span));
        };
        if pairs.len() % 2 != 0 {
            return Err(syntax("binding vector needs an even number of forms", bindings.span));
        }
        for pair in pairs.chunks(2) {
            let name = simple_name(&pair[0]).ok_or_else(|| syntax("binding name must be a symbol", pair[0].span))?;
            let value = self.eval(&pair[1], frame)?;
            frame.define(name, value);
        }
        Ok(())
    }

    fn set_field(&mut self, args: &[Form], span: Span, env: &Env) -> Result<Value, EvalError> {
        let [field, expr] = args else {
            return Err(syntax("set-field! expects a field name and a value", span));
        };
        let field_name = match &field.kind {
            FormKind::Symbol(s) | FormKind::Keyword(s) if s.ns.is_none() => s.name.clone(),
            _ => return Err(syntax("set-field! expects a field name", field.span)),
        };
        let Some(Value::Cell(cell)) = env.lookup(STATE_BINDING) else {
            return Err(EvalError::other("set-field! used outside a render body").at(span));
        };
        let key = Value::keyword(&field_name);
        let known = env
            .lookup(FIELDS_BINDING)
            .and_then(|f| f.as_seq().map(|fields| fields.contains(&key)))
            .unwrap_or(false);
        if !known {
            return Err(EvalError::other(format!("unknown state field {field_name}")).at(field.span));
        }
        let value = self.eval(expr, env)?;
        let mut state = match &*cell.borrow() {
            Value::Map(m) => (**m).clone(),
            _ => ValueMap::new(),
        };
        state.insert(key, value.clone());
        *cell.borrow_mut() = Value::map(state);
        Ok(value)
    }
}

fn simple_name(form: &Form) -> Option<&str> {
    match &form.kind {
        FormKind::Symbol(s) if s.ns.is_none() => Some(&s.name),
        _ => None,
    }
}

/// Fixed parameter names plus the optional `&` rest name.
pub(crate) type Params = (Vec<Rc<str>>, Option<Rc<str>>);

pub(crate) fn parse_params(params: &Form) -> Result<Params, EvalError> {
    let Some(items) = params.as_vector() else {
        return Err(syntax("expected a parameter vector", params.span));
    };
    let mut names = Vec::new();
    let mut rest = None;
    let mut iter = items.iter();
    while let Some(p) = iter.next() {
        let name = simple_name(p).ok_or_else(|| syntax("parameters must be symbols", p.span))?;
        if name == "&" {
            let r = iter.next().and_then(simple_name).ok_or_else(|| syntax("& must be followed by a name", p.span))?;
            if iter.next().is_some() {
                return Err(syntax("only one parameter may follow &", p.span));
            }
            rest = Some(Rc::from(r));
        } else {
            names.push(Rc::from(name));
        }
    }
    Ok((names, rest))
}

fn make_closure(name: Option<&str>, params: &Form, body: &[Form], env: &Env) -> Result<Value, EvalError> {
    let (params, rest) = parse_params(params)?;
    Ok(Value::Closure(Rc::new(Closure {
        name: name.map(Rc::from),
        params,
        rest,
        body: body.into(),
        env: env.clone(),
        kind: ClosureKind::Plain,
    })))
}
