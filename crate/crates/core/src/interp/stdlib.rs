//! The root environment: the builtins available to programs, render and
//! elaborate bodies alike.

use std::collections::BTreeSet;
use std::rc::Rc;

use super::convert::form_to_value;
use super::env::{Env, WeakEnv};
use super::error::{ErrorKind, EvalError};
use super::eval::{is_special_form, Interp};
use super::value::{Arity, Native, Value, ValueMap, ViewValue};
use crate::reader::read_one;
use crate::view::Tag;

type R = Result<Value, EvalError>;

/// A fresh root environment holding every builtin.
pub fn stdlib() -> Env {
    let env = Env::empty();
    arithmetic(&env);
    predicates(&env);
    collections(&env);
    higher_order(&env);
    strings(&env);
    cells_and_io(&env);
    code(&env);
    geometry(&env);
    views(&env);
    env
}

pub fn native(name: &str, arity: Arity, f: impl Fn(&mut Interp, &[Value]) -> R + 'static) -> Value {
    Value::Native(Rc::new(Native { name: Rc::from(name), arity, func: Rc::new(f) }))
}

fn def(env: &Env, name: &str, arity: Arity, f: impl Fn(&mut Interp, &[Value]) -> R + 'static) {
    env.define(name, native(name, arity, f));
}

fn num(v: &Value, who: &str) -> Result<f64, EvalError> {
    match v {
        Value::Number(n) => Ok(*n),
        other => Err(EvalError::type_error(format!("{who} expects a number, got {}", other.type_name()))),
    }
}

fn int(v: &Value, who: &str) -> Result<i64, EvalError> {
    let n = num(v, who)?;
    if n.fract() != 0.0 || !n.is_finite() {
        return Err(EvalError::type_error(format!("{who} expects an integer, got {}", v)));
    }
    Ok(n as i64)
}

fn string<'a>(v: &'a Value, who: &str) -> Result<&'a str, EvalError> {
    match v {
        Value::Str(s) => Ok(s),
        other => Err(EvalError::type_error(format!("{who} expects a string, got {}", other.type_name()))),
    }
}

/// Items of a list, vector, map (as `[k v]` pairs), string (as chars) or nil.
fn seq(v: &Value, who: &str) -> Result<Vec<Value>, EvalError> {
    match v {
        Value::Nil => Ok(Vec::new()),
        Value::List(items) | Value::Vector(items) => Ok(items.to_vec()),
        Value::Map(m) => Ok(m.iter().map(|(k, v)| Value::vector(vec![k.clone(), v.clone()])).collect()),
        Value::Str(s) => Ok(s.chars().map(|c| Value::str(&c.to_string())).collect()),
        other => Err(EvalError::type_error(format!("{who} expects a collection, got {}", other.type_name()))),
    }
}

fn map_of(v: &Value, who: &str) -> Result<ValueMap, EvalError> {
    match v {
        Value::Nil => Ok(ValueMap::new()),
        Value::Map(m) => Ok((**m).clone()),
        other => Err(EvalError::type_error(format!("{who} expects a map, got {}", other.type_name()))),
    }
}

/// Fuel for builtins that copy or walk a collection.
fn size_cost(n: usize) -> u64 {
    1 + n as u64 / 8
}

fn fold_numbers(args: &[Value], who: &str, init: f64, op: fn(f64, f64) -> f64) -> R {
    let mut acc = init;
    for a in args {
        acc = op(acc, num(a, who)?);
    }
    Ok(Value::Number(acc))
}

fn compare_chain(args: &[Value], who: &str, ok: fn(f64, f64) -> bool) -> R {
    for pair in args.windows(2) {
        if !ok(num(&pair[0], who)?, num(&pair[1], who)?) {
            return Ok(Value::Bool(false));
        }
    }
    Ok(Value::Bool(true))
}

fn arithmetic(env: &Env) {
    use Arity::*;
    def(env, "+", AtLeast(0), |_, a| fold_numbers(a, "+", 0.0, |x, y| x + y));
    def(env, "*", AtLeast(0), |_, a| fold_numbers(a, "*", 1.0, |x, y| x * y));
    def(env, "-", AtLeast(1), |_, a| {
        let first = num(&a[0], "-")?;
        if a.len() == 1 {
            return Ok(Value::Number(-first));
        }
        fold_numbers(&a[1..], "-", first, |x, y| x - y)
    });
    def(env, "/", AtLeast(1), |_, a| {
        let first = num(&a[0], "/")?;
        if a.len() == 1 {
            return Ok(Value::Number(1.0 / first));
        }
        fold_numbers(&a[1..], "/", first, |x, y| x / y)
    });
    def(env, "mod", Exact(2), |_, a| Ok(Value::Number(num(&a[0], "mod")?.rem_euclid(num(&a[1], "mod")?))));
    def(env, "inc", Exact(1), |_, a| Ok(Value::Number(num(&a[0], "inc")? + 1.0)));
    def(env, "dec", Exact(1), |_, a| Ok(Value::Number(num(&a[0], "dec")? - 1.0)));
    def(env, "min", AtLeast(1), |_, a| fold_numbers(&a[1..], "min", num(&a[0], "min")?, f64::min));
    def(env, "max", AtLeast(1), |_, a| fold_numbers(&a[1..], "max", num(&a[0], "max")?, f64::max));
    def(env, "abs", Exact(1), |_, a| Ok(Value::Number(num(&a[0], "abs")?.abs())));
    def(env, "sqrt", Exact(1), |_, a| Ok(Value::Number(num(&a[0], "sqrt")?.sqrt())));
    def(env, "floor", Exact(1), |_, a| Ok(Value::Number(num(&a[0], "floor")?.floor())));
    def(env, "ceil", Exact(1), |_, a| Ok(Value::Number(num(&a[0], "ceil")?.ceil())));
    def(env, "round", Exact(1), |_, a| Ok(Value::Number(num(&a[0], "round")?.round())));
    def(env, "pow", Exact(2), |_, a| Ok(Value::Number(num(&a[0], "pow")?.powf(num(&a[1], "pow")?))));

    def(env, "=", AtLeast(1), |_, a| Ok(Value::Bool(a.windows(2).all(|p| p[0] == p[1]))));
    def(env, "==", AtLeast(1), |_, a| Ok(Value::Bool(a.windows(2).all(|p| p[0] == p[1]))));
    def(env, "not=", AtLeast(1), |_, a| Ok(Value::Bool(!a.windows(2).all(|p| p[0] == p[1]))));
    def(env, "<", AtLeast(1), |_, a| compare_chain(a, "<", |x, y| x < y));
    def(env, ">", AtLeast(1), |_, a| compare_chain(a, ">", |x, y| x > y));
    def(env, "<=", AtLeast(1), |_, a| compare_chain(a, "<=", |x, y| x <= y));
    def(env, ">=", AtLeast(1), |_, a| compare_chain(a, ">=", |x, y| x >= y));
    def(env, "not", Exact(1), |_, a| Ok(Value::Bool(!a[0].is_truthy())));
    def(env, "identity", Exact(1), |_, a| Ok(a[0].clone()));
}

fn predicates(env: &Env) {
    fn pred(env: &Env, name: &str, test: fn(&Value) -> bool) {
        def(env, name, Arity::Exact(1), move |_, a| Ok(Value::Bool(test(&a[0]))));
    }
    pred(env, "nil?", |v| matches!(v, Value::Nil));
    pred(env, "some?", |v| !matches!(v, Value::Nil));
    pred(env, "number?", |v| matches!(v, Value::Number(_)));
    pred(env, "string?", |v| matches!(v, Value::Str(_)));
    pred(env, "boolean?", |v| matches!(v, Value::Bool(_)));
    pred(env, "keyword?", |v| matches!(v, Value::Keyword(_)));
    pred(env, "symbol?", |v| matches!(v, Value::Symbol(_)));
    pred(env, "list?", |v| matches!(v, Value::List(_)));
    pred(env, "vector?", |v| matches!(v, Value::Vector(_)));
    pred(env, "map?", |v| matches!(v, Value::Map(_)));
    pred(env, "coll?", |v| matches!(v, Value::List(_) | Value::Vector(_) | Value::Map(_)));
    pred(env, "fn?", |v| matches!(v, Value::Closure(_) | Value::Native(_)));
    pred(env, "atom?", |v| matches!(v, Value::Cell(_)));
    pred(env, "view?", |v| matches!(v, Value::View(_)));
    pred(env, "zero?", |v| matches!(v, Value::Number(n) if *n == 0.0));
    pred(env, "pos?", |v| matches!(v, Value::Number(n) if *n > 0.0));
    pred(env, "neg?", |v| matches!(v, Value::Number(n) if *n < 0.0));
    pred(env, "even?", |v| matches!(v, Value::Number(n) if n.rem_euclid(2.0) == 0.0));
    pred(env, "odd?", |v| matches!(v, Value::Number(n) if n.rem_euclid(2.0) == 1.0));
    pred(env, "serializable?", Value::is_serializable);
    def(env, "empty?", Arity::Exact(1), |_, a| {
        Ok(Value::Bool(match &a[0] {
            Value::Nil => true,
            Value::Str(s) => s.is_empty(),
            Value::Map(m) => m.is_empty(),
            other => seq(other, "empty?")?.is_empty(),
        }))
    });
    def(env, "type", Arity::Exact(1), |_, a| Ok(Value::keyword(a[0].type_name())));
}

fn get(coll: &Value, key: &Value) -> Option<Value> {
    match coll {
        Value::Map(m) => m.get(key).cloned(),
        Value::Vector(items) | Value::List(items) => match key {
            Value::Number(n) if *n >= 0.0 && n.fract() == 0.0 => items.get(*n as usize).cloned(),
            _ => None,
        },
        Value::Annotated(a) => get(&a.0, key),
        _ => None,
    }
}

fn assoc(coll: &Value, key: Value, value: Value) -> R {
    match coll {
        Value::Nil | Value::Map(_) => {
            let mut m = map_of(coll, "assoc")?;
            m.insert(key, value);
            Ok(Value::map(m))
        }
        Value::Vector(items) => {
            let i = int(&key, "assoc")?;
            let mut items = items.to_vec();
            match usize::try_from(i) {
                Ok(i) if i < items.len() => items[i] = value,
                Ok(i) if i == items.len() => items.push(value),
                _ => return Err(EvalError::other(format!("assoc index {i} out of bounds"))),
            }
            Ok(Value::vector(items))
        }
        other => Err(EvalError::type_error(format!("assoc expects a map or vector, got {}", other.type_name()))),
    }
}

fn conj(coll: &Value, items: &[Value]) -> R {
    match coll {
        Value::Nil | Value::List(_) => {
            let mut out: Vec<Value> = items.iter().rev().cloned().collect();
            out.extend(seq(coll, "conj")?);
            Ok(Value::list(out))
        }
        Value::Vector(v) => {
            let mut out = v.to_vec();
            out.extend_from_slice(items);
            Ok(Value::vector(out))
        }
        Value::Map(m) => {
            let mut out = (**m).clone();
            for item in items {
                match item {
                    Value::Vector(pair) if pair.len() == 2 => {
                        out.insert(pair[0].clone(), pair[1].clone());
                    }
                    Value::Map(other) => out.extend(other.iter().map(|(k, v)| (k.clone(), v.clone()))),
                    _ => return Err(EvalError::type_error("conj onto a map expects [key value] pairs")),
                }
            }
            Ok(Value::map(out))
        }
        other => Err(EvalError::type_error(format!("conj expects a collection, got {}", other.type_name()))),
    }
}

fn collections(env: &Env) {
    use Arity::*;
    def(env, "list", AtLeast(0), |_, a| Ok(Value::list(a.to_vec())));
    def(env, "vector", AtLeast(0), |_, a| Ok(Value::vector(a.to_vec())));
    def(env, "vec", Exact(1), |i, a| {
        let items = seq(&a[0], "vec")?;
        i.charge(size_cost(items.len()))?;
        Ok(Value::vector(items))
    });
    def(env, "hash-map", AtLeast(0), |_, a| {
        if a.len() % 2 != 0 {
            return Err(EvalError::other("hash-map expects key/value pairs"));
        }
        Ok(Value::map(a.chunks(2).map(|p| (p[0].clone(), p[1].clone())).collect()))
    });
    def(env, "get", Between(2, 3), |_, a| Ok(get(&a[0], &a[1]).or_else(|| a.get(2).cloned()).unwrap_or(Value::Nil)));
    def(env, "get-in", Between(2, 3), |_, a| {
        let mut cur = Some(a[0].clone());
        for k in seq(&a[1], "get-in")? {
            cur = cur.and_then(|c| get(&c, &k));
        }
        Ok(cur.or_else(|| a.get(2).cloned()).unwrap_or(Value::Nil))
    });
    def(env, "assoc", AtLeast(3), |i, a| {
        if a.len() % 2 != 1 {
            return Err(EvalError::other("assoc expects key/value pairs"));
        }
        let mut out = a[0].clone();
        for kv in a[1..].chunks(2) {
            i.charge(size_cost(count(&out)))?;
            out = assoc(&out, kv[0].clone(), kv[1].clone())?;
        }
        Ok(out)
    });
    def(env, "assoc-in", Exact(3), |i, a| {
        let path = seq(&a[1], "assoc-in")?;
        i.charge(size_cost(path.len()))?;
        fn go(coll: &Value, path: &[Value], v: Value) -> R {
            match path {
                [] => Ok(v),
                [k, rest @ ..] => {
                    let inner = get(coll, k).unwrap_or(Value::Nil);
                    assoc(coll, k.clone(), go(&inner, rest, v)?)
                }
            }
        }
        go(&a[0], &path, a[2].clone())
    });
    def(env, "dissoc", AtLeast(1), |i, a| {
        let mut m = map_of(&a[0], "dissoc")?;
        i.charge(size_cost(m.len()))?;
        for k in &a[1..] {
            m.remove(k);
        }
        Ok(Value::map(m))
    });
    def(env, "conj", AtLeast(1), |i, a| {
        i.charge(size_cost(count(&a[0])))?;
        conj(&a[0], &a[1..])
    });
    def(env, "into", Exact(2), |i, a| {
        let items = seq(&a[1], "into")?;
        i.charge(size_cost(count(&a[0]) + items.len()))?;
        conj(&a[0], &items)
    });
    def(env, "cons", Exact(2), |i, a| {
        let mut items = vec![a[0].clone()];
        items.extend(seq(&a[1], "cons")?);
        i.charge(size_cost(items.len()))?;
        Ok(Value::list(items))
    });
    def(env, "count", Exact(1), |_, a| match &a[0] {
        Value::Nil | Value::List(_) | Value::Vector(_) | Value::Map(_) | Value::Str(_) => {
            Ok(Value::Number(count(&a[0]) as f64))
        }
        other => Err(EvalError::type_error(format!("count expects a collection, got {}", other.type_name()))),
    });
    def(env, "nth", Between(2, 3), |_, a| {
        let items = seq(&a[0], "nth")?;
        let i = int(&a[1], "nth")?;
        match usize::try_from(i).ok().and_then(|i| items.get(i)) {
            Some(v) => Ok(v.clone()),
            None => a.get(2).cloned().ok_or_else(|| EvalError::other(format!("nth index {i} out of bounds"))),
        }
    });
    def(env, "first", Exact(1), |_, a| Ok(seq(&a[0], "first")?.into_iter().next().unwrap_or(Value::Nil)));
    def(env, "second", Exact(1), |_, a| Ok(seq(&a[0], "second")?.into_iter().nth(1).unwrap_or(Value::Nil)));
    def(env, "last", Exact(1), |_, a| Ok(seq(&a[0], "last")?.pop().unwrap_or(Value::Nil)));
    def(env, "rest", Exact(1), |i, a| {
        let items = seq(&a[0], "rest")?;
        i.charge(size_cost(items.len()))?;
        Ok(Value::vector(items.into_iter().skip(1).collect()))
    });
    def(env, "keys", Exact(1), |_, a| Ok(Value::vector(map_of(&a[0], "keys")?.into_keys().collect())));
    def(env, "vals", Exact(1), |_, a| Ok(Value::vector(map_of(&a[0], "vals")?.into_values().collect())));
    def(env, "contains?", Exact(2), |_, a| {
        Ok(Value::Bool(match &a[0] {
            Value::Map(m) => m.contains_key(&a[1]),
            Value::Vector(_) | Value::List(_) => get(&a[0], &a[1]).is_some(),
            Value::Nil => false,
            other => return Err(EvalError::type_error(format!("contains? expects a collection, got {}", other.type_name()))),
        }))
    });
    def(env, "index-of", Exact(2), |_, a| {
        let items = seq(&a[0], "index-of")?;
        Ok(items.iter().position(|x| *x == a[1]).map_or(Value::Nil, |p| Value::Number(p as f64)))
    });
    def(env, "concat", AtLeast(0), |i, a| {
        let mut out = Vec::new();
        for coll in a {
            out.extend(seq(coll, "concat")?);
        }
        i.charge(size_cost(out.len()))?;
        Ok(Value::vector(out))
    });
    def(env, "range", Between(1, 3), |i, a| {
        let (start, end, step) = match a {
            [end] => (0.0, num(end, "range")?, 1.0),
            [start, end] => (num(start, "range")?, num(end, "range")?, 1.0),
            _ => (num(&a[0], "range")?, num(&a[1], "range")?, num(&a[2], "range")?),
        };
        if step == 0.0 {
            return Err(EvalError::other("range step must not be zero"));
        }
        let len = ((end - start) / step).ceil().max(0.0);
        if !len.is_finite() {
            return Err(EvalError::other("range is unbounded"));
        }
        i.charge(len as u64 + 1)?;
        Ok(Value::vector((0..len as u64).map(|k| Value::Number(start + k as f64 * step)).collect()))
    });
    def(env, "reverse", Exact(1), |i, a| {
        let mut items = seq(&a[0], "reverse")?;
        i.charge(size_cost(items.len()))?;
        items.reverse();
        Ok(Value::vector(items))
    });
    def(env, "sort", Exact(1), |i, a| {
        let mut items = seq(&a[0], "sort")?;
        i.charge(items.len() as u64 + 1)?;
        items.sort();
        Ok(Value::vector(items))
    });
    def(env, "distinct", Exact(1), |i, a| {
        let items = seq(&a[0], "distinct")?;
        i.charge(items.len() as u64 + 1)?;
        let mut seen = BTreeSet::new();
        Ok(Value::vector(items.into_iter().filter(|x| seen.insert(x.clone())).collect()))
    });
    def(env, "take", Exact(2), |i, a| {
        let n = int(&a[0], "take")?.max(0) as usize;
        let items = seq(&a[1], "take")?;
        i.charge(size_cost(n.min(items.len())))?;
        Ok(Value::vector(items.into_iter().take(n).collect()))
    });
    def(env, "drop", Exact(2), |i, a| {
        let n = int(&a[0], "drop")?.max(0) as usize;
        let items = seq(&a[1], "drop")?;
        i.charge(size_cost(items.len()))?;
        Ok(Value::vector(items.into_iter().skip(n).collect()))
    });
    def(env, "zipmap", Exact(2), |i, a| {
        let ks = seq(&a[0], "zipmap")?;
        let vs = seq(&a[1], "zipmap")?;
        i.charge(size_cost(ks.len()))?;
        Ok(Value::map(ks.into_iter().zip(vs).collect()))
    });
    def(env, "merge", AtLeast(0), |i, a| {
        let mut out = ValueMap::new();
        for m in a {
            let m = map_of(m, "merge")?;
            i.charge(size_cost(m.len()))?;
            out.extend(m);
        }
        Ok(Value::map(out))
    });
}

fn count(v: &Value) -> usize {
    match v {
        Value::List(items) | Value::Vector(items) => items.len(),
        Value::Map(m) => m.len(),
        Value::Str(s) => s.chars().count(),
        _ => 0,
    }
}

fn higher_order(env: &Env) {
    use Arity::*;
    def(env, "apply", AtLeast(2), |i, a| {
        let (f, rest) = (&a[0], &a[1..]);
        let mut args = rest[..rest.len() - 1].to_vec();
        args.extend(seq(&rest[rest.len() - 1], "apply")?);
        i.apply(f, &args)
    });
    def(env, "map", AtLeast(2), |i, a| map_many(i, &a[0], &a[1..]).map(Value::vector));
    def(env, "mapv", AtLeast(2), |i, a| map_many(i, &a[0], &a[1..]).map(Value::vector));
    def(env, "map-indexed", Exact(2), |i, a| {
        let mut out = Vec::new();
        for (k, x) in seq(&a[1], "map-indexed")?.into_iter().enumerate() {
            out.push(i.apply(&a[0], &[Value::Number(k as f64), x])?);
        }
        Ok(Value::vector(out))
    });
    def(env, "filter", Exact(2), |i, a| keep(i, &a[0], &a[1], true));
    def(env, "remove", Exact(2), |i, a| keep(i, &a[0], &a[1], false));
    def(env, "reduce", Between(2, 3), |i, a| {
        let (mut acc, items) = match a {
            [_, coll] => {
                let mut items = seq(coll, "reduce")?.into_iter();
                match items.next() {
                    Some(first) => (first, items.collect::<Vec<_>>()),
                    None => return i.apply(&a[0], &[]),
                }
            }
            [_, init, coll] => (init.clone(), seq(coll, "reduce")?),
            _ => unreachable!(),
        };
        for x in items {
            acc = i.apply(&a[0], &[acc, x])?;
        }
        Ok(acc)
    });
    def(env, "some", Exact(2), |i, a| {
        for x in seq(&a[1], "some")? {
            let r = i.apply(&a[0], &[x])?;
            if r.is_truthy() {
                return Ok(r);
            }
        }
        Ok(Value::Nil)
    });
    def(env, "every?", Exact(2), |i, a| {
        for x in seq(&a[1], "every?")? {
            if !i.apply(&a[0], &[x])?.is_truthy() {
                return Ok(Value::Bool(false));
            }
        }
        Ok(Value::Bool(true))
    });
    def(env, "sort-by", Exact(2), |i, a| {
        let items = seq(&a[1], "sort-by")?;
        let mut keyed = Vec::with_capacity(items.len());
        for x in items {
            keyed.push((i.apply(&a[0], std::slice::from_ref(&x))?, x));
        }
        keyed.sort_by(|p, q| p.0.cmp(&q.0));
        Ok(Value::vector(keyed.into_iter().map(|p| p.1).collect()))
    });
    def(env, "update", AtLeast(3), |i, a| {
        let old = get(&a[0], &a[1]).unwrap_or(Value::Nil);
        let mut args = vec![old];
        args.extend_from_slice(&a[3..]);
        let new = i.apply(&a[2], &args)?;
        i.charge(size_cost(count(&a[0])))?;
        assoc(&a[0], a[1].clone(), new)
    });
    def(env, "try-call", Exact(2), |i, a| match i.apply(&a[0], &[]) {
        Err(e) if e.is_fuel_exhausted() => Err(e),
        Err(_) => Ok(a[1].clone()),
        ok => ok,
    });
}

fn map_many(i: &mut Interp, f: &Value, colls: &[Value]) -> Result<Vec<Value>, EvalError> {
    let seqs = colls.iter().map(|c| seq(c, "map")).collect::<Result<Vec<_>, _>>()?;
    let len = seqs.iter().map(Vec::len).min().unwrap_or(0);
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        let args: Vec<Value> = seqs.iter().map(|s| s[k].clone()).collect();
        out.push(i.apply(f, &args)?);
    }
    Ok(out)
}

fn keep(i: &mut Interp, f: &Value, coll: &Value, wanted: bool) -> R {
    let mut out = Vec::new();
    for x in seq(coll, "filter")? {
        if i.apply(f, std::slice::from_ref(&x))?.is_truthy() == wanted {
            out.push(x);
        }
    }
    Ok(Value::vector(out))
}

fn strings(env: &Env) {
    use Arity::*;
    def(env, "str", AtLeast(0), |i, a| {
        i.charge(size_cost(a.len()))?;
        Ok(Value::str(&a.iter().map(Value::display_string).collect::<String>()))
    });
    def(env, "subs", Between(2, 3), |_, a| {
        let chars: Vec<char> = string(&a[0], "subs")?.chars().collect();
        let start = int(&a[1], "subs")?;
        let end = match a.get(2) {
            Some(e) => int(e, "subs")?,
            None => chars.len() as i64,
        };
        if start < 0 || end < start || end as usize > chars.len() {
            return Err(EvalError::other(format!("subs range {start}..{end} out of bounds")));
        }
        Ok(Value::str(&chars[start as usize..end as usize].iter().collect::<String>()))
    });
    def(env, "split", Exact(2), |_, a| {
        let s = string(&a[0], "split")?;
        let sep = string(&a[1], "split")?;
        if sep.is_empty() {
            return Ok(Value::vector(s.chars().map(|c| Value::str(&c.to_string())).collect()));
        }
        Ok(Value::vector(s.split(sep).map(Value::str).collect()))
    });
    def(env, "join", Between(1, 2), |_, a| {
        let (sep, coll) = match a {
            [coll] => ("", coll),
            [sep, coll] => (string(sep, "join")?, coll),
            _ => unreachable!(),
        };
        let parts: Vec<String> = seq(coll, "join")?.iter().map(Value::display_string).collect();
        Ok(Value::str(&parts.join(sep)))
    });
    def(env, "trim", Exact(1), |_, a| Ok(Value::str(string(&a[0], "trim")?.trim())));
    def(env, "starts-with?", Exact(2), |_, a| {
        Ok(Value::Bool(string(&a[0], "starts-with?")?.starts_with(string(&a[1], "starts-with?")?)))
    });
    def(env, "includes?", Exact(2), |_, a| {
        Ok(Value::Bool(string(&a[0], "includes?")?.contains(string(&a[1], "includes?")?)))
    });
    def(env, "parse-number", Exact(1), |_, a| {
        Ok(string(&a[0], "parse-number")?.trim().parse::<f64>().map_or(Value::Nil, Value::Number))
    });
    def(env, "symbol", Exact(1), |_, a| Ok(Value::symbol(string(&a[0], "symbol")?)));
    def(env, "keyword", Exact(1), |_, a| match &a[0] {
        Value::Keyword(_) => Ok(a[0].clone()),
        other => Ok(Value::keyword(string(other, "keyword")?)),
    });
    def(env, "name", Exact(1), |_, a| match &a[0] {
        Value::Str(_) => Ok(a[0].clone()),
        Value::Keyword(s) | Value::Symbol(s) => {
            Ok(Value::str(s.rsplit_once('/').map_or(&**s, |(_, n)| if n.is_empty() { s } else { n })))
        }
        other => Err(EvalError::type_error(format!("name expects a keyword, symbol or string, got {}", other.type_name()))),
    });
}

fn cells_and_io(env: &Env) {
    use Arity::*;
    def(env, "atom", Exact(1), |_, a| Ok(Value::cell(a[0].clone())));
    def(env, "deref", Exact(1), |_, a| match &a[0] {
        Value::Cell(c) => Ok(c.borrow().clone()),
        other => Err(EvalError::type_error(format!("deref expects an atom, got {}", other.type_name()))),
    });
    def(env, "reset!", Exact(2), |_, a| match &a[0] {
        Value::Cell(c) => {
            *c.borrow_mut() = a[1].clone();
            Ok(a[1].clone())
        }
        other => Err(EvalError::type_error(format!("reset! expects an atom, got {}", other.type_name()))),
    });
    def(env, "swap!", AtLeast(2), |i, a| {
        let Value::Cell(c) = &a[0] else {
            return Err(EvalError::type_error(format!("swap! expects an atom, got {}", a[0].type_name())));
        };
        let mut args = vec![c.borrow().clone()];
        args.extend_from_slice(&a[2..]);
        let new = i.apply(&a[1], &args)?;
        *c.borrow_mut() = new.clone();
        Ok(new)
    });
    def(env, "throw", Exact(1), |_, a| Err(EvalError::new(ErrorKind::Thrown, a[0].display_string())));
    def(env, "error", AtLeast(1), |_, a| {
        let msg: Vec<String> = a.iter().map(Value::display_string).collect();
        Err(EvalError::new(ErrorKind::Thrown, msg.join(" ")))
    });
    def(env, "println", AtLeast(0), |i, a| {
        let parts: Vec<String> = a.iter().map(Value::display_string).collect();
        i.write_output(&parts.join(" "));
        i.write_output("\n");
        Ok(Value::Nil)
    });
    def(env, "print", AtLeast(0), |i, a| {
        let parts: Vec<String> = a.iter().map(Value::display_string).collect();
        i.write_output(&parts.join(" "));
        Ok(Value::Nil)
    });
    def(env, "prn", AtLeast(0), |i, a| {
        let parts: Vec<String> = a.iter().map(Value::to_string).collect();
        i.write_output(&parts.join(" "));
        i.write_output("\n");
        Ok(Value::Nil)
    });
}

fn code(env: &Env) {
    use Arity::*;
    def(env, "read-string", Exact(1), |_, a| {
        let form = read_one(string(&a[0], "read-string")?).map_err(|e| EvalError::other(e.to_string()))?;
        Ok(form_to_value(&form))
    });
    def(env, "with-meta", Exact(2), |_, a| {
        let meta = map_of(&a[1], "with-meta")?;
        let inner = match &a[0] {
            Value::Annotated(x) => x.0.clone(),
            other => other.clone(),
        };
        Ok(if meta.is_empty() { inner } else { Value::Annotated(Rc::new((inner, meta))) })
    });
    def(env, "meta", Exact(1), |_, a| match &a[0] {
        Value::Annotated(x) => Ok(Value::map(x.1.clone())),
        _ => Ok(Value::Nil),
    });
    def(env, "serialize-state", Exact(1), |_, a| {
        crate::visr::serialize_state(&a[0]).map(|s| Value::str(&s)).map_err(|e| EvalError::other(e.to_string()))
    });
    def(env, "deserialize-state", Between(1, 2), |_, a| {
        let defaults = match a.get(1) {
            Some(d) => map_of(d, "deserialize-state")?,
            None => ValueMap::new(),
        };
        crate::visr::deserialize_state(string(&a[0], "deserialize-state")?, &defaults)
            .map(Value::map)
            .map_err(|e| EvalError::other(e.to_string()))
    });
    let root: WeakEnv = env.downgrade();
    def(env, "free-symbols", Exact(1), move |i, a| {
        let mut out = BTreeSet::new();
        free_symbols(&a[0], &mut Vec::new(), &mut out);
        i.charge(size_cost(out.len()))?;
        let root = root.upgrade();
        Ok(Value::vector(
            out.into_iter()
                .filter(|name| !root.as_ref().is_some_and(|r| r.is_bound(name)))
                .map(|name| Value::str(&name))
                .collect(),
        ))
    });
}

/// Collects unqualified symbols referenced but not bound within `code`,
/// skipping special-form heads and quoted data.
pub fn free_symbols(code: &Value, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match code {
        Value::Symbol(s) => {
            if !s.contains('/') && !bound.iter().any(|b| **b == **s) && !is_special_form(s) {
                out.insert(s.to_string());
            }
        }
        Value::Annotated(a) => free_symbols(&a.0, bound, out),
        Value::Vector(items) => items.iter().for_each(|x| free_symbols(x, bound, out)),
        Value::Map(m) => m.iter().for_each(|(k, v)| {
            free_symbols(k, bound, out);
            free_symbols(v, bound, out);
        }),
        Value::List(items) => {
            let head = match items.first() {
                Some(Value::Symbol(s)) => &**s,
                _ => "",
            };
            let mark = bound.len();
            match head {
                "quote" => {}
                "fn" => {
                    let mut rest = &items[1..];
                    if let Some(Value::Symbol(name)) = rest.first() {
                        bound.push(name.to_string());
                        rest = &rest[1..];
                    }
                    if let Some(Value::Vector(params)) = rest.first() {
                        bound.extend(params.iter().filter_map(symbol_text));
                        rest = &rest[1..];
                    }
                    rest.iter().for_each(|x| free_symbols(x, bound, out));
                }
                "let" | "vlet" => {
                    if let Some(Value::Vector(pairs)) = items.get(1) {
                        for (k, pair) in pairs.chunks(2).enumerate() {
                            if head == "vlet" && k == 0 {
                                free_symbols(&pair[0], bound, out);
                                if let Some(v) = pair.get(1) {
                                    free_symbols(v, bound, out);
                                }
                                continue;
                            }
                            if let Some(v) = pair.get(1) {
                                free_symbols(v, bound, out);
                            }
                            bound.extend(symbol_text(&pair[0]));
                        }
                    }
                    items.iter().skip(2).for_each(|x| free_symbols(x, bound, out));
                }
                "def" | "defn" => {
                    if let Some(name) = items.get(1).and_then(symbol_text) {
                        bound.push(name);
                    }
                    let mut rest = &items[2.min(items.len())..];
                    if head == "defn" {
                        if let Some(Value::Vector(params)) = rest.first() {
                            bound.extend(params.iter().filter_map(symbol_text));
                            rest = &rest[1..];
                        }
                    }
                    rest.iter().for_each(|x| free_symbols(x, bound, out));
                }
                "set-field!" => items.iter().skip(2).for_each(|x| free_symbols(x, bound, out)),
                _ => items.iter().for_each(|x| free_symbols(x, bound, out)),
            }
            bound.truncate(mark);
        }
        _ => {}
    }
}

fn symbol_text(v: &Value) -> Option<String> {
    match v {
        Value::Symbol(s) => Some(s.to_string()),
        _ => None,
    }
}

fn point(v: &Value, who: &str) -> Result<(f64, f64), EvalError> {
    match v.as_seq() {
        Some([x, y]) => Ok((num(x, who)?, num(y, who)?)),
        _ => Err(EvalError::type_error(format!("{who} expects a point [x y], got {v}"))),
    }
}

fn geometry(env: &Env) {
    // (compute-mid-points [[name from to weight] ...] {name [x y] ...})
    // Each spec may refer to anchors or to points derived earlier in the list.
    def(env, "compute-mid-points", Arity::Exact(2), |i, a| {
        let specs = seq(&a[0], "compute-mid-points")?;
        let mut known = map_of(&a[1], "compute-mid-points")?;
        i.charge(size_cost(specs.len()))?;
        let mut out = Vec::with_capacity(specs.len());
        for spec in &specs {
            let Some([name, from, to, weight]) = spec.as_seq() else {
                return Err(EvalError::type_error(format!("midpoint spec must be [name from to weight], got {spec}")));
            };
            let lookup = |k: &Value| {
                known
                    .get(k)
                    .ok_or_else(|| EvalError::other(format!("midpoint refers to unknown node {}", k.display_string())))
                    .and_then(|p| point(p, "compute-mid-points"))
            };
            let (fx, fy) = lookup(from)?;
            let (tx, ty) = lookup(to)?;
            let w = num(weight, "compute-mid-points")?;
            let p = Value::vector(vec![Value::Number(fx + w * (tx - fx)), Value::Number(fy + w * (ty - fy))]);
            known.insert(name.clone(), p.clone());
            out.push(p);
        }
        Ok(Value::vector(out))
    });
}

fn flatten_children(args: &[Value], out: &mut Vec<Value>) -> Result<(), EvalError> {
    for a in args {
        match a {
            Value::Nil => {}
            Value::View(_) => out.push(a.clone()),
            Value::Str(_) | Value::Number(_) | Value::Keyword(_) | Value::Bool(_) => out.push(text_node(a.display_string())),
            Value::List(items) | Value::Vector(items) => flatten_children(items, out)?,
            other => return Err(EvalError::type_error(format!("a {} cannot be a view child", other.type_name()))),
        }
    }
    Ok(())
}

fn text_node(content: String) -> Value {
    Value::View(Rc::new(ViewValue {
        tag: Tag::Text,
        attrs: vec![("content".to_string(), Value::str(&content))],
        handlers: Vec::new(),
        children: Vec::new(),
    }))
}

fn make_view(tag: Tag, args: &[Value]) -> R {
    let (attr_map, rest) = match args.first() {
        Some(Value::Map(m)) => (Some(m.clone()), &args[1..]),
        _ => (None, args),
    };
    let mut attrs = Vec::new();
    let mut handlers = Vec::new();
    for (k, v) in attr_map.iter().flat_map(|m| m.iter()) {
        let key = match k {
            Value::Keyword(s) | Value::Str(s) => s.to_string(),
            other => return Err(EvalError::type_error(format!("view attribute names must be keywords, got {other}"))),
        };
        match key.strip_prefix("on-") {
            Some(event) if matches!(v, Value::Closure(_) | Value::Native(_)) => handlers.push((event.to_string(), v.clone())),
            _ => attrs.push((key, v.clone())),
        }
    }
    let mut children = Vec::new();
    if tag == Tag::Text {
        let content: String = rest.iter().map(Value::display_string).collect();
        attrs.retain(|(k, _)| k != "content");
        attrs.push(("content".to_string(), Value::str(&content)));
    } else {
        flatten_children(rest, &mut children)?;
    }
    Ok(Value::View(Rc::new(ViewValue { tag, attrs, handlers, children })))
}

fn views(env: &Env) {
    for tag in Tag::ALL {
        def(env, tag.as_str(), Arity::AtLeast(0), move |i, a| {
            i.charge(size_cost(a.len()))?;
            make_view(tag, a)
        });
    }
}
