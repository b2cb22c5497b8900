//! Conversions between syntax ([`Form`]) and data ([`Value`]).

use std::rc::Rc;

use super::value::{Value, ValueMap};
use crate::reader::{Form, FormKind, Meta, Span, Sym};

/// The value of `(quote form)`. Metadata survives as [`Value::Annotated`].
pub fn form_to_value(form: &Form) -> Value {
    let value = match &form.kind {
        FormKind::Nil => Value::Nil,
        FormKind::Bool(b) => Value::Bool(*b),
        FormKind::Number(n) => Value::Number(*n),
        FormKind::Str(s) => Value::str(s),
        FormKind::Symbol(s) => Value::symbol(&s.to_string()),
        FormKind::Keyword(s) => Value::keyword(&s.to_string()),
        FormKind::List(items) => Value::list(items.iter().map(form_to_value).collect()),
        FormKind::Vector(items) => Value::vector(items.iter().map(form_to_value).collect()),
        FormKind::Map(pairs) => {
            Value::map(pairs.iter().map(|(k, v)| (form_to_value(k), form_to_value(v))).collect())
        }
    };
    match &form.meta {
        Some(meta) => {
            let meta: ValueMap =
                meta.iter().map(|(k, v)| (Value::keyword(&k.to_string()), form_to_value(v))).collect();
            Value::Annotated(Rc::new((value, meta)))
        }
        None => value,
    }
}

/// Turns a code value back into syntax, stamping every node with `span`.
/// Fails on values that have no textual form (functions, cells, views).
pub fn value_to_form(value: &Value, span: Span) -> Result<Form, String> {
    let kind = match value {
        Value::Nil => FormKind::Nil,
        Value::Bool(b) => FormKind::Bool(*b),
        Value::Number(n) => FormKind::Number(*n),
        Value::Str(s) => FormKind::Str(s.to_string()),
        Value::Symbol(s) => FormKind::Symbol(Sym::parse(s)),
        Value::Keyword(k) => FormKind::Keyword(Sym::parse(k)),
        Value::List(items) => FormKind::List(convert_items(items, span)?),
        Value::Vector(items) => FormKind::Vector(convert_items(items, span)?),
        Value::Map(m) => FormKind::Map(
            m.iter()
                .map(|(k, v)| Ok((value_to_form(k, span)?, value_to_form(v, span)?)))
                .collect::<Result<_, String>>()?,
        ),
        Value::Annotated(a) => {
            let form = value_to_form(&a.0, span)?;
            let mut meta = Meta::new();
            for (k, v) in a.1.iter() {
                let Value::Keyword(name) = k else {
                    return Err(format!("metadata key {k} is not a keyword"));
                };
                meta.insert(Sym::parse(name), value_to_form(v, span)?);
            }
            return Ok(form.with_meta(meta));
        }
        other => return Err(format!("a {} has no textual form", other.type_name())),
    };
    Ok(Form::new(kind, span))
}

fn convert_items(items: &[Value], span: Span) -> Result<Vec<Form>, String> {
    items.iter().map(|v| value_to_form(v, span)).collect()
}

/// Reads a form as inert data: literals, keywords and collections only.
/// Symbols (which would need evaluation) and metadata are rejected.
pub fn literal_value(form: &Form) -> Result<Value, String> {
    if form.meta.is_some() {
        return Err("metadata is not allowed in literal data".to_string());
    }
    Ok(match &form.kind {
        FormKind::Nil => Value::Nil,
        FormKind::Bool(b) => Value::Bool(*b),
        FormKind::Number(n) => Value::Number(*n),
        FormKind::Str(s) => Value::str(s),
        FormKind::Keyword(s) => Value::keyword(&s.to_string()),
        FormKind::Symbol(s) => return Err(format!("symbol {s} is not literal data")),
        FormKind::List(items) => Value::list(items.iter().map(literal_value).collect::<Result<_, _>>()?),
        FormKind::Vector(items) => Value::vector(items.iter().map(literal_value).collect::<Result<_, _>>()?),
        FormKind::Map(pairs) => Value::map(
            pairs
                .iter()
                .map(|(k, v)| Ok((literal_value(k)?, literal_value(v)?)))
                .collect::<Result<_, String>>()?,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::read_one;

    #[test]
    fn quote_roundtrip_keeps_metadata() {
        let form = read_one("^:visr (a/B \"{}\" [1 :k {\"s\" nil}])").unwrap();
        let value = form_to_value(&form);
        assert!(matches!(value, Value::Annotated(_)));
        let back = value_to_form(&value, Span::default()).unwrap();
        assert_eq!(back, form);
    }

    #[test]
    fn literal_rejects_symbols() {
        assert!(literal_value(&read_one("{:a [1 2]}").unwrap()).is_ok());
        assert!(literal_value(&read_one("{:a x}").unwrap()).is_err());
    }

    #[test]
    fn cells_have_no_text() {
        assert!(value_to_form(&Value::cell(Value::Nil), Span::default()).is_err());
    }
}
