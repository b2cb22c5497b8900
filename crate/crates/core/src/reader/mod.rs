//! Hybrid source reader.
//!
//! Parses `.mls` text into [`Form`]s that carry metadata and exact character
//! spans, and prints forms back to canonical text. The surface is a small
//! Clojure-like subset: lists, vectors, maps, keywords, namespaced symbols,
//! `^` metadata prefixes and `;` line comments.

mod parse;
mod print;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{read_all, read_one, read_prefix};
pub use print::{format_number, pretty, print_form, quote_string};

/// Half-open range of character offsets into a source buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// A possibly namespace-qualified name, as used by symbols and keywords.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym {
    pub ns: Option<String>,
    pub name: String,
}

impl Sym {
    pub fn new(name: impl Into<String>) -> Self {
        Sym { ns: None, name: name.into() }
    }

    pub fn qualified(ns: impl Into<String>, name: impl Into<String>) -> Self {
        Sym { ns: Some(ns.into()), name: name.into() }
    }

    /// Splits `ns/name` at the first slash. A lone `/` is the division symbol.
    pub fn parse(text: &str) -> Self {
        match text.find('/') {
            Some(idx) if idx > 0 && idx + 1 < text.len() => Sym {
                ns: Some(text[..idx].to_string()),
                name: text[idx + 1..].to_string(),
            },
            _ => Sym::new(text),
        }
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.ns {
            Some(ns) => write!(f, "{}/{}", ns, self.name),
            None => f.write_str(&self.name),
        }
    }
}

/// Metadata attached by a `^` prefix: keyword name to value.
pub type Meta = BTreeMap<Sym, Form>;

#[derive(Debug, Clone)]
pub enum FormKind {
    Nil,
    Bool(bool),
    Number(f64),
    Str(String),
    Symbol(Sym),
    Keyword(Sym),
    List(Vec<Form>),
    Vector(Vec<Form>),
    Map(Vec<(Form, Form)>),
}

/// A syntax tree node. Equality is structural and ignores spans.
#[derive(Debug, Clone)]
pub struct Form {
    pub kind: FormKind,
    pub meta: Option<Box<Meta>>,
    pub span: Span,
}

impl Form {
    pub fn new(kind: FormKind, span: Span) -> Self {
        Form { kind, meta: None, span }
    }

    pub fn nil(span: Span) -> Self {
        Form::new(FormKind::Nil, span)
    }

    pub fn number(n: f64, span: Span) -> Self {
        Form::new(FormKind::Number(n), span)
    }

    pub fn string(s: impl Into<String>, span: Span) -> Self {
        Form::new(FormKind::Str(s.into()), span)
    }

    pub fn symbol(text: &str, span: Span) -> Self {
        Form::new(FormKind::Symbol(Sym::parse(text)), span)
    }

    pub fn keyword(text: &str, span: Span) -> Self {
        Form::new(FormKind::Keyword(Sym::parse(text)), span)
    }

    pub fn list(items: Vec<Form>, span: Span) -> Self {
        Form::new(FormKind::List(items), span)
    }

    pub fn vector(items: Vec<Form>, span: Span) -> Self {
        Form::new(FormKind::Vector(items), span)
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = if meta.is_empty() { None } else { Some(Box::new(meta)) };
        self
    }

    pub fn as_symbol(&self) -> Option<&Sym> {
        match &self.kind {
            FormKind::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Form]> {
        match &self.kind {
            FormKind::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[Form]> {
        match &self.kind {
            FormKind::Vector(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match &self.kind {
            FormKind::Str(s) => Some(s),
            _ => None,
        }
    }

    /// The unqualified head symbol name of a list form, if any.
    pub fn head_name(&self) -> Option<&str> {
        let items = self.as_list()?;
        match &items.first()?.kind {
            FormKind::Symbol(s) if s.ns.is_none() => Some(&s.name),
            _ => None,
        }
    }

    pub fn is_symbol_named(&self, name: &str) -> bool {
        matches!(&self.kind, FormKind::Symbol(s) if s.ns.is_none() && s.name == name)
    }

    /// Looks up a metadata entry by unqualified keyword name.
    pub fn meta_get(&self, key: &str) -> Option<&Form> {
        self.meta.as_ref()?.get(&Sym::new(key))
    }

    pub fn children(&self) -> Box<dyn Iterator<Item = &Form> + '_> {
        match &self.kind {
            FormKind::List(items) | FormKind::Vector(items) => Box::new(items.iter()),
            FormKind::Map(pairs) => Box::new(pairs.iter().flat_map(|(k, v)| [k, v])),
            _ => Box::new(std::iter::empty()),
        }
    }

    /// Truthiness in the Lisp sense: everything except `nil` and `false`.
    pub fn is_truthy(&self) -> bool {
        !matches!(self.kind, FormKind::Nil | FormKind::Bool(false))
    }
}

impl PartialEq for FormKind {
    fn eq(&self, other: &Self) -> bool {
        use FormKind::*;
        match (self, other) {
            (Nil, Nil) => true,
            (Bool(a), Bool(b)) => a == b,
            (Number(a), Number(b)) => a == b || a.to_bits() == b.to_bits(),
            (Str(a), Str(b)) => a == b,
            (Symbol(a), Symbol(b)) | (Keyword(a), Keyword(b)) => a == b,
            (List(a), List(b)) | (Vector(a), Vector(b)) => a == b,
            (Map(a), Map(b)) => {
                a.len() == b.len()
                    && a.iter().all(|(k, v)| b.iter().any(|(k2, v2)| k == k2 && v == v2))
            }
            _ => false,
        }
    }
}

impl PartialEq for Form {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.meta == other.meta
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_form(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("read error at offset {offset}: {message}")]
pub struct ReadError {
    pub offset: usize,
    pub message: String,
}

/// 1-based line and column of a character offset, for diagnostics.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for ch in text.chars().take(offset) {
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

/// Slices `text` by a character span.
pub fn slice_chars(text: &str, span: Span) -> String {
    text.chars().skip(span.start).take(span.len()).collect()
}

/// Converts a character offset to a byte offset, clamping at the end.
pub fn char_to_byte(text: &str, offset: usize) -> usize {
    text.char_indices().nth(offset).map(|(b, _)| b).unwrap_or(text.len())
}
