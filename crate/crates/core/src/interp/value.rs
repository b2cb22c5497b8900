use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use super::env::Env;
use super::error::EvalError;
use super::eval::Interp;
use crate::reader::{format_number, quote_string, Form};
use crate::view::Tag;

pub type ValueMap = BTreeMap<Value, Value>;

/// A runtime value. Closures, natives and cells compare by identity; all
/// other variants compare structurally.
#[derive(Clone)]
pub enum Value {
    Nil,
    Bool(bool),
    Number(f64),
    Str(Rc<str>),
    /// Keyword text without the leading colon.
    Keyword(Rc<str>),
    Symbol(Rc<str>),
    List(Rc<Vec<Value>>),
    Vector(Rc<Vec<Value>>),
    Map(Rc<ValueMap>),
    Closure(Rc<Closure>),
    Native(Rc<Native>),
    Cell(Rc<RefCell<Value>>),
    View(Rc<ViewValue>),
    /// Code value carrying reader metadata; produced by `with-meta` and by
    /// quoting annotated forms so generated code can contain instances.
    Annotated(Rc<(Value, ValueMap)>),
}

pub struct Closure {
    pub name: Option<Rc<str>>,
    pub params: Vec<Rc<str>>,
    pub rest: Option<Rc<str>>,
    pub body: Rc<[Form]>,
    pub env: Env,
    pub kind: ClosureKind,
}

/// How arguments are bound before the body runs. The two visr kinds bind
/// the extension's state fields implicitly.
#[derive(Clone)]
pub enum ClosureKind {
    Plain,
    Render(Rc<FieldSchema>),
    Elaborate(Rc<FieldSchema>),
}

/// Field names of an extension's state plus their initial values.
#[derive(Debug, Clone)]
pub struct FieldSchema {
    pub fields: Vec<Rc<str>>,
    pub defaults: ValueMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exact(usize),
    AtLeast(usize),
    Between(usize, usize),
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exact(k) => n == k,
            Arity::AtLeast(k) => n >= k,
            Arity::Between(lo, hi) => lo <= n && n <= hi,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exact(k) => write!(f, "{k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
            Arity::Between(lo, hi) => write!(f, "{lo} to {hi}"),
        }
    }
}

pub type NativeFn = Rc<dyn Fn(&mut Interp, &[Value]) -> Result<Value, EvalError>>;

pub struct Native {
    pub name: Rc<str>,
    pub arity: Arity,
    pub func: NativeFn,
}

/// A node produced by the view constructors (`button`, `svg-circle`, ...).
/// Converted to a transport-level [`crate::view::ViewNode`] after render.
#[derive(Clone)]
pub struct ViewValue {
    pub tag: Tag,
    pub attrs: Vec<(String, Value)>,
    pub handlers: Vec<(String, Value)>,
    pub children: Vec<Value>,
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn keyword(s: &str) -> Value {
        Value::Keyword(Rc::from(s))
    }

    pub fn symbol(s: &str) -> Value {
        Value::Symbol(Rc::from(s))
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(items))
    }

    pub fn vector(items: Vec<Value>) -> Value {
        Value::Vector(Rc::new(items))
    }

    pub fn map(entries: ValueMap) -> Value {
        Value::Map(Rc::new(entries))
    }

    pub fn cell(v: Value) -> Value {
        Value::Cell(Rc::new(RefCell::new(v)))
    }

    pub fn is_truthy(&self) -> bool {
        !matches!(self, Value::Nil | Value::Bool(false))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Nil => "nil",
            Value::Bool(_) => "boolean",
            Value::Number(_) => "number",
            Value::Str(_) => "string",
            Value::Keyword(_) => "keyword",
            Value::Symbol(_) => "symbol",
            Value::List(_) => "list",
            Value::Vector(_) => "vector",
            Value::Map(_) => "map",
            Value::Closure(_) => "function",
            Value::Native(_) => "native function",
            Value::Cell(_) => "atom",
            Value::View(_) => "view",
            Value::Annotated(_) => "annotated code",
        }
    }

    pub fn is_callable(&self) -> bool {
        matches!(self, Value::Closure(_) | Value::Native(_) | Value::Keyword(_) | Value::Map(_))
    }

    pub fn as_map(&self) -> Option<&ValueMap> {
        match self {
            Value::Map(m) => Some(m),
            _ => None,
        }
    }

    /// Items of a list or vector.
    pub fn as_seq(&self) -> Option<&[Value]> {
        match self {
            Value::List(v) | Value::Vector(v) => Some(v),
            _ => None,
        }
    }

    /// Convenience lookup of a keyword key in a map value.
    pub fn get_kw(&self, key: &str) -> Option<&Value> {
        self.as_map()?.get(&Value::keyword(key))
    }

    /// Whether the value lies in the serializable subset: plain data with
    /// no functions, cells, views, symbols or metadata anywhere inside.
    pub fn is_serializable(&self) -> bool {
        match self {
            Value::Nil | Value::Bool(_) | Value::Number(_) | Value::Str(_) | Value::Keyword(_) => true,
            Value::List(items) | Value::Vector(items) => items.iter().all(Value::is_serializable),
            Value::Map(m) => m.iter().all(|(k, v)| k.is_serializable() && v.is_serializable()),
            _ => false,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Nil => 0,
            Value::Bool(_) => 1,
            Value::Number(_) => 2,
            Value::Str(_) => 3,
            Value::Keyword(_) => 4,
            Value::Symbol(_) => 5,
            Value::List(_) => 6,
            Value::Vector(_) => 7,
            Value::Map(_) => 8,
            Value::Closure(_) => 9,
            Value::Native(_) => 10,
            Value::Cell(_) => 11,
            Value::View(_) => 12,
            Value::Annotated(_) => 13,
        }
    }

    /// Text used by `str` and `println`: strings unquoted, everything else
    /// in readable form.
    pub fn display_string(&self) -> String {
        match self {
            Value::Nil => String::new(),
            Value::Str(s) => s.to_string(),
            other => other.to_string(),
        }
    }
}

fn cmp_number(a: f64, b: f64) -> Ordering {
    // -0.0 and 0.0 are the same value; NaN sorts after everything.
    (a + 0.0).total_cmp(&(b + 0.0))
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        use Value::*;
        match (self, other) {
            (Nil, Nil) => Ordering::Equal,
            (Bool(a), Bool(b)) => a.cmp(b),
            (Number(a), Number(b)) => cmp_number(*a, *b),
            (Str(a), Str(b)) | (Keyword(a), Keyword(b)) | (Symbol(a), Symbol(b)) => a.cmp(b),
            (List(a), List(b)) | (Vector(a), Vector(b)) => a.iter().cmp(b.iter()),
            (Map(a), Map(b)) => a.iter().cmp(b.iter()),
            (Closure(a), Closure(b)) => Rc::as_ptr(a).cmp(&Rc::as_ptr(b)),
            (Native(a), Native(b)) => Rc::as_ptr(a).cmp(&Rc::as_ptr(b)),
            (Cell(a), Cell(b)) => Rc::as_ptr(a).cmp(&Rc::as_ptr(b)),
            (View(a), View(b)) => a.tag.cmp(&b.tag).then_with(|| {
                a.attrs
                    .cmp(&b.attrs)
                    .then_with(|| a.handlers.cmp(&b.handlers))
                    .then_with(|| a.children.cmp(&b.children))
            }),
            (Annotated(a), Annotated(b)) => a.0.cmp(&b.0).then_with(|| a.1.iter().cmp(b.1.iter())),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

fn write_seq(f: &mut fmt::Formatter<'_>, open: &str, close: &str, items: &[Value]) -> fmt::Result {
    f.write_str(open)?;
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{item}")?;
    }
    f.write_str(close)
}

fn write_map(f: &mut fmt::Formatter<'_>, map: &ValueMap) -> fmt::Result {
    let mut entries: Vec<(String, String)> = map.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    entries.sort();
    f.write_str("{")?;
    for (i, (k, v)) in entries.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{k} {v}")?;
    }
    f.write_str("}")
}

/// Readable rendering, matching the canonical form printer for data.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => f.write_str("nil"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Number(n) => f.write_str(&format_number(*n)),
            Value::Str(s) => f.write_str(&quote_string(s)),
            Value::Keyword(k) => write!(f, ":{k}"),
            Value::Symbol(s) => f.write_str(s),
            Value::List(items) => write_seq(f, "(", ")", items),
            Value::Vector(items) => write_seq(f, "[", "]", items),
            Value::Map(m) => write_map(f, m),
            Value::Closure(c) => match &c.name {
                Some(name) => write!(f, "#<fn {name}>"),
                None => f.write_str("#<fn>"),
            },
            Value::Native(n) => write!(f, "#<native {}>", n.name),
            Value::Cell(c) => write!(f, "#<atom {}>", c.borrow()),
            Value::View(v) => write!(f, "#<view {}>", v.tag.as_str()),
            Value::Annotated(a) => {
                f.write_str("^")?;
                write_map(f, &a.1)?;
                write!(f, " {}", a.0)
            }
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structural_equality_for_data() {
        let a = Value::vector(vec![Value::Number(1.0), Value::str("x")]);
        let b = Value::vector(vec![Value::Number(1.0), Value::str("x")]);
        assert_eq!(a, b);
        assert_eq!(Value::Number(0.0), Value::Number(-0.0));
        assert_ne!(Value::list(vec![]), Value::vector(vec![]));
    }

    #[test]
    fn identity_equality_for_cells() {
        let a = Value::cell(Value::Nil);
        let b = Value::cell(Value::Nil);
        assert_ne!(a, b);
        assert_eq!(a, a.clone());
    }

    #[test]
    fn map_display_sorted() {
        let mut m = ValueMap::new();
        m.insert(Value::keyword("b"), Value::Number(2.0));
        m.insert(Value::keyword("a"), Value::Number(1.0));
        assert_eq!(Value::map(m).to_string(), "{:a 1 :b 2}");
    }

    #[test]
    fn serializable_subset() {
        assert!(Value::vector(vec![Value::keyword("k"), Value::Nil]).is_serializable());
        assert!(!Value::vector(vec![Value::cell(Value::Nil)]).is_serializable());
        assert!(!Value::symbol("x").is_serializable());
    }
}
