use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::{Rc, Weak};

use super::value::Value;

/// A chain of lexical frames. Cloning shares the frame.
#[derive(Clone)]
pub struct Env(Rc<Frame>);

struct Frame {
    vars: RefCell<HashMap<Rc<str>, Value>>,
    parent: Option<Env>,
}

impl Env {
    /// An empty root frame. See [`crate::interp::stdlib`] for the populated one.
    pub fn empty() -> Env {
        Env(Rc::new(Frame { vars: RefCell::new(HashMap::new()), parent: None }))
    }

    pub fn child(&self) -> Env {
        Env(Rc::new(Frame { vars: RefCell::new(HashMap::new()), parent: Some(self.clone()) }))
    }

    /// Binds `name` in this frame only; outer frames are never touched.
    pub fn define(&self, name: &str, value: Value) {
        self.0.vars.borrow_mut().insert(Rc::from(name), value);
    }

    pub fn lookup(&self, name: &str) -> Option<Value> {
        let mut env = self;
        loop {
            if let Some(v) = env.0.vars.borrow().get(name) {
                return Some(v.clone());
            }
            env = env.0.parent.as_ref()?;
        }
    }

    pub fn is_bound(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    /// Bindings of this frame alone, sorted by name.
    pub fn local_bindings(&self) -> Vec<(Rc<str>, Value)> {
        let mut out: Vec<_> = self.0.vars.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Drops every binding of this frame.
    pub fn clear(&self) {
        let vars = std::mem::take(&mut *self.0.vars.borrow_mut());
        drop(vars);
    }

    /// A non-owning handle, for natives that need to consult the frame that
    /// defines them without keeping it alive.
    pub fn downgrade(&self) -> WeakEnv {
        WeakEnv(Rc::downgrade(&self.0))
    }

    pub fn ptr_eq(&self, other: &Env) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}

#[derive(Clone)]
pub struct WeakEnv(Weak<Frame>);

impl WeakEnv {
    pub fn upgrade(&self) -> Option<Env> {
        self.0.upgrade().map(Env)
    }
}

impl std::fmt::Debug for Env {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Env({} local bindings)", self.0.vars.borrow().len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_binding_wins() {
        let root = Env::empty();
        root.define("x", Value::Number(1.0));
        let inner = root.child();
        inner.define("x", Value::Number(2.0));
        assert_eq!(inner.lookup("x"), Some(Value::Number(2.0)));
        assert_eq!(root.lookup("x"), Some(Value::Number(1.0)));
        assert!(inner.lookup("y").is_none());
    }
}
