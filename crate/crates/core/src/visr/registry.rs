use std::collections::BTreeMap;
use std::path::PathBuf;
use std::rc::Rc;

use super::VisrDefinition;
use crate::interp::{stdlib, value_to_form, Arity, Env, EvalError, Value};
use crate::interp::stdlib::native;
use crate::reader::Span;

/// Source text of an extension module.
#[derive(Debug, Clone)]
pub struct ModuleSource {
    /// Where the text came from, for diagnostics.
    pub origin: String,
    pub text: String,
}

/// Maps a namespace such as `geometry.core` to module source.
pub trait ModuleLoader {
    /// `Ok(None)` when no module provides `ns`.
    fn load(&self, ns: &str) -> Result<Option<ModuleSource>, String>;
}

/// Looks up `a.b.c` as `a/b/c.mls` under each directory in turn.
#[derive(Debug, Clone)]
pub struct FsLoader {
    pub paths: Vec<PathBuf>,
}

impl FsLoader {
    pub fn new(paths: Vec<PathBuf>) -> Self {
        FsLoader { paths }
    }
}

pub fn module_relative_path(ns: &str) -> PathBuf {
    let mut path: PathBuf = ns.split('.').collect();
    path.set_extension("mls");
    path
}

impl ModuleLoader for FsLoader {
    fn load(&self, ns: &str) -> Result<Option<ModuleSource>, String> {
        if ns.is_empty() || ns.split('.').any(|part| part.is_empty() || part == "..") {
            return Ok(None);
        }
        let rel = module_relative_path(ns);
        for dir in &self.paths {
            let path = dir.join(&rel);
            if path.is_file() {
                let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                return Ok(Some(ModuleSource { origin: path.display().to_string(), text }));
            }
        }
        Ok(None)
    }
}

/// In-memory modules, keyed by namespace.
#[derive(Debug, Clone, Default)]
pub struct MemoryLoader {
    pub modules: BTreeMap<String, String>,
}

impl MemoryLoader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, ns: &str, text: &str) -> Self {
        self.modules.insert(ns.to_string(), text.to_string());
        self
    }
}

impl ModuleLoader for MemoryLoader {
    fn load(&self, ns: &str) -> Result<Option<ModuleSource>, String> {
        Ok(self.modules.get(ns).map(|text| ModuleSource { origin: format!("<{ns}>"), text: text.clone() }))
    }
}

/// Extension definitions and loaded modules for one session or program.
///
/// `globals` is shared by every module and by programs: it holds each
/// module's exports as `ns/name` and each extension as a callable that
/// elaborates and evaluates its state string.
pub struct Registry {
    defs: BTreeMap<String, Rc<VisrDefinition>>,
    modules: BTreeMap<String, Env>,
    pub(crate) loading: Vec<String>,
    loader: Box<dyn ModuleLoader>,
    globals: Env,
}

impl Registry {
    pub fn new(loader: impl ModuleLoader + 'static) -> Self {
        Registry {
            defs: BTreeMap::new(),
            modules: BTreeMap::new(),
            loading: Vec::new(),
            loader: Box::new(loader),
            globals: stdlib().child(),
        }
    }

    pub fn with_paths(paths: Vec<PathBuf>) -> Self {
        Registry::new(FsLoader::new(paths))
    }

    /// A registry that can only hold definitions made in the program itself.
    pub fn empty() -> Self {
        Registry::new(MemoryLoader::new())
    }

    pub fn globals(&self) -> &Env {
        &self.globals
    }

    /// A fresh top-level frame for running a program.
    pub fn runtime_env(&self) -> Env {
        self.globals.child()
    }

    pub fn get(&self, name: &str) -> Option<Rc<VisrDefinition>> {
        self.defs.get(name).cloned()
    }

    pub fn definitions(&self) -> impl Iterator<Item = &Rc<VisrDefinition>> {
        self.defs.values()
    }

    pub fn is_loaded(&self, ns: &str) -> bool {
        self.modules.contains_key(ns)
    }

    pub fn module_env(&self, ns: &str) -> Option<Env> {
        self.modules.get(ns).cloned()
    }

    pub(crate) fn fetch_module(&self, ns: &str) -> Result<Option<ModuleSource>, String> {
        self.loader.load(ns)
    }

    /// Records a loaded module and publishes its bindings as `ns/name`.
    pub(crate) fn add_module(&mut self, ns: &str, env: Env) {
        for (name, value) in env.local_bindings() {
            let qualified = format!("{ns}/{name}");
            if !self.defs.contains_key(&qualified) {
                self.globals.define(&qualified, value);
            }
        }
        self.modules.insert(ns.to_string(), env);
    }

    /// Registers (or replaces) a definition and binds its name in `globals`.
    pub fn register(&mut self, def: VisrDefinition) -> Rc<VisrDefinition> {
        let def = Rc::new(def);
        self.globals.define(&def.name, direct_call(&def));
        self.defs.insert(def.name.clone(), def.clone());
        def
    }

    /// Looks a reference up as written, then relative to `ns`.
    pub fn lookup(&self, extension_ref: &str, ns: Option<&str>) -> Option<Rc<VisrDefinition>> {
        if let Some(def) = self.get(extension_ref) {
            return Some(def);
        }
        match ns {
            Some(ns) if !extension_ref.contains('/') => self.get(&format!("{ns}/{extension_ref}")),
            _ => None,
        }
    }
}

/// The runtime meaning of an instance when it is evaluated without the
/// elaboration pass: elaborate the state string, then evaluate the result
/// where the extension was defined.
fn direct_call(def: &Rc<VisrDefinition>) -> Value {
    let elaborate = def.elaborate_fn.clone();
    let home = match &def.elaborate_fn {
        Value::Closure(c) => c.env.clone(),
        _ => Env::empty(),
    };
    native(&def.name, Arity::Exact(1), move |interp, args| {
        let code = interp.apply(&elaborate, args)?;
        let form = value_to_form(&code, Span::default()).map_err(EvalError::other)?;
        interp.eval(&form, &home)
    })
}

impl Drop for Registry {
    // Top-level closures capture the frames that hold them; clearing the
    // shared frames breaks those cycles.
    fn drop(&mut self) {
        for env in self.modules.values() {
            env.clear();
        }
        self.globals.clear();
    }
}
