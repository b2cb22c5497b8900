//! The MiniLisp evaluator: a fuel-metered tree walker over [`Form`]s.

mod convert;
mod env;
mod error;
mod eval;
pub mod stdlib;
mod value;

pub use convert::{form_to_value, literal_value, value_to_form};
pub use env::Env;
pub use error::{ErrorKind, EvalError, RuntimeError, MAX_TRACE};
pub use eval::{is_special_form, Interp, MAX_EVAL_DEPTH, SPECIAL_FORMS};
pub(crate) use eval::parse_params;
pub use stdlib::stdlib;
pub use value::{Arity, Closure, ClosureKind, FieldSchema, Native, NativeFn, Value, ValueMap, ViewValue};

use crate::reader::Form;

/// Step budget for one evaluation request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fuel {
    pub remaining: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutOfFuel;

impl Fuel {
    pub const RENDER_DEFAULT: Fuel = Fuel { remaining: 200_000 };
    pub const ELABORATE_DEFAULT: Fuel = Fuel { remaining: 1_000_000 };

    pub fn new(remaining: u64) -> Self {
        Fuel { remaining }
    }

    pub fn tick(&mut self) -> Result<(), OutOfFuel> {
        self.consume(1)
    }

    pub fn consume(&mut self, n: u64) -> Result<(), OutOfFuel> {
        if self.remaining < n {
            self.remaining = 0;
            return Err(OutOfFuel);
        }
        self.remaining -= n;
        Ok(())
    }

    /// Reads `VISR_FUEL`, falling back to `default` when unset or invalid.
    pub fn from_env_or(default: Fuel) -> Fuel {
        std::env::var("VISR_FUEL")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .map(Fuel::new)
            .unwrap_or(default)
    }
}

/// Evaluates one form, charging `fuel` for every step taken.
pub fn eval(form: &Form, env: &Env, fuel: &mut Fuel) -> Result<Value, EvalError> {
    let mut interp = Interp::new(*fuel);
    let result = interp.eval(form, env);
    *fuel = interp.fuel();
    result
}

/// Evaluates a sequence of forms, returning the last value.
pub fn eval_all(forms: &[Form], env: &Env, fuel: &mut Fuel) -> Result<Value, EvalError> {
    let mut interp = Interp::new(*fuel);
    let result = interp.eval_body(forms, env);
    *fuel = interp.fuel();
    result
}
