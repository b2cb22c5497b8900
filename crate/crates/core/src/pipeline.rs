//! Whole-file operations behind the command line: run, expand, check, fmt.

use crate::elaborate::{elaborate_program, ElaborationError, Elaborator};
use crate::interp::{EvalError, Fuel, Interp, Value};
use crate::reader::{line_col, pretty, read_all, Form, ReadError, Span};
use crate::visr::Registry;

/// Line width used by `fmt` and `expand`.
pub const WIDTH: usize = 80;

/// Default step budget for running a program after elaboration.
pub const RUN_FUEL: Fuel = Fuel { remaining: 100_000_000 };

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("read error at offset {}: {}", .0.offset, .0.message)]
    Read(ReadError),
    #[error("{0}")]
    Elaborate(ElaborationError),
    #[error("runtime error: {error}")]
    Runtime { error: EvalError, output: String },
}

impl PipelineError {
    pub fn span(&self) -> Option<Span> {
        match self {
            PipelineError::Read(e) => Some(Span::new(e.offset, e.offset)),
            PipelineError::Elaborate(e) => Some(e.span),
            PipelineError::Runtime { error, .. } => error.span(),
        }
    }

    /// `line:col: message`, with 1-based positions.
    pub fn located(&self, text: &str) -> String {
        let message = match self {
            PipelineError::Read(e) => format!("read error: {}", e.message),
            PipelineError::Elaborate(e) => format!("{} error: {}", e.phase, e.message),
            PipelineError::Runtime { error, .. } => match error {
                EvalError::FuelExhausted { .. } => "fuel exhausted".to_string(),
                EvalError::Runtime(r) => r.message.clone(),
            },
        };
        match self.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("{line}:{col}: {message}")
            }
            None => message,
        }
    }
}

/// Budgets for one pipeline invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    pub elaborate: Fuel,
    pub run: Fuel,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { elaborate: Fuel::from_env_or(Fuel::ELABORATE_DEFAULT), run: Fuel::from_env_or(RUN_FUEL) }
    }
}

impl Budgets {
    pub fn uniform(fuel: Fuel) -> Self {
        Budgets { elaborate: fuel, run: fuel }
    }
}

pub fn expand_forms(text: &str, registry: &mut Registry, budgets: Budgets) -> Result<Vec<Form>, PipelineError> {
    let forms = read_all(text).map_err(PipelineError::Read)?;
    let mut fuel = budgets.elaborate;
    elaborate_program(&forms, registry, &mut fuel).map_err(PipelineError::Elaborate)
}

/// The fully elaborated program as canonical text.
pub fn expand(text: &str, registry: &mut Registry, budgets: Budgets) -> Result<String, PipelineError> {
    Ok(layout(&expand_forms(text, registry, budgets)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Everything the program printed.
    pub output: String,
    /// Value of the last top-level form.
    pub value: Value,
}

/// Elaborates then evaluates a program.
pub fn run(text: &str, registry: &mut Registry, budgets: Budgets) -> Result<RunOutput, PipelineError> {
    let forms = expand_forms(text, registry, budgets)?;
    let env = registry.runtime_env();
    let mut interp = Interp::new(budgets.run);
    let result = interp.eval_body(&forms, &env);
    let output = interp.take_output();
    env.clear();
    match result {
        Ok(value) => Ok(RunOutput { output, value }),
        Err(error) => Err(PipelineError::Runtime { error, output }),
    }
}

/// Elaborates without running and reports every problem found.
pub fn check(text: &str, registry: &mut Registry, budgets: Budgets) -> Vec<PipelineError> {
    let forms = match read_all(text) {
        Ok(f) => f,
        Err(e) => return vec![PipelineError::Read(e)],
    };
    let mut elab = Elaborator::new(registry, budgets.elaborate).collecting();
    let _ = elab.program(&forms);
    elab.take_errors().into_iter().map(PipelineError::Elaborate).collect()
}

/// Canonical layout of a whole file. Comments are not preserved.
pub fn format(text: &str) -> Result<String, PipelineError> {
    Ok(layout(&read_all(text).map_err(PipelineError::Read)?))
}

fn layout(forms: &[Form]) -> String {
    let mut out = String::new();
    for (i, form) in forms.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&pretty(form, WIDTH));
        out.push('\n');
    }
    out
}
