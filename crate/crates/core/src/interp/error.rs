use std::fmt;

use crate::reader::Span;

/// Maximum number of call-site spans kept in an error's call chain.
pub const MAX_TRACE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Unbound,
    Arity,
    Type,
    Thrown,
    Depth,
    Syntax,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub message: String,
    /// Innermost offending form.
    pub span: Option<Span>,
    /// Call sites the error unwound through, innermost first.
    pub trace: Vec<Span>,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        if let Some(span) = self.span {
            write!(f, " at {span}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Runtime(RuntimeError),
    #[error("fuel exhausted")]
    FuelExhausted { span: Option<Span> },
}

impl EvalError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        EvalError::Runtime(RuntimeError { kind, message: message.into(), span: None, trace: Vec::new() })
    }

    pub fn type_error(message: impl Into<String>) -> Self {
        EvalError::new(ErrorKind::Type, message)
    }

    pub fn other(message: impl Into<String>) -> Self {
        EvalError::new(ErrorKind::Other, message)
    }

    pub fn is_fuel_exhausted(&self) -> bool {
        matches!(self, EvalError::FuelExhausted { .. })
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            EvalError::Runtime(e) => e.span,
            EvalError::FuelExhausted { span } => *span,
        }
    }

    pub fn message(&self) -> String {
        match self {
            EvalError::Runtime(e) => e.message.clone(),
            EvalError::FuelExhausted { .. } => "fuel exhausted".to_string(),
        }
    }

    /// Fills in the innermost span if nothing deeper claimed it.
    pub(crate) fn at(mut self, span: Span) -> Self {
        match &mut self {
            EvalError::Runtime(e) if e.span.is_none() => e.span = Some(span),
            EvalError::FuelExhausted { span: s } if s.is_none() => *s = Some(span),
            _ => {}
        }
        self
    }

    pub(crate) fn push_trace(mut self, span: Span) -> Self {
        if let EvalError::Runtime(e) = &mut self {
            if e.trace.len() < MAX_TRACE {
                e.trace.push(span);
            }
        }
        self
    }
}
