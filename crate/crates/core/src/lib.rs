//! A small S-expression language whose programs may embed interactive-syntax
//! instances, plus the edit-time machinery that renders and edits them.

pub mod elaborate;
pub mod interp;
pub mod pipeline;
pub mod protocol;
pub mod reader;
pub mod session;
pub mod view;
pub mod visr;
