//! Row-wise expression language for derived variables.
//!
//! A derived variable is computed from already-recoded columns of the same
//! row. Expressions are parsed once, type-checked against the component
//! types, and then interpreted per row.

mod ast;
mod check;
mod eval;
mod lexer;
mod parser;

use thiserror::Error;

pub use ast::{BinaryOp, Expr, UnaryOp};
pub use check::{check_expr, infer, Type, TypeError};
pub use eval::{eval, evaluate, Bindings, Value};
pub use parser::parse_expression;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {position}: {message}")]
pub struct SyntaxError {
    /// Byte offset into the source.
    pub position: usize,
    pub message: String,
}

impl SyntaxError {
    pub(crate) fn new(position: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            position,
            message: message.into(),
        }
    }
}
