use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::ast::{BinaryOp, Expr, UnaryOp};
use crate::value::VariableType;

/// Static type of an expression node. `Any` is the type of an NA literal and
/// unifies with everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Type {
    Number,
    Text,
    Bool,
    Any,
}

impl Type {
    pub fn of_variable(t: VariableType) -> Type {
        match t {
            VariableType::Categorical => Type::Text,
            VariableType::Continuous => Type::Number,
        }
    }

    /// Continuous for numbers; everything else lands in a categorical column.
    pub fn output_type(self) -> VariableType {
        match self {
            Type::Number => VariableType::Continuous,
            _ => VariableType::Categorical,
        }
    }

    fn unify(self, other: Type) -> Option<Type> {
        match (self, other) {
            (Type::Any, t) | (t, Type::Any) => Some(t),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Number => "number",
            Type::Text => "text",
            Type::Bool => "boolean",
            Type::Any => "any",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("type error in `{node}`: expected {expected}, got {got}")]
    Mismatch {
        node: String,
        expected: String,
        got: String,
    },
    #[error("unbound identifier `{0}`")]
    UnboundIdent(String),
}

fn mismatch(node: &Expr, expected: impl fmt::Display, got: Type) -> TypeError {
    TypeError::Mismatch {
        node: node.to_string(),
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

/// Type-checks `expr` against the component types and returns the column
/// type the derived variable will have.
pub fn check_expr(expr: &Expr, component_types: &BTreeMap<String, VariableType>) -> Result<VariableType, TypeError> {
    infer(expr, component_types).map(Type::output_type)
}

pub fn infer(expr: &Expr, env: &BTreeMap<String, VariableType>) -> Result<Type, TypeError> {
    let expect = |e: &Expr, want: Type| -> Result<(), TypeError> {
        let got = infer(e, env)?;
        got.unify(want).map(|_| ()).ok_or_else(|| mismatch(e, want, got))
    };
    Ok(match expr {
        Expr::Number(_) => Type::Number,
        Expr::Str(_) => Type::Text,
        Expr::Na(_) => Type::Any,
        Expr::Ident(name) => env
            .get(name)
            .map(|t| Type::of_variable(*t))
            .ok_or_else(|| TypeError::UnboundIdent(name.clone()))?,
        Expr::Unary(UnaryOp::Neg, e) => {
            expect(e, Type::Number)?;
            Type::Number
        }
        Expr::Unary(UnaryOp::Not, e) => {
            expect(e, Type::Bool)?;
            Type::Bool
        }
        Expr::Binary(op, a, b) if op.is_arithmetic() => {
            expect(a, Type::Number)?;
            expect(b, Type::Number)?;
            Type::Number
        }
        Expr::Binary(op, a, b) if op.is_ordering() => {
            expect(a, Type::Number)?;
            expect(b, Type::Number)?;
            Type::Bool
        }
        Expr::Binary(BinaryOp::And | BinaryOp::Or, a, b) => {
            expect(a, Type::Bool)?;
            expect(b, Type::Bool)?;
            Type::Bool
        }
        Expr::Binary(_, a, b) => {
            // == and !=
            let ta = infer(a, env)?;
            let tb = infer(b, env)?;
            ta.unify(tb).ok_or_else(|| mismatch(b, ta, tb))?;
            Type::Bool
        }
        Expr::Concat(parts) => {
            for p in parts {
                infer(p, env)?;
            }
            Type::Text
        }
        Expr::If(c, t, e) => {
            expect(c, Type::Bool)?;
            let tt = infer(t, env)?;
            let te = infer(e, env)?;
            tt.unify(te).ok_or_else(|| mismatch(e, tt, te))?
        }
        Expr::IsNa(e) => {
            infer(e, env)?;
            Type::Bool
        }
    })
}
