use super::ast::{BinaryOp, Expr, UnaryOp};
use crate::numeric::{format_number, parse_decimal};
use crate::value::{NaCode, OutputValue};

/// Runtime value inside the evaluator.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Text(String),
    Bool(bool),
    Na(NaCode),
}

const MISSING: Value = Value::Na(NaCode::B);

impl Value {
    pub fn from_output(v: &OutputValue) -> Value {
        match v {
            OutputValue::Category(s) | OutputValue::Copied(s) => Value::Text(s.clone()),
            OutputValue::Number(n) => Value::Number(*n),
            OutputValue::Na(code) => Value::Na(*code),
        }
    }

    pub fn into_output(self) -> OutputValue {
        match self {
            Value::Number(n) => OutputValue::Number(n),
            Value::Text(s) => OutputValue::Category(s),
            Value::Bool(b) => OutputValue::Category(b.to_string()),
            Value::Na(code) => OutputValue::Na(code),
        }
    }

    fn as_text(&self) -> Option<String> {
        match self {
            Value::Number(n) => Some(format_number(*n)),
            Value::Text(s) => Some(s.clone()),
            Value::Bool(b) => Some(b.to_string()),
            Value::Na(_) => None,
        }
    }
}

/// Name lookup used during evaluation.
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<&OutputValue>;
}

impl Bindings for std::collections::BTreeMap<String, OutputValue> {
    fn lookup(&self, name: &str) -> Option<&OutputValue> {
        self.get(name)
    }
}

impl Bindings for std::collections::HashMap<String, OutputValue> {
    fn lookup(&self, name: &str) -> Option<&OutputValue> {
        self.get(name)
    }
}

/// Evaluates `expr` for one row. Total: every input yields a value.
///
/// NA semantics: strict operators (arithmetic, comparisons, `++`, `not`,
/// unary minus) return NA(b) when any operand is NA. `and`/`or` use
/// three-valued logic so `false and NA` is `false` and `true or NA` is
/// `true`. An `if` evaluates only the chosen branch; an NA condition gives
/// NA(b). `is_na` inspects without propagating. Division by zero and
/// non-finite results give NA(b). An unbound name reads as NA(b).
pub fn evaluate(expr: &Expr, bindings: &dyn Bindings) -> OutputValue {
    eval(expr, bindings).into_output()
}

pub fn eval(expr: &Expr, env: &dyn Bindings) -> Value {
    match expr {
        Expr::Number(n) => Value::Number(*n),
        Expr::Str(s) => Value::Text(s.clone()),
        Expr::Na(code) => Value::Na(*code),
        Expr::Ident(name) => env.lookup(name).map(Value::from_output).unwrap_or(MISSING),
        Expr::Unary(UnaryOp::Neg, e) => match eval(e, env) {
            Value::Number(n) => Value::Number(-n),
            _ => MISSING,
        },
        Expr::Unary(UnaryOp::Not, e) => match eval(e, env) {
            Value::Bool(b) => Value::Bool(!b),
            _ => MISSING,
        },
        Expr::Binary(BinaryOp::And, a, b) => match eval(a, env) {
            Value::Bool(false) => Value::Bool(false),
            Value::Bool(true) => match eval(b, env) {
                Value::Bool(v) => Value::Bool(v),
                _ => MISSING,
            },
            _ => match eval(b, env) {
                Value::Bool(false) => Value::Bool(false),
                _ => MISSING,
            },
        },
        Expr::Binary(BinaryOp::Or, a, b) => match eval(a, env) {
            Value::Bool(true) => Value::Bool(true),
            Value::Bool(false) => match eval(b, env) {
                Value::Bool(v) => Value::Bool(v),
                _ => MISSING,
            },
            _ => match eval(b, env) {
                Value::Bool(true) => Value::Bool(true),
                _ => MISSING,
            },
        },
        Expr::Binary(op, a, b) => binary(*op, eval(a, env), eval(b, env)),
        Expr::Concat(parts) => {
            let mut out = String::new();
            for p in parts {
                match eval(p, env).as_text() {
                    Some(s) => out.push_str(&s),
                    None => return MISSING,
                }
            }
            Value::Text(out)
        }
        Expr::If(c, t, e) => match eval(c, env) {
            Value::Bool(true) => eval(t, env),
            Value::Bool(false) => eval(e, env),
            _ => MISSING,
        },
        Expr::IsNa(e) => Value::Bool(matches!(eval(e, env), Value::Na(_))),
    }
}

fn binary(op: BinaryOp, a: Value, b: Value) -> Value {
    use Value::*;
    if matches!(a, Na(_)) || matches!(b, Na(_)) {
        return MISSING;
    }
    if op.is_arithmetic() {
        let (Number(x), Number(y)) = (&a, &b) else {
            return MISSING;
        };
        let r = match op {
            BinaryOp::Add => x + y,
            BinaryOp::Sub => x - y,
            BinaryOp::Mul => x * y,
            BinaryOp::Div if *y == 0.0 => return MISSING,
            BinaryOp::Div => x / y,
            _ => unreachable!(),
        };
        return if r.is_finite() { Number(r) } else { MISSING };
    }
    if op.is_ordering() {
        let (Number(x), Number(y)) = (&a, &b) else {
            return MISSING;
        };
        return Bool(match op {
            BinaryOp::Lt => x < y,
            BinaryOp::Le => x <= y,
            BinaryOp::Gt => x > y,
            BinaryOp::Ge => x >= y,
            _ => unreachable!(),
        });
    }
    let equal = match (&a, &b) {
        (Number(x), Number(y)) => x == y,
        (Text(x), Text(y)) => x == y,
        (Bool(x), Bool(y)) => x == y,
        // a number-typed column that arrived as text (copied) still compares numerically
        (Number(x), Text(s)) | (Text(s), Number(x)) => match parse_decimal(s) {
            Some(y) => *x == y,
            None => return MISSING,
        },
        _ => return MISSING,
    };
    match op {
        BinaryOp::Eq => Bool(equal),
        BinaryOp::Ne => Bool(!equal),
        _ => unreachable!(),
    }
}
