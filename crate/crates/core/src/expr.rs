//! Integer/boolean expressions over the model's state variables.
//!
//! Booleans are evaluated as `0`/`1` integers; the frontend type-checks every
//! expression before it reaches this module, so guards and labels are always
//! boolean-typed and update right-hand sides are always integer-typed.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("integer overflow evaluating `{0}`")]
    Overflow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "|",
            BinaryOp::And => "&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
        }
    }

    /// Binding strength used by both the parser and the printer.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul => 6,
        }
    }

    pub fn is_relational(self) -> bool {
        self.precedence() == 4
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::Or | BinaryOp::And)
    }
}

/// Expression tree. Variables are referenced by declaration index; constants
/// keep their name for printing and their folded value for evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var { index: usize, name: String },
    Const { name: String, value: i64 },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

const NOT_PRECEDENCE: u8 = 3;
const NEG_PRECEDENCE: u8 = 7;
const ATOM_PRECEDENCE: u8 = 8;

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn var(index: usize, name: impl Into<String>) -> Expr {
        Expr::Var {
            index,
            name: name.into(),
        }
    }

    /// Evaluate against a full valuation. Booleans come back as 0 or 1.
    pub fn eval(&self, vals: &[i64]) -> Result<i64, EvalError> {
        Ok(match self {
            Expr::Int(v) => *v,
            Expr::Bool(b) => i64::from(*b),
            Expr::Var { index, .. } => vals[*index],
            Expr::Const { value, .. } => *value,
            Expr::Unary(UnaryOp::Not, e) => i64::from(e.eval(vals)? == 0),
            Expr::Unary(UnaryOp::Neg, e) => e
                .eval(vals)?
                .checked_neg()
                .ok_or_else(|| EvalError::Overflow(self.to_string()))?,
            Expr::Binary(op, l, r) => {
                // short-circuit logic ops before touching the right side
                match op {
                    BinaryOp::And => {
                        return Ok(i64::from(l.eval(vals)? != 0 && r.eval(vals)? != 0));
                    }
                    BinaryOp::Or => {
                        return Ok(i64::from(l.eval(vals)? != 0 || r.eval(vals)? != 0));
                    }
                    _ => {}
                }
                let a = l.eval(vals)?;
                let b = r.eval(vals)?;
                let overflow = || EvalError::Overflow(self.to_string());
                match op {
                    BinaryOp::Add => a.checked_add(b).ok_or_else(overflow)?,
                    BinaryOp::Sub => a.checked_sub(b).ok_or_else(overflow)?,
                    BinaryOp::Mul => a.checked_mul(b).ok_or_else(overflow)?,
                    BinaryOp::Eq => i64::from(a == b),
                    BinaryOp::Ne => i64::from(a != b),
                    BinaryOp::Lt => i64::from(a < b),
                    BinaryOp::Le => i64::from(a <= b),
                    BinaryOp::Gt => i64::from(a > b),
                    BinaryOp::Ge => i64::from(a >= b),
                    BinaryOp::And | BinaryOp::Or => unreachable!(),
                }
            }
        })
    }

    pub fn holds(&self, vals: &[i64]) -> Result<bool, EvalError> {
        Ok(self.eval(vals)? != 0)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(UnaryOp::Not, _) => NOT_PRECEDENCE,
            Expr::Unary(UnaryOp::Neg, _) => NEG_PRECEDENCE,
            _ => ATOM_PRECEDENCE,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, paren: bool) -> fmt::Result {
        if paren {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Canonical printing with the minimum parentheses needed to re-parse into
/// the same tree (binary operators are left-associative, relations are not
/// associative at all).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var { name, .. } | Expr::Const { name, .. } => f.write_str(name),
            Expr::Unary(UnaryOp::Not, e) => {
                f.write_str("!")?;
                e.write_child(f, e.precedence() < NOT_PRECEDENCE)
            }
            Expr::Unary(UnaryOp::Neg, e) => {
                f.write_str("-")?;
                // `--x` would lex fine but `-(-3)` must not fold into a literal
                e.write_child(
                    f,
                    e.precedence() < ATOM_PRECEDENCE || matches!(**e, Expr::Int(_)),
                )
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let left_paren = if op.is_relational() {
                    l.precedence() <= p
                } else {
                    l.precedence() < p
                };
                l.write_child(f, left_paren)?;
                if op.is_logical() {
                    write!(f, " {} ", op.symbol())?;
                } else {
                    f.write_str(op.symbol())?;
                }
                r.write_child(f, r.precedence() <= p)
            }
        }
    }
}
