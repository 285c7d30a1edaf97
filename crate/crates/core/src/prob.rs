//! Transition probabilities: exact rationals where the source allows it,
//! doubles otherwise.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prob {
    Exact(Rational),
    Float(f64),
}

impl Prob {
    pub fn one() -> Prob {
        Prob::Exact(Rational::from_integer(1))
    }

    pub fn zero() -> Prob {
        Prob::Exact(Rational::from_integer(0))
    }

    pub fn ratio(numer: i64, denom: i64) -> Prob {
        Prob::Exact(Rational::new(numer, denom))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Prob::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Prob::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Prob::Float(f) => *f,
        }
    }

    pub fn to_big(&self) -> Option<BigRational> {
        match self {
            Prob::Exact(r) => Some(BigRational::new(
                BigInt::from(*r.numer()),
                BigInt::from(*r.denom()),
            )),
            Prob::Float(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Prob::Exact(r) => r.is_zero(),
            Prob::Float(f) => *f == 0.0,
        }
    }

    /// Sum that stays exact while the i64 rational does not overflow.
    pub fn plus(self, other: Prob) -> Prob {
        match (self, other) {
            (Prob::Exact(a), Prob::Exact(b)) => match checked_ratio_add(a, b) {
                Some(sum) => Prob::Exact(sum),
                None => Prob::Float(self.to_f64() + other.to_f64()),
            },
            _ => Prob::Float(self.to_f64() + other.to_f64()),
        }
    }

    /// Ordering by value; exact pairs compare exactly.
    pub fn cmp_value(&self, other: &Prob) -> Ordering {
        match (self, other) {
            (Prob::Exact(a), Prob::Exact(b)) => {
                let lhs = i128::from(*a.numer()) * i128::from(*b.denom());
                let rhs = i128::from(*b.numer()) * i128::from(*a.denom());
                lhs.cmp(&rhs)
            }
            _ => self.to_f64().total_cmp(&other.to_f64()),
        }
    }

    /// Text used in explicit-state dumps: lowest-terms rationals, 17
    /// significant digits for doubles.
    pub fn dump_string(&self) -> String {
        match self {
            Prob::Exact(_) => self.to_string(),
            Prob::Float(f) => format_f64_17(*f),
        }
    }
}

fn checked_ratio_add(a: Rational, b: Rational) -> Option<Rational> {
    let n = a.numer().checked_mul(*b.denom())?.checked_add(b.numer().checked_mul(*a.denom())?)?;
    let d = a.denom().checked_mul(*b.denom())?;
    Some(Rational::new(n, d))
}

/// `{:.16e}` rendering: 17 significant digits, deterministic across platforms.
pub fn format_f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Lowest-terms rendering: `1/2`, `1`, `0`; doubles in scientific notation
/// so that they stay distinguishable from rational literals.
impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prob::Exact(r) => {
                if *r.denom() == 1 {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Prob::Float(v) => write!(f, "{v:e}"),
        }
    }
}

/// Decimal rendering of a rational when it terminates, `a/b` otherwise.
pub fn rational_to_decimal(r: &Rational) -> String {
    let mut d = *r.denom();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    let scale = 10i128.pow(digits);
    let scaled = i128::from(*r.numer()) * scale / i128::from(*r.denom());
    let sign = if scaled < 0 { "-" } else { "" };
    let scaled = scaled.abs();
    if digits == 0 {
        return format!("{sign}{scaled}");
    }
    let int_part = scaled / scale;
    let frac = scaled % scale;
    format!("{sign}{int_part}.{frac:0width$}", width = digits as usize)
}
