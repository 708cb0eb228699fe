use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_bigint::BigInt;

use crate::structures::SphereType;

/// Reference from a sphere atom to a cataloged type.
#[derive(Clone)]
pub struct SphereRef {
    pub id: Arc<str>,
    pub ty: Arc<SphereType>,
}

impl SphereRef {
    pub fn radius(&self) -> usize {
        self.ty.radius
    }

    pub fn centres(&self) -> usize {
        self.ty.centres.len()
    }
}

impl PartialEq for SphereRef {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for SphereRef {}

impl Hash for SphereRef {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl PartialOrd for SphereRef {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SphereRef {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}

impl fmt::Debug for SphereRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)
    }
}

/// Formulas and counting terms share one tree type. Number variables are
/// stored without their `%` prefix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Equal(String, String),
    Rel(String, Vec<String>),
    Not(Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Exists(String, Box<Expr>),
    ExistsNum(String, Box<Expr>),
    Pred(String, Vec<Expr>),
    Sphere(SphereRef, Vec<String>),
    Count(Vec<String>, Box<Expr>),
    Int(BigInt),
    NumVar(String),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn is_formula(&self) -> bool {
        !self.is_term()
    }

    pub fn is_term(&self) -> bool {
        matches!(
            self,
            Expr::Count(..) | Expr::Int(_) | Expr::NumVar(_) | Expr::Add(..) | Expr::Mul(..)
        )
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    /// Conjunction in core connectives: not (or (not a) (not b)).
    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::not(Expr::or(Expr::not(a), Expr::not(b)))
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::or(Expr::not(a), b)
    }

    pub fn exists(v: impl Into<String>, body: Expr) -> Expr {
        Expr::Exists(v.into(), Box::new(body))
    }

    pub fn forall(v: impl Into<String>, body: Expr) -> Expr {
        Expr::not(Expr::exists(v, Expr::not(body)))
    }

    pub fn exists_num(v: impl Into<String>, body: Expr) -> Expr {
        Expr::ExistsNum(v.into(), Box::new(body))
    }

    pub fn count<S: Into<String>>(vars: impl IntoIterator<Item = S>, body: Expr) -> Expr {
        Expr::Count(vars.into_iter().map(Into::into).collect(), Box::new(body))
    }

    pub fn int(i: impl Into<BigInt>) -> Expr {
        Expr::Int(i.into())
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn pred(name: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::Pred(name.into(), args)
    }

    pub fn rel<S: Into<String>>(
        name: impl Into<String>,
        args: impl IntoIterator<Item = S>,
    ) -> Expr {
        Expr::Rel(name.into(), args.into_iter().map(Into::into).collect())
    }

    pub fn eq(a: impl Into<String>, b: impl Into<String>) -> Expr {
        Expr::Equal(a.into(), b.into())
    }

    /// `exists(0)`: never holds, since 0 is not positive. Used wherever the
    /// construction needs the constant false inside the grammar.
    pub fn falsum() -> Expr {
        Expr::pred("exists", vec![Expr::int(0)])
    }

    pub fn verum() -> Expr {
        Expr::not(Expr::falsum())
    }

    /// Balanced disjunction; empty input gives `falsum`.
    pub fn or_all(items: Vec<Expr>) -> Expr {
        balanced(items, Expr::or).unwrap_or_else(Expr::falsum)
    }

    /// Balanced conjunction; empty input gives `verum`.
    pub fn and_all(items: Vec<Expr>) -> Expr {
        balanced(items, Expr::and).unwrap_or_else(Expr::verum)
    }

    /// Balanced sum; empty input gives 0.
    pub fn sum_all(items: Vec<Expr>) -> Expr {
        balanced(items, Expr::add).unwrap_or_else(|| Expr::int(0))
    }

    /// Matches the `and` encoding produced by [`Expr::and`].
    pub fn as_and(&self) -> Option<(&Expr, &Expr)> {
        if let Expr::Not(inner) = self {
            if let Expr::Or(a, b) = inner.as_ref() {
                if let (Expr::Not(a), Expr::Not(b)) = (a.as_ref(), b.as_ref()) {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// Immediate subexpressions, in order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Equal(..) | Expr::Rel(..) | Expr::Sphere(..) | Expr::Int(_) | Expr::NumVar(_) => {
                vec![]
            }
            Expr::Not(a) | Expr::Exists(_, a) | Expr::ExistsNum(_, a) | Expr::Count(_, a) => {
                vec![a]
            }
            Expr::Or(a, b) | Expr::Add(a, b) | Expr::Mul(a, b) => vec![a, b],
            Expr::Pred(_, ts) => ts.iter().collect(),
        }
    }

    /// True for `(# (y) (sphere T y))` with a one-centre type.
    pub fn as_basic_count(&self) -> Option<&SphereRef> {
        if let Expr::Count(vs, body) = self {
            if let (1, Expr::Sphere(t, xs)) = (vs.len(), body.as_ref()) {
                if xs.len() == 1 && xs[0] == vs[0] && t.centres() == 1 {
                    return Some(t);
                }
            }
        }
        None
    }
}

fn balanced(mut items: Vec<Expr>, join: fn(Expr, Expr) -> Expr) -> Option<Expr> {
    match items.len() {
        0 => None,
        1 => items.pop(),
        n => {
            let right = items.split_off(n / 2);
            Some(join(balanced(items, join)?, balanced(right, join)?))
        }
    }
}
