//! Evaluation of HNF formulas once the structure is only visible through
//! sphere verdicts and counts of basic counting terms.

use std::cell::Cell;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::formula::{Expr, PredicateCollection, SphereRef};

/// What an HNF needs to know about a structure.
pub trait HnfContext {
    /// Value of `#(y) sph_τ(y)`.
    fn basic(&self, t: &SphereRef) -> Result<BigInt>;
    /// Truth of the sphere atom `sph_τ(xs)`.
    fn sphere(&self, t: &SphereRef, xs: &[String]) -> Result<bool>;
    /// Number quantifiers range over `0..=universe()`.
    fn universe(&self) -> usize;
    fn preds(&self) -> &PredicateCollection;
    /// Value of a number variable not bound by an enclosing quantifier.
    fn num(&self, _k: &str) -> Option<BigInt> {
        None
    }
}

/// Evaluator over an [`HnfContext`] with an operation counter.
pub struct HnfEval<'c, C: HnfContext + ?Sized> {
    ctx: &'c C,
    ops: Cell<u64>,
}

impl<'c, C: HnfContext + ?Sized> HnfEval<'c, C> {
    pub fn new(ctx: &'c C) -> Self {
        HnfEval {
            ctx,
            ops: Cell::new(0),
        }
    }

    pub fn ops(&self) -> u64 {
        self.ops.get()
    }

    fn tick(&self) {
        self.ops.set(self.ops.get() + 1);
    }

    pub fn holds(&self, e: &Expr, nums: &mut Vec<(String, BigInt)>) -> Result<bool> {
        self.tick();
        Ok(match e {
            Expr::Not(a) => !self.holds(a, nums)?,
            Expr::Or(a, b) => self.holds(a, nums)? || self.holds(b, nums)?,
            Expr::Sphere(t, xs) => self.ctx.sphere(t, xs)?,
            Expr::Pred(p, ts) => {
                let args = ts
                    .iter()
                    .map(|t| self.term(t, nums))
                    .collect::<Result<Vec<_>>>()?;
                self.ctx.preds().holds(p, &args)?
            }
            Expr::ExistsNum(k, a) => {
                let mut found = false;
                for v in 0..=self.ctx.universe() {
                    nums.push((k.clone(), BigInt::from(v)));
                    let r = self.holds(a, nums);
                    nums.pop();
                    if r? {
                        found = true;
                        break;
                    }
                }
                found
            }
            _ => return Err(Error::invalid(format!("not in Hanf normal form: {e}"))),
        })
    }

    pub fn term(&self, e: &Expr, nums: &[(String, BigInt)]) -> Result<BigInt> {
        self.tick();
        Ok(match e {
            Expr::Int(i) => i.clone(),
            Expr::NumVar(k) => nums
                .iter()
                .rev()
                .find(|(n, _)| n == k)
                .map(|(_, v)| v.clone())
                .or_else(|| self.ctx.num(k))
                .ok_or_else(|| Error::invalid(format!("unassigned number variable %{k}")))?,
            Expr::Add(a, b) => self.term(a, nums)? + self.term(b, nums)?,
            Expr::Mul(a, b) => self.term(a, nums)? * self.term(b, nums)?,
            Expr::Count(..) => match e.as_basic_count() {
                Some(t) => self.ctx.basic(t)?,
                None => return Err(Error::invalid(format!("not a basic counting term: {e}"))),
            },
            _ => return Err(Error::invalid(format!("expected a term, got {e}"))),
        })
    }
}

/// Context without a structure: for number formulas that mention no
/// counting terms, sphere atoms or number quantifiers.
pub struct Ground<'p>(pub &'p PredicateCollection);

impl HnfContext for Ground<'_> {
    fn basic(&self, t: &SphereRef) -> Result<BigInt> {
        Err(Error::invalid(format!(
            "counting term over {} in a ground condition",
            t.id
        )))
    }
    fn sphere(&self, t: &SphereRef, _: &[String]) -> Result<bool> {
        Err(Error::invalid(format!(
            "sphere atom {} in a ground condition",
            t.id
        )))
    }
    fn universe(&self) -> usize {
        0
    }
    fn preds(&self) -> &PredicateCollection {
        self.0
    }
}

/// True when the value of `e` does not depend on the structure or on number
/// variables: no counting terms, number variables, quantifiers or spheres.
pub fn is_ground(e: &Expr) -> bool {
    match e {
        Expr::Count(..)
        | Expr::NumVar(_)
        | Expr::ExistsNum(..)
        | Expr::Sphere(..)
        | Expr::Exists(..) => false,
        Expr::Equal(..) | Expr::Rel(..) => false,
        _ => e.children().into_iter().all(is_ground),
    }
}

pub fn eval_ground(e: &Expr, preds: &PredicateCollection) -> Result<bool> {
    HnfEval::new(&Ground(preds)).holds(e, &mut Vec::new())
}
