//! Weak Hanf normal form for FO(P) with unary predicates: every condition
//! becomes P(#(y) ⋁_{τ∈T} sph_τ(y) + c).

use num_traits::{One, Zero};

use super::numeric::eval_ground;
use super::poly::{Atom, Poly};
use super::spheres::Folded;
use super::Compiler;
use crate::error::{Error, Result};
use crate::formula::{nqr, Expr, PredicateCollection, Signature};
use crate::typecat::CatalogStore;

fn check_fragment(e: &Expr, preds: &PredicateCollection) -> Result<()> {
    match e {
        Expr::Pred(p, ts) => {
            if preds.arity(p) != Some(1) || ts.len() != 1 {
                return Err(Error::invalid(format!("predicate {p} is not unary")));
            }
        }
        Expr::Count(ys, _) if ys.len() != 1 => {
            return Err(Error::invalid(
                "weak normal form needs single-variable counting terms",
            ));
        }
        Expr::NumVar(v) => {
            return Err(Error::invalid(format!(
                "number variable %{v} outside FO(P)"
            )))
        }
        _ => {}
    }
    for c in e.children() {
        check_fragment(c, preds)?;
    }
    Ok(())
}

/// A d-equivalent Boolean combination of sphere atoms and sentences
/// P(#(y) ⋁_{τ∈T} sph_τ(y) + c) with P unary.
pub fn extract_whnf(
    phi: &Expr,
    d: usize,
    sig: &Signature,
    preds: &PredicateCollection,
) -> Result<Expr> {
    if nqr(phi) > 0 {
        return Err(Error::invalid("number quantifiers are outside FO(P)"));
    }
    check_fragment(phi, preds)?;
    let h = Compiler::new(CatalogStore::global(), sig, d, preds).compile(phi)?;
    Ok(weaken(&h.expr, preds)?.into_expr())
}

fn weaken(e: &Expr, preds: &PredicateCollection) -> Result<Folded> {
    Ok(match e {
        Expr::Sphere(..) => Folded::Expr(e.clone()),
        Expr::Not(a) => match weaken(a, preds)? {
            Folded::Const(b) => Folded::Const(!b),
            Folded::Expr(x) => Folded::Expr(Expr::not(x)),
        },
        Expr::Or(a, b) => match (weaken(a, preds)?, weaken(b, preds)?) {
            (Folded::Const(true), _) | (_, Folded::Const(true)) => Folded::Const(true),
            (Folded::Const(false), x) | (x, Folded::Const(false)) => x,
            (Folded::Expr(x), Folded::Expr(y)) => Folded::Expr(Expr::or(x, y)),
        },
        Expr::Pred(p, ts) if ts.len() == 1 => {
            let poly = Poly::from_expr(&ts[0])?;
            let c = poly.constant_part();
            let mut types = Vec::new();
            for (mono, coef) in poly.terms() {
                match mono {
                    [] => {}
                    [Atom::Basic(t)] if coef.is_one() => types.push(t.clone()),
                    _ => {
                        return Err(Error::invalid(format!(
                            "term {} is not a sum of distinct basic terms",
                            ts[0]
                        )))
                    }
                }
            }
            if types.is_empty() {
                return Ok(Folded::Const(eval_ground(
                    &Expr::pred(p.clone(), vec![Expr::int(c)]),
                    preds,
                )?));
            }
            if types.windows(2).any(|w| w[0].radius() != w[1].radius()) {
                return Err(Error::invalid(
                    "basic terms of different radii cannot be merged",
                ));
            }
            let disj = Expr::or_all(
                types
                    .into_iter()
                    .map(|t| Expr::Sphere(t, vec!["y".into()]))
                    .collect(),
            );
            let count = Expr::count(["y"], disj);
            let term = if c.is_zero() {
                count
            } else {
                Expr::add(count, Expr::int(c))
            };
            Folded::Expr(Expr::pred(p.clone(), vec![term]))
        }
        _ => {
            return Err(Error::invalid(format!(
                "unexpected subformula in compiled output: {e}"
            )))
        }
    })
}

/// Boolean combination of sphere atoms and P(#(y) ⋁ sph_τ(y) [+ c]).
pub fn is_weak_hnf(e: &Expr) -> bool {
    fn weak_count(t: &Expr) -> bool {
        match t {
            Expr::Count(ys, body) => ys.len() == 1 && disjunction_of_spheres(body, &ys[0]),
            _ => false,
        }
    }
    fn disjunction_of_spheres(e: &Expr, y: &str) -> bool {
        match e {
            Expr::Sphere(t, xs) => t.centres() == 1 && xs.len() == 1 && xs[0] == y,
            Expr::Or(a, b) => disjunction_of_spheres(a, y) && disjunction_of_spheres(b, y),
            _ => false,
        }
    }
    match e {
        Expr::Sphere(..) => true,
        Expr::Not(a) => is_weak_hnf(a),
        Expr::Or(a, b) => is_weak_hnf(a) && is_weak_hnf(b),
        Expr::Pred(_, ts) if ts.len() == 1 => match &ts[0] {
            Expr::Add(a, b) => weak_count(a) && matches!(b.as_ref(), Expr::Int(_)),
            t => weak_count(t) || matches!(t, Expr::Int(_)),
        },
        _ => false,
    }
}
