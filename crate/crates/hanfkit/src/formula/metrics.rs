use std::collections::{BTreeSet, HashSet};

use super::expr::{Expr, SphereRef};
use super::predicates::PredicateCollection;
use super::signature::Signature;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Metrics {
    pub size: usize,
    pub nqr: usize,
    pub br: usize,
    pub bw: usize,
    pub free_struct: BTreeSet<String>,
    pub free_num: BTreeSet<String>,
}

/// Free structure variables and free number variables.
pub fn free_vars(e: &Expr) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut s = BTreeSet::new();
    let mut n = BTreeSet::new();
    collect_free(e, &mut s, &mut n);
    (s, n)
}

fn collect_free(e: &Expr, s: &mut BTreeSet<String>, n: &mut BTreeSet<String>) {
    match e {
        Expr::Equal(a, b) => {
            s.insert(a.clone());
            s.insert(b.clone());
        }
        Expr::Rel(_, xs) | Expr::Sphere(_, xs) => s.extend(xs.iter().cloned()),
        Expr::Exists(y, body) => {
            let (mut fs, fnum) = free_vars(body);
            fs.remove(y);
            s.extend(fs);
            n.extend(fnum);
        }
        Expr::Count(ys, body) => {
            let (mut fs, fnum) = free_vars(body);
            for y in ys {
                fs.remove(y);
            }
            s.extend(fs);
            n.extend(fnum);
        }
        Expr::ExistsNum(k, body) => {
            let (fs, mut fnum) = free_vars(body);
            fnum.remove(k);
            s.extend(fs);
            n.extend(fnum);
        }
        Expr::NumVar(k) => {
            n.insert(k.clone());
        }
        Expr::Int(_) => {}
        Expr::Not(_) | Expr::Or(..) | Expr::Add(..) | Expr::Mul(..) | Expr::Pred(..) => {
            for c in e.children() {
                collect_free(c, s, n);
            }
        }
    }
}

/// Free structure variables in sorted order.
pub fn free_struct_vars(e: &Expr) -> Vec<String> {
    free_vars(e).0.into_iter().collect()
}

/// Token count of the written form: every symbol, variable, literal,
/// parenthesis, comma and the dot after a count binder is one token.
pub fn size(e: &Expr) -> usize {
    let args = |m: usize| if m == 0 { 2 } else { 2 + m + (m - 1) };
    match e {
        Expr::Equal(..) => 3,
        Expr::Rel(_, xs) | Expr::Sphere(_, xs) => 1 + args(xs.len()),
        Expr::Not(a) => 1 + size(a),
        Expr::Or(a, b) | Expr::Add(a, b) | Expr::Mul(a, b) => 3 + size(a) + size(b),
        Expr::Exists(_, a) | Expr::ExistsNum(_, a) => 2 + size(a),
        Expr::Pred(_, ts) => {
            1 + 2 + ts.len().saturating_sub(1) + ts.iter().map(size).sum::<usize>()
        }
        Expr::Count(ys, a) => 1 + args(ys.len()) + 1 + size(a),
        Expr::Int(_) | Expr::NumVar(_) => 1,
    }
}

pub fn nqr(e: &Expr) -> usize {
    let inner = e.children().into_iter().map(nqr).max().unwrap_or(0);
    match e {
        Expr::ExistsNum(..) => inner + 1,
        _ => inner,
    }
}

pub fn br(e: &Expr) -> usize {
    let inner = e.children().into_iter().map(br).max().unwrap_or(0);
    match e {
        Expr::Exists(..) | Expr::Count(..) => inner + 1,
        _ => inner,
    }
}

pub fn bw(e: &Expr) -> usize {
    let inner = e.children().into_iter().map(bw).max().unwrap_or(0);
    match e {
        Expr::Exists(..) => inner.max(1),
        Expr::Count(ys, _) => inner.max(ys.len()),
        _ => inner,
    }
}

pub fn metrics(e: &Expr) -> Metrics {
    let (free_struct, free_num) = free_vars(e);
    Metrics {
        size: size(e),
        nqr: nqr(e),
        br: br(e),
        bw: bw(e),
        free_struct,
        free_num,
    }
}

/// Checks sorts, arities and count tuples against a signature and predicates.
pub fn validate(e: &Expr, sig: &Signature, preds: &PredicateCollection) -> Result<()> {
    let want_formula = |c: &Expr| {
        if c.is_formula() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "expected a formula, found term {c}"
            )))
        }
    };
    let want_term = |c: &Expr| {
        if c.is_term() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "expected a term, found formula {c}"
            )))
        }
    };
    match e {
        Expr::Rel(r, xs) => match sig.index_of(r) {
            Some(i) if sig.arity(i) == xs.len() => Ok(()),
            Some(i) => Err(Error::invalid(format!(
                "relation {r} has arity {}",
                sig.arity(i)
            ))),
            None => Err(Error::invalid(format!(
                "relation {r} not in signature {sig}"
            ))),
        },
        Expr::Equal(..) | Expr::Int(_) | Expr::NumVar(_) => Ok(()),
        Expr::Sphere(t, xs) => {
            if t.centres() != xs.len() {
                return Err(Error::invalid(format!(
                    "sphere {} needs {} centres",
                    t.id,
                    t.centres()
                )));
            }
            Ok(())
        }
        Expr::Not(a) | Expr::Exists(_, a) | Expr::ExistsNum(_, a) => {
            want_formula(a)?;
            validate(a, sig, preds)
        }
        Expr::Or(a, b) => {
            want_formula(a)?;
            want_formula(b)?;
            validate(a, sig, preds)?;
            validate(b, sig, preds)
        }
        Expr::Add(a, b) | Expr::Mul(a, b) => {
            want_term(a)?;
            want_term(b)?;
            validate(a, sig, preds)?;
            validate(b, sig, preds)
        }
        Expr::Count(ys, a) => {
            if ys.is_empty() {
                return Err(Error::invalid("count binds no variables"));
            }
            let distinct: HashSet<&String> = ys.iter().collect();
            if distinct.len() != ys.len() {
                return Err(Error::invalid(format!(
                    "repeated variable in count tuple {ys:?}"
                )));
            }
            want_formula(a)?;
            validate(a, sig, preds)
        }
        Expr::Pred(p, ts) => {
            match preds.arity(p) {
                Some(a) if a == ts.len() => {}
                Some(a) => return Err(Error::invalid(format!("predicate {p} has arity {a}"))),
                None => return Err(Error::invalid(format!("unknown predicate {p}"))),
            }
            for t in ts {
                want_term(t)?;
                validate(t, sig, preds)?;
            }
            Ok(())
        }
    }
}

/// Polynomial over basic counting terms, number variables and integers.
pub fn is_simple_term(t: &Expr) -> bool {
    match t {
        Expr::Int(_) | Expr::NumVar(_) => true,
        Expr::Add(a, b) | Expr::Mul(a, b) => is_simple_term(a) && is_simple_term(b),
        Expr::Count(..) => t.as_basic_count().is_some(),
        _ => false,
    }
}

/// Number formula over simple counting terms.
pub fn is_oc_condition(e: &Expr) -> bool {
    match e {
        Expr::Not(a) | Expr::ExistsNum(_, a) => is_oc_condition(a),
        Expr::Or(a, b) => is_oc_condition(a) && is_oc_condition(b),
        Expr::Pred(_, ts) => ts.iter().all(is_simple_term),
        _ => false,
    }
}

/// Boolean combination of sphere atoms and numerical oc-type conditions.
pub fn is_hnf(e: &Expr) -> bool {
    match e {
        Expr::Sphere(..) => true,
        Expr::Not(a) => is_hnf(a),
        Expr::Or(a, b) => is_hnf(a) && is_hnf(b),
        Expr::Pred(..) | Expr::ExistsNum(..) => is_oc_condition(e),
        _ => false,
    }
}

/// The maximal condition subformulas of an HNF: atomic predicate
/// applications and number-quantified formulas reached through the
/// Boolean skeleton. Distinct, in first-occurrence order.
pub fn oc_conditions(e: &Expr) -> Vec<Expr> {
    fn walk(e: &Expr, seen: &mut HashSet<Expr>, out: &mut Vec<Expr>) {
        match e {
            Expr::Not(a) => walk(a, seen, out),
            Expr::Or(a, b) => {
                walk(a, seen, out);
                walk(b, seen, out);
            }
            Expr::Pred(..) | Expr::ExistsNum(..) => {
                if seen.insert(e.clone()) {
                    out.push(e.clone());
                }
            }
            _ => {}
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    walk(e, &mut seen, &mut out);
    out
}

/// Number of distinct numerical oc-type conditions of an HNF.
pub fn count_oc_conditions(e: &Expr) -> usize {
    oc_conditions(e).len()
}

/// Every sphere type referenced anywhere in `e`, sphere atoms and basic
/// counting terms alike.
pub fn sphere_refs(e: &Expr) -> Vec<SphereRef> {
    fn walk(e: &Expr, seen: &mut HashSet<SphereRef>, out: &mut Vec<SphereRef>) {
        if let Expr::Sphere(t, _) = e {
            if seen.insert(t.clone()) {
                out.push(t.clone());
            }
        }
        for c in e.children() {
            walk(c, seen, out);
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    walk(e, &mut seen, &mut out);
    out
}

/// Types of the basic counting terms `#(y) sph(y)` in `e`, first occurrence order.
pub fn basic_count_types(e: &Expr) -> Vec<SphereRef> {
    fn walk(e: &Expr, seen: &mut HashSet<SphereRef>, out: &mut Vec<SphereRef>) {
        if let Some(t) = e.as_basic_count() {
            if seen.insert(t.clone()) {
                out.push(t.clone());
            }
            return;
        }
        for c in e.children() {
            walk(c, seen, out);
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    walk(e, &mut seen, &mut out);
    out
}

/// Maximal radius over all referenced sphere types; 0 when there are none.
pub fn locality_radius(e: &Expr) -> usize {
    sphere_refs(e)
        .iter()
        .map(SphereRef::radius)
        .max()
        .unwrap_or(0)
}
