//! Optional clean-up of compiled formulas: constant folding, double
//! negation and duplicate disjuncts.

use std::collections::HashSet;

use super::numeric::{eval_ground, is_ground};
use crate::formula::{Expr, PredicateCollection};

enum S {
    Const(bool),
    E(Expr),
}

/// Folds ground conditions and the constants they produce. The result is
/// equivalent but may lose free variables whose atoms folded away.
pub fn simplify(e: &Expr, preds: &PredicateCollection) -> Expr {
    match go(e, preds) {
        S::Const(true) => Expr::verum(),
        S::Const(false) => Expr::falsum(),
        S::E(x) => x,
    }
}

fn go(e: &Expr, preds: &PredicateCollection) -> S {
    match e {
        Expr::Not(a) => match go(a, preds) {
            S::Const(b) => S::Const(!b),
            S::E(Expr::Not(inner)) => S::E(*inner),
            S::E(x) => S::E(Expr::not(x)),
        },
        Expr::Or(..) => {
            let mut items = Vec::new();
            flatten_or(e, &mut items);
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for it in items {
                match go(it, preds) {
                    S::Const(true) => return S::Const(true),
                    S::Const(false) => {}
                    S::E(x) => {
                        if seen.insert(x.clone()) {
                            out.push(x);
                        }
                    }
                }
            }
            if out.is_empty() {
                S::Const(false)
            } else {
                S::E(Expr::or_all(out))
            }
        }
        Expr::ExistsNum(k, a) => match go(a, preds) {
            S::Const(b) => S::Const(b),
            S::E(x) => S::E(Expr::exists_num(k.clone(), x)),
        },
        Expr::Pred(..) if is_ground(e) => match eval_ground(e, preds) {
            Ok(b) => S::Const(b),
            Err(_) => S::E(e.clone()),
        },
        Expr::Exists(y, a) => match go(a, preds) {
            S::Const(b) => S::Const(b),
            S::E(x) => S::E(Expr::exists(y.clone(), x)),
        },
        _ => S::E(e.clone()),
    }
}

fn flatten_or<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
    match e {
        Expr::Or(a, b) => {
            flatten_or(a, out);
            flatten_or(b, out);
        }
        _ => out.push(e),
    }
}
