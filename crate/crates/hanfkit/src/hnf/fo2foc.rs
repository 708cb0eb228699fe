//! Translation of plain first-order formulas with bounded quantifier blocks
//! into FOC({exists}): each block ∃x_1..∃x_k becomes exists(#(x_1..x_k) ·).

use crate::error::{Error, Result};
use crate::formula::Expr;

/// Strips pairs of negations.
fn skip_double_not(e: &Expr) -> &Expr {
    let mut e = e;
    while let Expr::Not(a) = e {
        match a.as_ref() {
            Expr::Not(b) => e = b,
            _ => break,
        }
    }
    e
}

/// Maximal quantifier chain starting at `e`: the variables and the body.
fn chain(e: &Expr) -> (Vec<&str>, &Expr) {
    let mut vars = Vec::new();
    let mut cur = e;
    while let Expr::Exists(y, a) = cur {
        vars.push(y.as_str());
        cur = skip_double_not(a);
    }
    (vars, cur)
}

/// Least n with φ ∈ BΣ_{n,ℓ}, reading blocks as maximal chains of
/// existential quantifiers (double negations inside a chain are ignored).
/// Errors when φ is not a plain first-order formula.
pub fn block_depth(phi: &Expr, l: usize) -> Result<usize> {
    if l == 0 {
        return Err(Error::invalid("block size must be at least 1"));
    }
    Ok(match phi {
        Expr::Equal(..) | Expr::Rel(..) => 0,
        Expr::Not(a) => block_depth(a, l)?,
        Expr::Or(a, b) => block_depth(a, l)?.max(block_depth(b, l)?),
        Expr::Exists(..) => {
            let (vars, body) = chain(phi);
            vars.len().div_ceil(l) + block_depth(body, l)?
        }
        _ => return Err(Error::invalid(format!("not a first-order formula: {phi}"))),
    })
}

/// An equivalent FOC({exists}) formula with bw ≤ ℓ and br ≤ n.
pub fn fo_to_foc(phi: &Expr, n: usize, l: usize) -> Result<Expr> {
    let depth = block_depth(phi, l)?;
    if depth > n {
        return Err(Error::invalid(format!(
            "formula needs {depth} levels of blocks of size {l}, more than the {n} allowed"
        )));
    }
    Ok(translate(phi, l))
}

fn translate(e: &Expr, l: usize) -> Expr {
    match e {
        Expr::Not(a) => Expr::not(translate(a, l)),
        Expr::Or(a, b) => Expr::or(translate(a, l), translate(b, l)),
        Expr::Exists(..) => {
            let (vars, body) = chain(e);
            // An outer quantifier whose variable is bound again further in
            // is redundant.
            let mut kept: Vec<&str> = Vec::new();
            for (i, v) in vars.iter().enumerate() {
                if !vars[i + 1..].contains(v) {
                    kept.push(v);
                }
            }
            let mut inner = translate(body, l);
            let groups: Vec<&[&str]> = kept.chunks(l).collect();
            for g in groups.into_iter().rev() {
                inner = Expr::pred("exists", vec![Expr::count(g.iter().copied(), inner)]);
            }
            inner
        }
        _ => e.clone(),
    }
}
