use std::collections::BTreeSet;

use crate::formula::Expr;
use crate::structures::SphereType;

fn fresh(base: &str, avoid: &BTreeSet<String>, taken: &mut Vec<String>) -> String {
    let mut i = 0;
    loop {
        let cand = format!("{base}{i}");
        if !avoid.contains(&cand) && !taken.contains(&cand) {
            taken.push(cand.clone());
            return cand;
        }
        i += 1;
    }
}

/// Every tuple over `names` of the given arity.
fn all_tuples(names: &[String], arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..names.len()).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

/// Plain first-order formula sph_τ(x̄) with A ⊨ sph_τ[ā] iff N_r(ā) ≅ τ.
///
/// One existential variable per non-centre element, pairwise distinctness
/// (and the centre equality pattern), the full atomic diagram over the named
/// elements, and a closure clause: no unnamed element is adjacent to a named
/// element lying at distance below r from the centres.
pub fn expand_sphere_formula(t: &SphereType, xs: &[String]) -> Expr {
    assert_eq!(xs.len(), t.centres.len(), "one variable per centre");
    let avoid: BTreeSet<String> = xs.iter().cloned().collect();
    let mut taken = Vec::new();
    let n = t.size();
    // name of each element: first centre variable naming it, else a fresh one
    let mut names: Vec<Option<String>> = vec![None; n];
    for (i, &c) in t.centres.iter().enumerate() {
        if names[c].is_none() {
            names[c] = Some(xs[i].clone());
        }
    }
    let mut bound = Vec::new();
    for name in names.iter_mut() {
        if name.is_none() {
            let z = fresh("z", &avoid, &mut taken);
            bound.push(z.clone());
            *name = Some(z);
        }
    }
    let names: Vec<String> = names.into_iter().map(|n| n.expect("all named")).collect();
    let mut conj: Vec<Expr> = Vec::new();
    for (i, &c) in t.centres.iter().enumerate() {
        if names[c] != xs[i] {
            conj.push(Expr::eq(xs[i].clone(), names[c].clone()));
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            conj.push(Expr::not(Expr::eq(names[a].clone(), names[b].clone())));
        }
    }
    let sig = t.base.sig().clone();
    for (r, (rel, ar)) in sig.relations().iter().enumerate() {
        for tuple in all_tuples(&names, *ar) {
            let atom = Expr::rel(rel.clone(), tuple.iter().map(|&i| names[i].clone()));
            conj.push(if t.base.holds(r, &tuple) {
                atom
            } else {
                Expr::not(atom)
            });
        }
    }
    if t.radius > 0 {
        let dist = t.base.distances_from(&t.centres);
        let inner: Vec<usize> = (0..n)
            .filter(|&e| dist[e].map_or(false, |d| d < t.radius))
            .collect();
        let w = fresh("w", &avoid, &mut taken);
        let mut outside: Vec<Expr> = names
            .iter()
            .map(|nm| Expr::eq(w.clone(), nm.clone()))
            .collect();
        let mut adjacent = Vec::new();
        for &e in &inner {
            adjacent.push(adjacency(&w, &names[e], &sig, &avoid, &mut taken));
        }
        outside.push(Expr::not(Expr::or_all(adjacent)));
        // forall w: w is named, or w touches no inner element
        conj.push(Expr::forall(w, Expr::or_all(outside)));
    }
    let mut body = Expr::and_all(conj);
    for z in bound.into_iter().rev() {
        body = Expr::exists(z, body);
    }
    body
}

/// Gaifman adjacency of two variables: some tuple mentions both.
fn adjacency(
    a: &str,
    b: &str,
    sig: &crate::formula::Signature,
    avoid: &BTreeSet<String>,
    taken: &mut Vec<String>,
) -> Expr {
    let mut options = Vec::new();
    for (rel, ar) in sig.relations() {
        if *ar < 2 {
            continue;
        }
        for i in 0..*ar {
            for j in 0..*ar {
                if i == j {
                    continue;
                }
                let mut extra = Vec::new();
                let args: Vec<String> = (0..*ar)
                    .map(|p| {
                        if p == i {
                            a.to_string()
                        } else if p == j {
                            b.to_string()
                        } else {
                            let v = fresh("u", avoid, taken);
                            extra.push(v.clone());
                            v
                        }
                    })
                    .collect();
                let mut f = Expr::rel(rel.clone(), args);
                for v in extra.into_iter().rev() {
                    f = Expr::exists(v, f);
                }
                options.push(f);
            }
        }
    }
    Expr::or_all(options)
}

/// Replaces every sphere atom by its expansion. The expansion only mentions
/// the atom's own variables freely, so no capture can occur.
pub fn expand_sphere_atoms(e: &Expr) -> Expr {
    match e {
        Expr::Sphere(t, xs) => expand_sphere_formula(&t.ty, xs),
        Expr::Not(a) => Expr::not(expand_sphere_atoms(a)),
        Expr::Or(a, b) => Expr::or(expand_sphere_atoms(a), expand_sphere_atoms(b)),
        Expr::Exists(v, a) => Expr::exists(v.clone(), expand_sphere_atoms(a)),
        Expr::ExistsNum(v, a) => Expr::exists_num(v.clone(), expand_sphere_atoms(a)),
        Expr::Count(vs, a) => Expr::count(vs.clone(), expand_sphere_atoms(a)),
        Expr::Pred(p, ts) => Expr::pred(p.clone(), ts.iter().map(expand_sphere_atoms).collect()),
        Expr::Add(a, b) => Expr::add(expand_sphere_atoms(a), expand_sphere_atoms(b)),
        Expr::Mul(a, b) => Expr::mul(expand_sphere_atoms(a), expand_sphere_atoms(b)),
        Expr::Equal(..) | Expr::Rel(..) | Expr::Int(_) | Expr::NumVar(_) => e.clone(),
    }
}
