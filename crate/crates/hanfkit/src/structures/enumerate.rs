use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;

use super::canon::canonical_form;
use super::Structure;
use crate::formula::Signature;

/// All tuples over `0..=v` that mention `v`, per relation.
fn tuples_with(sig: &Signature, v: usize) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    for (r, &(_, ar)) in sig.relations().iter().enumerate() {
        let mut t = vec![0usize; ar];
        loop {
            if t.contains(&v) {
                out.push((r, t.clone()));
            }
            let mut i = 0;
            loop {
                if i == ar {
                    break;
                }
                t[i] += 1;
                if t[i] <= v {
                    break;
                }
                t[i] = 0;
                i += 1;
            }
            if i == ar {
                break;
            }
        }
    }
    out
}

/// Isomorphism-class representatives of all d-bounded structures over `sig`
/// with exactly 1..=max_size elements, grouped by size (index 0 holds size 1).
///
/// Every structure on m+1 elements arises from one on m elements by adding
/// the last element with some set of tuples that mention it, and degree
/// bounds are inherited by induced substructures, so extending one
/// representative per class at each level and deduplicating is complete.
pub fn structures_by_size(sig: &Signature, d: usize, max_size: usize) -> Vec<Vec<Structure>> {
    let sig = Arc::new(sig.clone());
    let mut levels: Vec<Vec<Structure>> = Vec::new();
    let mut current = vec![Structure::from_sorted(
        sig.clone(),
        0,
        vec![Vec::new(); sig.len()],
    )];
    for m in 0..max_size {
        let new = tuples_with(&sig, m);
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for parent in &current {
            let pdeg: Vec<usize> = (0..m).map(|u| parent.neighbours(u).len()).collect();
            for mask in 0u64..(1u64 << new.len()) {
                let mut nb: Vec<usize> = Vec::new();
                for (i, (_, t)) in new.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        for &e in t {
                            if e != m && !nb.contains(&e) {
                                nb.push(e);
                            }
                        }
                    }
                }
                if nb.len() > d || nb.iter().any(|&u| pdeg[u] + 1 > d) {
                    continue;
                }
                let mut rels: Vec<Vec<Vec<usize>>> = parent.relations().to_vec();
                for (i, (r, t)) in new.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        rels[*r].push(t.clone());
                    }
                }
                for ts in rels.iter_mut() {
                    ts.sort();
                }
                let child = Structure::from_sorted(sig.clone(), m + 1, rels);
                let (code, _) = canonical_form(&child, &[]);
                if seen.insert(code) {
                    next.push(child);
                }
            }
        }
        levels.push(next.clone());
        current = next;
    }
    levels
}

/// All d-bounded structures with 1..=max_size elements, up to isomorphism.
pub fn all_structures(sig: &Signature, d: usize, max_size: usize) -> Vec<Structure> {
    structures_by_size(sig, d, max_size)
        .into_iter()
        .flatten()
        .collect()
}

/// A random d-bounded structure on `size` elements: random candidate tuples
/// are added whenever the degree bound permits. `density` scales the number
/// of attempts per element.
pub fn random_structure<R: Rng>(
    sig: &Signature,
    size: usize,
    d: usize,
    density: f64,
    rng: &mut R,
) -> Structure {
    let sig = Arc::new(sig.clone());
    let mut rels: Vec<Vec<Vec<usize>>> = vec![Vec::new(); sig.len()];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); size];
    if size > 0 && !sig.is_empty() {
        let attempts = ((size as f64) * density * rng.gen_range(0.0..2.0)).round() as usize;
        for _ in 0..attempts {
            let r = rng.gen_range(0..sig.len());
            let t: Vec<usize> = (0..sig.arity(r)).map(|_| rng.gen_range(0..size)).collect();
            let mut trial = adj.clone();
            for &a in &t {
                for &b in &t {
                    if a != b && !trial[a].contains(&b) {
                        trial[a].push(b);
                    }
                }
            }
            if t.iter().all(|&a| trial[a].len() <= d) {
                adj = trial;
                rels[r].push(t);
            }
        }
    }
    Structure::new(sig, size, rels).expect("generated tuples are in range")
}
