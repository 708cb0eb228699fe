use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::formula::Signature;
use crate::structures::{canonical_form, CanonCode, SphereType, Structure};

/// Restricted growth strings of length k: the equality patterns of a
/// centre tuple.
pub(crate) fn set_partitions(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let next = cur.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=next {
            cur.push(b);
            rec(k, cur, out);
            cur.pop();
        }
    }
    rec(k, &mut cur, &mut out);
    out
}

/// All tuples over `0..n` for relation `r`, optionally required to mention `v`.
fn tuples_over(arity: usize, n: usize, must: Option<usize>, within: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if within.is_empty() {
        return out;
    }
    let mut idx = vec![0usize; arity];
    loop {
        let t: Vec<usize> = idx.iter().map(|&i| within[i]).collect();
        if must.map_or(true, |m| t.contains(&m)) && t.iter().all(|&e| e < n) {
            out.push(t);
        }
        let mut i = 0;
        while i < arity {
            idx[i] += 1;
            if idx[i] < within.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == arity {
            return out;
        }
    }
}

struct Gen<'a> {
    sig: &'a Arc<Signature>,
    d: usize,
    r: usize,
    max_n: usize,
    max_entries: usize,
    /// Arity ≤ 2: grow by adding a farthest vertex with an exact neighbour set.
    local: bool,
}

type Level = HashMap<CanonCode, (Structure, Vec<usize>)>;

impl Gen<'_> {
    fn insert(&self, level: &mut Level, s: Structure, centres: &[usize]) -> Result<()> {
        let (code, perm) = canonical_form(&s, centres);
        // keep the canonically relabeled copy so representatives do not
        // depend on discovery order
        level.entry(code).or_insert_with(|| {
            (
                s.permuted(&perm),
                centres.iter().map(|&c| perm[c]).collect(),
            )
        });
        if level.len() > self.max_entries {
            return Err(Error::cap(format!(
                "more than {} candidate types at radius {} and degree {}",
                self.max_entries, self.r, self.d
            )));
        }
        Ok(())
    }

    fn with_tuples(
        &self,
        parent: &Structure,
        extra: &[(usize, Vec<usize>)],
        size: usize,
    ) -> Structure {
        let mut rels = parent.relations().to_vec();
        for (r, t) in extra {
            rels[*r].push(t.clone());
        }
        for ts in rels.iter_mut() {
            ts.sort();
            ts.dedup();
        }
        Structure::from_sorted(self.sig.clone(), size, rels)
    }

    fn base(&self, k: usize) -> Result<Level> {
        let mut level = Level::new();
        for pattern in set_partitions(k) {
            let p = pattern.iter().copied().max().map_or(0, |m| m + 1);
            let all: Vec<usize> = (0..p).collect();
            let mut cands: Vec<(usize, Vec<usize>)> = Vec::new();
            for (r, &(_, ar)) in self.sig.relations().iter().enumerate() {
                for t in tuples_over(ar, p, None, &all) {
                    cands.push((r, t));
                }
            }
            if cands.len() > 24 {
                return Err(Error::cap(format!(
                    "{} candidate tuples on the centres",
                    cands.len()
                )));
            }
            let empty =
                Structure::from_sorted(self.sig.clone(), p, vec![Vec::new(); self.sig.len()]);
            for mask in 0u64..(1u64 << cands.len()) {
                let chosen: Vec<(usize, Vec<usize>)> = cands
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, c)| c.clone())
                    .collect();
                let s = self.with_tuples(&empty, &chosen, p);
                if s.gaifman_degree() <= self.d {
                    self.insert(&mut level, s, &pattern)?;
                }
            }
        }
        Ok(level)
    }

    fn extend(&self, level: &Level) -> Result<Level> {
        let mut next = Level::new();
        for (s, centres) in level.values() {
            let m = s.size();
            if m >= self.max_n {
                continue;
            }
            let dist = s.distances_from(centres);
            let deg: Vec<usize> = (0..m).map(|u| s.neighbours(u).len()).collect();
            let open: Vec<usize> = (0..m).filter(|&u| deg[u] < self.d).collect();
            let far = dist.iter().filter_map(|&x| x).max().unwrap_or(0);
            for nset in subsets_up_to(&open, self.d) {
                if self.local {
                    let dv = nset.iter().filter_map(|&u| dist[u]).min().map(|x| x + 1);
                    match dv {
                        Some(dv) if dv <= self.r && dv >= far => {}
                        _ => continue,
                    }
                }
                self.children(s, centres, &nset, &mut next)?;
            }
        }
        Ok(next)
    }

    /// Adds vertex v = size(s) whose Gaifman neighbourhood is exactly `nset`.
    fn children(
        &self,
        s: &Structure,
        centres: &[usize],
        nset: &[usize],
        out: &mut Level,
    ) -> Result<()> {
        let v = s.size();
        let mut within: Vec<usize> = nset.to_vec();
        within.push(v);
        // group candidate tuples by the set of old elements they touch
        let mut self_tuples: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut linked: Vec<(Vec<usize>, (usize, Vec<usize>))> = Vec::new();
        for (r, &(_, ar)) in self.sig.relations().iter().enumerate() {
            for t in tuples_over(ar, v + 1, Some(v), &within) {
                let mut others: Vec<usize> = t.iter().copied().filter(|&e| e != v).collect();
                others.sort_unstable();
                others.dedup();
                if others.is_empty() {
                    self_tuples.push((r, t));
                } else {
                    linked.push((others, (r, t)));
                }
            }
        }
        if self_tuples.len() + linked.len() > 30 {
            return Err(Error::cap(format!(
                "{} candidate tuples for a new element",
                self_tuples.len() + linked.len()
            )));
        }
        let all: Vec<(usize, Vec<usize>)> = self_tuples
            .iter()
            .cloned()
            .chain(linked.iter().map(|(_, t)| t.clone()))
            .collect();
        let ns = self_tuples.len();
        for mask in 0u64..(1u64 << all.len()) {
            // exact neighbourhood: every u in nset touched by some chosen tuple
            let covered = nset.iter().all(|u| {
                linked
                    .iter()
                    .enumerate()
                    .any(|(i, (others, _))| mask & (1 << (ns + i)) != 0 && others.contains(u))
            });
            if !covered {
                continue;
            }
            let chosen: Vec<(usize, Vec<usize>)> = all
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, c)| c.clone())
                .collect();
            let child = self.with_tuples(s, &chosen, v + 1);
            if child.gaifman_degree() <= self.d {
                self.insert(out, child, centres)?;
            }
        }
        Ok(())
    }
}

fn subsets_up_to(items: &[usize], max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &it in items {
        let mut add = Vec::new();
        for s in &out {
            if s.len() < max {
                let mut t = s.clone();
                t.push(it);
                add.push(t);
            }
        }
        out.extend(add);
    }
    out
}

/// Representatives of every d-bounded r-type with k centres over `sig`
/// whose universe has at most `max_n` elements, sorted by (size, code).
pub(crate) fn enumerate_types(
    sig: &Arc<Signature>,
    d: usize,
    r: usize,
    k: usize,
    max_n: usize,
    max_entries: usize,
) -> Result<Vec<(CanonCode, SphereType)>> {
    let local = sig.max_arity() <= 2;
    let g = Gen {
        sig,
        d,
        r,
        max_n,
        max_entries,
        local,
    };
    let mut found: Level = Level::new();
    let mut level = g.base(k)?;
    loop {
        for (code, (s, c)) in &level {
            let t = SphereType::new(s.clone(), c.clone(), r);
            if t.validate().is_ok() {
                found
                    .entry(code.clone())
                    .or_insert_with(|| (s.clone(), c.clone()));
            }
        }
        if found.len() > max_entries {
            return Err(Error::cap(format!("more than {max_entries} types")));
        }
        if r == 0 {
            break;
        }
        let next = g.extend(&level)?;
        if next.is_empty() {
            break;
        }
        level = next;
    }
    let mut out: Vec<(CanonCode, SphereType)> = found
        .into_iter()
        .map(|(c, (s, cs))| (c, SphereType::new(s, cs, r)))
        .collect();
    out.sort_by(|a, b| (a.1.size(), &a.0).cmp(&(b.1.size(), &b.0)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=5).map(|k| set_partitions(k).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52]);
    }

    #[test]
    fn subsets_bounded() {
        assert_eq!(subsets_up_to(&[1, 2, 3], 2).len(), 7);
        assert_eq!(subsets_up_to(&[1, 2, 3], 0).len(), 1);
    }
}
