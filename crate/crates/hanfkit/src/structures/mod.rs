//! Finite relational structures and their local geometry: Gaifman graph,
//! distances, neighbourhoods, spheres, canonical forms of pointed
//! structures, and enumeration of small bounded-degree structures.

mod canon;
mod enumerate;
mod sphere;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::formula::Signature;

pub use canon::{canonical_code, canonical_form, CanonCode};
pub use enumerate::{all_structures, random_structure, structures_by_size};
pub use sphere::{is_isomorphic, SphereType};

/// Distance in the Gaifman graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(usize),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<usize> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

/// ν_d(r) = 1 + d·Σ_{0≤i<r}(d−1)^i: the largest possible r-neighbourhood
/// of one element in a d-bounded structure. Saturates instead of overflowing.
pub fn nu(d: usize, r: usize) -> usize {
    let mut sum: usize = 0;
    let mut pow: usize = 1;
    for _ in 0..r {
        sum = sum.saturating_add(pow);
        pow = pow.saturating_mul(d.saturating_sub(1));
    }
    1usize.saturating_add(d.saturating_mul(sum))
}

/// A finite structure with dense element ids `0..size`. Tuples are stored
/// sorted and deduplicated per relation (in signature order), and the
/// Gaifman adjacency is precomputed.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Structure {
    sig: Arc<Signature>,
    size: usize,
    rels: Vec<Vec<Vec<usize>>>,
    adj: Vec<Vec<usize>>,
}

impl Structure {
    /// Builds a structure; `rels` is indexed like the signature.
    pub fn new(sig: Arc<Signature>, size: usize, rels: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if rels.len() != sig.len() {
            return Err(Error::invalid("relation list does not match the signature"));
        }
        let mut rels = rels;
        for (i, tuples) in rels.iter_mut().enumerate() {
            for t in tuples.iter() {
                if t.len() != sig.arity(i) {
                    return Err(Error::invalid(format!(
                        "tuple {t:?} has wrong arity for {}",
                        sig.name(i)
                    )));
                }
                if let Some(&e) = t.iter().find(|&&e| e >= size) {
                    return Err(Error::invalid(format!(
                        "element {e} outside universe of size {size}"
                    )));
                }
            }
            tuples.sort();
            tuples.dedup();
        }
        Ok(Self::from_sorted(sig, size, rels))
    }

    /// Internal constructor: tuples already valid, sorted and deduplicated.
    pub(crate) fn from_sorted(
        sig: Arc<Signature>,
        size: usize,
        rels: Vec<Vec<Vec<usize>>>,
    ) -> Self {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); size];
        for tuples in &rels {
            for t in tuples {
                for &a in t {
                    for &b in t {
                        if a != b {
                            adj[a].insert(b);
                        }
                    }
                }
            }
        }
        let adj = adj.into_iter().map(|s| s.into_iter().collect()).collect();
        Structure {
            sig,
            size,
            rels,
            adj,
        }
    }

    /// The structure with no elements; only meaningful as a database view.
    pub fn empty(sig: Arc<Signature>) -> Self {
        let n = sig.len();
        Self::from_sorted(sig, 0, vec![Vec::new(); n])
    }

    pub fn sig(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn tuples(&self, rel: usize) -> &[Vec<usize>] {
        &self.rels[rel]
    }

    pub fn relations(&self) -> &[Vec<Vec<usize>>] {
        &self.rels
    }

    pub fn tuple_count(&self) -> usize {
        self.rels.iter().map(Vec::len).sum()
    }

    pub fn holds(&self, rel: usize, tuple: &[usize]) -> bool {
        self.rels[rel]
            .binary_search_by(|t| t.as_slice().cmp(tuple))
            .is_ok()
    }

    pub fn neighbours(&self, a: usize) -> &[usize] {
        &self.adj[a]
    }

    pub fn gaifman_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn check(&self, a: usize) -> Result<()> {
        if a < self.size {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "element {a} outside universe of size {}",
                self.size
            )))
        }
    }

    /// BFS distances from a set of sources, `None` for unreachable.
    pub fn distances_from(&self, sources: &[usize]) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.size];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].expect("queued vertices have a distance");
            for &w in &self.adj[v] {
                if dist[w].is_none() {
                    dist[w] = Some(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// dist(ā, b): the minimum over the components of ā.
    pub fn distance(&self, tuple: &[usize], b: usize) -> Result<Distance> {
        for &a in tuple {
            self.check(a)?;
        }
        self.check(b)?;
        Ok(match self.distances_from(tuple)[b] {
            Some(d) => Distance::Finite(d),
            None => Distance::Infinite,
        })
    }

    /// N_r(ā), sorted.
    pub fn neighbourhood(&self, tuple: &[usize], r: usize) -> Result<Vec<usize>> {
        for &a in tuple {
            self.check(a)?;
        }
        Ok(self.ball(tuple, r))
    }

    /// Unchecked N_r(ā): BFS stopping at depth r, sorted.
    pub(crate) fn ball(&self, tuple: &[usize], r: usize) -> Vec<usize> {
        let mut seen: Vec<usize> = Vec::with_capacity(8);
        let mut frontier: Vec<usize> = Vec::new();
        for &a in tuple {
            if !seen.contains(&a) {
                seen.push(a);
                frontier.push(a);
            }
        }
        for _ in 0..r {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in &self.adj[v] {
                    if !seen.contains(&w) {
                        seen.push(w);
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        seen.sort_unstable();
        seen
    }

    /// Induced substructure on `elems` (sorted, distinct); element `elems[i]`
    /// becomes `i`.
    pub fn induced(&self, elems: &[usize]) -> Structure {
        let pos = |e: usize| elems.binary_search(&e).ok();
        let rels = self
            .rels
            .iter()
            .map(|tuples| {
                let mut out: Vec<Vec<usize>> = tuples
                    .iter()
                    .filter_map(|t| t.iter().map(|&e| pos(e)).collect::<Option<Vec<usize>>>())
                    .collect();
                out.sort();
                out
            })
            .collect();
        Structure::from_sorted(self.sig.clone(), elems.len(), rels)
    }

    /// Disjoint union; elements of `other` are shifted by `self.size()`.
    pub fn disjoint_union(&self, other: &Structure) -> Result<Structure> {
        if self.sig != other.sig {
            return Err(Error::invalid(
                "disjoint union of structures over different signatures",
            ));
        }
        let off = self.size;
        let rels = self
            .rels
            .iter()
            .zip(&other.rels)
            .map(|(a, b)| {
                let mut v = a.clone();
                v.extend(b.iter().map(|t| t.iter().map(|&e| e + off).collect()));
                v
            })
            .collect();
        Structure::new(self.sig.clone(), self.size + other.size, rels)
    }

    /// Renames elements by a permutation `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Structure {
        let rels = self
            .rels
            .iter()
            .map(|tuples| {
                let mut v: Vec<Vec<usize>> = tuples
                    .iter()
                    .map(|t| t.iter().map(|&e| perm[e]).collect())
                    .collect();
                v.sort();
                v
            })
            .collect();
        Structure::from_sorted(self.sig.clone(), self.size, rels)
    }

    /// Reads the line format: `universe N`, `rel NAME ARITY`, `NAME e1 ...`.
    /// Relations not declared with `rel` may still be listed when `sig`
    /// already contains them; without `sig` every relation must be declared.
    pub fn parse(text: &str, sig: Option<&Signature>) -> Result<Structure> {
        let mut size: Option<usize> = None;
        let mut declared: Vec<(String, usize)> = Vec::new();
        let mut facts: Vec<(usize, String, Vec<usize>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| Error::invalid(format!("line {}: {m}", lineno + 1));
            let words: Vec<&str> = line.split_whitespace().collect();
            match words[0] {
                "universe" => {
                    if words.len() != 2 || size.is_some() {
                        return Err(bad("expected a single `universe N`"));
                    }
                    size = Some(words[1].parse().map_err(|_| bad("bad universe size"))?);
                }
                "rel" => {
                    if words.len() != 3 {
                        return Err(bad("expected `rel NAME ARITY`"));
                    }
                    let ar = words[2].parse().map_err(|_| bad("bad arity"))?;
                    declared.push((words[1].to_string(), ar));
                }
                name => {
                    let elems = words[1..]
                        .iter()
                        .map(|w| w.parse::<usize>().map_err(|_| bad("bad element")))
                        .collect::<Result<Vec<_>>>()?;
                    facts.push((lineno + 1, name.to_string(), elems));
                }
            }
        }
        let size = size.ok_or_else(|| Error::invalid("missing `universe N` line"))?;
        if size == 0 {
            return Err(Error::invalid("universe must be non-empty"));
        }
        let mut signature = Signature::new(declared)?;
        if let Some(s) = sig {
            signature = signature.union(s)?;
        }
        let mut rels = vec![Vec::new(); signature.len()];
        for (lineno, name, elems) in facts {
            let idx = signature.index_of(&name).ok_or_else(|| {
                Error::invalid(format!("line {lineno}: undeclared relation {name}"))
            })?;
            rels[idx].push(elems);
        }
        Structure::new(Arc::new(signature), size, rels)
    }

    /// Writes the line format read by [`Structure::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("universe {}\n", self.size);
        for (i, (name, ar)) in self.sig.relations().iter().enumerate() {
            s.push_str(&format!("rel {name} {ar}\n"));
            for t in &self.rels[i] {
                let elems: Vec<String> = t.iter().map(usize::to_string).collect();
                s.push_str(&format!("{name} {}\n", elems.join(" ")));
            }
        }
        s
    }

    /// Same universe and tuples, viewed over a larger signature.
    pub fn extend_signature(&self, sig: Arc<Signature>) -> Result<Structure> {
        let mut rels = vec![Vec::new(); sig.len()];
        for (i, (name, ar)) in self.sig.relations().iter().enumerate() {
            match sig.index_of(name) {
                Some(j) if sig.arity(j) == *ar => rels[j] = self.rels[i].clone(),
                _ => {
                    return Err(Error::invalid(format!(
                        "relation {name}/{ar} missing from {sig}"
                    )))
                }
            }
        }
        Ok(Structure::from_sorted(sig, self.size, rels))
    }
}

impl fmt::Debug for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Structure(n={}", self.size)?;
        for (i, (name, _)) in self.sig.relations().iter().enumerate() {
            write!(f, ", {name}={:?}", self.rels[i])?;
        }
        f.write_str(")")
    }
}
