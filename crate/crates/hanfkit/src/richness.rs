//! Labelled complete binary trees and forests, the marking operators, the
//! property P_R, and the witness construction showing that sets with large
//! gaps are rich.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::formula::Signature;
use crate::structures::Structure;

/// Largest n for which trees of height 2^n are built.
pub const MAX_TREE_EXPONENT: u32 = 1;

/// Complete binary tree of height h = 2^n with a set X of labelled nodes.
/// Nodes are numbered in heap order: the root is 0, the 0-child of i is
/// 2i+1 and the 1-child is 2i+2.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabeledTree {
    height: usize,
    labels: Vec<bool>,
}

/// 2^(h+1) − 1 nodes for height h.
pub fn node_count(height: usize) -> usize {
    (1usize << (height + 1)) - 1
}

impl LabeledTree {
    /// T_n with the given labels; `labels[i]` is the label of node i.
    pub fn new(n: u32, labels: Vec<bool>) -> Result<Self> {
        if n > MAX_TREE_EXPONENT {
            return Err(Error::cap(format!(
                "trees of height 2^{n} exceed the supported size"
            )));
        }
        let height = 1usize << n;
        if labels.len() != node_count(height) {
            return Err(Error::invalid(format!(
                "height {height} needs {} labels",
                node_count(height)
            )));
        }
        Ok(LabeledTree { height, labels })
    }

    /// T_n whose labels are the bits of `mask`.
    pub fn from_mask(n: u32, mask: u64) -> Result<Self> {
        let count = node_count(1usize << n.min(MAX_TREE_EXPONENT));
        LabeledTree::new(n, (0..count).map(|i| mask >> i & 1 == 1).collect())
    }

    /// Every labelling of T_n.
    pub fn all(n: u32) -> Result<Vec<LabeledTree>> {
        if n > MAX_TREE_EXPONENT {
            return Err(Error::cap(format!(
                "trees of height 2^{n} exceed the supported size"
            )));
        }
        let count = node_count(1usize << n);
        (0..1u64 << count)
            .map(|m| LabeledTree::from_mask(n, m))
            .collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn is_marked(&self) -> bool {
        self.labels[0]
    }

    /// Binary word of a node, root = empty word.
    pub fn word(i: usize) -> String {
        let mut bits = Vec::new();
        let mut v = i;
        while v > 0 {
            bits.push(if v % 2 == 1 { '0' } else { '1' });
            v = (v - 1) / 2;
        }
        bits.iter().rev().collect()
    }

    /// Structure over {E0/2, E1/2, X/1}.
    pub fn to_structure(&self) -> Structure {
        let sig = Arc::new(Signature::parse("E0/2,E1/2,X/1").expect("tree signature"));
        let (e0, e1, x) = (
            sig.index_of("E0").unwrap(),
            sig.index_of("E1").unwrap(),
            sig.index_of("X").unwrap(),
        );
        let mut rels = vec![Vec::new(); 3];
        for i in 0..self.nodes() {
            if 2 * i + 2 < self.nodes() {
                rels[e0].push(vec![i, 2 * i + 1]);
                rels[e1].push(vec![i, 2 * i + 2]);
            }
            if self.labels[i] {
                rels[x].push(vec![i]);
            }
        }
        Structure::new(sig, self.nodes(), rels).expect("valid tree")
    }
}

/// μ: the root joins X.
pub fn mark(t: &LabeledTree) -> LabeledTree {
    let mut u = t.clone();
    u.labels[0] = true;
    u
}

/// μ̄: the root leaves X.
pub fn unmark(t: &LabeledTree) -> LabeledTree {
    let mut u = t.clone();
    u.labels[0] = false;
    u
}

/// Multiset of trees.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Forest {
    trees: BTreeMap<LabeledTree, usize>,
}

impl Forest {
    pub fn new() -> Self {
        Forest::default()
    }

    pub fn add(&mut self, t: LabeledTree, copies: usize) -> Result<()> {
        if let Some(first) = self.trees.keys().next() {
            if first.height != t.height {
                return Err(Error::invalid("all trees of a forest need the same height"));
            }
        }
        if copies > 0 {
            *self.trees.entry(t).or_default() += copies;
        }
        Ok(())
    }

    pub fn multiplicity(&self, t: &LabeledTree) -> usize {
        self.trees.get(t).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.trees.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Unmarked trees T, with multiplicity, such that μ(T) also occurs.
    pub fn matched_unmarked(&self) -> usize {
        self.trees
            .iter()
            .filter(|(t, _)| !t.is_marked() && self.trees.contains_key(&mark(t)))
            .map(|(_, &c)| c)
            .sum()
    }
}

/// P_R: whether the number of unmarked trees whose marked version occurs
/// in the forest belongs to R.
pub fn property_pr(f: &Forest, r: &dyn Fn(u64) -> Result<bool>) -> Result<bool> {
    r(f.matched_unmarked() as u64)
}

/// Validated data of the richness definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RichnessInstance {
    pub s: usize,
    pub u: usize,
    pub v: u64,
    pub a0: Vec<u8>,
    pub a: Vec<Vec<u64>>,
    pub c: Vec<u64>,
}

impl RichnessInstance {
    pub fn new(v: u64, a0: Vec<u8>, a: Vec<Vec<u64>>, c: Vec<u64>) -> Result<Self> {
        let s = a0.len();
        if a0.iter().any(|&b| b > 1) || a0.iter().all(|&b| b == 0) {
            return Err(Error::invalid("ā₀ must be a nonzero 0/1 vector"));
        }
        if a.len() != c.len() || a.iter().any(|ai| ai.len() != s) {
            return Err(Error::invalid("vectors and constants do not match"));
        }
        for (ai, &ci) in a.iter().zip(&c) {
            if ci == 0 && ai.iter().zip(&a0).all(|(&x, &y)| x == u64::from(y)) {
                return Err(Error::invalid("some (āᵢ, cᵢ) equals (ā₀, 0)"));
            }
        }
        Ok(RichnessInstance {
            s,
            u: a.len(),
            v,
            a0,
            a,
            c,
        })
    }
}

/// One row of the exhaustive check.
#[derive(Clone, Debug)]
pub struct WitnessCheck {
    pub a: Vec<u64>,
    pub c: u64,
    pub value: i128,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub j: usize,
    pub s: usize,
    pub b: u64,
    pub q: u64,
    pub d: u64,
    pub x: Vec<i128>,
    pub checks: Vec<WitnessCheck>,
}

impl Witness {
    pub fn verified(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let xs: Vec<String> = self.x.iter().map(i128::to_string).collect();
        let _ = writeln!(
            out,
            "j={} s={} B={} q={} d={}",
            self.j, self.s, self.b, self.q, self.d
        );
        let _ = writeln!(out, "x = ({})", xs.join(", "));
        for c in &self.checks {
            let a: Vec<String> = c.a.iter().map(u64::to_string).collect();
            let _ = writeln!(
                out,
                "a=({}) c={} a.x-c={} {}",
                a.join(","),
                c.c,
                c.value,
                if c.ok { "ok" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            out,
            "{}",
            if self.verified() {
                "verified"
            } else {
                "NOT verified"
            }
        );
        out
    }
}

/// d = 4s·Σ_{1≤i≤j+1} B^i.
pub fn gap_factor(j: usize, s: usize, b: u64) -> Result<u64> {
    let mut sum: u64 = 0;
    for i in 1..=j as u32 + 1 {
        sum = b
            .checked_pow(i)
            .and_then(|p| sum.checked_add(p))
            .ok_or_else(overflow)?;
    }
    (4 * s as u64).checked_mul(sum).ok_or_else(overflow)
}

fn overflow() -> Error {
    Error::cap("witness parameters overflow 64-bit arithmetic")
}

/// Smallest q admitted by the construction: d·j·B^{j+2} + 1.
pub fn smallest_q(j: usize, s: usize, b: u64) -> Result<u64> {
    let d = gap_factor(j, s, b)?;
    let p = b.checked_pow(j as u32 + 2).ok_or_else(overflow)?;
    d.checked_mul(j as u64)
        .and_then(|v| v.checked_mul(p))
        .and_then(|v| v.checked_add(1))
        .ok_or_else(overflow)
}

/// Builds x̄ for (j, s, B, q) and checks (a) q/d < āᵀx̄ − c for ā ≠ 0,
/// (b) āᵀx̄ − c < q·d, and (c) āᵀx̄ − c = q exactly for ā = (1^j 0^{s−j}),
/// c = 0, over every ā ∈ {0..B−1}^s and c ∈ {0..B−1}.
pub fn large_gaps_witness(j: usize, s: usize, b: u64, q: u64) -> Result<Witness> {
    if j < 1 || j > s {
        return Err(Error::invalid(format!(
            "need 1 <= j <= s, got j={j}, s={s}"
        )));
    }
    if b <= j as u64 {
        return Err(Error::invalid(format!("need B > j, got B={b}")));
    }
    let d = gap_factor(j, s, b)?;
    let min_q = smallest_q(j, s, b)?;
    if q < min_q {
        return Err(Error::invalid(format!(
            "q must exceed d·j·B^(j+2) = {}",
            min_q - 1
        )));
    }
    let combos = (b as u128)
        .checked_pow(s as u32 + 1)
        .filter(|&n| n <= 50_000_000)
        .ok_or_else(|| Error::cap(format!("B^(s+1) = {b}^{} checks is too many", s + 1)))?;
    let (q, bi, ji) = (q as i128, b as i128, j as i128);
    let pow_sum: i128 = (1..=j as u32).map(|k| bi.pow(k)).sum();
    let x: Vec<i128> = (1..=s)
        .map(|i| {
            if i <= j {
                let qi = q / ji + i128::from((i as i128) <= q % ji);
                qi - pow_sum + ji * bi.pow(i as u32)
            } else {
                q + bi
            }
        })
        .collect();
    let di = d as i128;
    let mut checks = Vec::with_capacity(combos as usize);
    let mut a = vec![0u64; s];
    loop {
        for c in 0..b {
            let value: i128 = a
                .iter()
                .zip(&x)
                .map(|(&ai, &xi)| ai as i128 * xi)
                .sum::<i128>()
                - c as i128;
            let nonzero = a.iter().any(|&v| v != 0);
            let cond_a = !nonzero || q < di * value;
            let cond_b = value < q * di;
            let target = c == 0 && a.iter().enumerate().all(|(i, &v)| v == u64::from(i < j));
            let cond_c = (value == q) == target;
            checks.push(WitnessCheck {
                a: a.clone(),
                c,
                value,
                ok: cond_a && cond_b && cond_c,
            });
        }
        let mut p = 0;
        loop {
            if p == s {
                return Ok(Witness {
                    j,
                    s,
                    b,
                    q: q as u64,
                    d,
                    x,
                    checks,
                });
            }
            a[p] += 1;
            if a[p] < b {
                break;
            }
            a[p] = 0;
            p += 1;
        }
    }
}

/// Smallest q ∈ R with k·q ≤ window and [⌊q/k⌋, k·q] ∩ R = {q}.
pub fn find_gap(member: &dyn Fn(u64) -> Result<bool>, window: u64, k: u64) -> Result<Option<u64>> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let n = usize::try_from(window).map_err(|_| Error::cap("window too large"))?;
    let mut inr = Vec::with_capacity(n + 1);
    for v in 0..=window {
        inr.push(member(v)?);
    }
    for q in 1..=window {
        let Some(top) = q.checked_mul(k).filter(|&t| t <= window) else {
            break;
        };
        if !inr[q as usize] {
            continue;
        }
        if ((q / k)..=top).all(|v| v == q || !inr[v as usize]) {
            return Ok(Some(q));
        }
    }
    Ok(None)
}
