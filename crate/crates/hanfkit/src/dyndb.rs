//! Dynamic evaluation of a fixed sentence over a database under single
//! tuple insertions and deletions. The state keeps, for every type in the
//! compiled sentence's basic counting terms, the number of active domain
//! elements realising it; answers are read from a cached bit.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write;
use std::sync::Arc;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::formula::{
    basic_count_types, free_vars, nqr, Expr, PredicateCollection, Signature, SphereRef,
};
use crate::hnf::{Compiler, HnfContext, HnfEval, HnfFormula};
use crate::structures::{CanonCode, SphereType, Structure};
use crate::typecat::CatalogStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateKind {
    Insert,
    Delete,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateCommand {
    pub kind: UpdateKind,
    pub relation: String,
    pub tuple: Vec<u64>,
}

impl UpdateCommand {
    pub fn insert(rel: impl Into<String>, tuple: Vec<u64>) -> Self {
        UpdateCommand {
            kind: UpdateKind::Insert,
            relation: rel.into(),
            tuple,
        }
    }

    pub fn delete(rel: impl Into<String>, tuple: Vec<u64>) -> Self {
        UpdateCommand {
            kind: UpdateKind::Delete,
            relation: rel.into(),
            tuple,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    RejectedDegree,
    NoOp,
}

/// Tuples over the domain ℕ, with dense internal ids for the active domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    sig: Arc<Signature>,
    rels: Vec<BTreeSet<Vec<usize>>>,
    ids: HashMap<u64, usize>,
    values: Vec<Option<u64>>,
    free: Vec<usize>,
    /// Number of stored tuples each id occurs in (counted once per tuple).
    occ: Vec<usize>,
    /// Gaifman neighbours with the number of tuples joining them.
    nbrs: Vec<HashMap<usize, usize>>,
    incident: Vec<HashSet<(usize, Vec<usize>)>>,
}

impl Database {
    pub fn new(sig: Arc<Signature>) -> Self {
        let n = sig.len();
        Database {
            sig,
            rels: vec![BTreeSet::new(); n],
            ids: HashMap::new(),
            values: Vec::new(),
            free: Vec::new(),
            occ: Vec::new(),
            nbrs: Vec::new(),
            incident: Vec::new(),
        }
    }

    pub fn sig(&self) -> &Arc<Signature> {
        &self.sig
    }

    /// Number of stored tuples.
    pub fn len(&self) -> usize {
        self.rels.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn adom_size(&self) -> usize {
        self.ids.len()
    }

    pub fn degree(&self) -> usize {
        self.ids
            .values()
            .map(|&i| self.nbrs[i].len())
            .max()
            .unwrap_or(0)
    }

    fn rel_index(&self, cmd: &UpdateCommand) -> Result<usize> {
        let r = self
            .sig
            .index_of(&cmd.relation)
            .ok_or_else(|| Error::invalid(format!("unknown relation {}", cmd.relation)))?;
        if self.sig.arity(r) != cmd.tuple.len() {
            return Err(Error::invalid(format!(
                "relation {} has arity {}, got {} values",
                cmd.relation,
                self.sig.arity(r),
                cmd.tuple.len()
            )));
        }
        Ok(r)
    }

    fn lookup(&self, tuple: &[u64]) -> Option<Vec<usize>> {
        tuple.iter().map(|v| self.ids.get(v).copied()).collect()
    }

    pub fn contains(&self, rel: &str, tuple: &[u64]) -> bool {
        match (self.sig.index_of(rel), self.lookup(tuple)) {
            (Some(r), Some(t)) => self.rels[r].contains(&t),
            _ => false,
        }
    }

    /// Degree after adding a tuple over these values would exceed d.
    fn would_exceed(&self, tuple: &[u64], d: usize) -> bool {
        let distinct: Vec<u64> = {
            let mut v = tuple.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        distinct.iter().any(|u| {
            let id = self.ids.get(u).copied();
            let mut deg = id.map_or(0, |i| self.nbrs[i].len());
            for w in &distinct {
                if w == u {
                    continue;
                }
                let known = match (id, self.ids.get(w)) {
                    (Some(i), Some(j)) => self.nbrs[i].contains_key(j),
                    _ => false,
                };
                if !known {
                    deg += 1;
                }
            }
            deg > d
        })
    }

    fn alloc(&mut self, v: u64) -> usize {
        if let Some(&i) = self.ids.get(&v) {
            return i;
        }
        let i = match self.free.pop() {
            Some(i) => {
                self.values[i] = Some(v);
                i
            }
            None => {
                self.values.push(Some(v));
                self.occ.push(0);
                self.nbrs.push(HashMap::new());
                self.incident.push(HashSet::new());
                self.values.len() - 1
            }
        };
        self.ids.insert(v, i);
        i
    }

    fn distinct(t: &[usize]) -> Vec<usize> {
        let mut v = t.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn add(&mut self, r: usize, t: Vec<usize>) {
        let ds = Self::distinct(&t);
        for &a in &ds {
            self.occ[a] += 1;
            self.incident[a].insert((r, t.clone()));
            for &b in &ds {
                if a != b {
                    *self.nbrs[a].entry(b).or_default() += 1;
                }
            }
        }
        self.rels[r].insert(t);
    }

    fn remove(&mut self, r: usize, t: &[usize]) {
        self.rels[r].remove(t);
        let ds = Self::distinct(t);
        for &a in &ds {
            self.occ[a] -= 1;
            self.incident[a].remove(&(r, t.to_vec()));
            for &b in &ds {
                if a != b {
                    let m = self.nbrs[a].get_mut(&b).expect("neighbour");
                    *m -= 1;
                    if *m == 0 {
                        self.nbrs[a].remove(&b);
                    }
                }
            }
        }
    }

    fn release_unused(&mut self, ids: &[usize]) {
        for &a in ids {
            if self.occ[a] == 0 {
                if let Some(v) = self.values[a].take() {
                    self.ids.remove(&v);
                    self.free.push(a);
                }
            }
        }
    }

    fn in_adom(&self, a: usize) -> bool {
        self.values.get(a).is_some_and(Option::is_some)
    }

    /// N_r of a set of ids, sorted.
    fn ball(&self, from: &[usize], r: usize) -> Vec<usize> {
        let mut seen: HashSet<usize> = from.iter().copied().collect();
        let mut frontier: Vec<usize> = seen.iter().copied().collect();
        for _ in 0..r {
            let mut next = Vec::new();
            for v in frontier {
                for &w in self.nbrs[v].keys() {
                    if seen.insert(w) {
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        let mut out: Vec<usize> = seen.into_iter().collect();
        out.sort_unstable();
        out
    }

    /// The r-sphere of one active element.
    fn sphere(&self, a: usize, r: usize) -> SphereType {
        let elems = self.ball(&[a], r);
        let pos = |e: usize| elems.binary_search(&e).ok();
        let mut rels = vec![Vec::new(); self.sig.len()];
        for &e in &elems {
            for (ri, t) in &self.incident[e] {
                // Each tuple is collected from its smallest member only.
                if *t.iter().min().expect("non-empty tuple") != e {
                    continue;
                }
                if let Some(local) = t.iter().map(|&x| pos(x)).collect::<Option<Vec<usize>>>() {
                    rels[*ri].push(local);
                }
            }
        }
        for v in &mut rels {
            v.sort();
        }
        let base = Structure::from_sorted(self.sig.clone(), elems.len(), rels);
        SphereType::new(base, vec![pos(a).expect("centre")], r)
    }

    /// A_D: the active domain renumbered 0.. in increasing value order,
    /// with the value of each element.
    pub fn to_structure(&self) -> (Structure, Vec<u64>) {
        let mut vals: Vec<(u64, usize)> = self.ids.iter().map(|(&v, &i)| (v, i)).collect();
        vals.sort_unstable();
        let mut map = vec![usize::MAX; self.values.len()];
        for (k, &(_, i)) in vals.iter().enumerate() {
            map[i] = k;
        }
        let rels: Vec<Vec<Vec<usize>>> = self
            .rels
            .iter()
            .map(|ts| {
                let mut out: Vec<Vec<usize>> = ts
                    .iter()
                    .map(|t| t.iter().map(|&x| map[x]).collect())
                    .collect();
                out.sort();
                out
            })
            .collect();
        let s = Structure::from_sorted(self.sig.clone(), vals.len(), rels);
        (s, vals.into_iter().map(|(v, _)| v).collect())
    }

    /// Stored tuples as domain values, per relation name.
    pub fn facts(&self) -> Vec<(String, Vec<u64>)> {
        let mut out = Vec::new();
        for (r, ts) in self.rels.iter().enumerate() {
            for t in ts {
                let vals = t.iter().map(|&x| self.values[x].expect("active")).collect();
                out.push((self.sig.name(r).to_string(), vals));
            }
        }
        out.sort();
        out
    }
}

/// Compiled sentence, counters and cached answer.
#[derive(Clone)]
pub struct QueryState {
    pub hnf: Arc<HnfFormula>,
    pub d: usize,
    types: Vec<SphereRef>,
    codes: Vec<CanonCode>,
    counters: Vec<u64>,
    ans: bool,
    db: Database,
    preds: PredicateCollection,
    answer_ops: std::cell::Cell<u64>,
}

impl PartialEq for QueryState {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.types == other.types
            && self.counters == other.counters
            && self.ans == other.ans
            && self.db == other.db
            && self.hnf.expr == other.hnf.expr
    }
}

impl std::fmt::Debug for QueryState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "QueryState(ans={}, counters={:?}, tuples={})",
            self.ans,
            self.counters,
            self.db.len()
        )
    }
}

struct Counters<'q> {
    types: &'q [SphereRef],
    counters: &'q [u64],
    preds: &'q PredicateCollection,
    adom: usize,
}

impl HnfContext for Counters<'_> {
    fn basic(&self, t: &SphereRef) -> Result<BigInt> {
        let j = self
            .types
            .iter()
            .position(|u| u == t)
            .ok_or_else(|| Error::invalid("untracked type"))?;
        Ok(BigInt::from(self.counters[j]))
    }
    fn sphere(&self, t: &SphereRef, _: &[String]) -> Result<bool> {
        Err(Error::invalid(format!(
            "sphere atom {} in a sentence",
            t.id
        )))
    }
    fn universe(&self) -> usize {
        self.adom
    }
    fn preds(&self) -> &PredicateCollection {
        self.preds
    }
}

impl QueryState {
    /// Compiles φ and starts from the empty database.
    pub fn init(
        phi: &Expr,
        d: usize,
        sig: &Signature,
        preds: &PredicateCollection,
    ) -> Result<Self> {
        Self::init_in(CatalogStore::global(), phi, d, sig, preds)
    }

    pub fn init_in(
        store: &CatalogStore,
        phi: &Expr,
        d: usize,
        sig: &Signature,
        preds: &PredicateCollection,
    ) -> Result<Self> {
        if nqr(phi) > 0 {
            return Err(Error::invalid(
                "dynamic evaluation supports sentences without number quantifiers",
            ));
        }
        let (sv, nv) = free_vars(phi);
        if !sv.is_empty() || !nv.is_empty() {
            return Err(Error::invalid("dynamic evaluation needs a sentence"));
        }
        let hnf = Arc::new(Compiler::new(store, sig, d, preds).compile(phi)?);
        Self::from_compiled(hnf, d, sig, preds)
    }

    /// Starts from the empty database with a sentence compiled elsewhere
    /// for a degree bound of at least `d`.
    pub fn from_compiled(
        hnf: Arc<HnfFormula>,
        d: usize,
        sig: &Signature,
        preds: &PredicateCollection,
    ) -> Result<Self> {
        if d > hnf.d {
            return Err(Error::invalid(format!(
                "sentence was compiled for degree {}, not {d}",
                hnf.d
            )));
        }
        let (sv, nv) = free_vars(&hnf.expr);
        if !sv.is_empty() || !nv.is_empty() {
            return Err(Error::invalid("dynamic evaluation needs a sentence"));
        }
        let types = basic_count_types(&hnf.expr);
        let codes = types.iter().map(|t| t.ty.code().clone()).collect();
        let mut qs = QueryState {
            hnf,
            d,
            counters: vec![0; types.len()],
            types,
            codes,
            ans: false,
            db: Database::new(Arc::new(sig.clone())),
            preds: preds.clone(),
            answer_ops: std::cell::Cell::new(0),
        };
        qs.ans = qs.evaluate()?;
        Ok(qs)
    }

    /// init followed by inserting every fact of `facts`.
    pub fn preprocess(
        phi: &Expr,
        d: usize,
        sig: &Signature,
        preds: &PredicateCollection,
        facts: &[(String, Vec<u64>)],
    ) -> Result<Self> {
        Self::preprocess_in(CatalogStore::global(), phi, d, sig, preds, facts)
    }

    pub fn preprocess_in(
        store: &CatalogStore,
        phi: &Expr,
        d: usize,
        sig: &Signature,
        preds: &PredicateCollection,
        facts: &[(String, Vec<u64>)],
    ) -> Result<Self> {
        let mut qs = Self::init_in(store, phi, d, sig, preds)?;
        for (rel, t) in facts {
            if qs.apply(&UpdateCommand::insert(rel.clone(), t.clone()))?
                == UpdateOutcome::RejectedDegree
            {
                return Err(Error::invalid(format!(
                    "initial database exceeds degree {d} at {rel} {t:?}"
                )));
            }
        }
        Ok(qs)
    }

    fn evaluate(&self) -> Result<bool> {
        let ctx = Counters {
            types: &self.types,
            counters: &self.counters,
            preds: &self.preds,
            adom: self.db.adom_size(),
        };
        HnfEval::new(&ctx).holds(&self.hnf.expr, &mut Vec::new())
    }

    pub fn apply(&mut self, cmd: &UpdateCommand) -> Result<UpdateOutcome> {
        let r = self.db.rel_index(cmd)?;
        let present = self.db.contains(&cmd.relation, &cmd.tuple);
        match cmd.kind {
            UpdateKind::Insert if present => return Ok(UpdateOutcome::NoOp),
            UpdateKind::Delete if !present => return Ok(UpdateOutcome::NoOp),
            UpdateKind::Insert if self.db.would_exceed(&cmd.tuple, self.d) => {
                return Ok(UpdateOutcome::RejectedDegree)
            }
            _ => {}
        }
        // Adding or removing edges among the tuple's own elements leaves
        // distances from that set unchanged, so U_j is the same ball in
        // the old and the new database.
        let known: Vec<usize> = cmd
            .tuple
            .iter()
            .filter_map(|v| self.db.ids.get(v).copied())
            .collect();
        let radii: BTreeSet<usize> = self.types.iter().map(SphereRef::radius).collect();
        let balls: HashMap<usize, Vec<usize>> = radii
            .iter()
            .map(|&rad| (rad, self.db.ball(&known, rad)))
            .collect();
        self.adjust(&balls, -1);
        let ids: Vec<usize> = match cmd.kind {
            UpdateKind::Insert => {
                let t: Vec<usize> = cmd.tuple.iter().map(|&v| self.db.alloc(v)).collect();
                self.db.add(r, t.clone());
                t
            }
            UpdateKind::Delete => {
                let t = self.db.lookup(&cmd.tuple).expect("present");
                self.db.remove(r, &t);
                t
            }
        };
        let mut balls = balls;
        if cmd.kind == UpdateKind::Insert {
            // Elements new to the active domain join every U_j.
            for ball in balls.values_mut() {
                for &a in &ids {
                    if !known.contains(&a) && !ball.contains(&a) {
                        ball.push(a);
                    }
                }
            }
        }
        self.adjust(&balls, 1);
        self.db.release_unused(&ids);
        self.ans = self.evaluate()?;
        Ok(UpdateOutcome::Applied)
    }

    /// Adds `sign` to A[j] for every active a ∈ U_j with N_{r_j}(a) ≅ ρ_j.
    fn adjust(&mut self, balls: &HashMap<usize, Vec<usize>>, sign: i64) {
        let mut cache: HashMap<(usize, usize), CanonCode> = HashMap::new();
        for (j, t) in self.types.iter().enumerate() {
            let rad = t.radius();
            for &a in &balls[&rad] {
                if !self.db.in_adom(a) || self.db.occ[a] == 0 {
                    continue;
                }
                let code = cache
                    .entry((a, rad))
                    .or_insert_with(|| self.db.sphere(a, rad).code().clone());
                if *code == self.codes[j] {
                    if sign > 0 {
                        self.counters[j] += 1;
                    } else {
                        self.counters[j] -= 1;
                    }
                }
            }
        }
    }

    /// The cached answer; touches nothing else.
    pub fn answer(&self) -> bool {
        self.answer_ops.set(self.answer_ops.get() + 1);
        self.ans
    }

    /// Operations spent in [`QueryState::answer`] so far.
    pub fn answer_ops(&self) -> u64 {
        self.answer_ops.get()
    }

    pub fn counters(&self) -> &[u64] {
        &self.counters
    }

    pub fn types(&self) -> &[SphereRef] {
        &self.types
    }

    pub fn database(&self) -> &Database {
        &self.db
    }

    /// Counters recomputed from scratch over the whole active domain.
    pub fn recount(&self) -> Vec<u64> {
        let mut out = vec![0; self.types.len()];
        let mut by_code: HashMap<(usize, &CanonCode), Vec<usize>> = HashMap::new();
        for (j, t) in self.types.iter().enumerate() {
            by_code
                .entry((t.radius(), &self.codes[j]))
                .or_default()
                .push(j);
        }
        let radii: BTreeSet<usize> = self.types.iter().map(SphereRef::radius).collect();
        for &a in self.db.ids.values() {
            for &r in &radii {
                let code = self.db.sphere(a, r).code().clone();
                for &j in by_code.get(&(r, &code)).map_or(&[][..], Vec::as_slice) {
                    out[j] += 1;
                }
            }
        }
        out
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "answer {}", self.ans);
        for (t, c) in self.types.iter().zip(&self.counters) {
            let _ = writeln!(s, "counter {} {c}", t.id);
        }
        for (rel, t) in self.db.facts() {
            let vals: Vec<String> = t.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "fact {rel} {}", vals.join(" "));
        }
        s
    }
}

/// Parses `insert R a1 .. am` / `delete R a1 .. am`.
pub fn parse_command(line: &str) -> Result<UpdateCommand> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let kind = match words.first() {
        Some(&"insert") => UpdateKind::Insert,
        Some(&"delete") => UpdateKind::Delete,
        _ => return Err(Error::invalid(format!("unknown command {line:?}"))),
    };
    let rel = words
        .get(1)
        .ok_or_else(|| Error::invalid("missing relation name"))?;
    let tuple = words[2..]
        .iter()
        .map(|w| {
            w.parse::<u64>()
                .map_err(|_| Error::invalid(format!("bad domain value {w:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UpdateCommand {
        kind,
        relation: rel.to_string(),
        tuple,
    })
}
