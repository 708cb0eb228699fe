//! Model checking through the Hanf normal form: compile once per degree
//! bound, then look at the structure only through one sphere per free
//! tuple and the Hanf tuples of the radii the basic counting terms need.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use std::sync::Arc;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::evalsem::Assignment;
use crate::formula::{
    basic_count_types, free_vars, print, Expr, PredicateCollection, Signature, SphereRef,
};
use crate::hnf::{Compiler, HnfContext, HnfEval, HnfFormula};
use crate::structures::{CanonCode, Structure};
use crate::typecat::{CatalogStore, TypeCatalog};

/// Number of elements realising each 1-centre type of radius r.
#[derive(Clone, Debug)]
pub struct HanfTuple {
    pub r: usize,
    pub d: usize,
    pub catalog: Arc<TypeCatalog>,
    pub counts: Vec<u64>,
}

impl HanfTuple {
    /// Count for a type of this tuple's catalog.
    pub fn count_of(&self, t: &SphereRef) -> Option<u64> {
        self.catalog
            .lookup(t.ty.code())
            .filter(|&i| self.catalog.sphere_ref(i) == t)
            .map(|i| self.counts[i])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_bigints(&self) -> Vec<BigInt> {
        self.counts.iter().map(|&c| BigInt::from(c)).collect()
    }

    /// Nonzero entries as (type id, count).
    pub fn nonzero(&self) -> Vec<(&str, u64)> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (self.catalog.type_id(i), c))
            .collect()
    }
}

/// HT_r^d(A) with the process-wide catalog store.
pub fn hanf_tuple(a: &Structure, r: usize, d: usize) -> Result<HanfTuple> {
    let mut ops = 0;
    hanf_tuple_in(CatalogStore::global(), a, r, d, &mut ops)
}

/// HT_r^d(A); every sphere computation and lookup adds to `ops`.
pub fn hanf_tuple_in(
    store: &CatalogStore,
    a: &Structure,
    r: usize,
    d: usize,
    ops: &mut u64,
) -> Result<HanfTuple> {
    let deg = a.gaifman_degree();
    if deg > d {
        return Err(Error::invalid(format!(
            "structure has degree {deg}, above {d}"
        )));
    }
    let catalog = store.get(a.sig(), d.max(2), r, 1)?;
    let mut counts = vec![0u64; catalog.len()];
    for v in 0..a.size() {
        let s = a.sphere(&[v], r)?;
        *ops += 2;
        let i = catalog.identify(&s)?;
        counts[i] += 1;
    }
    Ok(HanfTuple {
        r,
        d: catalog.d,
        catalog,
        counts,
    })
}

/// What one check saw, for `--explain` style output.
#[derive(Clone, Debug)]
pub struct Explanation {
    pub hnf: Arc<HnfFormula>,
    pub spheres: Vec<(String, Vec<String>, bool)>,
    pub tuples: Vec<HanfTuple>,
    pub result: bool,
    pub ops: u64,
}

impl Explanation {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hnf: {}", print(&self.hnf.expr));
        let _ = writeln!(
            s,
            "locality radius: {} (d={})",
            self.hnf.locality_radius, self.hnf.d
        );
        for (id, xs, b) in &self.spheres {
            let _ = writeln!(s, "sphere {id} ({}) = {b}", xs.join(" "));
        }
        for t in &self.tuples {
            let _ = write!(s, "hanf tuple r={}:", t.r);
            for (id, c) in t.nonzero() {
                let _ = write!(s, " {id}={c}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "result: {}", self.result);
        s
    }
}

/// Model checker with a cache of compiled formulas keyed by
/// (formula, signature, degree bound).
pub struct ModelChecker<'a> {
    store: &'a CatalogStore,
    preds: &'a PredicateCollection,
    cache: HashMap<(Expr, Signature, usize), Arc<HnfFormula>>,
}

struct Ctx<'s> {
    a: &'s Structure,
    preds: &'s PredicateCollection,
    assign: &'s Assignment,
    tuples: BTreeMap<usize, HanfTuple>,
    /// Whether sphere verdicts are kept for an explanation.
    record: bool,
    verdicts: RefCell<Vec<(String, Vec<String>, bool)>>,
    codes: RefCell<HashMap<(usize, Vec<usize>), CanonCode>>,
    ops: RefCell<u64>,
}

impl HnfContext for Ctx<'_> {
    fn basic(&self, t: &SphereRef) -> Result<BigInt> {
        let ht = self
            .tuples
            .get(&t.radius())
            .ok_or_else(|| Error::invalid("missing Hanf tuple"))?;
        let c = ht
            .count_of(t)
            .ok_or_else(|| Error::invalid(format!("type {} not in the catalog", t.id)))?;
        Ok(BigInt::from(c))
    }

    fn sphere(&self, t: &SphereRef, xs: &[String]) -> Result<bool> {
        let tuple = xs
            .iter()
            .map(|x| {
                self.assign
                    .structs
                    .iter()
                    .rev()
                    .find(|(v, _)| v == x)
                    .map(|&(_, a)| a)
                    .ok_or_else(|| Error::invalid(format!("unassigned structure variable {x}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut codes = self.codes.borrow_mut();
        let key = (t.radius(), tuple);
        if !codes.contains_key(&key) {
            *self.ops.borrow_mut() += 1;
            let code = self.a.sphere(&key.1, key.0)?.code().clone();
            codes.insert(key.clone(), code);
        }
        let b = codes[&key] == *t.ty.code();
        if self.record {
            self.verdicts
                .borrow_mut()
                .push((t.id.to_string(), xs.to_vec(), b));
        }
        Ok(b)
    }

    fn universe(&self) -> usize {
        self.a.size()
    }

    fn preds(&self) -> &PredicateCollection {
        self.preds
    }
}

impl<'a> ModelChecker<'a> {
    pub fn new(store: &'a CatalogStore, preds: &'a PredicateCollection) -> Self {
        ModelChecker {
            store,
            preds,
            cache: HashMap::new(),
        }
    }

    /// The compiled form of φ for degree bound d over `sig`, cached.
    pub fn compiled(&mut self, phi: &Expr, sig: &Signature, d: usize) -> Result<Arc<HnfFormula>> {
        let d = d.max(2);
        let key = (phi.clone(), sig.clone(), d);
        if let Some(h) = self.cache.get(&key) {
            return Ok(h.clone());
        }
        let h = Arc::new(Compiler::new(self.store, sig, d, self.preds).compile(phi)?);
        self.cache.insert(key, h.clone());
        Ok(h)
    }

    /// Seeds the cache with a formula compiled elsewhere for (sig, d).
    pub fn insert_compiled(&mut self, phi: &Expr, sig: &Signature, h: Arc<HnfFormula>) {
        self.cache.insert((phi.clone(), sig.clone(), h.d), h);
    }

    pub fn check(&mut self, phi: &Expr, a: &Structure, assign: &Assignment) -> Result<bool> {
        Ok(self.run(phi, a, assign, false)?.result)
    }

    /// Runs the five steps and reports what was computed. `ops` counts the
    /// work after compilation: sphere computations, catalog lookups and
    /// evaluation steps of the residual arithmetic formula.
    pub fn explain(
        &mut self,
        phi: &Expr,
        a: &Structure,
        assign: &Assignment,
    ) -> Result<Explanation> {
        self.run(phi, a, assign, true)
    }

    fn run(
        &mut self,
        phi: &Expr,
        a: &Structure,
        assign: &Assignment,
        record: bool,
    ) -> Result<Explanation> {
        let (svars, nvars) = free_vars(phi);
        for v in &svars {
            if !assign.structs.iter().any(|(x, _)| x == v) {
                return Err(Error::invalid(format!(
                    "no element given for free variable {v}"
                )));
            }
        }
        for v in &nvars {
            if !assign.nums.iter().any(|(x, _)| x == v) {
                return Err(Error::invalid(format!(
                    "no number given for free variable %{v}"
                )));
            }
        }
        if let Some((_, x)) = assign.structs.iter().find(|(_, x)| *x >= a.size()) {
            return Err(Error::invalid(format!("element {x} outside the universe")));
        }
        let d = a.gaifman_degree().max(2);
        let h = self.compiled(phi, a.sig(), d)?;
        let mut ops = 0;
        let mut tuples = BTreeMap::new();
        for t in basic_count_types(&h.expr) {
            if let std::collections::btree_map::Entry::Vacant(e) = tuples.entry(t.radius()) {
                e.insert(hanf_tuple_in(self.store, a, t.radius(), d, &mut ops)?);
            }
        }
        let ctx = Ctx {
            a,
            preds: self.preds,
            assign,
            tuples,
            record,
            verdicts: RefCell::new(Vec::new()),
            codes: RefCell::new(HashMap::new()),
            ops: RefCell::new(0),
        };
        let eval = HnfEval::new(&ctx);
        let mut nums: Vec<(String, BigInt)> = assign.nums.clone();
        let result = eval.holds(&h.expr, &mut nums)?;
        let ops = ops + eval.ops() + *ctx.ops.borrow();
        let spheres = ctx.verdicts.into_inner();
        Ok(Explanation {
            hnf: h,
            spheres,
            tuples: ctx.tuples.into_values().collect(),
            result,
            ops,
        })
    }
}

/// model_check with the process-wide catalog store and no caching.
pub fn model_check(
    phi: &Expr,
    a: &Structure,
    assign: &Assignment,
    preds: &PredicateCollection,
) -> Result<bool> {
    ModelChecker::new(CatalogStore::global(), preds).check(phi, a, assign)
}
