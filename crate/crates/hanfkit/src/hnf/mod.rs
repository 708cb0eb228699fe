//! Compilation of FOCN(P) formulas into Hanf normal form, together with
//! weak normal forms, the FO to FOC block translation and bounded
//! arithmetic emission.

mod arith;
mod decompose;
mod fo2foc;
mod numeric;
mod poly;
mod simplify;
mod spheres;
mod whnf;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::formula::{
    free_struct_vars, is_hnf, locality_radius, oc_conditions, sphere_refs, validate, Expr,
    PredicateCollection, Signature, SphereRef,
};
use crate::structures::CanonCode;
use crate::typecat::{CatalogStore, TypeCatalog};

pub use arith::{emit_arithmetic, emit_arithmetic_in, hanf_radius, type_var, Arithmetic};
pub use decompose::Decomposition;
pub use fo2foc::{block_depth, fo_to_foc};
pub use numeric::{eval_ground, is_ground, HnfContext, HnfEval};
pub use poly::{basic_term, Atom, Poly};
pub use simplify::simplify;
pub use spheres::boolean_to_spheres;
pub use whnf::{extract_whnf, is_weak_hnf};

use spheres::{specialize, Folded, SphereTable};

/// A compiled formula.
#[derive(Clone, Debug)]
pub struct HnfFormula {
    pub expr: Expr,
    pub locality_radius: usize,
    /// Degree bound used internally, at least 2.
    pub d: usize,
    /// (r, k) of every catalog the sphere atoms and basic counting terms come from.
    pub catalogs: Vec<(usize, usize)>,
}

impl HnfFormula {
    fn new(expr: Expr, d: usize) -> Self {
        let mut keys = BTreeSet::new();
        for t in sphere_refs(&expr) {
            keys.insert((t.radius(), t.centres()));
        }
        HnfFormula {
            locality_radius: locality_radius(&expr),
            expr,
            d,
            catalogs: keys.into_iter().collect(),
        }
    }
}

/// Size limits beyond the catalog cap.
#[derive(Clone, Copy, Debug)]
pub struct Limits {
    /// Largest number s of distinct conditions a predicate application may
    /// combine; 2^s branches are generated.
    pub max_conditions: usize,
    /// Largest number of (ρ, J) branches of one predicate application.
    pub max_branches: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_conditions: 12,
            max_branches: 1 << 20,
        }
    }
}

/// Compiles formulas over one signature at one degree bound. Catalogs come
/// from the store; compiled subformulas and term decompositions are cached
/// for the lifetime of the compiler.
pub struct Compiler<'a> {
    store: &'a CatalogStore,
    sig: Signature,
    d: usize,
    preds: &'a PredicateCollection,
    limits: Limits,
    memo: HashMap<Expr, Expr>,
    decomp: HashMap<(Arc<str>, usize, Option<Arc<str>>), Poly>,
    exclusions: HashMap<Arc<str>, Vec<usize>>,
    trace: Vec<Decomposition>,
    depth: usize,
    fresh: usize,
}

/// to_hnf with the process-wide catalog store.
pub fn to_hnf(
    phi: &Expr,
    d: usize,
    sig: &Signature,
    preds: &PredicateCollection,
) -> Result<HnfFormula> {
    Compiler::new(CatalogStore::global(), sig, d, preds).compile(phi)
}

impl<'a> Compiler<'a> {
    pub fn new(
        store: &'a CatalogStore,
        sig: &Signature,
        d: usize,
        preds: &'a PredicateCollection,
    ) -> Self {
        Compiler {
            store,
            sig: sig.clone(),
            d: d.max(2),
            preds,
            limits: Limits::default(),
            memo: HashMap::new(),
            decomp: HashMap::new(),
            exclusions: HashMap::new(),
            trace: Vec::new(),
            depth: 0,
            fresh: 0,
        }
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    /// Every term decomposition computed so far, in order of completion.
    pub fn decompositions(&self) -> &[Decomposition] {
        &self.trace
    }

    pub fn catalog(&self, r: usize, k: usize) -> Result<Arc<TypeCatalog>> {
        self.store
            .get(&self.sig, self.d, r, k)
            .map_err(|e| match e {
                Error::ResourceCap(m) => {
                    Error::ResourceCap(format!("{m} (while compiling at d={})", self.d))
                }
                other => other,
            })
    }

    pub fn compile(&mut self, phi: &Expr) -> Result<HnfFormula> {
        if !phi.is_formula() {
            return Err(Error::invalid("expected a formula, got a counting term"));
        }
        validate(phi, &self.sig, self.preds)?;
        let mut used = HashSet::new();
        collect_names(phi, &mut used);
        let pre = self.prepare(phi, &HashMap::new(), &used);
        let out = self.hnf(&pre)?;
        debug_assert!(is_hnf(&out));
        Ok(HnfFormula::new(out, self.d))
    }

    /// Renames bound structure variables apart and rewrites ∃y φ as
    /// exists(#(y) φ).
    fn prepare(&mut self, e: &Expr, env: &HashMap<String, String>, used: &HashSet<String>) -> Expr {
        let m = |v: &String| env.get(v).cloned().unwrap_or_else(|| v.clone());
        match e {
            Expr::Equal(a, b) => Expr::Equal(m(a), m(b)),
            Expr::Rel(r, xs) => Expr::Rel(r.clone(), xs.iter().map(m).collect()),
            Expr::Sphere(t, xs) => Expr::Sphere(t.clone(), xs.iter().map(m).collect()),
            Expr::Exists(y, a) => {
                let (body, ys) = self.bind(std::slice::from_ref(y), a, env, used);
                Expr::pred("exists", vec![Expr::Count(ys, Box::new(body))])
            }
            Expr::Count(ys, a) => {
                let (body, ys) = self.bind(ys, a, env, used);
                Expr::Count(ys, Box::new(body))
            }
            Expr::Not(a) => Expr::not(self.prepare(a, env, used)),
            Expr::Or(a, b) => Expr::or(self.prepare(a, env, used), self.prepare(b, env, used)),
            Expr::ExistsNum(k, a) => Expr::exists_num(k.clone(), self.prepare(a, env, used)),
            Expr::Pred(p, ts) => Expr::Pred(
                p.clone(),
                ts.iter().map(|t| self.prepare(t, env, used)).collect(),
            ),
            Expr::Add(a, b) => Expr::add(self.prepare(a, env, used), self.prepare(b, env, used)),
            Expr::Mul(a, b) => Expr::mul(self.prepare(a, env, used), self.prepare(b, env, used)),
            Expr::Int(_) | Expr::NumVar(_) => e.clone(),
        }
    }

    fn bind(
        &mut self,
        ys: &[String],
        body: &Expr,
        env: &HashMap<String, String>,
        used: &HashSet<String>,
    ) -> (Expr, Vec<String>) {
        let mut inner = env.clone();
        let mut fresh = Vec::with_capacity(ys.len());
        for y in ys {
            let name = loop {
                let cand = format!("b{}", self.fresh);
                self.fresh += 1;
                if !used.contains(&cand) {
                    break cand;
                }
            };
            inner.insert(y.clone(), name.clone());
            fresh.push(name);
        }
        (self.prepare(body, &inner, used), fresh)
    }

    fn hnf(&mut self, e: &Expr) -> Result<Expr> {
        if let Some(out) = self.memo.get(e) {
            return Ok(out.clone());
        }
        let out = match e {
            Expr::Equal(..) | Expr::Rel(..) => self.atomic(e)?,
            Expr::Sphere(t, _) => {
                if t.ty.base.sig().as_ref() != &self.sig {
                    return Err(Error::invalid(format!(
                        "sphere {} is over another signature",
                        t.id
                    )));
                }
                e.clone()
            }
            Expr::Not(a) => Expr::not(self.hnf(a)?),
            Expr::Or(a, b) => Expr::or(self.hnf(a)?, self.hnf(b)?),
            Expr::Pred(p, ts) => self.pred_app(e, p, ts)?,
            Expr::ExistsNum(k, a) => self.exists_num(e, k, a)?,
            Expr::Exists(..) => unreachable!("eliminated while preparing"),
            _ => return Err(Error::invalid(format!("expected a formula, got {e}"))),
        };
        self.memo.insert(e.clone(), out.clone());
        Ok(out)
    }

    /// Atomic formulas: the disjunction of the 0-types whose centres satisfy them.
    fn atomic(&mut self, e: &Expr) -> Result<Expr> {
        let xs = free_struct_vars(e);
        let cat = self.catalog(0, xs.len())?;
        let mut out = Vec::new();
        for t in cat.refs() {
            let c = |v: &String| t.ty.centres[xs.binary_search(v).expect("free variable")];
            let holds = match e {
                Expr::Equal(a, b) => c(a) == c(b),
                Expr::Rel(r, vs) => {
                    let idx = self
                        .sig
                        .index_of(r)
                        .ok_or_else(|| Error::invalid(format!("unknown relation {r}")))?;
                    let tuple: Vec<usize> = vs.iter().map(c).collect();
                    t.ty.base.holds(idx, &tuple)
                }
                _ => unreachable!(),
            };
            if holds {
                out.push(Expr::Sphere(t.clone(), xs.clone()));
            }
        }
        Ok(Expr::or_all(out))
    }

    /// P(t_1..t_m): compile the bodies of the counting terms, split on the
    /// truth of their conditions and replace every counting term by its
    /// decomposition.
    fn pred_app(&mut self, e: &Expr, p: &str, ts: &[Expr]) -> Result<Expr> {
        let mut thetas: Vec<Expr> = Vec::new();
        for t in ts {
            collect_counts(t, &mut thetas);
        }
        if thetas.is_empty() {
            return Ok(e.clone());
        }
        let xs = free_struct_vars(e);
        let n = xs.len();
        let mut bodies = Vec::with_capacity(thetas.len());
        for th in &thetas {
            let Expr::Count(ys, body) = th else {
                unreachable!()
            };
            bodies.push((ys.clone(), self.hnf(body)?));
        }

        let mut conds: Vec<Expr> = Vec::new();
        let mut ground: HashMap<Expr, bool> = HashMap::new();
        for (_, psi) in &bodies {
            for c in oc_conditions(psi) {
                if is_ground(&c) {
                    if !ground.contains_key(&c) {
                        let v = eval_ground(&c, self.preds)?;
                        ground.insert(c, v);
                    }
                } else if !conds.contains(&c) {
                    conds.push(c);
                }
            }
        }
        let s = conds.len();
        if s > self.limits.max_conditions {
            return Err(Error::cap(format!(
                "{s} distinct conditions under one predicate application (limit {})",
                self.limits.max_conditions
            )));
        }
        let index = |c: &Expr| match conds.iter().position(|x| x == c) {
            Some(i) => Some(Ok(i)),
            None => ground.get(c).map(|&b| Err(b)),
        };

        let r = bodies
            .iter()
            .map(|(_, psi)| skeleton_radius(psi))
            .max()
            .unwrap_or(0);
        let kmax = bodies.iter().map(|(ys, _)| ys.len()).max().unwrap_or(0);
        let mut tables = Vec::with_capacity(bodies.len());
        let mut cats = Vec::with_capacity(bodies.len());
        for (ys, psi) in &bodies {
            let cat = self.catalog(r, n + ys.len())?;
            let mut vars = xs.clone();
            vars.extend(ys.iter().cloned());
            tables.push(SphereTable::new(psi, &vars, &index, &cat)?);
            cats.push(cat);
        }

        let branches = 1usize << s;
        // I_{J,j} for every J and every counting term.
        let selections: Vec<Vec<Vec<usize>>> = (0..branches)
            .map(|j| {
                let truth: Vec<bool> = (0..s).map(|m| j >> m & 1 == 1).collect();
                tables.iter().map(|t| t.select(&truth)).collect()
            })
            .collect();
        let guards: Vec<Option<Expr>> = (0..branches)
            .map(|j| {
                (s > 0).then(|| {
                    Expr::and_all(
                        conds
                            .iter()
                            .enumerate()
                            .map(|(m, c)| {
                                if j >> m & 1 == 1 {
                                    c.clone()
                                } else {
                                    Expr::not(c.clone())
                                }
                            })
                            .collect(),
                    )
                })
            })
            .collect();

        let branch_for = |this: &mut Self, rho: Option<&SphereRef>| -> Result<Expr> {
            let mut disjuncts = Vec::with_capacity(branches);
            for j in 0..branches {
                let mut subst = HashMap::new();
                for (m, th) in thetas.iter().enumerate() {
                    let mut sum = Poly::zero();
                    for &i in &selections[j][m] {
                        let tau = cats[m].sphere_ref(i).clone();
                        sum = sum.add(&this.decompose(&tau, n, rho)?);
                    }
                    subst.insert(th.clone(), sum.to_expr());
                }
                let app = Expr::Pred(
                    p.to_string(),
                    ts.iter().map(|t| substitute_counts(t, &subst)).collect(),
                );
                disjuncts.push(match &guards[j] {
                    Some(g) => Expr::and(g.clone(), app),
                    None => app,
                });
            }
            Ok(Expr::or_all(disjuncts))
        };

        if n == 0 {
            return branch_for(self, None);
        }
        let big_r = r + kmax * (2 * r + 1);
        let lcat = self.catalog(big_r, n)?;
        if lcat.len().saturating_mul(branches) > self.limits.max_branches {
            return Err(Error::cap(format!(
                "{} types of radius {big_r} times {branches} condition branches exceeds {}",
                lcat.len(),
                self.limits.max_branches
            )));
        }
        let mut cases = Vec::with_capacity(lcat.len());
        for rho in lcat.refs() {
            cases.push((rho.clone(), branch_for(self, Some(rho))?));
        }
        Ok(type_cases(cases, &xs))
    }

    /// ∃κ ψ: with free structure variables, specialise ψ' to every type of
    /// radius R = locality radius of ψ'.
    fn exists_num(&mut self, e: &Expr, k: &str, body: &Expr) -> Result<Expr> {
        let psi = self.hnf(body)?;
        let xs = free_struct_vars(e);
        if xs.is_empty() {
            return Ok(Expr::exists_num(k, psi));
        }
        let big_r = locality_radius(&psi);
        let lcat = self.catalog(big_r, xs.len())?;
        let mut cases = Vec::with_capacity(lcat.len());
        for tau in lcat.refs() {
            let mut codes: HashMap<(usize, Vec<usize>), CanonCode> = HashMap::new();
            let mut verdict = |t: &SphereRef, zs: &[String]| -> Result<bool> {
                let pos = zs
                    .iter()
                    .map(|z| {
                        xs.binary_search(z)
                            .map_err(|_| Error::invalid(format!("free variable {z} unexpected")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let code = codes
                    .entry((t.radius(), pos))
                    .or_insert_with_key(|(r, pos)| tau.ty.sub_sphere(pos, *r).code().clone());
                Ok(code == t.ty.code())
            };
            let spec = specialize(&psi, &mut verdict)?;
            let case = match spec {
                // κ ranges over the non-empty set {0..|A|}.
                Folded::Const(b) => Folded::Const(b).into_expr(),
                Folded::Expr(e) => Expr::exists_num(k, e),
            };
            cases.push((tau.clone(), case));
        }
        Ok(type_cases(cases, &xs))
    }
}

/// ⋁_ρ (sph_ρ(x̄) ∧ body_ρ), with the types sharing a body merged into one
/// disjunct (⋁_{ρ∈G} sph_ρ(x̄)) ∧ body. Cases whose body is false are dropped.
fn type_cases(cases: Vec<(SphereRef, Expr)>, xs: &[String]) -> Expr {
    let mut bodies: Vec<(Expr, Vec<Expr>)> = Vec::new();
    let mut index: HashMap<Expr, usize> = HashMap::new();
    let falsum = Expr::falsum();
    for (rho, body) in cases {
        if body == falsum {
            continue;
        }
        let atom = Expr::Sphere(rho, xs.to_vec());
        match index.get(&body) {
            Some(&i) => bodies[i].1.push(atom),
            None => {
                index.insert(body.clone(), bodies.len());
                bodies.push((body, vec![atom]));
            }
        }
    }
    let verum = Expr::verum();
    Expr::or_all(
        bodies
            .into_iter()
            .map(|(body, atoms)| {
                let any = Expr::or_all(atoms);
                if body == verum {
                    any
                } else {
                    Expr::and(any, body)
                }
            })
            .collect(),
    )
}

fn collect_names(e: &Expr, out: &mut HashSet<String>) {
    match e {
        Expr::Equal(a, b) => {
            out.insert(a.clone());
            out.insert(b.clone());
        }
        Expr::Rel(_, xs) | Expr::Sphere(_, xs) | Expr::Count(xs, _) => {
            out.extend(xs.iter().cloned())
        }
        Expr::Exists(y, _) => {
            out.insert(y.clone());
        }
        _ => {}
    }
    for c in e.children() {
        collect_names(c, out);
    }
}

/// Maximal counting subterms, distinct, in order.
fn collect_counts(t: &Expr, out: &mut Vec<Expr>) {
    match t {
        Expr::Count(..) => {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        Expr::Add(a, b) | Expr::Mul(a, b) => {
            collect_counts(a, out);
            collect_counts(b, out);
        }
        _ => {}
    }
}

fn substitute_counts(t: &Expr, map: &HashMap<Expr, Expr>) -> Expr {
    match t {
        Expr::Count(..) => map.get(t).cloned().unwrap_or_else(|| t.clone()),
        Expr::Add(a, b) => Expr::add(substitute_counts(a, map), substitute_counts(b, map)),
        Expr::Mul(a, b) => Expr::mul(substitute_counts(a, map), substitute_counts(b, map)),
        _ => t.clone(),
    }
}

/// Largest radius of a sphere atom on the Boolean skeleton.
fn skeleton_radius(e: &Expr) -> usize {
    match e {
        Expr::Sphere(t, _) => t.radius(),
        Expr::Not(a) => skeleton_radius(a),
        Expr::Or(a, b) => skeleton_radius(a).max(skeleton_radius(b)),
        _ => 0,
    }
}
