//! Bounded arithmetic formulas over the Hanf tuple: a sentence about A
//! becomes a formula about the numbers v_τ of elements of each 1-centre
//! type τ of radius r = (2·bw+1)^br − 1.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigInt;

use super::numeric::{HnfContext, HnfEval};
use super::spheres::specialize;
use super::Compiler;
use crate::error::{Error, Result};
use crate::formula::{br, bw, free_vars, print, Expr, PredicateCollection, Signature, SphereRef};
use crate::typecat::{CatalogStore, TypeCatalog};

/// Ψ together with the catalog its variables range over. Type variables
/// are number variables named `v:<TYPEID>`.
#[derive(Clone, Debug)]
pub struct Arithmetic {
    pub expr: Expr,
    pub r: usize,
    pub d: usize,
    pub catalog: Arc<TypeCatalog>,
    /// Catalog position of each type variable.
    index: HashMap<String, usize>,
}

pub fn type_var(t: &SphereRef) -> String {
    format!("v:{}", t.id)
}

/// (2·bw+1)^br − 1.
pub fn hanf_radius(phi: &Expr) -> Result<usize> {
    let base = 2 * bw(phi) + 1;
    let exp = u32::try_from(br(phi)).map_err(|_| Error::cap("counting depth too large"))?;
    base.checked_pow(exp)
        .map(|v| v - 1)
        .ok_or_else(|| Error::cap("Hanf radius overflows"))
}

impl Arithmetic {
    /// S-expression text; type variables print as `v:<TYPEID>`.
    pub fn text(&self) -> String {
        print(&self.expr).replace("%v:", "v:")
    }

    /// Truth of Ψ when v_τ takes the value `counts[i]` for the i-th entry
    /// of the catalog.
    pub fn evaluate(&self, counts: &[BigInt], preds: &PredicateCollection) -> Result<bool> {
        if counts.len() != self.catalog.len() {
            return Err(Error::invalid(format!(
                "expected {} counts, got {}",
                self.catalog.len(),
                counts.len()
            )));
        }
        let total: BigInt = counts.iter().sum();
        let universe =
            usize::try_from(&total).map_err(|_| Error::invalid("negative or huge count"))?;
        let ctx = Vars {
            universe,
            preds,
            index: &self.index,
            counts,
        };
        HnfEval::new(&ctx).holds(&self.expr, &mut Vec::new())
    }
}

struct Vars<'p> {
    universe: usize,
    preds: &'p PredicateCollection,
    index: &'p HashMap<String, usize>,
    counts: &'p [BigInt],
}

impl HnfContext for Vars<'_> {
    fn basic(&self, t: &SphereRef) -> Result<BigInt> {
        Err(Error::invalid(format!(
            "counting term over {} left in arithmetic formula",
            t.id
        )))
    }
    fn sphere(&self, t: &SphereRef, _: &[String]) -> Result<bool> {
        Err(Error::invalid(format!(
            "sphere atom {} left in arithmetic formula",
            t.id
        )))
    }
    fn universe(&self) -> usize {
        self.universe
    }
    fn preds(&self) -> &PredicateCollection {
        self.preds
    }
    fn num(&self, k: &str) -> Option<BigInt> {
        self.index.get(k).map(|&i| self.counts[i].clone())
    }
}

/// Ψ_ρ for φ: A ⊨ φ[ā] iff Ψ_ρ holds at the Hanf tuple of A, for every
/// d-bounded A and every ā whose neighbourhood has type ρ. Sentences take
/// `rho = None`.
pub fn emit_arithmetic(
    phi: &Expr,
    d: usize,
    sig: &Signature,
    preds: &PredicateCollection,
    rho: Option<&SphereRef>,
) -> Result<Arithmetic> {
    emit_arithmetic_in(CatalogStore::global(), phi, d, sig, preds, rho)
}

/// emit_arithmetic with catalogs taken from `store`.
pub fn emit_arithmetic_in(
    store: &CatalogStore,
    phi: &Expr,
    d: usize,
    sig: &Signature,
    preds: &PredicateCollection,
    rho: Option<&SphereRef>,
) -> Result<Arithmetic> {
    let (svars, nvars) = free_vars(phi);
    if !nvars.is_empty() {
        return Err(Error::invalid(format!("free number variables {nvars:?}")));
    }
    let r = hanf_radius(phi)?;
    let mut compiler = Compiler::new(store, sig, d, preds);
    let h = compiler.compile(phi)?;
    let cat = compiler.catalog(r, 1)?;

    let body = if svars.is_empty() {
        h.expr.clone()
    } else {
        let rho =
            rho.ok_or_else(|| Error::invalid("formula has free variables: a type ρ is required"))?;
        let xs: Vec<String> = svars.into_iter().collect();
        if rho.centres() != xs.len() {
            return Err(Error::invalid(format!(
                "ρ has {} centres, the formula {} free variables",
                rho.centres(),
                xs.len()
            )));
        }
        if rho.radius() < h.locality_radius {
            return Err(Error::invalid(format!(
                "ρ has radius {} below {}",
                rho.radius(),
                h.locality_radius
            )));
        }
        let mut verdict = |t: &SphereRef, zs: &[String]| -> Result<bool> {
            let pos: Vec<usize> = zs
                .iter()
                .map(|z| xs.binary_search(z).expect("free variable"))
                .collect();
            Ok(rho.ty.sub_sphere(&pos, t.radius()).code() == t.ty.code())
        };
        specialize(&h.expr, &mut verdict)?.into_expr()
    };

    let total = Expr::sum_all(
        cat.refs()
            .iter()
            .map(|t| Expr::NumVar(type_var(t)))
            .collect(),
    );
    let mut sums: HashMap<SphereRef, Expr> = HashMap::new();
    let expr = substitute(&body, &cat, &total, &mut sums)?;
    let index = cat
        .refs()
        .iter()
        .enumerate()
        .map(|(i, t)| (type_var(t), i))
        .collect();
    Ok(Arithmetic {
        expr,
        r,
        d: compiler.degree(),
        catalog: cat,
        index,
    })
}

fn substitute(
    e: &Expr,
    cat: &TypeCatalog,
    total: &Expr,
    sums: &mut HashMap<SphereRef, Expr>,
) -> Result<Expr> {
    Ok(match e {
        Expr::Count(..) => {
            let t = e
                .as_basic_count()
                .ok_or_else(|| Error::invalid(format!("not a basic counting term: {e}")))?;
            if let Some(s) = sums.get(t) {
                return Ok(s.clone());
            }
            if t.radius() > cat.r {
                return Err(Error::invalid(format!(
                    "basic term radius {} exceeds {}",
                    t.radius(),
                    cat.r
                )));
            }
            let vars: Vec<Expr> = cat
                .refs()
                .iter()
                .filter(|big| big.ty.sub_sphere(&[0], t.radius()).code() == t.ty.code())
                .map(|big| Expr::NumVar(type_var(big)))
                .collect();
            let s = Expr::sum_all(vars);
            sums.insert(t.clone(), s.clone());
            s
        }
        Expr::ExistsNum(k, a) => {
            let kv = Expr::NumVar(k.clone());
            let bounds = Expr::and(
                Expr::pred("leq", vec![Expr::int(0), kv.clone()]),
                Expr::pred("leq", vec![kv, total.clone()]),
            );
            Expr::exists_num(
                k.clone(),
                Expr::and(bounds, substitute(a, cat, total, sums)?),
            )
        }
        Expr::Not(a) => Expr::not(substitute(a, cat, total, sums)?),
        Expr::Or(a, b) => Expr::or(
            substitute(a, cat, total, sums)?,
            substitute(b, cat, total, sums)?,
        ),
        Expr::Add(a, b) => Expr::add(
            substitute(a, cat, total, sums)?,
            substitute(b, cat, total, sums)?,
        ),
        Expr::Mul(a, b) => Expr::mul(
            substitute(a, cat, total, sums)?,
            substitute(b, cat, total, sums)?,
        ),
        Expr::Pred(p, ts) => Expr::Pred(
            p.clone(),
            ts.iter()
                .map(|t| substitute(t, cat, total, sums))
                .collect::<Result<_>>()?,
        ),
        Expr::Int(_) | Expr::NumVar(_) => e.clone(),
        _ => return Err(Error::invalid(format!("unexpected subformula {e}"))),
    })
}
