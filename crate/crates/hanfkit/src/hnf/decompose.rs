//! Counting-term decomposition: #ȳ sph_τ(x̄,ȳ) as a polynomial over basic
//! counting terms, exact on structures where x̄ has a fixed type ρ.

use std::sync::Arc;

use num_bigint::BigInt;

use super::poly::Poly;
use super::Compiler;
use crate::error::{Error, Result};
use crate::formula::SphereRef;
use crate::structures::SphereType;

/// One computed decomposition: for every d-bounded A and every n-tuple ā
/// with N_R(ā) ≅ ρ, the number of b̄ with N_r(ā,b̄) ≅ τ equals `term`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub tau: SphereRef,
    pub n: usize,
    pub k: usize,
    pub rho: Option<SphereRef>,
    pub term: Poly,
}

const MAX_DEPTH: usize = 256;

/// Connected components of the Gaifman graph of a type, as a component id
/// per element.
fn components(t: &SphereType) -> (Vec<usize>, usize) {
    let n = t.size();
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = count;
        while let Some(v) = stack.pop() {
            for &w in t.base.neighbours(v) {
                if comp[w] == usize::MAX {
                    comp[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

/// The sub-type on the elements of the chosen components with the given
/// centre positions.
fn restrict(t: &SphereType, keep: &dyn Fn(usize) -> bool, positions: &[usize]) -> SphereType {
    let elems: Vec<usize> = (0..t.size()).filter(|&v| keep(v)).collect();
    let base = t.base.induced(&elems);
    let centres = positions
        .iter()
        .map(|&p| elems.binary_search(&t.centres[p]).expect("centre kept"))
        .collect();
    SphereType::new(base, centres, t.radius)
}

impl Compiler<'_> {
    /// t̂ for `#ȳ sph_τ(x̄, ȳ)` where the first `n` centres of τ are x̄. For
    /// n > 0 the result is specific to ρ, an n-centre type of radius at
    /// least r + k(2r+1).
    pub fn decompose(
        &mut self,
        tau: &SphereRef,
        n: usize,
        rho: Option<&SphereRef>,
    ) -> Result<Poly> {
        let k = tau
            .centres()
            .checked_sub(n)
            .filter(|&k| k > 0)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "type {} has {} centres, need more than n={n}",
                    tau.id,
                    tau.centres()
                ))
            })?;
        let r = tau.radius();
        let rho = if n == 0 { None } else { rho };
        if n > 0 {
            let Some(rho) = rho else {
                return Err(Error::invalid(
                    "a decomposition with free variables needs the type ρ",
                ));
            };
            if rho.centres() != n {
                return Err(Error::invalid(format!(
                    "ρ has {} centres, expected {n}",
                    rho.centres()
                )));
            }
            let need = r + k * (2 * r + 1);
            if rho.radius() < need {
                return Err(Error::invalid(format!(
                    "ρ has radius {} below the required {need}",
                    rho.radius()
                )));
            }
        }
        let key = (tau.id.clone(), n, rho.map(|p| p.id.clone()));
        if let Some(p) = self.decomp.get(&key) {
            return Ok(p.clone());
        }
        if self.depth >= MAX_DEPTH {
            return Err(Error::cap("decomposition recursion too deep"));
        }
        self.depth += 1;
        let res = self.decompose_uncached(tau, n, k, rho);
        self.depth -= 1;
        let term = res?;
        self.decomp.insert(key, term.clone());
        self.trace.push(Decomposition {
            tau: tau.clone(),
            n,
            k,
            rho: rho.cloned(),
            term: term.clone(),
        });
        Ok(term)
    }

    fn decompose_uncached(
        &mut self,
        tau: &SphereRef,
        n: usize,
        k: usize,
        rho: Option<&SphereRef>,
    ) -> Result<Poly> {
        let t = &tau.ty;
        let r = t.radius;
        let (comp, _) = components(t);
        let centre_comp: Vec<usize> = t.centres.iter().map(|&c| comp[c]).collect();
        let anchored: Vec<usize> = centre_comp[..n].to_vec();
        // Components without x̄-centres, ordered by their first centre.
        let mut free_comps: Vec<usize> = Vec::new();
        for &c in &centre_comp[n..] {
            if !anchored.contains(&c) && !free_comps.contains(&c) {
                free_comps.push(c);
            }
        }

        if n > 0 && free_comps.is_empty() {
            // Connected to x̄: a constant, counted inside ρ.
            let rho = rho.expect("checked by the caller");
            let a: Vec<usize> = rho.ty.centres.clone();
            let ball = rho.ty.base.ball(&a, k * (2 * r + 1));
            let count = count_extensions(&rho.ty, &a, &ball, k, r, t);
            return Ok(Poly::constant(count));
        }
        if n == 0 && free_comps.len() == 1 {
            return self.connected_sentence_term(tau, k);
        }

        let last = *free_comps.last().expect("at least two components");
        let i1: Vec<usize> = (n..n + k).filter(|&p| centre_comp[p] == last).collect();
        let rest: Vec<usize> = (0..n + k).filter(|&p| centre_comp[p] != last).collect();
        let i2_len = rest.len() - n;

        let tau1 = restrict(t, &|v| comp[v] == last, &i1);
        let cat1 = self.catalog(r, i1.len())?;
        let ref1 = cat1.sphere_ref(cat1.identify(&tau1)?).clone();
        let tau2 = restrict(t, &|v| comp[v] != last, &rest);
        let cat2 = self.catalog(r, rest.len())?;
        let ref2 = cat2.sphere_ref(cat2.identify(&tau2)?).clone();

        let t1 = self.decompose(&ref1, 0, None)?;
        let t2 = if i2_len > 0 {
            self.decompose(&ref2, n, rho)?
        } else {
            let rho = rho.expect("n > 0 here");
            let here = rho.ty.sub_sphere(&(0..n).collect::<Vec<_>>(), r);
            Poly::constant(u32::from(here.code() == ref2.ty.code()))
        };

        let excluded = self.exclusion_set(tau, &i1, &rest, &ref1, &ref2)?;
        let cat = self.catalog(r, n + k)?;
        let mut term = t1.mul(&t2);
        for i in excluded {
            let other = cat.sphere_ref(i).clone();
            term = term.sub(&self.decompose(&other, n, rho)?);
        }
        Ok(term)
    }

    /// n = 0 and τ connected: Σ over R̂-types ρ' of the number of ways to
    /// extend its centre to a realisation of τ, R̂ = r + (k-1)(2r+1).
    fn connected_sentence_term(&mut self, tau: &SphereRef, k: usize) -> Result<Poly> {
        if k == 1 {
            return Ok(Poly::basic(tau.clone()));
        }
        let r = tau.radius();
        let rhat = r + (k - 1) * (2 * r + 1);
        let cat = self.catalog(rhat, 1)?;
        let mut term = Poly::zero();
        for rho in cat.refs() {
            let c = rho.ty.centres[0];
            let ball = rho.ty.base.ball(&[c], (k - 1) * (2 * r + 1));
            let count = count_extensions(&rho.ty, &[c], &ball, k - 1, r, &tau.ty);
            if count > 0 {
                term = term.add(&Poly::basic(rho.clone()).scale(&BigInt::from(count)));
            }
        }
        Ok(term)
    }

    /// Types τ' ≠ τ of the same catalog whose restrictions to the two
    /// centre groups are the two parts of τ.
    fn exclusion_set(
        &mut self,
        tau: &SphereRef,
        i1: &[usize],
        rest: &[usize],
        ref1: &SphereRef,
        ref2: &SphereRef,
    ) -> Result<Vec<usize>> {
        if let Some(v) = self.exclusions.get(&tau.id) {
            return Ok(v.clone());
        }
        let r = tau.radius();
        let cat = self.catalog(r, tau.centres())?;
        let mut out = Vec::new();
        for (i, other) in cat.refs().iter().enumerate() {
            if other.id == tau.id {
                continue;
            }
            if other.ty.sub_sphere(i1, r).code() == ref1.ty.code()
                && other.ty.sub_sphere(rest, r).code() == ref2.ty.code()
            {
                out.push(i);
            }
        }
        self.exclusions.insert(Arc::clone(&tau.id), out.clone());
        Ok(out)
    }
}

/// Number of b̄ ∈ ball^k with N_r(ā, b̄) ≅ τ inside the type `host`.
fn count_extensions(
    host: &SphereType,
    a: &[usize],
    ball: &[usize],
    k: usize,
    r: usize,
    tau: &SphereType,
) -> u64 {
    let want = tau.code();
    let mut tuple: Vec<usize> = a.to_vec();
    let mut idx = vec![0usize; k];
    let mut count = 0;
    if ball.is_empty() {
        return 0;
    }
    loop {
        tuple.truncate(a.len());
        tuple.extend(idx.iter().map(|&i| ball[i]));
        let s = host.base.sphere_unchecked(&tuple, r);
        if s.size() == tau.size() && s.code() == want {
            count += 1;
        }
        let mut p = k;
        loop {
            if p == 0 {
                return count;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < ball.len() {
                break;
            }
            idx[p] = 0;
        }
    }
}
