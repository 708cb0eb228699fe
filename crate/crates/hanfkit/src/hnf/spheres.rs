//! Evaluating Boolean combinations of sphere atoms and conditions at the
//! centre tuples of catalog entries.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::formula::{Expr, SphereRef};
use crate::structures::{CanonCode, SphereType};
use crate::typecat::TypeCatalog;

/// A Boolean skeleton with sphere atoms and conditions numbered.
#[derive(Debug, Clone)]
pub(crate) enum Skeleton {
    Atom(usize),
    Cond(usize),
    Const(bool),
    Not(Box<Skeleton>),
    Or(Box<Skeleton>, Box<Skeleton>),
}

/// Sphere atoms of a formula with their centres given as positions into a
/// fixed variable order, grouped by (radius, positions) so that each entry
/// needs one sphere computation per group.
pub(crate) struct AtomIndex {
    pub atoms: Vec<(SphereRef, Vec<usize>)>,
    groups: Vec<((usize, Vec<usize>), HashMap<CanonCode, Vec<usize>>)>,
}

impl AtomIndex {
    fn new() -> Self {
        AtomIndex {
            atoms: Vec::new(),
            groups: Vec::new(),
        }
    }

    fn intern(&mut self, t: &SphereRef, pos: Vec<usize>) -> usize {
        if let Some(i) = self.atoms.iter().position(|(u, p)| u == t && *p == pos) {
            return i;
        }
        let i = self.atoms.len();
        let key = (t.radius(), pos.clone());
        let g = match self.groups.iter().position(|(k, _)| *k == key) {
            Some(g) => g,
            None => {
                self.groups.push((key, HashMap::new()));
                self.groups.len() - 1
            }
        };
        self.groups[g]
            .1
            .entry(t.ty.code().clone())
            .or_default()
            .push(i);
        self.atoms.push((t.clone(), pos));
        i
    }

    /// Indices of the atoms that hold at the centres of `ty`.
    pub fn true_atoms(&self, ty: &SphereType) -> Vec<usize> {
        let mut out = Vec::new();
        for ((r, pos), by_code) in &self.groups {
            let code = ty.sub_sphere(pos, *r).code().clone();
            if let Some(ids) = by_code.get(&code) {
                out.extend_from_slice(ids);
            }
        }
        out
    }

    pub fn max_radius(&self) -> usize {
        self.atoms
            .iter()
            .map(|(t, _)| t.radius())
            .max()
            .unwrap_or(0)
    }
}

/// Builds the skeleton of a Boolean combination of sphere atoms and
/// conditions. `cond_index` maps a condition to its slot or, for ground
/// conditions, to a fixed truth value.
pub(crate) fn skeleton(
    e: &Expr,
    vars: &[String],
    cond_index: &dyn Fn(&Expr) -> Option<std::result::Result<usize, bool>>,
    atoms: &mut AtomIndex,
) -> Result<Skeleton> {
    Ok(match e {
        Expr::Not(a) => Skeleton::Not(Box::new(skeleton(a, vars, cond_index, atoms)?)),
        Expr::Or(a, b) => Skeleton::Or(
            Box::new(skeleton(a, vars, cond_index, atoms)?),
            Box::new(skeleton(b, vars, cond_index, atoms)?),
        ),
        Expr::Sphere(t, xs) => {
            let pos = xs
                .iter()
                .map(|x| {
                    vars.iter().position(|v| v == x).ok_or_else(|| {
                        Error::invalid(format!("sphere atom variable {x} is not among {vars:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Skeleton::Atom(atoms.intern(t, pos))
        }
        Expr::Pred(..) | Expr::ExistsNum(..) => match cond_index(e) {
            Some(Ok(i)) => Skeleton::Cond(i),
            Some(Err(b)) => Skeleton::Const(b),
            None => return Err(Error::invalid(format!("unregistered condition {e}"))),
        },
        _ => return Err(Error::invalid(format!("not in Hanf normal form: {e}"))),
    })
}

impl Skeleton {
    pub fn eval(&self, atoms: &[bool], conds: &[bool]) -> bool {
        match self {
            Skeleton::Atom(i) => atoms[*i],
            Skeleton::Cond(i) => conds[*i],
            Skeleton::Const(b) => *b,
            Skeleton::Not(a) => !a.eval(atoms, conds),
            Skeleton::Or(a, b) => a.eval(atoms, conds) || b.eval(atoms, conds),
        }
    }
}

/// A formula prepared for repeated evaluation over the entries of one catalog.
pub(crate) struct SphereTable {
    skel: Skeleton,
    /// Per catalog entry, the atoms true at its centres.
    true_atoms: Vec<Vec<usize>>,
    atom_count: usize,
}

impl SphereTable {
    pub fn new(
        psi: &Expr,
        vars: &[String],
        cond_index: &dyn Fn(&Expr) -> Option<std::result::Result<usize, bool>>,
        cat: &TypeCatalog,
    ) -> Result<Self> {
        let mut atoms = AtomIndex::new();
        let skel = skeleton(psi, vars, cond_index, &mut atoms)?;
        if atoms.max_radius() > cat.r {
            return Err(Error::invalid(
                "sphere atom radius exceeds the catalog radius",
            ));
        }
        let true_atoms = cat.refs().iter().map(|t| atoms.true_atoms(&t.ty)).collect();
        Ok(SphereTable {
            skel,
            true_atoms,
            atom_count: atoms.atoms.len(),
        })
    }

    /// The index set I with ψ_J ≡ ⋁_{i∈I} sph_{τ_i}, where `conds` fixes
    /// the truth of every condition.
    pub fn select(&self, conds: &[bool]) -> Vec<usize> {
        let mut buf = vec![false; self.atom_count];
        let mut out = Vec::new();
        for (i, ts) in self.true_atoms.iter().enumerate() {
            for &a in ts {
                buf[a] = true;
            }
            if self.skel.eval(&buf, conds) {
                out.push(i);
            }
            for &a in ts {
                buf[a] = false;
            }
        }
        out
    }
}

/// The index set I of the catalog entries at whose centres ψ holds, when
/// the conditions of ψ take the truth values in `truth`. Missing
/// conditions are an error.
pub fn boolean_to_spheres(
    psi: &Expr,
    vars: &[String],
    truth: &HashMap<Expr, bool>,
    cat: &TypeCatalog,
) -> Result<Vec<usize>> {
    let conds: Vec<Expr> = truth.keys().cloned().collect();
    let values: Vec<bool> = conds.iter().map(|c| truth[c]).collect();
    let index = |e: &Expr| conds.iter().position(|c| c == e).map(Ok);
    let table = SphereTable::new(psi, vars, &index, cat)?;
    Ok(table.select(&values))
}

/// Truth value or residual formula after substituting constants.
pub(crate) enum Folded {
    Const(bool),
    Expr(Expr),
}

impl Folded {
    pub fn into_expr(self) -> Expr {
        match self {
            Folded::Const(true) => Expr::verum(),
            Folded::Const(false) => Expr::falsum(),
            Folded::Expr(e) => e,
        }
    }
}

/// Replaces the sphere atoms on the Boolean skeleton of `e` by the truth
/// values `verdict` assigns and folds the introduced constants.
pub(crate) fn specialize(
    e: &Expr,
    verdict: &mut dyn FnMut(&SphereRef, &[String]) -> Result<bool>,
) -> Result<Folded> {
    Ok(match e {
        Expr::Sphere(t, xs) => Folded::Const(verdict(t, xs)?),
        Expr::Not(a) => match specialize(a, verdict)? {
            Folded::Const(b) => Folded::Const(!b),
            Folded::Expr(x) => Folded::Expr(Expr::not(x)),
        },
        Expr::Or(a, b) => match (specialize(a, verdict)?, specialize(b, verdict)?) {
            (Folded::Const(true), _) | (_, Folded::Const(true)) => Folded::Const(true),
            (Folded::Const(false), x) | (x, Folded::Const(false)) => x,
            (Folded::Expr(x), Folded::Expr(y)) => Folded::Expr(Expr::or(x, y)),
        },
        _ => Folded::Expr(e.clone()),
    })
}
