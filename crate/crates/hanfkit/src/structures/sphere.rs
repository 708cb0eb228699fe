use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::OnceLock;

use super::canon::{canonical_code, CanonCode};
use super::Structure;
use crate::error::{Error, Result};

/// A structure together with a tuple of centres (repetitions allowed) and
/// a radius: the universe is meant to be N_radius(centres).
#[derive(Clone)]
pub struct SphereType {
    pub base: Structure,
    pub centres: Vec<usize>,
    pub radius: usize,
    code: OnceLock<CanonCode>,
}

impl SphereType {
    pub fn new(base: Structure, centres: Vec<usize>, radius: usize) -> Self {
        SphereType {
            base,
            centres,
            radius,
            code: OnceLock::new(),
        }
    }

    /// Checks the universe invariant: every element lies within `radius`
    /// of some centre.
    pub fn validate(&self) -> Result<()> {
        if self.centres.is_empty() {
            return Err(Error::invalid("a type needs at least one centre"));
        }
        if let Some(&c) = self.centres.iter().find(|&&c| c >= self.base.size()) {
            return Err(Error::invalid(format!("centre {c} outside the universe")));
        }
        let dist = self.base.distances_from(&self.centres);
        if dist.iter().any(|d| d.map_or(true, |d| d > self.radius)) {
            return Err(Error::invalid(
                "universe exceeds the neighbourhood of the centres",
            ));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.base.size()
    }

    pub fn degree(&self) -> usize {
        self.base.gaifman_degree()
    }

    /// Canonical encoding, computed once.
    pub fn code(&self) -> &CanonCode {
        self.code
            .get_or_init(|| canonical_code(&self.base, &self.centres))
    }

    /// The r-sphere of a sub-tuple of centres inside this type, `r ≤ radius`.
    pub fn sub_sphere(&self, centre_positions: &[usize], r: usize) -> SphereType {
        let tuple: Vec<usize> = centre_positions.iter().map(|&i| self.centres[i]).collect();
        self.base.sphere_unchecked(&tuple, r)
    }
}

impl PartialEq for SphereType {
    fn eq(&self, other: &Self) -> bool {
        self.radius == other.radius && self.centres == other.centres && self.base == other.base
    }
}
impl Eq for SphereType {}

impl Hash for SphereType {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.base.hash(state);
        self.centres.hash(state);
        self.radius.hash(state);
    }
}

impl fmt::Debug for SphereType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SphereType(r={}, centres={:?}, {:?})",
            self.radius, self.centres, self.base
        )
    }
}

/// True iff a bijection maps one onto the other, preserving every relation
/// and the centre tuples pointwise.
pub fn is_isomorphic(a: &SphereType, b: &SphereType) -> bool {
    a.base.sig() == b.base.sig()
        && a.centres.len() == b.centres.len()
        && a.size() == b.size()
        && a.base.tuple_count() == b.base.tuple_count()
        && a.code() == b.code()
}

impl Structure {
    /// The r-sphere of ā: the induced substructure on N_r(ā) with ā as centres.
    pub fn sphere(&self, tuple: &[usize], r: usize) -> Result<SphereType> {
        let elems = self.neighbourhood(tuple, r)?;
        Ok(self.sphere_on(&elems, tuple, r))
    }

    pub(crate) fn sphere_unchecked(&self, tuple: &[usize], r: usize) -> SphereType {
        let elems = self.ball(tuple, r);
        self.sphere_on(&elems, tuple, r)
    }

    fn sphere_on(&self, elems: &[usize], tuple: &[usize], r: usize) -> SphereType {
        let base = self.induced(elems);
        let centres = tuple
            .iter()
            .map(|c| {
                elems
                    .binary_search(c)
                    .expect("centres lie in their own ball")
            })
            .collect();
        SphereType::new(base, centres, r)
    }
}
