//! Simple counting terms as polynomials over basic counting terms and
//! number variables with integer coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::formula::{Expr, SphereRef};

/// Variable of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    /// `#(y) sph_τ(y)` for a one-centre type τ.
    Basic(SphereRef),
    Num(String),
}

/// Sum of `coefficient · monomial`; a monomial is a sorted multiset of atoms
/// and the empty monomial is the constant.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    terms: BTreeMap<Vec<Atom>, BigInt>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        let mut p = Poly::zero();
        p.add_term(Vec::new(), c.into());
        p
    }

    pub fn basic(t: SphereRef) -> Self {
        let mut p = Poly::zero();
        p.add_term(vec![Atom::Basic(t)], BigInt::one());
        p
    }

    pub fn num_var(v: impl Into<String>) -> Self {
        let mut p = Poly::zero();
        p.add_term(vec![Atom::Num(v.into())], BigInt::one());
        p
    }

    fn add_term(&mut self, mono: Vec<Atom>, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(mono).or_default();
        *slot += c;
        if slot.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant coefficient.
    pub fn constant_part(&self) -> BigInt {
        self.terms.get(&Vec::new()).cloned().unwrap_or_default()
    }

    pub fn as_constant(&self) -> Option<BigInt> {
        match self.terms.len() {
            0 => Some(BigInt::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Atom], &BigInt)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), c))
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(m.clone(), c.clone());
        }
        p
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(&BigInt::from(-1)))
    }

    pub fn scale(&self, k: &BigInt) -> Poly {
        let mut p = Poly::zero();
        for (m, c) in &self.terms {
            p.add_term(m.clone(), c * k);
        }
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut p = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = m1.clone();
                m.extend(m2.iter().cloned());
                m.sort();
                p.add_term(m, c1 * c2);
            }
        }
        p
    }

    /// Largest radius of a basic term; 0 when there is none.
    pub fn locality_radius(&self) -> usize {
        self.basic_types()
            .iter()
            .map(SphereRef::radius)
            .max()
            .unwrap_or(0)
    }

    pub fn basic_types(&self) -> Vec<SphereRef> {
        let mut out: Vec<SphereRef> = Vec::new();
        for m in self.terms.keys() {
            for a in m {
                if let Atom::Basic(t) = a {
                    if !out.contains(t) {
                        out.push(t.clone());
                    }
                }
            }
        }
        out
    }

    /// Reads a simple counting term back into polynomial form.
    pub fn from_expr(e: &Expr) -> Result<Poly> {
        match e {
            Expr::Int(i) => Ok(Poly::constant(i.clone())),
            Expr::NumVar(v) => Ok(Poly::num_var(v.clone())),
            Expr::Add(a, b) => Ok(Poly::from_expr(a)?.add(&Poly::from_expr(b)?)),
            Expr::Mul(a, b) => Ok(Poly::from_expr(a)?.mul(&Poly::from_expr(b)?)),
            Expr::Count(..) => match e.as_basic_count() {
                Some(t) => Ok(Poly::basic(t.clone())),
                None => Err(Error::invalid(format!("{e} is not a basic counting term"))),
            },
            _ => Err(Error::invalid(format!("{e} is not a simple counting term"))),
        }
    }

    /// Term in the formula grammar; monomials are products and negative
    /// coefficients are written as multiplication by a negative integer.
    pub fn to_expr(&self) -> Expr {
        let mut items = Vec::new();
        for (m, c) in &self.terms {
            let factors: Vec<Expr> = m.iter().map(atom_expr).collect();
            let mono = factors.into_iter().reduce(Expr::mul);
            items.push(match mono {
                None => Expr::int(c.clone()),
                Some(m) if c.is_one() => m,
                Some(m) => Expr::mul(Expr::int(c.clone()), m),
            });
        }
        Expr::sum_all(items)
    }

    /// Value under an interpretation of the atoms.
    pub fn eval(&self, mut val: impl FnMut(&Atom) -> Result<BigInt>) -> Result<BigInt> {
        let mut total = BigInt::zero();
        for (m, c) in &self.terms {
            let mut v = c.clone();
            for a in m {
                v *= val(a)?;
            }
            total += v;
        }
        Ok(total)
    }
}

pub fn basic_term(t: &SphereRef) -> Expr {
    Expr::count(["y"], Expr::Sphere(t.clone(), vec!["y".into()]))
}

fn atom_expr(a: &Atom) -> Expr {
    match a {
        Atom::Basic(t) => basic_term(t),
        Atom::Num(v) => Expr::NumVar(v.clone()),
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() {
                "-"
            } else if i > 0 {
                "+"
            } else {
                ""
            };
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(sign)?;
            if i > 0 && !sign.is_empty() {
                f.write_str(" ")?;
            }
            let a = c.abs();
            if m.is_empty() {
                write!(f, "{a}")?;
                continue;
            }
            if !a.is_one() {
                write!(f, "{a}·")?;
            }
            let names: Vec<String> = m
                .iter()
                .map(|x| match x {
                    Atom::Basic(t) => format!("#[{}]", t.id),
                    Atom::Num(v) => format!("%{v}"),
                })
                .collect();
            f.write_str(&names.join("·"))?;
        }
        Ok(())
    }
}
