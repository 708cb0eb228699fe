//! Direct semantics of expressions on finite structures. This evaluator is
//! the reference every compiled form is checked against, so it follows the
//! inductive definition literally: counts enumerate all tuples, number
//! quantifiers range over 0..=|A|.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formula::{free_vars, Expr, PredicateCollection, Signature, SphereRef};
use crate::structures::{all_structures, random_structure, CanonCode, Structure};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Int(BigInt),
}

impl Value {
    pub fn as_bool(&self) -> Result<bool> {
        match self {
            Value::Bool(b) => Ok(*b),
            Value::Int(_) => Err(Error::invalid("expected a formula, got a term")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
        }
    }
}

/// Values for structure variables and number variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    pub structs: Vec<(String, usize)>,
    pub nums: Vec<(String, BigInt)>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, var: &str, a: usize) -> Self {
        self.structs.retain(|(v, _)| v != var);
        self.structs.push((var.to_string(), a));
        self
    }

    pub fn set_num(mut self, var: &str, k: impl Into<BigInt>) -> Self {
        self.nums.retain(|(v, _)| v != var);
        self.nums.push((var.to_string(), k.into()));
        self
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .structs
            .iter()
            .map(|(v, a)| format!("{v}={a}"))
            .collect();
        parts.extend(self.nums.iter().map(|(v, k)| format!("%{v}={k}")));
        write!(f, "{}", parts.join(" "))
    }
}

/// A structure paired with an assignment.
#[derive(Clone, Debug)]
pub struct Interpretation<'a> {
    pub structure: &'a Structure,
    pub assign: Assignment,
}

/// Evaluates against one fixed structure. Sphere atoms are decided by
/// computing the sphere and comparing canonical codes; the codes of spheres
/// already computed on this structure are kept, since the structure does
/// not change.
pub struct Evaluator<'a> {
    s: &'a Structure,
    preds: &'a PredicateCollection,
    spheres: RefCell<HashMap<SphereKey, CanonCode>>,
    /// Per radius, how many elements realise each sphere code; answers
    /// basic counting terms #(y) sph_τ(y) by lookup.
    histograms: RefCell<HashMap<usize, HashMap<CanonCode, u64>>>,
}

/// (radius, tuple) without a heap allocation for short tuples.
#[derive(Clone, PartialEq, Eq, Hash)]
enum SphereKey {
    Packed(usize, usize, u128),
    Long(usize, Vec<usize>),
}

impl SphereKey {
    fn new(r: usize, tuple: &[usize]) -> Self {
        if tuple.len() <= 4 && tuple.iter().all(|&a| a < 1 << 32) {
            SphereKey::Packed(
                r,
                tuple.len(),
                tuple.iter().fold(0u128, |acc, &a| acc << 32 | a as u128),
            )
        } else {
            SphereKey::Long(r, tuple.to_vec())
        }
    }
}

struct Env<'e> {
    structs: Vec<(&'e str, usize)>,
    nums: Vec<(&'e str, BigInt)>,
}

impl<'e> Env<'e> {
    fn svar(&self, v: &str) -> Result<usize> {
        self.structs
            .iter()
            .rev()
            .find(|(n, _)| *n == v)
            .map(|&(_, a)| a)
            .ok_or_else(|| Error::invalid(format!("unassigned structure variable {v}")))
    }

    fn nvar(&self, v: &str) -> Result<BigInt> {
        self.nums
            .iter()
            .rev()
            .find(|(n, _)| *n == v)
            .map(|(_, k)| k.clone())
            .ok_or_else(|| Error::invalid(format!("unassigned number variable %{v}")))
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(s: &'a Structure, preds: &'a PredicateCollection) -> Self {
        Evaluator {
            s,
            preds,
            spheres: RefCell::new(HashMap::new()),
            histograms: RefCell::new(HashMap::new()),
        }
    }

    pub fn structure(&self) -> &Structure {
        self.s
    }

    pub fn eval(&self, e: &Expr, a: &Assignment) -> Result<Value> {
        for (_, x) in &a.structs {
            if *x >= self.s.size() {
                return Err(Error::invalid(format!("element {x} outside the universe")));
            }
        }
        let mut env = Env {
            structs: a.structs.iter().map(|(v, x)| (v.as_str(), *x)).collect(),
            nums: a
                .nums
                .iter()
                .map(|(v, k)| (v.as_str(), k.clone()))
                .collect(),
        };
        if e.is_formula() {
            self.formula(e, &mut env).map(Value::Bool)
        } else {
            self.term(e, &mut env).map(Value::Int)
        }
    }

    pub fn holds(&self, e: &Expr, a: &Assignment) -> Result<bool> {
        self.eval(e, a)?.as_bool()
    }

    /// Whether N_r(ā) ≅ τ for the sphere atom's type.
    pub fn sphere_holds(&self, t: &SphereRef, tuple: &[usize]) -> bool {
        let mut cache = self.spheres.borrow_mut();
        let key = SphereKey::new(t.radius(), tuple);
        if let Some(code) = cache.get(&key) {
            return code == t.ty.code();
        }
        let code = self.s.sphere_unchecked(tuple, t.radius()).code().clone();
        let hit = &code == t.ty.code();
        cache.insert(key, code);
        hit
    }

    /// Number of elements a with N_r(a) ≅ τ.
    pub fn basic_count(&self, t: &SphereRef) -> u64 {
        let r = t.radius();
        let mut hist = self.histograms.borrow_mut();
        let h = hist.entry(r).or_insert_with(|| {
            let mut h = HashMap::new();
            for a in 0..self.s.size() {
                *h.entry(self.s.sphere_unchecked(&[a], r).code().clone())
                    .or_insert(0) += 1;
            }
            h
        });
        h.get(t.ty.code()).copied().unwrap_or(0)
    }

    fn formula<'e>(&self, e: &'e Expr, env: &mut Env<'e>) -> Result<bool> {
        Ok(match e {
            Expr::Equal(x, y) => env.svar(x)? == env.svar(y)?,
            Expr::Rel(r, xs) => {
                let idx = self.s.sig().index_of(r).ok_or_else(|| {
                    Error::invalid(format!("relation {r} not in the structure's signature"))
                })?;
                let t = xs.iter().map(|x| env.svar(x)).collect::<Result<Vec<_>>>()?;
                self.s.holds(idx, &t)
            }
            Expr::Not(a) => !self.formula(a, env)?,
            Expr::Or(a, b) => self.formula(a, env)? || self.formula(b, env)?,
            Expr::Exists(y, a) => {
                let mut found = false;
                for v in 0..self.s.size() {
                    env.structs.push((y, v));
                    let r = self.formula(a, env);
                    env.structs.pop();
                    if r? {
                        found = true;
                        break;
                    }
                }
                found
            }
            Expr::ExistsNum(k, a) => {
                let mut found = false;
                for v in 0..=self.s.size() {
                    env.nums.push((k, BigInt::from(v)));
                    let r = self.formula(a, env);
                    env.nums.pop();
                    if r? {
                        found = true;
                        break;
                    }
                }
                found
            }
            Expr::Pred(p, ts) => {
                let args = ts
                    .iter()
                    .map(|t| self.term(t, env))
                    .collect::<Result<Vec<_>>>()?;
                self.preds.holds(p, &args)?
            }
            Expr::Sphere(t, xs) => {
                let tuple = xs.iter().map(|x| env.svar(x)).collect::<Result<Vec<_>>>()?;
                self.sphere_holds(t, &tuple)
            }
            _ => return Err(Error::invalid(format!("expected a formula, got term {e}"))),
        })
    }

    fn count<'e>(&self, ys: &'e [String], body: &'e Expr, env: &mut Env<'e>) -> Result<u64> {
        let Some((y, rest)) = ys.split_first() else {
            return Ok(u64::from(self.formula(body, env)?));
        };
        let mut total = 0;
        for v in 0..self.s.size() {
            env.structs.push((y, v));
            let r = self.count(rest, body, env);
            env.structs.pop();
            total += r?;
        }
        Ok(total)
    }

    fn term<'e>(&self, e: &'e Expr, env: &mut Env<'e>) -> Result<BigInt> {
        Ok(match e {
            Expr::Int(i) => i.clone(),
            Expr::NumVar(k) => env.nvar(k)?,
            Expr::Add(a, b) => self.term(a, env)? + self.term(b, env)?,
            Expr::Mul(a, b) => self.term(a, env)? * self.term(b, env)?,
            Expr::Count(ys, body) => match e.as_basic_count() {
                Some(t) => BigInt::from(self.basic_count(t)),
                None => BigInt::from(self.count(ys, body, env)?),
            },
            _ => return Err(Error::invalid(format!("expected a term, got formula {e}"))),
        })
    }
}

/// One-shot evaluation.
pub fn evaluate(
    e: &Expr,
    interp: &Interpretation<'_>,
    preds: &PredicateCollection,
) -> Result<Value> {
    Evaluator::new(interp.structure, preds).eval(e, &interp.assign)
}

/// Sweep mode for [`equivalent_on_bounded`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Every d-bounded structure up to the size limit, one per isomorphism class.
    Exhaustive,
    /// Random d-bounded structures with 1..=max_size elements.
    Random { samples: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub structure: Structure,
    pub assignment: Assignment,
    pub left: Value,
    pub right: Value,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "on a {}-element structure with [{}]: left {} but right {}\n{}",
            self.structure.size(),
            self.assignment,
            self.left,
            self.right,
            self.structure.to_text()
        )
    }
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Pass { structures: usize, checks: usize },
    Fail(Box<Counterexample>),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

/// Every assignment of the given variables over a structure of size n:
/// structure variables over 0..n, number variables over 0..=n.
pub fn all_assignments(svars: &[String], nvars: &[String], n: usize) -> Vec<Assignment> {
    let mut out = vec![Assignment::new()];
    for v in svars {
        out = out
            .into_iter()
            .flat_map(|a| (0..n).map(move |x| a.clone().set(v, x)))
            .collect();
    }
    for v in nvars {
        out = out
            .into_iter()
            .flat_map(|a| (0..=n).map(move |k| a.clone().set_num(v, k)))
            .collect();
    }
    out
}

/// Compares two expressions on each given structure under every assignment.
pub fn equivalent_on_structures<'s>(
    e1: &Expr,
    e2: &Expr,
    structures: impl IntoIterator<Item = &'s Structure>,
    preds: &PredicateCollection,
) -> Result<Verdict> {
    let (mut s1, mut n1) = free_vars(e1);
    let (s2, n2) = free_vars(e2);
    s1.extend(s2);
    n1.extend(n2);
    let svars: Vec<String> = s1.into_iter().collect();
    let nvars: Vec<String> = n1.into_iter().collect();
    let (mut count, mut checks) = (0, 0);
    for s in structures {
        count += 1;
        let ev = Evaluator::new(s, preds);
        for a in all_assignments(&svars, &nvars, s.size()) {
            checks += 1;
            let left = ev.eval(e1, &a)?;
            let right = ev.eval(e2, &a)?;
            if left != right {
                return Ok(Verdict::Fail(Box::new(Counterexample {
                    structure: s.clone(),
                    assignment: a,
                    left,
                    right,
                })));
            }
        }
    }
    Ok(Verdict::Pass {
        structures: count,
        checks,
    })
}

/// Compares two expressions on all (or randomly sampled) d-bounded
/// structures over `sig` with at most `max_size` elements.
pub fn equivalent_on_bounded(
    e1: &Expr,
    e2: &Expr,
    sig: &Signature,
    d: usize,
    max_size: usize,
    mode: Mode,
    preds: &PredicateCollection,
) -> Result<Verdict> {
    match mode {
        Mode::Exhaustive => {
            let all = all_structures(sig, d, max_size);
            equivalent_on_structures(e1, e2, &all, preds)
        }
        Mode::Random { samples, seed } => {
            let sample = random_structures(sig, d, max_size, samples, seed);
            equivalent_on_structures(e1, e2, &sample, preds)
        }
    }
}

/// Deterministic sample of random d-bounded structures.
pub fn random_structures(
    sig: &Signature,
    d: usize,
    max_size: usize,
    samples: usize,
    seed: u64,
) -> Vec<Structure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let n = rng.gen_range(1..=max_size.max(1));
            let density = rng.gen_range(0.3..2.5);
            random_structure(sig, n, d, density, &mut rng)
        })
        .collect()
}
