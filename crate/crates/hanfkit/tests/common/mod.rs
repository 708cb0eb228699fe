//! Shared corpus and helpers for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hanfkit::formula::{metrics, parse, print, Expr, PredicateCollection, Signature};

pub const SIG_E: &str = "E/2";
pub const SIG_EU: &str = "E/2,U/1";

/// A corpus formula together with the signature it is written over.
#[derive(Clone, Debug)]
pub struct Item {
    pub text: String,
    pub sig: Signature,
    pub expr: Expr,
}

impl Item {
    pub fn is_sentence(&self) -> bool {
        let m = metrics(&self.expr);
        m.free_struct.is_empty() && m.free_num.is_empty()
    }

    pub fn has_free_struct(&self) -> bool {
        !metrics(&self.expr).free_struct.is_empty()
    }

    pub fn uses_unary(&self) -> bool {
        self.sig.len() > 1
    }
}

pub fn sig(s: &str) -> Signature {
    Signature::parse(s).unwrap()
}

pub fn item(text: &str, sg: &str) -> Item {
    let preds = PredicateCollection::new();
    let sig = sig(sg);
    let expr = parse(text, &sig, &preds).unwrap_or_else(|e| panic!("{text}: {e}"));
    Item {
        text: print(&expr),
        sig,
        expr,
    }
}

/// Hand-picked formulas covering every construct of the language.
pub const CURATED: &[(&str, &str)] = &[
    ("(E x y)", SIG_E),
    ("(= x y)", SIG_E),
    ("(not (E x x))", SIG_E),
    ("(or (E x y) (E y x))", SIG_E),
    ("(implies (E x y) (E y x))", SIG_E),
    ("(ex y (E x y))", SIG_E),
    ("(forall y (implies (E x y) (E y y)))", SIG_E),
    ("(ex y (and (E y x) (not (= x y))))", SIG_E),
    ("(pred prime (# (y) (E x y)))", SIG_E),
    ("(pred div2 (# (y) (or (E x y) (E y x))))", SIG_E),
    ("(pred geq2 (# (y) (E y x)))", SIG_E),
    ("(pred eq (# (y) (E x y)) (# (y) (E y x)))", SIG_E),
    ("(pred leq (# (y) (E x y)) 1)", SIG_E),
    ("(pred up:01$10 (+ (# (y) (E x y)) 1))", SIG_E),
    ("(pred div3 (* 2 (# (y) (E y x))))", SIG_E),
    ("(ex x (E x x))", SIG_E),
    ("(forall x (ex y (E x y)))", SIG_E),
    ("(ex x (pred prime (# (y) (E x y))))", SIG_E),
    ("(forall x (pred leq (# (y) (E x y)) 1))", SIG_E),
    ("(pred prime (+ (# (x) (= x x)) (# (x y) (E x y))))", SIG_E),
    ("(pred div2 (# (x y) (E x y)))", SIG_E),
    ("(pred geq2 (# (x y) (and (E x y) (E y x))))", SIG_E),
    ("(pred exists (# (x) (ex y (and (E x y) (E y x)))))", SIG_E),
    ("(exn %k (pred eq %k (# (y) (E y y))))", SIG_E),
    (
        "(exn %k (and (pred leq 1 %k) (pred eq %k (# (y) (E x y)))))",
        SIG_E,
    ),
    (
        "(exn %k (and (pred prime %k) (pred leq %k (# (x) (= x x)))))",
        SIG_E,
    ),
    ("(foralln %k (pred leq %k (# (x) (= x x))))", SIG_E),
    ("(pred leq %k (# (y) (E x y)))", SIG_E),
    ("(pred eq (* %k %k) (# (y) (E y y)))", SIG_E),
    ("(U x)", SIG_EU),
    ("(and (U x) (E x y))", SIG_EU),
    ("(ex y (and (E x y) (U y)))", SIG_EU),
    ("(pred prime (# (y) (U y)))", SIG_EU),
    ("(pred eq (# (y) (U y)) (# (y) (not (U y))))", SIG_EU),
    ("(pred div2 (# (y) (and (E x y) (U y))))", SIG_EU),
    ("(ex x (and (U x) (pred geq2 (# (y) (E x y)))))", SIG_EU),
    ("(forall x (implies (U x) (ex y (E x y))))", SIG_EU),
    (
        "(exn %k (and (pred div3 %k) (pred eq %k (# (y) (U y)))))",
        SIG_EU,
    ),
];

const UNARY: &[&str] = &["exists", "prime", "div2", "div3", "geq2", "up:01$10"];

struct Gen {
    rng: ChaCha8Rng,
    unary_rel: bool,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).unwrap()
    }

    fn atom1(&mut self, v: &str) -> String {
        if self.unary_rel && self.rng.gen_bool(0.5) {
            format!("(U {v})")
        } else {
            format!("(E {v} {v})")
        }
    }

    fn atom2(&mut self, x: &str, y: &str) -> String {
        match self.rng.gen_range(0..6) {
            0 | 1 => format!("(E {x} {y})"),
            2 => format!("(E {y} {x})"),
            3 => format!("(= {x} {y})"),
            _ => {
                let v = if self.rng.gen_bool(0.5) { x } else { y };
                self.atom1(v)
            }
        }
    }

    /// Quantifier-free formula over the given variables.
    fn qf(&mut self, vars: &[&str], depth: usize) -> String {
        let leaf = |g: &mut Gen| {
            if vars.len() == 1 {
                g.atom1(vars[0])
            } else {
                let (a, b) = (vars[0], vars[1]);
                g.atom2(a, b)
            }
        };
        if depth == 0 || self.rng.gen_bool(0.45) {
            return leaf(self);
        }
        match self.rng.gen_range(0..4) {
            0 => format!("(not {})", self.qf(vars, depth - 1)),
            1 => format!("(or {} {})", self.qf(vars, depth - 1), leaf(self)),
            2 => format!("(and {} {})", self.qf(vars, depth - 1), leaf(self)),
            _ => format!("(implies {} {})", leaf(self), self.qf(vars, depth - 1)),
        }
    }

    /// Counting term with at most the free variable `x`.
    fn count(&mut self, free_x: bool) -> String {
        if free_x {
            format!("(# (y) {})", self.qf(&["x", "y"], 1))
        } else if self.rng.gen_bool(0.7) {
            format!("(# (y) {})", self.qf(&["y"], 1))
        } else {
            format!("(# (y z) {})", self.qf(&["y", "z"], 1))
        }
    }

    fn term(&mut self, free_x: bool) -> String {
        let t = self.count(free_x);
        match self.rng.gen_range(0..5) {
            0 => format!("(+ {t} {})", self.rng.gen_range(1..3)),
            1 => format!("(* 2 {t})"),
            _ => t,
        }
    }

    fn local(&mut self) -> String {
        match self.rng.gen_range(0..9) {
            0 => self.qf(&["x"], 2),
            1 => self.qf(&["x", "y"], 2),
            2 => format!("(ex y {})", self.qf(&["x", "y"], 1)),
            3 => format!("(forall y {})", self.qf(&["x", "y"], 1)),
            4 | 5 => {
                let p = self.pick(UNARY);
                format!("(pred {p} {})", self.term(true))
            }
            6 => {
                let p = self.pick(&["eq", "leq"]);
                let (a, b) = (self.count(true), self.rng.gen_range(0..3));
                if self.rng.gen_bool(0.5) {
                    format!("(pred {p} {a} {b})")
                } else {
                    format!("(pred {p} {b} {a})")
                }
            }
            7 => {
                let p = self.pick(&["eq", "leq"]);
                format!("(pred {p} {} {})", self.count(true), self.count(true))
            }
            _ => {
                let p = self.pick(&["prime", "div2", "geq2"]);
                let c = self.pick(&["eq", "leq"]);
                format!(
                    "(exn %k (and (pred {p} %k) (pred {c} %k {})))",
                    self.count(true)
                )
            }
        }
    }

    fn sentence(&mut self) -> String {
        match self.rng.gen_range(0..8) {
            0 => format!("(ex x {})", self.qf(&["x"], 2)),
            1 => format!("(forall x (ex y {}))", self.qf(&["x", "y"], 1)),
            2 | 3 => {
                let p = self.pick(UNARY);
                format!("(pred {p} {})", self.term(false))
            }
            4 => {
                let q = self.pick(&["ex", "forall"]);
                let p = self.pick(UNARY);
                format!("({q} x (pred {p} (# (y) {})))", self.qf(&["x", "y"], 1))
            }
            5 => {
                let p = self.pick(&["eq", "leq"]);
                format!("(pred {p} {} {})", self.count(false), self.count(false))
            }
            6 => {
                let p = self.pick(&["prime", "div2", "div3"]);
                let c = self.pick(&["eq", "leq"]);
                format!(
                    "(exn %k (and (pred {p} %k) (pred {c} %k {})))",
                    self.count(false)
                )
            }
            _ => format!("(pred exists (# (y) (ex z {})))", self.qf(&["y", "z"], 1)),
        }
    }

    fn formula(&mut self) -> String {
        match self.rng.gen_range(0..10) {
            0..=4 => self.local(),
            5..=7 => self.sentence(),
            8 => format!("(not {})", self.local()),
            _ => {
                let op = self.pick(&["or", "and"]);
                let (a, b) = (self.local(), self.qf(&["x"], 0));
                format!("({op} {a} {b})")
            }
        }
    }
}

/// Whether the compiler handles `e` quickly under the default cap: counting
/// terms with a free variable bind one variable, and formulas with free
/// structure variables have binding rank at most 1.
pub fn feasible(e: &Expr) -> bool {
    let m = metrics(e);
    if m.size > 25 || m.bw > 2 || m.br > 2 || m.nqr > 1 {
        return false;
    }
    if !m.free_struct.is_empty() && m.br > 1 {
        return false;
    }
    counts_ok(e, &BTreeSet::new())
}

fn counts_ok(e: &Expr, bound_outside: &BTreeSet<String>) -> bool {
    match e {
        Expr::Count(ys, body) => {
            let (free, _) = hanfkit::formula::free_vars(e);
            let mut inner = bound_outside.clone();
            inner.extend(ys.iter().cloned());
            (free.is_empty() || ys.len() == 1) && free.len() <= 1 && counts_ok(body, &inner)
        }
        Expr::Exists(y, body) => {
            let mut inner = bound_outside.clone();
            inner.insert(y.clone());
            counts_ok(body, &inner)
        }
        _ => e
            .children()
            .into_iter()
            .all(|c| counts_ok(c, bound_outside)),
    }
}

/// The curated formulas followed by generated ones, `total` in all,
/// deduplicated and deterministic.
pub fn corpus(total: usize) -> Vec<Item> {
    let mut out: Vec<Item> = CURATED.iter().map(|(t, s)| item(t, s)).collect();
    let mut seen: BTreeSet<String> = out.iter().map(|i| i.text.clone()).collect();
    let preds = PredicateCollection::new();
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(0x4a4f),
        unary_rel: false,
    };
    let mut attempts = 0;
    while out.len() < total {
        attempts += 1;
        assert!(
            attempts < 200_000,
            "corpus generator stalled at {}",
            out.len()
        );
        g.unary_rel = g.rng.gen_bool(0.25);
        let sg = if g.unary_rel { SIG_EU } else { SIG_E };
        let text = g.formula();
        let sig = sig(sg);
        let Ok(expr) = parse(&text, &sig, &preds) else {
            continue;
        };
        if !feasible(&expr) {
            continue;
        }
        let text = print(&expr);
        if seen.insert(text.clone()) {
            out.push(Item { text, sig, expr });
        }
    }
    out
}
