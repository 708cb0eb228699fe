use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Oracle = Arc<dyn Fn(&[BigInt]) -> Result<bool> + Send + Sync>;

/// A named numerical predicate with a membership oracle.
#[derive(Clone)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
    oracle: Oracle,
}

impl Predicate {
    pub fn new(name: impl Into<String>, arity: usize, oracle: Oracle) -> Self {
        Predicate {
            name: name.into(),
            arity,
            oracle,
        }
    }

    pub fn holds(&self, args: &[BigInt]) -> Result<bool> {
        if args.len() != self.arity {
            return Err(Error::invalid(format!(
                "predicate {} expects {} arguments, got {}",
                self.name,
                self.arity,
                args.len()
            )));
        }
        (self.oracle)(args)
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// Built-in predicates are resolved by name on demand (`div7`, `geq12`,
/// `up:01$1`, ...); user predicates are registered explicitly and shadow
/// nothing: registering a built-in name is rejected.
#[derive(Clone, Debug, Default)]
pub struct PredicateCollection {
    custom: BTreeMap<String, Predicate>,
}

impl PredicateCollection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, p: Predicate) -> Result<()> {
        if p.arity == 0 {
            return Err(Error::invalid(format!(
                "predicate {} needs positive arity",
                p.name
            )));
        }
        if builtin_arity(&p.name).is_some() {
            return Err(Error::invalid(format!(
                "{} is a built-in predicate",
                p.name
            )));
        }
        self.custom.insert(p.name.clone(), p);
        Ok(())
    }

    /// Registers a finite or computable unary set given as a closure.
    pub fn register_set(
        &mut self,
        name: &str,
        member: impl Fn(&BigInt) -> bool + Send + Sync + 'static,
    ) -> Result<()> {
        self.register(Predicate::new(
            name,
            1,
            Arc::new(move |a: &[BigInt]| Ok(member(&a[0]))),
        ))
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        builtin_arity(name).or_else(|| self.custom.get(name).map(|p| p.arity))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.arity(name).is_some()
    }

    pub fn holds(&self, name: &str, args: &[BigInt]) -> Result<bool> {
        if let Some(ar) = builtin_arity(name) {
            if args.len() != ar {
                return Err(Error::invalid(format!(
                    "predicate {name} expects {ar} arguments"
                )));
            }
            return builtin_holds(name, args);
        }
        match self.custom.get(name) {
            Some(p) => p.holds(args),
            None => Err(Error::invalid(format!("unknown predicate {name}"))),
        }
    }

    pub fn custom_names(&self) -> impl Iterator<Item = &str> {
        self.custom.keys().map(String::as_str)
    }
}

fn parse_suffix(name: &str, prefix: &str) -> Option<u64> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) || rest.starts_with('0') {
        return None;
    }
    rest.parse().ok().filter(|&v| v >= 1)
}

/// Splits `up:<u>$<v>` into its two words; v must be non-empty.
fn parse_up(name: &str) -> Option<(&str, &str)> {
    let rest = name.strip_prefix("up:")?;
    let (u, v) = rest.split_once('$')?;
    let bits = |w: &str| w.bytes().all(|b| b == b'0' || b == b'1');
    (bits(u) && bits(v) && !v.is_empty()).then_some((u, v))
}

pub fn builtin_arity(name: &str) -> Option<usize> {
    match name {
        "exists" | "prime" => Some(1),
        "eq" | "leq" => Some(2),
        "add" | "mul" => Some(3),
        _ if parse_suffix(name, "div").is_some() => Some(1),
        _ if parse_suffix(name, "geq").is_some() => Some(1),
        _ if parse_up(name).is_some() => Some(1),
        _ => None,
    }
}

fn builtin_holds(name: &str, a: &[BigInt]) -> Result<bool> {
    Ok(match name {
        "exists" => a[0].is_positive(),
        "prime" => is_prime(&a[0])?,
        "eq" => a[0] == a[1],
        "leq" => a[0] <= a[1],
        "add" => &a[0] + &a[1] == a[2],
        "mul" => &a[0] * &a[1] == a[2],
        _ => {
            if let Some(p) = parse_suffix(name, "div") {
                a[0].is_multiple_of(&BigInt::from(p))
            } else if let Some(k) = parse_suffix(name, "geq") {
                a[0] >= BigInt::from(k)
            } else if let Some((u, v)) = parse_up(name) {
                up_member(u, v, &a[0])
            } else {
                unreachable!("builtin_arity and builtin_holds disagree on {name}")
            }
        }
    })
}

fn up_member(u: &str, v: &str, n: &BigInt) -> bool {
    if n.is_negative() {
        return false;
    }
    let (u, v) = (u.as_bytes(), v.as_bytes());
    if let Some(i) = n.to_usize().filter(|&i| i < u.len()) {
        return u[i] == b'1';
    }
    let off = (n - BigInt::from(u.len())).mod_floor(&BigInt::from(v.len()));
    v[off.to_usize().expect("offset below period")] == b'1'
}

/// Deterministic primality for values that fit in 64 bits.
pub fn is_prime(n: &BigInt) -> Result<bool> {
    if n.is_negative() || n.is_zero() {
        return Ok(false);
    }
    let n = n
        .to_u64()
        .ok_or_else(|| Error::Oracle(format!("primality of {n} is outside the supported range")))?;
    Ok(is_prime_u64(n))
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mul(r, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        r
    };
    let (mut d, mut s) = (n - 1, 0);
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn holds(name: &str, args: &[i64]) -> bool {
        let args: Vec<BigInt> = args.iter().map(|&i| BigInt::from(i)).collect();
        PredicateCollection::new().holds(name, &args).unwrap()
    }

    #[test]
    fn arithmetic_builtins() {
        assert!(!holds("exists", &[0]));
        assert!(holds("exists", &[3]));
        assert!(!holds("exists", &[-1]));
        assert!(holds("eq", &[2, 2]));
        assert!(holds("leq", &[-2, 2]));
        assert!(!holds("leq", &[3, 2]));
        assert!(holds("add", &[2, 3, 5]));
        assert!(holds("mul", &[-2, 3, -6]));
    }

    #[test]
    fn divisibility_is_over_integers() {
        assert!(holds("div3", &[0]));
        assert!(holds("div3", &[-6]));
        assert!(!holds("div3", &[4]));
        assert!(holds("div1", &[7]));
        assert!(builtin_arity("div0").is_none());
        assert!(builtin_arity("div03").is_none());
    }

    #[test]
    fn counting_quantifier_sets() {
        assert!(!holds("geq2", &[1]));
        assert!(holds("geq2", &[2]));
        assert!(holds("geq2", &[9]));
    }

    #[test]
    fn ultimately_periodic_word() {
        // u = 10, v = 01: positions 0,3,5,7,... are members
        let members: Vec<i64> = (0..10).filter(|&i| holds("up:10$01", &[i])).collect();
        assert_eq!(members, vec![0, 3, 5, 7, 9]);
        assert!(!holds("up:10$01", &[-1]));
        // empty prefix
        let evens: Vec<i64> = (0..6).filter(|&i| holds("up:$10", &[i])).collect();
        assert_eq!(evens, vec![0, 2, 4]);
        assert!(builtin_arity("up:1$").is_none());
    }

    #[test]
    fn primality_matches_trial_division() {
        let trial = |n: u64| n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
        for n in 0..2000u64 {
            assert_eq!(is_prime_u64(n), trial(n), "n = {n}");
        }
        assert!(is_prime_u64(1_000_000_007));
        assert!(!is_prime_u64(3_215_031_751)); // strong pseudoprime to bases 2,3,5,7
        assert!(is_prime(&(BigInt::from(1) << 80)).is_err());
    }

    #[test]
    fn custom_predicates() {
        let mut pc = PredicateCollection::new();
        pc.register_set("square", |n| {
            let n = n.to_i64().unwrap_or(-1);
            n >= 0 && (0..=n).any(|k| k * k == n)
        })
        .unwrap();
        assert!(pc.holds("square", &[BigInt::from(9)]).unwrap());
        assert!(pc.register_set("prime", |_| true).is_err());
        assert!(pc.holds("nope", &[BigInt::from(1)]).is_err());
    }
}
