use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A finite relational signature. Relations are kept sorted by name so that
/// two signatures with the same symbols compare and hash identically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Signature {
    rels: Vec<(String, usize)>,
}

impl Signature {
    pub fn new<S: Into<String>>(rels: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for (name, arity) in rels {
            let name = name.into();
            if arity == 0 {
                return Err(Error::invalid(format!("relation {name} has arity 0")));
            }
            if !is_relation_name(&name) {
                return Err(Error::invalid(format!("bad relation name {name:?}")));
            }
            if out.iter().any(|(n, _)| *n == name) {
                return Err(Error::invalid(format!("relation {name} declared twice")));
            }
            out.push((name, arity));
        }
        out.sort();
        Ok(Signature { rels: out })
    }

    /// Parses `E/2,U/1`. The empty string is the empty signature.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rels = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, ar) = part
                .split_once('/')
                .ok_or_else(|| Error::invalid(format!("expected NAME/ARITY, got {part:?}")))?;
            let ar: usize = ar
                .parse()
                .map_err(|_| Error::invalid(format!("bad arity in {part:?}")))?;
            rels.push((name.to_string(), ar));
        }
        Signature::new(rels)
    }

    pub fn relations(&self) -> &[(String, usize)] {
        &self.rels
    }

    pub fn len(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.rels.iter().position(|(n, _)| n == name)
    }

    pub fn arity(&self, idx: usize) -> usize {
        self.rels[idx].1
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.rels[idx].0
    }

    pub fn max_arity(&self) -> usize {
        self.rels.iter().map(|r| r.1).max().unwrap_or(0)
    }

    /// Union of two signatures; fails when a shared name has two arities.
    pub fn union(&self, other: &Signature) -> Result<Signature> {
        let mut rels = self.rels.clone();
        for (n, a) in &other.rels {
            match rels.iter().find(|(m, _)| m == n) {
                Some((_, b)) if b != a => {
                    return Err(Error::invalid(format!(
                        "relation {n} used with arities {a} and {b}"
                    )))
                }
                Some(_) => {}
                None => rels.push((n.clone(), *a)),
            }
        }
        Signature::new(rels)
    }

    /// Short stable digest used inside type identifiers.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_string().as_bytes());
        let digest = h.finalize();
        digest[..4].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.rels.iter().map(|(n, a)| format!("{n}/{a}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

pub(crate) const KEYWORDS: &[&str] = &[
    "not", "or", "and", "implies", "ex", "forall", "exn", "foralln", "pred", "sphere",
];

pub(crate) fn is_relation_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}
