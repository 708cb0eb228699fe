//! Catalogs of representative d-bounded r-types with k centres, type
//! identification, and expansion of sphere atoms into plain first-order
//! formulas.

mod expand;
mod generate;

use std::collections::HashMap;
use std::fmt::Write;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::formula::{Signature, SphereRef, SphereResolver};
use crate::structures::{nu, CanonCode, SphereType};

pub use expand::{expand_sphere_atoms, expand_sphere_formula};

/// Default bound on k·ν_d(r), the largest universe a cataloged type may have.
pub const DEFAULT_CAP: usize = 8;
/// Default bound on the number of entries of one catalog.
pub const DEFAULT_MAX_ENTRIES: usize = 400_000;

/// The list Types(r,d,k): one representative per isomorphism class.
pub struct TypeCatalog {
    pub sig: Arc<Signature>,
    pub d: usize,
    pub r: usize,
    pub k: usize,
    /// Set for truncated catalogs that only hold types with at most this many elements.
    pub max_universe: Option<usize>,
    refs: Vec<SphereRef>,
    index: HashMap<CanonCode, usize>,
}

impl TypeCatalog {
    fn build(
        sig: &Signature,
        d: usize,
        r: usize,
        k: usize,
        max_n: usize,
        bounded: bool,
        max_entries: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("types need at least one centre"));
        }
        let sig = Arc::new(sig.clone());
        let found = generate::enumerate_types(&sig, d, r, k, max_n, max_entries)?;
        let hash = sig.hash_hex();
        let suffix = if bounded {
            format!("@{max_n}")
        } else {
            String::new()
        };
        let mut refs = Vec::with_capacity(found.len());
        let mut index = HashMap::with_capacity(found.len());
        for (i, (code, ty)) in found.into_iter().enumerate() {
            let id: Arc<str> = format!("t:{hash}:{d}:{r}:{k}:{i}{suffix}").into();
            index.insert(code, i);
            refs.push(SphereRef {
                id,
                ty: Arc::new(ty),
            });
        }
        Ok(TypeCatalog {
            sig,
            d,
            r,
            k,
            max_universe: bounded.then_some(max_n),
            refs,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn entry(&self, i: usize) -> &SphereType {
        &self.refs[i].ty
    }

    pub fn sphere_ref(&self, i: usize) -> &SphereRef {
        &self.refs[i]
    }

    pub fn refs(&self) -> &[SphereRef] {
        &self.refs
    }

    pub fn type_id(&self, i: usize) -> &str {
        &self.refs[i].id
    }

    /// Index of the entry with this canonical code, if any.
    pub fn lookup(&self, code: &CanonCode) -> Option<usize> {
        self.index.get(code).copied()
    }

    /// The unique i with τ ≅ τ_i.
    pub fn identify(&self, t: &SphereType) -> Result<usize> {
        if t.base.sig().as_ref() != self.sig.as_ref() || t.centres.len() != self.k {
            return Err(Error::invalid(
                "type does not match the catalog signature or centre count",
            ));
        }
        self.lookup(t.code()).ok_or_else(|| {
            Error::invalid(format!(
                "no catalog entry matches: the sphere has degree {} and {} elements (catalog d={}, r={})",
                t.degree(),
                t.size(),
                self.d,
                self.r
            ))
        })
    }

    /// Human-readable listing: one line per entry with its id and code.
    pub fn listing(&self) -> String {
        let mut s = String::new();
        for r in &self.refs {
            let t = &r.ty;
            let _ = write!(s, "{} size={} centres={:?}", r.id, t.size(), t.centres);
            for (j, (name, _)) in self.sig.relations().iter().enumerate() {
                let _ = write!(s, " {name}={:?}", t.base.tuples(j));
            }
            let _ = writeln!(s, " code={:?}", t.code().0);
        }
        s
    }
}

impl std::fmt::Debug for TypeCatalog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "TypeCatalog({}, d={}, r={}, k={}, {} entries)",
            self.sig,
            self.d,
            self.r,
            self.k,
            self.len()
        )
    }
}

/// Types(r,d,k) with the default cap.
pub fn types_list(sig: &Signature, d: usize, r: usize, k: usize) -> Result<TypeCatalog> {
    types_list_capped(sig, d, r, k, DEFAULT_CAP)
}

/// Types(r,d,k), failing fast when k·ν_d(r) exceeds `cap`.
pub fn types_list_capped(
    sig: &Signature,
    d: usize,
    r: usize,
    k: usize,
    cap: usize,
) -> Result<TypeCatalog> {
    let max_n = k.saturating_mul(nu(d, r));
    if max_n > cap {
        return Err(Error::cap(format!(
            "Types(r={r}, d={d}, k={k}) may contain universes of {max_n} elements, above the cap {cap}"
        )));
    }
    TypeCatalog::build(sig, d, r, k, max_n, false, DEFAULT_MAX_ENTRIES)
}

/// The types of Types(r,d,k) whose universe has at most `max_universe`
/// elements. Complete for identifying spheres of structures of that size.
pub fn types_list_bounded(
    sig: &Signature,
    d: usize,
    r: usize,
    k: usize,
    max_universe: usize,
) -> Result<TypeCatalog> {
    let full = k.saturating_mul(nu(d, r));
    let max_n = max_universe.min(full);
    TypeCatalog::build(sig, d, r, k, max_n, max_n < full, DEFAULT_MAX_ENTRIES)
}

type Key = (Signature, usize, usize, usize);

/// Shared, lazily filled cache of catalogs.
pub struct CatalogStore {
    cap: usize,
    max_entries: usize,
    map: Mutex<HashMap<Key, Arc<TypeCatalog>>>,
}

impl CatalogStore {
    pub fn new(cap: usize) -> Self {
        CatalogStore {
            cap,
            max_entries: DEFAULT_MAX_ENTRIES,
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_max_entries(mut self, max_entries: usize) -> Self {
        self.max_entries = max_entries;
        self
    }

    /// Process-wide store. Its cap is read once from `HANFKIT_CAP` when set.
    pub fn global() -> &'static CatalogStore {
        static GLOBAL: OnceLock<CatalogStore> = OnceLock::new();
        GLOBAL.get_or_init(|| CatalogStore::new(cap_from_env().unwrap_or(DEFAULT_CAP)))
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn get(&self, sig: &Signature, d: usize, r: usize, k: usize) -> Result<Arc<TypeCatalog>> {
        let key = (sig.clone(), d, r, k);
        if let Some(c) = self.map.lock().expect("catalog lock").get(&key) {
            return Ok(c.clone());
        }
        let max_n = k.saturating_mul(nu(d, r));
        if max_n > self.cap {
            return Err(Error::cap(format!(
                "Types(r={r}, d={d}, k={k}) may contain universes of {max_n} elements, above the cap {}",
                self.cap
            )));
        }
        let cat = Arc::new(TypeCatalog::build(
            sig,
            d,
            r,
            k,
            max_n,
            false,
            self.max_entries,
        )?);
        self.map
            .lock()
            .expect("catalog lock")
            .entry(key)
            .or_insert(cat.clone());
        Ok(cat)
    }

    /// Resolver for `(sphere TYPEID ...)` atoms over `sig`.
    pub fn resolver<'a>(&'a self, sig: &'a Signature) -> StoreResolver<'a> {
        StoreResolver { store: self, sig }
    }
}

/// Reads `HANFKIT_CAP`; `None` when unset, an error value when malformed.
pub fn cap_from_env() -> Option<usize> {
    std::env::var("HANFKIT_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&c| c > 0)
}

pub struct StoreResolver<'a> {
    store: &'a CatalogStore,
    sig: &'a Signature,
}

/// Splits `t:<hash>:<d>:<r>:<k>:<index>`.
pub fn parse_type_id(id: &str) -> Result<(String, usize, usize, usize, usize)> {
    let parts: Vec<&str> = id.split(':').collect();
    let bad = || Error::invalid(format!("malformed type id {id:?}"));
    if parts.len() != 6 || parts[0] != "t" {
        return Err(bad());
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
    Ok((
        parts[1].to_string(),
        num(parts[2])?,
        num(parts[3])?,
        num(parts[4])?,
        num(parts[5])?,
    ))
}

impl SphereResolver for StoreResolver<'_> {
    fn resolve(&self, id: &str) -> Result<SphereRef> {
        let (hash, d, r, k, i) = parse_type_id(id)?;
        if hash != self.sig.hash_hex() {
            return Err(Error::invalid(format!(
                "type id {id} belongs to another signature than {}",
                self.sig
            )));
        }
        let cat = self.store.get(self.sig, d, r, k)?;
        if i >= cat.len() {
            return Err(Error::invalid(format!(
                "type id {id}: catalog has only {} entries",
                cat.len()
            )));
        }
        Ok(cat.sphere_ref(i).clone())
    }
}
