//! Compile first-order formulas with counting terms and numerical
//! predicates into Hanf normal form over bounded-degree structures, and use
//! the compiled form for model checking, arithmetic emission and dynamic
//! query answering.
//!
//! ```
//! use hanfkit::formula::{parse, metrics, PredicateCollection, Signature};
//!
//! let sig = Signature::parse("E/2").unwrap();
//! let phi = parse("(ex x (pred prime (# (y) (E x y))))", &sig, &PredicateCollection::new()).unwrap();
//! let m = metrics(&phi);
//! assert_eq!((m.nqr, m.br, m.bw, m.size), (0, 2, 1, 16));
//! ```

pub mod dyndb;
pub mod error;
pub mod evalsem;
pub mod formula;
pub mod hnf;
pub mod modelcheck;
pub mod richness;
pub mod structures;
pub mod typecat;

pub use error::{Error, Result};
pub use num_bigint::BigInt;
