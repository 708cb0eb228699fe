//! Expressions of first-order logic with counting terms, number variables
//! and numerical predicates: syntax tree, s-expression reader and printer,
//! free variables and the size/rank metrics.

mod expr;
mod metrics;
mod parse;
mod predicates;
mod print;
mod signature;

pub use expr::{Expr, SphereRef};
pub use metrics::{
    basic_count_types, br, bw, count_oc_conditions, free_struct_vars, free_vars, is_hnf,
    is_oc_condition, is_simple_term, locality_radius, metrics, nqr, oc_conditions, size,
    sphere_refs, validate, Metrics,
};
pub use parse::{infer_signature, parse, parse_with, NoSpheres, SphereResolver};
pub use predicates::{builtin_arity, is_prime, Oracle, Predicate, PredicateCollection};
pub use print::print;
pub use signature::Signature;
