//! Dynamic approximate-membership filters under set semantics, and machinery that
//! checks, by exhaustive enumeration at small sizes, why such filters cannot stay
//! small once duplicate insertions or deletions of nonelements are allowed.
//!
//! Layout:
//!
//! * [`sequence`]: `(u, n)`-sequences, dataset traces, operation classes, rewriters.
//! * [`filters`]: seed model, filter states and the built-in dynamic filter models.
//! * [`witness`]: yes-sets, the witness-based transform and the sticky false-positive check.
//! * [`reduction`]: the paired-state static filter built from a dynamic one.
//! * [`bounds`]: exact combinatorics, the static-filter space inequality and the
//!   injective encoding behind it.
//! * [`harness`]: experiments and the verification suite behind the CLI.

pub mod bounds;
pub mod combinatorics;
pub mod dataset;
pub mod filters;
pub mod harness;
pub mod rational;
pub mod reduction;
pub mod sequence;
pub mod witness;

pub use dataset::{Dataset, Elem};
pub use filters::{DynamicFilter, FilterModel, FilterState, ModelKind, Seed, SeedSpace};
pub use sequence::{Op, OpSequence, UniverseParams};
