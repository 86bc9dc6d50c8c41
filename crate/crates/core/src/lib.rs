//! Context-aware document recommendation with risk-driven exploration.
//!
//! The crate models user situations over three concept taxonomies, stores
//! per-situation document statistics in a case base, estimates how risky a
//! situation is, and chooses how much to explore accordingly.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod ontology;
pub mod policies;
pub mod risk;
pub mod simenv;
pub mod situations;

pub use error::{Error, Result};
pub use ontology::{ConceptId, Dimension, Ontology, Taxonomy};
pub use policies::{Policy, PolicySpec, Slate};
pub use risk::{RiskAssessment, RiskConfig, RiskModel, RiskWeights};
pub use situations::{Case, CaseBase, DocumentId, PrefEntry, Situation, UserPreferences};
