//! Discretionary access-matrix construction from administrator precedents.
//!
//! The administrator fixes a few cells of the access matrix explicitly; the
//! remaining cells are filled by analogy with the precedent whose subject or
//! object shares the most significant security attribute value. See
//! [`interpolate`] for the two filling strategies and [`precedent`] for how
//! colliding precedents are handled.

pub mod error;
pub mod interpolate;
pub mod io;
pub mod model;
pub mod order;
pub mod precedent;

pub use error::Error;
pub use interpolate::{
    diff_matrices, explain_cell, influencers, interpolate, partial_interpolate, select_dominant,
    sequential_interpolate, AccessMatrix, AppliedRule, Candidate, CellDiff, CellState, CellSummary, DefaultPolicy,
    Explanation, InfluenceSet, Mode, Provenance, Selection, Side, Source, UndefinedKind, UndefinedReason,
};
pub use io::{
    export_audit, parse_matrix, parse_policy, serialize_matrix, serialize_policy, DocError, DocErrors, MatrixFormat,
    PolicyDocument, PrecedentDecl, Settings,
};
pub use model::{
    canonicalize_entities, coinciding_attributes, compare_keys, validate_schema, AttributeFamily, AttributeSchema,
    CoincidenceKey, Decision, DominanceDepth, EntityId, EntityKind, EntityProfile, KeyOrder, Partition, Polarity,
    RightsSet, Universe,
};
pub use order::{check_order, OrderReport};
pub use precedent::{Admission, Choice, CollisionRecord, CollisionStrategy, PrecedentLog, Resolution, Rule};
