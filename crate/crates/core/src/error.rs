use thiserror::Error;

use crate::model::{EntityId, EntityKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid schema: {}", .0.join("; "))]
    InvalidSchema(Vec<String>),
    #[error("rights universe is empty")]
    EmptyRightsUniverse,
    #[error("empty rights set")]
    EmptyRights,
    #[error("unknown right `{0}`")]
    UnknownRight(String),
    #[error("duplicate entity id `{0}`")]
    DuplicateEntity(EntityId),
    #[error("unknown {kind} `{id}`")]
    UnknownEntity { kind: EntityKind, id: EntityId },
    #[error("entity `{entity}` has {found} attribute values, expected {expected}")]
    ArityMismatch {
        entity: EntityId,
        expected: usize,
        found: usize,
    },
    #[error("entity `{entity}`: value `{value}` is not in the domain of family `{family}`")]
    OutOfDomain {
        entity: EntityId,
        family: String,
        value: String,
    },
    #[error("incomparable kinds")]
    IncomparableKinds,
    #[error("no influence; key not comparable")]
    EmptyKey,
    #[error("unknown collision {0}")]
    UnknownCollision(u64),
    #[error("collision {0} already resolved")]
    AlreadyResolved(u64),
    #[error("admitted precedents conflict at ({subject}, {object})")]
    ConflictingInput { subject: EntityId, object: EntityId },
    #[error("unknown cell ({subject}, {object})")]
    UnknownCell { subject: EntityId, object: EntityId },
    #[error("matrices cover different entity sets")]
    EntityMismatch,
}
