//! The administrator's precedent sequence and collision handling.
//!
//! Two precedents collide when they sit at the same cell and their rights
//! sets overlap, whatever their polarity. A collision is settled by the log's
//! [`CollisionStrategy`]: the newcomer replaces the old entry, is refused, or
//! is held until an administrator picks one of the two.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{Decision, EntityId, EntityKind, Universe};

/// An access rule at one cell, as written by the administrator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub subject: EntityId,
    pub object: EntityId,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Rule {
    pub fn new(subject: &str, object: &str, decision: Decision) -> Self {
        Rule {
            subject: subject.into(),
            object: object.into(),
            decision,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn same_cell(&self, other: &Rule) -> bool {
        self.subject == other.subject && self.object == other.object
    }

    /// Same cell and overlapping rights.
    pub fn conflicts_with(&self, other: &Rule) -> bool {
        self.same_cell(other) && self.decision.rights.overlaps(&other.decision.rights)
    }

    /// `note` if present, otherwise `(S, O, decision)`.
    pub fn label(&self) -> String {
        match &self.note {
            Some(note) => note.clone(),
            None => format!("({}, {}, {})", self.subject, self.object, self.decision),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.object, self.decision)?;
        if let Some(note) = &self.note {
            write!(f, " [{note}]")?;
        }
        Ok(())
    }
}

/// An admitted rule with its admission number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precedent {
    pub seq: u64,
    pub rule: Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionStrategy {
    #[default]
    OverwriteOld,
    RejectNew,
    Interactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Unresolved,
    KeptOld,
    KeptNew,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Choice {
    KeepOld,
    KeepNew,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub id: u64,
    pub old: Precedent,
    pub new: Rule,
    pub detected_at: u64,
    pub resolution: Resolution,
}

/// What happened to a submitted rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Admission {
    Admitted { precedent: Precedent, replaced: Vec<Precedent> },
    Rejected { conflict: Precedent },
    Pending { collision_id: u64, conflict: Precedent },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditKind {
    Admission {
        precedent: Precedent,
    },
    Overwrite {
        precedent: Precedent,
        removed: Vec<Precedent>,
    },
    Rejection {
        candidate: Rule,
        conflict: Precedent,
    },
    Collision {
        collision_id: u64,
        old: Precedent,
        new: Rule,
        resolution: Resolution,
    },
    Resolution {
        collision_id: u64,
        resolution: Resolution,
        admitted: Option<Precedent>,
        removed: Vec<Precedent>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub event: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: AuditKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecedentLog {
    strategy: CollisionStrategy,
    entries: Vec<Precedent>,
    collisions: Vec<CollisionRecord>,
    audit: Vec<AuditEvent>,
    next_seq: u64,
}

impl PrecedentLog {
    pub fn new(strategy: CollisionStrategy) -> Self {
        PrecedentLog {
            strategy,
            entries: Vec::new(),
            collisions: Vec::new(),
            audit: Vec::new(),
            next_seq: 1,
        }
    }

    pub fn strategy(&self) -> CollisionStrategy {
        self.strategy
    }

    /// Admitted entries in admission order.
    pub fn admitted(&self) -> &[Precedent] {
        &self.entries
    }

    pub fn admitted_rules(&self) -> Vec<Rule> {
        self.entries.iter().map(|p| p.rule.clone()).collect()
    }

    pub fn collisions(&self) -> &[CollisionRecord] {
        &self.collisions
    }

    pub fn pending(&self) -> impl Iterator<Item = &CollisionRecord> {
        self.collisions.iter().filter(|c| c.resolution == Resolution::Unresolved)
    }

    pub fn audit(&self) -> &[AuditEvent] {
        &self.audit
    }

    /// Earliest admitted entry colliding with `candidate`.
    pub fn detect_conflict(&self, candidate: &Rule) -> Option<&Precedent> {
        self.entries.iter().find(|p| p.rule.conflicts_with(candidate))
    }

    /// Resolves ids to class representatives and checks rights against the universe.
    pub fn canonical_rule(universe: &Universe, rule: &Rule) -> Result<Rule, Error> {
        let subject = universe
            .representative(EntityKind::Subject, &rule.subject)
            .ok_or_else(|| Error::UnknownEntity {
                kind: EntityKind::Subject,
                id: rule.subject.clone(),
            })?;
        let object = universe
            .representative(EntityKind::Object, &rule.object)
            .ok_or_else(|| Error::UnknownEntity {
                kind: EntityKind::Object,
                id: rule.object.clone(),
            })?;
        universe.check_rights(&rule.decision.rights)?;
        Ok(Rule {
            subject: subject.clone(),
            object: object.clone(),
            decision: rule.decision.clone(),
            note: rule.note.clone(),
        })
    }

    /// Submits a rule under the log's strategy. An `Err` means the rule
    /// itself is invalid for this universe; collisions are reported through
    /// the returned [`Admission`].
    pub fn apply(&mut self, universe: &Universe, candidate: &Rule) -> Result<Admission, Error> {
        let candidate = Self::canonical_rule(universe, candidate)?;
        let Some(conflict) = self.detect_conflict(&candidate).cloned() else {
            let precedent = self.admit(candidate);
            self.record(AuditKind::Admission {
                precedent: precedent.clone(),
            });
            return Ok(Admission::Admitted {
                precedent,
                replaced: Vec::new(),
            });
        };
        match self.strategy {
            CollisionStrategy::OverwriteOld => {
                let removed = self.remove_overlapping(&candidate);
                let precedent = self.admit(candidate);
                self.record(AuditKind::Overwrite {
                    precedent: precedent.clone(),
                    removed: removed.clone(),
                });
                Ok(Admission::Admitted {
                    precedent,
                    replaced: removed,
                })
            }
            CollisionStrategy::RejectNew => {
                self.record(AuditKind::Rejection {
                    candidate,
                    conflict: conflict.clone(),
                });
                Ok(Admission::Rejected { conflict })
            }
            CollisionStrategy::Interactive => {
                let id = self.collisions.len() as u64 + 1;
                let detected_at = self.audit.len() as u64 + 1;
                let record = CollisionRecord {
                    id,
                    old: conflict.clone(),
                    new: candidate,
                    detected_at,
                    resolution: Resolution::Unresolved,
                };
                self.record(AuditKind::Collision {
                    collision_id: id,
                    old: record.old.clone(),
                    new: record.new.clone(),
                    resolution: Resolution::Unresolved,
                });
                self.collisions.push(record);
                Ok(Admission::Pending {
                    collision_id: id,
                    conflict,
                })
            }
        }
    }

    /// Settles a pending collision. `KeepNew` removes every admitted entry
    /// overlapping the held rule at the time of resolution, then admits it.
    pub fn resolve(&mut self, collision_id: u64, choice: Choice) -> Result<Option<Precedent>, Error> {
        let at = self
            .collisions
            .iter()
            .position(|c| c.id == collision_id)
            .ok_or(Error::UnknownCollision(collision_id))?;
        if self.collisions[at].resolution != Resolution::Unresolved {
            return Err(Error::AlreadyResolved(collision_id));
        }
        let (resolution, admitted, removed) = match choice {
            Choice::KeepOld => (Resolution::KeptOld, None, Vec::new()),
            Choice::KeepNew => {
                let candidate = self.collisions[at].new.clone();
                let removed = self.remove_overlapping(&candidate);
                (Resolution::KeptNew, Some(self.admit(candidate)), removed)
            }
        };
        self.collisions[at].resolution = resolution;
        self.record(AuditKind::Resolution {
            collision_id,
            resolution,
            admitted: admitted.clone(),
            removed,
        });
        Ok(admitted)
    }

    fn admit(&mut self, rule: Rule) -> Precedent {
        let precedent = Precedent {
            seq: self.next_seq,
            rule,
        };
        self.next_seq += 1;
        self.entries.push(precedent.clone());
        precedent
    }

    fn remove_overlapping(&mut self, candidate: &Rule) -> Vec<Precedent> {
        let (removed, kept) = std::mem::take(&mut self.entries)
            .into_iter()
            .partition(|p| p.rule.conflicts_with(candidate));
        self.entries = kept;
        removed
    }

    fn record(&mut self, kind: AuditKind) {
        let event = self.audit.len() as u64 + 1;
        self.audit.push(AuditEvent {
            event,
            at: Utc::now(),
            kind,
        });
    }
}

/// True when no two rules sit at the same cell with overlapping rights.
pub fn is_conflict_free<'a>(rules: impl IntoIterator<Item = &'a Rule>) -> bool {
    let rules: Vec<&Rule> = rules.into_iter().collect();
    rules
        .iter()
        .enumerate()
        .all(|(i, a)| rules[i + 1..].iter().all(|b| !a.conflicts_with(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttributeFamily, AttributeSchema, EntityProfile};

    fn universe(rights: &[&str]) -> Universe {
        let schema = AttributeSchema {
            subject_families: vec![AttributeFamily::new("A1", ["x", "y"])],
            object_families: vec![AttributeFamily::new("B1", ["x", "y", "z"])],
        };
        Universe::new(
            schema,
            rights.iter().map(|r| r.to_string()),
            &[
                EntityProfile::subject("S1", ["x"]),
                EntityProfile::subject("S2", ["y"]),
                EntityProfile::object("O1", ["x"]),
                EntityProfile::object("O3", ["z"]),
            ],
        )
        .unwrap()
    }

    fn allow(s: &str, o: &str) -> Rule {
        Rule::new(s, o, Decision::allow(["all"]).unwrap())
    }

    fn deny(s: &str, o: &str) -> Rule {
        Rule::new(s, o, Decision::deny(["all"]).unwrap())
    }

    #[test]
    fn opposite_polarity_same_cell_conflicts() {
        let u = universe(&["all"]);
        let mut log = PrecedentLog::new(CollisionStrategy::RejectNew);
        log.apply(&u, &allow("S1", "O1")).unwrap();
        assert_eq!(log.detect_conflict(&deny("S1", "O1")).unwrap().seq, 1);
        assert!(log.detect_conflict(&deny("S1", "O3")).is_none());
    }

    #[test]
    fn disjoint_rights_do_not_conflict() {
        let u = universe(&["read", "write"]);
        let mut log = PrecedentLog::new(CollisionStrategy::RejectNew);
        log.apply(&u, &Rule::new("S1", "O1", Decision::allow(["read"]).unwrap()))
            .unwrap();
        let write = Rule::new("S1", "O1", Decision::allow(["write"]).unwrap());
        assert!(log.detect_conflict(&write).is_none());
        assert!(matches!(log.apply(&u, &write).unwrap(), Admission::Admitted { .. }));
        assert_eq!(log.admitted().len(), 2);
    }

    #[test]
    fn duplicate_is_a_conflict() {
        let u = universe(&["all"]);
        let mut log = PrecedentLog::new(CollisionStrategy::RejectNew);
        log.apply(&u, &allow("S1", "O1")).unwrap();
        assert!(matches!(log.apply(&u, &allow("S1", "O1")).unwrap(), Admission::Rejected { .. }));
    }

    #[test]
    fn overwrite_old_replaces() {
        let u = universe(&["all"]);
        let mut log = PrecedentLog::new(CollisionStrategy::OverwriteOld);
        log.apply(&u, &allow("S1", "O1")).unwrap();
        let outcome = log.apply(&u, &deny("S1", "O1")).unwrap();
        assert!(matches!(outcome, Admission::Admitted { ref replaced, .. } if replaced.len() == 1));
        assert_eq!(log.admitted_rules(), vec![deny("S1", "O1")]);
        let kinds: Vec<_> = log.audit().iter().map(|e| &e.kind).collect();
        assert!(matches!(kinds[..], [AuditKind::Admission { .. }, AuditKind::Overwrite { .. }]));
    }

    #[test]
    fn overwrite_removes_every_overlap() {
        let u = universe(&["read", "write"]);
        let mut log = PrecedentLog::new(CollisionStrategy::OverwriteOld);
        log.apply(&u, &Rule::new("S1", "O1", Decision::allow(["read"]).unwrap()))
            .unwrap();
        log.apply(&u, &Rule::new("S1", "O1", Decision::deny(["write"]).unwrap()))
            .unwrap();
        log.apply(&u, &Rule::new("S1", "O1", Decision::deny(["read", "write"]).unwrap()))
            .unwrap();
        assert_eq!(log.admitted().len(), 1);
        assert!(is_conflict_free(log.admitted().iter().map(|p| &p.rule)));
    }

    #[test]
    fn reject_new_keeps_old() {
        let u = universe(&["all"]);
        let mut log = PrecedentLog::new(CollisionStrategy::RejectNew);
        log.apply(&u, &allow("S1", "O1")).unwrap();
        assert!(matches!(log.apply(&u, &deny("S1", "O1")).unwrap(), Admission::Rejected { .. }));
        assert_eq!(log.admitted_rules(), vec![allow("S1", "O1")]);
    }

    #[test]
    fn interactive_holds_then_resolves() {
        let u = universe(&["all"]);
        let mut log = PrecedentLog::new(CollisionStrategy::Interactive);
        log.apply(&u, &allow("S1", "O1")).unwrap();
        let Admission::Pending { collision_id, .. } = log.apply(&u, &deny("S1", "O1")).unwrap() else {
            panic!("expected pending");
        };
        assert_eq!(log.admitted_rules(), vec![allow("S1", "O1")]);
        assert_eq!(log.pending().count(), 1);

        let mut keep_new = log.clone();
        keep_new.resolve(collision_id, Choice::KeepNew).unwrap();
        assert_eq!(keep_new.admitted_rules(), vec![deny("S1", "O1")]);

        log.resolve(collision_id, Choice::KeepOld).unwrap();
        assert_eq!(log.admitted_rules(), vec![allow("S1", "O1")]);
        assert_eq!(log.resolve(collision_id, Choice::KeepNew), Err(Error::AlreadyResolved(collision_id)));
        assert_eq!(log.resolve(99, Choice::KeepNew), Err(Error::UnknownCollision(99)));
    }

    #[test]
    fn unknown_entity_rejected() {
        let u = universe(&["all"]);
        let mut log = PrecedentLog::new(CollisionStrategy::OverwriteOld);
        let err = log.apply(&u, &allow("S9", "O1")).unwrap_err();
        assert!(err.to_string().contains("unknown subject"));
        let err = log
            .apply(&u, &Rule::new("S1", "O1", Decision::allow(["fly"]).unwrap()))
            .unwrap_err();
        assert_eq!(err, Error::UnknownRight("fly".into()));
        assert!(log.admitted().is_empty());
    }
}
