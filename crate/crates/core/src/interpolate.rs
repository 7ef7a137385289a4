//! Access-matrix interpolation.
//!
//! Every cell not fixed by a precedent is filled by analogy with a dominant
//! source. A precedent influences a cell only from the cell's own row (when
//! the objects share a value in some family) or its own column (when the
//! subjects share a value). Row influencers always outrank column ones; within
//! a side, the candidate whose coincidence key is most significant wins.
//!
//! Partial mode stops there. Sequential mode runs the row pass first and lets
//! the cells it filled act as extra column sources for a single column pass.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{
    coinciding_attributes, compare_non_empty, CoincidenceKey, Decision, DominanceDepth, EntityId, EntityKind,
    EntityProfile, KeyOrder, Polarity, RightsSet, Universe,
};
use crate::precedent::{is_conflict_free, PrecedentLog, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Partial,
    Sequential,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Partial => f.write_str("partial"),
            Mode::Sequential => f.write_str("sequential"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "partial" => Ok(Mode::Partial),
            "sequential" => Ok(Mode::Sequential),
            other => Err(format!("unknown mode `{other}` (expected partial or sequential)")),
        }
    }
}

/// What an undefined cell means at enforcement time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultPolicy {
    #[default]
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Row,
    Column,
}

/// Something a cell can be filled from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Source {
    Precedent {
        rule: Rule,
    },
    /// A cell filled by the sequential row pass, acting as a column source.
    Derived {
        subject: EntityId,
        object: EntityId,
        decision: Decision,
        origin: Rule,
    },
}

impl Source {
    pub fn decision(&self) -> &Decision {
        match self {
            Source::Precedent { rule } => &rule.decision,
            Source::Derived { decision, .. } => decision,
        }
    }

    pub fn is_precedent(&self) -> bool {
        matches!(self, Source::Precedent { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Source::Precedent { rule } => rule.label(),
            Source::Derived {
                subject, object, origin, ..
            } => format!("derived ({subject}, {object}) from {}", origin.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub source: Source,
    pub key: CoincidenceKey,
    pub side: Side,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceSet {
    pub row: Vec<Candidate>,
    pub column: Vec<Candidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppliedRule {
    Row,
    Column,
    ColumnViaDerived,
}

impl fmt::Display for AppliedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppliedRule::Row => f.write_str("row"),
            AppliedRule::Column => f.write_str("column"),
            AppliedRule::ColumnViaDerived => f.write_str("column-via-derived"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Source,
    pub key: CoincidenceKey,
    pub applied: AppliedRule,
    /// Several candidates tied on the key but all carried this decision.
    pub tie_consistent: bool,
    pub defeated: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum UndefinedReason {
    NoInfluence,
    AmbiguousDominance { candidates: Vec<Candidate> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CellState {
    Explicit { rules: Vec<Rule> },
    Implicit { decision: Decision, provenance: Provenance },
    Undefined { reason: UndefinedReason },
}

impl CellState {
    pub fn summary(&self) -> CellSummary {
        match self {
            CellState::Explicit { rules } => CellSummary::Explicit {
                decisions: rules.iter().map(|r| r.decision.clone()).collect(),
            },
            CellState::Implicit { decision, provenance } => CellSummary::Implicit {
                decision: decision.clone(),
                rule: provenance.applied,
            },
            CellState::Undefined { reason } => CellSummary::Undefined {
                reason: match reason {
                    UndefinedReason::NoInfluence => UndefinedKind::NoInfluence,
                    UndefinedReason::AmbiguousDominance { .. } => UndefinedKind::Ambiguous,
                },
            },
        }
    }

    pub fn is_undefined(&self) -> bool {
        matches!(self, CellState::Undefined { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedKind {
    NoInfluence,
    Ambiguous,
}

/// A cell reduced to its state class and decision, without provenance detail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CellSummary {
    Explicit { decisions: Vec<Decision> },
    Implicit { decision: Decision, rule: AppliedRule },
    Undefined { reason: UndefinedKind },
}

impl fmt::Display for CellSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellSummary::Explicit { decisions } => {
                f.write_str("[")?;
                for (i, d) in decisions.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{d}")?;
                }
                f.write_str("]")
            }
            CellSummary::Implicit { decision, rule } => write!(f, "{decision} ({rule})"),
            CellSummary::Undefined { reason: UndefinedKind::NoInfluence } => f.write_str("? (no influence)"),
            CellSummary::Undefined { reason: UndefinedKind::Ambiguous } => f.write_str("? (ambiguous)"),
        }
    }
}

/// Counts of cells per state class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCounts {
    pub explicit: usize,
    pub implicit: usize,
    pub derived: usize,
    pub undefined: usize,
}

impl fmt::Display for MatrixCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} explicit, {} implicit ({} derived), {} undefined",
            self.explicit, self.implicit, self.derived, self.undefined
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessMatrix {
    pub mode: Mode,
    pub dominance_depth: DominanceDepth,
    pub default_policy: DefaultPolicy,
    pub rights: Vec<String>,
    pub subject_families: Vec<String>,
    pub object_families: Vec<String>,
    pub subjects: Vec<EntityId>,
    pub objects: Vec<EntityId>,
    /// The admitted precedents the matrix was computed from, in canonical order.
    pub precedents: Vec<Rule>,
    /// One row per subject, one entry per object.
    pub cells: Vec<Vec<CellState>>,
}

impl AccessMatrix {
    pub fn position(&self, subject: &EntityId, object: &EntityId) -> Option<(usize, usize)> {
        let i = self.subjects.iter().position(|s| s == subject)?;
        let j = self.objects.iter().position(|o| o == object)?;
        Some((i, j))
    }

    pub fn cell(&self, subject: &str, object: &str) -> Option<&CellState> {
        let (i, j) = self.position(&subject.into(), &object.into())?;
        Some(&self.cells[i][j])
    }

    /// Filled by the sequential row pass (and therefore a column source).
    pub fn is_derived_at(&self, i: usize, j: usize) -> bool {
        self.mode == Mode::Sequential
            && matches!(
                &self.cells[i][j],
                CellState::Implicit { provenance, .. } if provenance.applied == AppliedRule::Row
            )
    }

    /// The decisions enforced at a cell; undefined cells deny every right.
    pub fn effective_at(&self, i: usize, j: usize) -> Vec<Decision> {
        match &self.cells[i][j] {
            CellState::Explicit { rules } => rules.iter().map(|r| r.decision.clone()).collect(),
            CellState::Implicit { decision, .. } => vec![decision.clone()],
            CellState::Undefined { .. } => match self.default_policy {
                DefaultPolicy::Deny => vec![Decision::new(
                    Polarity::Deny,
                    RightsSet::new(self.rights.iter().cloned()).expect("rights universe is non-empty"),
                )],
            },
        }
    }

    pub fn counts(&self) -> MatrixCounts {
        let mut counts = MatrixCounts::default();
        for (i, row) in self.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                match cell {
                    CellState::Explicit { .. } => counts.explicit += 1,
                    CellState::Implicit { .. } => {
                        counts.implicit += 1;
                        if self.is_derived_at(i, j) {
                            counts.derived += 1;
                        }
                    }
                    CellState::Undefined { .. } => counts.undefined += 1,
                }
            }
        }
        counts
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = (&EntityId, &EntityId, &CellState)> {
        self.subjects.iter().zip(&self.cells).flat_map(move |(s, row)| {
            self.objects.iter().zip(row).map(move |(o, cell)| (s, o, cell))
        })
    }
}

/// Outcome of dominance selection over one side's candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Dominant {
        winner: Candidate,
        tie_consistent: bool,
        defeated: Vec<Candidate>,
    },
    Ambiguous {
        tied: Vec<Candidate>,
        defeated: Vec<Candidate>,
    },
    NoInfluence,
}

fn candidate_order(depth: DominanceDepth) -> impl Fn(&Candidate, &Candidate) -> std::cmp::Ordering {
    move |a, b| {
        compare_non_empty(a.key.indices(), b.key.indices(), depth)
            .as_ordering()
            .then_with(|| a.source.cmp(&b.source))
    }
}

/// Picks the dominant candidate. On a key tie, explicit precedents beat
/// derived cells; if the remaining tied candidates all carry the same
/// decision that decision wins, otherwise the result is ambiguous.
/// Candidates with empty keys are ignored.
pub fn select_dominant(candidates: Vec<Candidate>, depth: DominanceDepth) -> Selection {
    let mut candidates: Vec<Candidate> = candidates.into_iter().filter(|c| !c.key.is_empty()).collect();
    if candidates.is_empty() {
        return Selection::NoInfluence;
    }
    candidates.sort_by(candidate_order(depth));
    let head = candidates[0].key.clone();
    let split = candidates
        .iter()
        .position(|c| compare_non_empty(head.indices(), c.key.indices(), depth) != KeyOrder::Tie)
        .unwrap_or(candidates.len());
    let mut defeated = candidates.split_off(split);
    let mut tied = candidates;
    if tied.iter().any(|c| c.source.is_precedent()) && tied.iter().any(|c| !c.source.is_precedent()) {
        let (explicit, derived): (Vec<_>, Vec<_>) = tied.into_iter().partition(|c| c.source.is_precedent());
        tied = explicit;
        defeated.splice(0..0, derived);
    }
    let first = tied[0].source.decision();
    if tied.iter().all(|c| c.source.decision() == first) {
        let tie_consistent = tied.len() > 1;
        let winner = tied.remove(0);
        tied.append(&mut defeated);
        Selection::Dominant {
            winner,
            tie_consistent,
            defeated: tied,
        }
    } else {
        Selection::Ambiguous { tied, defeated }
    }
}

/// Precomputed keys and precedent indexes over one universe.
struct Engine<'a> {
    depth: DominanceDepth,
    subjects: &'a [EntityProfile],
    objects: &'a [EntityProfile],
    subject_keys: Vec<CoincidenceKey>,
    object_keys: Vec<CoincidenceKey>,
    rules: Vec<Rule>,
    positions: Vec<(usize, usize)>,
    by_subject: Vec<Vec<usize>>,
    by_object: Vec<Vec<usize>>,
    at_cell: BTreeMap<(usize, usize), Vec<usize>>,
}

fn pairwise_keys(profiles: &[EntityProfile]) -> Vec<CoincidenceKey> {
    let n = profiles.len();
    let mut keys = vec![CoincidenceKey::default(); n * n];
    for a in 0..n {
        for b in a..n {
            let key = coinciding_attributes(&profiles[a], &profiles[b]).expect("same kind");
            keys[b * n + a] = key.clone();
            keys[a * n + b] = key;
        }
    }
    keys
}

impl<'a> Engine<'a> {
    fn new(universe: &'a Universe, admitted: &[Rule], depth: DominanceDepth) -> Result<Self, Error> {
        let mut rules = admitted
            .iter()
            .map(|r| PrecedentLog::canonical_rule(universe, r))
            .collect::<Result<Vec<_>, _>>()?;
        rules.sort();
        let subjects = universe.subjects();
        let objects = universe.objects();
        let mut by_subject = vec![Vec::new(); subjects.len()];
        let mut by_object = vec![Vec::new(); objects.len()];
        let mut at_cell: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let mut positions = Vec::with_capacity(rules.len());
        for (idx, rule) in rules.iter().enumerate() {
            let i = universe
                .position(EntityKind::Subject, &rule.subject)
                .expect("canonical rule");
            let j = universe.position(EntityKind::Object, &rule.object).expect("canonical rule");
            by_subject[i].push(idx);
            by_object[j].push(idx);
            at_cell.entry((i, j)).or_default().push(idx);
            positions.push((i, j));
        }
        for (&(i, j), idxs) in &at_cell {
            if !is_conflict_free(idxs.iter().map(|&k| &rules[k])) {
                return Err(Error::ConflictingInput {
                    subject: subjects[i].id.clone(),
                    object: objects[j].id.clone(),
                });
            }
        }
        Ok(Engine {
            depth,
            subjects,
            objects,
            subject_keys: pairwise_keys(subjects),
            object_keys: pairwise_keys(objects),
            rules,
            positions,
            by_subject,
            by_object,
            at_cell,
        })
    }

    fn subject_key(&self, a: usize, b: usize) -> &CoincidenceKey {
        &self.subject_keys[a * self.subjects.len() + b]
    }

    fn object_key(&self, a: usize, b: usize) -> &CoincidenceKey {
        &self.object_keys[a * self.objects.len() + b]
    }

    fn row_candidates(&self, i: usize, j: usize) -> Vec<Candidate> {
        self.by_subject[i]
            .iter()
            .filter_map(|&idx| {
                let (_, jq) = self.positions[idx];
                let key = self.object_key(j, jq);
                (jq != j && !key.is_empty()).then(|| Candidate {
                    source: Source::Precedent {
                        rule: self.rules[idx].clone(),
                    },
                    key: key.clone(),
                    side: Side::Row,
                })
            })
            .collect()
    }

    fn column_candidates(&self, i: usize, j: usize) -> Vec<Candidate> {
        self.by_object[j]
            .iter()
            .filter_map(|&idx| {
                let (iq, _) = self.positions[idx];
                let key = self.subject_key(i, iq);
                (iq != i && !key.is_empty()).then(|| Candidate {
                    source: Source::Precedent {
                        rule: self.rules[idx].clone(),
                    },
                    key: key.clone(),
                    side: Side::Column,
                })
            })
            .collect()
    }

    fn derived_candidates(&self, i: usize, j: usize, derived: &[Vec<Option<Source>>]) -> Vec<Candidate> {
        (0..self.subjects.len())
            .filter(|&k| k != i)
            .filter_map(|k| {
                let source = derived[k][j].as_ref()?;
                let key = self.subject_key(i, k);
                (!key.is_empty()).then(|| Candidate {
                    source: source.clone(),
                    key: key.clone(),
                    side: Side::Column,
                })
            })
            .collect()
    }

    fn explicit(&self, i: usize, j: usize) -> Option<CellState> {
        self.at_cell.get(&(i, j)).map(|idxs| CellState::Explicit {
            rules: idxs.iter().map(|&k| self.rules[k].clone()).collect(),
        })
    }

    fn decide(&self, candidates: Vec<Candidate>, mut also_defeated: Vec<Candidate>) -> CellState {
        match select_dominant(candidates, self.depth) {
            Selection::Dominant {
                winner,
                tie_consistent,
                mut defeated,
            } => {
                defeated.append(&mut also_defeated);
                let applied = match (winner.side, winner.source.is_precedent()) {
                    (Side::Row, _) => AppliedRule::Row,
                    (Side::Column, true) => AppliedRule::Column,
                    (Side::Column, false) => AppliedRule::ColumnViaDerived,
                };
                CellState::Implicit {
                    decision: winner.source.decision().clone(),
                    provenance: Provenance {
                        source: winner.source,
                        key: winner.key,
                        applied,
                        tie_consistent,
                        defeated,
                    },
                }
            }
            Selection::Ambiguous { tied, .. } => CellState::Undefined {
                reason: UndefinedReason::AmbiguousDominance { candidates: tied },
            },
            Selection::NoInfluence => CellState::Undefined {
                reason: UndefinedReason::NoInfluence,
            },
        }
    }

    fn sorted(&self, mut candidates: Vec<Candidate>) -> Vec<Candidate> {
        candidates.sort_by(candidate_order(self.depth));
        candidates
    }

    fn partial(&self) -> Vec<Vec<CellState>> {
        (0..self.subjects.len())
            .map(|i| {
                (0..self.objects.len())
                    .map(|j| {
                        if let Some(cell) = self.explicit(i, j) {
                            return cell;
                        }
                        let row = self.row_candidates(i, j);
                        let column = self.column_candidates(i, j);
                        if row.is_empty() {
                            self.decide(column, Vec::new())
                        } else {
                            self.decide(row, self.sorted(column))
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn sequential(&self) -> Vec<Vec<CellState>> {
        let (ns, no) = (self.subjects.len(), self.objects.len());
        let mut cells: Vec<Vec<Option<CellState>>> = vec![vec![None; no]; ns];
        let mut derived: Vec<Vec<Option<Source>>> = vec![vec![None; no]; ns];

        // Row pass.
        for i in 0..ns {
            for j in 0..no {
                if let Some(cell) = self.explicit(i, j) {
                    cells[i][j] = Some(cell);
                    continue;
                }
                let row = self.row_candidates(i, j);
                if row.is_empty() {
                    continue;
                }
                let cell = self.decide(row, Vec::new());
                if let CellState::Implicit { decision, provenance } = &cell {
                    let Source::Precedent { rule } = &provenance.source else {
                        unreachable!("row pass only sees precedents")
                    };
                    derived[i][j] = Some(Source::Derived {
                        subject: self.subjects[i].id.clone(),
                        object: self.objects[j].id.clone(),
                        decision: decision.clone(),
                        origin: rule.clone(),
                    });
                }
                cells[i][j] = Some(cell);
            }
        }

        // Column pass over what the row pass left; its results never act as sources.
        for i in 0..ns {
            for j in 0..no {
                if cells[i][j].is_some() {
                    continue;
                }
                let mut column = self.column_candidates(i, j);
                column.extend(self.derived_candidates(i, j, &derived));
                cells[i][j] = Some(self.decide(column, Vec::new()));
            }
        }

        // Row-pass cells record the column candidates they outranked.
        for i in 0..ns {
            for j in 0..no {
                if derived[i][j].is_some() {
                    let column = self.sorted(self.column_candidates(i, j));
                    if let Some(CellState::Implicit { provenance, .. }) = cells[i][j].as_mut() {
                        provenance.defeated.extend(column);
                    }
                }
            }
        }

        cells
            .into_iter()
            .map(|row| row.into_iter().map(|c| c.expect("every cell visited")).collect())
            .collect()
    }

    fn influence_set(&self, i: usize, j: usize, derived: Option<&[Vec<Option<Source>>]>) -> InfluenceSet {
        if self.at_cell.contains_key(&(i, j)) {
            // A precedent at the cell makes it explicit; nothing else applies.
            return InfluenceSet::default();
        }
        let mut column = self.column_candidates(i, j);
        if let Some(derived) = derived {
            column.extend(self.derived_candidates(i, j, derived));
        }
        InfluenceSet {
            row: self.sorted(self.row_candidates(i, j)),
            column: self.sorted(column),
        }
    }
}

fn build(universe: &Universe, depth: DominanceDepth, mode: Mode, engine: &Engine<'_>) -> AccessMatrix {
    let cells = match mode {
        Mode::Partial => engine.partial(),
        Mode::Sequential => engine.sequential(),
    };
    let schema = universe.schema();
    AccessMatrix {
        mode,
        dominance_depth: depth,
        default_policy: DefaultPolicy::Deny,
        rights: universe.rights().iter().cloned().collect(),
        subject_families: schema.family_names(EntityKind::Subject),
        object_families: schema.family_names(EntityKind::Object),
        subjects: universe.subjects().iter().map(|p| p.id.clone()).collect(),
        objects: universe.objects().iter().map(|p| p.id.clone()).collect(),
        precedents: engine.rules.clone(),
        cells,
    }
}

pub fn partial_interpolate(universe: &Universe, admitted: &[Rule], depth: DominanceDepth) -> Result<AccessMatrix, Error> {
    let engine = Engine::new(universe, admitted, depth)?;
    Ok(build(universe, depth, Mode::Partial, &engine))
}

pub fn sequential_interpolate(
    universe: &Universe,
    admitted: &[Rule],
    depth: DominanceDepth,
) -> Result<AccessMatrix, Error> {
    let engine = Engine::new(universe, admitted, depth)?;
    Ok(build(universe, depth, Mode::Sequential, &engine))
}

pub fn interpolate(
    universe: &Universe,
    admitted: &[Rule],
    mode: Mode,
    depth: DominanceDepth,
) -> Result<AccessMatrix, Error> {
    let engine = Engine::new(universe, admitted, depth)?;
    Ok(build(universe, depth, mode, &engine))
}

/// Influencers of one cell. With `mode = Sequential` the column side also
/// lists the row-pass cells of the cell's column.
pub fn influencers(
    universe: &Universe,
    admitted: &[Rule],
    subject: &EntityId,
    object: &EntityId,
    mode: Mode,
) -> Result<InfluenceSet, Error> {
    let engine = Engine::new(universe, admitted, DominanceDepth::default())?;
    let unknown = || Error::UnknownCell {
        subject: subject.clone(),
        object: object.clone(),
    };
    let i = universe.position(EntityKind::Subject, subject).ok_or_else(unknown)?;
    let j = universe.position(EntityKind::Object, object).ok_or_else(unknown)?;
    match mode {
        Mode::Partial => Ok(engine.influence_set(i, j, None)),
        Mode::Sequential => {
            let matrix = build(universe, DominanceDepth::default(), Mode::Sequential, &engine);
            let derived: Vec<Vec<Option<Source>>> = (0..engine.subjects.len())
                .map(|k| {
                    (0..engine.objects.len())
                        .map(|l| match &matrix.cells[k][l] {
                            CellState::Implicit { decision, provenance } if matrix.is_derived_at(k, l) => {
                                let Source::Precedent { rule } = &provenance.source else {
                                    return None;
                                };
                                Some(Source::Derived {
                                    subject: matrix.subjects[k].clone(),
                                    object: matrix.objects[l].clone(),
                                    decision: decision.clone(),
                                    origin: rule.clone(),
                                })
                            }
                            _ => None,
                        })
                        .collect()
                })
                .collect();
            Ok(engine.influence_set(i, j, Some(&derived)))
        }
    }
}

/// A cell whose state class or decision differs between two matrices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDiff {
    pub subject: EntityId,
    pub object: EntityId,
    pub before: CellSummary,
    pub after: CellSummary,
}

pub fn diff_matrices(a: &AccessMatrix, b: &AccessMatrix) -> Result<Vec<CellDiff>, Error> {
    if a.subjects != b.subjects || a.objects != b.objects {
        return Err(Error::EntityMismatch);
    }
    Ok(a
        .iter_cells()
        .zip(b.iter_cells())
        .filter_map(|((s, o, x), (_, _, y))| {
            let (before, after) = (x.summary(), y.summary());
            (before != after).then(|| CellDiff {
                subject: s.clone(),
                object: o.clone(),
                before,
                after,
            })
        })
        .collect())
}

/// Provenance of one cell in both human and structured form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub subject: EntityId,
    pub object: EntityId,
    pub mode: Mode,
    pub derived: bool,
    pub state: CellState,
    pub effective: Vec<Decision>,
    pub text: String,
}

impl Explanation {
    pub fn is_undefined(&self) -> bool {
        self.state.is_undefined()
    }
}

impl fmt::Display for Explanation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn families_for(matrix: &AccessMatrix, side: Side) -> &[String] {
    match side {
        Side::Row => &matrix.object_families,
        Side::Column => &matrix.subject_families,
    }
}

fn key_names(matrix: &AccessMatrix, candidate: &Candidate) -> String {
    candidate.key.family_names(families_for(matrix, candidate.side)).join("+")
}

pub fn explain_cell(matrix: &AccessMatrix, subject: &EntityId, object: &EntityId) -> Result<Explanation, Error> {
    let (i, j) = matrix.position(subject, object).ok_or_else(|| Error::UnknownCell {
        subject: subject.clone(),
        object: object.clone(),
    })?;
    let state = matrix.cells[i][j].clone();
    let derived = matrix.is_derived_at(i, j);
    let mut text = format!("{subject} -> {object}: ");
    match &state {
        CellState::Explicit { rules } => {
            let labels: Vec<String> = rules.iter().map(|r| format!("{} ({})", r.label(), r.decision)).collect();
            let noun = if rules.len() == 1 { "precedent" } else { "precedents" };
            text.push_str(&format!("explicit {noun} {}", labels.join(", ")));
        }
        CellState::Implicit { decision, provenance } => {
            let winner = Candidate {
                source: provenance.source.clone(),
                key: provenance.key.clone(),
                side: match provenance.applied {
                    AppliedRule::Row => Side::Row,
                    _ => Side::Column,
                },
            };
            text.push_str(&format!(
                "{decision}; dominant {} via {} ({} rule{}{})",
                provenance.source.label(),
                key_names(matrix, &winner),
                provenance.applied,
                if derived { ", derived" } else { "" },
                if provenance.tie_consistent { ", tie-consistent" } else { "" },
            ));
            if !provenance.defeated.is_empty() {
                let defeated: Vec<String> = provenance
                    .defeated
                    .iter()
                    .map(|c| {
                        let side = match c.side {
                            Side::Row => "row",
                            Side::Column => "column",
                        };
                        format!("{} via {} ({side})", c.source.label(), key_names(matrix, c))
                    })
                    .collect();
                text.push_str(&format!("; defeated {}", defeated.join(", ")));
            }
        }
        CellState::Undefined {
            reason: UndefinedReason::NoInfluence,
        } => text.push_str("undefined: no precedent influences this cell (enforced as deny)"),
        CellState::Undefined {
            reason: UndefinedReason::AmbiguousDominance { candidates },
        } => {
            let on = candidates.first().map(|c| key_names(matrix, c)).unwrap_or_default();
            let tied: Vec<String> = candidates
                .iter()
                .map(|c| match &c.source {
                    Source::Precedent { rule } if rule.note.is_none() => c.source.label(),
                    _ => format!("{} ({})", c.source.label(), c.source.decision()),
                })
                .collect();
            text.push_str(&format!(
                "undefined, ambiguous: {} candidates tie on {on}: {} (enforced as deny)",
                candidates.len(),
                tied.join(", ")
            ));
        }
    }
    Ok(Explanation {
        subject: subject.clone(),
        object: object.clone(),
        mode: matrix.mode,
        derived,
        effective: matrix.effective_at(i, j),
        state,
        text,
    })
}
