//! Policy documents and matrix/audit exports.
//!
//! Documents are JSON (`*.policy.json`). Attribute families are listed in
//! significance order. Parsing never panics: malformed input yields a list of
//! located errors and no document.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::interpolate::{AccessMatrix, CellState, DefaultPolicy, Mode};
use crate::model::{
    validate_schema, AttributeSchema, Decision, DominanceDepth, EntityId, EntityKind, EntityProfile, Polarity,
    RightsSet, Universe,
};
use crate::precedent::{Admission, CollisionStrategy, PrecedentLog, Rule};

pub const POLICY_VERSION: u32 = 1;
pub const MATRIX_VERSION: u32 = 1;
pub const AUDIT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityDecl {
    pub id: EntityId,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecedentDecl {
    pub subject: EntityId,
    pub object: EntityId,
    pub polarity: Polarity,
    pub rights: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PrecedentDecl {
    pub fn to_rule(&self) -> Result<Rule, Error> {
        Ok(Rule {
            subject: self.subject.clone(),
            object: self.object.clone(),
            decision: Decision::new(self.polarity, RightsSet::new(self.rights.iter().cloned())?),
            note: self.note.clone(),
        })
    }
}

impl From<&Rule> for PrecedentDecl {
    fn from(rule: &Rule) -> Self {
        PrecedentDecl {
            subject: rule.subject.clone(),
            object: rule.object.clone(),
            polarity: rule.decision.polarity,
            rights: rule.decision.rights.iter().map(str::to_owned).collect(),
            note: rule.note.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub mode: Mode,
    pub collision_strategy: CollisionStrategy,
    pub dominance_depth: DominanceDepth,
    pub default_policy: DefaultPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDocument {
    pub version: u32,
    pub schema: AttributeSchema,
    pub rights: Vec<String>,
    pub subjects: Vec<EntityDecl>,
    pub objects: Vec<EntityDecl>,
    #[serde(default)]
    pub precedents: Vec<PrecedentDecl>,
    #[serde(default)]
    pub settings: Settings,
}

/// One problem in a policy document, located by line/column or field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocError {
    pub location: String,
    pub message: String,
}

impl fmt::Display for DocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct DocErrors(pub Vec<DocError>);

impl fmt::Display for DocErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl DocErrors {
    pub fn iter(&self) -> impl Iterator<Item = &DocError> {
        self.0.iter()
    }
}

fn err(location: impl Into<String>, message: impl Into<String>) -> DocError {
    DocError {
        location: location.into(),
        message: message.into(),
    }
}

pub fn parse_policy(text: &str) -> Result<PolicyDocument, DocErrors> {
    let doc: PolicyDocument = serde_json::from_str(text).map_err(|e| {
        DocErrors(vec![err(
            format!("line {}, column {}", e.line(), e.column()),
            format!("syntax error: {e}"),
        )])
    })?;
    let errors = doc.validate();
    if errors.is_empty() {
        Ok(doc)
    } else {
        Err(DocErrors(errors))
    }
}

/// Pretty JSON with a trailing newline; field order is fixed, so equal
/// documents serialize to identical bytes.
pub fn serialize_policy(doc: &PolicyDocument) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("document serializes");
    text.push('\n');
    text
}

impl PolicyDocument {
    /// Every problem in an already-deserialized document.
    pub fn validate(&self) -> Vec<DocError> {
        let mut errors = Vec::new();
        if self.version != POLICY_VERSION {
            errors.push(err(
                "version",
                format!("unsupported version {} (expected {POLICY_VERSION})", self.version),
            ));
        }
        for violation in validate_schema(&self.schema) {
            errors.push(err("schema", violation.to_string()));
        }
        if self.rights.is_empty() {
            errors.push(err("rights", "rights universe is empty"));
        }
        let mut rights = HashSet::new();
        for (k, right) in self.rights.iter().enumerate() {
            if !rights.insert(right.as_str()) {
                errors.push(err(format!("rights[{k}]"), format!("duplicate right `{right}`")));
            }
        }

        let mut ids = HashSet::new();
        for (kind, list, field) in [
            (EntityKind::Subject, &self.subjects, "subjects"),
            (EntityKind::Object, &self.objects, "objects"),
        ] {
            let families = self.schema.families(kind);
            for (k, decl) in list.iter().enumerate() {
                let at = format!("{field}[{k}]");
                if !ids.insert(&decl.id) {
                    errors.push(err(&at, format!("duplicate entity id `{}`", decl.id)));
                }
                if decl.values.len() != families.len() {
                    errors.push(err(
                        format!("{at}.values"),
                        format!("{} values given, {} families declared", decl.values.len(), families.len()),
                    ));
                    continue;
                }
                for (family, value) in families.iter().zip(&decl.values) {
                    if !family.contains(value) {
                        errors.push(err(
                            format!("{at}.values"),
                            format!("value `{value}` is not in the domain of family `{}`", family.name),
                        ));
                    }
                }
            }
        }

        let subjects: HashSet<&EntityId> = self.subjects.iter().map(|d| &d.id).collect();
        let objects: HashSet<&EntityId> = self.objects.iter().map(|d| &d.id).collect();
        for (k, p) in self.precedents.iter().enumerate() {
            let at = format!("precedents[{k}]");
            if !subjects.contains(&p.subject) {
                errors.push(err(format!("{at}.subject"), format!("unknown subject `{}`", p.subject)));
            }
            if !objects.contains(&p.object) {
                errors.push(err(format!("{at}.object"), format!("unknown object `{}`", p.object)));
            }
            if p.rights.is_empty() {
                errors.push(err(format!("{at}.rights"), "empty rights set"));
            }
            for right in &p.rights {
                if !rights.contains(right.as_str()) {
                    errors.push(err(format!("{at}.rights"), format!("unknown right `{right}`")));
                }
            }
        }
        errors
    }

    pub fn profiles(&self) -> Vec<EntityProfile> {
        let subjects = self.subjects.iter().map(|d| EntityProfile {
            id: d.id.clone(),
            kind: EntityKind::Subject,
            values: d.values.clone(),
        });
        let objects = self.objects.iter().map(|d| EntityProfile {
            id: d.id.clone(),
            kind: EntityKind::Object,
            values: d.values.clone(),
        });
        subjects.chain(objects).collect()
    }

    pub fn universe(&self) -> Result<Universe, Error> {
        Universe::new(self.schema.clone(), self.rights.iter().cloned(), &self.profiles())
    }

    pub fn rules(&self) -> Result<Vec<Rule>, Error> {
        self.precedents.iter().map(PrecedentDecl::to_rule).collect()
    }

    /// Submits the document's precedents, in order, to a fresh log.
    pub fn build_log(
        &self,
        universe: &Universe,
        strategy: CollisionStrategy,
    ) -> Result<(PrecedentLog, Vec<Admission>), Error> {
        let mut log = PrecedentLog::new(strategy);
        let outcomes = self
            .rules()?
            .iter()
            .map(|r| log.apply(universe, r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((log, outcomes))
    }

    pub fn with_precedents<'a>(&self, rules: impl IntoIterator<Item = &'a Rule>) -> PolicyDocument {
        PolicyDocument {
            precedents: rules.into_iter().map(PrecedentDecl::from).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixFormat {
    #[default]
    Table,
    Structured,
}

impl std::str::FromStr for MatrixFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(MatrixFormat::Table),
            "structured" => Ok(MatrixFormat::Structured),
            other => Err(format!("unknown format `{other}` (expected table or structured)")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixEnvelope {
    format: String,
    version: u32,
    matrix: AccessMatrix,
}

const MATRIX_FORMAT_TAG: &str = "access-matrix";

pub fn serialize_matrix(matrix: &AccessMatrix, format: MatrixFormat) -> String {
    match format {
        MatrixFormat::Table => render_table(matrix),
        MatrixFormat::Structured => {
            let envelope = MatrixEnvelope {
                format: MATRIX_FORMAT_TAG.to_owned(),
                version: MATRIX_VERSION,
                matrix: matrix.clone(),
            };
            let mut text = serde_json::to_string_pretty(&envelope).expect("matrix serializes");
            text.push('\n');
            text
        }
    }
}

/// Reads the structured form back.
pub fn parse_matrix(text: &str) -> Result<AccessMatrix, DocErrors> {
    let envelope: MatrixEnvelope = serde_json::from_str(text).map_err(|e| {
        DocErrors(vec![err(
            format!("line {}, column {}", e.line(), e.column()),
            format!("syntax error: {e}"),
        )])
    })?;
    let mut errors = Vec::new();
    if envelope.format != MATRIX_FORMAT_TAG {
        errors.push(err("format", format!("expected `{MATRIX_FORMAT_TAG}`")));
    }
    if envelope.version != MATRIX_VERSION {
        errors.push(err("version", format!("unsupported version {}", envelope.version)));
    }
    let m = &envelope.matrix;
    if m.cells.len() != m.subjects.len() || m.cells.iter().any(|row| row.len() != m.objects.len()) {
        errors.push(err("matrix.cells", "cell grid does not match the entity lists"));
    }
    if errors.is_empty() {
        Ok(envelope.matrix)
    } else {
        Err(DocErrors(errors))
    }
}

fn decision_token(decision: &Decision, single_right: bool) -> String {
    if single_right {
        match decision.polarity {
            Polarity::Allow => "1".to_owned(),
            Polarity::Deny => "0".to_owned(),
        }
    } else {
        let sign = match decision.polarity {
            Polarity::Allow => '+',
            Polarity::Deny => '-',
        };
        format!("{sign}{}", decision.rights)
    }
}

/// The table notation for one cell: `[..]` explicit, `>..<` derived by the
/// sequential row pass, `?` undefined.
pub fn cell_token(matrix: &AccessMatrix, i: usize, j: usize) -> String {
    let single = matrix.rights.len() == 1;
    match &matrix.cells[i][j] {
        CellState::Explicit { rules } => {
            let inner: Vec<String> = rules.iter().map(|r| decision_token(&r.decision, single)).collect();
            format!("[{}]", inner.join(";"))
        }
        CellState::Implicit { decision, .. } if matrix.is_derived_at(i, j) => {
            format!(">{}<", decision_token(decision, single))
        }
        CellState::Implicit { decision, .. } => decision_token(decision, single),
        CellState::Undefined { .. } => "?".to_owned(),
    }
}

fn render_table(matrix: &AccessMatrix) -> String {
    let tokens: Vec<Vec<String>> = (0..matrix.subjects.len())
        .map(|i| (0..matrix.objects.len()).map(|j| cell_token(matrix, i, j)).collect())
        .collect();
    let first = matrix.subjects.iter().map(|s| s.as_str().len()).max().unwrap_or(0);
    let widths: Vec<usize> = matrix
        .objects
        .iter()
        .enumerate()
        .map(|(j, o)| tokens.iter().map(|row| row[j].len()).chain([o.as_str().len()]).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let mut line = format!("{:first$}", "");
    for (o, w) in matrix.objects.iter().zip(&widths) {
        line.push_str(&format!("  {:<w$}", o.as_str()));
    }
    out.push_str(line.trim_end());
    out.push('\n');
    for (s, row) in matrix.subjects.iter().zip(&tokens) {
        let mut line = format!("{:<first$}", s.as_str());
        for (t, w) in row.iter().zip(&widths) {
            line.push_str(&format!("  {t:<w$}"));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct AuditDocument<'a> {
    version: u32,
    strategy: CollisionStrategy,
    events: &'a [crate::precedent::AuditEvent],
}

/// Chronological audit records as JSON (`*.audit.json`).
pub fn export_audit(log: &PrecedentLog) -> String {
    let doc = AuditDocument {
        version: AUDIT_VERSION,
        strategy: log.strategy(),
        events: log.audit(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("audit serializes");
    text.push('\n');
    text
}
