//! Attribute schema, entity profiles, decisions and the coincidence algebra.
//!
//! Subjects and objects are vectors of opaque attribute-value tokens. Two
//! profiles of the same kind are compared only through the positions at which
//! their values coincide; the significance of a coincidence is given by the
//! declaration order of the attribute families (subject families first, then
//! object families).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Identifier of a subject or object, as written in the policy document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Subject,
    Object,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityKind::Subject => f.write_str("subject"),
            EntityKind::Object => f.write_str("object"),
        }
    }
}

/// One attribute family: a name and its finite domain of value tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeFamily {
    pub name: String,
    pub values: Vec<String>,
}

impl AttributeFamily {
    pub fn new<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        AttributeFamily {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, value: &str) -> bool {
        self.values.iter().any(|v| v == value)
    }
}

/// Ordered attribute families. Declaration order is significance order:
/// every subject family outranks every object family, and within a kind an
/// earlier family outranks a later one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub subject_families: Vec<AttributeFamily>,
    pub object_families: Vec<AttributeFamily>,
}

/// A single schema problem found by [`validate_schema`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemaViolation {
    NoSubjectFamilies,
    NoObjectFamilies,
    DuplicateFamily(String),
    EmptyDomain(String),
    DuplicateValue { family: String, value: String },
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaViolation::NoSubjectFamilies => f.write_str("n ≥ 1 required: no subject attribute families"),
            SchemaViolation::NoObjectFamilies => f.write_str("m ≥ 1 required: no object attribute families"),
            SchemaViolation::DuplicateFamily(name) => write!(f, "duplicate family name `{name}`"),
            SchemaViolation::EmptyDomain(name) => write!(f, "family `{name}` has an empty value domain"),
            SchemaViolation::DuplicateValue { family, value } => {
                write!(f, "family `{family}` declares value `{value}` more than once")
            }
        }
    }
}

impl AttributeSchema {
    pub fn families(&self, kind: EntityKind) -> &[AttributeFamily] {
        match kind {
            EntityKind::Subject => &self.subject_families,
            EntityKind::Object => &self.object_families,
        }
    }

    pub fn family_names(&self, kind: EntityKind) -> Vec<String> {
        self.families(kind).iter().map(|f| f.name.clone()).collect()
    }

    /// Checks one profile against the schema.
    pub fn check_profile(&self, profile: &EntityProfile) -> Result<(), Error> {
        let families = self.families(profile.kind);
        if profile.values.len() != families.len() {
            return Err(Error::ArityMismatch {
                entity: profile.id.clone(),
                expected: families.len(),
                found: profile.values.len(),
            });
        }
        for (family, value) in families.iter().zip(&profile.values) {
            if !family.contains(value) {
                return Err(Error::OutOfDomain {
                    entity: profile.id.clone(),
                    family: family.name.clone(),
                    value: value.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Returns every violation in the schema; an empty list means the schema is valid.
pub fn validate_schema(schema: &AttributeSchema) -> Vec<SchemaViolation> {
    let mut violations = Vec::new();
    if schema.subject_families.is_empty() {
        violations.push(SchemaViolation::NoSubjectFamilies);
    }
    if schema.object_families.is_empty() {
        violations.push(SchemaViolation::NoObjectFamilies);
    }
    let mut seen = HashSet::new();
    for family in schema.subject_families.iter().chain(&schema.object_families) {
        if !seen.insert(family.name.as_str()) {
            violations.push(SchemaViolation::DuplicateFamily(family.name.clone()));
        }
        if family.values.is_empty() {
            violations.push(SchemaViolation::EmptyDomain(family.name.clone()));
        }
        let mut values = HashSet::new();
        for value in &family.values {
            if !values.insert(value.as_str()) {
                violations.push(SchemaViolation::DuplicateValue {
                    family: family.name.clone(),
                    value: value.clone(),
                });
            }
        }
    }
    violations
}

/// A subject or object described by its attribute values, in family order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityProfile {
    pub id: EntityId,
    pub kind: EntityKind,
    pub values: Vec<String>,
}

impl EntityProfile {
    pub fn subject<S: Into<String>>(id: &str, values: impl IntoIterator<Item = S>) -> Self {
        EntityProfile {
            id: id.into(),
            kind: EntityKind::Subject,
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn object<S: Into<String>>(id: &str, values: impl IntoIterator<Item = S>) -> Self {
        EntityProfile {
            id: id.into(),
            kind: EntityKind::Object,
            values: values.into_iter().map(Into::into).collect(),
        }
    }
}

/// A non-empty set of access-right names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct RightsSet(BTreeSet<String>);

impl RightsSet {
    pub fn new<S: Into<String>>(rights: impl IntoIterator<Item = S>) -> Result<Self, Error> {
        let set: BTreeSet<String> = rights.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(Error::EmptyRights);
        }
        Ok(RightsSet(set))
    }

    pub fn overlaps(&self, other: &RightsSet) -> bool {
        // Both sides are sorted; a merge walk would do, but sets are tiny.
        self.0.iter().any(|r| other.0.contains(r))
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, right: &str) -> bool {
        self.0.contains(right)
    }
}

impl TryFrom<Vec<String>> for RightsSet {
    type Error = Error;

    fn try_from(value: Vec<String>) -> Result<Self, Self::Error> {
        RightsSet::new(value)
    }
}

impl From<RightsSet> for Vec<String> {
    fn from(value: RightsSet) -> Self {
        value.0.into_iter().collect()
    }
}

impl fmt::Display for RightsSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, right) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(right)?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Allow,
    Deny,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Allow => f.write_str("Allow"),
            Polarity::Deny => f.write_str("Deny"),
        }
    }
}

/// Allow or deny of a rights set at one cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub polarity: Polarity,
    pub rights: RightsSet,
}

impl Decision {
    pub fn new(polarity: Polarity, rights: RightsSet) -> Self {
        Decision { polarity, rights }
    }

    pub fn allow<S: Into<String>>(rights: impl IntoIterator<Item = S>) -> Result<Self, Error> {
        Ok(Decision::new(Polarity::Allow, RightsSet::new(rights)?))
    }

    pub fn deny<S: Into<String>>(rights: impl IntoIterator<Item = S>) -> Result<Self, Error> {
        Ok(Decision::new(Polarity::Deny, RightsSet::new(rights)?))
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.polarity, self.rights)
    }
}

/// Sorted 1-based family positions at which two same-kind profiles agree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoincidenceKey(Vec<usize>);

impl CoincidenceKey {
    /// Builds a key from positions; they are sorted and deduplicated.
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        CoincidenceKey(set.into_iter().collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Family names for the positions, given the families of the compared kind.
    pub fn family_names<'a>(&self, families: &'a [String]) -> Vec<&'a str> {
        self.0
            .iter()
            .filter_map(|&i| families.get(i - 1).map(String::as_str))
            .collect()
    }
}

impl fmt::Display for CoincidenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{idx}")?;
        }
        f.write_str("}")
    }
}

pub fn coinciding_attributes(x: &EntityProfile, y: &EntityProfile) -> Result<CoincidenceKey, Error> {
    if x.kind != y.kind {
        return Err(Error::IncomparableKinds);
    }
    Ok(CoincidenceKey(
        x.values
            .iter()
            .zip(&y.values)
            .enumerate()
            .filter(|(_, (a, b))| a == b)
            .map(|(i, _)| i + 1)
            .collect(),
    ))
}

/// How far key comparison looks past the most significant coinciding family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominanceDepth {
    /// Only the most significant coinciding family is compared.
    StrictPaper,
    /// Equal heads are broken by the next coinciding positions.
    #[default]
    Lexicographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyOrder {
    FirstDominates,
    SecondDominates,
    Tie,
}

impl KeyOrder {
    /// `Less` means the first key dominates, so sorting puts dominant keys first.
    pub fn as_ordering(self) -> Ordering {
        match self {
            KeyOrder::FirstDominates => Ordering::Less,
            KeyOrder::SecondDominates => Ordering::Greater,
            KeyOrder::Tie => Ordering::Equal,
        }
    }
}

pub fn compare_keys(x: &CoincidenceKey, y: &CoincidenceKey, depth: DominanceDepth) -> Result<KeyOrder, Error> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyKey);
    }
    Ok(compare_non_empty(x.indices(), y.indices(), depth))
}

/// Key comparison without the emptiness check; callers guarantee non-empty keys.
pub(crate) fn compare_non_empty(x: &[usize], y: &[usize], depth: DominanceDepth) -> KeyOrder {
    let limit = match depth {
        DominanceDepth::StrictPaper => 1,
        DominanceDepth::Lexicographic => usize::MAX,
    };
    let mut xs = x.iter().take(limit);
    let mut ys = y.iter().take(limit);
    loop {
        match (xs.next(), ys.next()) {
            (Some(a), Some(b)) if a == b => continue,
            (Some(a), Some(b)) => {
                return if a < b {
                    KeyOrder::FirstDominates
                } else {
                    KeyOrder::SecondDominates
                }
            }
            // A list that runs out lacks a coincidence the other still has.
            (Some(_), None) => return KeyOrder::FirstDominates,
            (None, Some(_)) => return KeyOrder::SecondDominates,
            (None, None) => return KeyOrder::Tie,
        }
    }
}

/// Entities of one kind sharing an identical value vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceClass {
    pub representative: EntityProfile,
    pub members: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Partition {
    pub classes: Vec<EquivalenceClass>,
}

impl Partition {
    pub fn representatives(&self, kind: EntityKind) -> impl Iterator<Item = &EntityProfile> {
        self.classes
            .iter()
            .map(|c| &c.representative)
            .filter(move |p| p.kind == kind)
    }
}

/// Groups entities by (kind, value vector). Classes appear in order of their
/// first member; the first member is the representative.
pub fn canonicalize_entities(schema: &AttributeSchema, entities: &[EntityProfile]) -> Result<Partition, Error> {
    let mut index: HashMap<(EntityKind, &[String]), usize> = HashMap::new();
    let mut classes: Vec<EquivalenceClass> = Vec::new();
    for entity in entities {
        schema.check_profile(entity)?;
        match index.get(&(entity.kind, entity.values.as_slice())) {
            Some(&at) => classes[at].members.push(entity.id.clone()),
            None => {
                index.insert((entity.kind, entity.values.as_slice()), classes.len());
                classes.push(EquivalenceClass {
                    representative: entity.clone(),
                    members: vec![entity.id.clone()],
                });
            }
        }
    }
    Ok(Partition { classes })
}

/// The validated, canonicalized world a policy talks about: schema, rights
/// universe and one representative per equivalence class of each kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    schema: AttributeSchema,
    rights: BTreeSet<String>,
    subjects: Vec<EntityProfile>,
    objects: Vec<EntityProfile>,
    partition: Partition,
    // member id -> (kind, representative position)
    lookup: BTreeMap<EntityId, (EntityKind, usize)>,
}

impl Universe {
    pub fn new(
        schema: AttributeSchema,
        rights: impl IntoIterator<Item = String>,
        entities: &[EntityProfile],
    ) -> Result<Self, Error> {
        let violations = validate_schema(&schema);
        if !violations.is_empty() {
            return Err(Error::InvalidSchema(violations.iter().map(ToString::to_string).collect()));
        }
        let rights: BTreeSet<String> = rights.into_iter().collect();
        if rights.is_empty() {
            return Err(Error::EmptyRightsUniverse);
        }
        let mut ids = HashSet::new();
        for entity in entities {
            if !ids.insert(&entity.id) {
                return Err(Error::DuplicateEntity(entity.id.clone()));
            }
        }
        let partition = canonicalize_entities(&schema, entities)?;
        let subjects: Vec<EntityProfile> = partition.representatives(EntityKind::Subject).cloned().collect();
        let objects: Vec<EntityProfile> = partition.representatives(EntityKind::Object).cloned().collect();
        let mut lookup = BTreeMap::new();
        for class in &partition.classes {
            let kind = class.representative.kind;
            let reps = match kind {
                EntityKind::Subject => &subjects,
                EntityKind::Object => &objects,
            };
            let pos = reps
                .iter()
                .position(|p| p.id == class.representative.id)
                .expect("representative is listed");
            for member in &class.members {
                lookup.insert(member.clone(), (kind, pos));
            }
        }
        Ok(Universe {
            schema,
            rights,
            subjects,
            objects,
            partition,
            lookup,
        })
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn rights(&self) -> &BTreeSet<String> {
        &self.rights
    }

    /// Subject representatives, in declaration order.
    pub fn subjects(&self) -> &[EntityProfile] {
        &self.subjects
    }

    /// Object representatives, in declaration order.
    pub fn objects(&self) -> &[EntityProfile] {
        &self.objects
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Position of the representative for any member id of the given kind.
    pub fn position(&self, kind: EntityKind, id: &EntityId) -> Option<usize> {
        match self.lookup.get(id) {
            Some(&(k, pos)) if k == kind => Some(pos),
            _ => None,
        }
    }

    /// Maps a member id to its class representative's id.
    pub fn representative(&self, kind: EntityKind, id: &EntityId) -> Option<&EntityId> {
        let pos = self.position(kind, id)?;
        let reps = match kind {
            EntityKind::Subject => &self.subjects,
            EntityKind::Object => &self.objects,
        };
        Some(&reps[pos].id)
    }

    pub fn check_rights(&self, rights: &RightsSet) -> Result<(), Error> {
        match rights.iter().find(|r| !self.rights.contains(*r)) {
            Some(unknown) => Err(Error::UnknownRight(unknown.to_owned())),
            None => Ok(()),
        }
    }

    /// Whether the table rendering may abbreviate decisions as `1` / `0`.
    pub fn single_right(&self) -> bool {
        self.rights.len() == 1
    }
}
