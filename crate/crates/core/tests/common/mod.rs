#![allow(dead_code)]

pub mod oracle;

use precedent_core::{
    AttributeFamily, AttributeSchema, Decision, EntityProfile, PolicyDocument, Polarity, RightsSet, Rule, Universe,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture_path(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

pub fn load(name: &str) -> PolicyDocument {
    precedent_core::parse_policy(&fixture_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const FIXTURES: &[&str] = &[
    "grid3.policy.json",
    "grid3-q1.policy.json",
    "grid3-q12.policy.json",
    "grid3-q12-interactive.policy.json",
    "empty.policy.json",
    "uncertain.policy.json",
    "multi-rights.policy.json",
];

pub fn all(decision: Polarity) -> Decision {
    Decision::new(decision, RightsSet::new(["all"]).unwrap())
}

pub fn q1() -> Rule {
    Rule::new("S1", "O1", all(Polarity::Allow)).with_note("q1")
}

pub fn q2() -> Rule {
    Rule::new("S1", "O3", all(Polarity::Deny)).with_note("q2")
}

pub fn q3() -> Rule {
    Rule::new("S2", "O2", all(Polarity::Allow)).with_note("q3")
}

pub fn grid3() -> Universe {
    load("grid3.policy.json").universe().unwrap()
}

pub fn uncertain() -> (Universe, Vec<Rule>) {
    let doc = load("uncertain.policy.json");
    (doc.universe().unwrap(), doc.rules().unwrap())
}

/// A random conflict-free instance plus the raw data the oracle consumes.
#[derive(Debug, Clone)]
pub struct Instance {
    pub universe: Universe,
    pub rules: Vec<Rule>,
    pub subjects: Vec<Vec<String>>,
    pub objects: Vec<Vec<String>>,
}

pub struct Limits {
    pub max_entities: usize,
    pub max_families: usize,
    pub max_rules: usize,
    pub max_domain: usize,
    pub max_rights: usize,
}

pub const SMALL: Limits = Limits {
    max_entities: 6,
    max_families: 3,
    max_rules: 8,
    max_domain: 3,
    max_rights: 2,
};

pub const MEDIUM: Limits = Limits {
    max_entities: 8,
    max_families: 4,
    max_rules: 12,
    max_domain: 3,
    max_rights: 2,
};

fn families(rng: &mut impl Rng, prefix: &str, limits: &Limits) -> Vec<AttributeFamily> {
    let n = rng.gen_range(1..=limits.max_families);
    (1..=n)
        .map(|k| {
            let size = rng.gen_range(1..=limits.max_domain);
            AttributeFamily::new(format!("{prefix}{k}"), (0..size).map(|v| format!("{prefix}{k}v{v}")))
        })
        .collect()
}

fn vectors(rng: &mut impl Rng, families: &[AttributeFamily], max: usize) -> Vec<Vec<String>> {
    let count = rng.gen_range(1..=max);
    let mut out: Vec<Vec<String>> = Vec::new();
    for _ in 0..count {
        let v: Vec<String> = families
            .iter()
            .map(|f| f.values.choose(rng).unwrap().clone())
            .collect();
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

pub fn random_instance(rng: &mut impl Rng, limits: &Limits) -> Instance {
    let schema = AttributeSchema {
        subject_families: families(rng, "A", limits),
        object_families: families(rng, "B", limits),
    };
    let subjects = vectors(rng, &schema.subject_families, limits.max_entities);
    let objects = vectors(rng, &schema.object_families, limits.max_entities);
    let rights: Vec<String> = (1..=rng.gen_range(1..=limits.max_rights)).map(|k| format!("r{k}")).collect();
    let mut profiles = Vec::new();
    for (k, v) in subjects.iter().enumerate() {
        profiles.push(EntityProfile::subject(&format!("S{}", k + 1), v.clone()));
    }
    for (k, v) in objects.iter().enumerate() {
        profiles.push(EntityProfile::object(&format!("O{}", k + 1), v.clone()));
    }
    let universe = Universe::new(schema, rights.clone(), &profiles).unwrap();

    let target = rng.gen_range(0..=limits.max_rules);
    let mut rules: Vec<Rule> = Vec::new();
    for _ in 0..target * 3 {
        if rules.len() == target {
            break;
        }
        let s = rng.gen_range(0..subjects.len());
        let o = rng.gen_range(0..objects.len());
        let picked: Vec<String> = rights.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
        let picked = if picked.is_empty() {
            vec![rights.choose(rng).unwrap().clone()]
        } else {
            picked
        };
        let polarity = if rng.gen_bool(0.5) {
            Polarity::Allow
        } else {
            Polarity::Deny
        };
        let rule = Rule::new(
            &format!("S{}", s + 1),
            &format!("O{}", o + 1),
            Decision::new(polarity, RightsSet::new(picked).unwrap()),
        );
        if rules.iter().all(|r| !r.conflicts_with(&rule)) {
            rules.push(rule);
        }
    }
    Instance {
        universe,
        rules,
        subjects,
        objects,
    }
}
