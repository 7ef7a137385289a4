//! Brute-force reference for both interpolation modes.
//!
//! Works on raw value vectors and rule triples only. Coincidence is a boolean
//! mask per family; dominance compares masks from the most significant family
//! down. Nothing here calls into the engine.

use std::collections::BTreeSet;

use precedent_core::{AccessMatrix, CellState, Decision, DominanceDepth, Rule, UndefinedReason};

use super::Instance;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleCell {
    Explicit(BTreeSet<Decision>),
    Implicit { decision: Decision, derived: bool },
    NoInfluence,
    Ambiguous,
}

fn mask(a: &[String], b: &[String]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| x == y).collect()
}

/// `Greater` when `a` is the more significant coincidence.
fn mask_cmp(a: &[bool], b: &[bool], depth: DominanceDepth) -> std::cmp::Ordering {
    match depth {
        DominanceDepth::StrictPaper => {
            let head = |m: &[bool]| m.iter().position(|&x| x).unwrap_or(usize::MAX);
            head(b).cmp(&head(a))
        }
        DominanceDepth::Lexicographic => {
            for (x, y) in a.iter().zip(b) {
                if x != y {
                    return x.cmp(y);
                }
            }
            std::cmp::Ordering::Equal
        }
    }
}

struct Src {
    mask: Vec<bool>,
    decision: Decision,
    explicit: bool,
}

enum Pick {
    Winner(Decision),
    Ambiguous,
    None,
}

fn pick(sources: Vec<Src>, depth: DominanceDepth) -> Pick {
    let sources: Vec<Src> = sources.into_iter().filter(|s| s.mask.iter().any(|&b| b)).collect();
    if sources.is_empty() {
        return Pick::None;
    }
    // Exhaustive: a source is maximal if nothing beats it.
    let maximal: Vec<&Src> = sources
        .iter()
        .filter(|s| {
            sources
                .iter()
                .all(|t| mask_cmp(&t.mask, &s.mask, depth) != std::cmp::Ordering::Greater)
        })
        .collect();
    let maximal: Vec<&Src> = if maximal.iter().any(|s| s.explicit) {
        maximal.into_iter().filter(|s| s.explicit).collect()
    } else {
        maximal
    };
    let decisions: BTreeSet<&Decision> = maximal.iter().map(|s| &s.decision).collect();
    if decisions.len() == 1 {
        Pick::Winner(maximal[0].decision.clone())
    } else {
        Pick::Ambiguous
    }
}

fn index_of(ids: &str) -> usize {
    ids[1..].parse::<usize>().unwrap() - 1
}

struct Raw<'a> {
    subjects: &'a [Vec<String>],
    objects: &'a [Vec<String>],
    rules: Vec<(usize, usize, Decision)>,
}

impl Raw<'_> {
    fn explicit(&self, i: usize, j: usize) -> BTreeSet<Decision> {
        self.rules
            .iter()
            .filter(|(s, o, _)| *s == i && *o == j)
            .map(|(_, _, d)| d.clone())
            .collect()
    }

    fn row(&self, i: usize, j: usize) -> Vec<Src> {
        self.rules
            .iter()
            .filter(|(s, o, _)| *s == i && *o != j)
            .map(|(_, o, d)| Src {
                mask: mask(&self.objects[j], &self.objects[*o]),
                decision: d.clone(),
                explicit: true,
            })
            .collect()
    }

    fn column(&self, i: usize, j: usize) -> Vec<Src> {
        self.rules
            .iter()
            .filter(|(s, o, _)| *o == j && *s != i)
            .map(|(s, _, d)| Src {
                mask: mask(&self.subjects[i], &self.subjects[*s]),
                decision: d.clone(),
                explicit: true,
            })
            .collect()
    }

    fn has_row_influence(&self, i: usize, j: usize) -> bool {
        self.row(i, j).iter().any(|s| s.mask.iter().any(|&b| b))
    }
}

fn raw(instance: &Instance) -> Raw<'_> {
    Raw {
        subjects: &instance.subjects,
        objects: &instance.objects,
        rules: instance
            .rules
            .iter()
            .map(|r: &Rule| (index_of(r.subject.as_str()), index_of(r.object.as_str()), r.decision.clone()))
            .collect(),
    }
}

fn to_cell(p: Pick, derived: bool) -> OracleCell {
    match p {
        Pick::Winner(decision) => OracleCell::Implicit { decision, derived },
        Pick::Ambiguous => OracleCell::Ambiguous,
        Pick::None => OracleCell::NoInfluence,
    }
}

pub fn partial(instance: &Instance, depth: DominanceDepth) -> Vec<Vec<OracleCell>> {
    let r = raw(instance);
    (0..r.subjects.len())
        .map(|i| {
            (0..r.objects.len())
                .map(|j| {
                    let explicit = r.explicit(i, j);
                    if !explicit.is_empty() {
                        OracleCell::Explicit(explicit)
                    } else if r.has_row_influence(i, j) {
                        to_cell(pick(r.row(i, j), depth), false)
                    } else {
                        to_cell(pick(r.column(i, j), depth), false)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn sequential(instance: &Instance, depth: DominanceDepth) -> Vec<Vec<OracleCell>> {
    let r = raw(instance);
    let (ns, no) = (r.subjects.len(), r.objects.len());
    let mut grid: Vec<Vec<Option<OracleCell>>> = vec![vec![None; no]; ns];
    for i in 0..ns {
        for j in 0..no {
            let explicit = r.explicit(i, j);
            if !explicit.is_empty() {
                grid[i][j] = Some(OracleCell::Explicit(explicit));
            } else if r.has_row_influence(i, j) {
                grid[i][j] = Some(to_cell(pick(r.row(i, j), depth), true));
            }
        }
    }
    let stage_a = grid.clone();
    for i in 0..ns {
        for j in 0..no {
            if grid[i][j].is_some() {
                continue;
            }
            let mut sources = r.column(i, j);
            for k in (0..ns).filter(|&k| k != i) {
                if let Some(OracleCell::Implicit { decision, .. }) = &stage_a[k][j] {
                    sources.push(Src {
                        mask: mask(&r.subjects[i], &r.subjects[k]),
                        decision: decision.clone(),
                        explicit: false,
                    });
                }
            }
            grid[i][j] = Some(to_cell(pick(sources, depth), false));
        }
    }
    grid.into_iter()
        .map(|row| row.into_iter().map(Option::unwrap).collect())
        .collect()
}

/// The engine's matrix in the oracle's vocabulary.
pub fn observe(matrix: &AccessMatrix) -> Vec<Vec<OracleCell>> {
    (0..matrix.subjects.len())
        .map(|i| {
            (0..matrix.objects.len())
                .map(|j| match &matrix.cells[i][j] {
                    CellState::Explicit { rules } => {
                        OracleCell::Explicit(rules.iter().map(|r| r.decision.clone()).collect())
                    }
                    CellState::Implicit { decision, .. } => OracleCell::Implicit {
                        decision: decision.clone(),
                        derived: matrix.is_derived_at(i, j),
                    },
                    CellState::Undefined {
                        reason: UndefinedReason::NoInfluence,
                    } => OracleCell::NoInfluence,
                    CellState::Undefined { .. } => OracleCell::Ambiguous,
                })
                .collect()
        })
        .collect()
}
