//! Permutation check: the same admitted set in any order must give the same matrix.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Error;
use crate::interpolate::{AccessMatrix, CellState};
use crate::model::EntityId;
use crate::precedent::Rule;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderMismatch {
    pub trial: usize,
    pub permutation: Vec<Rule>,
    pub subject: EntityId,
    pub object: EntityId,
    pub baseline: CellState,
    pub permuted: CellState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderReport {
    pub trials: usize,
    pub seed: u64,
    pub mismatch: Option<OrderMismatch>,
}

impl OrderReport {
    pub fn passed(&self) -> bool {
        self.mismatch.is_none()
    }
}

fn first_difference(a: &AccessMatrix, b: &AccessMatrix) -> Option<(EntityId, EntityId, CellState, CellState)> {
    a.iter_cells()
        .zip(b.iter_cells())
        .find(|((_, _, x), (_, _, y))| x != y)
        .map(|((s, o, x), (_, _, y))| (s.clone(), o.clone(), x.clone(), y.clone()))
}

/// Runs `engine` on the admitted rules as given, then on `trials` seeded
/// random permutations, and stops at the first matrix that differs.
pub fn check_order<F>(admitted: &[Rule], trials: usize, seed: u64, mut engine: F) -> Result<OrderReport, Error>
where
    F: FnMut(&[Rule]) -> Result<AccessMatrix, Error>,
{
    let baseline = engine(admitted)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut permutation = admitted.to_vec();
    for trial in 1..=trials {
        permutation.shuffle(&mut rng);
        let matrix = engine(&permutation)?;
        if matrix != baseline {
            // Only non-cell metadata differs if no cell does; report the first cell anyway.
            let (subject, object, base, permuted) = first_difference(&baseline, &matrix).unwrap_or_else(|| {
                let s = baseline.subjects.first().cloned().unwrap_or_else(|| "?".into());
                let o = baseline.objects.first().cloned().unwrap_or_else(|| "?".into());
                let cell = baseline.cells.first().and_then(|r| r.first()).cloned().unwrap_or(CellState::Undefined {
                    reason: crate::interpolate::UndefinedReason::NoInfluence,
                });
                (s, o, cell.clone(), cell)
            });
            return Ok(OrderReport {
                trials: trial,
                seed,
                mismatch: Some(OrderMismatch {
                    trial,
                    permutation,
                    subject,
                    object,
                    baseline: base,
                    permuted,
                }),
            });
        }
    }
    Ok(OrderReport {
        trials,
        seed,
        mismatch: None,
    })
}
