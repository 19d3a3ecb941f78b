//! Comparison schemes and the exhaustive optimum oracle.
//!
//! Noncooperation keeps every cell on its private pilots; random structures
//! bin the cells uniformly; full pilot reuse shares the whole budget
//! network-wide. For small networks every set partition can be enumerated
//! (restricted growth strings) and the sum-utility optimum found exactly.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::CoalitionStructure;
use crate::propagation::PropagationStats;
use crate::utility::{structure_utilities, CombiningScheme, SystemParams};

pub use crate::utility::full_reuse_utilities;

/// Largest network for which exhaustive enumeration is allowed
/// (`Bell(12)` is ~4.2 million structures).
pub const PARTITION_LIMIT: usize = 12;

/// Noncooperation: one singleton coalition per cell.
pub fn singleton_structure(l: usize) -> CoalitionStructure {
    CoalitionStructure::singletons(l)
}

/// Random structure with roughly `target_avg_size` cells per coalition:
/// `ceil(l / target)` bins, each cell assigned uniformly, empty bins
/// dropped by canonicalization.
pub fn random_structure<R: Rng + ?Sized>(
    l: usize,
    target_avg_size: usize,
    rng: &mut R,
) -> Result<CoalitionStructure> {
    if l < 1 || target_avg_size < 1 || target_avg_size > l {
        return Err(Error::InvalidParameter(
            "need 1 <= target_avg_size <= L".into(),
        ));
    }
    let bins = l.div_ceil(target_avg_size);
    let labels = (0..l).map(|_| rng.random_range(0..bins)).collect();
    Ok(CoalitionStructure::from_assignment(labels))
}

/// Iterator over every set partition of `{0, .., l-1}`, via restricted
/// growth strings in lexicographic order. Yields `Bell(l)` structures, each
/// exactly once and already canonical.
pub struct Partitions {
    labels: Vec<usize>,
    max_prefix: Vec<usize>,
    done: bool,
}

/// Enumerates all coalition structures of an `l`-cell network.
pub fn enumerate_partitions(l: usize) -> Result<Partitions> {
    if l > PARTITION_LIMIT {
        return Err(Error::LimitExceeded(format!(
            "enumeration of {l} cells exceeds the limit of {PARTITION_LIMIT}"
        )));
    }
    Ok(Partitions {
        labels: vec![0; l],
        max_prefix: vec![0; l],
        done: false,
    })
}

impl Iterator for Partitions {
    type Item = CoalitionStructure;

    fn next(&mut self) -> Option<CoalitionStructure> {
        if self.done {
            return None;
        }
        let current = CoalitionStructure::from_assignment(self.labels.clone());

        // Advance the restricted growth string: rightmost position that can
        // still grow is incremented, everything after it resets to zero.
        let n = self.labels.len();
        let mut i = n;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.labels[i] <= self.max_prefix[i] {
                self.labels[i] += 1;
                let new_max = self.max_prefix[i].max(self.labels[i]);
                for k in i + 1..n {
                    self.labels[k] = 0;
                    self.max_prefix[k] = new_max;
                }
                break;
            }
        }
        Some(current)
    }
}

/// Result of the exhaustive search.
#[derive(Debug, Clone)]
pub struct ExhaustiveResult {
    pub best: CoalitionStructure,
    pub best_sum: f64,
    pub structures_evaluated: u64,
    /// Structures skipped because zero-forcing was infeasible in some cell.
    pub skipped_zf_infeasible: u64,
}

/// Arg-max of the sum of per-cell utilities over every coalition structure.
/// Ties break towards the earlier structure in enumeration order.
pub fn exhaustive_optimum(
    l: usize,
    stats: &PropagationStats,
    params: &SystemParams,
    scheme: CombiningScheme,
) -> Result<ExhaustiveResult> {
    if l != params.n_cells() || l != stats.n_cells() {
        return Err(Error::InvalidParameter(
            "params and stats must match the requested L".into(),
        ));
    }
    const CHUNK: usize = 4096;

    let mut iter = enumerate_partitions(l)?;
    let mut best: Option<(f64, CoalitionStructure)> = None;
    let mut evaluated = 0u64;
    let mut skipped = 0u64;

    loop {
        let chunk: Vec<CoalitionStructure> = iter.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            break;
        }
        let scored: Vec<(Option<f64>, CoalitionStructure)> = chunk
            .into_par_iter()
            .map(|structure| match structure_utilities(&structure, stats, params, scheme) {
                Ok((_, sum)) => Ok((Some(sum), structure)),
                Err(Error::ZfInfeasible { .. }) => Ok((None, structure)),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        // Sequential reduction in enumeration order; strict comparison keeps
        // the earliest structure on ties.
        for (sum, structure) in scored {
            match sum {
                Some(s) => {
                    evaluated += 1;
                    if best.as_ref().is_none_or(|(b, _)| s > *b) {
                        best = Some((s, structure));
                    }
                }
                None => skipped += 1,
            }
        }
    }

    match best {
        Some((best_sum, structure)) => Ok(ExhaustiveResult {
            best: structure,
            best_sum,
            structures_evaluated: evaluated,
            skipped_zf_infeasible: skipped,
        }),
        None => Err(Error::NumericalDomain(
            "every structure was zero-forcing infeasible".into(),
        )),
    }
}
