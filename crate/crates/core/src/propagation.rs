//! Monte Carlo estimation of the interference-coupling moments.
//!
//! For a user placed uniformly in cell `l`, the ratio between its channel
//! variance towards BS `j` and towards its serving BS `l` summarizes how
//! strongly cell `l` couples into cell `j`. The first and second moments of
//! that ratio are the geometry's entire footprint in the closed-form
//! utilities, so they are estimated once per deployment and treated as exact
//! constants downstream.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Deployment;

/// First and second moments of the cross-to-serving attenuation ratio, as
/// `L x L` matrices indexed `(target BS j, serving cell l)`.
#[derive(Debug, Clone)]
pub struct PropagationStats {
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    n_cells: usize,
    n_samples: usize,
}

impl PropagationStats {
    /// Estimates both moment matrices with `n_samples` user positions per
    /// cell. Cells are processed independently with sub-seeds drawn from
    /// `rng` up front, so the result does not depend on the parallel
    /// schedule.
    pub fn estimate<R: Rng + ?Sized>(
        deployment: &Deployment,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_samples < 1 {
            return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
        }
        let l_cells = deployment.len();
        let cell_seeds: Vec<u64> = (0..l_cells).map(|_| rng.next_u64()).collect();

        let columns: Vec<(Vec<f64>, Vec<f64>)> = cell_seeds
            .into_par_iter()
            .enumerate()
            .map(|(l, seed)| {
                let mut cell_rng = ChaCha8Rng::seed_from_u64(seed);
                let mut m1 = vec![0.0; l_cells];
                let mut m2 = vec![0.0; l_cells];
                for _ in 0..n_samples {
                    let z = deployment.sample_user_position(l, &mut cell_rng);
                    let own = deployment.attenuation(l, z);
                    for j in 0..l_cells {
                        let ratio = deployment.attenuation(j, z) / own;
                        m1[j] += ratio;
                        m2[j] += ratio * ratio;
                    }
                }
                for j in 0..l_cells {
                    m1[j] /= n_samples as f64;
                    m2[j] /= n_samples as f64;
                }
                // The own-cell ratio is identically one.
                m1[l] = 1.0;
                m2[l] = 1.0;
                (m1, m2)
            })
            .collect();

        let mut mu1 = vec![0.0; l_cells * l_cells];
        let mut mu2 = vec![0.0; l_cells * l_cells];
        for (l, (m1, m2)) in columns.into_iter().enumerate() {
            for j in 0..l_cells {
                mu1[j * l_cells + l] = m1[j];
                mu2[j * l_cells + l] = m2[j];
            }
        }
        Ok(Self {
            mu1,
            mu2,
            n_cells: l_cells,
            n_samples,
        })
    }

    /// Builds stats from explicit matrices (synthetic scenarios and tests).
    ///
    /// `mu1[j][l]` couples serving cell `l` into BS `j`. Diagonals must be
    /// one, all entries in `(0, 1]`, and `mu2 >= mu1²` entrywise.
    pub fn from_matrices(mu1: Vec<Vec<f64>>, mu2: Vec<Vec<f64>>) -> Result<Self> {
        let n = mu1.len();
        if n == 0 || mu2.len() != n || mu1.iter().any(|r| r.len() != n) || mu2.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(
                "moment matrices must be square and equally sized".into(),
            ));
        }
        for j in 0..n {
            for l in 0..n {
                let (a, b) = (mu1[j][l], mu2[j][l]);
                if j == l && (a != 1.0 || b != 1.0) {
                    return Err(Error::InvalidParameter("diagonals must equal 1".into()));
                }
                if !(a > 0.0 && a <= 1.0 && b > 0.0 && b <= 1.0) {
                    return Err(Error::InvalidParameter(
                        "moment entries must lie in (0, 1]".into(),
                    ));
                }
                if b + 1e-12 < a * a {
                    return Err(Error::InvalidParameter(
                        "second moment below squared mean".into(),
                    ));
                }
            }
        }
        Ok(Self {
            mu1: mu1.into_iter().flatten().collect(),
            mu2: mu2.into_iter().flatten().collect(),
            n_cells: n,
            n_samples: 0,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// First moment of `d_j / d_l` for users in cell `l`.
    #[inline]
    pub fn mu1(&self, j: usize, l: usize) -> f64 {
        self.mu1[j * self.n_cells + l]
    }

    /// Second moment of `d_j / d_l` for users in cell `l`.
    #[inline]
    pub fn mu2(&self, j: usize, l: usize) -> f64 {
        self.mu2[j * self.n_cells + l]
    }
}

/// Per-entry standard error of the first-moment ratio estimate: sample
/// standard deviation divided by `sqrt(n_samples)`. Diagonal entries are
/// exactly zero.
pub fn mu_standard_errors<R: Rng + ?Sized>(
    deployment: &Deployment,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if n_samples < 1 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let l_cells = deployment.len();
    let cell_seeds: Vec<u64> = (0..l_cells).map(|_| rng.next_u64()).collect();

    let columns: Vec<Vec<f64>> = cell_seeds
        .into_par_iter()
        .enumerate()
        .map(|(l, seed)| {
            let mut cell_rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sum = vec![0.0; l_cells];
            let mut sum_sq = vec![0.0; l_cells];
            for _ in 0..n_samples {
                let z = deployment.sample_user_position(l, &mut cell_rng);
                let own = deployment.attenuation(l, z);
                for j in 0..l_cells {
                    let ratio = deployment.attenuation(j, z) / own;
                    sum[j] += ratio;
                    sum_sq[j] += ratio * ratio;
                }
            }
            let n = n_samples as f64;
            (0..l_cells)
                .map(|j| {
                    if j == l {
                        return 0.0;
                    }
                    let mean = sum[j] / n;
                    let var = (sum_sq[j] / n - mean * mean).max(0.0);
                    // Unbiased sample variance when more than one sample.
                    let var = if n_samples > 1 { var * n / (n - 1.0) } else { var };
                    (var / n).sqrt()
                })
                .collect()
        })
        .collect();

    let mut errors = vec![vec![0.0; l_cells]; l_cells];
    for (l, col) in columns.into_iter().enumerate() {
        for j in 0..l_cells {
            errors[j][l] = col[j];
        }
    }
    Ok(errors)
}
