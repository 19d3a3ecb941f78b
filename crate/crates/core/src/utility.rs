//! Closed-form average sum spectral efficiency per cell.
//!
//! For a coalition structure, each cell schedules as many users as its
//! pilot share and user population allow, and its average sum spectral
//! efficiency has a closed form driven by the propagation moments: a pilot
//! contamination part contributed only by coalition co-members, and an
//! inter-user interference part contributed by every cell. Maximum-ratio
//! combining keeps the full array gain `M`; zero-forcing trades `K_j`
//! degrees of freedom for intra-cell interference suppression.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::CoalitionStructure;
use crate::propagation::PropagationStats;

/// Receive combining applied by every BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CombiningScheme {
    Mrc,
    Zfc,
}

impl fmt::Display for CombiningScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CombiningScheme::Mrc => write!(f, "mrc"),
            CombiningScheme::Zfc => write!(f, "zfc"),
        }
    }
}

impl FromStr for CombiningScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mrc" => Ok(CombiningScheme::Mrc),
            "zfc" => Ok(CombiningScheme::Zfc),
            other => Err(Error::InvalidParameter(format!(
                "unknown combining scheme '{other}'"
            ))),
        }
    }
}

/// System-level constants: array size, frame layout, pilot budget, SNR, and
/// per-cell user caps.
#[derive(Debug, Clone)]
pub struct SystemParams {
    antennas: usize,
    frame_symbols: usize,
    pilot_fraction: f64,
    pilots_per_cell: usize,
    pilots_total: usize,
    snr: f64,
    k_max: Vec<usize>,
}

impl SystemParams {
    /// `alpha` is the pilot fraction of the frame; the pilot budget is
    /// rounded down so that every one of the `k_max.len()` cells owns an
    /// integer number of unique pilots.
    pub fn new(
        antennas: usize,
        frame_symbols: usize,
        alpha: f64,
        snr: f64,
        k_max: Vec<usize>,
    ) -> Result<Self> {
        let cells = k_max.len();
        if cells == 0 {
            return Err(Error::InvalidParameter("need at least one cell".into()));
        }
        if antennas < 1 {
            return Err(Error::InvalidParameter("M must be >= 1".into()));
        }
        if !(snr > 0.0) {
            return Err(Error::InvalidParameter("snr must be > 0".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
        }
        if k_max.iter().any(|&k| k < 1) {
            return Err(Error::InvalidParameter("K_max must be >= 1 per cell".into()));
        }
        let pilots_per_cell = (alpha * frame_symbols as f64 / cells as f64).floor() as usize;
        if pilots_per_cell < 1 {
            return Err(Error::InvalidParameter(
                "pilot fraction leaves no pilot per cell".into(),
            ));
        }
        let pilots_total = pilots_per_cell * cells;
        debug_assert!(pilots_total <= frame_symbols);
        Ok(Self {
            antennas,
            frame_symbols,
            pilot_fraction: alpha,
            pilots_per_cell,
            pilots_total,
            snr,
            k_max,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.k_max.len()
    }

    /// Antennas per BS (`M`).
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Symbols per frame (`S`).
    pub fn frame_symbols(&self) -> usize {
        self.frame_symbols
    }

    pub fn pilot_fraction(&self) -> f64 {
        self.pilot_fraction
    }

    /// Unique pilots owned by each cell (`B_cell`).
    pub fn pilots_per_cell(&self) -> usize {
        self.pilots_per_cell
    }

    /// Network pilot budget (`B = L * B_cell`).
    pub fn pilots_total(&self) -> usize {
        self.pilots_total
    }

    /// Linear SNR per receive antenna.
    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn k_max(&self) -> &[usize] {
        &self.k_max
    }

    /// Fraction of the frame left for payload data.
    pub fn payload_fraction(&self) -> f64 {
        1.0 - self.pilots_total as f64 / self.frame_symbols as f64
    }
}

/// Number of users a cell schedules given its coalition size: limited by
/// the pooled pilots and by the cell's user population.
pub fn schedule(coalition_size: usize, pilots_per_cell: usize, k_max_j: usize) -> usize {
    (coalition_size * pilots_per_cell).min(k_max_j)
}

/// Scheduled user counts for every cell under a structure.
pub fn scheduled_counts(structure: &CoalitionStructure, params: &SystemParams) -> Vec<usize> {
    (0..structure.n_cells())
        .map(|j| {
            schedule(
                structure.coalition_size(j),
                params.pilots_per_cell(),
                params.k_max()[j],
            )
        })
        .collect()
}

/// Interference term for MRC: pilot contamination from coalition co-members
/// plus inter-user interference and noise from the whole network.
pub fn interference_mrc(
    j: usize,
    structure: &CoalitionStructure,
    stats: &PropagationStats,
    params: &SystemParams,
) -> f64 {
    let k = scheduled_counts(structure, params);
    interference_mrc_with_counts(j, structure.coalition_of(j), &k, stats, params)
}

fn interference_mrc_with_counts(
    j: usize,
    coalition: Vec<usize>,
    k: &[usize],
    stats: &PropagationStats,
    params: &SystemParams,
) -> f64 {
    let m = params.antennas() as f64;
    let snr = params.snr();
    let pool = (coalition.len() * params.pilots_per_cell()) as f64;

    let mut contamination = 0.0;
    let mut pool_load = 0.0;
    for &l in &coalition {
        if l == j {
            continue;
        }
        let share = k[l] as f64 / pool;
        let mu1 = stats.mu1(j, l);
        let mu2 = stats.mu2(j, l);
        contamination += share * (mu2 + (mu2 - mu1 * mu1) / m);
        pool_load += share * mu1;
    }

    let a_j = 1.0 + pool_load + 1.0 / (params.pilots_total() as f64 * snr);
    let network: f64 = (0..k.len()).map(|l| k[l] as f64 * stats.mu1(j, l)).sum();
    contamination + (network / m + 1.0 / (m * snr)) * a_j
}

/// Interference term for ZFC; requires `M > K_j`.
pub fn interference_zfc(
    j: usize,
    structure: &CoalitionStructure,
    stats: &PropagationStats,
    params: &SystemParams,
) -> Result<f64> {
    let k = scheduled_counts(structure, params);
    interference_zfc_with_counts(j, structure.coalition_of(j), &k, stats, params)
}

fn interference_zfc_with_counts(
    j: usize,
    coalition: Vec<usize>,
    k: &[usize],
    stats: &PropagationStats,
    params: &SystemParams,
) -> Result<f64> {
    let m = params.antennas();
    let k_j = k[j];
    if m <= k_j {
        return Err(Error::ZfInfeasible {
            cell: j,
            antennas: m,
            users: k_j,
        });
    }
    let gain = (m - k_j) as f64;
    let snr = params.snr();
    let pool = (coalition.len() * params.pilots_per_cell()) as f64;

    let mut contamination = 0.0;
    let mut pool_load = 0.0;
    for &l in &coalition {
        if l == j {
            continue;
        }
        let share = k[l] as f64 / pool;
        let mu1 = stats.mu1(j, l);
        let mu2 = stats.mu2(j, l);
        contamination += share * (mu2 + (mu2 - (k[l] as f64 + 1.0) * mu1 * mu1) / gain);
        pool_load += share * mu1;
    }

    let a_j = 1.0 + pool_load + 1.0 / (params.pilots_total() as f64 * snr);
    let network: f64 = (0..k.len()).map(|l| k[l] as f64 * stats.mu1(j, l)).sum();
    Ok(contamination - k_j as f64 / gain + ((network + 1.0 / snr) / gain) * a_j)
}

/// Average sum spectral efficiency of cell `j` in bit/symbol.
pub fn cell_utility(
    j: usize,
    structure: &CoalitionStructure,
    stats: &PropagationStats,
    params: &SystemParams,
    scheme: CombiningScheme,
) -> Result<f64> {
    let interference = match scheme {
        CombiningScheme::Mrc => interference_mrc(j, structure, stats, params),
        CombiningScheme::Zfc => interference_zfc(j, structure, stats, params)?,
    };
    let k_j = schedule(
        structure.coalition_size(j),
        params.pilots_per_cell(),
        params.k_max()[j],
    );
    utility_from_interference(j, k_j, interference, params)
}

fn utility_from_interference(
    j: usize,
    k_j: usize,
    interference: f64,
    params: &SystemParams,
) -> Result<f64> {
    if !(interference > 0.0) || !interference.is_finite() {
        return Err(Error::NumericalDomain(format!(
            "non-positive interference term {interference} in cell {j}"
        )));
    }
    Ok(params.payload_fraction() * k_j as f64 * (1.0 + 1.0 / interference).log2())
}

/// Per-cell utilities plus their sum (the social objective of the
/// exhaustive oracle).
pub fn structure_utilities(
    structure: &CoalitionStructure,
    stats: &PropagationStats,
    params: &SystemParams,
    scheme: CombiningScheme,
) -> Result<(Vec<f64>, f64)> {
    let per_cell: Vec<f64> = (0..structure.n_cells())
        .map(|j| cell_utility(j, structure, stats, params, scheme))
        .collect::<Result<_>>()?;
    let sum = per_cell.iter().sum();
    Ok((per_cell, sum))
}

/// Utilities under full pilot reuse: every cell draws from the whole pilot
/// budget (grand-coalition contamination) while the scheduled counts are
/// supplied externally.
pub fn full_reuse_utilities(
    k: &[usize],
    stats: &PropagationStats,
    params: &SystemParams,
    scheme: CombiningScheme,
) -> Result<Vec<f64>> {
    let cells = params.n_cells();
    if k.len() != cells {
        return Err(Error::InvalidParameter(
            "scheduled counts must cover every cell".into(),
        ));
    }
    if k.iter().any(|&kj| kj > params.pilots_total()) {
        return Err(Error::InvalidParameter(
            "scheduled count exceeds the pilot budget".into(),
        ));
    }
    let everyone: Vec<usize> = (0..cells).collect();
    (0..cells)
        .map(|j| {
            let interference = match scheme {
                CombiningScheme::Mrc => {
                    interference_mrc_with_counts(j, everyone.clone(), k, stats, params)
                }
                CombiningScheme::Zfc => {
                    interference_zfc_with_counts(j, everyone.clone(), k, stats, params)?
                }
            };
            utility_from_interference(j, k[j], interference, params)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::CoalitionStructure;

    fn snr_5db() -> f64 {
        10f64.powf(0.5)
    }

    fn single_cell_params() -> SystemParams {
        SystemParams::new(100, 400, 0.5, snr_5db(), vec![10]).unwrap()
    }

    fn uniform_stats(l: usize, mu1: f64, mu2: f64) -> PropagationStats {
        let m1 = (0..l)
            .map(|j| (0..l).map(|i| if i == j { 1.0 } else { mu1 }).collect())
            .collect();
        let m2 = (0..l)
            .map(|j| (0..l).map(|i| if i == j { 1.0 } else { mu2 }).collect())
            .collect();
        PropagationStats::from_matrices(m1, m2).unwrap()
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(schedule(4, 10, 200), 40);
        assert_eq!(schedule(1, 10, 10), 10);
        assert_eq!(schedule(3, 10, 25), 25);
    }

    #[test]
    fn pilot_budget_rounding() {
        let p = SystemParams::new(100, 400, 0.5, snr_5db(), vec![10; 16]).unwrap();
        assert_eq!(p.pilots_per_cell(), 12); // floor(200 / 16)
        assert_eq!(p.pilots_total(), 192);
        let p = single_cell_params();
        assert_eq!(p.pilots_per_cell(), 200);
        assert_eq!(p.pilots_total(), 200);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SystemParams::new(0, 400, 0.5, 1.0, vec![1]).is_err());
        assert!(SystemParams::new(10, 400, 0.0, 1.0, vec![1]).is_err());
        assert!(SystemParams::new(10, 400, 1.0, 1.0, vec![1]).is_err());
        assert!(SystemParams::new(10, 400, 0.5, 0.0, vec![1]).is_err());
        assert!(SystemParams::new(10, 400, 0.5, 1.0, vec![]).is_err());
        assert!(SystemParams::new(10, 400, 0.5, 1.0, vec![0]).is_err());
        // 400 cells at alpha = 0.5 leave no pilot per cell.
        assert!(SystemParams::new(10, 400, 0.5, 1.0, vec![1; 401]).is_err());
    }

    #[test]
    fn single_cell_mrc_interference_matches_hand_value() {
        let params = single_cell_params();
        let stats = uniform_stats(1, 1.0, 1.0);
        let structure = CoalitionStructure::singletons(1);
        let i = interference_mrc(0, &structure, &stats, &params);
        // (K/M + 1/(M snr)) * (1 + 1/(B snr)) with K=10, M=100, B=200.
        assert!((i - 0.103325).abs() < 1e-6, "I_mrc = {i}");
    }

    #[test]
    fn single_cell_zfc_interference_matches_hand_value() {
        let params = single_cell_params();
        let stats = uniform_stats(1, 1.0, 1.0);
        let structure = CoalitionStructure::singletons(1);
        let i = interference_zfc(0, &structure, &stats, &params).unwrap();
        assert!((i - 0.003695).abs() < 1e-6, "I_zfc = {i}");
        let i_mrc = interference_mrc(0, &structure, &stats, &params);
        assert!(i < i_mrc);
    }

    #[test]
    fn single_cell_utilities_match_hand_values() {
        let params = single_cell_params();
        let stats = uniform_stats(1, 1.0, 1.0);
        let structure = CoalitionStructure::singletons(1);
        let u_mrc = cell_utility(0, &structure, &stats, &params, CombiningScheme::Mrc).unwrap();
        assert!((u_mrc - 17.08).abs() < 0.01, "U_mrc = {u_mrc}");
        let u_zfc = cell_utility(0, &structure, &stats, &params, CombiningScheme::Zfc).unwrap();
        assert!((u_zfc - 40.4).abs() < 0.05, "U_zfc = {u_zfc}");
    }

    #[test]
    fn zfc_requires_more_antennas_than_users() {
        let params = SystemParams::new(10, 400, 0.5, snr_5db(), vec![10]).unwrap();
        let stats = uniform_stats(1, 1.0, 1.0);
        let structure = CoalitionStructure::singletons(1);
        match interference_zfc(0, &structure, &stats, &params) {
            Err(Error::ZfInfeasible { cell: 0, antennas: 10, users: 10 }) => {}
            other => panic!("expected ZfInfeasible, got {other:?}"),
        }
    }

    #[test]
    fn singleton_coalitions_have_no_contamination() {
        // With singleton coalitions both interference expressions reduce to
        // their contamination-free forms.
        let params = SystemParams::new(200, 400, 0.5, snr_5db(), vec![50; 4]).unwrap();
        let stats = uniform_stats(4, 0.2, 0.1);
        let structure = CoalitionStructure::singletons(4);
        let k = scheduled_counts(&structure, &params);
        let m = 200.0;
        let snr = snr_5db();
        let b = params.pilots_total() as f64;
        for j in 0..4 {
            let network: f64 = (0..4).map(|l| k[l] as f64 * stats.mu1(j, l)).sum();
            let a_j = 1.0 + 1.0 / (b * snr);
            let expected = (network / m + 1.0 / (m * snr)) * a_j;
            let i = interference_mrc(j, &structure, &stats, &params);
            assert!((i - expected).abs() < 1e-15);

            let gain = m - k[j] as f64;
            let expected_zfc = -(k[j] as f64) / gain + ((network + 1.0 / snr) / gain) * a_j;
            let i = interference_zfc(j, &structure, &stats, &params).unwrap();
            assert!((i - expected_zfc).abs() < 1e-15);
        }
    }

    #[test]
    fn mrc_interference_approaches_contamination_floor_for_huge_arrays() {
        let params = SystemParams::new(100_000_000, 400, 0.5, snr_5db(), vec![100; 2]).unwrap();
        let stats = uniform_stats(2, 0.4, 0.2);
        let structure = CoalitionStructure::grand(2);
        let k = scheduled_counts(&structure, &params);
        let pool = (2 * params.pilots_per_cell()) as f64;
        let floor: f64 = k[1] as f64 / pool * stats.mu2(0, 1);
        let i = interference_mrc(0, &structure, &stats, &params);
        assert!(
            (i - floor).abs() / floor < 1e-4,
            "I = {i}, contamination floor = {floor}"
        );
    }

    #[test]
    fn contamination_monotone_in_membership_at_fixed_counts() {
        // Adding a co-member while holding counts and the pool fixed can only
        // add nonnegative contamination terms.
        let params = SystemParams::new(500, 400, 0.5, snr_5db(), vec![200; 4]).unwrap();
        let stats = uniform_stats(4, 0.3, 0.15);
        let k = vec![20usize; 4];
        let small = interference_mrc_with_counts(0, vec![0, 1], &k, &stats, &params);
        let large = interference_mrc_with_counts(0, vec![0, 1, 2], &k, &stats, &params);
        assert!(large > small);
    }

    #[test]
    fn structure_utilities_sum_and_relabeling() {
        let params = SystemParams::new(300, 400, 0.5, snr_5db(), vec![40, 60, 30, 50]).unwrap();
        let mu1 = vec![
            vec![1.0, 0.2, 0.3, 0.1],
            vec![0.25, 1.0, 0.15, 0.35],
            vec![0.3, 0.1, 1.0, 0.2],
            vec![0.12, 0.4, 0.22, 1.0],
        ];
        let mu2: Vec<Vec<f64>> = mu1
            .iter()
            .map(|row| row.iter().map(|&x| (x * x + 0.01f64).min(1.0)).collect())
            .collect();
        let stats = PropagationStats::from_matrices(mu1.clone(), mu2.clone()).unwrap();
        let structure = CoalitionStructure::from_assignment(vec![0, 1, 0, 1]);
        let (per_cell, sum) = structure_utilities(&structure, &stats, &params, CombiningScheme::Mrc).unwrap();
        assert!((per_cell.iter().sum::<f64>() - sum).abs() < 1e-12);

        // Swap cells 0 and 1 everywhere; outputs must swap identically.
        let perm = [1usize, 0, 2, 3];
        let permute = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..4)
                .map(|j| (0..4).map(|l| m[perm[j]][perm[l]]).collect())
                .collect()
        };
        let stats_p = PropagationStats::from_matrices(permute(&mu1), permute(&mu2)).unwrap();
        let params_p = SystemParams::new(300, 400, 0.5, snr_5db(), vec![60, 40, 30, 50]).unwrap();
        let structure_p = CoalitionStructure::from_assignment(vec![1, 0, 0, 1]);
        let (per_cell_p, sum_p) =
            structure_utilities(&structure_p, &stats_p, &params_p, CombiningScheme::Mrc).unwrap();
        for j in 0..4 {
            assert!((per_cell[j] - per_cell_p[perm[j]]).abs() < 1e-12);
        }
        assert!((sum - sum_p).abs() < 1e-12);
    }

    #[test]
    fn single_cell_structure_sum_is_cell_utility() {
        let params = single_cell_params();
        let stats = uniform_stats(1, 1.0, 1.0);
        let structure = CoalitionStructure::singletons(1);
        let (per_cell, sum) =
            structure_utilities(&structure, &stats, &params, CombiningScheme::Zfc).unwrap();
        assert_eq!(per_cell.len(), 1);
        assert_eq!(per_cell[0], sum);
    }

    #[test]
    fn full_reuse_single_cell_equals_singleton() {
        let params = single_cell_params();
        let stats = uniform_stats(1, 1.0, 1.0);
        let structure = CoalitionStructure::singletons(1);
        let direct = cell_utility(0, &structure, &stats, &params, CombiningScheme::Mrc).unwrap();
        let reuse = full_reuse_utilities(&[10], &stats, &params, CombiningScheme::Mrc).unwrap();
        assert!((direct - reuse[0]).abs() < 1e-12);
    }

    #[test]
    fn full_reuse_with_grand_counts_equals_grand_coalition() {
        let params = SystemParams::new(500, 400, 0.5, snr_5db(), vec![500; 3]).unwrap();
        let stats = uniform_stats(3, 0.2, 0.1);
        let grand = CoalitionStructure::grand(3);
        let k = scheduled_counts(&grand, &params);
        let reuse = full_reuse_utilities(&k, &stats, &params, CombiningScheme::Mrc).unwrap();
        let (direct, _) = structure_utilities(&grand, &stats, &params, CombiningScheme::Mrc).unwrap();
        for j in 0..3 {
            assert!((reuse[j] - direct[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn full_reuse_never_beats_noncooperation_at_fixed_counts() {
        // Same scheduled counts, but grand-coalition contamination: the
        // contamination sum is strictly positive, so per-cell SE drops.
        let params = SystemParams::new(500, 400, 0.5, snr_5db(), vec![12; 8]).unwrap();
        let stats = uniform_stats(8, 0.25, 0.12);
        let singletons = CoalitionStructure::singletons(8);
        let k = scheduled_counts(&singletons, &params);
        let (noncoop, _) =
            structure_utilities(&singletons, &stats, &params, CombiningScheme::Mrc).unwrap();
        let reuse = full_reuse_utilities(&k, &stats, &params, CombiningScheme::Mrc).unwrap();
        for j in 0..8 {
            assert!(reuse[j] < noncoop[j]);
        }
    }

    #[test]
    fn utilities_are_deterministic() {
        let params = SystemParams::new(128, 400, 0.5, snr_5db(), vec![30; 5]).unwrap();
        let stats = uniform_stats(5, 0.3, 0.2);
        let structure = CoalitionStructure::from_assignment(vec![0, 0, 1, 1, 2]);
        let a = cell_utility(2, &structure, &stats, &params, CombiningScheme::Zfc).unwrap();
        let b = cell_utility(2, &structure, &stats, &params, CombiningScheme::Zfc).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
