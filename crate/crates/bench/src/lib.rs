//! Shared fixtures for the criterion benchmarks.

use pilotcluster_core::geometry::Deployment;
use pilotcluster_core::propagation::PropagationStats;
use pilotcluster_core::seeds::sub_rng;
use pilotcluster_core::utility::SystemParams;

/// A representative network at the usual operating point: L cells at
/// 25 BS/km², S = 400, alpha = 0.5, 5 dB SNR, unsaturated scheduling.
pub fn fixture(l: usize, antennas: usize, mu_samples: usize) -> (Deployment, PropagationStats, SystemParams) {
    let mut rng = sub_rng(0xbe9c4, l as u64, "bench-deployment");
    let deployment = Deployment::generate(l, 25.0, 3.0, 10.0, &mut rng).unwrap();
    let stats = PropagationStats::estimate(&deployment, mu_samples, &mut rng).unwrap();
    let pilots_per_cell = 200 / l;
    let params = SystemParams::new(
        antennas,
        400,
        0.5,
        10f64.powf(0.5),
        vec![l * pilots_per_cell; l],
    )
    .unwrap();
    (deployment, stats, params)
}
