//! Monte Carlo estimation of the per-cell ergodic spectral efficiency and
//! the validation report against the closed forms.
//!
//! The estimator follows the nesting of the achievable-rate bound: an outer
//! loop redraws all user positions; an inner loop redraws pilot
//! assignments, channels, and noise at fixed positions and estimates the
//! per-UE signal, interference, and combiner-energy expectations by sample
//! means; the SINR is assembled from those means and `log2(1 + SINR)` is
//! averaged over the position draws.
//!
//! Channel vectors that are independent of a UE's combiner in a given draw
//! (every UE outside the coalition, and coalition UEs not colliding with
//! any pilot the combiner depends on) contribute their exact conditional
//! expectation `d * ||g||²` instead of a sampled product. That replaces a
//! per-draw sample by its mean given the draw's pilots and combiner, so the
//! estimate targets the same expectations with less variance and far fewer
//! explicit inner products. Everything correlated with the combiner — the
//! serving channel, same-cell channels under zero-forcing, and every
//! colliding UE — is sampled explicitly through the full estimation chain.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::CoalitionStructure;
use crate::geometry::{Deployment, Position};
use crate::seeds::sub_rng;
use crate::utility::{scheduled_counts, structure_utilities, CombiningScheme, SystemParams};
use crate::validator::linalg::{dot_conj, hermitian_product, hpd_inverse, norm_sqr, product, CMat};
use crate::validator::realization::{
    fill_complex_gaussian, mmse_scale_and_delta, sample_pilot_assignment,
};

/// Per-cell spectral-efficiency estimate with standard errors over the
/// position draws.
#[derive(Debug, Clone)]
pub struct MonteCarloSe {
    pub per_cell: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_position_draws: usize,
    pub n_channel_draws: usize,
}

/// Channel-level estimate of the per-cell spectral efficiency under
/// coalition structure `structure`. Deterministic given `rng`; position
/// draws run in parallel with per-draw sub-seeds and index-ordered
/// reduction.
pub fn monte_carlo_se<R: Rng + ?Sized>(
    structure: &CoalitionStructure,
    params: &SystemParams,
    deployment: &Deployment,
    scheme: CombiningScheme,
    n_position_draws: usize,
    n_channel_draws: usize,
    rng: &mut R,
) -> Result<MonteCarloSe> {
    let l_cells = deployment.len();
    if structure.n_cells() != l_cells || params.n_cells() != l_cells {
        return Err(Error::InvalidParameter(
            "structure, params and deployment must agree on L".into(),
        ));
    }
    if n_position_draws < 2 || n_channel_draws < 1 {
        return Err(Error::InvalidParameter(
            "need >= 2 position draws and >= 1 channel draw".into(),
        ));
    }
    let k = scheduled_counts(structure, params);
    if scheme == CombiningScheme::Zfc {
        for j in 0..l_cells {
            if params.antennas() <= k[j] {
                return Err(Error::ZfInfeasible {
                    cell: j,
                    antennas: params.antennas(),
                    users: k[j],
                });
            }
        }
    }

    let master = rng.next_u64();
    let per_draw: Vec<Vec<f64>> = (0..n_position_draws)
        .into_par_iter()
        .map(|p| {
            let mut draw_rng = sub_rng(master, p as u64, "validator-position");
            position_draw(
                structure,
                params,
                deployment,
                scheme,
                &k,
                n_channel_draws,
                &mut draw_rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let n = n_position_draws as f64;
    let payload = params.payload_fraction();
    let mut per_cell = vec![0.0; l_cells];
    let mut std_err = vec![0.0; l_cells];
    for j in 0..l_cells {
        let mean = per_draw.iter().map(|d| d[j]).sum::<f64>() / n;
        let var = per_draw
            .iter()
            .map(|d| (d[j] - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        per_cell[j] = payload * mean;
        std_err[j] = payload * (var / n).sqrt();
    }
    Ok(MonteCarloSe {
        per_cell,
        std_err,
        n_position_draws,
        n_channel_draws,
    })
}

/// Per-UE accumulators over the channel draws of one position draw.
#[derive(Clone, Copy, Default)]
struct UeAccumulator {
    signal: Complex64,
    signal_sq: f64,
    combiner_energy: f64,
    interference: f64,
}

/// One position draw: returns the per-cell sums of `log2(1 + SINR)` over
/// the scheduled UEs (without the payload prefactor).
fn position_draw<R: Rng + ?Sized>(
    structure: &CoalitionStructure,
    params: &SystemParams,
    deployment: &Deployment,
    scheme: CombiningScheme,
    k: &[usize],
    n_channel_draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let l_cells = deployment.len();
    let snr = params.snr();

    // Draw all user positions and index UEs flatly across the network.
    let mut positions: Vec<Vec<Position>> = Vec::with_capacity(l_cells);
    for l in 0..l_cells {
        positions.push(
            (0..k[l])
                .map(|_| deployment.sample_user_position(l, rng))
                .collect(),
        );
    }
    let mut flat_base = vec![0usize; l_cells + 1];
    for l in 0..l_cells {
        flat_base[l + 1] = flat_base[l] + k[l];
    }
    let total_ues = flat_base[l_cells];

    // att[j][u]: attenuation from flat UE u to BS j.
    let mut att = vec![vec![0.0f64; total_ues]; l_cells];
    for (j, row) in att.iter_mut().enumerate() {
        for l in 0..l_cells {
            for m in 0..k[l] {
                row[flat_base[l] + m] = deployment.attenuation(j, positions[l][m]);
            }
        }
    }
    let serving_att: Vec<f64> = (0..l_cells)
        .flat_map(|l| (0..k[l]).map(move |m| (l, m)))
        .map(|(l, m)| att[l][flat_base[l] + m])
        .collect();

    // Interference coefficients that multiply the combiner energy: UEs in
    // other coalitions (constant over draws) and the coalition-wide total
    // (the per-draw explicit subset is subtracted from it).
    let blocks = structure.blocks();
    let mut out_coeff = vec![0.0f64; l_cells];
    let mut coalition_coeff = vec![0.0f64; l_cells];
    for j in 0..l_cells {
        let own_block = structure.coalition_id(j);
        for l in 0..l_cells {
            let mut sum = 0.0;
            for m in 0..k[l] {
                let u = flat_base[l] + m;
                sum += snr * att[j][u] / serving_att[u];
            }
            if structure.coalition_id(l) == own_block {
                coalition_coeff[j] += sum;
            } else {
                out_coeff[j] += sum;
            }
        }
    }

    let mut acc: Vec<Vec<UeAccumulator>> = (0..l_cells)
        .map(|j| vec![UeAccumulator::default(); k[j]])
        .collect();

    // Scratch reused across draws and coalitions.
    let mut h_all = CMat::zeros(0, 0);
    let mut h_est = CMat::zeros(0, 0);
    let mut noise = CMat::zeros(0, 0);
    let mut gram = CMat::zeros(0, 0);
    let mut w = CMat::zeros(0, 0);
    let mut p_mat = CMat::zeros(0, 0);

    for _ in 0..n_channel_draws {
        for members in &blocks {
            let k_members: Vec<usize> = members.iter().map(|&l| k[l]).collect();
            let pool = members.len() * params.pilots_per_cell();
            let pilots = sample_pilot_assignment(&k_members, pool, rng)?;

            for (b, &j) in members.iter().enumerate() {
                let k_b = k[j];
                let m_ant = params.antennas();

                // Which own UE owns each pool pilot.
                let mut owner = vec![usize::MAX; pool];
                for (own_k, &p) in pilots[b].iter().enumerate() {
                    owner[p] = own_k;
                }
                // Cross-cell coalition UEs colliding with one of our pilots,
                // in canonical member/UE order: (flat index, own UE hit).
                let mut cross: Vec<(usize, usize)> = Vec::new();
                let mut colliders_of: Vec<Vec<usize>> = vec![Vec::new(); k_b];
                for (lb, &l) in members.iter().enumerate() {
                    if l == j {
                        continue;
                    }
                    for m in 0..k[l] {
                        let own_k = owner[pilots[lb][m]];
                        if own_k != usize::MAX {
                            let u = flat_base[l] + m;
                            colliders_of[own_k].push(cross.len());
                            cross.push((u, own_k));
                        }
                    }
                }
                let n_cross = cross.len();

                // Channels: own cells first, colliders after; then noise.
                h_all.reset(m_ant, k_b + n_cross);
                for own_k in 0..k_b {
                    let u = flat_base[j] + own_k;
                    fill_complex_gaussian(h_all.col_mut(own_k), att[j][u], rng);
                }
                for (c, &(u, _)) in cross.iter().enumerate() {
                    fill_complex_gaussian(h_all.col_mut(k_b + c), att[j][u], rng);
                }
                noise.reset(m_ant, k_b);
                for own_k in 0..k_b {
                    fill_complex_gaussian(noise.col_mut(own_k), 1.0, rng);
                }

                // MMSE estimates of the own-cell channels.
                let big_b = params.pilots_total() as f64;
                h_est.reset(m_ant, k_b);
                let mut deltas = vec![0.0f64; k_b];
                for own_k in 0..k_b {
                    let u = flat_base[j] + own_k;
                    let mut ratio_sum = 0.0;
                    for &c in &colliders_of[own_k] {
                        let (cu, _) = cross[c];
                        ratio_sum += att[j][cu] / serving_att[cu];
                    }
                    let (scale, delta) =
                        mmse_scale_and_delta(snr, params.pilots_total(), serving_att[u], ratio_sum);
                    deltas[own_k] = delta;

                    let own_coeff = (snr * big_b / serving_att[u]).sqrt();
                    // y = own + colliders + noise, scaled into the estimate.
                    let est = h_est.col_mut(own_k);
                    est.copy_from_slice(noise.col(own_k));
                    for (dst, src) in est.iter_mut().zip(h_all.col(own_k)) {
                        *dst += own_coeff * src;
                    }
                    for &c in &colliders_of[own_k] {
                        let (cu, _) = cross[c];
                        let coeff = (snr * big_b / serving_att[cu]).sqrt();
                        let col = h_all.col(k_b + c);
                        for (dst, src) in est.iter_mut().zip(col) {
                            *dst += coeff * src;
                        }
                    }
                    for z in est.iter_mut() {
                        *z *= scale;
                    }
                }

                match scheme {
                    CombiningScheme::Mrc => {
                        for own_k in 0..k_b {
                            let u = flat_base[j] + own_k;
                            let est = h_est.col(own_k);
                            let norm_c = 1.0 / (m_ant as f64 * deltas[own_k]);
                            let signal = dot_conj(est, h_all.col(own_k)) * norm_c;
                            let energy = norm_sqr(est) * norm_c * norm_c;

                            let mut explicit = 0.0;
                            let mut explicit_coeff = 0.0;
                            for &c in &colliders_of[own_k] {
                                let (cu, _) = cross[c];
                                let g_h = dot_conj(est, h_all.col(k_b + c)) * norm_c;
                                explicit += snr / serving_att[cu] * g_h.norm_sqr();
                                explicit_coeff += snr * att[j][cu] / serving_att[cu];
                            }
                            // Own term + per-draw explicit set leave the rest
                            // of the coalition to the conditional mean.
                            let rb = coalition_coeff[j]
                                - snr * att[j][u] / serving_att[u]
                                - explicit_coeff;

                            let a = &mut acc[j][own_k];
                            a.signal += signal;
                            a.signal_sq += signal.norm_sqr();
                            a.combiner_energy += energy;
                            a.interference += explicit + rb * energy;
                        }
                    }
                    CombiningScheme::Zfc => {
                        hermitian_product(&h_est, &h_est, &mut gram);
                        let inv = hpd_inverse(&gram)?;
                        hermitian_product(&h_est, &h_all, &mut w);
                        product(&inv, &w, &mut p_mat);

                        // Coefficient of the cross explicit set is shared by
                        // every own UE.
                        let mut cross_coeff = 0.0;
                        for &(cu, _) in &cross {
                            cross_coeff += snr * att[j][cu] / serving_att[cu];
                        }
                        let own_coeff_total: f64 = (0..k_b)
                            .map(|m| {
                                let u = flat_base[j] + m;
                                snr * att[j][u] / serving_att[u]
                            })
                            .sum();
                        let rb = coalition_coeff[j] - own_coeff_total - cross_coeff;

                        for own_k in 0..k_b {
                            let signal = p_mat.get(own_k, own_k);
                            let energy = inv.get(own_k, own_k).re;

                            let mut explicit = 0.0;
                            for m in 0..k_b {
                                if m == own_k {
                                    continue;
                                }
                                let u = flat_base[j] + m;
                                explicit +=
                                    snr / serving_att[u] * p_mat.get(own_k, m).norm_sqr();
                            }
                            for (c, &(cu, _)) in cross.iter().enumerate() {
                                explicit += snr / serving_att[cu]
                                    * p_mat.get(own_k, k_b + c).norm_sqr();
                            }

                            let a = &mut acc[j][own_k];
                            a.signal += signal;
                            a.signal_sq += signal.norm_sqr();
                            a.combiner_energy += energy;
                            a.interference += explicit + rb * energy;
                        }
                    }
                }
            }
        }
    }

    // Assemble per-UE SINRs from the sample means.
    let n = n_channel_draws as f64;
    let mut per_cell = vec![0.0f64; l_cells];
    for j in 0..l_cells {
        for own_k in 0..k[j] {
            let u = flat_base[j] + own_k;
            let a = &acc[j][own_k];
            let mean_signal = a.signal / n;
            let mean_signal_sq = a.signal_sq / n;
            let mean_energy = a.combiner_energy / n;
            let mean_interference = a.interference / n;

            let power = snr / serving_att[u];
            let numerator = power * mean_signal.norm_sqr();
            let denominator = mean_interference
                + out_coeff[j] * mean_energy
                + power * mean_signal_sq
                - numerator
                + mean_energy; // noise power is one
            if !(denominator > 0.0) || !denominator.is_finite() {
                return Err(Error::NumericalDomain(format!(
                    "non-positive SINR denominator {denominator} for UE {own_k} of cell {j}"
                )));
            }
            per_cell[j] += (1.0 + numerator / denominator).log2();
        }
    }
    Ok(per_cell)
}

/// Tolerances and draw counts of a validation run.
#[derive(Debug, Clone)]
pub struct ValidationSettings {
    pub n_position_draws: usize,
    pub n_channel_draws: usize,
    /// Largest tolerated per-cell relative gap `|mc - closed| / mc`.
    pub max_rel_gap: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            n_position_draws: 100,
            n_channel_draws: 40,
            max_rel_gap: 0.05,
        }
    }
}

/// One cell's closed-form/Monte-Carlo comparison.
#[derive(Debug, Clone)]
pub struct ValidationRow {
    pub cell: usize,
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub std_err: f64,
    pub gap: f64,
    pub pass: bool,
}

/// Validation report for a whole structure.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub pass: bool,
}

/// Whether a row satisfies the bound and gap checks: the closed form may
/// not exceed the Monte Carlo estimate by more than two standard errors,
/// and the relative gap must stay within tolerance.
pub fn row_passes(closed_form: f64, mc: f64, std_err: f64, gap: f64, max_rel_gap: f64) -> bool {
    closed_form <= mc + 2.0 * std_err && gap <= max_rel_gap
}

/// Runs the channel-level estimator against the closed forms, cell by cell.
pub fn validate<R: Rng + ?Sized>(
    structure: &CoalitionStructure,
    params: &SystemParams,
    deployment: &Deployment,
    scheme: CombiningScheme,
    settings: &ValidationSettings,
    rng: &mut R,
) -> Result<ValidationReport> {
    let mc = monte_carlo_se(
        structure,
        params,
        deployment,
        scheme,
        settings.n_position_draws,
        settings.n_channel_draws,
        rng,
    )?;
    // Closed forms need the propagation moments; estimate them from the
    // same deployment with an independent substream.
    let mut mu_rng = sub_rng(rng.next_u64(), 0, "validate-mu");
    let stats = crate::propagation::PropagationStats::estimate(deployment, 10_000, &mut mu_rng)?;
    let (closed, _) = structure_utilities(structure, &stats, params, scheme)?;

    let rows: Vec<ValidationRow> = (0..deployment.len())
        .map(|j| {
            let gap = (mc.per_cell[j] - closed[j]).abs() / mc.per_cell[j];
            ValidationRow {
                cell: j,
                closed_form: closed[j],
                mc_estimate: mc.per_cell[j],
                std_err: mc.std_err[j],
                gap,
                pass: row_passes(closed[j], mc.per_cell[j], mc.std_err[j], gap, settings.max_rel_gap),
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(ValidationReport { rows, pass })
}
