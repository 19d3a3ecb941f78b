//! Explicit channel/pilot/noise realizations for one coalition.
//!
//! A [`Realization`] holds everything one frame draws for the cells of a
//! single coalition: user positions, the random pilot assignment from the
//! pooled budget, Rayleigh channel vectors from every coalition UE to every
//! member BS, and the effective noise. Cells outside the coalition never
//! collide on pilots, so they are irrelevant to channel estimation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{Deployment, Position};
use crate::utility::{CombiningScheme, SystemParams};
use crate::validator::linalg::{dot_conj, hermitian_product, hpd_inverse, norm_sqr, CMat};

/// Draws one pilot assignment: each cell takes a uniform ordered
/// `k`-subset of the pool `{0, .., pool_size-1}`, so its UEs hold distinct
/// pilots and every subset/bijection pair is equally likely.
pub fn sample_pilot_assignment<R: Rng + ?Sized>(
    k_per_cell: &[usize],
    pool_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if k_per_cell.iter().any(|&k| k > pool_size) {
        return Err(Error::InvalidParameter(
            "cell schedules more UEs than the pilot pool holds".into(),
        ));
    }
    let mut scratch: Vec<usize> = Vec::with_capacity(pool_size);
    Ok(k_per_cell
        .iter()
        .map(|&k| {
            scratch.clear();
            scratch.extend(0..pool_size);
            for i in 0..k {
                let pick = rng.random_range(i..pool_size);
                scratch.swap(i, pick);
            }
            scratch[..k].to_vec()
        })
        .collect())
}

/// Scaling coefficient and estimate variance of the MMSE channel estimate,
/// from the serving attenuation and the colliders' attenuation ratios.
pub(crate) fn mmse_scale_and_delta(
    snr: f64,
    pilots_total: usize,
    own_atten: f64,
    collider_ratio_sum: f64,
) -> (f64, f64) {
    let b = pilots_total as f64;
    let denom = snr * b + snr * b * collider_ratio_sum + 1.0;
    let scale = (snr * own_atten * b).sqrt() / denom;
    let delta = snr * own_atten * b / denom;
    (scale, delta)
}

/// One frame's channel-level draw for a coalition at fixed user positions.
#[derive(Debug, Clone)]
pub struct Realization {
    /// Coalition members (global cell indices, ascending).
    members: Vec<usize>,
    /// Scheduled UE count per member.
    k: Vec<usize>,
    /// Positions per member cell.
    user_positions: Vec<Vec<Position>>,
    /// Pilot id within the pooled budget, per member cell per UE.
    pilot_ids: Vec<Vec<usize>>,
    /// `channels[b]` is an `M x total_ues` matrix: column `u` is the channel
    /// from coalition UE `u` (flat order) to member BS `b`.
    channels: Vec<CMat>,
    /// Effective pilot noise per member BS, one `M`-vector per own UE.
    pilot_noise: Vec<CMat>,
    /// Receiver noise during payload data, one `M`-vector per member BS.
    data_noise: Vec<Vec<Complex64>>,
    /// `atten[b][u]` = attenuation from UE `u` to member BS `b`.
    atten: Vec<Vec<f64>>,
    /// Serving-cell attenuation per flat UE.
    serving_atten: Vec<f64>,
    /// Flat UE index -> (member index, in-cell index).
    ues: Vec<(usize, usize)>,
    pool_size: usize,
    antennas: usize,
    snr: f64,
    pilots_total: usize,
}

impl Realization {
    /// Samples positions, pilots, channels, and noise for the coalition
    /// containing exactly `members` (ascending global cell indices), where
    /// cell `l` schedules `k_scheduled[l]` UEs.
    pub fn sample<R: Rng + ?Sized>(
        deployment: &Deployment,
        members: &[usize],
        k_scheduled: &[usize],
        params: &SystemParams,
        rng: &mut R,
    ) -> Result<Self> {
        let user_positions = members
            .iter()
            .map(|&l| {
                (0..k_scheduled[l])
                    .map(|_| deployment.sample_user_position(l, rng))
                    .collect()
            })
            .collect();
        Self::with_positions(deployment, members, k_scheduled, params, user_positions, rng)
    }

    /// As [`Realization::sample`], but at externally fixed user positions
    /// (one sequence per member, `k_scheduled[member]` entries each).
    pub fn with_positions<R: Rng + ?Sized>(
        deployment: &Deployment,
        members: &[usize],
        k_scheduled: &[usize],
        params: &SystemParams,
        user_positions: Vec<Vec<Position>>,
        rng: &mut R,
    ) -> Result<Self> {
        let pool_size = members.len() * params.pilots_per_cell();
        let k: Vec<usize> = members.iter().map(|&l| k_scheduled[l]).collect();
        if user_positions.len() != members.len()
            || user_positions.iter().zip(&k).any(|(p, &kl)| p.len() != kl)
        {
            return Err(Error::InvalidParameter(
                "one position per scheduled UE per member is required".into(),
            ));
        }

        let mut ues = Vec::new();
        for (b, &kl) in k.iter().enumerate() {
            for m in 0..kl {
                ues.push((b, m));
            }
        }
        let atten: Vec<Vec<f64>> = members
            .iter()
            .map(|&j| {
                ues.iter()
                    .map(|&(b, m)| deployment.attenuation(j, user_positions[b][m]))
                    .collect()
            })
            .collect();
        let serving_atten: Vec<f64> = ues.iter().map(|&(b, m)| atten[b][ues_flat(&k, b, m)]).collect();

        let mut realization = Self {
            members: members.to_vec(),
            k,
            user_positions,
            pilot_ids: Vec::new(),
            channels: Vec::new(),
            pilot_noise: Vec::new(),
            data_noise: Vec::new(),
            atten,
            serving_atten,
            ues,
            pool_size,
            antennas: params.antennas(),
            snr: params.snr(),
            pilots_total: params.pilots_total(),
        };
        realization.redraw(rng)?;
        Ok(realization)
    }

    /// Redraws pilots, channels, and noise, keeping user positions.
    pub fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.pilot_ids = sample_pilot_assignment(&self.k, self.pool_size, rng)?;
        self.redraw_channels(rng);
        Ok(())
    }

    /// Redraws channels and noise only, keeping positions and pilots (used
    /// to check moments that are conditional on the pilot allocation).
    pub fn redraw_channels<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let m = self.antennas;
        let n_ues = self.ues.len();
        let n_members = self.members.len();
        self.channels.resize(n_members, CMat::zeros(0, 0));
        self.pilot_noise.resize(n_members, CMat::zeros(0, 0));
        self.data_noise.resize(n_members, Vec::new());
        for b in 0..n_members {
            let mut h = std::mem::replace(&mut self.channels[b], CMat::zeros(0, 0));
            h.reset(m, n_ues);
            for u in 0..n_ues {
                fill_complex_gaussian(h.col_mut(u), self.atten[b][u], rng);
            }
            self.channels[b] = h;

            let mut noise = std::mem::replace(&mut self.pilot_noise[b], CMat::zeros(0, 0));
            noise.reset(m, self.k[b]);
            for u in 0..self.k[b] {
                fill_complex_gaussian(noise.col_mut(u), 1.0, rng);
            }
            self.pilot_noise[b] = noise;

            let mut data = std::mem::take(&mut self.data_noise[b]);
            data.resize(m, Complex64::ZERO);
            fill_complex_gaussian(&mut data, 1.0, rng);
            self.data_noise[b] = data;
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn scheduled(&self) -> &[usize] {
        &self.k
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn pilot_ids(&self) -> &[Vec<usize>] {
        &self.pilot_ids
    }

    pub fn user_positions(&self) -> &[Vec<Position>] {
        &self.user_positions
    }

    /// Local index of a global cell, if it is a member.
    pub fn local_index(&self, cell: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == cell)
    }

    fn flat(&self, b: usize, m: usize) -> usize {
        ues_flat(&self.k, b, m)
    }

    /// Channel vector from UE `m` of member `l` to BS of member `b`.
    pub fn channel(&self, b: usize, l: usize, m: usize) -> &[Complex64] {
        self.channels[b].col(self.flat(l, m))
    }

    /// Receiver noise of member BS `b` during payload data.
    pub fn data_noise(&self, b: usize) -> &[Complex64] {
        &self.data_noise[b]
    }

    /// Attenuation from UE `m` of member `l` to BS of member `b`.
    pub fn attenuation(&self, b: usize, l: usize, m: usize) -> f64 {
        self.atten[b][self.flat(l, m)]
    }

    /// Whether UE `(l, m)` shares the pilot of UE `(b, k)` in this frame.
    pub fn collides(&self, b: usize, k: usize, l: usize, m: usize) -> bool {
        self.pilot_ids[b][k] == self.pilot_ids[l][m]
    }

    /// Effective received pilot signal for own UE `k` at member BS `b`:
    /// the serving channel plus colliding coalition UEs plus noise, each
    /// weighted by its power-controlled pilot amplitude.
    pub fn pilot_signal(&self, b: usize, k: usize) -> Vec<Complex64> {
        let big_b = self.pilots_total as f64;
        let mut y: Vec<Complex64> = self.pilot_noise[b].col(k).to_vec();
        let own = self.channel(b, b, k);
        let own_coeff = (self.snr * big_b / self.serving_atten[self.flat(b, k)]).sqrt();
        for (dst, src) in y.iter_mut().zip(own) {
            *dst += own_coeff * src;
        }
        for l in 0..self.members.len() {
            if l == b {
                continue;
            }
            for m in 0..self.k[l] {
                if self.collides(b, k, l, m) {
                    let coeff = (self.snr * big_b / self.serving_atten[self.flat(l, m)]).sqrt();
                    let h = self.channel(b, l, m);
                    for (dst, src) in y.iter_mut().zip(h) {
                        *dst += coeff * src;
                    }
                }
            }
        }
        y
    }

    /// Sum over colliders of the attenuation ratio `d_b(z_lm) / d_l(z_lm)`,
    /// which drives the estimate quality loss from pilot contamination.
    fn collider_ratio_sum(&self, b: usize, k: usize) -> f64 {
        let mut sum = 0.0;
        for l in 0..self.members.len() {
            if l == b {
                continue;
            }
            for m in 0..self.k[l] {
                if self.collides(b, k, l, m) {
                    let u = self.flat(l, m);
                    sum += self.atten[b][u] / self.serving_atten[u];
                }
            }
        }
        sum
    }

    /// MMSE estimate of the serving channel of own UE `k` at member BS `b`,
    /// along with its variance.
    pub fn mmse_estimate(&self, b: usize, k: usize) -> (Vec<Complex64>, f64) {
        let (scale, delta) = mmse_scale_and_delta(
            self.snr,
            self.pilots_total,
            self.serving_atten[self.flat(b, k)],
            self.collider_ratio_sum(b, k),
        );
        let mut estimate = self.pilot_signal(b, k);
        for z in &mut estimate {
            *z *= scale;
        }
        (estimate, delta)
    }

    /// MMSE estimate of the cross channel from UE `(l, m)` at BS `b`, given
    /// that it collides with own UE `k` whose estimate is supplied. The
    /// estimate is an exact scalar multiple of the own-UE estimate.
    pub fn cross_estimate(
        &self,
        b: usize,
        l: usize,
        m: usize,
        k: usize,
        own_estimate: &[Complex64],
        own_delta: f64,
    ) -> Result<(Vec<Complex64>, f64)> {
        if !self.collides(b, k, l, m) {
            return Err(Error::InvalidParameter(
                "cross estimate requires a shared pilot".into(),
            ));
        }
        let d_cross = self.attenuation(b, l, m);
        let d_own = self.attenuation(b, b, k);
        let d_serving = self.serving_atten[self.flat(l, m)];
        let scale = d_cross / (d_own * d_serving).sqrt();
        let estimate = own_estimate.iter().map(|&z| scale * z).collect();
        Ok((estimate, scale * scale * own_delta))
    }

    /// All own-UE estimates and their variances at member BS `b`.
    pub fn estimates(&self, b: usize) -> (Vec<Vec<Complex64>>, Vec<f64>) {
        let mut vectors = Vec::with_capacity(self.k[b]);
        let mut deltas = Vec::with_capacity(self.k[b]);
        for k in 0..self.k[b] {
            let (e, d) = self.mmse_estimate(b, k);
            vectors.push(e);
            deltas.push(d);
        }
        (vectors, deltas)
    }
}

fn ues_flat(k: &[usize], b: usize, m: usize) -> usize {
    k[..b].iter().sum::<usize>() + m
}

pub(crate) fn fill_complex_gaussian<R: Rng + ?Sized>(
    out: &mut [Complex64],
    variance: f64,
    rng: &mut R,
) {
    let sigma = (variance * 0.5).sqrt();
    for z in out {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = Complex64::new(sigma * re, sigma * im);
    }
}

/// Combining vectors for the estimates of one cell: maximum-ratio scales
/// each estimate to unit expected channel gain; zero-forcing applies the
/// pseudo-inverse of the estimate matrix.
pub fn combiners(
    estimates: &[Vec<Complex64>],
    deltas: &[f64],
    scheme: CombiningScheme,
    antennas: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let k = estimates.len();
    match scheme {
        CombiningScheme::Mrc => Ok(estimates
            .iter()
            .zip(deltas)
            .map(|(e, &d)| {
                let c = 1.0 / (antennas as f64 * d);
                e.iter().map(|&z| c * z).collect()
            })
            .collect()),
        CombiningScheme::Zfc => {
            if antennas <= k {
                return Err(Error::ZfInfeasible {
                    cell: usize::MAX,
                    antennas,
                    users: k,
                });
            }
            let mut h = CMat::zeros(antennas, k);
            for (c, e) in estimates.iter().enumerate() {
                h.col_mut(c).copy_from_slice(e);
            }
            let mut gram = CMat::zeros(0, 0);
            hermitian_product(&h, &h, &mut gram);
            let inv = hpd_inverse(&gram)
                .map_err(|_| Error::RankDeficient("estimate matrix in zero-forcing".into()))?;
            // G = H (H^H H)^{-1}, column by column.
            let mut g = vec![vec![Complex64::ZERO; antennas]; k];
            for col in 0..k {
                for (row, gv) in g[col].iter_mut().enumerate() {
                    let mut acc = Complex64::ZERO;
                    for inner in 0..k {
                        acc += h.get(row, inner) * inv.get(inner, col);
                    }
                    *gv = acc;
                }
            }
            Ok(g)
        }
    }
}

/// Convenience: hermitian inner product of two vectors.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    dot_conj(a, b)
}

/// Convenience: squared norm of a vector.
pub fn energy(a: &[Complex64]) -> f64 {
    norm_sqr(a)
}
