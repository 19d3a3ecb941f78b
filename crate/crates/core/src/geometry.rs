//! Random base-station deployments on a wrap-around square, cell regions,
//! user sampling, and channel attenuation.
//!
//! The deployment region is a square with opposite edges identified (a
//! torus), which removes boundary effects. A cell is the Voronoi region of
//! its BS under the torus metric, so every user's serving BS is also its
//! nearest one and the serving channel is never weaker on average than any
//! cross channel.

use rand::Rng;

use crate::error::{Error, Result};

/// A point in the deployment region, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Euclidean distance under the nearest-image (torus) metric.
///
/// Coordinates outside `[0, side)` are wrapped before comparison.
pub fn torus_distance(a: Position, b: Position, side: f64) -> f64 {
    let dx = axis_distance(a.x - b.x, side);
    let dy = axis_distance(a.y - b.y, side);
    (dx * dx + dy * dy).sqrt()
}

fn axis_distance(delta: f64, side: f64) -> f64 {
    let d = delta.rem_euclid(side);
    d.min(side - d)
}

/// A set of BS positions on a wrap-around square together with the pathloss
/// model parameters.
#[derive(Debug, Clone)]
pub struct Deployment {
    bs_positions: Vec<Position>,
    side: f64,
    density: f64,
    pathloss_exponent: f64,
    min_distance: f64,
}

impl Deployment {
    /// Draws `l` BS positions independently and uniformly on the square of
    /// side `sqrt(l / density) * 1000` meters (`density` in BS/km²).
    pub fn generate<R: Rng + ?Sized>(
        l: usize,
        density: f64,
        gamma: f64,
        d_min: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if l < 1 {
            return Err(Error::InvalidParameter("L must be >= 1".into()));
        }
        if !(density > 0.0) {
            return Err(Error::InvalidParameter("density must be > 0".into()));
        }
        if !(gamma > 2.0) {
            return Err(Error::InvalidParameter(
                "pathloss exponent must be > 2".into(),
            ));
        }
        if !(d_min > 0.0) {
            return Err(Error::InvalidParameter("d_min must be > 0".into()));
        }
        let side = (l as f64 / density).sqrt() * 1000.0;
        let bs_positions = (0..l)
            .map(|_| {
                Position::new(
                    rng.random_range(0.0..side),
                    rng.random_range(0.0..side),
                )
            })
            .collect();
        Ok(Self {
            bs_positions,
            side,
            density,
            pathloss_exponent: gamma,
            min_distance: d_min,
        })
    }

    /// Builds a deployment from explicit BS positions (synthetic layouts and
    /// tests). The implied density is `l / side²`.
    pub fn from_positions(
        bs_positions: Vec<Position>,
        side: f64,
        gamma: f64,
        d_min: f64,
    ) -> Result<Self> {
        if bs_positions.is_empty() {
            return Err(Error::InvalidParameter("L must be >= 1".into()));
        }
        if !(side > 0.0) || !(gamma > 2.0) || !(d_min > 0.0) {
            return Err(Error::InvalidParameter(
                "side, gamma and d_min must be positive (gamma > 2)".into(),
            ));
        }
        if bs_positions
            .iter()
            .any(|p| !(0.0..side).contains(&p.x) || !(0.0..side).contains(&p.y))
        {
            return Err(Error::InvalidParameter(
                "BS coordinates must lie in [0, side)".into(),
            ));
        }
        let density = bs_positions.len() as f64 / (side / 1000.0).powi(2);
        Ok(Self {
            bs_positions,
            side,
            density,
            pathloss_exponent: gamma,
            min_distance: d_min,
        })
    }

    /// Number of cells `L`.
    pub fn len(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bs_positions.is_empty()
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn pathloss_exponent(&self) -> f64 {
        self.pathloss_exponent
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    pub fn bs_position(&self, j: usize) -> Position {
        self.bs_positions[j]
    }

    pub fn bs_positions(&self) -> &[Position] {
        &self.bs_positions
    }

    /// Index of the BS nearest to `z` under the torus metric; ties break to
    /// the lowest index.
    pub fn serving_cell(&self, z: Position) -> usize {
        let mut best = 0;
        let mut best_dist = torus_distance(self.bs_positions[0], z, self.side);
        for (j, &bs) in self.bs_positions.iter().enumerate().skip(1) {
            let d = torus_distance(bs, z, self.side);
            if d < best_dist {
                best = j;
                best_dist = d;
            }
        }
        best
    }

    /// Uniform sample over the Voronoi cell of BS `j`, by rejection from the
    /// square. Every BS lies in its own cell, so the acceptance region has
    /// positive area and the loop terminates with probability one.
    pub fn sample_user_position<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Position {
        loop {
            let z = Position::new(
                rng.random_range(0.0..self.side),
                rng.random_range(0.0..self.side),
            );
            if self.serving_cell(z) == j {
                return z;
            }
        }
    }

    /// Channel attenuation variance `d_j(z) = max(dist, d_min)^(-gamma)`.
    pub fn attenuation(&self, j: usize, z: Position) -> f64 {
        let dist = torus_distance(self.bs_positions[j], z, self.side);
        dist.max(self.min_distance).powf(-self.pathloss_exponent)
    }
}
