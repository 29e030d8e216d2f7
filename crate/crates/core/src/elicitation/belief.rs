//! Belief distributions over the parameter induced by a fitted classifier.
//!
//! Realism mode: density ∝ P(realistic | θ) · prior(θ), normalised over the
//! grid. Its normaliser is the marginal probability of a realistic draw and
//! doubles as the misspecification diagnostic.
//!
//! Preference mode: the classifier odds at the pair (θ, θ*) approximate the
//! likelihood ratio p(θ) / p(θ*), with θ* the most likely grid value.

use serde::{Deserialize, Serialize};

use super::ElicitError;
use crate::gp::{GpModel, Predictive};
use crate::normal::{self, Z_90};

/// Density over an ascending parameter grid, with pointwise 10%/90% bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefDistribution {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    /// Integral of the unnormalised curve.
    pub normalization: f64,
}

impl BeliefDistribution {
    /// Grid value with the largest density (first on ties).
    pub fn mode(&self) -> f64 {
        self.grid[argmax(&self.density)]
    }

    /// Trapezoid mass on `[lo, hi]`, interpolating linearly at the ends.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let mut xs = vec![lo];
        let mut ys = vec![self.density_at(lo)];
        for (&x, &y) in self.grid.iter().zip(&self.density) {
            if x > lo && x < hi {
                xs.push(x);
                ys.push(y);
            }
        }
        xs.push(hi);
        ys.push(self.density_at(hi));
        trapezoid(&xs, &ys)
    }

    /// Linear interpolation of the density; zero outside the grid.
    pub fn density_at(&self, theta: f64) -> f64 {
        interpolate(&self.grid, &self.density, theta)
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

pub(crate) fn interpolate(grid: &[f64], values: &[f64], theta: f64) -> f64 {
    let last = grid.len() - 1;
    if theta < grid[0] || theta > grid[last] {
        return 0.0;
    }
    let k = grid.partition_point(|&x| x <= theta).clamp(1, last);
    let w = (theta - grid[k - 1]) / (grid[k] - grid[k - 1]);
    values[k - 1] * (1.0 - w) + values[k] * w
}

pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `m` evenly spaced points over `[lo, hi]`; a single point is the midpoint.
pub fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    match m {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..m)
            .map(|i| {
                if i == m - 1 {
                    hi
                } else {
                    lo + (hi - lo) * (i as f64 / (m - 1) as f64)
                }
            })
            .collect(),
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn normalise(grid: &[f64], curve: Vec<f64>) -> Result<(Vec<f64>, f64), ElicitError> {
    let z = trapezoid(grid, &curve);
    if !(z > 0.0 && z.is_finite()) {
        return Err(ElicitError::Degenerate("belief curve has no finite positive mass".into()));
    }
    Ok((curve.into_iter().map(|v| v / z).collect(), z))
}

fn scalar_points(grid: &[f64]) -> Vec<Vec<f64>> {
    grid.iter().map(|&t| vec![t]).collect()
}

/// Realism-mode belief from a fitted single-input classifier.
pub fn belief_veri(model: &GpModel, grid: &[f64], prior: &[f64]) -> Result<BeliefDistribution, ElicitError> {
    let preds = model.predict_many(&scalar_points(grid))?;
    let weighted = |f: &dyn Fn(&Predictive) -> f64| -> Vec<f64> {
        preds.iter().zip(prior).map(|(p, &w)| f(p) * w).collect()
    };
    let (density, normalization) = normalise(grid, weighted(&|p| p.class_prob))?;
    let (band_lo, _) = normalise(grid, weighted(&|p| normal::cdf(p.mean - Z_90 * p.variance.sqrt())))?;
    let (band_hi, _) = normalise(grid, weighted(&|p| normal::cdf(p.mean + Z_90 * p.variance.sqrt())))?;
    Ok(BeliefDistribution { grid: grid.to_vec(), density, band_lo, band_hi, normalization })
}

/// Marginal probability of a realistic draw under the prior.
pub fn misspec_diagnostic(model: &GpModel, grid: &[f64], prior: &[f64]) -> Result<f64, ElicitError> {
    let preds = model.predict_many(&scalar_points(grid))?;
    let curve: Vec<f64> = preds.iter().zip(prior).map(|(p, &w)| p.class_prob * w).collect();
    Ok(trapezoid(grid, &curve))
}

fn pair_points(grid: &[f64], anchor: f64) -> Vec<Vec<f64>> {
    grid.iter().map(|&t| vec![t, anchor]).collect()
}

fn log_odds(p: &Predictive) -> f64 {
    normal::log_odds(p.mean / (1.0 + p.variance).sqrt())
}

/// Index of the most likely grid value, located by odds against the grid midpoint.
pub fn pari_anchor(model: &GpModel, grid: &[f64]) -> Result<usize, ElicitError> {
    let reference = grid[(grid.len() - 1) / 2];
    let preds = model.predict_many(&pair_points(grid, reference))?;
    let scores: Vec<f64> = preds.iter().map(log_odds).collect();
    Ok(argmax(&scores))
}

/// Unnormalised preference ratio `odds(θ, θ*)` on the grid, and the index of θ*.
/// The value at θ* is exactly 1.
pub fn pari_ratio_curve(model: &GpModel, grid: &[f64]) -> Result<(usize, Vec<f64>), ElicitError> {
    let anchor = pari_anchor(model, grid)?;
    let preds = model.predict_many(&pair_points(grid, grid[anchor]))?;
    Ok((anchor, preds.iter().map(|p| log_odds(p).exp()).collect()))
}

/// Preference-mode belief from a fitted pairwise classifier.
pub fn belief_pari(model: &GpModel, grid: &[f64]) -> Result<BeliefDistribution, ElicitError> {
    let anchor = pari_anchor(model, grid)?;
    let preds = model.predict_many(&pair_points(grid, grid[anchor]))?;
    let curve = |f: &dyn Fn(&Predictive) -> f64| -> Vec<f64> { preds.iter().map(f).collect() };
    let logs = curve(&log_odds);
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let (density, z) = normalise(grid, logs.iter().map(|l| (l - shift).exp()).collect())?;
    let normalization = z * shift.exp();
    let band = |sign: f64| {
        let logs = curve(&|p| normal::log_odds(p.mean + sign * Z_90 * p.variance.sqrt()));
        let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        normalise(grid, logs.iter().map(|l| (l - shift).exp()).collect()).map(|(d, _)| d)
    };
    Ok(BeliefDistribution {
        grid: grid.to_vec(),
        density,
        band_lo: band(-1.0)?,
        band_hi: band(1.0)?,
        normalization,
    })
}
