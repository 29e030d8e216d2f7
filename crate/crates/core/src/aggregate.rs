//! Pooling beliefs across experts, and summary statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elicitation::{trapezoid, BeliefDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("no beliefs to combine")]
    Empty,
    #[error("belief grids differ")]
    GridMismatch,
    #[error("combined belief has zero mass (disjoint supports)")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combination {
    /// Pointwise average.
    Sum,
    /// Normalised pointwise product.
    Prod,
}

impl std::fmt::Display for Combination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Combination::Sum => "sum",
            Combination::Prod => "prod",
        })
    }
}

fn check_grids(beliefs: &[BeliefDistribution]) -> Result<&[f64], AggregateError> {
    let first = beliefs.first().ok_or(AggregateError::Empty)?;
    if beliefs.iter().any(|b| b.grid != first.grid || b.density.len() != first.grid.len()) {
        return Err(AggregateError::GridMismatch);
    }
    Ok(&first.grid)
}

fn normalise(grid: &[f64], curve: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let z = trapezoid(grid, &curve);
    (z > 0.0 && z.is_finite()).then(|| (curve.into_iter().map(|v| v / z).collect(), z))
}

fn mean_curve(beliefs: &[BeliefDistribution], pick: impl Fn(&BeliefDistribution) -> &[f64]) -> Vec<f64> {
    let n = beliefs.len() as f64;
    let len = beliefs[0].grid.len();
    (0..len).map(|i| beliefs.iter().map(|b| pick(b)[i]).sum::<f64>() / n).collect()
}

/// Pointwise product computed in the log domain, shifted by its maximum.
fn product_curve(beliefs: &[BeliefDistribution], pick: impl Fn(&BeliefDistribution) -> &[f64]) -> Vec<f64> {
    let len = beliefs[0].grid.len();
    let logs: Vec<f64> = (0..len).map(|i| beliefs.iter().map(|b| pick(b)[i].ln()).sum()).collect();
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return vec![0.0; len];
    }
    logs.into_iter().map(|l| (l - shift).exp()).collect()
}

/// Equal-weight average of densities, renormalised.
pub fn combine_sum(beliefs: &[BeliefDistribution]) -> Result<BeliefDistribution, AggregateError> {
    let grid = check_grids(beliefs)?;
    let (density, normalization) =
        normalise(grid, mean_curve(beliefs, |b| &b.density)).ok_or(AggregateError::Degenerate)?;
    let band = |pick: fn(&BeliefDistribution) -> &[f64]| {
        normalise(grid, mean_curve(beliefs, pick)).map_or_else(|| density.clone(), |(d, _)| d)
    };
    Ok(BeliefDistribution {
        grid: grid.to_vec(),
        band_lo: band(|b| &b.band_lo),
        band_hi: band(|b| &b.band_hi),
        density,
        normalization,
    })
}

/// Product of densities, renormalised.
pub fn combine_prod(beliefs: &[BeliefDistribution]) -> Result<BeliefDistribution, AggregateError> {
    let grid = check_grids(beliefs)?;
    let (density, normalization) =
        normalise(grid, product_curve(beliefs, |b| &b.density)).ok_or(AggregateError::Degenerate)?;
    let band = |pick: fn(&BeliefDistribution) -> &[f64]| {
        normalise(grid, product_curve(beliefs, pick)).map_or_else(|| density.clone(), |(d, _)| d)
    };
    Ok(BeliefDistribution {
        grid: grid.to_vec(),
        band_lo: band(|b| &b.band_lo),
        band_hi: band(|b| &b.band_hi),
        density,
        normalization,
    })
}

pub fn combine(beliefs: &[BeliefDistribution], how: Combination) -> Result<BeliefDistribution, AggregateError> {
    match how {
        Combination::Sum => combine_sum(beliefs),
        Combination::Prod => combine_prod(beliefs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertSummary {
    pub mean: f64,
    pub sd: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

/// Mean and standard deviation by the trapezoid rule; quantiles by linear
/// interpolation of the cumulative trapezoid integral.
pub fn summarize(belief: &BeliefDistribution) -> ExpertSummary {
    let g = &belief.grid;
    let d = &belief.density;
    let mass = trapezoid(g, d);
    let first: Vec<f64> = g.iter().zip(d).map(|(x, p)| x * p).collect();
    let mean = trapezoid(g, &first) / mass;
    let second: Vec<f64> = g.iter().zip(d).map(|(x, p)| (x - mean) * (x - mean) * p).collect();
    let sd = (trapezoid(g, &second) / mass).max(0.0).sqrt();

    let mut cdf = Vec::with_capacity(g.len());
    cdf.push(0.0);
    for i in 1..g.len() {
        let prev = cdf[i - 1];
        cdf.push(prev + 0.5 * (g[i] - g[i - 1]) * (d[i - 1] + d[i]) / mass);
    }
    let quantile = |p: f64| {
        let k = cdf.partition_point(|&c| c < p);
        if k == 0 {
            return g[0];
        }
        if k >= g.len() {
            return g[g.len() - 1];
        }
        let (c0, c1) = (cdf[k - 1], cdf[k]);
        let w = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
        g[k - 1] + w * (g[k] - g[k - 1])
    };
    ExpertSummary { mean, sd, q10: quantile(0.1), q50: quantile(0.5), q90: quantile(0.9) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elicitation::linspace;

    pub(crate) fn belief(grid: &[f64], f: impl Fn(f64) -> f64) -> BeliefDistribution {
        let raw: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
        let z = trapezoid(grid, &raw);
        let density: Vec<f64> = raw.iter().map(|v| v / z).collect();
        BeliefDistribution {
            grid: grid.to_vec(),
            band_lo: density.clone(),
            band_hi: density.clone(),
            density,
            normalization: z,
        }
    }

    #[test]
    fn sum_of_one_is_identity() {
        let g = linspace(0.0, 1.0, 101);
        let b = belief(&g, |x| (x * 3.0).sin().abs() + 0.1);
        let s = combine_sum(std::slice::from_ref(&b)).unwrap();
        for (a, c) in s.density.iter().zip(&b.density) {
            assert!((a - c).abs() < 1e-12);
        }
        let s2 = combine_sum(&[b.clone(), b.clone()]).unwrap();
        for (a, c) in s2.density.iter().zip(&b.density) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_plus_triangle_on_five_points() {
        // grid 0, .25, .5, .75, 1; triangle peaks at 0.5 with height 2
        let g = linspace(0.0, 1.0, 5);
        let uni = belief(&g, |_| 1.0);
        let tri = belief(&g, |x| 1.0 - (2.0 * x - 1.0).abs());
        assert!((tri.density[2] - 2.0).abs() < 1e-12);
        let mix = combine_sum(&[uni, tri]).unwrap();
        // (1 + 2)/2 at the peak, (1 + 0)/2 at the ends; both already integrate to 1
        let expected = [0.5, 1.0, 1.5, 1.0, 0.5];
        for (m, e) in mix.density.iter().zip(expected) {
            assert!((m - e).abs() < 1e-12, "{m} vs {e}");
        }
    }

    #[test]
    fn product_with_uniform_is_identity() {
        let g = linspace(0.0, 1.0, 201);
        let b = belief(&g, |x| (-(x - 0.3f64).powi(2) / 0.02).exp());
        let u = belief(&g, |_| 1.0);
        let p = combine_prod(&[b.clone(), u]).unwrap();
        let sup = p.density.iter().zip(&b.density).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-6);
    }

    #[test]
    fn gaussian_product_peak() {
        let g = linspace(0.0, 1.0, 201);
        let a = belief(&g, |x| (-(x - 0.3f64).powi(2) / (2.0 * 0.01)).exp());
        let b = belief(&g, |x| (-(x - 0.5f64).powi(2) / (2.0 * 0.01)).exp());
        let p = combine_prod(&[a, b]).unwrap();
        assert!((p.mode() - 0.4).abs() <= 0.005 + 1e-12);
    }

    #[test]
    fn disjoint_product_is_degenerate() {
        let g = linspace(0.0, 1.0, 101);
        let a = belief(&g, |x| if x < 0.4 { 1.0 } else { 0.0 });
        let b = belief(&g, |x| if x > 0.6 { 1.0 } else { 0.0 });
        assert_eq!(combine_prod(&[a, b]), Err(AggregateError::Degenerate));
    }

    #[test]
    fn grid_checks() {
        assert_eq!(combine_sum(&[]), Err(AggregateError::Empty));
        let a = belief(&linspace(0.0, 1.0, 11), |_| 1.0);
        let b = belief(&linspace(0.0, 1.0, 12), |_| 1.0);
        assert_eq!(combine_prod(&[a.clone(), b.clone()]), Err(AggregateError::GridMismatch));
        assert_eq!(combine_sum(&[a, b]), Err(AggregateError::GridMismatch));
    }

    #[test]
    fn uniform_summary() {
        let g = linspace(0.0, 1.0, 201);
        let s = summarize(&belief(&g, |_| 1.0));
        assert!((s.mean - 0.5).abs() < 1e-3);
        assert!((s.sd - 1.0 / 12f64.sqrt()).abs() < 1e-3);
        assert!((s.q10 - 0.1).abs() < 1e-9 && (s.q50 - 0.5).abs() < 1e-9 && (s.q90 - 0.9).abs() < 1e-9);
    }

    #[test]
    fn one_hot_summary() {
        let g = linspace(0.0, 1.0, 201);
        let s = summarize(&belief(&g, |x| if (x - 0.5).abs() < 1e-9 { 1.0 } else { 0.0 }));
        assert!((s.mean - 0.5).abs() < 1e-12);
        assert!(s.sd <= 0.005);
        assert!(s.q10 <= s.q50 && s.q50 <= s.q90);
    }
}
