//! Acquisition rules, maximised over the belief grid.

use super::belief::{argmax, belief_pari};
use super::config::{AcquisitionRule, PairRule};
use super::ElicitError;
use crate::gp::GpModel;
use crate::normal;

/// Upper confidence bound `μ + beta σ` on the latent, argmax over `grid`
/// (smallest θ on ties).
pub fn acquire_veri(model: &GpModel, grid: &[f64], beta: f64) -> Result<f64, ElicitError> {
    let scores = ucb_curve(model, grid, beta)?;
    Ok(grid[argmax(&scores)])
}

pub fn ucb_curve(model: &GpModel, grid: &[f64], beta: f64) -> Result<Vec<f64>, ElicitError> {
    let pts: Vec<Vec<f64>> = grid.iter().map(|&t| vec![t]).collect();
    Ok(model
        .predict_latent_many(&pts)?
        .into_iter()
        .map(|(mu, var)| if beta == 0.0 { mu } else { mu + beta * var.sqrt() })
        .collect())
}

/// Latent-variance argmax over `grid`.
pub fn acquire_variance(model: &GpModel, grid: &[f64]) -> Result<f64, ElicitError> {
    let pts: Vec<Vec<f64>> = grid.iter().map(|&t| vec![t]).collect();
    let vars: Vec<f64> = model.predict_latent_many(&pts)?.into_iter().map(|(_, v)| v).collect();
    Ok(grid[argmax(&vars)])
}

pub(crate) fn acquire_single(
    model: &GpModel,
    grid: &[f64],
    rule: AcquisitionRule,
    beta: f64,
) -> Result<f64, ElicitError> {
    match rule {
        AcquisitionRule::Ucb => acquire_veri(model, grid, beta),
        AcquisitionRule::Variance => acquire_variance(model, grid),
    }
}

/// Latent variance of `f(anchor, θ)` for every grid θ.
pub fn conditional_variance(model: &GpModel, grid: &[f64], anchor: f64) -> Result<Vec<f64>, ElicitError> {
    let pts: Vec<Vec<f64>> = grid.iter().map(|&t| vec![anchor, t]).collect();
    Ok(model.predict_latent_many(&pts)?.into_iter().map(|(_, v)| v).collect())
}

/// Expected information about the latent from one probit label at a point
/// with latent marginal N(mu, var), in nats, using the usual Gaussian
/// approximation of the expected conditional entropy.
pub fn information_gain(mu: f64, var: f64) -> f64 {
    let c2 = std::f64::consts::PI * std::f64::consts::LN_2 / 2.0;
    let h = |p: f64| if p <= 0.0 || p >= 1.0 { 0.0 } else { -p * p.ln() - (1.0 - p) * (1.0 - p).ln() };
    let marginal = h(normal::cdf(mu / (1.0 + var).sqrt()));
    let expected = std::f64::consts::LN_2 * (c2 / (var + c2)).sqrt() * (-mu * mu / (2.0 * (var + c2))).exp();
    (marginal - expected).max(0.0)
}

/// Preference pair with the default rule: the belief argmax, and the grid
/// value (other than it) with the largest latent variance conditional on it.
/// Returned ascending.
pub fn acquire_pari(model: &GpModel, grid: &[f64]) -> Result<(f64, f64), ElicitError> {
    acquire_pair(model, grid, PairRule::LatentVariance)
}

/// Preference pair: the belief argmax, and the grid value (other than it)
/// scoring highest under `rule` conditional on it. Returned ascending.
pub fn acquire_pair(model: &GpModel, grid: &[f64], rule: PairRule) -> Result<(f64, f64), ElicitError> {
    if grid.len() < 2 {
        return Err(ElicitError::InvalidConfig("pair acquisition needs at least two grid points".into()));
    }
    let belief = belief_pari(model, grid)?;
    let a = argmax(&belief.density);
    let scores = match rule {
        PairRule::LatentVariance => conditional_variance(model, grid, grid[a])?,
        PairRule::InformationGain => {
            let pts: Vec<Vec<f64>> = grid.iter().map(|&t| vec![grid[a], t]).collect();
            model.predict_latent_many(&pts)?.into_iter().map(|(m, v)| information_gain(m, v)).collect()
        }
    };
    let mut b = if a == 0 { 1 } else { 0 };
    for (i, &v) in scores.iter().enumerate() {
        if i != a && v > scores[b] {
            b = i;
        }
    }
    let (x, y) = (grid[a], grid[b]);
    Ok(if x < y { (x, y) } else { (y, x) })
}
