use serde::{Deserialize, Serialize};

use super::belief::trapezoid;
use super::ElicitError;
use crate::gp::{log_spaced, EpOptions, KernelSpec};
use crate::simulate::SimulatorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Realistic / unrealistic labels on single simulations.
    Veri,
    /// Preferences between two simulations.
    Pari,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Veri => "veri",
            Mode::Pari => "pari",
        })
    }
}

/// Belief over the parameter before any judgement.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prior {
    #[default]
    Uniform,
    /// Linear interpolation between knots, zero outside them.
    Piecewise { knots: Vec<f64>, values: Vec<f64> },
}

impl Prior {
    fn validate(&self) -> Result<(), ElicitError> {
        if let Prior::Piecewise { knots, values } = self {
            if knots.len() < 2 || knots.len() != values.len() {
                return Err(ElicitError::InvalidConfig("piecewise prior needs matching knots and values (at least 2)".into()));
            }
            if !knots.windows(2).all(|w| w[0] < w[1]) || knots.iter().any(|k| !k.is_finite()) {
                return Err(ElicitError::InvalidConfig("prior knots must be strictly ascending".into()));
            }
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(ElicitError::InvalidConfig("prior values must be nonnegative".into()));
            }
        }
        Ok(())
    }

    fn raw(&self, theta: f64) -> f64 {
        match self {
            Prior::Uniform => 1.0,
            Prior::Piecewise { knots, values } => {
                let last = knots.len() - 1;
                if theta < knots[0] || theta > knots[last] {
                    return 0.0;
                }
                let k = knots.partition_point(|&x| x <= theta).clamp(1, last);
                let (x0, x1) = (knots[k - 1], knots[k]);
                let w = (theta - x0) / (x1 - x0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
        }
    }

    /// Prior density on `grid`, normalised by the trapezoid rule.
    pub fn on_grid(&self, grid: &[f64]) -> Result<Vec<f64>, ElicitError> {
        let raw: Vec<f64> = grid.iter().map(|&t| self.raw(t)).collect();
        let z = trapezoid(grid, &raw);
        if !(z > 0.0) {
            return Err(ElicitError::InvalidConfig("prior has no mass on the parameter bounds".into()));
        }
        Ok(raw.into_iter().map(|v| v / z).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionRule {
    /// Latent mean plus `ucb_beta` latent standard deviations.
    Ucb,
    /// Latent variance only.
    Variance,
}

/// Second-point score for preference queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairRule {
    /// Latent predictive variance of f(anchor, θ).
    #[default]
    LatentVariance,
    /// Expected information from the label of (anchor, θ).
    InformationGain,
}

/// Classifier settings shared by both modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpSettings {
    /// Per-block signal variance of the latent.
    pub signal_variance: f64,
    /// Lengthscale search range as fractions of the bounds width.
    pub lengthscale_range: (f64, f64),
    pub lengthscale_count: usize,
    /// Hyperparameters are re-selected whenever the number of answers is a
    /// positive multiple of this.
    pub reoptimize_every: usize,
    pub ep: EpOptions,
}

impl Default for GpSettings {
    fn default() -> Self {
        GpSettings {
            signal_variance: 4.0,
            lengthscale_range: (0.02, 1.0),
            lengthscale_count: 7,
            reoptimize_every: 10,
            ep: EpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub mode: Mode,
    pub simulator: SimulatorSpec,
    #[serde(default)]
    pub prior: Prior,
    pub n_grid: usize,
    pub n_active: usize,
    pub belief_grid_size: usize,
    pub ucb_beta: f64,
    pub acquisition: AcquisitionRule,
    #[serde(default)]
    pub pair_rule: PairRule,
    pub seed: u64,
    #[serde(default)]
    pub gp: GpSettings,
}

impl SessionConfig {
    /// 21 grid + 79 active realism judgements.
    pub fn veri(simulator: SimulatorSpec, seed: u64) -> Self {
        SessionConfig {
            mode: Mode::Veri,
            simulator,
            prior: Prior::Uniform,
            n_grid: 21,
            n_active: 79,
            belief_grid_size: 201,
            ucb_beta: 2.0,
            acquisition: AcquisitionRule::Ucb,
            pair_rule: PairRule::LatentVariance,
            seed,
            gp: GpSettings::default(),
        }
    }

    /// 15 grid pairs (6 levels) + 85 active comparisons.
    pub fn pari(simulator: SimulatorSpec, seed: u64) -> Self {
        SessionConfig { mode: Mode::Pari, n_grid: 15, n_active: 85, ..Self::veri(simulator, seed) }
    }

    pub fn with_schedule(mut self, n_grid: usize, n_active: usize) -> Self {
        self.n_grid = n_grid;
        self.n_active = n_active;
        self
    }

    pub fn total(&self) -> usize {
        self.n_grid + self.n_active
    }

    /// Number of levels `L` with `L (L - 1) / 2 == n_grid`, if any.
    pub fn pari_levels(&self) -> Option<usize> {
        triangular_root(self.n_grid)
    }

    pub fn validate(&self) -> Result<(), ElicitError> {
        self.simulator.validate().map_err(|e| ElicitError::InvalidConfig(e.to_string()))?;
        self.prior.validate()?;
        if self.n_grid < 1 {
            return Err(ElicitError::InvalidConfig("n_grid must be at least 1".into()));
        }
        if self.belief_grid_size < 3 {
            return Err(ElicitError::InvalidConfig("belief_grid_size must be at least 3".into()));
        }
        if self.mode == Mode::Pari && self.pari_levels().is_none() {
            return Err(ElicitError::InvalidConfig(format!(
                "pari n_grid must be L(L-1)/2 for some L >= 2, got {}",
                self.n_grid
            )));
        }
        if !(self.ucb_beta.is_finite() && self.ucb_beta > 0.0) {
            return Err(ElicitError::InvalidConfig("ucb_beta must be positive".into()));
        }
        let g = &self.gp;
        let (lo, hi) = g.lengthscale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) || g.lengthscale_count == 0 {
            return Err(ElicitError::InvalidConfig("invalid lengthscale search range".into()));
        }
        if !(g.signal_variance.is_finite() && g.signal_variance > 0.0) {
            return Err(ElicitError::InvalidConfig("signal_variance must be positive".into()));
        }
        if g.reoptimize_every == 0 {
            return Err(ElicitError::InvalidConfig("reoptimize_every must be positive".into()));
        }
        if !(g.ep.damping > 0.0 && g.ep.damping <= 1.0 && g.ep.tol > 0.0 && g.ep.max_sweeps > 0) {
            return Err(ElicitError::InvalidConfig("invalid EP options".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.simulator.bounds.1 - self.simulator.bounds.0
    }

    /// Candidate kernels for hyperparameter selection, shortest lengthscale first.
    pub fn kernel_candidates(&self) -> Vec<KernelSpec> {
        let (lo, hi) = self.gp.lengthscale_range;
        let base = self.base_kernel(1.0);
        log_spaced(lo * self.width(), hi * self.width(), self.gp.lengthscale_count)
            .into_iter()
            .map(|l| base.with_lengthscale(l))
            .collect()
    }

    /// Kernel used before the first hyperparameter selection: the middle candidate.
    pub fn initial_kernel(&self) -> KernelSpec {
        let c = self.kernel_candidates();
        c[c.len() / 2].clone()
    }

    fn base_kernel(&self, lengthscale: f64) -> KernelSpec {
        match self.mode {
            Mode::Veri => KernelSpec::rbf(lengthscale, self.gp.signal_variance),
            Mode::Pari => KernelSpec::additive_pair(lengthscale, self.gp.signal_variance),
        }
    }
}

fn triangular_root(n: usize) -> Option<usize> {
    (2..).take_while(|l| l * (l - 1) / 2 <= n).find(|l| l * (l - 1) / 2 == n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_numbers() {
        assert_eq!(triangular_root(1), Some(2));
        assert_eq!(triangular_root(15), Some(6));
        assert_eq!(triangular_root(14), None);
        assert_eq!(triangular_root(0), None);
        assert_eq!(triangular_root(45), Some(10));
    }

    #[test]
    fn defaults_follow_schedules() {
        let v = SessionConfig::veri(SimulatorSpec::binomial(100), 1);
        assert_eq!((v.n_grid, v.n_active, v.total()), (21, 79, 100));
        let p = SessionConfig::pari(SimulatorSpec::binomial(100), 1);
        assert_eq!((p.n_grid, p.n_active, p.pari_levels()), (15, 85, Some(6)));
        assert!(v.validate().is_ok() && p.validate().is_ok());
    }

    #[test]
    fn rejects_bad_configs() {
        let p = SessionConfig::pari(SimulatorSpec::binomial(100), 1).with_schedule(14, 10);
        assert!(matches!(p.validate(), Err(ElicitError::InvalidConfig(_))));
        let mut v = SessionConfig::veri(SimulatorSpec::binomial(100), 1);
        v.belief_grid_size = 2;
        assert!(v.validate().is_err());
        let v = SessionConfig::veri(SimulatorSpec::binomial(100), 1).with_schedule(0, 5);
        assert!(v.validate().is_err());
        let mut v = SessionConfig::veri(SimulatorSpec::binomial(100), 1);
        v.ucb_beta = 0.0;
        assert!(v.validate().is_err());
    }

    #[test]
    fn candidate_lengthscales_scale_with_width() {
        let mut sim = SimulatorSpec::binomial(100);
        sim.bounds = (0.25, 0.75);
        let v = SessionConfig::veri(sim, 1);
        let c = v.kernel_candidates();
        assert_eq!(c.len(), 7);
        assert!((c[0].lengthscales[0] - 0.01).abs() < 1e-15);
        assert!((c[6].lengthscales[0] - 0.5).abs() < 1e-15);
        assert_eq!(v.initial_kernel(), c[3]);
        let p = SessionConfig::pari(SimulatorSpec::binomial(100), 1);
        assert_eq!(p.initial_kernel().lengthscales.len(), 2);
    }

    #[test]
    fn piecewise_prior() {
        let grid: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let p = Prior::Piecewise { knots: vec![0.0, 0.4, 0.5, 1.0], values: vec![1.0, 1.0, 0.0, 0.0] };
        let v = p.on_grid(&grid).unwrap();
        assert!(v[5..].iter().all(|&x| x == 0.0));
        assert!((trapezoid(&grid, &v) - 1.0).abs() < 1e-12);
        let u = Prior::Uniform.on_grid(&grid).unwrap();
        assert!(u.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let zero = Prior::Piecewise { knots: vec![2.0, 3.0], values: vec![1.0, 1.0] };
        assert!(zero.on_grid(&grid).is_err());
    }
}
