//! Generative models whose draws are shown to experts.
//!
//! Every draw is a pure function of `(spec, theta, seed)`: the seed keys a
//! ChaCha8 stream (`rand_chacha`), whose output is fixed by the published
//! ChaCha algorithm and therefore identical across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decimal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("invalid simulator spec: {0}")]
    InvalidSpec(String),
}

/// The model family behind a simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    /// `n_units` coin tosses with head probability `theta`.
    Binomial,
    /// Chinese-restaurant seating of `n_units` individuals. `theta` is the
    /// dispersion `alpha`, mapped to concentration `gamma * alpha / (1 - alpha)`.
    Crp {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_gamma() -> f64 {
    1.0
}

/// Distance kept from the open ends of the CRP dispersion interval when a
/// grid point sits exactly on a bound.
pub const CRP_EDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorSpec {
    #[serde(flatten)]
    pub model: ModelKind,
    pub n_units: u32,
    pub bounds: (f64, f64),
}

impl SimulatorSpec {
    pub fn binomial(n_units: u32) -> Self {
        SimulatorSpec { model: ModelKind::Binomial, n_units, bounds: (0.0, 1.0) }
    }

    pub fn crp(n_units: u32, gamma: f64) -> Self {
        SimulatorSpec { model: ModelKind::Crp { gamma }, n_units, bounds: (0.0, 1.0) }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SimError::InvalidSpec(format!("degenerate bounds [{lo}, {hi}]")));
        }
        if self.n_units < 1 {
            return Err(SimError::InvalidSpec("n_units must be at least 1".into()));
        }
        match self.model {
            ModelKind::Binomial if lo < 0.0 || hi > 1.0 => {
                Err(SimError::InvalidSpec("binomial bounds must lie in [0, 1]".into()))
            }
            ModelKind::Crp { .. } if lo < 0.0 || hi > 1.0 => {
                Err(SimError::InvalidSpec("crp bounds must lie in [0, 1]".into()))
            }
            ModelKind::Crp { gamma } if !(gamma.is_finite() && gamma > 0.0) => {
                Err(SimError::InvalidSpec("crp gamma must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Draws one simulation at `theta` from the stream keyed by `seed`.
    pub fn simulate(&self, theta: f64, seed: u64) -> Result<Simulation, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let payload = match self.model {
            ModelKind::Binomial => {
                check_probability(theta)?;
                Payload::Binomial { heads: binomial_heads(self.n_units, theta, &mut rng), n: self.n_units }
            }
            ModelKind::Crp { gamma } => {
                if !(0.0..=1.0).contains(&theta) {
                    return Err(SimError::OutOfRange(format!("alpha {theta} outside [0, 1]")));
                }
                let alpha = theta.clamp(CRP_EDGE, 1.0 - CRP_EDGE);
                let c = concentration(alpha, gamma)?;
                Payload::Crp { sizes: crp_partition(self.n_units, c, &mut rng) }
            }
        };
        Ok(Simulation { theta, seed, payload })
    }
}

fn check_probability(q: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(SimError::OutOfRange(format!("probability {q} outside [0, 1]")))
    }
}

/// Concentration `gamma * alpha / (1 - alpha)` for `alpha` in the open unit interval.
pub fn concentration(alpha: f64, gamma: f64) -> Result<f64, SimError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SimError::OutOfRange(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(gamma * alpha / (1.0 - alpha))
}

/// Number of successes in `n` Bernoulli(`q`) trials, one uniform per trial.
pub fn binomial_heads<R: Rng + ?Sized>(n: u32, q: f64, rng: &mut R) -> u32 {
    (0..n).map(|_| u32::from(rng.random::<f64>() < q)).sum()
}

/// Sequential CRP seating with concentration `c`; returns cluster sizes in
/// descending order.
pub fn crp_partition<R: Rng + ?Sized>(n_units: u32, c: f64, rng: &mut R) -> Vec<u32> {
    let mut sizes: Vec<u32> = Vec::new();
    for i in 0..n_units {
        // i customers already seated
        let u = rng.random::<f64>() * (f64::from(i) + c);
        if sizes.is_empty() || u < c {
            sizes.push(1);
            continue;
        }
        let mut acc = c;
        let mut chosen = sizes.len() - 1;
        for (k, &s) in sizes.iter().enumerate() {
            acc += f64::from(s);
            if u < acc {
                chosen = k;
                break;
            }
        }
        sizes[chosen] += 1;
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// `simulate_binomial` over an explicit seed.
pub fn simulate_binomial(n: u32, q: f64, seed: u64) -> Result<Simulation, SimError> {
    SimulatorSpec::binomial(n.max(1)).simulate(q, seed)
}

/// `simulate_crp` with concentration `gamma * alpha / (1 - alpha)`; endpoints rejected.
pub fn simulate_crp(n_units: u32, alpha: f64, gamma: f64, seed: u64) -> Result<Simulation, SimError> {
    let c = concentration(alpha, gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Simulation { theta: alpha, seed, payload: Payload::Crp { sizes: crp_partition(n_units, c, &mut rng) } })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    Binomial { heads: u32, n: u32 },
    Crp { sizes: Vec<u32> },
}

impl Payload {
    /// Short hex digest of the payload, stored in judgement logs.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("payload serialises");
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Scalar summary used in traces: heads, or number of clusters.
    pub fn outcome(&self) -> u32 {
        match self {
            Payload::Binomial { heads, .. } => *heads,
            Payload::Crp { sizes } => sizes.len() as u32,
        }
    }
}

/// What the expert sees; carries no parameter value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Render {
    Count { heads: u32, n: u32 },
    Bars { heights: Vec<u32> },
}

/// One model draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    #[serde(with = "decimal::real")]
    pub theta: f64,
    pub seed: u64,
    pub payload: Payload,
}

impl Simulation {
    pub fn render(&self) -> Render {
        describe_render(&self.payload)
    }

    /// One line of the simulation record format.
    pub fn to_record_line(&self) -> String {
        let kind = match self.payload {
            Payload::Binomial { .. } => "binomial",
            Payload::Crp { .. } => "crp",
        };
        let record = SimulationRecord { kind: kind.to_string(), theta: self.theta, seed: self.seed, payload: self.payload.clone() };
        serde_json::to_string(&record).expect("simulation serialises")
    }

    pub fn from_record_line(line: &str) -> Result<Self, serde_json::Error> {
        let r: SimulationRecord = serde_json::from_str(line)?;
        Ok(Simulation { theta: r.theta, seed: r.seed, payload: r.payload })
    }
}

#[derive(Serialize, Deserialize)]
struct SimulationRecord {
    kind: String,
    #[serde(with = "decimal::real")]
    theta: f64,
    seed: u64,
    payload: Payload,
}

pub fn describe_render(payload: &Payload) -> Render {
    match payload {
        Payload::Binomial { heads, n } => Render::Count { heads: *heads, n: *n },
        Payload::Crp { sizes } => Render::Bars { heights: sizes.clone() },
    }
}
