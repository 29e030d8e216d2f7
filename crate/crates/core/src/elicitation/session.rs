use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::acquire::{acquire_pair, acquire_single};
use super::belief::{belief_pari, belief_veri, linspace, misspec_diagnostic, BeliefDistribution};
use super::config::{Mode, SessionConfig};
use super::ElicitError;
use crate::decimal;
use crate::gp::{optimize_hypers, GpError, GpModel, KernelSpec};
use crate::simulate::{Render, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Grid,
    Active,
    Complete,
}

/// One question put to the expert.
///
/// Preference queries hold their simulations in ascending parameter order.
/// They are shown in a random A/B order (`swapped`), and labels submitted
/// against that presentation are mapped back with [`Query::canonical_label`].
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub query_id: String,
    pub index: usize,
    pub mode: Mode,
    pub phase: Phase,
    pub sims: Vec<Simulation>,
    pub swapped: bool,
    pub issued_at: u64,
}

impl Query {
    pub fn thetas(&self) -> Vec<f64> {
        self.sims.iter().map(|s| s.theta).collect()
    }

    /// Simulations in the order shown to the expert (A, then B).
    pub fn presented(&self) -> Vec<&Simulation> {
        let mut v: Vec<&Simulation> = self.sims.iter().collect();
        if self.swapped {
            v.reverse();
        }
        v
    }

    /// Display payloads in presentation order; these carry no parameter values.
    pub fn renders(&self) -> Vec<Render> {
        self.presented().into_iter().map(Simulation::render).collect()
    }

    /// Converts a label given against the presentation into the stored
    /// orientation, where 1 means the lower-θ simulation was preferred.
    pub fn canonical_label(&self, presented: u8) -> u8 {
        if self.swapped {
            1 - presented
        } else {
            presented
        }
    }

    pub fn presented_label(&self, canonical: u8) -> u8 {
        self.canonical_label(canonical)
    }
}

/// An answered query.
#[derive(Debug, Clone, PartialEq)]
pub struct Judgement {
    pub query: Query,
    /// Canonical label (veri: 1 = realistic; pari: 1 = lower θ preferred).
    pub label: u8,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedField {
    One(u64),
    Pair([u64; 2]),
}

/// One line of a judgement log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgementRecord {
    pub query_id: String,
    pub mode: Mode,
    #[serde(with = "decimal::opt_real", default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(with = "decimal::opt_real", default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(with = "decimal::opt_real", default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
    pub sim_seed: SeedField,
    pub payload_digest: String,
    pub label: u8,
    pub timestamp: u64,
}

impl Judgement {
    pub fn to_record(&self) -> JudgementRecord {
        let q = &self.query;
        let digest = q.sims.iter().map(|s| s.payload.digest()).collect::<Vec<_>>().join(":");
        let (theta, theta1, theta2, sim_seed) = match q.mode {
            Mode::Veri => (Some(q.sims[0].theta), None, None, SeedField::One(q.sims[0].seed)),
            Mode::Pari => (
                None,
                Some(q.sims[0].theta),
                Some(q.sims[1].theta),
                SeedField::Pair([q.sims[0].seed, q.sims[1].seed]),
            ),
        };
        JudgementRecord {
            query_id: q.query_id.clone(),
            mode: q.mode,
            theta,
            theta1,
            theta2,
            sim_seed,
            payload_digest: digest,
            label: self.label,
            timestamp: self.timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Planned {
    Single(f64),
    Pair(f64, f64),
}

fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// A sequential elicitation session.
///
/// Everything except timestamps is a pure function of the config and the
/// labels supplied, so replaying a log rebuilds an identical session.
#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    rng: ChaCha8Rng,
    plan: Vec<Planned>,
    grid: Vec<f64>,
    prior: Vec<f64>,
    judgements: Vec<Judgement>,
    outstanding: Option<Query>,
    kernel: KernelSpec,
    model: GpModel,
    hyper_fallback: bool,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, ElicitError> {
        config.validate()?;
        let (lo, hi) = config.simulator.bounds;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let plan = match config.mode {
            Mode::Veri => linspace(lo, hi, config.n_grid).into_iter().map(Planned::Single).collect(),
            Mode::Pari => {
                let levels = linspace(lo, hi, config.pari_levels().expect("validated"));
                let mut pairs: Vec<Planned> = Vec::with_capacity(config.n_grid);
                for i in 0..levels.len() {
                    for j in i + 1..levels.len() {
                        pairs.push(Planned::Pair(levels[i], levels[j]));
                    }
                }
                pairs.shuffle(&mut rng);
                pairs
            }
        };
        let grid = linspace(lo, hi, config.belief_grid_size);
        let prior = config.prior.on_grid(&grid)?;
        let kernel = config.initial_kernel();
        let model = match config.mode {
            Mode::Veri => GpModel::fit(&[], &[], &kernel, &config.gp.ep)?,
            Mode::Pari => GpModel::fit_pairwise(&[], &[], &kernel, &config.gp.ep)?,
        };
        Ok(Session {
            config,
            rng,
            plan,
            grid,
            prior,
            judgements: Vec::new(),
            outstanding: None,
            kernel,
            model,
            hyper_fallback: false,
        })
    }

    /// Rebuilds a session by replaying logged judgements in order.
    pub fn replay(config: SessionConfig, records: &[JudgementRecord]) -> Result<Self, ElicitError> {
        let mut session = Session::new(config)?;
        for (i, rec) in records.iter().enumerate() {
            let q = session.next_query().map_err(|e| ElicitError::ReplayMismatch(format!("record {i}: {e}")))?;
            let expected = Judgement { query: q.clone(), label: rec.label, timestamp: rec.timestamp }.to_record();
            if expected != *rec {
                return Err(ElicitError::ReplayMismatch(format!(
                    "record {i} ({}) differs from the regenerated query {}",
                    rec.query_id, q.query_id
                )));
            }
            session.record_judgement(&q.query_id, q.presented_label(rec.label))?;
            session.judgements.last_mut().expect("just recorded").timestamp = rec.timestamp;
        }
        Ok(session)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// True when the last hyperparameter search found no converged candidate.
    pub fn hyper_fallback(&self) -> bool {
        self.hyper_fallback
    }

    pub fn judgements(&self) -> &[Judgement] {
        &self.judgements
    }

    pub fn records(&self) -> Vec<JudgementRecord> {
        self.judgements.iter().map(Judgement::to_record).collect()
    }

    pub fn outstanding(&self) -> Option<&Query> {
        self.outstanding.as_ref()
    }

    pub fn answered(&self) -> usize {
        self.judgements.len()
    }

    pub fn total(&self) -> usize {
        self.config.total()
    }

    pub fn phase(&self) -> Phase {
        let n = self.answered();
        if n < self.config.n_grid {
            Phase::Grid
        } else if n < self.config.total() {
            Phase::Active
        } else {
            Phase::Complete
        }
    }

    /// Issues the next query and marks it outstanding.
    pub fn next_query(&mut self) -> Result<Query, ElicitError> {
        let phase = self.phase();
        if phase == Phase::Complete {
            return Err(ElicitError::SessionComplete);
        }
        if let Some(q) = &self.outstanding {
            return Err(ElicitError::OutstandingQuery(q.query_id.clone()));
        }
        let index = self.answered();
        let planned = match phase {
            Phase::Grid => self.plan[index],
            _ => match self.config.mode {
                Mode::Veri => Planned::Single(acquire_single(
                    &self.model,
                    &self.grid,
                    self.config.acquisition,
                    self.config.ucb_beta,
                )?),
                Mode::Pari => {
                    let (a, b) = acquire_pair(&self.model, &self.grid, self.config.pair_rule)?;
                    Planned::Pair(a, b)
                }
            },
        };
        let thetas = match planned {
            Planned::Single(t) => vec![t],
            Planned::Pair(a, b) => vec![a, b],
        };
        let mut sims = Vec::with_capacity(thetas.len());
        for t in thetas {
            let seed = self.rng.next_u64();
            sims.push(self.config.simulator.simulate(t, seed)?);
        }
        let swapped = self.config.mode == Mode::Pari && self.rng.random::<bool>();
        let query_id = format!("q{index:03}-{:08x}", self.rng.next_u32());
        let query = Query {
            query_id,
            index,
            mode: self.config.mode,
            phase,
            sims,
            swapped,
            issued_at: now_millis(),
        };
        self.outstanding = Some(query.clone());
        Ok(query)
    }

    /// Records the answer to the outstanding query and refits the classifier.
    ///
    /// `label` refers to the query as presented: realistic = 1 for realism
    /// queries, "A preferred" = 1 for preference queries.
    pub fn record_judgement(&mut self, query_id: &str, label: u8) -> Result<(), ElicitError> {
        if label > 1 {
            return Err(ElicitError::InvalidLabel(label));
        }
        match &self.outstanding {
            Some(q) if q.query_id == query_id => {}
            _ => {
                if self.judgements.iter().any(|j| j.query.query_id == query_id) {
                    return Err(ElicitError::DuplicateAnswer(query_id.to_string()));
                }
                return Err(ElicitError::UnknownQuery(query_id.to_string()));
            }
        }
        let query = self.outstanding.take().expect("matched above");
        let canonical = query.canonical_label(label);
        self.judgements.push(Judgement { query: query.clone(), label: canonical, timestamp: now_millis() });
        if let Err(e) = self.refit() {
            self.judgements.pop();
            self.outstanding = Some(query);
            return Err(e);
        }
        Ok(())
    }

    fn fit_with(&self, kernel: &KernelSpec) -> Result<GpModel, GpError> {
        let labels: Vec<u8> = self.judgements.iter().map(|j| j.label).collect();
        match self.config.mode {
            Mode::Veri => {
                let inputs: Vec<Vec<f64>> = self.judgements.iter().map(|j| vec![j.query.sims[0].theta]).collect();
                GpModel::fit(&inputs, &labels, kernel, &self.config.gp.ep)
            }
            Mode::Pari => {
                let pairs: Vec<(Vec<f64>, Vec<f64>)> = self
                    .judgements
                    .iter()
                    .map(|j| (vec![j.query.sims[0].theta], vec![j.query.sims[1].theta]))
                    .collect();
                GpModel::fit_pairwise(&pairs, &labels, kernel, &self.config.gp.ep)
            }
        }
    }

    fn refit(&mut self) -> Result<(), ElicitError> {
        let n = self.answered();
        if n > 0 && n.is_multiple_of(self.config.gp.reoptimize_every) {
            let candidates = self.config.kernel_candidates();
            let selection = optimize_hypers(&candidates, &self.kernel, |k| self.fit_with(k))?;
            self.kernel = selection.kernel;
            self.model = selection.model;
            self.hyper_fallback = selection.fallback;
        } else {
            self.model = self.fit_with(&self.kernel)?;
        }
        Ok(())
    }

    /// Belief from the current model; available at any point of the session.
    pub fn belief(&self) -> Result<BeliefDistribution, ElicitError> {
        match self.config.mode {
            Mode::Veri => belief_veri(&self.model, &self.grid, &self.prior),
            Mode::Pari => belief_pari(&self.model, &self.grid),
        }
    }

    /// Marginal probability of a realistic draw; realism mode only.
    pub fn diagnostic(&self) -> Result<f64, ElicitError> {
        match self.config.mode {
            Mode::Veri => misspec_diagnostic(&self.model, &self.grid, &self.prior),
            Mode::Pari => Err(ElicitError::UnsupportedMode("misspecification diagnostic")),
        }
    }
}
