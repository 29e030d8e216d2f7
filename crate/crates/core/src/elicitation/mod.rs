//! The elicitation session engine.
//!
//! A session runs a fixed grid of queries, then an active phase driven by the
//! fitted classifier, and turns the judgements into a belief distribution.

mod acquire;
mod belief;
mod config;
mod session;

use thiserror::Error;

pub use acquire::{
    acquire_pair, acquire_pari, acquire_variance, acquire_veri, conditional_variance, information_gain, ucb_curve,
};
pub use belief::{
    belief_pari, belief_veri, linspace, misspec_diagnostic, pari_anchor, pari_ratio_curve, trapezoid,
    BeliefDistribution,
};
pub use config::{AcquisitionRule, GpSettings, Mode, PairRule, Prior, SessionConfig};
pub use session::{Judgement, JudgementRecord, Phase, Query, SeedField, Session};

use crate::gp::GpError;
use crate::simulate::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElicitError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("query {0} is still awaiting an answer")]
    OutstandingQuery(String),
    #[error("session is complete")]
    SessionComplete,
    #[error("unknown or stale query id {0}")]
    UnknownQuery(String),
    #[error("query {0} was already answered")]
    DuplicateAnswer(String),
    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(u8),
    #[error("{0} is not available in this mode")]
    UnsupportedMode(&'static str),
    #[error("judgement log does not replay: {0}")]
    ReplayMismatch(String),
    #[error("degenerate belief: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
