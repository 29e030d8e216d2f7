//! Rule-based experts that stand in for humans on the binomial model.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulate::{Payload, Simulation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle experts judge binomial payloads only")]
    UnsupportedPayload,
    #[error("invalid oracle spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Fair coin from the caller's generator.
    Random,
    /// The first simulation wins.
    First,
}

/// Decision rules of an automated expert.
///
/// Realism: a draw with `accept_lo <= heads <= accept_hi` is realistic.
/// Preference: the draw with heads closer to `target` is preferred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub target: u32,
    pub accept_lo: u32,
    pub accept_hi: u32,
    pub tie_rule: TieRule,
}

impl Default for OracleSpec {
    /// Fair-coin expert for 100 tosses: 35..=65 heads realistic, closest to 50 preferred.
    fn default() -> Self {
        OracleSpec { target: 50, accept_lo: 35, accept_hi: 65, tie_rule: TieRule::Random }
    }
}

impl OracleSpec {
    pub fn accept_all() -> Self {
        OracleSpec { accept_lo: 0, accept_hi: u32::MAX, ..Self::default() }
    }

    /// An acceptance window no draw can reach.
    pub fn reject_all() -> Self {
        OracleSpec { accept_lo: u32::MAX, accept_hi: u32::MAX, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.accept_lo > self.accept_hi {
            return Err(OracleError::InvalidSpec(format!(
                "accept_lo {} exceeds accept_hi {}",
                self.accept_lo, self.accept_hi
            )));
        }
        Ok(())
    }

    /// Realism label for one simulation.
    pub fn judge_realism(&self, sim: &Simulation) -> Result<u8, OracleError> {
        Ok(self.realism_from_heads(heads(sim)?))
    }

    pub fn realism_from_heads(&self, heads: u32) -> u8 {
        u8::from(self.accept_lo <= heads && heads <= self.accept_hi)
    }

    /// 1 when `first` is preferred over `second`.
    pub fn judge_preference<R: Rng + ?Sized>(
        &self,
        first: &Simulation,
        second: &Simulation,
        rng: &mut R,
    ) -> Result<u8, OracleError> {
        Ok(self.preference_from_heads(heads(first)?, heads(second)?, rng))
    }

    /// 1 when a draw with `first` heads is preferred over one with `second`.
    pub fn preference_from_heads<R: Rng + ?Sized>(&self, first: u32, second: u32, rng: &mut R) -> u8 {
        let d1 = first.abs_diff(self.target);
        let d2 = second.abs_diff(self.target);
        match d1.cmp(&d2) {
            std::cmp::Ordering::Less => 1,
            std::cmp::Ordering::Greater => 0,
            std::cmp::Ordering::Equal => match self.tie_rule {
                TieRule::First => 1,
                TieRule::Random => u8::from(rng.random::<bool>()),
            },
        }
    }
}

fn heads(sim: &Simulation) -> Result<u32, OracleError> {
    match sim.payload {
        Payload::Binomial { heads, .. } => Ok(heads),
        Payload::Crp { .. } => Err(OracleError::UnsupportedPayload),
    }
}
