//! Prior elicitation from binary expert judgements on simulated data.
//!
//! An expert labels simulations from a model as realistic or not (or picks
//! the more realistic of two). A Gaussian-process probit classifier fitted by
//! Expectation Propagation turns those labels into a nonparametric belief
//! distribution over the model parameter, while an acquisition rule chooses
//! which simulations to show next.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod autorun;
pub mod decimal;
pub mod elicitation;
pub mod gp;
pub mod normal;
pub mod oracle;
pub mod report;
pub mod simulate;
pub mod store;
