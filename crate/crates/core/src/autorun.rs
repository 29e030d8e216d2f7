//! Full sessions answered by an automated expert, and their file outputs.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::aggregate::{summarize, ExpertSummary};
use crate::decimal::fmt17;
use crate::elicitation::{BeliefDistribution, ElicitError, Mode, Phase, Query, Session, SessionConfig};
use crate::oracle::{OracleError, OracleSpec};
use crate::simulate::Render;
use crate::store::SessionLog;

#[derive(Debug, Error)]
pub enum AutoError {
    #[error(transparent)]
    Elicit(#[from] ElicitError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Generator for oracle coin flips: the session seed on a separate stream.
pub fn oracle_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn render_heads(r: &Render) -> Result<u32, OracleError> {
    match r {
        Render::Count { heads, .. } => Ok(*heads),
        Render::Bars { .. } => Err(OracleError::UnsupportedPayload),
    }
}

/// The oracle's answer to rendered payloads in presentation order.
///
/// Only the displayed data is used, so a remote client holding the same
/// renders reaches the same label.
pub fn answer_renders(oracle: &OracleSpec, renders: &[Render], rng: &mut ChaCha8Rng) -> Result<u8, OracleError> {
    match renders {
        [one] => Ok(oracle.realism_from_heads(render_heads(one)?)),
        [a, b] => Ok(oracle.preference_from_heads(render_heads(a)?, render_heads(b)?, rng)),
        _ => Err(OracleError::InvalidSpec(format!("cannot judge {} payloads", renders.len()))),
    }
}

pub fn answer(oracle: &OracleSpec, query: &Query, rng: &mut ChaCha8Rng) -> Result<u8, OracleError> {
    answer_renders(oracle, &query.renders(), rng)
}

/// One answered query, in canonical orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub phase: Phase,
    pub thetas: Vec<f64>,
    pub outcomes: Vec<u32>,
    pub label: u8,
}

#[derive(Debug, Clone)]
pub struct AutoRun {
    pub session: Session,
    pub trace: Vec<TraceRow>,
    pub belief: BeliefDistribution,
    pub diagnostic: Option<f64>,
    pub summary: ExpertSummary,
}

pub fn run_auto(config: SessionConfig, oracle: &OracleSpec) -> Result<AutoRun, AutoError> {
    oracle.validate()?;
    let mut rng = oracle_rng(config.seed);
    let mut session = Session::new(config)?;
    let mut trace = Vec::with_capacity(session.total());
    while session.phase() != Phase::Complete {
        let q = session.next_query()?;
        let presented = answer(oracle, &q, &mut rng)?;
        session.record_judgement(&q.query_id, presented)?;
        trace.push(TraceRow {
            step: q.index,
            phase: q.phase,
            thetas: q.thetas(),
            outcomes: q.sims.iter().map(|s| s.payload.outcome()).collect(),
            label: q.canonical_label(presented),
        });
    }
    let belief = session.belief()?;
    let diagnostic = match session.mode() {
        Mode::Veri => Some(session.diagnostic()?),
        Mode::Pari => None,
    };
    let summary = summarize(&belief);
    Ok(AutoRun { session, trace, belief, diagnostic, summary })
}

pub const BELIEF_CSV_HEADER: &str = "theta,density,band_lo,band_hi";

pub fn belief_csv(b: &BeliefDistribution) -> String {
    let mut out = String::with_capacity(80 * (b.grid.len() + 1));
    out.push_str(BELIEF_CSV_HEADER);
    out.push('\n');
    for i in 0..b.grid.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt17(b.grid[i]),
            fmt17(b.density[i]),
            fmt17(b.band_lo[i]),
            fmt17(b.band_hi[i])
        );
    }
    out
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Grid => "grid",
        Phase::Active => "active",
        Phase::Complete => "complete",
    }
}

pub fn trace_csv(mode: Mode, rows: &[TraceRow]) -> String {
    let mut out = String::new();
    out.push_str(match mode {
        Mode::Veri => "step,phase,theta,outcome,label\n",
        Mode::Pari => "step,phase,theta1,theta2,outcome1,outcome2,label\n",
    });
    for r in rows {
        let thetas: Vec<String> = r.thetas.iter().map(|&t| fmt17(t)).collect();
        let outcomes: Vec<String> = r.outcomes.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{},{},{},{},{}", r.step, phase_name(r.phase), thetas.join(","), outcomes.join(","), r.label);
    }
    out
}

#[derive(Serialize)]
struct SummaryFile {
    mode: Mode,
    seed: u64,
    answered: usize,
    #[serde(with = "crate::decimal::real")]
    mode_theta: f64,
    #[serde(with = "crate::decimal::real")]
    mass_30_70: f64,
    #[serde(with = "crate::decimal::opt_real", skip_serializing_if = "Option::is_none")]
    diagnostic: Option<f64>,
    #[serde(with = "crate::decimal::real")]
    mean: f64,
    #[serde(with = "crate::decimal::real")]
    sd: f64,
    #[serde(with = "crate::decimal::real")]
    q10: f64,
    #[serde(with = "crate::decimal::real")]
    q50: f64,
    #[serde(with = "crate::decimal::real")]
    q90: f64,
    hyper_fallback: bool,
    lengthscale: Vec<f64>,
}

pub fn summary_json(run: &AutoRun) -> String {
    let s = &run.summary;
    let file = SummaryFile {
        mode: run.session.mode(),
        seed: run.session.config().seed,
        answered: run.session.answered(),
        mode_theta: run.belief.mode(),
        mass_30_70: run.belief.mass_between(0.3, 0.7),
        diagnostic: run.diagnostic,
        mean: s.mean,
        sd: s.sd,
        q10: s.q10,
        q50: s.q50,
        q90: s.q90,
        hyper_fallback: run.session.hyper_fallback(),
        lengthscale: run.session.kernel().lengthscales.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("summary serialises");
    text.push('\n');
    text
}

/// Writes `belief.csv`, `trace.csv`, `summary.json` and `session.jsonl` into `dir`.
pub fn write_outputs(dir: &Path, run: &AutoRun) -> Result<(), AutoError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("belief.csv"), belief_csv(&run.belief))?;
    std::fs::write(dir.join("trace.csv"), trace_csv(run.session.mode(), &run.trace))?;
    std::fs::write(dir.join("summary.json"), summary_json(run))?;
    let id = format!("auto-{}-{}", run.session.mode(), run.session.config().seed);
    std::fs::write(dir.join("session.jsonl"), SessionLog::from_session(id, 0, &run.session).to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::SimulatorSpec;

    #[test]
    fn short_veri_run_writes_schema() {
        let cfg = SessionConfig::veri(SimulatorSpec::binomial(100), 3).with_schedule(5, 5);
        let run = run_auto(cfg, &OracleSpec::default()).unwrap();
        assert_eq!(run.trace.len(), 10);
        let csv = belief_csv(&run.belief);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], BELIEF_CSV_HEADER);
        assert_eq!(lines.len(), 202);
        assert!(lines[1].starts_with("0.0000000000000000e0,"));
        let trace = trace_csv(Mode::Veri, &run.trace);
        assert!(trace.starts_with("step,phase,theta,outcome,label\n0,grid,"));
        assert!(run.diagnostic.is_some());
    }

    #[test]
    fn pari_trace_is_canonical() {
        let cfg = SessionConfig::pari(SimulatorSpec::binomial(100), 3).with_schedule(3, 3);
        let run = run_auto(cfg, &OracleSpec::default()).unwrap();
        assert!(run.diagnostic.is_none());
        for r in &run.trace {
            assert!(r.thetas[0] < r.thetas[1]);
        }
        assert!(trace_csv(Mode::Pari, &run.trace).starts_with("step,phase,theta1,theta2,outcome1,outcome2,label\n"));
    }

    #[test]
    fn crp_payloads_are_not_judged() {
        let cfg = SessionConfig::veri(SimulatorSpec::crp(100, 1.0), 3).with_schedule(3, 0);
        assert!(matches!(run_auto(cfg, &OracleSpec::default()), Err(AutoError::Oracle(OracleError::UnsupportedPayload))));
    }
}
