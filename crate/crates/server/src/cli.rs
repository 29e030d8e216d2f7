//! Command-line interface: automated runs, group reports and the HTTP server.

use std::error::Error;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use elicit_core::autorun::{run_auto, write_outputs};
use elicit_core::elicitation::{Mode, PairRule, SessionConfig};
use elicit_core::oracle::OracleSpec;
use elicit_core::report::{build_cells, format_table, GroupBeliefs};
use elicit_core::simulate::SimulatorSpec;
use elicit_core::store::SessionLog;

type CliResult<T> = Result<T, Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(name = "elicit", version, about = "Prior elicitation from judgements of simulated data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a complete session answered by an automated expert.
    RunAuto(RunAutoArgs),
    /// Pool session beliefs per group and print mean and sd of each pool.
    Report(ReportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Binomial,
    Crp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Veri,
    Pari,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairRuleArg {
    LatentVariance,
    InformationGain,
}

#[derive(Debug, Args)]
pub struct RunAutoArgs {
    #[arg(long, value_enum, default_value = "binomial")]
    pub model: ModelArg,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Grid-phase judgements (default 21 for veri, 15 for pari).
    #[arg(long)]
    pub n_grid: Option<usize>,
    /// Active-phase judgements (default 79 for veri, 85 for pari).
    #[arg(long)]
    pub n_active: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for belief.csv, trace.csv, summary.json and session.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub n_units: u32,
    /// CRP concentration scale.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// UCB exploration weight.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "latent-variance")]
    pub pair_rule: PairRuleArg,
    /// Preferred number of heads.
    #[arg(long, default_value_t = 50)]
    pub target: u32,
    /// Smallest realistic number of heads.
    #[arg(long, default_value_t = 35)]
    pub accept_lo: u32,
    /// Largest realistic number of heads.
    #[arg(long, default_value_t = 65)]
    pub accept_hi: u32,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// NAME=LOG[,LOG...]; a LOG may be a session log or a run-auto output directory.
    #[arg(long = "group", required = true, value_parser = parse_group)]
    pub groups: Vec<(String, Vec<PathBuf>)>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory holding one judgement log per session.
    #[arg(long, env = "ELICIT_DATA_DIR", default_value = "sessions")]
    pub data_dir: PathBuf,
}

fn parse_group(s: &str) -> Result<(String, Vec<PathBuf>), String> {
    let (name, files) = s.split_once('=').ok_or_else(|| format!("expected NAME=LOG[,LOG...], got {s:?}"))?;
    if name.is_empty() {
        return Err("group name must not be empty".into());
    }
    let files: Vec<PathBuf> = files.split(',').filter(|f| !f.is_empty()).map(PathBuf::from).collect();
    Ok((name.to_string(), files))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::RunAuto(args) => run_auto_cmd(args),
        Command::Report(args) => report_cmd(args),
        Command::Serve(args) => serve_cmd(args),
    }
}

impl RunAutoArgs {
    pub fn config(&self) -> SessionConfig {
        let simulator = match self.model {
            ModelArg::Binomial => SimulatorSpec::binomial(self.n_units),
            ModelArg::Crp => SimulatorSpec::crp(self.n_units, self.gamma),
        };
        let mut c = match self.mode {
            ModeArg::Veri => SessionConfig::veri(simulator, self.seed),
            ModeArg::Pari => SessionConfig::pari(simulator, self.seed),
        };
        if let Some(n) = self.n_grid {
            c.n_grid = n;
        }
        if let Some(n) = self.n_active {
            c.n_active = n;
        }
        c.ucb_beta = self.beta;
        c.pair_rule = match self.pair_rule {
            PairRuleArg::LatentVariance => PairRule::LatentVariance,
            PairRuleArg::InformationGain => PairRule::InformationGain,
        };
        c
    }

    pub fn oracle(&self) -> OracleSpec {
        OracleSpec { target: self.target, accept_lo: self.accept_lo, accept_hi: self.accept_hi, ..OracleSpec::default() }
    }
}

fn run_auto_cmd(args: RunAutoArgs) -> CliResult<()> {
    let run = run_auto(args.config(), &args.oracle())?;
    write_outputs(&args.out, &run)?;
    let s = &run.summary;
    print!("{} judgements; mean {:.4}, sd {:.4}, median {:.4}", run.trace.len(), s.mean, s.sd, s.q50);
    if let Some(d) = run.diagnostic {
        print!(", diagnostic {d:.4}");
    }
    println!();
    Ok(())
}

fn log_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("session.jsonl")
    } else {
        p.to_path_buf()
    }
}

fn report_cmd(args: ReportArgs) -> CliResult<()> {
    let mut groups: Vec<GroupBeliefs> = Vec::new();
    for (name, files) in &args.groups {
        if files.is_empty() {
            return Err(format!("group {name:?} has no sessions").into());
        }
        for f in files {
            let path = log_path(f);
            let session = SessionLog::read(&path)
                .and_then(|log| log.replay())
                .map_err(|e| format!("{}: {e}", path.display()))?;
            let belief = session.belief()?;
            let mode = session.mode();
            match groups.iter_mut().find(|g| g.group == *name && g.mode == mode) {
                Some(g) => g.beliefs.push(belief),
                None => groups.push(GroupBeliefs { group: name.clone(), mode, beliefs: vec![belief] }),
            }
        }
    }
    groups.sort_by_key(|g| g.mode == Mode::Pari);
    let table = format_table(&build_cells(&groups)?);
    match &args.out {
        Some(path) => std::fs::write(path, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn serve_cmd(args: ServeArgs) -> CliResult<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let app = crate::app(&args.data_dir)?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse()?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, dir = %args.data_dir.display(), "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
