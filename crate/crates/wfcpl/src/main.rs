use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Child, Command, ExitCode};

use clap::{Args, Parser, Subcommand, ValueEnum};
use wfcpl::config::{DivergenceName, TransportMode};
use wfcpl::experiments::{
    self, run_inprocess, run_iteration_table, run_order_study, run_recovery_matrix, RecoveryCase,
    RunOutcome,
};
use wfcpl::{Error, ExperimentConfig, Result};
use wfcpl_core::protocol::Role;

/// Waveform-iteration coupling of two heat-equation subdomains.
#[derive(Parser)]
#[command(name = "wfcpl", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `section.key=value`, applied after the file (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// CSV destination; overrides `output.csv_path`, stdout if neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// One coupled run; one CSV row per window.
    Run {
        #[command(flatten)]
        common: Common,
        /// TCP mode: listen here and wait for externally started participants
        /// instead of spawning them.
        #[arg(long, value_name = "HOST:PORT")]
        listen: Option<String>,
    },
    /// Average iterations per window for rel-WI, QN-SC, QN-WI and rQN-WI.
    Table {
        #[command(flatten)]
        common: Common,
        /// Window sizes.
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.5,0.2,0.1")]
        dts: Vec<f64>,
        /// Multi-rate setups as `n_D x n_N`.
        #[arg(long, value_delimiter = ',', default_value = "1x1,1x3,1x5,3x1,3x3,3x5,5x1,5x3,5x5")]
        setups: Vec<String>,
    },
    /// Exact-recovery matrix for the problem, integrator, scheme and `p` of
    /// the configuration.
    Recovery {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.0125,0.025,0.05,0.1,0.2,0.5,1.0")]
        dts: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1x1,1x2,1x3,1x5,2x1,2x2,2x3,2x5,3x1,3x2,3x3,3x5,5x1,5x2,5x3,5x5")]
        setups: Vec<String>,
    },
    /// Convergence order of the final-time error under window refinement.
    Order {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.125,0.0625,0.03125,0.015625")]
        dts: Vec<f64>,
    },
    /// Serve one subdomain to a TCP orchestrator.
    Participant {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "HOST:PORT")]
        connect: String,
        #[arg(long, value_enum)]
        role: RoleArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Dirichlet,
    Neumann,
}

impl RoleArg {
    fn role(self) -> Role {
        match self {
            RoleArg::Dirichlet => Role::Dirichlet,
            RoleArg::Neumann => Role::Neumann,
        }
    }

    fn name(self) -> &'static str {
        match self {
            RoleArg::Dirichlet => "dirichlet",
            RoleArg::Neumann => "neumann",
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    ExperimentConfig::load_with_overrides(common.config.as_deref(), &common.overrides)
}

/// Base of a sweep: every run is validated on its own.
fn load_base(common: &Common) -> Result<ExperimentConfig> {
    ExperimentConfig::merge(common.config.as_deref(), &common.overrides)
}

fn parse_setups(specs: &[String]) -> Result<Vec<(usize, usize)>> {
    specs
        .iter()
        .map(|s| {
            let (a, b) = s
                .split_once('x')
                .ok_or_else(|| Error::Config(format!("setup `{s}` is not n_DxN_N")))?;
            let n = |v: &str| v.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad setup `{s}`")));
            Ok((n(a)?, n(b)?))
        })
        .collect()
}

/// Write through `f` to the CSV destination.
fn emit(common: &Common, cfg: &ExperimentConfig, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match common.out.as_ref().or(cfg.output.csv_path.as_ref()) {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
        }
    }
    Ok(())
}

fn spawn_participant(addr: &str, role: RoleArg, common: &Common) -> Result<Child> {
    let exe = std::env::current_exe()?;
    let mut cmd = Command::new(exe);
    cmd.arg("participant").arg("--connect").arg(addr).arg("--role").arg(role.name());
    if let Some(c) = &common.config {
        cmd.arg("--config").arg(c);
    }
    for o in &common.overrides {
        cmd.arg("--override").arg(o);
    }
    Ok(cmd.spawn()?)
}

fn run_tcp(cfg: &ExperimentConfig, common: &Common, listen: Option<&str>) -> Result<RunOutcome> {
    let (listener, children) = match listen {
        Some(addr) => (TcpListener::bind(addr)?, Vec::new()),
        None => {
            let listener = TcpListener::bind((cfg.transport.address.as_str(), cfg.transport.port))?;
            let addr = listener.local_addr()?.to_string();
            let children = [RoleArg::Dirichlet, RoleArg::Neumann]
                .into_iter()
                .map(|r| spawn_participant(&addr, r, common))
                .collect::<Result<Vec<_>>>()?;
            (listener, children)
        }
    };
    let outcome = experiments::run_tcp(cfg, &listener);
    for mut child in children {
        let status = child.wait()?;
        if outcome.is_ok() && !status.success() {
            return Err(Error::ChannelClosed(format!("participant exited with {status}")));
        }
    }
    outcome
}

fn check_converged(cfg: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    let abort = cfg.coupling.on_divergence == DivergenceName::Abort;
    match outcome.reports.iter().find(|r| !r.converged) {
        Some(r) if abort => Err(Error::NotConverged { window: r.index, iterations: r.iterations }),
        _ => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Run { common, listen } => {
            let cfg = load(&common)?;
            let outcome = match (cfg.transport.mode, listen.as_deref()) {
                (TransportMode::Inprocess, None) => run_inprocess(&cfg)?,
                (_, listen) => run_tcp(&cfg, &common, listen)?,
            };
            emit(&common, &cfg, |w| experiments::write_run_csv(w, &outcome))?;
            check_converged(&cfg, &outcome)
        }
        Cmd::Table { common, dts, setups } => {
            let cfg = load_base(&common)?;
            let cells = run_iteration_table(&cfg, &dts, &parse_setups(&setups)?)?;
            emit(&common, &cfg, |w| experiments::write_table_csv(w, &cells))
        }
        Cmd::Recovery { common, dts, setups } => {
            let cfg = load_base(&common)?;
            let integrator = cfg.integrators.dirichlet;
            if cfg.integrators.neumann != integrator {
                return Err(Error::Config("recovery uses one integrator on both sides".into()));
            }
            let case = RecoveryCase {
                alpha: cfg.problem.alpha,
                integrator,
                p: cfg.coupling.p,
                scheme: cfg.coupling.scheme,
            };
            let cells = run_recovery_matrix(&cfg, &[case], &parse_setups(&setups)?, &dts)?;
            emit(&common, &cfg, |w| experiments::write_recovery_csv(w, &cells))?;
            let failed = cells.iter().filter(|c| !c.pass).count();
            eprintln!("{} of {} cells recover the exact solution", cells.len() - failed, cells.len());
            Ok(())
        }
        Cmd::Order { common, dts } => {
            let cfg = load_base(&common)?;
            let study = run_order_study(&cfg, &dts)?;
            emit(&common, &cfg, |w| experiments::write_order_csv(w, &study))?;
            eprintln!("observed order {:.3}", study.order);
            Ok(())
        }
        Cmd::Participant { common, connect, role } => {
            let cfg = load(&common)?;
            experiments::run_participant_tcp(&cfg, connect.as_str(), role.role())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wfcpl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
