//! Coupled heat runs and the parameter studies built on them.
//!
//! Every run goes through the frame transport: in-process runs serve both
//! participants from threads over in-memory pipes, TCP runs from separate
//! processes. Per-window L2 errors are reported back by the participants
//! when the session ends.

use std::io::Write;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use wfcpl_core::heat::{HeatParticipant, Side};
use wfcpl_core::protocol::Role;
use wfcpl_core::{average_iterations, Coupling, WindowReport};

use crate::config::{
    AccelName, DivergenceName, ExperimentConfig, GKind, IntegratorName, SchemeName, ViewName,
    WeightingName,
};
use crate::transport::{accept_tcp, connect_tcp, duplex, serve_participant, RemoteParticipant, Session};
use crate::{Error, Result};

/// Recovery threshold on the L2 error.
pub const EXACT_RECOVERY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub reports: Vec<WindowReport>,
    /// `sqrt(e_D^2 + e_N^2)` at the end of every window in `reports`.
    pub errors: Vec<f64>,
}

impl RunOutcome {
    pub fn all_converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }

    pub fn final_error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

fn timeout(cfg: &ExperimentConfig) -> Duration {
    Duration::from_secs_f64(cfg.transport.timeout_secs)
}

fn heat_participant(cfg: &ExperimentConfig, role: Role) -> Result<HeatParticipant> {
    let cells = cfg.grid_cells()?;
    let ms = cfg.manufactured();
    let p = match role {
        Role::Dirichlet => {
            HeatParticipant::new(Side::Dirichlet, ms, cells, cfg.dirichlet_integrator(), cfg.coupling.n_d)?
        }
        Role::Neumann => {
            HeatParticipant::new(Side::Neumann, ms, cells, cfg.neumann_integrator(), cfg.coupling.n_n)?
        }
        Role::Orchestrator => return Err(Error::Config("the orchestrator is not a solver".into())),
    };
    Ok(p)
}

/// Serve one heat subdomain over an established session until TERMINATE.
pub fn serve_heat<S: std::io::Read + Write>(
    cfg: &ExperimentConfig,
    session: Session<S>,
    role: Role,
) -> Result<()> {
    let mut p = heat_participant(cfg, role)?;
    serve_participant(session, &mut p, cfg.coupling.dt_window, cfg.coupling.p, |p| p.l2_error())
}

fn orchestrate<S: std::io::Read + Write>(
    cfg: &ExperimentConfig,
    dirichlet: Session<S>,
    neumann: Session<S>,
) -> Result<RunOutcome> {
    let cc = cfg.coupling_config()?;
    let d = RemoteParticipant::new(dirichlet, cfg.coupling.n_d)?;
    let n = RemoteParticipant::new(neumann, cfg.coupling.n_n)?;
    let mut coupling = Coupling::new(cc, d, n)?;
    let reports = coupling.run(|_, _, _| Ok(())).map_err(|e| {
        let w = coupling.current_window();
        let window = (w.start() / w.len()).round() as usize;
        Error::InWindow { window, source: Box::new(e.into()) }
    })?;
    let (d, n) = coupling.into_participants();
    let e_d = d.finish()?;
    let e_n = n.finish()?;
    if e_d.len() != reports.len() || e_n.len() != reports.len() {
        return Err(Error::ChannelClosed(format!(
            "participants reported {} / {} errors for {} windows",
            e_d.len(),
            e_n.len(),
            reports.len()
        )));
    }
    let errors = e_d.iter().zip(&e_n).map(|(a, b)| (a * a + b * b).sqrt()).collect();
    Ok(RunOutcome { reports, errors })
}

/// Both participants in threads of this process, connected by in-memory pipes.
pub fn run_inprocess(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let digest = cfg.digest();
    let mut sessions = Vec::new();
    let mut workers = Vec::new();
    for role in [Role::Dirichlet, Role::Neumann] {
        let (ours, theirs) = duplex(timeout(cfg));
        let worker_cfg = cfg.clone();
        let worker_digest = digest.clone();
        workers.push(thread::spawn(move || {
            let session = Session::connect(theirs, role, &worker_digest)?;
            serve_heat(&worker_cfg, session, role)
        }));
        sessions.push(Session::accept(ours, &digest)?);
    }
    let n = sessions.pop().expect("two sessions");
    let d = sessions.pop().expect("two sessions");
    let outcome = orchestrate(cfg, d, n);
    let mut worker_error = None;
    for w in workers {
        match w.join() {
            Ok(Ok(())) => {}
            Ok(Err(e)) => worker_error = worker_error.or(Some(e)),
            Err(_) => worker_error = worker_error.or(Some(Error::ChannelClosed("participant thread panicked".into()))),
        }
    }
    // The orchestrator's error explains a participant's closed channel, not
    // the other way round.
    let outcome = outcome?;
    match worker_error {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}

/// Orchestrate two participants that connect to `listener`.
pub fn run_tcp(cfg: &ExperimentConfig, listener: &TcpListener) -> Result<RunOutcome> {
    cfg.validate()?;
    let digest = cfg.digest();
    let a = accept_tcp(listener, timeout(cfg), &digest)?;
    let b = accept_tcp(listener, timeout(cfg), &digest)?;
    let (d, n) = match (a.peer(), b.peer()) {
        (Role::Dirichlet, Role::Neumann) => (a, b),
        (Role::Neumann, Role::Dirichlet) => (b, a),
        (x, y) => {
            return Err(Error::ChannelClosed(format!("participants announced roles {x:?} and {y:?}")))
        }
    };
    orchestrate(cfg, d, n)
}

/// Participant process: connect to the orchestrator at `addr` and serve.
pub fn run_participant_tcp(cfg: &ExperimentConfig, addr: impl ToSocketAddrs + Copy, role: Role) -> Result<()> {
    cfg.validate()?;
    let session: Session<TcpStream> = connect_tcp(addr, role, timeout(cfg), &cfg.digest())?;
    serve_heat(cfg, session, role)
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// One CSV row per window: `window,t_end,iterations,converged,residual_norms,l2_error`
/// with the residual norms joined by `;`.
pub fn write_run_csv<W: Write>(out: W, outcome: &RunOutcome) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window", "t_end", "iterations", "converged", "residual_norms", "l2_error"])?;
    for (r, e) in outcome.reports.iter().zip(&outcome.errors) {
        let norms: Vec<String> = r.residual_norms.iter().map(|v| fmt_f64(*v)).collect();
        w.write_record([
            r.index.to_string(),
            fmt_f64(r.window.end()),
            r.iterations.to_string(),
            r.converged.to_string(),
            norms.join(";"),
            fmt_f64(*e),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The coupling variants compared in the iteration table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Waveform iteration with constant underrelaxation.
    RelWi,
    /// Single value coupling with quasi-Newton on the end value.
    QnSc,
    /// Waveform iteration with quasi-Newton on all substeps.
    QnWi,
    /// Waveform iteration with quasi-Newton on the last substep only.
    RqnWi,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::RelWi, Variant::QnSc, Variant::QnWi, Variant::RqnWi];

    pub fn label(self) -> &'static str {
        match self {
            Variant::RelWi => "rel-WI",
            Variant::QnSc => "QN-SC",
            Variant::QnWi => "QN-WI",
            Variant::RqnWi => "rQN-WI",
        }
    }

    /// `base` with this variant's coupling and acceleration settings.
    pub fn apply(self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = base.clone();
        let (scheme, accel, view) = match self {
            Variant::RelWi => (SchemeName::Waveform, AccelName::Relaxation, ViewName::AllSubsteps),
            Variant::QnSc => (SchemeName::SingleValue, AccelName::QuasiNewton, ViewName::EndValue),
            Variant::QnWi => (SchemeName::Waveform, AccelName::QuasiNewton, ViewName::AllSubsteps),
            Variant::RqnWi => (SchemeName::Waveform, AccelName::QuasiNewton, ViewName::LastSubstep),
        };
        cfg.coupling.scheme = scheme;
        cfg.accel.scheme = accel;
        cfg.accel.residual_view = view;
        if self == Variant::RelWi {
            cfg.accel.weighting = WeightingName::None;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub variant: Variant,
    pub n_d: usize,
    pub n_n: usize,
    pub p: usize,
    pub dt: f64,
    pub avg_iterations: f64,
    pub all_converged: bool,
}

/// Average coupling iterations per window for every variant, setup and
/// window size. The remaining settings (problem, integrators, `t_end`,
/// tolerance, `p`) come from `base`; windows that hit the iteration cap are
/// counted with the cap.
pub fn run_iteration_table(
    base: &ExperimentConfig,
    dts: &[f64],
    setups: &[(usize, usize)],
) -> Result<Vec<TableCell>> {
    if dts.is_empty() || setups.is_empty() {
        return Err(Error::Config("iteration table needs window sizes and setups".into()));
    }
    let mut cells = Vec::new();
    for variant in Variant::ALL {
        for &(n_d, n_n) in setups {
            for &dt in dts {
                let mut cfg = variant.apply(base);
                cfg.coupling.n_d = n_d;
                cfg.coupling.n_n = n_n;
                cfg.coupling.dt_window = dt;
                cfg.coupling.on_divergence = DivergenceName::Continue;
                let out = run_inprocess(&cfg)?;
                cells.push(TableCell {
                    variant,
                    n_d,
                    n_n,
                    p: cfg.coupling.p,
                    dt,
                    avg_iterations: average_iterations(&out.reports)?,
                    all_converged: out.all_converged(),
                });
            }
        }
    }
    Ok(cells)
}

pub const TABLE_NOTE: &str = "# finite difference discretization: trends are comparable to the \
reference study, individual cells are not expected to match";

pub fn write_table_csv<W: Write>(mut out: W, cells: &[TableCell]) -> Result<()> {
    writeln!(out, "{TABLE_NOTE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "scheme", "view", "n_d", "n_n", "p", "dt", "avg_iterations", "all_converged"])?;
    for c in cells {
        let cfg = c.variant.apply(&ExperimentConfig::default());
        w.write_record([
            c.variant.label().to_string(),
            format!("{:?}", cfg.coupling.scheme),
            format!("{:?}", cfg.accel.residual_view),
            c.n_d.to_string(),
            c.n_n.to_string(),
            c.p.to_string(),
            fmt_f64(c.dt),
            fmt_f64(c.avg_iterations),
            c.all_converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryCase {
    pub alpha: u32,
    pub integrator: IntegratorName,
    pub p: usize,
    pub scheme: SchemeName,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCell {
    pub case: RecoveryCase,
    pub n_d: usize,
    pub n_n: usize,
    pub dt: f64,
    pub max_error: f64,
    pub converged: bool,
    pub pass: bool,
}

/// Configuration of one recovery cell: `g = (1 + t)^alpha` with the case's
/// integrator on both sides and coupling tolerance 1e-12. Single value cases
/// use quasi-Newton on the end value, waveform cases quasi-Newton on all
/// substeps.
pub fn recovery_config(base: &ExperimentConfig, case: RecoveryCase, (n_d, n_n): (usize, usize), dt: f64) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.problem.g_kind = GKind::Polynomial;
    cfg.problem.alpha = case.alpha;
    cfg.integrators.dirichlet = case.integrator;
    cfg.integrators.neumann = case.integrator;
    cfg.coupling.scheme = case.scheme;
    cfg.coupling.n_d = n_d;
    cfg.coupling.n_n = n_n;
    cfg.coupling.p = case.p;
    cfg.coupling.dt_window = dt;
    cfg.coupling.tol_rel = 1e-12;
    cfg.coupling.on_divergence = DivergenceName::Continue;
    cfg.accel.scheme = AccelName::QuasiNewton;
    cfg.accel.residual_view = match case.scheme {
        SchemeName::SingleValue => ViewName::EndValue,
        SchemeName::Waveform => ViewName::AllSubsteps,
    };
    cfg
}

/// Exact recovery check over setups and window sizes, see
/// [`recovery_config`]. The L2 error at every window end is compared against
/// [`EXACT_RECOVERY`]. Waveform setups with `p > min(n_D, n_N)` are skipped.
pub fn run_recovery_matrix(
    base: &ExperimentConfig,
    cases: &[RecoveryCase],
    setups: &[(usize, usize)],
    dts: &[f64],
) -> Result<Vec<RecoveryCell>> {
    let mut cells = Vec::new();
    for &case in cases {
        for &(n_d, n_n) in setups {
            if case.scheme == SchemeName::Waveform && case.p > n_d.min(n_n) {
                continue;
            }
            for &dt in dts {
                let out = run_inprocess(&recovery_config(base, case, (n_d, n_n), dt))?;
                let max_error = out.max_error();
                cells.push(RecoveryCell {
                    case,
                    n_d,
                    n_n,
                    dt,
                    max_error,
                    converged: out.all_converged(),
                    pass: max_error < EXACT_RECOVERY,
                });
            }
        }
    }
    Ok(cells)
}

pub fn write_recovery_csv<W: Write>(out: W, cells: &[RecoveryCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "integrator", "scheme", "p", "n_d", "n_n", "dt", "max_l2_error", "converged", "pass"])?;
    for c in cells {
        w.write_record([
            c.case.alpha.to_string(),
            format!("{:?}", c.case.integrator),
            format!("{:?}", c.case.scheme),
            c.case.p.to_string(),
            c.n_d.to_string(),
            c.n_n.to_string(),
            fmt_f64(c.dt),
            fmt_f64(c.max_error),
            c.converged.to_string(),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudy {
    pub dts: Vec<f64>,
    /// L2 error at `t_end` per window size.
    pub errors: Vec<f64>,
    pub iterations: Vec<f64>,
    pub order: f64,
}

/// Least-squares slope of `log(error)` against `log(dt)`.
pub fn compute_observed_order(errors: &[f64], dts: &[f64]) -> Result<f64> {
    if errors.len() != dts.len() || errors.len() < 2 {
        return Err(wfcpl_core::Error::LengthMismatch { expected: dts.len(), found: errors.len() }.into());
    }
    if errors.iter().chain(dts).any(|v| !(*v > 0.0)) {
        return Err(wfcpl_core::Error::NonPositive.into());
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("window sizes must differ".into()));
    }
    Ok(sxy / sxx)
}

/// Run `cfg` at every window size in `dts` (at least three) and fit the
/// convergence order of the final-time error.
pub fn run_order_study(cfg: &ExperimentConfig, dts: &[f64]) -> Result<OrderStudy> {
    if dts.len() < 3 {
        return Err(Error::Config("an order study needs at least three window sizes".into()));
    }
    let mut errors = Vec::with_capacity(dts.len());
    let mut iterations = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut c = cfg.clone();
        c.coupling.dt_window = dt;
        let out = run_inprocess(&c)?;
        if let Some(bad) = out.reports.iter().find(|r| !r.converged) {
            return Err(Error::NotConverged { window: bad.index, iterations: bad.iterations });
        }
        errors.push(out.final_error());
        iterations.push(average_iterations(&out.reports)?);
    }
    let order = compute_observed_order(&errors, dts)?;
    Ok(OrderStudy { dts: dts.to_vec(), errors, iterations, order })
}

pub fn write_order_csv<W: Write>(mut out: W, study: &OrderStudy) -> Result<()> {
    writeln!(out, "# observed order {}", fmt_f64(study.order))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dt", "l2_error", "avg_iterations"])?;
    for ((dt, e), it) in study.dts.iter().zip(&study.errors).zip(&study.iterations) {
        w.write_record([fmt_f64(*dt), fmt_f64(*e), fmt_f64(*it)])?;
    }
    w.flush()?;
    Ok(())
}
