//! Serial Dirichlet-Neumann coupling loop.
//!
//! Every window is an implicit fixed-point problem on the Dirichlet data
//! `c_D`. One iteration solves the Dirichlet participant with the current
//! `c_D` waveform, turns its output into the `c_N` waveform, solves the
//! Neumann participant with it, and hands the resulting `c_D` samples to the
//! [`Accelerator`]. Participants are rolled back to their window-start
//! checkpoint before every repeated iteration.

use alloc::format;
use alloc::vec::Vec;

use crate::accel::{AccelConfig, Accelerator, ResidualView};
use crate::waveform::{SampleSet, TimeWindow, Waveform, MAX_DEGREE};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingScheme {
    /// Only end-of-window values are exchanged; each side sees a globally
    /// constant boundary value over the window.
    SingleValue,
    /// Full waveforms interpolated from every substep.
    Waveform,
}

/// What to do when a window hits `max_iterations` without converging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergencePolicy {
    Abort,
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    pub scheme: CouplingScheme,
    pub n_dirichlet: usize,
    pub n_neumann: usize,
    /// Interpolation degree; ignored for single value coupling.
    pub degree: usize,
    pub dt_window: f64,
    pub t_end: f64,
    pub tol_rel: f64,
    pub max_iterations: usize,
    pub accel: AccelConfig,
    pub on_divergence: DivergencePolicy,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            scheme: CouplingScheme::Waveform,
            n_dirichlet: 1,
            n_neumann: 1,
            degree: 1,
            dt_window: 1.0,
            t_end: 1.0,
            tol_rel: 1e-5,
            max_iterations: 100,
            accel: AccelConfig::default(),
            on_divergence: DivergencePolicy::Abort,
        }
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.n_dirichlet == 0 || self.n_neumann == 0 {
            return bad(format!(
                "substep counts must be positive (n_D = {}, n_N = {})",
                self.n_dirichlet, self.n_neumann
            ));
        }
        if self.scheme == CouplingScheme::Waveform {
            let n_min = self.n_dirichlet.min(self.n_neumann);
            if self.degree == 0 || self.degree > MAX_DEGREE || self.degree > n_min {
                return bad(format!(
                    "interpolation degree p = {} must satisfy 1 <= p <= min(n_D, n_N, {MAX_DEGREE}) = {}",
                    self.degree,
                    n_min.min(MAX_DEGREE)
                ));
            }
            if self.accel.residual_view == ResidualView::EndValue {
                return bad("the end-value residual view requires single value coupling".into());
            }
        }
        if !(self.dt_window > 0.0) || !self.dt_window.is_finite() {
            return bad(format!("dt_window must be positive, got {}", self.dt_window));
        }
        if !(self.tol_rel > 0.0) {
            return bad(format!("tol_rel must be positive, got {}", self.tol_rel));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        self.accel.validate()?;
        self.windows().map(|_| ())
    }

    /// Number of windows up to `t_end`, which must be a whole multiple of
    /// `dt_window` (relative slack 1e-12).
    pub fn windows(&self) -> Result<usize> {
        let ratio = self.t_end / self.dt_window;
        let count = libm::round(ratio);
        if !(count >= 1.0) || libm::fabs(count * self.dt_window - self.t_end) > 1e-12 * self.t_end {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} is not a positive multiple of dt_window = {}",
                self.t_end, self.dt_window
            )));
        }
        Ok(count as usize)
    }
}

/// A black-box solver taking part in the coupling.
///
/// `solve_window` integrates over the whole window with the given boundary
/// waveform and returns its interface output at `t_ini + i * dt / n` for
/// `i = 0..=n`, where the `i = 0` row is the output of the window-start state.
pub trait Participant {
    /// Length of the interface vector this participant produces.
    fn interface_size(&self) -> usize;

    /// Substeps per coupling window.
    fn substeps(&self) -> usize;

    /// Interface output of the current state.
    fn initial_output(&mut self) -> Result<Vec<f64>>;

    /// Save the current state as the window-start state.
    fn checkpoint(&mut self) -> Result<()>;

    /// Return to the last checkpoint.
    fn restore(&mut self) -> Result<()>;

    fn solve_window(&mut self, window: &TimeWindow, boundary: &Waveform) -> Result<SampleSet>;
}

impl<P: Participant + ?Sized> Participant for &mut P {
    fn interface_size(&self) -> usize {
        (**self).interface_size()
    }
    fn substeps(&self) -> usize {
        (**self).substeps()
    }
    fn initial_output(&mut self) -> Result<Vec<f64>> {
        (**self).initial_output()
    }
    fn checkpoint(&mut self) -> Result<()> {
        (**self).checkpoint()
    }
    fn restore(&mut self) -> Result<()> {
        (**self).restore()
    }
    fn solve_window(&mut self, window: &TimeWindow, boundary: &Waveform) -> Result<SampleSet> {
        (**self).solve_window(window, boundary)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub index: usize,
    pub window: TimeWindow,
    pub iterations: usize,
    /// `||H(x) - x||_2` for every iteration, in order.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
    /// Final Dirichlet data `c_D` (Neumann output).
    pub dirichlet_data: SampleSet,
    /// Final Neumann data `c_N` (Dirichlet output).
    pub neumann_data: SampleSet,
}

/// Relative convergence test `||new - old|| <= tol * ||new||`.
/// Returns the decision together with the absolute residual norm.
pub fn convergence_measure(new: &[f64], old: &[f64], tol_rel: f64) -> Result<(bool, f64)> {
    if new.len() != old.len() {
        return Err(Error::LayoutMismatch { len: new.len(), block: old.len() });
    }
    let mut diff = 0.0;
    let mut scale = 0.0;
    for (a, b) in new.iter().zip(old) {
        diff += (a - b) * (a - b);
        scale += a * a;
    }
    let (diff, scale) = (libm::sqrt(diff), libm::sqrt(scale));
    Ok((diff <= tol_rel * scale, diff))
}

pub fn average_iterations(reports: &[WindowReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::Empty);
    }
    let total: usize = reports.iter().map(|r| r.iterations).sum();
    Ok(total as f64 / reports.len() as f64)
}

/// Drives two participants window by window.
pub struct Coupling<D, N> {
    cfg: CouplingConfig,
    dirichlet: D,
    neumann: N,
    accel: Accelerator,
    window: TimeWindow,
    index: usize,
    /// `c_D` at the start of the current window.
    c_d0: Vec<f64>,
}

impl<D: Participant, N: Participant> Coupling<D, N> {
    pub fn new(cfg: CouplingConfig, dirichlet: D, mut neumann: N) -> Result<Self> {
        cfg.validate()?;
        if dirichlet.substeps() != cfg.n_dirichlet || neumann.substeps() != cfg.n_neumann {
            return Err(Error::InvalidConfig(format!(
                "participants take ({}, {}) substeps but the coupling expects ({}, {})",
                dirichlet.substeps(),
                neumann.substeps(),
                cfg.n_dirichlet,
                cfg.n_neumann
            )));
        }
        let c_d0 = neumann.initial_output()?;
        let accel = Accelerator::new(cfg.accel, neumann.interface_size())?;
        let window = TimeWindow::new(0.0, cfg.dt_window)?;
        Ok(Self { cfg, dirichlet, neumann, accel, window, index: 0, c_d0 })
    }

    pub fn config(&self) -> &CouplingConfig {
        &self.cfg
    }

    pub fn dirichlet(&self) -> &D {
        &self.dirichlet
    }

    pub fn neumann(&self) -> &N {
        &self.neumann
    }

    pub fn into_participants(self) -> (D, N) {
        (self.dirichlet, self.neumann)
    }

    pub fn current_window(&self) -> &TimeWindow {
        &self.window
    }

    /// Constant extrapolation of the current window-start Dirichlet data.
    pub fn initial_guess(&self) -> Waveform {
        Waveform::constant(self.c_d0.clone(), self.window)
    }

    /// Run every window up to `t_end`, calling `observe` after each one.
    ///
    /// Under [`DivergencePolicy::Abort`] the run stops after the first window
    /// that did not converge; that window's report is the last one returned.
    pub fn run<F>(&mut self, mut observe: F) -> Result<Vec<WindowReport>>
    where
        F: FnMut(&WindowReport, &D, &N) -> Result<()>,
    {
        let windows = self.cfg.windows()?;
        let mut reports = Vec::with_capacity(windows);
        for _ in 0..windows {
            let report = self.run_window()?;
            observe(&report, &self.dirichlet, &self.neumann)?;
            let stop = !report.converged && self.cfg.on_divergence == DivergencePolicy::Abort;
            reports.push(report);
            if stop {
                break;
            }
        }
        Ok(reports)
    }

    /// Iterate the current window to convergence (or `max_iterations`) and
    /// move on to the next window.
    pub fn run_window(&mut self) -> Result<WindowReport> {
        let window = self.window;
        let single = self.cfg.scheme == CouplingScheme::SingleValue;
        let p = self.cfg.degree;

        self.dirichlet.checkpoint()?;
        self.neumann.checkpoint()?;
        self.accel.start_window();

        // Fixed-point variable: all c_D substeps (waveform) or the end value.
        let mut x: Vec<f64> = if single {
            self.c_d0.clone()
        } else {
            self.c_d0.repeat(self.cfg.n_neumann)
        };
        let mut c_d = self.initial_guess();
        let mut residual_norms = Vec::new();

        let mut iteration = 0;
        loop {
            iteration += 1;
            let d_out = self.dirichlet.solve_window(&window, &c_d)?;
            let c_n = if single {
                Waveform::constant(d_out.last().to_vec(), window)
            } else {
                Waveform::interpolate(&d_out, p)?
            };
            let n_out = self.neumann.solve_window(&window, &c_n)?;
            let x_tilde = if single { n_out.last().to_vec() } else { n_out.flatten() };

            let (converged, res) = convergence_measure(&x_tilde, &x, self.cfg.tol_rel)?;
            residual_norms.push(res);
            if converged || iteration >= self.cfg.max_iterations {
                let report = WindowReport {
                    index: self.index,
                    window,
                    iterations: iteration,
                    residual_norms,
                    converged,
                    dirichlet_data: n_out,
                    neumann_data: d_out,
                };
                self.c_d0 = report.dirichlet_data.last().to_vec();
                self.window = window.next();
                self.index += 1;
                return Ok(report);
            }

            x = self.accel.next_iterate(&x, &x_tilde)?;
            c_d = if single {
                Waveform::constant(x.clone(), window)
            } else {
                let samples = SampleSet::unflatten(
                    window,
                    n_out.times().to_vec(),
                    self.c_d0.clone(),
                    &x,
                )?;
                Waveform::interpolate(&samples, p)?
            };
            self.dirichlet.restore()?;
            self.neumann.restore()?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_measure_cases() {
        assert_eq!(convergence_measure(&[1.0, 2.0], &[1.0, 2.0], 1e-300).unwrap(), (true, 0.0));
        assert_eq!(convergence_measure(&[2.0], &[1.0], 0.5).unwrap(), (true, 1.0));
        let (a, _) = convergence_measure(&[2.0, 3.0], &[1.0, 1.0], 0.3).unwrap();
        let (b, _) = convergence_measure(&[20.0, 30.0], &[10.0, 10.0], 0.3).unwrap();
        assert_eq!(a, b);
        assert!(convergence_measure(&[1.0], &[1.0, 2.0], 0.1).is_err());
    }

    fn report(iterations: usize) -> WindowReport {
        let w = TimeWindow::new(0.0, 1.0).unwrap();
        let s = SampleSet::uniform(w, alloc::vec![alloc::vec![0.0], alloc::vec![0.0]]).unwrap();
        WindowReport {
            index: 0,
            window: w,
            iterations,
            residual_norms: alloc::vec![0.0; iterations],
            converged: true,
            dirichlet_data: s.clone(),
            neumann_data: s,
        }
    }

    #[test]
    fn average_iteration_counts() {
        assert_eq!(average_iterations(&[report(4), report(6)]).unwrap(), 5.0);
        assert_eq!(average_iterations(&[report(7)]).unwrap(), 7.0);
        assert_eq!(average_iterations(&[report(3), report(3), report(3)]).unwrap(), 3.0);
        assert_eq!(average_iterations(&[]).unwrap_err(), Error::Empty);
    }

    #[test]
    fn window_count() {
        let cfg = CouplingConfig { dt_window: 0.5, t_end: 10.0, ..CouplingConfig::default() };
        assert_eq!(cfg.windows().unwrap(), 20);
        let cfg = CouplingConfig { dt_window: 0.1, t_end: 1.0, ..CouplingConfig::default() };
        assert_eq!(cfg.windows().unwrap(), 10);
        let cfg = CouplingConfig { dt_window: 0.3, t_end: 1.0, ..CouplingConfig::default() };
        assert!(cfg.windows().is_err());
    }

    #[test]
    fn degree_validated_against_substeps() {
        let cfg = CouplingConfig { n_dirichlet: 5, n_neumann: 1, degree: 2, ..CouplingConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let cfg = CouplingConfig {
            scheme: CouplingScheme::SingleValue,
            n_dirichlet: 5,
            n_neumann: 1,
            degree: 2,
            ..CouplingConfig::default()
        };
        assert!(cfg.validate().is_ok());
    }
}
