//! TOML experiment configuration.
//!
//! ```toml
//! [problem]
//! g_kind = "trigonometric"    # or "polynomial"
//! alpha = 1                   # exponent of (1 + t)^alpha
//!
//! [coupling]
//! scheme = "waveform"         # or "single_value"
//! n_d = 5
//! n_n = 3
//! p = 1
//! dt_window = 0.1
//! t_end = 1.0
//! tol_rel = 1e-5
//! max_iterations = 100
//! on_divergence = "abort"     # or "continue"
//!
//! [accel]
//! scheme = "quasi_newton"     # "relaxation", "full_fixed_point"
//! omega = 0.5
//! qr2_epsilon = 1e-3
//! weighting = "residual_sum"  # or "none"
//! residual_view = "all_substeps" # "last_substep", "end_value"
//!
//! [integrators]
//! dirichlet = "IE"            # "TR", "SDC"
//! neumann = "IE"
//! sdc_sweeps = 16
//!
//! [grid]
//! h = 0.05
//!
//! [transport]
//! mode = "inprocess"          # or "tcp"
//! address = "127.0.0.1"
//! port = 0
//! timeout_secs = 30.0
//!
//! [output]
//! csv_path = "run.csv"
//! ```
//!
//! Every section and key is optional; missing values take the defaults
//! shown. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wfcpl_core::heat::{Integrator, ManufacturedSolution};
use wfcpl_core::protocol::ConfigDigest;
use wfcpl_core::{
    AccelConfig, AccelScheme, CouplingConfig, CouplingScheme, DivergencePolicy, ResidualView,
    Weighting,
};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub coupling: CouplingSection,
    pub accel: AccelSection,
    pub integrators: IntegratorSection,
    pub grid: GridSection,
    pub transport: TransportSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GKind {
    Polynomial,
    Trigonometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub g_kind: GKind,
    pub alpha: u32,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self { g_kind: GKind::Trigonometric, alpha: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Waveform,
    SingleValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceName {
    Abort,
    Continue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    pub scheme: SchemeName,
    pub n_d: usize,
    pub n_n: usize,
    pub p: usize,
    pub dt_window: f64,
    pub t_end: f64,
    pub tol_rel: f64,
    pub max_iterations: usize,
    pub on_divergence: DivergenceName,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            scheme: SchemeName::Waveform,
            n_d: 1,
            n_n: 1,
            p: 1,
            dt_window: 1.0,
            t_end: 1.0,
            tol_rel: 1e-5,
            max_iterations: 100,
            on_divergence: DivergenceName::Abort,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelName {
    QuasiNewton,
    Relaxation,
    FullFixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingName {
    ResidualSum,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewName {
    AllSubsteps,
    LastSubstep,
    EndValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccelSection {
    pub scheme: AccelName,
    pub omega: f64,
    pub qr2_epsilon: f64,
    pub weighting: WeightingName,
    pub residual_view: ViewName,
}

impl Default for AccelSection {
    fn default() -> Self {
        Self {
            scheme: AccelName::QuasiNewton,
            omega: 0.5,
            qr2_epsilon: 1e-3,
            weighting: WeightingName::ResidualSum,
            residual_view: ViewName::AllSubsteps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegratorName {
    IE,
    TR,
    SDC,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub dirichlet: IntegratorName,
    pub neumann: IntegratorName,
    pub sdc_sweeps: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self { dirichlet: IntegratorName::IE, neumann: IntegratorName::IE, sdc_sweeps: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub h: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { h: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    Inprocess,
    Tcp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportSection {
    pub mode: TransportMode,
    pub address: String,
    pub port: u16,
    pub timeout_secs: f64,
}

impl Default for TransportSection {
    fn default() -> Self {
        Self {
            mode: TransportMode::Inprocess,
            address: "127.0.0.1".into(),
            port: 0,
            timeout_secs: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub csv_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Load `path` (or start from the defaults), apply `section.key=value`
    /// overrides in order and validate the result.
    pub fn load_with_overrides(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let cfg = Self::merge(path, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// [`Self::load_with_overrides`] without validation, for sweep bases whose
    /// setup and window size are replaced per run.
    pub fn merge(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        for o in overrides {
            cfg = cfg.with_override(o)?;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Apply one `section.key=value` override. The value is read as a TOML
    /// value, falling back to a plain string.
    pub fn with_override(&self, spec: &str) -> Result<Self> {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override key `{path}` is not section.key")))?;
        let raw = raw.trim();
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let mut doc = toml::Value::try_from(self).expect("config serializes");
        let root = doc.as_table_mut().expect("config is a table");
        let sect = root
            .entry(section)
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{section}` is not a section")))?;
        sect.insert(key.to_string(), value);
        Self::parse(&toml::to_string(&doc).expect("table serializes"))
    }

    /// Check every value against the invariants of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        self.coupling_config()?.validate()?;
        self.grid_cells()?;
        if self.problem.g_kind == GKind::Polynomial && self.problem.alpha > 16 {
            return Err(Error::Config(format!("alpha = {} is out of range", self.problem.alpha)));
        }
        let uses_sdc = [self.integrators.dirichlet, self.integrators.neumann]
            .contains(&IntegratorName::SDC);
        if uses_sdc && self.integrators.sdc_sweeps > 10_000 {
            return Err(Error::Config("sdc_sweeps is unreasonably large".into()));
        }
        if !(self.transport.timeout_secs > 0.0) || !self.transport.timeout_secs.is_finite() {
            return Err(Error::Config("transport.timeout_secs must be positive".into()));
        }
        Ok(())
    }

    pub fn manufactured(&self) -> ManufacturedSolution {
        match self.problem.g_kind {
            GKind::Polynomial => ManufacturedSolution::Polynomial(self.problem.alpha),
            GKind::Trigonometric => ManufacturedSolution::Trigonometric,
        }
    }

    fn integrator(&self, name: IntegratorName) -> Integrator {
        match name {
            IntegratorName::IE => Integrator::ImplicitEuler,
            IntegratorName::TR => Integrator::Trapezoidal,
            IntegratorName::SDC => Integrator::Sdc { sweeps: self.integrators.sdc_sweeps },
        }
    }

    pub fn dirichlet_integrator(&self) -> Integrator {
        self.integrator(self.integrators.dirichlet)
    }

    pub fn neumann_integrator(&self) -> Integrator {
        self.integrator(self.integrators.neumann)
    }

    /// Grid intervals per unit length; `1 / h` must be a whole number.
    pub fn grid_cells(&self) -> Result<usize> {
        let h = self.grid.h;
        if !(h > 0.0 && h <= 0.5) {
            return Err(Error::Config(format!("grid.h = {h} must lie in (0, 0.5]")));
        }
        let cells = (1.0 / h).round();
        if ((cells * h) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("grid.h = {h} does not divide the unit interval")));
        }
        Ok(cells as usize)
    }

    pub fn coupling_config(&self) -> Result<CouplingConfig> {
        let c = &self.coupling;
        let a = &self.accel;
        let accel = AccelConfig {
            scheme: match a.scheme {
                AccelName::QuasiNewton => AccelScheme::QuasiNewton,
                AccelName::Relaxation => AccelScheme::Relaxation,
                AccelName::FullFixedPoint => AccelScheme::FullFixedPoint,
            },
            omega: a.omega,
            qr2_epsilon: a.qr2_epsilon,
            weighting: match a.weighting {
                WeightingName::ResidualSum => Weighting::ResidualSum,
                WeightingName::None => Weighting::None,
            },
            residual_view: match a.residual_view {
                ViewName::AllSubsteps => ResidualView::AllSubsteps,
                ViewName::LastSubstep => ResidualView::LastSubstep,
                ViewName::EndValue => ResidualView::EndValue,
            },
        };
        Ok(CouplingConfig {
            scheme: match c.scheme {
                SchemeName::Waveform => CouplingScheme::Waveform,
                SchemeName::SingleValue => CouplingScheme::SingleValue,
            },
            n_dirichlet: c.n_d,
            n_neumann: c.n_n,
            degree: c.p,
            dt_window: c.dt_window,
            t_end: c.t_end,
            tol_rel: c.tol_rel,
            max_iterations: c.max_iterations,
            accel,
            on_divergence: match c.on_divergence {
                DivergenceName::Abort => DivergencePolicy::Abort,
                DivergenceName::Continue => DivergencePolicy::Continue,
            },
        })
    }

    /// Everything both participants must agree on, as exchanged during the
    /// transport handshake.
    pub fn digest(&self) -> ConfigDigest {
        let mut d = ConfigDigest::new();
        let c = &self.coupling;
        let entries: [(&str, String); 12] = [
            ("coupling.dt_window", format!("{:?}", c.dt_window)),
            ("coupling.n_d", c.n_d.to_string()),
            ("coupling.n_n", c.n_n.to_string()),
            ("coupling.p", c.p.to_string()),
            ("coupling.scheme", format!("{:?}", c.scheme)),
            ("coupling.t_end", format!("{:?}", c.t_end)),
            ("grid.h", format!("{:?}", self.grid.h)),
            ("integrators.dirichlet", format!("{:?}", self.integrators.dirichlet)),
            ("integrators.neumann", format!("{:?}", self.integrators.neumann)),
            ("integrators.sdc_sweeps", self.integrators.sdc_sweeps.to_string()),
            ("problem.alpha", self.problem.alpha.to_string()),
            ("problem.g_kind", format!("{:?}", self.problem.g_kind)),
        ];
        for (k, v) in entries {
            d.insert(k, v).expect("digest keys are plain");
        }
        d
    }
}
