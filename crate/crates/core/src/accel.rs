//! Acceleration of the per-window interface fixed-point iteration.
//!
//! Given the current iterate `x` and the fixed-point map output `x~ = H(x)`,
//! an [`Accelerator`] produces the next iterate. Supported schemes are the
//! plain fixed-point update, constant underrelaxation, and the interface
//! quasi-Newton inverse least-squares method (IQN-ILS, also known as Anderson
//! acceleration) with three choices of residual view:
//!
//! * [`ResidualView::AllSubsteps`]: residual over every substep (QN-WI),
//! * [`ResidualView::LastSubstep`]: residual of the last substep only while
//!   every substep is updated (rQN-WI),
//! * [`ResidualView::EndValue`]: single end-of-window value (QN-SC).
//!
//! The secant system is solved matrix-free through an economy QR of the
//! residual differences, built by modified Gram-Schmidt with one
//! reorthogonalization pass and filtered with the QR2 criterion.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{axpy, dot, norm2};
use crate::{Error, Result};

/// Lower bound for accumulated residual norms in the weighting.
pub const WEIGHT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccelScheme {
    FullFixedPoint,
    Relaxation,
    QuasiNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    None,
    ResidualSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualView {
    AllSubsteps,
    LastSubstep,
    EndValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelConfig {
    pub scheme: AccelScheme,
    /// Relaxation factor; also the first-iteration fallback for quasi-Newton.
    pub omega: f64,
    pub qr2_epsilon: f64,
    pub weighting: Weighting,
    pub residual_view: ResidualView,
}

impl Default for AccelConfig {
    fn default() -> Self {
        Self {
            scheme: AccelScheme::QuasiNewton,
            omega: 0.5,
            qr2_epsilon: 1e-3,
            weighting: Weighting::ResidualSum,
            residual_view: ResidualView::AllSubsteps,
        }
    }
}

impl AccelConfig {
    pub fn full_fixed_point() -> Self {
        Self { scheme: AccelScheme::FullFixedPoint, omega: 1.0, ..Self::default() }
    }

    pub fn relaxation(omega: f64) -> Self {
        Self { scheme: AccelScheme::Relaxation, omega, weighting: Weighting::None, ..Self::default() }
    }

    pub fn quasi_newton(view: ResidualView) -> Self {
        Self { residual_view: view, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "accel.omega must lie in (0, 1], got {}",
                self.omega
            )));
        }
        if !(self.qr2_epsilon > 0.0) || !self.qr2_epsilon.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!(
                "accel.qr2_epsilon must be positive, got {}",
                self.qr2_epsilon
            )));
        }
        Ok(())
    }
}

/// Restrict the full residual `full_new - full_old` to the requested view.
/// `block` is the number of interface degrees of freedom per substep.
pub fn view_residual(
    full_new: &[f64],
    full_old: &[f64],
    block: usize,
    view: ResidualView,
) -> Result<Vec<f64>> {
    if full_new.len() != full_old.len() {
        return Err(Error::LengthMismatch { expected: full_new.len(), found: full_old.len() });
    }
    let len = full_new.len();
    if block == 0 || len == 0 || len % block != 0 {
        return Err(Error::LayoutMismatch { len, block });
    }
    let range = match view {
        ResidualView::AllSubsteps => 0..len,
        ResidualView::LastSubstep | ResidualView::EndValue => len - block..len,
    };
    Ok(full_new[range.clone()].iter().zip(&full_old[range]).map(|(a, b)| a - b).collect())
}

/// `omega * h_x + (1 - omega) * x_old`, componentwise.
pub fn relax(x_old: &[f64], h_x: &[f64], omega: f64) -> Result<Vec<f64>> {
    if x_old.len() != h_x.len() {
        return Err(Error::LengthMismatch { expected: x_old.len(), found: h_x.len() });
    }
    if omega == 1.0 {
        return Ok(h_x.to_vec());
    }
    Ok(x_old.iter().zip(h_x).map(|(x, h)| omega * h + (1.0 - omega) * x).collect())
}

/// Per-block weights `1 / max(sum, WEIGHT_FLOOR)`.
pub fn residual_sum_weights(accumulated: &[f64]) -> Vec<f64> {
    accumulated.iter().map(|&s| 1.0 / s.max(WEIGHT_FLOOR)).collect()
}

/// Residual and value difference columns collected within one window.
#[derive(Debug, Clone, Default)]
pub struct SecantHistory {
    v: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    prev_x_tilde: Option<Vec<f64>>,
    prev_residual: Option<Vec<f64>>,
    block: usize,
    residual_sums: Vec<f64>,
}

impl SecantHistory {
    /// `block` is the row count of one weighting block (the interface size).
    pub fn new(block: usize) -> Self {
        Self { block, ..Self::default() }
    }

    pub fn clear(&mut self) {
        self.v.clear();
        self.w.clear();
        self.prev_x_tilde = None;
        self.prev_residual = None;
        self.residual_sums.clear();
    }

    pub fn columns(&self) -> usize {
        self.v.len()
    }

    pub fn v(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn w(&self) -> &[Vec<f64>] {
        &self.w
    }

    /// Store `(x_tilde, residual)` and, from the second call on, push the
    /// difference columns against the previous pair. Newest column is last.
    pub fn append(&mut self, x_tilde: &[f64], residual: &[f64]) -> Result<()> {
        if let (Some(px), Some(pr)) = (&self.prev_x_tilde, &self.prev_residual) {
            if px.len() != x_tilde.len() {
                return Err(Error::DimensionChange { expected: px.len(), found: x_tilde.len() });
            }
            if pr.len() != residual.len() {
                return Err(Error::DimensionChange { expected: pr.len(), found: residual.len() });
            }
            self.v.push(residual.iter().zip(pr).map(|(a, b)| a - b).collect());
            self.w.push(x_tilde.iter().zip(px).map(|(a, b)| a - b).collect());
        }
        self.prev_x_tilde = Some(x_tilde.to_vec());
        self.prev_residual = Some(residual.to_vec());
        Ok(())
    }

    /// Add the blockwise norms of `residual` to the running sums.
    pub fn accumulate(&mut self, residual: &[f64]) -> Result<()> {
        let block = if self.block == 0 { residual.len() } else { self.block };
        if block == 0 || residual.len() % block != 0 {
            return Err(Error::LayoutMismatch { len: residual.len(), block });
        }
        let nblocks = residual.len() / block;
        if self.residual_sums.is_empty() {
            self.residual_sums = vec![0.0; nblocks];
        } else if self.residual_sums.len() != nblocks {
            return Err(Error::DimensionChange {
                expected: self.residual_sums.len() * block,
                found: residual.len(),
            });
        }
        for (sum, chunk) in self.residual_sums.iter_mut().zip(residual.chunks(block)) {
            *sum += norm2(chunk);
        }
        Ok(())
    }

    pub fn residual_sums(&self) -> &[f64] {
        &self.residual_sums
    }

    /// Row weights (one per residual entry) from the accumulated sums.
    fn row_weights(&self, len: usize) -> Option<Vec<f64>> {
        if self.residual_sums.is_empty() {
            return None;
        }
        let block = len / self.residual_sums.len();
        let weights = residual_sum_weights(&self.residual_sums);
        Some(weights.iter().flat_map(|&w| core::iter::repeat(w).take(block)).collect())
    }

    fn remove(&mut self, idx: usize) {
        self.v.remove(idx);
        self.w.remove(idx);
    }
}

/// Economy QR of the surviving (weighted) residual difference columns.
///
/// Columns are ordered newest first; `kept[j]` is the history index of the
/// `j`-th QR column and `r` is upper triangular, row-major `k x k`.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub kept: Vec<usize>,
}

impl QrFactors {
    pub fn rank(&self) -> usize {
        self.q.len()
    }
}

fn scaled(col: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    match weights {
        Some(w) => col.iter().zip(w).map(|(c, w)| c * w).collect(),
        None => col.to_vec(),
    }
}

/// QR2 filter: orthogonalize columns newest to oldest and delete every column
/// whose orthogonal remainder is below `epsilon` times its own norm. Deleted
/// columns are removed from both `V` and `W` of `hist`.
pub fn qr2_filter(hist: &mut SecantHistory, epsilon: f64, weights: Option<&[f64]>) -> QrFactors {
    let k = hist.columns();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut rcols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut kept = Vec::with_capacity(k);
    let mut dropped = Vec::new();

    for idx in (0..k).rev() {
        let v = scaled(&hist.v[idx], weights);
        let vnorm = norm2(&v);
        let mut rem = v;
        let mut coeffs = vec![0.0; q.len()];
        for _pass in 0..2 {
            for (j, qj) in q.iter().enumerate() {
                let c = dot(qj, &rem);
                axpy(-c, qj, &mut rem);
                coeffs[j] += c;
            }
        }
        let rnorm = norm2(&rem);
        if !(vnorm > 0.0) || rnorm < epsilon * vnorm {
            dropped.push(idx);
            continue;
        }
        for x in rem.iter_mut() {
            *x /= rnorm;
        }
        coeffs.push(rnorm);
        q.push(rem);
        rcols.push(coeffs);
        kept.push(idx);
    }

    // `dropped` is in decreasing index order, so removal keeps indices valid.
    for &idx in &dropped {
        hist.remove(idx);
    }
    let kept: Vec<usize> =
        kept.iter().map(|&i| i - dropped.iter().filter(|&&d| d < i).count()).collect();

    let n = q.len();
    let mut r = vec![0.0; n * n];
    for (j, col) in rcols.iter().enumerate() {
        for (i, &c) in col.iter().enumerate() {
            r[i * n + j] = c;
        }
    }
    QrFactors { q, r, kept }
}

/// Least-squares coefficients `alpha = argmin || V alpha + residual ||` over
/// the filtered, weighted system. Returns `alpha` in QR column order.
pub fn least_squares(qr: &QrFactors, residual: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    let n = qr.rank();
    let rw = scaled(residual, weights);
    let mut alpha: Vec<f64> = qr.q.iter().map(|qj| -dot(qj, &rw)).collect();
    for i in (0..n).rev() {
        let mut s = alpha[i];
        for j in i + 1..n {
            s -= qr.r[i * n + j] * alpha[j];
        }
        alpha[i] = s / qr.r[i * n + i];
    }
    alpha
}

/// Quasi-Newton correction `W alpha` for the current viewed residual.
///
/// The history is filtered in place. Fails with [`Error::EmptyHistory`] when
/// no columns exist and [`Error::RankDeficient`] when filtering removed them
/// all; callers fall back to relaxation in both cases.
pub fn qn_solve(hist: &mut SecantHistory, residual: &[f64], cfg: &AccelConfig) -> Result<Vec<f64>> {
    if hist.columns() == 0 {
        return Err(Error::EmptyHistory);
    }
    if hist.v[0].len() != residual.len() {
        return Err(Error::LengthMismatch { expected: hist.v[0].len(), found: residual.len() });
    }
    let weights = match cfg.weighting {
        Weighting::ResidualSum => hist.row_weights(residual.len()),
        Weighting::None => None,
    };
    let qr = qr2_filter(hist, cfg.qr2_epsilon, weights.as_deref());
    if qr.rank() == 0 {
        return Err(Error::RankDeficient);
    }
    let alpha = least_squares(&qr, residual, weights.as_deref());
    let mut dx = vec![0.0; hist.w[0].len()];
    for (a, &col) in alpha.iter().zip(&qr.kept) {
        axpy(*a, &hist.w[col], &mut dx);
    }
    Ok(dx)
}

/// Stateful acceleration of one coupled run; reset at every window.
#[derive(Debug, Clone)]
pub struct Accelerator {
    cfg: AccelConfig,
    hist: SecantHistory,
    block: usize,
}

impl Accelerator {
    pub fn new(cfg: AccelConfig, block: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, hist: SecantHistory::new(block), block })
    }

    pub fn config(&self) -> &AccelConfig {
        &self.cfg
    }

    pub fn history(&self) -> &SecantHistory {
        &self.hist
    }

    pub fn start_window(&mut self) {
        self.hist.clear();
    }

    /// Next iterate from the current iterate `x` and `x_tilde = H(x)`.
    pub fn next_iterate(&mut self, x: &[f64], x_tilde: &[f64]) -> Result<Vec<f64>> {
        match self.cfg.scheme {
            AccelScheme::FullFixedPoint => relax(x, x_tilde, 1.0),
            AccelScheme::Relaxation => relax(x, x_tilde, self.cfg.omega),
            AccelScheme::QuasiNewton => {
                let r = view_residual(x_tilde, x, self.block, self.cfg.residual_view)?;
                if self.cfg.weighting == Weighting::ResidualSum {
                    self.hist.accumulate(&r)?;
                }
                self.hist.append(x_tilde, &r)?;
                match qn_solve(&mut self.hist, &r, &self.cfg) {
                    Ok(dx) => Ok(x_tilde.iter().zip(&dx).map(|(a, b)| a + b).collect()),
                    Err(Error::EmptyHistory | Error::RankDeficient) => {
                        relax(x, x_tilde, self.cfg.omega)
                    }
                    Err(e) => Err(e),
                }
            }
        }
    }
}
