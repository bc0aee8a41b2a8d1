//! Time-continuous interface data over one coupling window.
//!
//! A [`Waveform`] is an interpolating B-spline built from the samples a solver
//! produced at its substep times, plus the initial value at the window start.
//! Each interface degree of freedom gets its own scalar spline over a shared
//! clamped knot vector.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::DenseLu;
use crate::{Error, Result};

/// Highest supported interpolation degree.
pub const MAX_DEGREE: usize = 3;

/// Relative slack (in units of the window length) for evaluations just outside
/// the window. Such evaluations are clamped to the boundary.
pub const WINDOW_SLACK: f64 = 1e-12;

/// The interval `[t_ini, t_ini + dt]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    t_ini: f64,
    dt: f64,
    end: f64,
}

impl TimeWindow {
    pub fn new(t_ini: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t_ini.is_finite() {
            return Err(Error::InvalidWindow);
        }
        Ok(Self { t_ini, dt, end: t_ini + dt })
    }

    pub fn start(&self) -> f64 {
        self.t_ini
    }

    pub fn len(&self) -> f64 {
        self.dt
    }

    /// Stored at construction, so repeated calls agree bit for bit.
    pub fn end(&self) -> f64 {
        self.end
    }

    /// The window that starts where this one ends.
    pub fn next(&self) -> Self {
        Self { t_ini: self.end, dt: self.dt, end: self.end + self.dt }
    }

    /// `t_ini + i * (dt / n)` for `i = 0..=n`, with the last entry snapped to
    /// [`TimeWindow::end`].
    pub fn substep_times(&self, n: usize) -> Vec<f64> {
        let step = self.dt / n as f64;
        let mut times: Vec<f64> = (0..=n).map(|i| self.t_ini + i as f64 * step).collect();
        times[n] = self.end;
        times
    }

    /// Clamp `t` into the window if it lies within the tolerance band.
    pub fn clamp(&self, t: f64) -> Result<f64> {
        let slack = WINDOW_SLACK * self.dt;
        if t < self.t_ini - slack || t > self.end + slack || t.is_nan() {
            return Err(Error::OutOfWindow { t, start: self.t_ini, end: self.end });
        }
        Ok(t.clamp(self.t_ini, self.end))
    }
}

/// Interface vectors at `n + 1` increasing times spanning a window.
///
/// `values[0]` is the value at the window start; it is fixed data and not an
/// unknown of the coupling fixed-point problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    window: TimeWindow,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn new(window: TimeWindow, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidSamples("need at least two sample times"));
        }
        if times.len() != values.len() {
            return Err(Error::InvalidSamples("times and values differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotoneTimes);
        }
        if times[0] != window.start() || times[times.len() - 1] != window.end() {
            return Err(Error::InvalidSamples("sample times must span the window exactly"));
        }
        let m = values[0].len();
        if m == 0 {
            return Err(Error::InvalidSamples("interface vectors must be non-empty"));
        }
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidSamples("interface vectors differ in length"));
        }
        Ok(Self { window, times, values })
    }

    /// Samples at the uniform substep times of `window`; `values.len() - 1`
    /// is the substep count.
    pub fn uniform(window: TimeWindow, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSamples("need at least two sample times"));
        }
        let times = window.substep_times(values.len() - 1);
        Self::new(window, times, values)
    }

    /// Rebuild a sample set from the start value and the flattened substep
    /// values produced by [`SampleSet::flatten`].
    pub fn unflatten(window: TimeWindow, times: Vec<f64>, c0: Vec<f64>, flat: &[f64]) -> Result<Self> {
        let m = c0.len();
        if m == 0 || flat.len() % m != 0 {
            return Err(Error::LayoutMismatch { len: flat.len(), block: m });
        }
        let mut values = Vec::with_capacity(flat.len() / m + 1);
        values.push(c0);
        values.extend(flat.chunks(m).map(<[f64]>::to_vec));
        Self::new(window, times, values)
    }

    pub fn window(&self) -> &TimeWindow {
        &self.window
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Number of substeps `n` (one less than the number of samples).
    pub fn substeps(&self) -> usize {
        self.times.len() - 1
    }

    /// Interface degrees of freedom `m`.
    pub fn dofs(&self) -> usize {
        self.values[0].len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }

    /// Substep values `1..=n` concatenated in substep order (length `m * n`).
    pub fn flatten(&self) -> Vec<f64> {
        self.values[1..].concat()
    }
}

/// Piecewise-polynomial interface data over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    window: TimeWindow,
    degree: usize,
    knots: Vec<f64>,
    /// `coeffs[dof][basis]`
    coeffs: Vec<Vec<f64>>,
    /// The data the waveform was built from: one row for a constant waveform,
    /// `n + 1` rows otherwise.
    nodes: Vec<Vec<f64>>,
}

impl Waveform {
    /// Interpolating B-spline of degree `p` through every sample.
    pub fn interpolate(samples: &SampleSet, p: usize) -> Result<Self> {
        let n = samples.substeps();
        if p == 0 || p > MAX_DEGREE || p > n {
            return Err(Error::DegreeTooHigh { degree: p, substeps: n });
        }
        let times = samples.times();
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotoneTimes);
        }
        let knots = clamped_knots(times, p);
        let ncoef = n + 1;

        let mut colloc = vec![0.0; ncoef * ncoef];
        for (i, &t) in times.iter().enumerate() {
            let span = find_span(&knots, ncoef, p, t);
            let basis = basis_functions(&knots, span, p, t);
            for (r, b) in basis.iter().take(p + 1).enumerate() {
                colloc[i * ncoef + span - p + r] = *b;
            }
        }
        let lu = DenseLu::factor(ncoef, colloc)?;

        let m = samples.dofs();
        let coeffs = (0..m)
            .map(|d| {
                let rhs: Vec<f64> = samples.values().iter().map(|v| v[d]).collect();
                lu.solve(&rhs)
            })
            .collect();
        Ok(Self {
            window: *samples.window(),
            degree: p,
            knots,
            coeffs,
            nodes: samples.values().to_vec(),
        })
    }

    /// The waveform that equals `c0` everywhere in `window`.
    pub fn constant(c0: Vec<f64>, window: TimeWindow) -> Self {
        Self {
            window,
            degree: 0,
            knots: vec![window.start(), window.end()],
            coeffs: c0.iter().map(|&c| vec![c]).collect(),
            nodes: vec![c0],
        }
    }

    pub fn window(&self) -> &TimeWindow {
        &self.window
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn dofs(&self) -> usize {
        self.coeffs.len()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dofs()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.dofs() {
            return Err(Error::LengthMismatch { expected: self.dofs(), found: out.len() });
        }
        let t = self.window.clamp(t)?;
        if self.degree == 0 {
            for (o, c) in out.iter_mut().zip(&self.coeffs) {
                *o = c[0];
            }
            return Ok(());
        }
        let p = self.degree;
        let ncoef = self.coeffs[0].len();
        let span = find_span(&self.knots, ncoef, p, t);
        let basis = basis_functions(&self.knots, span, p, t);
        for (o, c) in out.iter_mut().zip(&self.coeffs) {
            *o = (0..=p).map(|r| basis[r] * c[span - p + r]).sum();
        }
        Ok(())
    }
}

/// Clamped knot vector with `n' + p + 1` entries for `n' = times.len()` data
/// sites. Interior knots are averages of `p` consecutive interior sites, which
/// places them exactly at the interior sample times for `p = 1`.
fn clamped_knots(times: &[f64], p: usize) -> Vec<f64> {
    let n = times.len() - 1;
    let mut knots = Vec::with_capacity(n + p + 2);
    knots.extend(core::iter::repeat(times[0]).take(p + 1));
    for j in 1..=n - p {
        let s: f64 = times[j..j + p].iter().sum();
        knots.push(s / p as f64);
    }
    knots.extend(core::iter::repeat(times[n]).take(p + 1));
    knots
}

fn find_span(knots: &[f64], ncoef: usize, p: usize, t: f64) -> usize {
    if t >= knots[ncoef] {
        return ncoef - 1;
    }
    let mut lo = p;
    let mut hi = ncoef;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if t < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Nonzero basis functions `N_{span-p..=span, p}(t)`.
fn basis_functions(knots: &[f64], span: usize, p: usize, t: f64) -> [f64; MAX_DEGREE + 1] {
    let mut n = [0.0; MAX_DEGREE + 1];
    let mut left = [0.0; MAX_DEGREE + 1];
    let mut right = [0.0; MAX_DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}
