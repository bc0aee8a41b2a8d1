use alloc::vec;
use alloc::vec::Vec;

use super::ManufacturedSolution;
use crate::linalg::BandedLu;
use crate::waveform::Waveform;
use crate::{Error, Result};

/// Node-to-node integrals of the quadratic through the nodes `{0, 1/2, 1}`,
/// in units of the step: row 0 integrates over `[0, 1/2]`, row 1 over `[1/2, 1]`.
const SDC_WEIGHTS: [[f64; 3]; 2] = [
    [5.0 / 24.0, 8.0 / 24.0, -1.0 / 24.0],
    [-1.0 / 24.0, 8.0 / 24.0, 5.0 / 24.0],
];

/// Which part of the domain a solver covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `[0, 1] x [0, 1]`, interface temperature prescribed at `x = 1`.
    Dirichlet,
    /// `[1, 2] x [0, 1]`, interface flux `du/dx` prescribed at `x = 1`.
    Neumann,
    /// `[0, 2] x [0, 1]` without partitioning. Reference solver.
    Monolithic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    ImplicitEuler,
    Trapezoidal,
    /// Spectral deferred correction on the Gauss-Lobatto nodes
    /// `{0, 1/2, 1}` with implicit Euler sweeps.
    Sdc { sweeps: usize },
}

/// Nodal temperatures on one subdomain at time `t`.
///
/// The grid is stored row by row (`j * nx + i`, `x` fastest) and includes
/// every boundary node, filled with the boundary data of the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    pub t: f64,
    pub u: Vec<f64>,
}

/// Finite difference discretization of one subdomain, with cached
/// factorizations of `I - c A` for every coefficient `c` used so far.
#[derive(Debug, Clone)]
pub struct HeatSolver {
    side: Side,
    msol: ManufacturedSolution,
    h: f64,
    x0: f64,
    nx: usize,
    ny: usize,
    /// Unknown columns `i_lo..=i_hi`, rows `1..ny-1`.
    i_lo: usize,
    i_hi: usize,
    factors: Vec<(u64, BandedLu)>,
}

impl HeatSolver {
    /// `cells` grid intervals per unit length (`h = 1 / cells`).
    pub fn new(side: Side, msol: ManufacturedSolution, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidConfig("grid needs at least 2 cells per unit length".into()));
        }
        let h = 1.0 / cells as f64;
        let (x0, nx, i_lo, i_hi) = match side {
            Side::Dirichlet => (0.0, cells + 1, 1, cells - 1),
            Side::Neumann => (1.0, cells + 1, 0, cells - 1),
            Side::Monolithic => (0.0, 2 * cells + 1, 1, 2 * cells - 1),
        };
        Ok(Self { side, msol, h, x0, nx, ny: cells + 1, i_lo, i_hi, factors: Vec::new() })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn manufactured(&self) -> ManufacturedSolution {
        self.msol
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// `(nx, ny)` node counts.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Interface nodes on `x = 1`, ordered by increasing `y`.
    pub fn interface_size(&self) -> usize {
        self.ny
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    fn ncols(&self) -> usize {
        self.i_hi - self.i_lo + 1
    }

    fn unknowns(&self) -> usize {
        self.ncols() * (self.ny - 2)
    }

    /// Exact solution sampled on every node.
    pub fn exact_state(&self, t: f64) -> HeatState {
        let mut u = vec![0.0; self.nx * self.ny];
        for j in 0..self.ny {
            for i in 0..self.nx {
                u[j * self.nx + i] = self.msol.u_exact(self.x(i), self.y(j), t);
            }
        }
        HeatState { t, u }
    }

    fn gather(&self, full: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.unknowns());
        for j in 1..self.ny - 1 {
            out.extend_from_slice(&full[j * self.nx + self.i_lo..=j * self.nx + self.i_hi]);
        }
        out
    }

    fn scatter(&self, unknowns: &[f64], full: &mut [f64]) {
        let nc = self.ncols();
        for (r, j) in (1..self.ny - 1).enumerate() {
            full[j * self.nx + self.i_lo..=j * self.nx + self.i_hi]
                .copy_from_slice(&unknowns[r * nc..(r + 1) * nc]);
        }
    }

    /// Write the boundary data at time `tau` into `full`. `iface` is the
    /// interface temperature (Dirichlet side); other sides ignore it.
    fn set_known(&self, full: &mut [f64], tau: f64, iface: Option<&[f64]>) {
        let (nx, ny) = (self.nx, self.ny);
        let ms = self.msol;
        for i in 0..nx {
            full[i] = ms.u_exact(self.x(i), 0.0, tau);
            full[(ny - 1) * nx + i] = ms.u_exact(self.x(i), self.y(ny - 1), tau);
        }
        for j in 1..ny - 1 {
            let y = self.y(j);
            if self.side != Side::Neumann {
                full[j * nx] = ms.u_exact(self.x(0), y, tau);
            }
            full[j * nx + nx - 1] = match (self.side, iface) {
                (Side::Dirichlet, Some(c)) => c[j],
                _ => ms.u_exact(self.x(nx - 1), y, tau),
            };
        }
    }

    /// 5-point Laplacian at the unknown nodes of a fully populated grid.
    /// On the Neumann side the ghost value left of `x = 1` is eliminated
    /// through the central difference `(u_1 - u_ghost) / 2h = flux`.
    fn laplacian(&self, full: &[f64], flux: Option<&[f64]>, out: &mut [f64]) {
        let nx = self.nx;
        let inv_h2 = 1.0 / (self.h * self.h);
        let nc = self.ncols();
        for (r, j) in (1..self.ny - 1).enumerate() {
            for i in self.i_lo..=self.i_hi {
                let k = j * nx + i;
                let c = full[k];
                let east = full[k + 1];
                let west = if i == 0 {
                    let q = flux.map_or(0.0, |q| q[j]);
                    east - 2.0 * self.h * q
                } else {
                    full[k - 1]
                };
                out[r * nc + i - self.i_lo] =
                    (east + west + full[k + nx] + full[k - nx] - 4.0 * c) * inv_h2;
            }
        }
    }

    fn interface_at(&self, boundary: Option<&Waveform>, tau: f64) -> Result<Option<Vec<f64>>> {
        match (self.side, boundary) {
            (Side::Monolithic, _) => Ok(None),
            (_, Some(w)) => {
                if w.dofs() != self.ny {
                    return Err(Error::LengthMismatch { expected: self.ny, found: w.dofs() });
                }
                w.eval(tau).map(Some)
            }
            (_, None) => Err(Error::WrongSide),
        }
    }

    /// `b(tau) = F(0, tau)`: boundary contributions plus source.
    fn affine_part(&self, tau: f64, iface: Option<&[f64]>) -> Vec<f64> {
        let mut full = vec![0.0; self.nx * self.ny];
        self.set_known(&mut full, tau, iface);
        let mut out = vec![0.0; self.unknowns()];
        let flux = if self.side == Side::Neumann { iface } else { None };
        self.laplacian(&full, flux, &mut out);
        let nc = self.ncols();
        for (r, j) in (1..self.ny - 1).enumerate() {
            let y = self.y(j);
            for i in self.i_lo..=self.i_hi {
                out[r * nc + i - self.i_lo] += self.msol.source(self.x(i), y, tau);
            }
        }
        out
    }

    /// Linear part `A u` with homogeneous boundary data.
    fn apply_linear(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.nx * self.ny];
        self.scatter(u, &mut full);
        let mut out = vec![0.0; self.unknowns()];
        self.laplacian(&full, None, &mut out);
        out
    }

    fn factor(&mut self, c: f64) -> Result<&BandedLu> {
        let key = c.to_bits();
        if let Some(pos) = self.factors.iter().position(|(k, _)| *k == key) {
            return Ok(&self.factors[pos].1);
        }
        let nc = self.ncols();
        let n = self.unknowns();
        let s = c / (self.h * self.h);
        let mut m = BandedLu::zeros(n, nc);
        for (r, _j) in (1..self.ny - 1).enumerate() {
            for i in self.i_lo..=self.i_hi {
                let row = r * nc + i - self.i_lo;
                m.add(row, row, 1.0 + 4.0 * s);
                if i < self.i_hi {
                    // the Neumann interface row also picks up the ghost value
                    let w = if i == 0 { 2.0 } else { 1.0 };
                    m.add(row, row + 1, -w * s);
                }
                if i > self.i_lo {
                    m.add(row, row - 1, -s);
                }
                if r > 0 {
                    m.add(row, row - nc, -s);
                }
                if r + 1 < self.ny - 2 {
                    m.add(row, row + nc, -s);
                }
            }
        }
        self.factors.push((key, m.factor()?));
        Ok(&self.factors[self.factors.len() - 1].1)
    }

    fn solve(&mut self, c: f64, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
        self.factor(c)?.solve_in_place(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolveFailure);
        }
        Ok(rhs)
    }

    fn finish(&self, state: &mut HeatState, unknowns: &[f64], t_new: f64, iface: Option<&[f64]>) {
        self.scatter(unknowns, &mut state.u);
        self.set_known(&mut state.u, t_new, iface);
        state.t = t_new;
    }

    /// Implicit Euler: `(I - dt A) u+ = u + dt b(t + dt)`.
    pub fn step_ie(
        &mut self,
        state: &mut HeatState,
        dt: f64,
        t_new: f64,
        boundary: Option<&Waveform>,
    ) -> Result<()> {
        let iface = self.interface_at(boundary, t_new)?;
        let b = self.affine_part(t_new, iface.as_deref());
        let mut rhs = self.gather(&state.u);
        for (r, bi) in rhs.iter_mut().zip(&b) {
            *r += dt * bi;
        }
        let u = self.solve(dt, rhs)?;
        self.finish(state, &u, t_new, iface.as_deref());
        Ok(())
    }

    /// Trapezoidal rule with boundary data at both time levels.
    pub fn step_tr(
        &mut self,
        state: &mut HeatState,
        dt: f64,
        t_new: f64,
        boundary: Option<&Waveform>,
    ) -> Result<()> {
        let t_old = t_new - dt;
        let iface_old = self.interface_at(boundary, t_old)?;
        let iface_new = self.interface_at(boundary, t_new)?;
        let u_old = self.gather(&state.u);
        let f_old = self.eval_rhs(&u_old, t_old, iface_old.as_deref());
        let b_new = self.affine_part(t_new, iface_new.as_deref());
        let half = 0.5 * dt;
        let rhs: Vec<f64> = u_old
            .iter()
            .zip(f_old.iter().zip(&b_new))
            .map(|(u, (f, b))| u + half * f + half * b)
            .collect();
        let u = self.solve(half, rhs)?;
        self.finish(state, &u, t_new, iface_new.as_deref());
        Ok(())
    }

    /// SDC with `sweeps` implicit Euler correction sweeps over the nodes
    /// `t, t + dt/2, t + dt`. Zero sweeps gives two implicit Euler substeps.
    pub fn step_sdc(
        &mut self,
        state: &mut HeatState,
        dt: f64,
        t_new: f64,
        sweeps: usize,
        boundary: Option<&Waveform>,
    ) -> Result<()> {
        let t0 = t_new - dt;
        let half = 0.5 * dt;
        let taus = [t0, t0 + half, t_new];
        let mut ifaces = Vec::with_capacity(3);
        for &tau in &taus {
            ifaces.push(self.interface_at(boundary, tau)?);
        }
        let b: Vec<Vec<f64>> =
            taus.iter().zip(&ifaces).map(|(&tau, i)| self.affine_part(tau, i.as_deref())).collect();

        let u0 = self.gather(&state.u);
        let ie = |solver: &mut Self, prev: &[f64], bm: &[f64]| {
            let rhs = prev.iter().zip(bm).map(|(u, b)| u + half * b).collect();
            solver.solve(half, rhs)
        };
        let mut u1 = ie(self, &u0, &b[1])?;
        let mut u2 = ie(self, &u1, &b[2])?;

        let [q0, q1] = SDC_WEIGHTS;
        for _ in 0..sweeps {
            let au0 = self.apply_linear(&u0);
            let au1 = self.apply_linear(&u1);
            let au2 = self.apply_linear(&u2);
            let f0: Vec<f64> = au0.iter().zip(&b[0]).map(|(a, b)| a + b).collect();
            let f1: Vec<f64> = au1.iter().zip(&b[1]).map(|(a, b)| a + b).collect();
            let f2: Vec<f64> = au2.iter().zip(&b[2]).map(|(a, b)| a + b).collect();

            // (I - h A) u1' = u0 - h A u1 + S01
            let rhs: Vec<f64> = (0..u0.len())
                .map(|k| {
                    u0[k] - half * au1[k] + dt * (q0[0] * f0[k] + q0[1] * f1[k] + q0[2] * f2[k])
                })
                .collect();
            let new1 = self.solve(half, rhs)?;
            // (I - h A) u2' = u1' - h A u2 + S12
            let rhs: Vec<f64> = (0..u0.len())
                .map(|k| {
                    new1[k] - half * au2[k] + dt * (q1[0] * f0[k] + q1[1] * f1[k] + q1[2] * f2[k])
                })
                .collect();
            u2 = self.solve(half, rhs)?;
            u1 = new1;
        }
        self.finish(state, &u2, t_new, ifaces[2].as_deref());
        Ok(())
    }

    pub fn step(
        &mut self,
        integrator: Integrator,
        state: &mut HeatState,
        dt: f64,
        t_new: f64,
        boundary: Option<&Waveform>,
    ) -> Result<()> {
        match integrator {
            Integrator::ImplicitEuler => self.step_ie(state, dt, t_new, boundary),
            Integrator::Trapezoidal => self.step_tr(state, dt, t_new, boundary),
            Integrator::Sdc { sweeps } => self.step_sdc(state, dt, t_new, sweeps, boundary),
        }
    }

    /// `F(u, tau) = A u + b(tau)` at the unknown nodes.
    fn eval_rhs(&self, u: &[f64], tau: f64, iface: Option<&[f64]>) -> Vec<f64> {
        let au = self.apply_linear(u);
        let b = self.affine_part(tau, iface);
        au.iter().zip(&b).map(|(a, b)| a + b).collect()
    }

    /// Nodal temperature on `x = 1`, by increasing `y`.
    pub fn interface_temperature(&self, state: &HeatState) -> Result<Vec<f64>> {
        let col = match self.side {
            Side::Neumann => 0,
            Side::Dirichlet => self.nx - 1,
            Side::Monolithic => return Err(Error::WrongSide),
        };
        Ok((0..self.ny).map(|j| state.u[j * self.nx + col]).collect())
    }

    /// `du/dx` on `x = 1` from the one-sided second-order stencil
    /// `(3 u_N - 4 u_{N-1} + u_{N-2}) / 2h`.
    pub fn interface_flux(&self, state: &HeatState) -> Result<Vec<f64>> {
        if self.side != Side::Dirichlet {
            return Err(Error::WrongSide);
        }
        let nx = self.nx;
        Ok((0..self.ny)
            .map(|j| {
                let k = j * nx + nx - 1;
                (3.0 * state.u[k] - 4.0 * state.u[k - 1] + state.u[k - 2]) / (2.0 * self.h)
            })
            .collect())
    }

    /// Discrete L2 error against the exact solution at `state.t`, using
    /// trapezoidal node weights.
    pub fn l2_error(&self, state: &HeatState) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.ny {
            let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
            for i in 0..self.nx {
                let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
                let e = state.u[j * self.nx + i] - self.msol.u_exact(self.x(i), self.y(j), state.t);
                sum += wx * wy * e * e;
            }
        }
        libm::sqrt(sum * self.h * self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{SampleSet, TimeWindow};

    const CELLS: usize = 20;

    fn exact_interface(solver: &HeatSolver, window: TimeWindow, n: usize) -> Waveform {
        // Waveform through exact interface data at n + 1 points, degree n (<= 3).
        let ms = solver.manufactured();
        let times = window.substep_times(n);
        let rows = times
            .iter()
            .map(|&t| {
                (0..solver.interface_size())
                    .map(|j| match solver.side() {
                        Side::Dirichlet => ms.u_exact(1.0, solver.y(j), t),
                        _ => ms.flux_x(1.0, t),
                    })
                    .collect()
            })
            .collect();
        Waveform::interpolate(&SampleSet::new(window, times, rows).unwrap(), n).unwrap()
    }

    #[test]
    fn discrete_laplacian_is_exact_for_quadratics() {
        for side in [Side::Dirichlet, Side::Neumann, Side::Monolithic] {
            let ms = ManufacturedSolution::Trigonometric;
            let s = HeatSolver::new(side, ms, CELLS).unwrap();
            let t = 0.7;
            let st = s.exact_state(t);
            let flux: Vec<f64> = (0..s.ny).map(|_| ms.flux_x(1.0, t)).collect();
            let mut out = vec![0.0; s.unknowns()];
            s.laplacian(&st.u, Some(&flux), &mut out);
            // Laplace(u_exact) = 2 g(t) + 6
            let want = 2.0 * ms.g(t) + 6.0;
            for v in out {
                assert!((v - want).abs() < 1e-12 * want.abs().max(1.0) * 100.0, "{side:?}: {v}");
            }
        }
    }

    #[test]
    fn linear_part_is_consistent_with_affine_split() {
        let s = HeatSolver::new(Side::Neumann, ManufacturedSolution::Polynomial(2), 6).unwrap();
        let u: Vec<f64> = (0..s.unknowns()).map(|k| (k as f64 * 0.37).sin()).collect();
        let iface = vec![0.3; s.ny];
        let f = s.eval_rhs(&u, 0.4, Some(&iface));
        let b = s.affine_part(0.4, Some(&iface));
        let au = s.apply_linear(&u);
        for k in 0..u.len() {
            assert!((f[k] - b[k] - au[k]).abs() < 1e-10);
        }
        // the factored operator is I - c A
        let c = 0.05;
        let mut s2 = s.clone();
        let x = s2.solve(c, u.clone()).unwrap();
        let ax = s2.apply_linear(&x);
        for k in 0..u.len() {
            assert!((x[k] - c * ax[k] - u[k]).abs() < 1e-12);
        }
        assert!(s.apply_linear(&vec![0.0; s.unknowns()]).iter().all(|&v| v == 0.0));
    }

    fn exact_propagation(integrator: Integrator, alpha: u32, degree: usize) -> f64 {
        let ms = ManufacturedSolution::Polynomial(alpha);
        let mut worst: f64 = 0.0;
        for side in [Side::Dirichlet, Side::Neumann, Side::Monolithic] {
            let mut s = HeatSolver::new(side, ms, CELLS).unwrap();
            let dt = 0.25;
            let mut st = s.exact_state(0.0);
            let mut window = TimeWindow::new(0.0, dt).unwrap();
            for _ in 0..4 {
                let wf = exact_interface(&s, window, degree);
                s.step(integrator, &mut st, dt, window.end(), Some(&wf)).unwrap();
                worst = worst.max(s.l2_error(&st));
                window = window.next();
            }
        }
        worst
    }

    #[test]
    fn implicit_euler_exact_for_linear_in_time() {
        assert!(exact_propagation(Integrator::ImplicitEuler, 1, 1) < 1e-12);
    }

    #[test]
    fn trapezoidal_exact_for_quadratic_in_time() {
        assert!(exact_propagation(Integrator::Trapezoidal, 2, 2) < 1e-12);
        assert!(exact_propagation(Integrator::Trapezoidal, 1, 1) < 1e-12);
    }

    #[test]
    fn sdc_exact_for_cubic_in_time() {
        // Stiff modes contract by about 1/2 per sweep, so collocation
        // accuracy needs more than the default 16 sweeps.
        let e = exact_propagation(Integrator::Sdc { sweeps: 64 }, 3, 3);
        assert!(e < 1e-12, "{e}");
        let partial = exact_propagation(Integrator::Sdc { sweeps: 4 }, 3, 3);
        assert!(partial > 1e-6, "{partial}");
    }

    #[test]
    fn sdc_weights_integrate_quadratics() {
        let nodes = [0.0, 0.5, 1.0];
        let dot = |w: &[f64; 3], f: &dyn Fn(f64) -> f64| -> f64 {
            w.iter().zip(nodes).map(|(w, t)| w * f(t)).sum()
        };
        let sq = |t: f64| t * t;
        assert!((dot(&SDC_WEIGHTS[0], &sq) - 1.0 / 24.0).abs() < 1e-15);
        assert!((dot(&SDC_WEIGHTS[1], &sq) - 7.0 / 24.0).abs() < 1e-15);
        assert!((dot(&SDC_WEIGHTS[0], &|_| 1.0) - 0.5).abs() < 1e-15);
        assert!((dot(&SDC_WEIGHTS[1], &|t| t) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn sdc_without_sweeps_is_two_euler_substeps() {
        let ms = ManufacturedSolution::Trigonometric;
        let mut a = HeatSolver::new(Side::Monolithic, ms, 8).unwrap();
        let mut b = a.clone();
        let mut sa = a.exact_state(0.0);
        let mut sb = sa.clone();
        a.step_sdc(&mut sa, 0.2, 0.2, 0, None).unwrap();
        b.step_ie(&mut sb, 0.1, 0.1, None).unwrap();
        b.step_ie(&mut sb, 0.1, 0.2, None).unwrap();
        for (x, y) in sa.u.iter().zip(&sb.u) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_solution_is_steady_under_trapezoidal_rule() {
        let ms = ManufacturedSolution::Polynomial(0);
        let mut s = HeatSolver::new(Side::Monolithic, ms, 10).unwrap();
        // alpha = 0 still carries the 1.2 t drift, so compare against exact
        let mut st = s.exact_state(0.0);
        s.step_tr(&mut st, 0.5, 0.5, None).unwrap();
        assert!(s.l2_error(&st) < 1e-13);
    }

    #[test]
    fn implicit_euler_is_first_order_for_trig_profile() {
        let ms = ManufacturedSolution::Trigonometric;
        let mut errs = vec![];
        for k in 0..3 {
            let n = 8 << k;
            let dt = 1.0 / n as f64;
            let mut s = HeatSolver::new(Side::Monolithic, ms, CELLS).unwrap();
            let mut st = s.exact_state(0.0);
            for i in 1..=n {
                s.step_ie(&mut st, dt, i as f64 * dt, None).unwrap();
            }
            errs.push(s.l2_error(&st));
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.25, "ratio {ratio}");
        }
    }

    #[test]
    fn interface_extraction_on_exact_state() {
        let ms = ManufacturedSolution::Trigonometric;
        let d = HeatSolver::new(Side::Dirichlet, ms, CELLS).unwrap();
        let n = HeatSolver::new(Side::Neumann, ms, CELLS).unwrap();
        let t = 1.3;
        let flux = d.interface_flux(&d.exact_state(t)).unwrap();
        assert_eq!(flux.len(), CELLS + 1);
        for q in &flux {
            assert!((q - 2.0 * ms.g(t)).abs() < 1e-12);
        }
        let temp = n.interface_temperature(&n.exact_state(t)).unwrap();
        for (j, v) in temp.iter().enumerate() {
            let y = n.y(j);
            assert!((v - (1.0 + ms.g(t) + 3.0 * y * y + 1.2 * t)).abs() < 1e-12);
        }
        assert_eq!(n.interface_temperature(&n.exact_state(0.0)).unwrap()[0], 1.0);
        assert_eq!(n.interface_flux(&n.exact_state(t)).unwrap_err(), Error::WrongSide);
    }

    #[test]
    fn flux_stencil_on_constant_and_linear_fields() {
        let s = HeatSolver::new(Side::Dirichlet, ManufacturedSolution::Trigonometric, CELLS).unwrap();
        let mut st = s.exact_state(0.0);
        for v in st.u.iter_mut() {
            *v = 4.0;
        }
        assert!(s.interface_flux(&st).unwrap().iter().all(|&q| q == 0.0));
        let slope = -1.75;
        for j in 0..s.ny {
            for i in 0..s.nx {
                st.u[j * s.nx + i] = 0.5 + slope * s.x(i);
            }
        }
        for q in s.interface_flux(&st).unwrap() {
            assert!((q - slope).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_error_of_constant_shift() {
        let s = HeatSolver::new(Side::Dirichlet, ManufacturedSolution::Polynomial(1), CELLS).unwrap();
        let mut st = s.exact_state(0.5);
        assert_eq!(s.l2_error(&st), 0.0);
        for v in st.u.iter_mut() {
            *v += 0.25;
        }
        // trapezoidal quadrature of a constant over the unit square is exact
        assert!((s.l2_error(&st) - 0.25).abs() < 1e-14);
    }
}
