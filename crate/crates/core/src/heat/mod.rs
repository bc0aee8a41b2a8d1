//! Partitioned 2D heat equation with a manufactured solution.
//!
//! `du/dt = Laplace(u) + f` on `[0, 2] x [0, 1]`, split at `x = 1` into a
//! Dirichlet subdomain `[0, 1] x [0, 1]` (receives the interface temperature,
//! returns the interface flux) and a Neumann subdomain `[1, 2] x [0, 1]`
//! (receives the flux, returns the temperature). The exact solution
//!
//! ```text
//! u(x, y, t) = 1 + g(t) x^2 + 3 y^2 + 1.2 t
//! ```
//!
//! is quadratic in space, so the 5-point finite difference stencil carries no
//! spatial error and every measured error comes from time integration and
//! coupling.

mod grid;
mod participant;

pub use grid::{HeatSolver, HeatState, Integrator, Side};
pub use participant::HeatParticipant;

/// Time profile `g` of the manufactured solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedSolution {
    /// `g(t) = (1 + t)^alpha`
    Polynomial(u32),
    /// `g(t) = sin t`
    Trigonometric,
}

impl ManufacturedSolution {
    pub fn g(&self, t: f64) -> f64 {
        match *self {
            Self::Polynomial(alpha) => libm::pow(1.0 + t, alpha as f64),
            Self::Trigonometric => libm::sin(t),
        }
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        match *self {
            Self::Polynomial(0) => 0.0,
            Self::Polynomial(alpha) => alpha as f64 * libm::pow(1.0 + t, (alpha - 1) as f64),
            Self::Trigonometric => libm::cos(t),
        }
    }

    pub fn u_exact(&self, x: f64, y: f64, t: f64) -> f64 {
        1.0 + self.g(t) * x * x + 3.0 * y * y + 1.2 * t
    }

    /// Source term `f = du/dt - Laplace(u)` for [`Self::u_exact`].
    pub fn source(&self, x: f64, _y: f64, t: f64) -> f64 {
        self.g_prime(t) * x * x + 1.2 - 2.0 * self.g(t) - 6.0
    }

    /// `du/dx` of the exact solution.
    pub fn flux_x(&self, x: f64, t: f64) -> f64 {
        2.0 * self.g(t) * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solution_values() {
        let tri = ManufacturedSolution::Trigonometric;
        let lin = ManufacturedSolution::Polynomial(1);
        assert_eq!(lin.u_exact(0.0, 0.0, 0.0), 1.0);
        assert_eq!(tri.u_exact(0.0, 0.0, 0.0), 1.0);
        assert_eq!(tri.u_exact(1.0, 1.0, 0.0), 4.0);
        // 1 + 2 * 4 + 0 + 1.2, evaluated by hand
        assert!((lin.u_exact(2.0, 0.0, 1.0) - 10.2).abs() < 1e-14);
    }

    #[test]
    fn source_values() {
        let lin = ManufacturedSolution::Polynomial(1);
        assert!((lin.source(0.0, 0.0, 0.0) + 6.8).abs() < 1e-14);
        let tri = ManufacturedSolution::Trigonometric;
        assert!((tri.source(1.0, 0.3, 0.0) + 3.8).abs() < 1e-14);
    }

    #[test]
    fn source_matches_finite_difference_residual() {
        // Oracle: central differences of u_exact in t, x and y.
        let d = 1e-4;
        let cases = [
            ManufacturedSolution::Polynomial(1),
            ManufacturedSolution::Polynomial(2),
            ManufacturedSolution::Polynomial(3),
            ManufacturedSolution::Trigonometric,
        ];
        let points = [(0.3, 0.7, 0.1), (1.7, 0.2, 0.4), (1.0, 0.5, 0.9), (0.05, 0.95, 7.3)];
        for ms in cases {
            for &(x, y, t) in &points {
                let u = |x: f64, y: f64, t: f64| ms.u_exact(x, y, t);
                let ut = (u(x, y, t + d) - u(x, y, t - d)) / (2.0 * d);
                let uxx = (u(x + d, y, t) - 2.0 * u(x, y, t) + u(x - d, y, t)) / (d * d);
                let uyy = (u(x, y + d, t) - 2.0 * u(x, y, t) + u(x, y - d, t)) / (d * d);
                let r = ut - uxx - uyy - ms.source(x, y, t);
                assert!(r.abs() < 1e-6, "{ms:?} at {x},{y},{t}: {r}");
            }
        }
    }
}
