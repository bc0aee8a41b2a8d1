use alloc::vec::Vec;

use super::{HeatSolver, HeatState, Integrator, ManufacturedSolution, Side};
use crate::coupling::Participant;
use crate::waveform::{SampleSet, TimeWindow, Waveform};
use crate::{Error, Result};

/// One heat subdomain wrapped as a coupling participant.
///
/// The Dirichlet side returns the interface flux, the Neumann side the
/// interface temperature.
#[derive(Debug, Clone)]
pub struct HeatParticipant {
    solver: HeatSolver,
    integrator: Integrator,
    substeps: usize,
    state: HeatState,
    saved: Option<HeatState>,
}

impl HeatParticipant {
    /// Starts from the exact solution at `t = 0`.
    pub fn new(
        side: Side,
        msol: ManufacturedSolution,
        cells: usize,
        integrator: Integrator,
        substeps: usize,
    ) -> Result<Self> {
        if side == Side::Monolithic {
            return Err(Error::WrongSide);
        }
        if substeps == 0 {
            return Err(Error::InvalidConfig("a participant needs at least one substep".into()));
        }
        let solver = HeatSolver::new(side, msol, cells)?;
        let state = solver.exact_state(0.0);
        Ok(Self { solver, integrator, substeps, state, saved: None })
    }

    pub fn solver(&self) -> &HeatSolver {
        &self.solver
    }

    pub fn state(&self) -> &HeatState {
        &self.state
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    pub fn l2_error(&self) -> f64 {
        self.solver.l2_error(&self.state)
    }

    fn output(&self) -> Result<Vec<f64>> {
        match self.solver.side() {
            Side::Dirichlet => self.solver.interface_flux(&self.state),
            _ => self.solver.interface_temperature(&self.state),
        }
    }
}

impl Participant for HeatParticipant {
    fn interface_size(&self) -> usize {
        self.solver.interface_size()
    }

    fn substeps(&self) -> usize {
        self.substeps
    }

    fn initial_output(&mut self) -> Result<Vec<f64>> {
        self.output()
    }

    fn checkpoint(&mut self) -> Result<()> {
        self.saved = Some(self.state.clone());
        Ok(())
    }

    fn restore(&mut self) -> Result<()> {
        match &self.saved {
            Some(s) => {
                self.state.clone_from(s);
                Ok(())
            }
            None => Err(Error::Participant("restore without checkpoint".into())),
        }
    }

    fn solve_window(&mut self, window: &TimeWindow, boundary: &Waveform) -> Result<SampleSet> {
        let times = window.substep_times(self.substeps);
        let dt = window.len() / self.substeps as f64;
        let mut rows = Vec::with_capacity(self.substeps + 1);
        rows.push(self.output()?);
        for &t in &times[1..] {
            self.solver.step(self.integrator, &mut self.state, dt, t, Some(boundary))?;
            rows.push(self.output()?);
        }
        SampleSet::new(*window, times, rows)
    }
}
