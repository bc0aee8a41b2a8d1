//! Partitioned coupling of two time-stepping solvers by waveform iteration.
//!
//! Each coupling window is solved as a fixed-point problem on the Dirichlet
//! interface data. Solvers exchange time-continuous B-spline waveforms built
//! from their substep samples; the iteration is driven by plain fixed-point
//! updates, constant underrelaxation, or interface quasi-Newton (IQN-ILS)
//! acceleration.
//!
//! The crate is `no_std` and only needs `alloc`. IO, sockets, configuration
//! files and the command line live in the `wfcpl` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod accel;
pub mod coupling;
mod error;
pub mod heat;
mod linalg;
pub mod protocol;
pub mod waveform;

pub use accel::{AccelConfig, AccelScheme, Accelerator, ResidualView, SecantHistory, Weighting};
pub use coupling::{
    average_iterations, convergence_measure, CouplingConfig, CouplingScheme, Coupling,
    DivergencePolicy, Participant, WindowReport,
};
pub use error::{Error, Result};
pub use waveform::{SampleSet, TimeWindow, Waveform};
