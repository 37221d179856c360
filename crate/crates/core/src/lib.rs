//! Quantum-jump trajectories of a superconducting qubit coupled to a
//! resistive heat bath, and the time-domain response of the resistor used as
//! a nanocalorimeter for the emitted and absorbed microwave photons.
//!
//! * [`model`]: bath parameters, golden-rule rates, master-equation solution.
//! * [`trajectory`]: no-jump evolution and the two trajectory samplers.
//! * [`ensemble`]: trajectory averages and their comparison with the master
//!   equation.
//! * [`measurement`]: guardian-photon click statistics and energy moments.
//! * [`calorimeter`]: absorber temperature noise, photon injection and the
//!   thermometer readout.
//! * [`config`], [`runner`], [`commands`]: run configuration, reproducible
//!   parallel ensembles and the CLI subcommands.

pub mod calorimeter;
pub mod commands;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod measurement;
pub mod model;
pub mod output;
pub mod quadrature;
pub mod rng;
pub mod runner;
pub mod trajectory;

pub use error::{Error, ErrorCategory, Result};
pub use num_complex::Complex64;
pub use model::{compute_rates, QubitBathParams, Rates, ZERO_TEMPERATURE};
pub use trajectory::{PureState, Scheme, TrajectoryRecord, TrajectorySimulator};
