//! Planar tethered UAV with a taut cable.
//!
//! The crate is organised bottom-up:
//!
//! - [`plant`]: taut-cable equations of motion and the cable tension functional.
//! - [`equilibria`]: the set of attainable hover configurations, equilibrium
//!   tensions/inputs and piecewise-linear paths between references.
//! - [`control`]: nested-saturation winch law, thrust-vectoring outer loop,
//!   PD attitude inner loop and the composed closed-loop vector field.
//! - [`analysis`]: radial envelope, ISS restrictions, asymptotic gains and the
//!   small-gain certificate.
//! - [`governor`]: invariant-ball radii, the backtracking waypoint chain and the
//!   switching supervisor.
//! - [`sim`]: fixed-step RK4 integration with constraint monitoring.
//! - [`config`] and [`io`]: flat `key = value` scenario files and CSV output.
//! - [`batch`]: data-parallel map used by sweeps and estimators, with a
//!   sequential fallback when the `parallel` feature is off.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod batch;
pub mod config;
pub mod control;
pub mod equilibria;
pub mod governor;
pub mod io;
pub mod plant;
pub mod sim;

mod error;

pub use error::{Error, Result};

pub use analysis::{GainCertificate, GammaOutSource, RadialEnvelope};
pub use config::ScenarioBundle;
pub use control::{ControlDiagnostics, GainConfig};
pub use equilibria::{EquilibriumData, PathSpec, Setpoint};
pub use governor::{GovernorState, Waypoint, WaypointPlan};
pub use plant::{ControlInputs, FullState, PlantParams, StateDerivative};
pub use sim::{ScenarioMode, SimConfig, TrajectoryLog};
