//! Mass-adaptive admittance control for a task-space end-effector.
//!
//! The crate holds the whole closed loop as plain computation:
//!
//! * [`geometry`]: vectors and axis-angle frame transforms
//! * [`signal`]: bias compensation, moving-average filtering and seeded sensor noise
//! * [`controller`]: the virtual mass-spring-damper law and its integrators
//! * [`estimator`]: online payload mass estimation with validity gating
//! * [`plant`]: a velocity-tracking end-effector with table contact and synthetic sensors
//! * [`stability`]: closed-loop characteristic polynomials, root finding and Routh-Hurwitz
//! * [`mission`]: waypoint sequencing with grasp/release events
//! * [`harness`]: scenario assembly, canonical experiments and metrics
//!
//! Nothing here performs IO. The crate is `no_std` and needs only `alloc`;
//! file formats and the command line live in the `admittance-sim` crate.
#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod controller;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
mod math;
pub mod mission;
pub mod plant;
pub mod signal;
pub mod stability;

pub use controller::{AdmittanceParams, AdmittanceState, ExcitationForce};
pub use error::{ConfigError, ParamError};
pub use estimator::{EstimatorConfig, MassEstimate, MassEstimator};
pub use geometry::{AxisAngle, Vec3};
pub use harness::{RunReport, Scenario, TraceRecord};
pub use mission::{MissionState, MissionStatus, Waypoint, WaypointEvent};
pub use plant::{InnerLoopModel, PlantState, TableContact};
pub use signal::{BiasModel, MovingAverage, NoiseModel};
pub use stability::{RationalTransfer, StabilityVerdict};

/// Standard gravity magnitude used by the defaults, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;
