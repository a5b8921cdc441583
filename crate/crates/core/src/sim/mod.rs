//! Fixed-step integration, the closed-loop driver and trajectory metrics.

pub mod metrics;
pub mod ode;
pub mod simulate;
pub mod sweep;

pub use metrics::{compute_metrics, Metrics, DEFAULT_SETTLE_THRESHOLD};
pub use ode::{rk4_step, try_rk4_step, OdeError};
pub use simulate::{
    run_simulation, ControlTiming, InitialState, Record, SimConfig, SimError, Trajectory, VehicleKind,
};
pub use sweep::{parameter_sweep, Parameter, SweepResults};
