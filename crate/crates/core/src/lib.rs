//! Concentration-feedback isoline tracking: field models, control laws,
//! closed-loop simulation and the numerical stability analysis around them.

pub mod analysis;
pub mod controllers;
pub mod fields;
pub mod harness;
pub mod sim;
pub mod vehicles;

pub use analysis::{AnalysisError, EquilibriumReport, Prop3Bound, StabilityReport};
pub use controllers::{ControlError, ControllerState, Gains, SdotMode, SignMode};
pub use fields::{FieldBounds, FieldError, FieldModel, Position2, Rect, ScalarField};
pub use harness::{HarnessError, Scenario};
pub use sim::{run_simulation, InitialState, Metrics, SimConfig, SimError, Trajectory, VehicleKind};
