//! Closed-loop driver for the three vehicle models.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{
    double_int_accel, oracle_sdot, sliding_error, speed_regulation, ControlError, ControllerState,
    Gains, SdotMode, SignMode,
};
use crate::fields::{FieldError, FieldModel, Position2, ScalarField};
use crate::sim::ode::{try_rk4_step, OdeError};
use crate::vehicles::{heading_vector, polar_diagnostics, wrap_angle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("step {step}: {source}")]
    Field { step: usize, source: FieldError },
    #[error("step {step}: {source}")]
    Control { step: usize, source: ControlError },
    #[error("step {step}: non-finite state")]
    NonFinite { step: usize },
    #[error("trajectory is empty")]
    EmptyTrajectory,
}

/// Failure inside one RK4 step, before the step index is attached.
#[derive(Debug)]
enum StepError {
    Ode(OdeError),
    Field(FieldError),
    Control(ControlError),
}

impl From<OdeError> for StepError {
    fn from(e: OdeError) -> Self {
        Self::Ode(e)
    }
}

impl From<FieldError> for StepError {
    fn from(e: FieldError) -> Self {
        Self::Field(e)
    }
}

impl From<ControlError> for StepError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Field(f) => Self::Field(f),
            other => Self::Control(other),
        }
    }
}

impl StepError {
    fn at(self, step: usize) -> SimError {
        match self {
            Self::Ode(OdeError::NonFiniteDerivative) => SimError::NonFinite { step },
            Self::Ode(e @ OdeError::InvalidStep(_)) => SimError::InvalidConfig(e.to_string()),
            Self::Field(source) => SimError::Field { step, source },
            Self::Control(source) => SimError::Control { step, source },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VehicleKind {
    Dubins,
    SingleIntegrator,
    DoubleIntegrator,
}

impl FromStr for VehicleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dubins" => Ok(Self::Dubins),
            "single-integrator" => Ok(Self::SingleIntegrator),
            "double-integrator" => Ok(Self::DoubleIntegrator),
            other => Err(format!("unknown vehicle '{other}'")),
        }
    }
}

impl fmt::Display for VehicleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dubins => "dubins",
            Self::SingleIntegrator => "single-integrator",
            Self::DoubleIntegrator => "double-integrator",
        })
    }
}

/// When the control law is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlTiming {
    /// Once per step at the step start, held over the RK4 stages.
    #[default]
    ZeroOrderHold,
    /// Inside every RK4 stage, with the integrators carried as ODE states.
    /// Needs the oracle concentration rate.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Initial speed of a double integrator; defaults to `v`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

impl InitialState {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta, speed: None }
    }

    pub fn position(&self) -> Position2 {
        Position2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub field: FieldModel,
    pub vehicle: VehicleKind,
    pub gains: Gains,
    pub v: f64,
    pub s_d: f64,
    pub dt: f64,
    pub duration: f64,
    pub initial: InitialState,
    pub sdot_mode: SdotMode,
    pub timing: ControlTiming,
    pub sign_mode: SignMode,
    pub sigma_limit: Option<f64>,
    /// Keep every n-th sample (the last sample is always kept).
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(field: FieldModel, vehicle: VehicleKind, gains: Gains, v: f64, s_d: f64, initial: InitialState) -> Self {
        Self {
            field,
            vehicle,
            gains,
            v,
            s_d,
            dt: 0.01,
            duration: 100.0,
            initial,
            sdot_mode: SdotMode::default(),
            timing: ControlTiming::default(),
            sign_mode: SignMode::default(),
            sigma_limit: None,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be >= 0, got {}", self.duration));
        }
        if self.duration > 0.0 && self.dt > self.duration {
            return bad(format!("dt = {} exceeds duration = {}", self.dt, self.duration));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return bad(format!("v must be > 0, got {}", self.v));
        }
        if !self.s_d.is_finite() {
            return bad("s_d must be finite".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        if let Some(limit) = self.sigma_limit {
            if !(limit > 0.0 && limit.is_finite()) {
                return bad(format!("sigma_limit must be > 0, got {limit}"));
            }
        }
        if let SignMode::BoundaryLayer { width } = self.sign_mode {
            if !(width > 0.0 && width.is_finite()) {
                return bad(format!("boundary-layer width must be > 0, got {width}"));
            }
        }
        if self.timing == ControlTiming::Continuous && self.sdot_mode != SdotMode::Oracle {
            return bad("continuous control timing requires the oracle concentration rate".into());
        }
        let InitialState { x, y, theta, speed } = self.initial;
        if ![x, y, theta].iter().all(|c| c.is_finite()) {
            return bad("initial state must be finite".into());
        }
        if let Some(s) = speed {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("initial speed must be > 0, got {s}"));
            }
        }
        self.gains
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        self.field
            .value(self.initial.position())
            .map_err(|source| SimError::Field { step: 0, source })?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// One logged sample. Columns that do not apply to the vehicle are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Dubins heading, single-integrator heading command or double-integrator course.
    pub theta: Option<f64>,
    pub vx: Option<f64>,
    pub vy: Option<f64>,
    pub s: f64,
    pub eps: f64,
    /// Concentration rate used by the controller.
    pub sdot: f64,
    pub e: f64,
    pub omega: Option<f64>,
    pub sigma: Option<f64>,
    pub zeta: Option<f64>,
    pub r: Option<f64>,
    pub phi: Option<f64>,
    /// Vehicle speed; not part of the CSV schema.
    #[serde(skip)]
    pub speed: f64,
}

impl Record {
    pub fn position(&self) -> Position2 {
        Position2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub vehicle: VehicleKind,
    pub v: f64,
    pub s_d: f64,
    /// Integration step.
    pub dt: f64,
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn positions(&self) -> Vec<Position2> {
        self.records.iter().map(Record::position).collect()
    }
}

/// Controller output held over one step.
#[derive(Debug, Clone, Copy)]
struct Command {
    s: f64,
    theta: Option<f64>,
    omega: Option<f64>,
    velocity: Option<Vector2<f64>>,
    regulation: Option<Vector2<f64>>,
    sdot: f64,
    e: f64,
}

fn concentration_rate(
    field: &FieldModel,
    ctrl: &mut ControllerState,
    p: Position2,
    s: f64,
    velocity: Vector2<f64>,
    dt: f64,
) -> Result<f64, FieldError> {
    match ctrl.sdot_mode {
        SdotMode::Oracle => oracle_sdot(field, p, velocity),
        SdotMode::Measured => Ok(ctrl.measured_sdot(s, dt).value),
    }
}

struct Runner<'a> {
    cfg: &'a SimConfig,
    ctrl: ControllerState,
}

impl Runner<'_> {
    fn field(&self) -> &FieldModel {
        &self.cfg.field
    }

    /// Evaluates the controller at a sampling instant and updates its memory.
    fn sample(&mut self, y: &[f64; 5]) -> Result<Command, StepError> {
        let cfg = self.cfg;
        let g = &cfg.gains;
        let p = Position2::new(y[0], y[1]);
        let s = self.field().value(p)?;
        let eps = s - cfg.s_d;
        match cfg.vehicle {
            VehicleKind::Dubins => {
                let vel = heading_vector(y[2]) * cfg.v;
                let sdot = concentration_rate(&cfg.field, &mut self.ctrl, p, s, vel, cfg.dt)?;
                let e = sliding_error(eps, sdot, g);
                let omega = self.ctrl.pi_like_omega(e, g, cfg.dt);
                Ok(Command { s, theta: Some(y[2]), omega: Some(omega), velocity: None, regulation: None, sdot, e })
            }
            VehicleKind::SingleIntegrator => {
                let theta1 = self.ctrl.single_int_heading(s, eps, g, cfg.dt);
                let velocity = heading_vector(theta1) * cfg.v;
                let sdot = concentration_rate(&cfg.field, &mut self.ctrl, p, s, velocity, cfg.dt)?;
                let e = sliding_error(eps, sdot, g);
                Ok(Command { s, theta: Some(theta1), omega: None, velocity: Some(velocity), regulation: None, sdot, e })
            }
            VehicleKind::DoubleIntegrator => {
                let vel = Vector2::new(y[2], y[3]);
                let sdot = concentration_rate(&cfg.field, &mut self.ctrl, p, s, vel, cfg.dt)?;
                let e = sliding_error(eps, sdot, g);
                let omega = self.ctrl.pi_like_omega(e, g, cfg.dt);
                let regulation = speed_regulation(vel, cfg.v, g.c5, cfg.sign_mode)?;
                Ok(Command {
                    s,
                    theta: Some(vel.y.atan2(vel.x)),
                    omega: Some(omega),
                    velocity: Some(vel),
                    regulation: Some(regulation),
                    sdot,
                    e,
                })
            }
        }
    }

    /// Held-command dynamics over `[x, y, a, b, _]`.
    fn zoh_rhs(&self, cmd: &Command, y: &[f64; 5]) -> [f64; 5] {
        match self.cfg.vehicle {
            VehicleKind::Dubins => {
                let h = heading_vector(y[2]) * self.cfg.v;
                [h.x, h.y, cmd.omega.unwrap_or(0.0), 0.0, 0.0]
            }
            VehicleKind::SingleIntegrator => {
                let u = cmd.velocity.unwrap_or_else(Vector2::zeros);
                [u.x, u.y, 0.0, 0.0, 0.0]
            }
            VehicleKind::DoubleIntegrator => {
                let w = cmd.omega.unwrap_or(0.0);
                let reg = cmd.regulation.unwrap_or_else(Vector2::zeros);
                [y[2], y[3], -w * y[3] + reg.x, w * y[2] + reg.y, 0.0]
            }
        }
    }

    /// Closed-loop dynamics with the controller inside the vector field.
    /// Dubins: `[x, y, theta, sigma]`; single: `[x, y, zeta]`; double: `[x, y, vx, vy, sigma]`.
    fn continuous_rhs(&self, y: &[f64; 5]) -> Result<[f64; 5], StepError> {
        let cfg = self.cfg;
        let g = &cfg.gains;
        let p = Position2::new(y[0], y[1]);
        let s = self.field().value(p)?;
        let eps = s - cfg.s_d;
        match cfg.vehicle {
            VehicleKind::Dubins => {
                let vel = heading_vector(y[2]) * cfg.v;
                let e = sliding_error(eps, oracle_sdot(&cfg.field, p, vel)?, g);
                Ok([vel.x, vel.y, g.c1 * e + g.c2 * y[3], e, 0.0])
            }
            VehicleKind::SingleIntegrator => {
                let vel = heading_vector(g.c1 * s + g.c1 * g.c3 * y[2]) * cfg.v;
                Ok([vel.x, vel.y, (eps / g.c4).tanh(), 0.0, 0.0])
            }
            VehicleKind::DoubleIntegrator => {
                let vel = Vector2::new(y[2], y[3]);
                let e = sliding_error(eps, oracle_sdot(&cfg.field, p, vel)?, g);
                let a = double_int_accel(g.c1 * e + g.c2 * y[4], vel, cfg.v, g, cfg.sign_mode)?;
                Ok([vel.x, vel.y, a.x, a.y, e])
            }
        }
    }

    fn continuous_record(&self, t: f64, y: &[f64; 5]) -> Result<Record, StepError> {
        let cfg = self.cfg;
        let g = &cfg.gains;
        let p = Position2::new(y[0], y[1]);
        let s = self.field().value(p)?;
        let eps = s - cfg.s_d;
        let (theta, vel, sigma, zeta) = match cfg.vehicle {
            VehicleKind::Dubins => (y[2], heading_vector(y[2]) * cfg.v, Some(y[3]), None),
            VehicleKind::SingleIntegrator => {
                let th = g.c1 * s + g.c1 * g.c3 * y[2];
                (th, heading_vector(th) * cfg.v, None, Some(y[2]))
            }
            VehicleKind::DoubleIntegrator => {
                let vel = Vector2::new(y[2], y[3]);
                (vel.y.atan2(vel.x), vel, Some(y[4]), None)
            }
        };
        let sdot = oracle_sdot(&cfg.field, p, vel)?;
        let e = sliding_error(eps, sdot, g);
        let omega = sigma.map(|sg| g.c1 * e + g.c2 * sg);
        let cmd = Command {
            s,
            theta: Some(theta),
            omega,
            velocity: (cfg.vehicle != VehicleKind::Dubins).then_some(vel),
            regulation: None,
            sdot,
            e,
        };
        let mut rec = self.record(t, y, &cmd);
        rec.sigma = sigma;
        rec.zeta = zeta;
        Ok(rec)
    }

    fn record(&self, t: f64, y: &[f64; 5], cmd: &Command) -> Record {
        let cfg = self.cfg;
        let s = cmd.s;
        let p = Position2::new(y[0], y[1]);
        let (r, phi) = match cmd.theta {
            Some(th) => match polar_diagnostics(p, th, &cfg.field) {
                Ok(d) => (d.r, Some(d.phi)),
                Err(_) => (None, None),
            },
            None => (None, None),
        };
        let (theta, sigma, zeta, speed) = match cfg.vehicle {
            VehicleKind::Dubins => (cmd.theta.map(wrap_angle), Some(self.ctrl.sigma), None, cfg.v),
            VehicleKind::SingleIntegrator => (
                cmd.theta,
                None,
                Some(self.ctrl.zeta),
                cmd.velocity.map_or(0.0, |u| u.norm()),
            ),
            VehicleKind::DoubleIntegrator => (
                cmd.theta,
                Some(self.ctrl.sigma),
                None,
                cmd.velocity.map_or(0.0, |u| u.norm()),
            ),
        };
        Record {
            t,
            x: y[0],
            y: y[1],
            theta,
            vx: cmd.velocity.map(|u| u.x),
            vy: cmd.velocity.map(|u| u.y),
            s,
            eps: s - cfg.s_d,
            sdot: cmd.sdot,
            e: cmd.e,
            omega: cmd.omega,
            sigma,
            zeta,
            r,
            phi,
            speed,
        }
    }
}

fn initial_vector(cfg: &SimConfig) -> Result<[f64; 5], SimError> {
    let InitialState { x, y, theta, speed } = cfg.initial;
    Ok(match cfg.vehicle {
        VehicleKind::Dubins => [x, y, theta, 0.0, 0.0],
        VehicleKind::SingleIntegrator => [x, y, initial_zeta(cfg)?, 0.0, 0.0],
        VehicleKind::DoubleIntegrator => {
            let v0 = heading_vector(theta) * speed.unwrap_or(cfg.v);
            [x, y, v0.x, v0.y, 0.0]
        }
    })
}

/// `zeta(t0)` chosen so that the heading command starts at `theta0`.
fn initial_zeta(cfg: &SimConfig) -> Result<f64, SimError> {
    let g = &cfg.gains;
    if g.c1 == 0.0 {
        return Ok(0.0);
    }
    let s0 = cfg
        .field
        .value(cfg.initial.position())
        .map_err(|source| SimError::Field { step: 0, source })?;
    Ok((cfg.initial.theta - g.c1 * s0) / (g.c1 * g.c3))
}

fn finite(y: &[f64; 5], step: usize) -> Result<(), SimError> {
    if y.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(SimError::NonFinite { step })
    }
}

/// Runs one closed-loop simulation. Deterministic: the same config gives a
/// bit-identical trajectory.
pub fn run_simulation(cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let steps = cfg.steps();
    let mut ctrl = ControllerState::new(cfg.sdot_mode);
    ctrl.sigma_limit = cfg.sigma_limit;
    let mut y = initial_vector(cfg)?;
    if cfg.vehicle == VehicleKind::SingleIntegrator {
        ctrl.zeta = y[2];
    }
    let mut runner = Runner { cfg, ctrl };
    let mut records = Vec::with_capacity(steps / cfg.record_every + 2);

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let keep = k % cfg.record_every == 0 || k == steps;
        match cfg.timing {
            ControlTiming::ZeroOrderHold => {
                let cmd = runner.sample(&y).map_err(|e| e.at(k))?;
                if keep {
                    records.push(runner.record(t, &y, &cmd));
                }
                if k == steps {
                    break;
                }
                y = try_rk4_step(|z| Ok::<_, StepError>(runner.zoh_rhs(&cmd, z)), &y, cfg.dt).map_err(|e| e.at(k))?;
            }
            ControlTiming::Continuous => {
                if keep {
                    records.push(runner.continuous_record(t, &y).map_err(|e| e.at(k))?);
                }
                if k == steps {
                    break;
                }
                y = try_rk4_step(|z| runner.continuous_rhs(z), &y, cfg.dt).map_err(|e| e.at(k))?;
            }
        }
        finite(&y, k + 1)?;
    }

    Ok(Trajectory { vehicle: cfg.vehicle, v: cfg.v, s_d: cfg.s_d, dt: cfg.dt, records })
}
