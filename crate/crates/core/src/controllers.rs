//! Sliding-surface error and the concentration-feedback control laws.
//!
//! All laws act on the tracking error `eps = s - s_d` through the sliding
//! error `e = eps_dot + c3 * tanh(eps / c4)`. The gain `c1` carries the unit
//! conversion from concentration rate to angular rate.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{FieldError, Position2, ScalarField};
use crate::vehicles::heading_vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid gain: {0}")]
    InvalidGain(String),
    #[error("velocity vector is zero; course angle undefined")]
    ZeroVelocity,
    #[error("c3 selection needs at least one non-zero concentration-rate sample")]
    NoSamples,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    #[serde(default)]
    pub c5: f64,
}

impl Gains {
    pub const fn new(c1: f64, c2: f64, c3: f64, c4: f64) -> Self {
        Self { c1, c2, c3, c4, c5: 0.0 }
    }

    pub const fn with_c5(mut self, c5: f64) -> Self {
        self.c5 = c5;
        self
    }

    /// Gains of the circular-field study: c1 = 10, c2 = 1, c3 = 0.3, c4 = 1.
    pub const fn circular_pi() -> Self {
        Self::new(10.0, 1.0, 0.3, 1.0)
    }

    /// Gains of the smooth-field study: c1 = 10, c2 = 0, c3 = 0.1, c4 = 1.
    pub const fn smooth_p() -> Self {
        Self::new(10.0, 0.0, 0.1, 1.0)
    }

    /// Gains of the double-integrator study: c1 = 30, c2 = 0.1, c3 = 0.1, c4 = 1, c5 = 0.1.
    pub const fn double_integrator() -> Self {
        Self::new(30.0, 0.1, 0.1, 1.0).with_c5(0.1)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let check = |name: &str, value: f64, strict: bool| {
            let ok = value.is_finite() && if strict { value > 0.0 } else { value >= 0.0 };
            if ok {
                Ok(())
            } else {
                let bound = if strict { "> 0" } else { ">= 0" };
                Err(ControlError::InvalidGain(format!("{name} must be {bound}, got {value}")))
            }
        };
        check("c1", self.c1, false)?;
        check("c2", self.c2, false)?;
        check("c3", self.c3, true)?;
        check("c4", self.c4, true)?;
        check("c5", self.c5, false)
    }
}

/// `e = eps_dot + c3 tanh(eps / c4)`.
pub fn sliding_error(eps: f64, eps_dot: f64, g: &Gains) -> f64 {
    eps_dot + g.c3 * (eps / g.c4).tanh()
}

/// How the controller obtains the concentration rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdotMode {
    /// Exact rate from the field gradient and the vehicle velocity.
    Oracle,
    /// Backward difference of consecutive samples.
    #[default]
    Measured,
}

impl std::str::FromStr for SdotMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "measured" => Ok(Self::Measured),
            other => Err(format!("unknown sdot mode `{other}` (expected oracle or measured)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdotEstimate {
    pub value: f64,
    /// Set on the first measured call, before a previous sample exists.
    pub warm_up: bool,
}

/// `s_dot = grad F(p) . velocity`, equal to `-v |grad F| cos(phi)` for a unicycle.
pub fn oracle_sdot<F: ScalarField + ?Sized>(
    field: &F,
    p: Position2,
    velocity: Vector2<f64>,
) -> Result<f64, FieldError> {
    Ok(field.gradient(p)?.dot(&velocity))
}

pub fn oracle_sdot_dubins<F: ScalarField + ?Sized>(
    field: &F,
    p: Position2,
    heading: f64,
    v: f64,
) -> Result<f64, FieldError> {
    oracle_sdot(field, p, heading_vector(heading) * v)
}

/// Componentwise sign used by the speed-regulation term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignMode {
    /// `sgn(0) = 0`.
    #[default]
    Exact,
    /// `tanh(x / width)`.
    BoundaryLayer { width: f64 },
}

impl SignMode {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Self::Exact => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Self::BoundaryLayer { width } => (x / width).tanh(),
        }
    }
}

/// Integrator and sampling memory of one controller instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// Running integral of the sliding error.
    pub sigma: f64,
    /// Running integral of `tanh(eps / c4)`.
    pub zeta: f64,
    pub prev_s: Option<f64>,
    prev_e: Option<f64>,
    prev_tanh: Option<f64>,
    pub sdot_mode: SdotMode,
    /// Optional symmetric clamp on `sigma` (off by default).
    pub sigma_limit: Option<f64>,
}

impl ControllerState {
    pub fn new(sdot_mode: SdotMode) -> Self {
        Self {
            sigma: 0.0,
            zeta: 0.0,
            prev_s: None,
            prev_e: None,
            prev_tanh: None,
            sdot_mode,
            sigma_limit: None,
        }
    }

    /// Backward difference of the concentration samples.
    pub fn measured_sdot(&mut self, s_now: f64, dt: f64) -> SdotEstimate {
        let est = match self.prev_s {
            Some(prev) => SdotEstimate { value: (s_now - prev) / dt, warm_up: false },
            None => SdotEstimate { value: 0.0, warm_up: true },
        };
        self.prev_s = Some(s_now);
        est
    }

    /// PI-like angular rate `omega = c1 e + c2 sigma`, with `sigma` accumulated
    /// by the trapezoidal rule from the previous call.
    pub fn pi_like_omega(&mut self, e: f64, g: &Gains, dt: f64) -> f64 {
        if let Some(prev) = self.prev_e {
            self.sigma += 0.5 * dt * (prev + e);
            if let Some(limit) = self.sigma_limit {
                self.sigma = self.sigma.clamp(-limit, limit);
            }
        }
        self.prev_e = Some(e);
        g.c1 * e + g.c2 * self.sigma
    }

    /// Heading command of the single-integrator law, `theta1 = c1 s + c1 c3 zeta`.
    pub fn single_int_heading(&mut self, s_now: f64, eps: f64, g: &Gains, dt: f64) -> f64 {
        let t = (eps / g.c4).tanh();
        if let Some(prev) = self.prev_tanh {
            self.zeta += 0.5 * dt * (prev + t);
        }
        self.prev_tanh = Some(t);
        g.c1 * s_now + g.c1 * g.c3 * self.zeta
    }

    /// Velocity command `v (cos theta1, sin theta1)` of the single-integrator law.
    pub fn single_int_velocity(
        &mut self,
        s_now: f64,
        eps: f64,
        g: &Gains,
        v: f64,
        dt: f64,
    ) -> Vector2<f64> {
        heading_vector(self.single_int_heading(s_now, eps, g, dt)) * v
    }
}

/// Speed-regulating part of the double-integrator law, `c5 sgn(v_d - vel)`.
pub fn speed_regulation(
    vel: Vector2<f64>,
    v: f64,
    c5: f64,
    sign: SignMode,
) -> Result<Vector2<f64>, ControlError> {
    if vel.x == 0.0 && vel.y == 0.0 {
        return Err(ControlError::ZeroVelocity);
    }
    // atan2 rather than arctan(vy / vx) so every quadrant is covered.
    let course = vel.y.atan2(vel.x);
    let diff = heading_vector(course) * v - vel;
    Ok(Vector2::new(sign.apply(diff.x), sign.apply(diff.y)) * c5)
}

/// `a = omega (-v_y, v_x) + c5 sgn(v_d - vel)`.
pub fn double_int_accel(
    omega: f64,
    vel: Vector2<f64>,
    v: f64,
    g: &Gains,
    sign: SignMode,
) -> Result<Vector2<f64>, ControlError> {
    let regulation = speed_regulation(vel, v, g.c5, sign)?;
    Ok(Vector2::new(-vel.y, vel.x) * omega + regulation)
}

/// Picks `c3` as a fraction of the mean absolute concentration rate.
pub fn select_c3(sdot_samples: &[f64], fraction: f64) -> Result<f64, ControlError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(ControlError::InvalidParameter(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if sdot_samples.is_empty() || sdot_samples.iter().all(|s| *s == 0.0) {
        return Err(ControlError::NoSamples);
    }
    let mean = sdot_samples.iter().map(|s| s.abs()).sum::<f64>() / sdot_samples.len() as f64;
    Ok(fraction * mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::LinearRadialField;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn sliding_error_examples() {
        let g = Gains::new(10.0, 0.0, 0.3, 1.0);
        assert_eq!(sliding_error(0.0, 0.0, &g), 0.0);
        let eps = 0.7;
        assert_eq!(sliding_error(eps, -0.3 * (eps / 1.0f64).tanh(), &g), 0.0);
        let e = sliding_error(1.0, 0.1, &g);
        assert_relative_eq!(e, 0.1 + 0.3 * 1f64.tanh(), epsilon = 1e-15);
        assert!((e - 0.328478).abs() < 1e-6);
    }

    #[test]
    fn pi_like_examples() {
        let g = Gains::new(10.0, 0.0, 0.3, 1.0);
        let mut st = ControllerState::new(SdotMode::Oracle);
        assert_eq!(st.pi_like_omega(0.0, &g, 0.01), 0.0);
        let mut st = ControllerState::new(SdotMode::Oracle);
        let w = st.pi_like_omega(0.328478, &g, 0.01);
        assert_relative_eq!(w, 3.28478, epsilon = 1e-12);
    }

    #[test]
    fn sigma_uses_trapezoidal_rule() {
        let g = Gains::new(0.0, 1.0, 0.3, 1.0);
        let mut st = ControllerState::new(SdotMode::Oracle);
        st.pi_like_omega(1.0, &g, 0.5);
        let w = st.pi_like_omega(3.0, &g, 0.5);
        assert_eq!(st.sigma, 1.0);
        assert_eq!(w, 1.0);
        st.sigma_limit = Some(1.2);
        st.pi_like_omega(3.0, &g, 0.5);
        assert_eq!(st.sigma, 1.2);
    }

    #[test]
    fn sdot_estimates() {
        let f = LinearRadialField::new(20.0, 1.0, 4.0, Position2::default()).unwrap();
        let p = Position2::new(4.0, 0.0);
        // heading -pi/2 relative to -grad F, which points along +x here.
        assert!(oracle_sdot_dubins(&f, p, -FRAC_PI_2, 0.5).unwrap().abs() < 1e-16);
        let f2 = LinearRadialField::new(20.0, 2.0, 4.0, Position2::default()).unwrap();
        assert_relative_eq!(oracle_sdot_dubins(&f2, p, 0.0, 0.5).unwrap(), -1.0, epsilon = 1e-15);

        let mut st = ControllerState::new(SdotMode::Measured);
        let first = st.measured_sdot(10.0, 0.1);
        assert_eq!(first, SdotEstimate { value: 0.0, warm_up: true });
        let second = st.measured_sdot(10.1, 0.1);
        assert!(!second.warm_up);
        assert_relative_eq!(second.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_int_examples() {
        let g = Gains::new(2.0, 0.0, 0.3, 1.0);
        let mut st = ControllerState::new(SdotMode::Oracle);
        assert_eq!(st.single_int_velocity(0.0, 0.0, &g, 0.5, 0.1), Vector2::new(0.5, 0.0));
        let g = Gains::new(PI, 0.0, 0.3, 1.0);
        let mut st = ControllerState::new(SdotMode::Oracle);
        let vel = st.single_int_velocity(1.0, 0.0, &g, 0.5, 0.1);
        assert_relative_eq!(vel.x, -0.5, epsilon = 1e-15);
        assert!(vel.y.abs() < 1e-15);
    }

    #[test]
    fn double_int_examples() {
        let g = Gains::new(1.0, 0.0, 0.1, 1.0).with_c5(0.1);
        let a = double_int_accel(0.0, Vector2::new(1.0, 0.0), 0.5, &g, SignMode::Exact).unwrap();
        assert_eq!(a, Vector2::new(-0.1, 0.0));
        let a = double_int_accel(1.0, Vector2::new(0.5, 0.0), 0.5, &g, SignMode::Exact).unwrap();
        assert_eq!(a, Vector2::new(0.0, 0.5));
        assert_eq!(
            double_int_accel(1.0, Vector2::zeros(), 0.5, &g, SignMode::Exact),
            Err(ControlError::ZeroVelocity)
        );
        let smooth = SignMode::BoundaryLayer { width: 0.01 };
        assert_relative_eq!(smooth.apply(0.01), 1f64.tanh());
        assert_eq!(SignMode::Exact.apply(0.0), 0.0);
    }

    #[test]
    fn select_c3_examples() {
        assert_relative_eq!(select_c3(&[0.04, 0.05, 0.06], 0.5).unwrap(), 0.025, epsilon = 1e-15);
        assert_relative_eq!(select_c3(&[0.05], 0.9).unwrap(), 0.045, epsilon = 1e-15);
        assert_eq!(select_c3(&[0.0, 0.0], 0.5), Err(ControlError::NoSamples));
        assert!(select_c3(&[0.1], 1.0).is_err());
    }

    #[test]
    fn gains_validation() {
        assert!(Gains::circular_pi().validate().is_ok());
        assert!(Gains::new(1.0, 0.0, 0.0, 1.0).validate().is_err());
        assert!(Gains::new(-1.0, 0.0, 0.1, 1.0).validate().is_err());
        assert!(Gains::new(1.0, 0.0, 0.1, f64::NAN).validate().is_err());
    }

    proptest! {
        #[test]
        fn p_like_is_pi_like_without_integral(
            stream in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..50),
            c1 in 0.0..50.0f64, c3 in 0.01..2.0f64, c4 in 0.1..5.0f64,
        ) {
            let g = Gains::new(c1, 0.0, c3, c4);
            let mut st = ControllerState::new(SdotMode::Oracle);
            for (eps, eps_dot) in stream {
                let e = sliding_error(eps, eps_dot, &g);
                prop_assert_eq!(st.pi_like_omega(e, &g, 0.01), c1 * e);
            }
        }

        #[test]
        fn regulation_term_is_orthogonal(omega in -5.0..5.0f64, vx in -3.0..3.0f64, vy in -3.0..3.0f64) {
            prop_assume!(vx != 0.0 || vy != 0.0);
            let vel = Vector2::new(vx, vy);
            let g = Gains::new(1.0, 0.0, 0.1, 1.0);
            let a = double_int_accel(omega, vel, 0.5, &g, SignMode::Exact).unwrap();
            // c5 = 0 leaves only the rotation term, exactly orthogonal to vel.
            prop_assert!(a.dot(&vel).abs() <= 1e-14 * (1.0 + omega.abs()) * vel.norm_squared());
        }

        #[test]
        fn single_int_heading_increment(
            s in proptest::collection::vec(-20.0..20.0f64, 2..40),
            c1 in 0.1..20.0f64, c3 in 0.01..1.0f64, c4 in 0.5..3.0f64,
        ) {
            let g = Gains::new(c1, 0.0, c3, c4);
            let (dt, sd) = (0.01, 3.0);
            let mut st = ControllerState::new(SdotMode::Oracle);
            let mut prev = st.single_int_heading(s[0], s[0] - sd, &g, dt);
            for w in s.windows(2) {
                let now = st.single_int_heading(w[1], w[1] - sd, &g, dt);
                let trap = 0.5 * dt * (((w[0] - sd) / c4).tanh() + ((w[1] - sd) / c4).tanh());
                let expected = c1 * ((w[1] - w[0]) + c3 * trap);
                prop_assert!((now - prev - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
                prev = now;
            }
        }

        #[test]
        fn select_c3_is_below_the_mean(samples in proptest::collection::vec(-1.0..1.0f64, 1..30), eta in 0.01..0.99f64) {
            prop_assume!(samples.iter().any(|s| *s != 0.0));
            let mean = samples.iter().map(|s| s.abs()).sum::<f64>() / samples.len() as f64;
            prop_assert!(select_c3(&samples, eta).unwrap() < mean);
        }
    }
}
