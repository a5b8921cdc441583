//! Vehicle models and the polar diagnostics relating heading to the field gradient.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::fields::{FieldError, Position2, ScalarField, STATIONARY_THRESHOLD};

/// Minimum distance to a radial source for which `r` is reported.
pub const MIN_RADIUS: f64 = 1e-6;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

pub fn heading_vector(theta: f64) -> Vector2<f64> {
    Vector2::new(theta.cos(), theta.sin())
}

/// Constant-speed unicycle. The heading is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsState {
    pub position: Position2,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DubinsDerivative {
    pub velocity: Vector2<f64>,
    pub heading_rate: f64,
}

impl DubinsState {
    pub fn wrapped_heading(&self) -> f64 {
        wrap_angle(self.heading)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.heading.is_finite()
    }
}

pub fn dubins_derivative(s: &DubinsState, v: f64, omega: f64) -> DubinsDerivative {
    DubinsDerivative { velocity: heading_vector(s.heading) * v, heading_rate: omega }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleIntState {
    pub position: Position2,
}

pub fn single_int_derivative(_s: &SingleIntState, velocity: Vector2<f64>) -> Vector2<f64> {
    velocity
}

/// Point mass with velocity state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleIntState {
    pub position: Position2,
    pub velocity: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleIntDerivative {
    pub velocity: Vector2<f64>,
    pub acceleration: Vector2<f64>,
}

impl DoubleIntState {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Course angle of the velocity vector.
    pub fn course(&self) -> f64 {
        self.velocity.y.atan2(self.velocity.x)
    }
}

pub fn double_int_derivative(s: &DoubleIntState, acceleration: Vector2<f64>) -> DoubleIntDerivative {
    DoubleIntDerivative { velocity: s.velocity, acceleration }
}

/// Geometry of a vehicle relative to the local gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarDiagnostics {
    /// Distance to the source; only defined for radial fields.
    pub r: Option<f64>,
    /// Angle from `-grad F` to the heading, in `(-pi, pi]`.
    pub phi: f64,
    /// Direction of `-grad F` measured from the +x axis.
    pub varphi: f64,
}

pub fn polar_diagnostics<F: ScalarField + ?Sized>(
    p: Position2,
    heading: f64,
    field: &F,
) -> Result<PolarDiagnostics, FieldError> {
    let r = match field.source() {
        Some(src) => {
            let r = p.distance(src);
            if r < MIN_RADIUS {
                return Err(FieldError::AtSource { x: p.x, y: p.y });
            }
            Some(r)
        }
        None => None,
    };
    let g = field.gradient(p)?;
    let norm = g.norm();
    if norm < STATIONARY_THRESHOLD {
        return Err(FieldError::Stationary { x: p.x, y: p.y, norm });
    }
    let varphi = (-g.y).atan2(-g.x);
    Ok(PolarDiagnostics { r, phi: wrap_angle(heading - varphi), varphi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CircularExpField, LinearRadialField};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn dubins_examples() {
        let s = DubinsState { position: Position2::default(), heading: 0.0 };
        let d = dubins_derivative(&s, 0.5, 0.0);
        assert_eq!((d.velocity.x, d.velocity.y, d.heading_rate), (0.5, 0.0, 0.0));
        let s = DubinsState { position: Position2::default(), heading: FRAC_PI_2 };
        let d = dubins_derivative(&s, 0.5, 1.0);
        assert!(d.velocity.x.abs() < 1e-16);
        assert_eq!((d.velocity.y, d.heading_rate), (0.5, 1.0));
    }

    #[test]
    fn single_and_double_examples() {
        let s = SingleIntState { position: Position2::default() };
        assert_eq!(single_int_derivative(&s, Vector2::new(1.0, 0.0)), Vector2::new(1.0, 0.0));
        assert_eq!(single_int_derivative(&s, Vector2::zeros()), Vector2::zeros());
        assert_relative_eq!((heading_vector(2.1) * 0.5).norm(), 0.5, epsilon = 1e-15);

        let d = DoubleIntState { position: Position2::default(), velocity: Vector2::new(1.0, 0.0) };
        let der = double_int_derivative(&d, Vector2::new(0.0, 1.0));
        assert_eq!(der.velocity, Vector2::new(1.0, 0.0));
        assert_eq!(der.acceleration, Vector2::new(0.0, 1.0));
        // d|v|^2/dt = 2 v.a vanishes for orthogonal forcing.
        assert_eq!(2.0 * der.velocity.dot(&der.acceleration), 0.0);
    }

    #[test]
    fn phi_examples() {
        let f = LinearRadialField::new(0.0, 1.0, 1.0, Position2::default()).unwrap();
        let p = Position2::new(1.0, 0.0);
        let d = polar_diagnostics(p, FRAC_PI_2, &f).unwrap();
        assert_relative_eq!(d.phi, FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(d.r, Some(1.0));
        assert_eq!(polar_diagnostics(p, d.varphi, &f).unwrap().phi, 0.0);
        let eq = polar_diagnostics(p, d.varphi - FRAC_PI_2, &f).unwrap();
        assert_relative_eq!(eq.phi, -FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn phi_guards() {
        let f = CircularExpField::new(30.0, 0.1, Position2::default()).unwrap();
        assert!(polar_diagnostics(Position2::new(1e-7, 0.0), 0.0, &f).is_err());
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_in_range(a in -1e4..1e4f64) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert_eq!(wrap_angle(w), w);
            prop_assert!(((a - w) / TAU - ((a - w) / TAU).round()).abs() < 1e-9);
        }

        #[test]
        fn dubins_speed_is_exact(theta in -100.0..100.0f64, v in 0.01..10.0f64) {
            let s = DubinsState { position: Position2::default(), heading: theta };
            let d = dubins_derivative(&s, v, 0.3);
            prop_assert!((d.velocity.norm_squared() - v * v).abs() <= 1e-12 * v * v);
        }
    }
}
