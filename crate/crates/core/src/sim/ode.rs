//! Fixed-step classical Runge-Kutta integration on fixed-size states.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum OdeError {
    #[error("step size must be finite and > 0, got {0}")]
    InvalidStep(f64),
    #[error("non-finite derivative")]
    NonFiniteDerivative,
}

fn check(d: &[f64]) -> Result<(), OdeError> {
    if d.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(OdeError::NonFiniteDerivative)
    }
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + a * k[i])
}

/// One RK4 step of the autonomous system `y' = f(y)`.
pub fn rk4_step<const N: usize>(
    f: impl Fn(&[f64; N]) -> [f64; N],
    y: &[f64; N],
    dt: f64,
) -> Result<[f64; N], OdeError> {
    try_rk4_step(|s| Ok::<_, OdeError>(f(s)), y, dt)
}

/// RK4 step for a derivative that can fail (e.g. leaving a field's domain).
pub fn try_rk4_step<const N: usize, E: From<OdeError>>(
    mut f: impl FnMut(&[f64; N]) -> Result<[f64; N], E>,
    y: &[f64; N],
    dt: f64,
) -> Result<[f64; N], E> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OdeError::InvalidStep(dt).into());
    }
    let k1 = f(y)?;
    check(&k1)?;
    let k2 = f(&axpy(y, 0.5 * dt, &k1))?;
    check(&k2)?;
    let k3 = f(&axpy(y, 0.5 * dt, &k2))?;
    check(&k3)?;
    let k4 = f(&axpy(y, dt, &k3))?;
    check(&k4)?;
    Ok(std::array::from_fn(|i| {
        y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}
