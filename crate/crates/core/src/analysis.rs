//! Equilibria, stability conditions and error bounds for the closed loops.
//!
//! Circular-field results are expressed for the linear-radial model
//! `F = s_d - alpha (r - r_d)`. For an exponential field the local slope
//! `alpha * F` at the isoline plays the role of `alpha` (see
//! [`effective_radial_model`]).

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::{Complex, Matrix2, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::Gains;
use crate::fields::{FieldBounds, FieldModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no sign change of g(r) below {limit}")]
    BracketNotFound { limit: f64 },
    #[error("bisection stopped with |g| = {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("bound is vacuous: atanh argument {argument} is not below 1")]
    VacuousBound { argument: f64 },
    #[error("requires k > b > 0, got k = {k}, b = {b}")]
    InvalidTanhSystem { k: f64, b: f64 },
}

fn require_positive(pairs: &[(&str, f64)]) -> Result<(), AnalysisError> {
    for &(name, value) in pairs {
        if !(value > 0.0 && value.is_finite()) {
            return Err(AnalysisError::InvalidParameter(format!("{name} must be > 0, got {value}")));
        }
    }
    Ok(())
}

/// Complex number as a `(re, im)` pair for reports.
pub type ComplexPair = (f64, f64);

fn pair(c: Complex<f64>) -> ComplexPair {
    (c.re, c.im)
}

/// Eigenvalues of a real 2x2 matrix from its characteristic quadratic.
pub fn eigenvalues_2x2(m: &Matrix2<f64>) -> [Complex<f64>; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        [Complex::new(0.5 * tr + root, 0.0), Complex::new(0.5 * tr - root, 0.0)]
    } else {
        let root = (-disc).sqrt();
        [Complex::new(0.5 * tr, root), Complex::new(0.5 * tr, -root)]
    }
}

pub fn eigenvalues_3x3(m: &Matrix3<f64>) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn max_real_part(eigs: &[Complex<f64>]) -> f64 {
    eigs.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max)
}

fn min_symmetric_eigenvalue(m: &Matrix3<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}

fn rows3(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn rows2(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Steady orbit of the P-like loop on a linear-radial field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub r_e: f64,
    pub s_e: f64,
    /// Angular rate that holds the desired isoline, `-v / r_d`.
    pub omega_c: f64,
    pub g_residual: f64,
    pub iterations: usize,
}

/// `g(r) = -tanh(alpha (r - r_d) / c4) + v / (c1 c3 r)`.
pub fn equilibrium_function(g: &Gains, alpha: f64, r_d: f64, v: f64, r: f64) -> f64 {
    -(alpha * (r - r_d) / g.c4).tanh() + v / (g.c1 * g.c3 * r)
}

const BISECTION_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;
const ROOT_RESIDUAL: f64 = 1e-10;

/// Solves `g(r) = 0` by bisection and maps the root to a concentration.
pub fn solve_equilibrium(
    g: &Gains,
    alpha: f64,
    r_d: f64,
    v: f64,
    s_d: f64,
) -> Result<EquilibriumReport, AnalysisError> {
    require_positive(&[("c1", g.c1), ("c3", g.c3), ("c4", g.c4), ("alpha", alpha), ("r_d", r_d), ("v", v)])?;
    let f = |r: f64| equilibrium_function(g, alpha, r_d, v, r);

    let limit = 1e9 * r_d;
    let mut hi = r_d;
    while f(hi) >= 0.0 {
        hi *= 2.0;
        if hi > limit {
            return Err(AnalysisError::BracketNotFound { limit });
        }
    }
    let mut lo = 1e-9;
    let mut iterations = 0;
    while hi - lo > BISECTION_TOL && iterations < BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let r_e = 0.5 * (lo + hi);
    let residual = f(r_e);
    if residual.abs() > ROOT_RESIDUAL {
        return Err(AnalysisError::NoConvergence { residual, iterations });
    }
    Ok(EquilibriumReport {
        r_e,
        s_e: s_d - alpha * (r_e - r_d),
        omega_c: -v / r_d,
        g_residual: residual,
        iterations,
    })
}

/// Global-convergence conditions of the P-like loop: `c1 > 0`, `alpha v > c3 > 0`, `c4 > 0`.
pub fn check_p_conditions(g: &Gains, alpha: f64, v: f64) -> bool {
    g.c1 > 0.0 && alpha * v > g.c3 && g.c3 > 0.0 && g.c4 > 0.0
}

/// Local-stability conditions of the PI-like loop: `c1 (c1 - 2) v alpha > c2` and `v alpha > c3 > 0`.
/// Evaluated as a plain numeric inequality.
pub fn check_pi_conditions(g: &Gains, alpha: f64, v: f64) -> bool {
    g.c1 * (g.c1 - 2.0) * v * alpha > g.c2 && v * alpha > g.c3 && g.c3 > 0.0
}

/// Linearization of the PI loop around `(r_d, -pi/2, omega_c / c2)` with the
/// entries in closed form, unmodified.
pub fn pi_jacobian(g: &Gains, alpha: f64, v: f64, r_d: f64) -> Matrix3<f64> {
    let omega_c = -v / r_d;
    Matrix3::new(
        0.0, v, 0.0,
        -g.c1 * g.c3 * alpha / g.c4 - omega_c / r_d, -g.c1 * v * alpha, g.c2,
        -g.c3 * alpha / g.c4, -v * alpha, 0.0,
    )
}

/// Right-hand side of the PI loop in polar coordinates `(r, phi, sigma)`.
pub fn pi_polar_rhs(g: &Gains, alpha: f64, v: f64, r_d: f64, state: [f64; 3]) -> [f64; 3] {
    let [r, phi, sigma] = state;
    let r_dot = v * phi.cos();
    let drive = alpha * r_dot + g.c3 * (alpha / g.c4 * (r - r_d)).tanh();
    [r_dot, -g.c1 * drive + g.c2 * sigma - v * phi.sin() / r, -drive]
}

/// Central-difference Jacobian of [`pi_polar_rhs`] at the PI equilibrium.
/// Requires `c2 > 0` so the integrator equilibrium `omega_c / c2` exists.
pub fn pi_jacobian_numeric(g: &Gains, alpha: f64, v: f64, r_d: f64) -> Result<Matrix3<f64>, AnalysisError> {
    require_positive(&[("c2", g.c2), ("r_d", r_d), ("v", v), ("alpha", alpha), ("c4", g.c4)])?;
    let eq = [r_d, -FRAC_PI_2, -v / r_d / g.c2];
    let mut jac = Matrix3::zeros();
    for j in 0..3 {
        let h = 1e-6 * eq[j].abs().max(1.0);
        let (mut plus, mut minus) = (eq, eq);
        plus[j] += h;
        minus[j] -= h;
        let fp = pi_polar_rhs(g, alpha, v, r_d, plus);
        let fm = pi_polar_rhs(g, alpha, v, r_d, minus);
        for i in 0..3 {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Quadratic Lyapunov candidate for the PI linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovMatrices {
    pub p: Matrix3<f64>,
    pub q: Matrix3<f64>,
    pub mu: [f64; 4],
    pub p_min_eigenvalue: f64,
    pub q_min_eigenvalue: f64,
    /// Frobenius norm of `A'P + PA + Q` for the closed-form `A`.
    pub residual: f64,
}

impl LyapunovMatrices {
    pub fn p_positive_definite(&self) -> bool {
        self.p_min_eigenvalue > 0.0
    }

    pub fn q_positive_definite(&self) -> bool {
        self.q_min_eigenvalue > 0.0
    }
}

pub fn lyapunov_matrices(g: &Gains, alpha: f64, v: f64, r_d: f64) -> LyapunovMatrices {
    let (c1, c2, c3, c4) = (g.c1, g.c2, g.c3, g.c4);
    let omega_c = -v / r_d;
    let k = c1 * alpha * v;
    let mu1 = c1 * c3 * alpha / c4 + omega_c / r_d;
    let mu2 = c1 * alpha * (k * mu1 - c2 * c3 * alpha / (2.0 * c4));
    let mu3 = mu1 * v / 2.0 + c2 * alpha * v / 2.0;
    let mu4 = c1 * c2 * c4 * v * mu1 / c3 - c2 * c2 / 2.0;

    let p = Matrix3::new(
        2.0 * mu2 + mu1 * mu1, k * mu1, -c2 * mu1,
        k * mu1, 2.0 * mu3 + k * k, -c2 * k,
        -c2 * mu1, -c2 * k, 2.0 * mu4 + c2 * c2,
    ) * 0.5;

    let q11 = k * mu1 * mu1 - c2 * c3 * alpha * mu1 / c4;
    let q22 = k * k * k;
    let q23 = c2 * k * k - c2 * c2 * alpha * v / 2.0
        + c1 * c2 * c4 * (alpha * v) * (alpha * v) * mu1 / (c3 * alpha);
    let q33 = c1 * c2 * c2 * alpha * v;
    let q = Matrix3::new(q11, 0.0, 0.0, 0.0, q22, q23, 0.0, q23, q33);

    let a = pi_jacobian(g, alpha, v, r_d);
    let residual = (a.transpose() * p + p * a + q).norm();
    LyapunovMatrices {
        p_min_eigenvalue: min_symmetric_eigenvalue(&p),
        q_min_eigenvalue: min_symmetric_eigenvalue(&q),
        p,
        q,
        mu: [mu1, mu2, mu3, mu4],
        residual,
    }
}

/// Linearization of the P-like loop in `(s, phi)` around `(s_e, -pi/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PLinearization {
    pub a_tilde: Matrix2<f64>,
    pub a21: f64,
    pub delta: f64,
    /// Guaranteed exponential rate.
    pub rho: f64,
    /// Closed-form eigenvalues of `a_tilde`.
    pub eigenvalues: [Complex<f64>; 2],
    /// `|G| |G^-1|` for the eigenvector matrix `G`; infinite when defective.
    pub condition_number: f64,
}

pub fn p_linearization(
    g: &Gains,
    alpha: f64,
    v: f64,
    r_d: f64,
    s_d: f64,
    eq: &EquilibriumReport,
) -> PLinearization {
    let k = g.c1 * alpha * v;
    let sech2 = 1.0 - ((eq.s_e - s_d) / g.c4).tanh().powi(2);
    let denom = alpha * r_d + s_d - eq.s_e;
    let a21 = g.c1 * g.c3 / g.c4 * sech2 - alpha * v / (denom * denom);
    let a_tilde = Matrix2::new(0.0, -alpha * v, a21, -k);
    let delta = k * k - 4.0 * a21 * alpha * v;
    let rho = if delta > 0.0 { 0.5 * (k - delta.sqrt()) } else { 0.5 * k };
    let eigenvalues = if delta >= 0.0 {
        let root = delta.sqrt();
        [Complex::new(0.5 * (-k + root), 0.0), Complex::new(0.5 * (-k - root), 0.0)]
    } else {
        let root = (-delta).sqrt();
        [Complex::new(-0.5 * k, 0.5 * root), Complex::new(-0.5 * k, -0.5 * root)]
    };
    let condition_number = eigvec_condition(alpha * v, &eigenvalues);
    PLinearization { a_tilde, a21, delta, rho, eigenvalues, condition_number }
}

/// Condition number of the eigenvector matrix with columns `(alpha v, -lambda)`.
fn eigvec_condition(alpha_v: f64, eigs: &[Complex<f64>; 2]) -> f64 {
    let gm = Matrix2::new(
        Complex::new(alpha_v, 0.0),
        Complex::new(alpha_v, 0.0),
        -eigs[0],
        -eigs[1],
    );
    let sv = gm.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= f64::EPSILON * smax {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Inputs of the smooth-field error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub v: f64,
    /// Angular margin `eps` in `(0, pi/2)` keeping `phi` inside `[-pi + eps, -eps]`.
    pub phi_margin: f64,
    pub gains: Gains,
}

impl BoundParams {
    pub fn from_bounds(bounds: &FieldBounds, v: f64, phi_margin: f64, gains: Gains) -> Self {
        Self {
            gamma1: bounds.grad_min,
            gamma2: bounds.grad_max,
            gamma3: bounds.hess_max,
            v,
            phi_margin,
            gains,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop3Bound {
    /// Asymptotic bound on `|s - s_d|`.
    pub bound: f64,
    pub argument: f64,
    /// c1 threshold that keeps `phi` inside its band.
    pub c1_threshold_invariance: f64,
    /// c1 threshold that keeps the atanh argument below 1.
    pub c1_threshold_bound: f64,
    /// `c3 < v gamma1 cos(eps)`.
    pub c3_condition: bool,
    /// All hypotheses hold for the given gains.
    pub preconditions_met: bool,
}

/// `atanh((c4 gamma3 v + c3 gamma2) / (c1 c3 gamma1 sin eps))` with the two c1 thresholds.
pub fn prop3_bound(b: &BoundParams) -> Result<Prop3Bound, AnalysisError> {
    let BoundParams { gamma1, gamma2, gamma3, v, phi_margin, gains } = *b;
    require_positive(&[("gamma1", gamma1), ("gamma2", gamma2), ("v", v), ("c1", gains.c1), ("c3", gains.c3), ("c4", gains.c4)])?;
    if !(gamma3 >= 0.0 && gamma3.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!("gamma3 must be >= 0, got {gamma3}")));
    }
    if !(phi_margin > 0.0 && phi_margin < FRAC_PI_2) {
        return Err(AnalysisError::InvalidParameter(format!(
            "phi margin must lie in (0, pi/2), got {phi_margin}"
        )));
    }
    let (c1, c3, c4) = (gains.c1, gains.c3, gains.c4);
    let (sin_e, cos_e) = phi_margin.sin_cos();
    let numerator = c4 * gamma3 * v + c3 * gamma2;
    let argument = numerator / (c1 * c3 * gamma1 * sin_e);
    let headroom = v * gamma1 * cos_e - c3;
    let c3_condition = headroom > 0.0;
    let c1_threshold_invariance = if c3_condition {
        gamma3 * v / (gamma1 * sin_e * headroom)
    } else {
        f64::INFINITY
    };
    let c1_threshold_bound = numerator / (c3 * gamma1 * sin_e);
    if argument >= 1.0 {
        return Err(AnalysisError::VacuousBound { argument });
    }
    Ok(Prop3Bound {
        bound: argument.atanh(),
        argument,
        c1_threshold_invariance,
        c1_threshold_bound,
        c3_condition,
        preconditions_met: c3_condition && c1 > c1_threshold_invariance && c1 > c1_threshold_bound,
    })
}

/// Ultimate bound `atanh(b / k)` of `z' = -k tanh z + b`.
pub fn tanh_ode_bound(k: f64, b: f64) -> Result<f64, AnalysisError> {
    if !(k > b && b > 0.0 && k.is_finite()) {
        return Err(AnalysisError::InvalidTanhSystem { k, b });
    }
    Ok((b / k).atanh())
}

/// Finite time after which the speed-regulation term has driven the speed to `v`.
pub fn speed_convergence_time(v2_initial: f64, v: f64, c5: f64) -> Result<f64, AnalysisError> {
    require_positive(&[("c5", c5)])?;
    let lyapunov = 0.5 * (v2_initial - v).powi(2);
    Ok(std::f64::consts::SQRT_2 * lyapunov.sqrt() / c5)
}

/// Linear-radial model `(alpha, r_d, source)` seen by the controller at the
/// isoline `s_d`. For an exponential field `alpha` is the gradient norm
/// `decay * s_d` at the isoline.
pub fn effective_radial_model(field: &FieldModel, s_d: f64) -> Option<(f64, f64)> {
    match field {
        FieldModel::LinearRadial(f) => {
            let r_d = f.radius + (f.level - s_d) / f.slope;
            (r_d > 0.0).then_some((f.slope, r_d))
        }
        FieldModel::CircularExp(f) => {
            let r_d = f.radius_of_level(s_d)?;
            (r_d > 0.0).then_some((f.decay * s_d, r_d))
        }
        _ => None,
    }
}

/// Everything the circular-field analysis can say about one gain set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub alpha: f64,
    pub r_d: f64,
    pub v: f64,
    pub p_conditions_ok: bool,
    pub pi_conditions_ok: bool,
    pub a: [[f64; 3]; 3],
    pub eigen_a: Vec<ComplexPair>,
    /// Finite-difference Jacobian of the polar closed loop, when `c2 > 0`.
    pub a_numeric: Option<[[f64; 3]; 3]>,
    pub eigen_a_numeric: Option<Vec<ComplexPair>>,
    pub a_tilde: [[f64; 2]; 2],
    pub eigen_a_tilde: Vec<ComplexPair>,
    pub p: [[f64; 3]; 3],
    pub q: [[f64; 3]; 3],
    pub p_positive_definite: bool,
    pub q_positive_definite: bool,
    pub lyapunov_residual: f64,
    pub mu: [f64; 4],
    pub rho: f64,
    pub delta: f64,
    pub condition_number: f64,
}

impl StabilityReport {
    pub fn compute(g: &Gains, alpha: f64, v: f64, r_d: f64, s_d: f64) -> Result<Self, AnalysisError> {
        let eq = solve_equilibrium(g, alpha, r_d, v, s_d)?;
        let a = pi_jacobian(g, alpha, v, r_d);
        let a_numeric = pi_jacobian_numeric(g, alpha, v, r_d).ok();
        let lyap = lyapunov_matrices(g, alpha, v, r_d);
        let lin = p_linearization(g, alpha, v, r_d, s_d, &eq);
        Ok(Self {
            alpha,
            r_d,
            v,
            p_conditions_ok: check_p_conditions(g, alpha, v),
            pi_conditions_ok: check_pi_conditions(g, alpha, v),
            a: rows3(&a),
            eigen_a: eigenvalues_3x3(&a).into_iter().map(pair).collect(),
            a_numeric: a_numeric.as_ref().map(rows3),
            eigen_a_numeric: a_numeric.map(|m| eigenvalues_3x3(&m).into_iter().map(pair).collect()),
            a_tilde: rows2(&lin.a_tilde),
            eigen_a_tilde: lin.eigenvalues.iter().copied().map(pair).collect(),
            p: rows3(&lyap.p),
            q: rows3(&lyap.q),
            p_positive_definite: lyap.p_positive_definite(),
            q_positive_definite: lyap.q_positive_definite(),
            lyapunov_residual: lyap.residual,
            mu: lyap.mu,
            rho: lin.rho,
            delta: lin.delta,
            condition_number: lin.condition_number,
        })
    }
}

/// Writes `key = value` lines.
pub trait KeyValues {
    fn key_values(&self) -> Vec<(String, String)>;

    fn to_key_value_text(&self) -> String {
        self.key_values()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn fmt_matrix<const N: usize>(m: &[[f64; N]; N]) -> String {
    let rows: Vec<String> = m
        .iter()
        .map(|r| r.iter().map(|x| format!("{x:.9e}")).collect::<Vec<_>>().join(" "))
        .collect();
    format!("[{}]", rows.join("; "))
}

fn fmt_complex(list: &[ComplexPair]) -> String {
    let items: Vec<String> = list.iter().map(|(re, im)| format!("{re:.9e}{im:+.9e}i")).collect();
    items.join(" ")
}

impl KeyValues for EquilibriumReport {
    fn key_values(&self) -> Vec<(String, String)> {
        vec![
            ("equilibrium.r_e".into(), format!("{:.12}", self.r_e)),
            ("equilibrium.s_e".into(), format!("{:.12}", self.s_e)),
            ("equilibrium.omega_c".into(), format!("{:.12}", self.omega_c)),
            ("equilibrium.g_residual".into(), format!("{:e}", self.g_residual)),
        ]
    }
}

impl KeyValues for StabilityReport {
    fn key_values(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("stability.alpha".into(), self.alpha.to_string()),
            ("stability.r_d".into(), format!("{:.12}", self.r_d)),
            ("stability.p_conditions_ok".into(), self.p_conditions_ok.to_string()),
            ("stability.pi_conditions_ok".into(), self.pi_conditions_ok.to_string()),
            ("stability.A".into(), fmt_matrix(&self.a)),
            ("stability.eigen_A".into(), fmt_complex(&self.eigen_a)),
        ];
        if let (Some(a), Some(e)) = (&self.a_numeric, &self.eigen_a_numeric) {
            out.push(("stability.A_numeric".into(), fmt_matrix(a)));
            out.push(("stability.eigen_A_numeric".into(), fmt_complex(e)));
        }
        out.extend([
            ("stability.A_tilde".into(), fmt_matrix(&self.a_tilde)),
            ("stability.eigen_A_tilde".into(), fmt_complex(&self.eigen_a_tilde)),
            ("stability.P".into(), fmt_matrix(&self.p)),
            ("stability.Q".into(), fmt_matrix(&self.q)),
            ("stability.P_positive_definite".into(), self.p_positive_definite.to_string()),
            ("stability.Q_positive_definite".into(), self.q_positive_definite.to_string()),
            ("stability.lyapunov_residual".into(), format!("{:e}", self.lyapunov_residual)),
            ("stability.mu".into(), format!("{:?}", self.mu)),
            ("stability.rho".into(), format!("{:.9}", self.rho)),
            ("stability.delta".into(), format!("{:.9}", self.delta)),
            ("stability.condition_number".into(), format!("{:.6}", self.condition_number)),
        ]);
        out
    }
}

impl KeyValues for Prop3Bound {
    fn key_values(&self) -> Vec<(String, String)> {
        vec![
            ("bound.value".into(), format!("{:.9}", self.bound)),
            ("bound.argument".into(), format!("{:.9}", self.argument)),
            ("bound.c1_threshold_invariance".into(), format!("{:.6}", self.c1_threshold_invariance)),
            ("bound.c1_threshold_bound".into(), format!("{:.6}", self.c1_threshold_bound)),
            ("bound.c3_condition".into(), self.c3_condition.to_string()),
            ("bound.preconditions_met".into(), self.preconditions_met.to_string()),
        ]
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_key_value_text())
    }
}
