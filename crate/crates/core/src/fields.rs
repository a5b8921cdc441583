//! Scalar field models.
//!
//! Every field exposes its value, gradient and Hessian at a point. Analytic
//! fields evaluate closed forms; [`GridField`] interpolates sampled data
//! bilinearly and differentiates the interpolant numerically.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gradient norms below this value are treated as stationary points.
pub const STATIONARY_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("point ({x}, {y}) lies outside the grid domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("field is not differentiable at its source ({x}, {y})")]
    AtSource { x: f64, y: f64 },
    #[error("stationary point near ({x}, {y}): gradient norm {norm:e}")]
    Stationary { x: f64, y: f64, norm: f64 },
    #[error("logarithm of non-positive concentration {value} at ({x}, {y})")]
    NonPositive { x: f64, y: f64, value: f64 },
    #[error("invalid field parameter: {0}")]
    Invalid(String),
    #[error("grid file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read grid file: {0}")]
    Io(String),
}

/// A point in the plane, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position2 {
    pub x: f64,
    pub y: f64,
}

impl Position2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn distance(self, other: Position2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn offset(self, d: Vector2<f64>) -> Self {
        Self::new(self.x + d.x, self.y + d.y)
    }
}

impl From<Vector2<f64>> for Position2 {
    fn from(v: Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }
}

impl fmt::Display for Position2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Position2,
    pub max: Position2,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            min: Position2::new(x_min, y_min),
            max: Position2::new(x_max, y_max),
        }
    }

    pub fn contains(&self, p: Position2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Samples on a lattice with the given step, always including both edges.
    pub fn lattice(&self, step: f64) -> Vec<Position2> {
        let axis = |lo: f64, hi: f64| -> Vec<f64> {
            let n = ((hi - lo) / step).ceil().max(0.0) as usize;
            (0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect()
        };
        let xs = axis(self.min.x, self.max.x);
        let ys = axis(self.min.y, self.max.y);
        ys.iter()
            .flat_map(|&y| xs.iter().map(move |&x| Position2::new(x, y)))
            .collect()
    }
}

/// Common interface of all field models.
pub trait ScalarField {
    fn value(&self, p: Position2) -> Result<f64, FieldError>;
    fn gradient(&self, p: Position2) -> Result<Vector2<f64>, FieldError>;
    fn hessian(&self, p: Position2) -> Result<Matrix2<f64>, FieldError>;

    /// Source of a radially symmetric field.
    fn source(&self) -> Option<Position2> {
        None
    }
}

/// `I0 * exp(-alpha * |p - p_o|)`, e.g. an acoustic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularExpField {
    pub intensity: f64,
    pub decay: f64,
    pub source: Position2,
}

impl CircularExpField {
    pub fn new(intensity: f64, decay: f64, source: Position2) -> Result<Self, FieldError> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(FieldError::Invalid(format!("intensity must be > 0, got {intensity}")));
        }
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(FieldError::Invalid(format!("decay must be > 0, got {decay}")));
        }
        if !source.is_finite() {
            return Err(FieldError::Invalid("source must be finite".into()));
        }
        Ok(Self { intensity, decay, source })
    }

    /// Distance from the source at which the field equals `level`.
    pub fn radius_of_level(&self, level: f64) -> Option<f64> {
        (level > 0.0 && level <= self.intensity).then(|| (self.intensity / level).ln() / self.decay)
    }
}

/// `s_d - alpha * (|p - p_o| - r_d)`: a field that is linear in the distance to the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRadialField {
    pub level: f64,
    pub slope: f64,
    pub radius: f64,
    pub source: Position2,
}

impl LinearRadialField {
    pub fn new(level: f64, slope: f64, radius: f64, source: Position2) -> Result<Self, FieldError> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(FieldError::Invalid(format!("slope must be > 0, got {slope}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(FieldError::Invalid(format!("radius must be > 0, got {radius}")));
        }
        if !level.is_finite() || !source.is_finite() {
            return Err(FieldError::Invalid("level and source must be finite".into()));
        }
        Ok(Self { level, slope, radius, source })
    }
}

/// One term `amplitude * exp(-|p - center|^2 / spread)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub amplitude: f64,
    pub center: Position2,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiGaussianField {
    components: Vec<GaussianComponent>,
}

impl MultiGaussianField {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self, FieldError> {
        if components.is_empty() {
            return Err(FieldError::Invalid("at least one Gaussian component is required".into()));
        }
        for c in &components {
            if !(c.spread > 0.0 && c.spread.is_finite()) {
                return Err(FieldError::Invalid(format!("spread must be > 0, got {}", c.spread)));
            }
            if !c.amplitude.is_finite() || !c.center.is_finite() {
                return Err(FieldError::Invalid("component parameters must be finite".into()));
            }
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    /// The three-bump benchmark field used for the smooth-field studies.
    pub fn benchmark() -> Self {
        Self::new(vec![
            GaussianComponent { amplitude: 20.0, center: Position2::new(20.0, 20.0), spread: 600.0 },
            GaussianComponent { amplitude: 30.0, center: Position2::new(-30.0, -20.0), spread: 400.0 },
            GaussianComponent { amplitude: 10.0, center: Position2::new(-20.0, 30.0), spread: 800.0 },
        ])
        .expect("benchmark parameters are valid")
    }
}

/// Sampled field on a regular lattice, bilinearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    origin: Position2,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    /// Row-major with y as the slow index: `values[j * nx + i]`.
    values: Vec<f64>,
}

impl GridField {
    pub fn new(
        origin: Position2,
        dx: f64,
        dy: f64,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
    ) -> Result<Self, FieldError> {
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(FieldError::Invalid(format!("grid spacing must be > 0, got ({dx}, {dy})")));
        }
        if nx < 2 || ny < 2 {
            return Err(FieldError::Invalid(format!("grid needs at least 2x2 nodes, got {nx}x{ny}")));
        }
        if values.len() != nx * ny {
            return Err(FieldError::Invalid(format!(
                "expected {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(FieldError::Invalid(format!("non-finite grid value {v}")));
        }
        if !origin.is_finite() {
            return Err(FieldError::Invalid("grid origin must be finite".into()));
        }
        Ok(Self { origin, dx, dy, nx, ny, values })
    }

    /// Samples `f` at every node of the lattice.
    pub fn from_fn(
        origin: Position2,
        dx: f64,
        dy: f64,
        nx: usize,
        ny: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, FieldError> {
        let values = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .map(|(i, j)| f(origin.x + i as f64 * dx, origin.y + j as f64 * dy))
            .collect();
        Self::new(origin, dx, dy, nx, ny, values)
    }

    pub fn domain(&self) -> Rect {
        Rect {
            min: self.origin,
            max: Position2::new(
                self.origin.x + (self.nx - 1) as f64 * self.dx,
                self.origin.y + (self.ny - 1) as f64 * self.dy,
            ),
        }
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.dx, self.dy)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FieldError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| FieldError::Io(format!("{}: {e}", path.as_ref().display())))?;
        text.parse()
    }

    /// Serializes in the same format [`FromStr`] accepts.
    pub fn to_file_string(&self) -> String {
        let mut out = format!(
            "{},{},{},{},{},{}\n",
            self.origin.x, self.origin.y, self.dx, self.dy, self.nx, self.ny
        );
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn node(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    fn interpolate(&self, p: Position2) -> Result<f64, FieldError> {
        if !p.is_finite() || !self.domain().contains(p) {
            return Err(FieldError::OutOfDomain { x: p.x, y: p.y });
        }
        let fx = (p.x - self.origin.x) / self.dx;
        let fy = (p.y - self.origin.y) / self.dy;
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let bottom = self.node(i, j) * (1.0 - tx) + self.node(i + 1, j) * tx;
        let top = self.node(i, j + 1) * (1.0 - tx) + self.node(i + 1, j + 1) * tx;
        Ok(bottom * (1.0 - ty) + top * ty)
    }

    /// Stencil half-width and centre along one axis, shifted inward near edges.
    fn stencil(coord: f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
        let h = step.min(0.5 * (hi - lo));
        (coord.clamp(lo + h, hi - h), h)
    }
}

impl FromStr for GridField {
    type Err = FieldError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (hline, header) = lines
            .next()
            .ok_or(FieldError::Parse { line: 1, message: "missing header".into() })?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(FieldError::Parse {
                line: hline,
                message: format!("header must be x0,y0,dx,dy,nx,ny (got {} fields)", fields.len()),
            });
        }
        let float = |s: &str, name: &str| -> Result<f64, FieldError> {
            s.parse::<f64>().map_err(|_| FieldError::Parse {
                line: hline,
                message: format!("invalid {name} `{s}`"),
            })
        };
        let count = |s: &str, name: &str| -> Result<usize, FieldError> {
            s.parse::<usize>().map_err(|_| FieldError::Parse {
                line: hline,
                message: format!("invalid {name} `{s}`"),
            })
        };
        let x0 = float(fields[0], "x0")?;
        let y0 = float(fields[1], "y0")?;
        let dx = float(fields[2], "dx")?;
        let dy = float(fields[3], "dy")?;
        let nx = count(fields[4], "nx")?;
        let ny = count(fields[5], "ny")?;
        if !(dx > 0.0 && dy > 0.0) || nx < 2 || ny < 2 {
            return Err(FieldError::Parse {
                line: hline,
                message: "spacing must be > 0 and dims >= 2".into(),
            });
        }

        let mut values = Vec::with_capacity(nx * ny);
        let mut rows = 0;
        for (line, content) in lines {
            if content.is_empty() {
                continue;
            }
            if rows == ny {
                return Err(FieldError::Parse { line, message: format!("more than {ny} data rows") });
            }
            let row: Vec<&str> = content.split(',').map(str::trim).collect();
            if row.len() != nx {
                return Err(FieldError::Parse {
                    line,
                    message: format!("expected {nx} values, found {}", row.len()),
                });
            }
            for s in row {
                let v: f64 = s.parse().map_err(|_| FieldError::Parse {
                    line,
                    message: format!("invalid value `{s}`"),
                })?;
                if !v.is_finite() {
                    return Err(FieldError::Parse { line, message: format!("non-finite value `{s}`") });
                }
                values.push(v);
            }
            rows += 1;
        }
        if rows != ny {
            return Err(FieldError::Parse {
                line: text.lines().count().max(1),
                message: format!("expected {ny} data rows, found {rows}"),
            });
        }
        GridField::new(Position2::new(x0, y0), dx, dy, nx, ny, values)
    }
}

/// `ln F(p)` of an inner field, the logarithmic reduction of exponential fields.
#[derive(Debug, Clone, PartialEq)]
pub struct LogField {
    inner: Box<FieldModel>,
}

impl LogField {
    pub fn inner(&self) -> &FieldModel {
        &self.inner
    }
}

pub fn log_of(field: FieldModel) -> FieldModel {
    FieldModel::Log(LogField { inner: Box::new(field) })
}

/// Any field the simulator can run on.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    CircularExp(CircularExpField),
    LinearRadial(LinearRadialField),
    MultiGaussian(MultiGaussianField),
    Grid(GridField),
    Log(LogField),
}

impl From<CircularExpField> for FieldModel {
    fn from(f: CircularExpField) -> Self {
        Self::CircularExp(f)
    }
}

impl From<LinearRadialField> for FieldModel {
    fn from(f: LinearRadialField) -> Self {
        Self::LinearRadial(f)
    }
}

impl From<MultiGaussianField> for FieldModel {
    fn from(f: MultiGaussianField) -> Self {
        Self::MultiGaussian(f)
    }
}

impl From<GridField> for FieldModel {
    fn from(f: GridField) -> Self {
        Self::Grid(f)
    }
}

/// Unit vector from `source` to `p` and the distance, rejecting the source itself.
fn radial(p: Position2, source: Position2) -> Result<(Vector2<f64>, f64), FieldError> {
    let d = p.to_vector() - source.to_vector();
    let r = d.norm();
    if r == 0.0 {
        return Err(FieldError::AtSource { x: p.x, y: p.y });
    }
    Ok((d / r, r))
}

/// Hessian of a radial profile f(r) given f'(r) and f''(r).
fn radial_hessian(u: Vector2<f64>, r: f64, df: f64, d2f: f64) -> Matrix2<f64> {
    let uu = u * u.transpose();
    uu * d2f + (Matrix2::identity() - uu) * (df / r)
}

impl ScalarField for CircularExpField {
    fn value(&self, p: Position2) -> Result<f64, FieldError> {
        Ok(self.intensity * (-self.decay * p.distance(self.source)).exp())
    }

    fn gradient(&self, p: Position2) -> Result<Vector2<f64>, FieldError> {
        let (u, r) = radial(p, self.source)?;
        let f = self.intensity * (-self.decay * r).exp();
        Ok(u * (-self.decay * f))
    }

    fn hessian(&self, p: Position2) -> Result<Matrix2<f64>, FieldError> {
        let (u, r) = radial(p, self.source)?;
        let f = self.intensity * (-self.decay * r).exp();
        Ok(radial_hessian(u, r, -self.decay * f, self.decay * self.decay * f))
    }

    fn source(&self) -> Option<Position2> {
        Some(self.source)
    }
}

impl ScalarField for LinearRadialField {
    fn value(&self, p: Position2) -> Result<f64, FieldError> {
        Ok(self.level - self.slope * (p.distance(self.source) - self.radius))
    }

    fn gradient(&self, p: Position2) -> Result<Vector2<f64>, FieldError> {
        let (u, _) = radial(p, self.source)?;
        Ok(u * -self.slope)
    }

    fn hessian(&self, p: Position2) -> Result<Matrix2<f64>, FieldError> {
        let (u, r) = radial(p, self.source)?;
        Ok(radial_hessian(u, r, -self.slope, 0.0))
    }

    fn source(&self) -> Option<Position2> {
        Some(self.source)
    }
}

impl ScalarField for MultiGaussianField {
    fn value(&self, p: Position2) -> Result<f64, FieldError> {
        Ok(self
            .components
            .iter()
            .map(|c| {
                let d = p.to_vector() - c.center.to_vector();
                c.amplitude * (-d.norm_squared() / c.spread).exp()
            })
            .sum())
    }

    fn gradient(&self, p: Position2) -> Result<Vector2<f64>, FieldError> {
        Ok(self.components.iter().fold(Vector2::zeros(), |acc, c| {
            let d = p.to_vector() - c.center.to_vector();
            let g = c.amplitude * (-d.norm_squared() / c.spread).exp();
            acc + d * (-2.0 * g / c.spread)
        }))
    }

    fn hessian(&self, p: Position2) -> Result<Matrix2<f64>, FieldError> {
        Ok(self.components.iter().fold(Matrix2::zeros(), |acc, c| {
            let d = p.to_vector() - c.center.to_vector();
            let g = c.amplitude * (-d.norm_squared() / c.spread).exp();
            let s = c.spread;
            acc + (d * d.transpose() * (4.0 / (s * s)) - Matrix2::identity() * (2.0 / s)) * g
        }))
    }
}

impl ScalarField for GridField {
    fn value(&self, p: Position2) -> Result<f64, FieldError> {
        self.interpolate(p)
    }

    fn gradient(&self, p: Position2) -> Result<Vector2<f64>, FieldError> {
        let dom = self.domain();
        if !dom.contains(p) {
            return Err(FieldError::OutOfDomain { x: p.x, y: p.y });
        }
        let (cx, hx) = Self::stencil(p.x, dom.min.x, dom.max.x, self.dx);
        let (cy, hy) = Self::stencil(p.y, dom.min.y, dom.max.y, self.dy);
        let gx = (self.interpolate(Position2::new(cx + hx, p.y))?
            - self.interpolate(Position2::new(cx - hx, p.y))?)
            / (2.0 * hx);
        let gy = (self.interpolate(Position2::new(p.x, cy + hy))?
            - self.interpolate(Position2::new(p.x, cy - hy))?)
            / (2.0 * hy);
        Ok(Vector2::new(gx, gy))
    }

    fn hessian(&self, p: Position2) -> Result<Matrix2<f64>, FieldError> {
        let dom = self.domain();
        if !dom.contains(p) {
            return Err(FieldError::OutOfDomain { x: p.x, y: p.y });
        }
        let (cx, hx) = Self::stencil(p.x, dom.min.x, dom.max.x, self.dx);
        let (cy, hy) = Self::stencil(p.y, dom.min.y, dom.max.y, self.dy);
        let f = |x: f64, y: f64| self.interpolate(Position2::new(x, y));
        let fxx = (f(cx + hx, p.y)? - 2.0 * f(cx, p.y)? + f(cx - hx, p.y)?) / (hx * hx);
        let fyy = (f(p.x, cy + hy)? - 2.0 * f(p.x, cy)? + f(p.x, cy - hy)?) / (hy * hy);
        let fxy = (f(cx + hx, cy + hy)? - f(cx + hx, cy - hy)? - f(cx - hx, cy + hy)?
            + f(cx - hx, cy - hy)?)
            / (4.0 * hx * hy);
        Ok(Matrix2::new(fxx, fxy, fxy, fyy))
    }
}

impl ScalarField for LogField {
    fn value(&self, p: Position2) -> Result<f64, FieldError> {
        let v = self.inner.value(p)?;
        if v <= 0.0 {
            return Err(FieldError::NonPositive { x: p.x, y: p.y, value: v });
        }
        Ok(v.ln())
    }

    fn gradient(&self, p: Position2) -> Result<Vector2<f64>, FieldError> {
        let v = self.value(p)?.exp();
        Ok(self.inner.gradient(p)? / v)
    }

    fn hessian(&self, p: Position2) -> Result<Matrix2<f64>, FieldError> {
        let v = self.value(p)?.exp();
        let g = self.inner.gradient(p)?;
        Ok(self.inner.hessian(p)? / v - g * g.transpose() / (v * v))
    }

    fn source(&self) -> Option<Position2> {
        self.inner.source()
    }
}

impl ScalarField for FieldModel {
    fn value(&self, p: Position2) -> Result<f64, FieldError> {
        match self {
            Self::CircularExp(f) => f.value(p),
            Self::LinearRadial(f) => f.value(p),
            Self::MultiGaussian(f) => f.value(p),
            Self::Grid(f) => f.value(p),
            Self::Log(f) => f.value(p),
        }
    }

    fn gradient(&self, p: Position2) -> Result<Vector2<f64>, FieldError> {
        match self {
            Self::CircularExp(f) => f.gradient(p),
            Self::LinearRadial(f) => f.gradient(p),
            Self::MultiGaussian(f) => f.gradient(p),
            Self::Grid(f) => f.gradient(p),
            Self::Log(f) => f.gradient(p),
        }
    }

    fn hessian(&self, p: Position2) -> Result<Matrix2<f64>, FieldError> {
        match self {
            Self::CircularExp(f) => f.hessian(p),
            Self::LinearRadial(f) => f.hessian(p),
            Self::MultiGaussian(f) => f.hessian(p),
            Self::Grid(f) => f.hessian(p),
            Self::Log(f) => f.hessian(p),
        }
    }

    fn source(&self) -> Option<Position2> {
        match self {
            Self::CircularExp(f) => f.source(),
            Self::LinearRadial(f) => f.source(),
            Self::MultiGaussian(_) | Self::Grid(_) => None,
            Self::Log(f) => f.source(),
        }
    }
}

/// Spectral norm of a symmetric 2x2 matrix.
pub fn symmetric_norm(h: &Matrix2<f64>) -> f64 {
    let mean = 0.5 * (h[(0, 0)] + h[(1, 1)]);
    let half_diff = 0.5 * (h[(0, 0)] - h[(1, 1)]);
    let radius = half_diff.hypot(h[(0, 1)]);
    mean.abs() + radius
}

/// Sampled gradient and Hessian bounds over a compact set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldBounds {
    pub grad_min: f64,
    pub grad_max: f64,
    pub hess_max: f64,
    /// Bounding box of the samples used.
    pub region: Rect,
    pub samples: usize,
}

/// Bounds over a rectangular lattice with spacing `step`.
///
/// The estimates are exact on the lattice only; between samples the true
/// extrema may lie slightly outside `[grad_min, grad_max]`. No safety factor
/// is applied.
pub fn estimate_bounds<F: ScalarField + ?Sized>(
    field: &F,
    region: Rect,
    step: f64,
) -> Result<FieldBounds, FieldError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(FieldError::Invalid(format!("bounds step must be > 0, got {step}")));
    }
    if !(region.min.x <= region.max.x && region.min.y <= region.max.y)
        || !region.min.is_finite()
        || !region.max.is_finite()
    {
        return Err(FieldError::Invalid("bounds region must be a finite rectangle".into()));
    }
    estimate_bounds_at(field, &region.lattice(step))
}

/// Bounds over an arbitrary finite sample set, e.g. the points a vehicle visited.
pub fn estimate_bounds_at<F: ScalarField + ?Sized>(
    field: &F,
    points: &[Position2],
) -> Result<FieldBounds, FieldError> {
    let first = points
        .first()
        .ok_or_else(|| FieldError::Invalid("no sample points".into()))?;
    let mut grad_min = f64::INFINITY;
    let mut grad_max = 0.0_f64;
    let mut hess_max = 0.0_f64;
    let mut region = Rect { min: *first, max: *first };
    for &p in points {
        let g = match field.gradient(p) {
            Ok(g) => g,
            Err(FieldError::AtSource { x, y }) => {
                return Err(FieldError::Stationary { x, y, norm: 0.0 })
            }
            Err(e) => return Err(e),
        };
        let norm = g.norm();
        if norm < STATIONARY_THRESHOLD {
            return Err(FieldError::Stationary { x: p.x, y: p.y, norm });
        }
        grad_min = grad_min.min(norm);
        grad_max = grad_max.max(norm);
        hess_max = hess_max.max(symmetric_norm(&field.hessian(p)?));
        region.min.x = region.min.x.min(p.x);
        region.min.y = region.min.y.min(p.y);
        region.max.x = region.max.x.max(p.x);
        region.max.y = region.max.y.max(p.y);
    }
    Ok(FieldBounds { grad_min, grad_max, hess_max, region, samples: points.len() })
}
