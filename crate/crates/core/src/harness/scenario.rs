//! TOML scenario files.
//!
//! ```toml
//! name = "circular-pi"
//! vehicle = "dubins"          # dubins | single-integrator | double-integrator
//! v = 0.5
//! s_d = 20.0
//! duration = 400.0
//! dt = 0.01                   # optional, default 0.01
//! sdot_mode = "measured"      # optional: oracle | measured
//!
//! [gains]
//! c1 = 10.0
//! c2 = 1.0
//! c3 = 0.3
//! c4 = 1.0
//!
//! [field]
//! kind = "circular-exp"
//! intensity = 30.0
//! decay = 0.1
//! source = { x = 5.0, y = 5.0 }
//!
//! [[initial]]
//! x = 15.0
//! y = -5.0
//! theta = 1.885
//! ```

use std::f64::consts::FRAC_PI_4;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controllers::{Gains, SdotMode, SignMode};
use crate::fields::{
    CircularExpField, FieldModel, GaussianComponent, GridField, LinearRadialField, MultiGaussianField,
    Position2, Rect,
};
use crate::harness::HarnessError;
use crate::sim::{ControlTiming, InitialState, Parameter, SimConfig, VehicleKind, DEFAULT_SETTLE_THRESHOLD};

fn default_dt() -> f64 {
    0.01
}

fn default_record_every() -> usize {
    1
}

fn default_settle() -> f64 {
    DEFAULT_SETTLE_THRESHOLD
}

fn default_step() -> f64 {
    0.5
}

fn default_margin() -> f64 {
    FRAC_PI_4
}

fn is_default<T: Default + PartialEq>(x: &T) -> bool {
    *x == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    CircularExp { intensity: f64, decay: f64, source: Position2 },
    LinearRadial { level: f64, slope: f64, radius: f64, source: Position2 },
    /// Without components this is the three-peak benchmark field.
    MultiGaussian {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        components: Vec<GaussianComponent>,
    },
    /// Relative paths resolve against the scenario file's directory.
    Grid { path: PathBuf },
}

impl FieldSpec {
    pub fn build(&self, base_dir: &Path) -> Result<FieldModel, HarnessError> {
        let invalid = |e: crate::fields::FieldError| HarnessError::Invalid { path: "field".into(), line: None, message: e.to_string() };
        Ok(match self {
            Self::CircularExp { intensity, decay, source } => {
                CircularExpField::new(*intensity, *decay, *source).map_err(invalid)?.into()
            }
            Self::LinearRadial { level, slope, radius, source } => {
                LinearRadialField::new(*level, *slope, *radius, *source).map_err(invalid)?.into()
            }
            Self::MultiGaussian { components } if components.is_empty() => MultiGaussianField::benchmark().into(),
            Self::MultiGaussian { components } => MultiGaussianField::new(components.clone()).map_err(invalid)?.into(),
            Self::Grid { path } => {
                let full = if path.is_relative() { base_dir.join(path) } else { path.clone() };
                GridField::load(&full)
                    .map_err(|e| HarnessError::Invalid {
                        path: "field.path".into(),
                        line: None,
                        message: format!("{}: {e}", full.display()),
                    })?
                    .into()
            }
        })
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, Self::Grid { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: Parameter,
    pub values: Vec<f64>,
}

/// Region for the gradient and Hessian bounds used by the smooth-field error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    /// `[x_min, y_min, x_max, y_max]`.
    pub region: [f64; 4],
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_margin")]
    pub phi_margin: f64,
}

impl BoundsSpec {
    pub fn rect(&self) -> Rect {
        let [a, b, c, d] = self.region;
        Rect::new(a, b, c, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub vehicle: VehicleKind,
    pub v: f64,
    pub s_d: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub sdot_mode: SdotMode,
    #[serde(default, skip_serializing_if = "is_default")]
    pub timing: ControlTiming,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_limit: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_settle")]
    pub settle_threshold: f64,
    pub gains: Gains,
    #[serde(default, skip_serializing_if = "is_default")]
    pub sign: SignMode,
    pub field: FieldSpec,
    pub initial: Vec<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn line_of_span(text: &str, span: Option<Range<usize>>) -> Option<usize> {
    span.map(|s| line_of(text, s.start))
}

/// Line of the first `key = ...` assignment for the last path segment, if present.
fn line_of_key(text: &str, path: &str) -> Option<usize> {
    let key = path.rsplit('.').next()?;
    let key = key.split('[').next()?;
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, HarnessError> {
    let de = toml::Deserializer::parse(text).map_err(|e| HarnessError::Parse {
        path: String::new(),
        line: line_of_span(text, e.span()),
        message: e.message().to_string(),
    })?;
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        HarnessError::Parse {
            line: line_of_span(text, inner.span()),
            path: if path == "." { String::new() } else { path },
            message: inner.message().to_string(),
        }
    })?;
    scenario.validate().map_err(|e| match e {
        HarnessError::Invalid { path, line: None, message } => {
            let line = line_of_key(text, &path);
            HarnessError::Invalid { path, line, message }
        }
        other => other,
    })?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

impl Scenario {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |path: &str, message: String| Err(HarnessError::Invalid { path: path.into(), line: None, message });
        let positive = [("v", self.v), ("dt", self.dt), ("settle_threshold", self.settle_threshold)];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return fail(key, format!("must be > 0, got {value}"));
            }
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return fail("duration", format!("must be >= 0, got {}", self.duration));
        }
        if self.duration > 0.0 && self.dt > self.duration {
            return fail("dt", format!("dt = {} exceeds duration = {}", self.dt, self.duration));
        }
        if !self.s_d.is_finite() {
            return fail("s_d", "must be finite".into());
        }
        if self.record_every == 0 {
            return fail("record_every", "must be >= 1".into());
        }
        if self.initial.is_empty() {
            return fail("initial", "at least one initial state is required".into());
        }
        if let Err(e) = self.gains.validate() {
            return fail("gains", e.to_string());
        }
        if self.timing == ControlTiming::Continuous && self.sdot_mode != SdotMode::Oracle {
            return fail("timing", "continuous timing requires sdot_mode = \"oracle\"".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return fail("sweep.values", "sweep needs at least one value".into());
            }
        }
        if let Some(b) = &self.bounds {
            let [a, c, d, e] = b.region;
            if !(a < d && c < e) {
                return fail("bounds.region", "expected [x_min, y_min, x_max, y_max] with min < max".into());
            }
            if !(b.step > 0.0 && b.step.is_finite()) {
                return fail("bounds.step", format!("must be > 0, got {}", b.step));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Io(e.to_string()))
    }

    /// One simulation config per initial state.
    pub fn sim_configs(&self, base_dir: &Path) -> Result<Vec<SimConfig>, HarnessError> {
        let field = self.field.build(base_dir)?;
        Ok(self
            .initial
            .iter()
            .map(|init| {
                let mut cfg = SimConfig::new(field.clone(), self.vehicle, self.gains, self.v, self.s_d, *init);
                cfg.dt = self.dt;
                cfg.duration = self.duration;
                cfg.sdot_mode = self.sdot_mode;
                cfg.timing = self.timing;
                cfg.sign_mode = self.sign;
                cfg.sigma_limit = self.sigma_limit;
                cfg.record_every = self.record_every;
                cfg
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BASELINE: &str = r#"
name = "circular-pi"
vehicle = "dubins"
v = 0.5
s_d = 20.0
duration = 400.0

[gains]
c1 = 10.0
c2 = 1.0
c3 = 0.3
c4 = 1.0

[field]
kind = "circular-exp"
intensity = 30.0
decay = 0.1
source = { x = 5.0, y = 5.0 }

[[initial]]
x = 15.0
y = -5.0
theta = 1.8849555921538759
"#;

    #[test]
    fn minimal_scenario_echoes_gains_and_defaults() {
        let s = parse_scenario(BASELINE).unwrap();
        assert_eq!(s.gains, Gains::circular_pi());
        assert_eq!(s.dt, 0.01);
        assert_eq!(s.sdot_mode, SdotMode::Measured);
        assert_eq!(s.initial.len(), 1);
        assert!(s.sweep.is_none());
    }

    #[test]
    fn missing_key_is_named() {
        let text = BASELINE.replace("s_d = 20.0\n", "");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("s_d"), "{err}");
    }

    #[test]
    fn unknown_key_reports_path_and_line() {
        let text = BASELINE.replace("c4 = 1.0", "c4 = 1.0\nc9 = 2.0");
        match parse_scenario(&text).unwrap_err() {
            HarnessError::Parse { path, line, message } => {
                assert!(path.starts_with("gains"), "{path}");
                assert!(message.contains("c9"), "{message}");
                assert_eq!(line, Some(13));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_value_reports_line() {
        let text = BASELINE.replace("v = 0.5", "v = -0.5");
        match parse_scenario(&text).unwrap_err() {
            HarnessError::Invalid { path, line, .. } => {
                assert_eq!(path, "v");
                assert_eq!(line, Some(4));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_initial_list_is_rejected() {
        let cut = BASELINE.find("[[initial]]").unwrap();
        let text = format!("{}initial = []\n", &BASELINE[..cut]);
        assert!(parse_scenario(&text).is_err());
    }

    #[test]
    fn sweep_spec_parses() {
        let text = format!("{BASELINE}\n[sweep]\nparameter = \"c1\"\nvalues = [1.0, 5.0, 10.0, 30.0, 50.0]\n");
        let s = parse_scenario(&text).unwrap();
        let sweep = s.sweep.unwrap();
        assert_eq!(sweep.parameter, Parameter::C1);
        assert_eq!(sweep.values.len(), 5);
    }

    #[test]
    fn round_trip_is_identity() {
        let text = format!(
            "{BASELINE}\n[sweep]\nparameter = \"dt\"\nvalues = [0.01, 0.02]\n\n[bounds]\nregion = [-5.0, -5.0, 5.0, 5.0]\n"
        );
        let s = parse_scenario(&text).unwrap();
        let again = parse_scenario(&s.to_toml().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn malformed_toml_reports_line() {
        let text = BASELINE.replace("duration = 400.0", "duration = = 400.0");
        match parse_scenario(&text).unwrap_err() {
            HarnessError::Parse { line, .. } => assert_eq!(line, Some(6)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn configs_follow_initial_states() {
        let s = parse_scenario(BASELINE).unwrap();
        let cfgs = s.sim_configs(Path::new(".")).unwrap();
        assert_eq!(cfgs.len(), 1);
        assert_eq!(cfgs[0].duration, 400.0);
        assert_eq!(cfgs[0].initial.x, 15.0);
    }
}
