use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sim::metrics::{compute_metrics, Metrics};
use crate::sim::simulate::{run_simulation, SimConfig, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    C1,
    C2,
    C3,
    C4,
    C5,
    V,
    Dt,
}

impl Parameter {
    pub fn apply(self, cfg: &mut SimConfig, value: f64) {
        match self {
            Self::C1 => cfg.gains.c1 = value,
            Self::C2 => cfg.gains.c2 = value,
            Self::C3 => cfg.gains.c3 = value,
            Self::C4 => cfg.gains.c4 = value,
            Self::C5 => cfg.gains.c5 = value,
            Self::V => cfg.v = value,
            Self::Dt => cfg.dt = value,
        }
    }
}

impl FromStr for Parameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "c1" => Self::C1,
            "c2" => Self::C2,
            "c3" => Self::C3,
            "c4" => Self::C4,
            "c5" => Self::C5,
            "v" => Self::V,
            "dt" => Self::Dt,
            other => return Err(format!("unknown sweep parameter '{other}'")),
        })
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::C1 => "c1",
            Self::C2 => "c2",
            Self::C3 => "c3",
            Self::C4 => "c4",
            Self::C5 => "c5",
            Self::V => "v",
            Self::Dt => "dt",
        })
    }
}

/// Independent runs over `values`, executed in parallel; output order follows `values`.
/// Sweep values paired with their run outcome, in input order.
pub type SweepResults = Vec<(f64, Result<Metrics, SimError>)>;

pub fn parameter_sweep(
    base: &SimConfig,
    parameter: Parameter,
    values: &[f64],
    settle_threshold: f64,
) -> SweepResults {
    values
        .par_iter()
        .map(|&value| {
            let mut cfg = base.clone();
            parameter.apply(&mut cfg, value);
            let metrics = run_simulation(&cfg).and_then(|t| compute_metrics(&t, &cfg.gains, settle_threshold));
            (value, metrics)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{Gains, SdotMode};
    use crate::fields::{CircularExpField, Position2};
    use crate::sim::simulate::{InitialState, VehicleKind};

    fn base() -> SimConfig {
        let field = CircularExpField::new(30.0, 0.1, Position2::new(5.0, 5.0)).unwrap().into();
        let mut cfg = SimConfig::new(field, VehicleKind::Dubins, Gains::circular_pi(), 0.5, 20.0, InitialState::new(15.0, -5.0, 0.0));
        cfg.duration = 20.0;
        cfg.sdot_mode = SdotMode::Oracle;
        cfg
    }

    #[test]
    fn single_value_equals_direct_run() {
        let cfg = base();
        let out = parameter_sweep(&cfg, Parameter::C1, &[10.0], 0.05);
        let direct = compute_metrics(&run_simulation(&cfg).unwrap(), &cfg.gains, 0.05).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1.as_ref().unwrap(), &direct);
    }

    #[test]
    fn order_is_stable_and_errors_are_per_run() {
        let out = parameter_sweep(&base(), Parameter::Dt, &[0.05, -1.0, 0.02], 0.05);
        assert_eq!(out.iter().map(|o| o.0).collect::<Vec<_>>(), vec![0.05, -1.0, 0.02]);
        assert!(out[0].1.is_ok() && out[1].1.is_err() && out[2].1.is_ok());
    }

    #[test]
    fn parameter_names_round_trip() {
        for p in ["c1", "c2", "c3", "c4", "c5", "v", "dt"] {
            assert_eq!(p.parse::<Parameter>().unwrap().to_string(), p);
        }
        assert!("c6".parse::<Parameter>().is_err());
    }
}
