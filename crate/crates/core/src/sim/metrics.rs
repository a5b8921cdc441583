use serde::{Deserialize, Serialize};

use crate::controllers::Gains;
use crate::sim::simulate::{SimError, Trajectory};

pub const DEFAULT_SETTLE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean `|eps|` over the final 10% of samples.
    pub steady_state_error: f64,
    /// Mean concentration over the same window.
    pub steady_state_concentration: f64,
    /// First time after which `|eps|` stays below the threshold.
    pub settling_time: Option<f64>,
    pub final_sigma_times_c2: f64,
    pub final_abs_error: f64,
    pub min_speed_deviation: f64,
    pub max_speed_deviation: f64,
}

pub fn compute_metrics(traj: &Trajectory, g: &Gains, settle_threshold: f64) -> Result<Metrics, SimError> {
    let recs = &traj.records;
    let last = recs.last().ok_or(SimError::EmptyTrajectory)?;
    let n = recs.len();
    let window = &recs[n - (n / 10).max(1)..];
    let w = window.len() as f64;
    let steady_state_error = window.iter().map(|r| r.eps.abs()).sum::<f64>() / w;
    let steady_state_concentration = window.iter().map(|r| r.s).sum::<f64>() / w;

    let settling_time = match recs.iter().rposition(|r| r.eps.abs() >= settle_threshold) {
        None => Some(recs[0].t),
        Some(i) if i + 1 < n => Some(recs[i + 1].t),
        Some(_) => None,
    };

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in recs {
        let d = r.speed - traj.v;
        lo = lo.min(d);
        hi = hi.max(d);
    }

    Ok(Metrics {
        steady_state_error,
        steady_state_concentration,
        settling_time,
        final_sigma_times_c2: g.c2 * last.sigma.unwrap_or(0.0),
        final_abs_error: last.eps.abs(),
        min_speed_deviation: lo,
        max_speed_deviation: hi,
    })
}
