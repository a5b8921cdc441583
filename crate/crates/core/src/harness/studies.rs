//! Canned experiment suites. Each writes its CSVs and a summary and reports pass/fail
//! against fixed thresholds.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::{effective_radial_model, solve_equilibrium, speed_convergence_time};
use crate::controllers::{Gains, SdotMode, SignMode};
use crate::fields::{CircularExpField, FieldModel, MultiGaussianField, Position2};
use crate::harness::commands::visited_region_bound;
use crate::harness::output::save_trajectory_csv;
use crate::harness::{HarnessError, EXIT_CONDITIONS, EXIT_INVALID, EXIT_OK};
use crate::sim::{
    compute_metrics, run_simulation, ControlTiming, InitialState, SimConfig, Trajectory, VehicleKind,
    DEFAULT_SETTLE_THRESHOLD,
};

pub const STUDIES: [&str; 7] = [
    "fig4-initial-states",
    "fig6-gain-sweep",
    "fig5-integrator",
    "multigaussian-track",
    "c1-sweep-gaussian",
    "single-int-identity",
    "double-int-speed",
];

/// Initial `[x, y, theta]` states of the circular-field study.
pub const START_STATES: [[f64; 3]; 8] = [
    [15.0, -5.0, 0.6 * PI],
    [15.0, 15.0, PI],
    [-5.0, 15.0, FRAC_PI_2],
    [-5.0, -5.0, 0.0],
    [6.0, 5.0, 0.0],
    [5.0, 6.0, FRAC_PI_2],
    [4.0, 5.0, PI],
    [5.0, 4.0, -FRAC_PI_2],
];

pub const CIRCULAR_SD: f64 = 20.0;
pub const GAUSSIAN_SD: f64 = 10.0;
pub const SPEED: f64 = 0.5;
pub const C1_SWEEP: [f64; 5] = [1.0, 5.0, 10.0, 30.0, 50.0];
pub const GAUSSIAN_START: InitialState = InitialState::new(0.0, 20.0, -FRAC_PI_2);

pub fn circular_field() -> FieldModel {
    CircularExpField::new(30.0, 0.1, Position2::new(5.0, 5.0)).expect("valid field").into()
}

pub fn gaussian_field() -> FieldModel {
    MultiGaussianField::benchmark().into()
}

/// Dubins run on the circular field, 400 s at the default step.
pub fn circular_config(gains: Gains, initial: [f64; 3]) -> SimConfig {
    let mut cfg = SimConfig::new(
        circular_field(),
        VehicleKind::Dubins,
        gains,
        SPEED,
        CIRCULAR_SD,
        InitialState::new(initial[0], initial[1], initial[2]),
    );
    cfg.duration = 400.0;
    cfg
}

/// Dubins run on the benchmark field from the study's start, 600 s.
pub fn gaussian_config(gains: Gains) -> SimConfig {
    let mut cfg = SimConfig::new(gaussian_field(), VehicleKind::Dubins, gains, SPEED, GAUSSIAN_SD, GAUSSIAN_START);
    cfg.duration = 600.0;
    cfg
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub name: String,
    pub pass: bool,
    pub summary: String,
}

fn write_csv(dir: &Path, name: &str, traj: &Trajectory) -> Result<(), HarnessError> {
    save_trajectory_csv(&dir.join(name), &traj.records)
}

fn write_table(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let path = dir.join(name);
    let io = |e: csv::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn run_all(cfgs: &[SimConfig]) -> Result<Vec<Trajectory>, HarnessError> {
    cfgs.par_iter()
        .map(run_simulation)
        .collect::<Result<Vec<_>, _>>()
        .map_err(HarnessError::from)
}

fn fig4(dir: &Path) -> Result<StudyOutcome, HarnessError> {
    let cfgs: Vec<_> = START_STATES
        .iter()
        .map(|s| {
            let mut c = circular_config(Gains::circular_pi(), *s);
            c.record_every = 10;
            c
        })
        .collect();
    let trajs = run_all(&cfgs)?;
    let mut rows = Vec::new();
    let mut pass = true;
    let mut summary = String::new();
    for (k, (cfg, traj)) in cfgs.iter().zip(&trajs).enumerate() {
        write_csv(dir, &format!("fig4_state{k}.csv"), traj)?;
        let m = compute_metrics(traj, &cfg.gains, DEFAULT_SETTLE_THRESHOLD)?;
        let ok = m.final_abs_error < DEFAULT_SETTLE_THRESHOLD;
        pass &= ok;
        let _ = writeln!(summary, "state {k} {:?}: final |eps| = {:.3e}, settled at {:?} s", START_STATES[k], m.final_abs_error, m.settling_time);
        rows.push(vec![
            k.to_string(),
            m.final_abs_error.to_string(),
            m.settling_time.map(|t| t.to_string()).unwrap_or_default(),
        ]);
    }
    write_table(dir, "fig4_summary.csv", &["state", "final_abs_error", "settling_time"], &rows)?;
    Ok(StudyOutcome { name: "fig4-initial-states".into(), pass, summary })
}

fn fig6(dir: &Path) -> Result<StudyOutcome, HarnessError> {
    let (alpha, r_d) = effective_radial_model(&circular_field(), CIRCULAR_SD).expect("radial field");
    let mut cfgs: Vec<_> = C1_SWEEP
        .iter()
        .map(|&c1| circular_config(Gains::new(c1, 0.0, 0.3, 1.0), START_STATES[0]))
        .collect();
    cfgs.push(circular_config(Gains::circular_pi(), START_STATES[0]));
    for c in &mut cfgs {
        c.record_every = 10;
    }
    let trajs = run_all(&cfgs)?;
    let mut rows = Vec::new();
    let mut simulated = Vec::new();
    let mut predicted = Vec::new();
    let mut summary = String::new();
    for (cfg, traj) in cfgs.iter().zip(&trajs) {
        let m = compute_metrics(traj, &cfg.gains, DEFAULT_SETTLE_THRESHOLD)?;
        let g = cfg.gains;
        let offset = if g.c2 == 0.0 {
            let eq = solve_equilibrium(&g, alpha, r_d, SPEED, CIRCULAR_SD).map_err(|e| HarnessError::Invalid {
                path: "gains".into(),
                line: None,
                message: e.to_string(),
            })?;
            simulated.push(m.steady_state_error);
            predicted.push(CIRCULAR_SD - eq.s_e);
            Some(CIRCULAR_SD - eq.s_e)
        } else {
            None
        };
        write_csv(dir, &format!("fig6_c1_{}_c2_{}.csv", g.c1, g.c2), traj)?;
        let _ = writeln!(summary, "c1 = {:>4}, c2 = {}: steady-state error = {:.4e}, predicted = {:?}", g.c1, g.c2, m.steady_state_error, offset);
        rows.push(vec![
            g.c1.to_string(),
            g.c2.to_string(),
            m.steady_state_error.to_string(),
            offset.map(|o| o.to_string()).unwrap_or_default(),
        ]);
    }
    write_table(dir, "fig6_sweep.csv", &["c1", "c2", "steady_state_error", "predicted_offset"], &rows)?;
    let pi_error: f64 = rows.last().and_then(|r| r[2].parse().ok()).unwrap_or(f64::INFINITY);
    let p10_error = simulated[2];
    let pass = strictly_decreasing(&simulated) && strictly_decreasing(&predicted) && pi_error < 0.01 && p10_error >= 0.01;
    Ok(StudyOutcome { name: "fig6-gain-sweep".into(), pass, summary })
}

fn fig5(dir: &Path) -> Result<StudyOutcome, HarnessError> {
    let (_, r_d) = effective_radial_model(&circular_field(), CIRCULAR_SD).expect("radial field");
    let mut cfg = circular_config(Gains::circular_pi(), START_STATES[0]);
    cfg.record_every = 10;
    let traj = run_simulation(&cfg)?;
    write_csv(dir, "fig5_integrator.csv", &traj)?;
    let m = compute_metrics(&traj, &cfg.gains, DEFAULT_SETTLE_THRESHOLD)?;
    let omega_c = -SPEED / r_d;
    let rel = (m.final_sigma_times_c2 - omega_c).abs() / omega_c.abs();
    let pass = m.final_abs_error < 0.01 && rel < 0.02;
    let summary = format!(
        "c2 sigma(final) = {:.6}, omega_c = {omega_c:.6} (relative gap {rel:.2e}), final |eps| = {:.2e}\n",
        m.final_sigma_times_c2, m.final_abs_error
    );
    Ok(StudyOutcome { name: "fig5-integrator".into(), pass, summary })
}

fn gaussian_track(dir: &Path) -> Result<StudyOutcome, HarnessError> {
    let mut cfg = gaussian_config(Gains::smooth_p());
    cfg.record_every = 10;
    let traj = run_simulation(&cfg)?;
    write_csv(dir, "multigaussian_track.csv", &traj)?;
    let m = compute_metrics(&traj, &cfg.gains, DEFAULT_SETTLE_THRESHOLD)?;
    let mut summary = format!("steady-state error = {:.4e}\n", m.steady_state_error);
    let pass = match visited_region_bound(&cfg.field, &cfg.gains, SPEED, &traj.records) {
        Some((b, Ok(bound))) => {
            let _ = writeln!(
                summary,
                "gamma1 = {:.4}, gamma2 = {:.4}, gamma3 = {:.4}; bound = {:.4e} (preconditions met: {})",
                b.grad_min, b.grad_max, b.hess_max, bound.bound, bound.preconditions_met
            );
            m.steady_state_error <= bound.bound
        }
        Some((_, Err(e))) => {
            let _ = writeln!(summary, "bound not available: {e}");
            false
        }
        None => {
            summary.push_str("bound not available: heading left [-pi, 0] in the second half\n");
            false
        }
    };
    Ok(StudyOutcome { name: "multigaussian-track".into(), pass, summary })
}

fn gaussian_sweep(dir: &Path) -> Result<StudyOutcome, HarnessError> {
    let cfgs: Vec<_> = C1_SWEEP
        .iter()
        .map(|&c1| {
            let mut c = gaussian_config(Gains::new(c1, 0.0, 0.1, 1.0));
            c.record_every = 10;
            c
        })
        .collect();
    let trajs = run_all(&cfgs)?;
    let mut errors = Vec::new();
    let mut rows = Vec::new();
    let mut summary = String::new();
    for (cfg, traj) in cfgs.iter().zip(&trajs) {
        let m = compute_metrics(traj, &cfg.gains, DEFAULT_SETTLE_THRESHOLD)?;
        let bound = visited_region_bound(&cfg.field, &cfg.gains, SPEED, &traj.records)
            .and_then(|(_, b)| b.ok())
            .map(|b| b.bound);
        write_csv(dir, &format!("c1_sweep_gaussian_{}.csv", cfg.gains.c1), traj)?;
        let _ = writeln!(summary, "c1 = {:>4}: steady-state error = {:.4e}, bound = {:?}", cfg.gains.c1, m.steady_state_error, bound);
        errors.push(m.steady_state_error);
        rows.push(vec![
            cfg.gains.c1.to_string(),
            m.steady_state_error.to_string(),
            bound.map(|b| b.to_string()).unwrap_or_default(),
        ]);
    }
    write_table(dir, "c1_sweep_gaussian.csv", &["c1", "steady_state_error", "bound"], &rows)?;
    Ok(StudyOutcome { name: "c1-sweep-gaussian".into(), pass: strictly_decreasing(&errors), summary })
}

/// Largest pointwise position gap between two equally sampled trajectories.
pub fn max_position_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    a.records
        .iter()
        .zip(&b.records)
        .map(|(p, q)| p.position().distance(q.position()))
        .fold(0.0, f64::max)
}

fn identity_pair(vehicle: VehicleKind, gains: Gains) -> (SimConfig, SimConfig) {
    let mut dubins = gaussian_config(gains);
    dubins.duration = 100.0;
    dubins.dt = 1e-3;
    dubins.sdot_mode = SdotMode::Oracle;
    dubins.timing = ControlTiming::Continuous;
    let mut other = dubins.clone();
    other.vehicle = vehicle;
    if vehicle == VehicleKind::DoubleIntegrator {
        // Exact sgn chatters on rounding noise at |v2| = v; a thin boundary layer does not.
        other.sign_mode = SignMode::BoundaryLayer { width: 1e-3 };
    }
    (dubins, other)
}

/// Dubins P-like versus single integrator, continuous control, oracle rate.
pub fn single_int_identity_configs() -> (SimConfig, SimConfig) {
    identity_pair(VehicleKind::SingleIntegrator, Gains::smooth_p())
}

/// Dubins PI-like versus the speed-matched double integrator.
pub fn double_int_identity_configs() -> (SimConfig, SimConfig) {
    identity_pair(VehicleKind::DoubleIntegrator, Gains::double_integrator())
}

fn single_identity(dir: &Path) -> Result<StudyOutcome, HarnessError> {
    let (a, b) = single_int_identity_configs();
    let (ta, tb) = (run_simulation(&a)?, run_simulation(&b)?);
    write_csv(dir, "identity_dubins.csv", &ta)?;
    write_csv(dir, "identity_single.csv", &tb)?;
    let gap = max_position_gap(&ta, &tb);
    Ok(StudyOutcome {
        name: "single-int-identity".into(),
        pass: gap < 1e-6,
        summary: format!("max position gap over 100 s = {gap:.3e}\n"),
    })
}

/// First time after which `| |v2| - v |` stays below `band`.
pub fn speed_entry_time(traj: &Trajectory, band: f64) -> Option<f64> {
    let recs = &traj.records;
    match recs.iter().rposition(|r| (r.speed - traj.v).abs() >= band) {
        None => recs.first().map(|r| r.t),
        Some(i) => recs.get(i + 1).map(|r| r.t),
    }
}

/// Double integrator started at twice the commanded speed, exact sgn, zero-order hold.
pub fn double_int_speed_config() -> SimConfig {
    let mut cfg = gaussian_config(Gains::double_integrator());
    cfg.vehicle = VehicleKind::DoubleIntegrator;
    cfg.initial.speed = Some(1.0);
    cfg.duration = 20.0;
    cfg
}

fn double_speed(dir: &Path) -> Result<StudyOutcome, HarnessError> {
    let cfg = double_int_speed_config();
    let traj = run_simulation(&cfg)?;
    write_csv(dir, "double_int_speed.csv", &traj)?;
    let predicted = speed_convergence_time(1.0, SPEED, cfg.gains.c5).map_err(|e| HarnessError::Invalid {
        path: "gains.c5".into(),
        line: None,
        message: e.to_string(),
    })?;
    let band = 2.0 * cfg.gains.c5 * cfg.dt;
    let observed = speed_entry_time(&traj, band);
    let pass = observed.is_some_and(|t| t <= predicted + 5.0 * cfg.dt);
    Ok(StudyOutcome {
        name: "double-int-speed".into(),
        pass,
        summary: format!("predicted T = {predicted:.4} s, observed entry into the {band:.1e} band at {observed:?} s\n"),
    })
}

pub fn run_study(name: &str, dir: &Path) -> Result<StudyOutcome, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    match name {
        "fig4-initial-states" => fig4(dir),
        "fig6-gain-sweep" => fig6(dir),
        "fig5-integrator" => fig5(dir),
        "multigaussian-track" => gaussian_track(dir),
        "c1-sweep-gaussian" => gaussian_sweep(dir),
        "single-int-identity" => single_identity(dir),
        "double-int-speed" => double_speed(dir),
        other => Err(HarnessError::UnknownStudy(other.to_string())),
    }
}

pub fn cmd_reproduce(name: &str, dir: &Path) -> i32 {
    match run_study(name, dir) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            println!("{}: {}", outcome.name, if outcome.pass { "PASS" } else { "FAIL" });
            if outcome.pass {
                EXIT_OK
            } else {
                EXIT_CONDITIONS
            }
        }
        Err(HarnessError::UnknownStudy(s)) => {
            eprintln!("error: unknown study '{s}'; expected one of: {}", STUDIES.join(", "));
            EXIT_INVALID
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_study_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(cmd_reproduce("fig9", dir.path()), EXIT_INVALID);
    }

    #[test]
    fn strict_decrease() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0, 1.0]));
    }
}
