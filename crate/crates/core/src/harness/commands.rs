use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{
    check_p_conditions, check_pi_conditions, effective_radial_model, prop3_bound, solve_equilibrium,
    AnalysisError, BoundParams, KeyValues, Prop3Bound, StabilityReport,
};
use crate::controllers::{Gains, SdotMode};
use crate::fields::{estimate_bounds, estimate_bounds_at, FieldBounds, FieldModel};
use crate::harness::output::{save_trajectory_csv, RunEntry, RunReport};
use crate::harness::scenario::{load_scenario, Scenario};
use crate::harness::{HarnessError, EXIT_CONDITIONS, EXIT_OK};
use crate::sim::{compute_metrics, parameter_sweep, run_simulation, Record, SweepResults};

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub dt: Option<f64>,
    pub mode: Option<SdotMode>,
}

impl RunOptions {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

fn load(path: &Path, opts: &RunOptions) -> Result<(Scenario, PathBuf), HarnessError> {
    let mut scenario = load_scenario(path)?;
    if let Some(dt) = opts.dt {
        scenario.dt = dt;
    }
    if let Some(mode) = opts.mode {
        scenario.sdot_mode = mode;
    }
    scenario.validate()?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((scenario, base))
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))
}

fn report_exit<T>(result: Result<T, HarnessError>, ok: impl FnOnce(T) -> i32) -> i32 {
    match result {
        Ok(v) => ok(v),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Angular margin `eps` such that every logged `phi` lies in `[-pi + eps, -eps]`.
/// `None` if some `phi` is outside `[-pi, 0]`.
pub fn phi_margin(records: &[Record]) -> Option<f64> {
    let mut margin = std::f64::consts::FRAC_PI_2;
    for phi in records.iter().filter_map(|r| r.phi) {
        let m = (-phi).min(std::f64::consts::PI + phi);
        if m <= 0.0 {
            return None;
        }
        margin = margin.min(m);
    }
    Some(margin)
}

/// Smooth-field bound over the points a run visited after its transient.
/// Uses the second half of the trajectory for both the field bounds and the margin.
pub fn visited_region_bound(
    field: &FieldModel,
    gains: &Gains,
    v: f64,
    records: &[Record],
) -> Option<(FieldBounds, Result<Prop3Bound, AnalysisError>)> {
    let tail = &records[records.len() / 2..];
    let points: Vec<_> = tail.iter().map(Record::position).collect();
    let bounds = estimate_bounds_at(field, &points).ok()?;
    let margin = phi_margin(tail)?;
    Some((bounds, prop3_bound(&BoundParams::from_bounds(&bounds, v, margin, *gains))))
}

/// Runs every initial state, writing one CSV each plus `report.json`.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunReport, HarnessError> {
    let (scenario, base) = load(path, opts)?;
    let out = opts.out_dir();
    create_dir(&out)?;
    let cfgs = scenario.sim_configs(&base)?;
    let mut runs = Vec::new();
    let mut last_records = Vec::new();
    for (index, cfg) in cfgs.iter().enumerate() {
        let traj = run_simulation(cfg)?;
        let metrics = compute_metrics(&traj, &cfg.gains, scenario.settle_threshold)?;
        let csv = format!("{}_{index}.csv", scenario.name);
        save_trajectory_csv(&out.join(&csv), &traj.records)?;
        runs.push(RunEntry { index, initial: cfg.initial, csv, metrics });
        last_records = traj.records;
    }
    let field = &cfgs[0].field;
    let mut report = RunReport {
        scenario: scenario.name.clone(),
        runs,
        equilibrium: None,
        stability: None,
        field_bounds: None,
        bound: None,
    };
    if let Some((alpha, r_d)) = effective_radial_model(field, scenario.s_d) {
        report.equilibrium = solve_equilibrium(&scenario.gains, alpha, r_d, scenario.v, scenario.s_d).ok();
        report.stability = StabilityReport::compute(&scenario.gains, alpha, scenario.v, r_d, scenario.s_d).ok();
    } else if let Some((bounds, bound)) = visited_region_bound(field, &scenario.gains, scenario.v, &last_records) {
        report.field_bounds = Some(bounds);
        report.bound = bound.ok();
    }
    report.save(&out.join(format!("{}_report.json", scenario.name)))?;
    Ok(report)
}

pub fn cmd_run(path: &Path, opts: &RunOptions) -> i32 {
    report_exit(run_scenario(path, opts), |report| {
        for run in &report.runs {
            println!(
                "run {}: steady_state_error = {:.6e}, final |eps| = {:.6e}, csv = {}",
                run.index, run.metrics.steady_state_error, run.metrics.final_abs_error, run.csv
            );
        }
        EXIT_OK
    })
}

pub struct AnalysisOutcome {
    pub text: String,
    pub conditions_ok: bool,
}

fn push_kv(text: &mut String, items: Vec<(String, String)>) {
    for (k, v) in items {
        let _ = writeln!(text, "{k} = {v}");
    }
}

pub fn analyze_scenario(path: &Path, opts: &RunOptions) -> Result<AnalysisOutcome, HarnessError> {
    let (scenario, base) = load(path, opts)?;
    let field = scenario.field.build(&base)?;
    let g = &scenario.gains;
    let mut text = format!("scenario = {}\n", scenario.name);

    if let Some((alpha, r_d)) = effective_radial_model(&field, scenario.s_d) {
        let eq = solve_equilibrium(g, alpha, r_d, scenario.v, scenario.s_d).map_err(|e| HarnessError::Invalid {
            path: "gains".into(),
            line: None,
            message: e.to_string(),
        })?;
        let report = StabilityReport::compute(g, alpha, scenario.v, r_d, scenario.s_d).map_err(|e| HarnessError::Invalid {
            path: "gains".into(),
            line: None,
            message: e.to_string(),
        })?;
        let _ = writeln!(text, "analysis.alpha_effective = {alpha}");
        push_kv(&mut text, eq.key_values());
        push_kv(&mut text, report.key_values());
        let conditions_ok = if g.c2 == 0.0 {
            check_p_conditions(g, alpha, scenario.v)
        } else {
            check_pi_conditions(g, alpha, scenario.v)
        };
        let _ = writeln!(text, "analysis.conditions_ok = {conditions_ok}");
        return Ok(AnalysisOutcome { text, conditions_ok });
    }

    let Some(spec) = &scenario.bounds else {
        let kind = if scenario.field.is_grid() { "grid" } else { "non-radial" };
        return Err(HarnessError::Invalid {
            path: "bounds".into(),
            line: None,
            message: format!("{kind} field needs a [bounds] region for analysis"),
        });
    };
    let bounds = estimate_bounds(&field, spec.rect(), spec.step).map_err(|e| HarnessError::Invalid {
        path: "bounds.region".into(),
        line: None,
        message: e.to_string(),
    })?;
    let _ = writeln!(text, "bounds.gamma1 = {:.9}", bounds.grad_min);
    let _ = writeln!(text, "bounds.gamma2 = {:.9}", bounds.grad_max);
    let _ = writeln!(text, "bounds.gamma3 = {:.9}", bounds.hess_max);
    let _ = writeln!(text, "bounds.samples = {}", bounds.samples);
    let params = BoundParams::from_bounds(&bounds, scenario.v, spec.phi_margin, *g);
    let conditions_ok = match prop3_bound(&params) {
        Ok(b) => {
            push_kv(&mut text, b.key_values());
            b.preconditions_met
        }
        Err(e) => {
            let _ = writeln!(text, "bound.error = {e}");
            false
        }
    };
    let _ = writeln!(text, "analysis.conditions_ok = {conditions_ok}");
    Ok(AnalysisOutcome { text, conditions_ok })
}

pub fn cmd_analyze(path: &Path, opts: &RunOptions) -> i32 {
    report_exit(analyze_scenario(path, opts), |outcome| {
        print!("{}", outcome.text);
        if outcome.conditions_ok {
            EXIT_OK
        } else {
            EXIT_CONDITIONS
        }
    })
}

/// Sweeps the scenario's `[sweep]` parameter from its first initial state and writes `<name>_sweep.csv`.
pub fn sweep_scenario(
    path: &Path,
    opts: &RunOptions,
) -> Result<SweepResults, HarnessError> {
    let (scenario, base) = load(path, opts)?;
    let Some(sweep) = &scenario.sweep else {
        return Err(HarnessError::Invalid { path: "sweep".into(), line: None, message: "scenario has no [sweep] table".into() });
    };
    let out = opts.out_dir();
    create_dir(&out)?;
    let cfg = scenario.sim_configs(&base)?.remove(0);
    let results = parameter_sweep(&cfg, sweep.parameter, &sweep.values, scenario.settle_threshold);

    let file = out.join(format!("{}_sweep.csv", scenario.name));
    let mut w = csv::Writer::from_path(&file).map_err(|e| HarnessError::Io(format!("{}: {e}", file.display())))?;
    let io = |e: csv::Error| HarnessError::Io(e.to_string());
    w.write_record([
        sweep.parameter.to_string().as_str(),
        "steady_state_error",
        "settling_time",
        "final_abs_error",
        "final_sigma_times_c2",
        "min_speed_deviation",
        "max_speed_deviation",
        "status",
    ])
    .map_err(io)?;
    for (value, result) in &results {
        let row = match result {
            Ok(m) => vec![
                value.to_string(),
                m.steady_state_error.to_string(),
                m.settling_time.map(|t| t.to_string()).unwrap_or_default(),
                m.final_abs_error.to_string(),
                m.final_sigma_times_c2.to_string(),
                m.min_speed_deviation.to_string(),
                m.max_speed_deviation.to_string(),
                "ok".into(),
            ],
            Err(e) => {
                let mut row = vec![value.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(e.to_string());
                row
            }
        };
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(results)
}

pub fn cmd_sweep(path: &Path, opts: &RunOptions) -> i32 {
    report_exit(sweep_scenario(path, opts), |results| {
        let mut code = EXIT_OK;
        for (value, result) in results {
            match result {
                Ok(m) => println!("{value}: steady_state_error = {:.6e}", m.steady_state_error),
                Err(e) => {
                    println!("{value}: {e}");
                    code = HarnessError::Sim(e).exit_code();
                }
            }
        }
        code
    })
}
