//! Scenario text through simulation, CSV round trip and metrics.

use std::path::Path;

use isotrack::harness::{parse_scenario, read_trajectory_csv, write_trajectory_csv};
use isotrack::sim::{compute_metrics, ControlTiming, DEFAULT_SETTLE_THRESHOLD};
use isotrack::{run_simulation, SdotMode, VehicleKind};
use proptest::prelude::*;

const SCENARIO: &str = r#"
name = "pipeline"
vehicle = "dubins"
v = 0.5
s_d = 20.0
duration = 60.0

[gains]
c1 = 10.0
c2 = 1.0
c3 = 0.3
c4 = 1.0

[field]
kind = "linear-radial"
level = 20.0
slope = 1.0
radius = 4.0
source = { x = 0.0, y = 0.0 }

[[initial]]
x = 8.0
y = 0.0
theta = 1.5707963267948966
"#;

#[test]
fn scenario_to_csv_and_back() {
    let scenario = parse_scenario(SCENARIO).unwrap();
    let cfg = scenario.sim_configs(Path::new(".")).unwrap().remove(0);
    let traj = run_simulation(&cfg).unwrap();
    assert_eq!(traj.records.len(), 6001);

    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &traj.records).unwrap();
    let back = read_trajectory_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), traj.records.len());
    for (a, b) in back.iter().zip(&traj.records) {
        assert_eq!((a.t, a.x, a.y, a.s, a.eps), (b.t, b.x, b.y, b.s, b.eps));
    }

    let m = compute_metrics(&traj, &cfg.gains, DEFAULT_SETTLE_THRESHOLD).unwrap();
    assert!(m.final_abs_error < 1e-3, "{m:?}");
    // Equilibrium turn rate on the r = 4 isoline.
    assert!((m.final_sigma_times_c2 + 0.5 / 4.0).abs() < 1e-3, "{m:?}");
}

#[test]
fn toml_round_trip_preserves_configs() {
    let scenario = parse_scenario(SCENARIO).unwrap();
    let again = parse_scenario(&scenario.to_toml().unwrap()).unwrap();
    assert_eq!(scenario, again);
}

#[test]
fn continuous_timing_agrees_with_zero_order_hold_at_small_dt() {
    let scenario = parse_scenario(SCENARIO).unwrap();
    let mut zoh = scenario.sim_configs(Path::new(".")).unwrap().remove(0);
    zoh.sdot_mode = SdotMode::Oracle;
    zoh.dt = 0.001;
    zoh.duration = 10.0;
    let mut cont = zoh.clone();
    cont.timing = ControlTiming::Continuous;
    let a = run_simulation(&zoh).unwrap();
    let b = run_simulation(&cont).unwrap();
    let (pa, pb) = (a.records.last().unwrap(), b.records.last().unwrap());
    assert!((pa.x - pb.x).hypot(pa.y - pb.y) < 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    // Speed never exceeds v, except for the double integrator whose exact
    // sign term chatters within c5 * dt of it.
    #[test]
    fn path_length_bounded_by_speed(x in -15.0..15.0f64, y in -15.0..15.0f64, theta in -3.1..3.1f64, k in 0usize..3) {
        prop_assume!(x.hypot(y) > 0.5);
        let vehicle = [VehicleKind::Dubins, VehicleKind::SingleIntegrator, VehicleKind::DoubleIntegrator][k];
        let mut scenario = parse_scenario(SCENARIO).unwrap();
        scenario.vehicle = vehicle;
        scenario.gains.c5 = 0.1;
        scenario.duration = 5.0;
        scenario.initial[0].x = x;
        scenario.initial[0].y = y;
        scenario.initial[0].theta = theta;
        let cfg = scenario.sim_configs(Path::new(".")).unwrap().remove(0);
        let traj = run_simulation(&cfg).unwrap();
        let length: f64 = traj.records.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum();
        prop_assert!(length <= (0.5 + 0.1 * cfg.dt) * 5.0 * (1.0 + 1e-9), "length {length}");
    }
}
