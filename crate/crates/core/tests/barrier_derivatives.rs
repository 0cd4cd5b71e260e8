//! Finite differences of the barrier along closed-loop runs against the
//! analytic Lie derivatives.

use dhocbf_core::barrier::{barrier_value, lie_derivatives, BarrierMode, BarrierParams, DriftVariant};
use dhocbf_core::simulator::{build_preset, run_scenario, Overrides, PresetName, Scenario, TraceRecord};

fn speed3(dt: f64) -> (Scenario, Vec<TraceRecord>) {
    let ov = Overrides {
        dt: Some(dt),
        ..Overrides::default()
    };
    let s = build_preset(PresetName::SpeedSweep, BarrierMode::Dhocbf, &ov).unwrap().remove(2);
    let trace = run_scenario(&s).unwrap();
    (s, trace)
}

fn h_series(s: &Scenario, trace: &[TraceRecord]) -> Vec<f64> {
    trace
        .iter()
        .map(|r| barrier_value(&r.ego, &s.obstacle_states(r.t)[0], r.obstacles[0].d_safe))
        .collect()
}

/// Worst first- and second-difference errors over the run.
fn errors(dt: f64) -> (f64, f64) {
    let (s, trace) = speed3(dt);
    let h = h_series(&s, &trace);
    let p = BarrierParams::new(1.0, 1.0, DriftVariant::ExactRelative).unwrap();
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for k in 1..trace.len() - 1 {
        let r = &trace[k];
        let obs = s.obstacle_states(r.t)[0];
        let ev = lie_derivatives(&r.ego, &obs, r.obstacles[0].d_safe, &p);
        let fd = (h[k + 1] - h[k]) / dt;
        first = first.max((fd - (ev.lf_h + ev.lfobs_h)).abs());
        let sd = (h[k + 1] - 2.0 * h[k] + h[k - 1]) / (dt * dt);
        let hdd = ev.second_order_drift + ev.lglf_h[0] * r.u_applied.ux + ev.lglf_h[1] * r.u_applied.uy;
        second = second.max((sd - hdd).abs());
    }
    (first, second)
}

#[test]
fn first_and_second_differences_converge_at_order_one() {
    let (f1, s1) = errors(0.02);
    let (f2, s2) = errors(0.01);
    let (f3, s3) = errors(0.005);
    let c = [f1 / 0.02, f2 / 0.01, f3 / 0.005];
    for w in c.windows(2) {
        assert!((w[1] / w[0] - 1.0).abs() < 0.25, "first-difference constants {c:?}");
    }
    assert!(s2 < 0.7 * s1 && s3 < 0.7 * s2, "second-difference errors {s1} {s2} {s3}");
}

#[test]
fn paper_literal_drift_misses_the_cross_term() {
    let (s, trace) = speed3(0.01);
    let h = h_series(&s, &trace);
    let p = BarrierParams::new(1.0, 1.0, DriftVariant::PaperLiteral).unwrap();
    let k = 10;
    let r = &trace[k];
    let obs = s.obstacle_states(r.t)[0];
    let ev = lie_derivatives(&r.ego, &obs, r.obstacles[0].d_safe, &p);
    let sd = (h[k + 1] - 2.0 * h[k] + h[k - 1]) / 1e-4;
    let hdd = ev.second_order_drift + ev.lglf_h[0] * r.u_applied.ux + ev.lglf_h[1] * r.u_applied.uy;
    let cross = 4.0 * r.ego.velocity().dot(obs.velocity);
    assert!(cross > 1.0);
    assert!((sd - (hdd - cross)).abs() < 0.1 * cross);
}
