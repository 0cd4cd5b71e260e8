//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dhocbf_core::barrier::{barrier_value, lie_derivatives, BarrierMode, BarrierParams, DriftVariant};
use dhocbf_core::dynamics::{ControlInput, EgoState};
use dhocbf_core::geometry::{shape_min_distance, ShapeSpec};
use dhocbf_core::metrics::{ade, fde, success_rate, trace_min_distance};
use dhocbf_core::oracle::sampled_min_distance;
use dhocbf_core::planner::{idm_acceleration, IdmParams, LeaderGap};
use dhocbf_core::safety_filter::QpStatus;
use dhocbf_core::simulator::{
    build_preset, perturbation_switch_time, run_scenario, ObstacleRecord, Overrides, PresetName, Scenario,
    TraceRecord,
};
use dhocbf_core::Vec2;
use dhocbf::experiments::{run_preset, write_preset_outputs, preset_checks};
use dhocbf::validate::{run_validation, ValidateConfig};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn unit_betas() -> Overrides {
    Overrides {
        beta1: Some(1.0),
        beta2: Some(1.0),
        dt: Some(0.1),
        ..Overrides::default()
    }
}

fn run(s: &Scenario) -> Vec<TraceRecord> {
    run_scenario(s).expect("preset runs complete")
}

fn ade_to_reference(s: &Scenario, trace: &[TraceRecord]) -> f64 {
    let actual: Vec<Vec2> = trace.iter().map(|r| r.ego.position()).collect();
    ade(&actual, &s.reference_positions(trace)).unwrap()
}

fn forward_invariance() -> Outcome {
    let start = Instant::now();
    let mut worst_d = f64::INFINITY;
    let mut worst_h = f64::INFINITY;
    let mut optimal_steps = 0;
    for name in PresetName::ALL {
        for s in build_preset(name, BarrierMode::Dhocbf, &unit_betas()).unwrap() {
            for r in run(&s).iter().filter(|r| r.status == QpStatus::Optimal) {
                optimal_steps += 1;
                worst_d = worst_d.min(r.min_distance());
                worst_h = worst_h.min(r.min_h());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst_d > 0.0 && worst_h >= 0.0 && secs < 5.0,
        format!("{optimal_steps} optimal steps, min distance {worst_d:.4} m, min h {worst_h:.4}, {secs:.2} s"),
    )
}

fn perturbation_pair() -> (Scenario, Vec<TraceRecord>, Scenario, Vec<TraceRecord>) {
    let h = build_preset(PresetName::Perturbation, BarrierMode::Hocbf, &unit_betas()).unwrap().remove(0);
    let d = build_preset(PresetName::Perturbation, BarrierMode::Dhocbf, &unit_betas()).unwrap().remove(0);
    let (th, td) = (run(&h), run(&d));
    (h, th, d, td)
}

fn static_equivalence() -> Outcome {
    let (h, th, _, td) = perturbation_pair();
    let switch = perturbation_switch_time(h.t_end);
    let mut worst = 0.0f64;
    let mut steps = 0;
    let mut constrained = 0;
    for (a, b) in th.iter().zip(&td).filter(|(a, _)| a.t < switch - 1e-9) {
        worst = worst
            .max((a.u_applied.ux - b.u_applied.ux).abs())
            .max((a.u_applied.uy - b.u_applied.uy).abs());
        steps += 1;
        constrained += usize::from(a.u_applied != a.u_ref);
    }
    (
        worst <= 1e-9 && steps > 0,
        format!("{steps} steps before T, {constrained} with the barrier active, max control gap {worst:e}"),
    )
}

fn dynamic_adaptation() -> Outcome {
    let (h, th, _, td) = perturbation_pair();
    let switch = perturbation_switch_time(h.t_end);
    let after = |t: &[TraceRecord]| {
        t.iter()
            .filter(|r| r.t >= switch - 1e-9)
            .map(TraceRecord::min_distance)
            .fold(f64::INFINITY, f64::min)
    };
    let (dh, dd) = (after(&th), after(&td));
    (dd >= dh - 1e-6, format!("min distance after T: dhocbf {dd:.4} m, hocbf {dh:.4} m"))
}

fn reduced_conservatism() -> Outcome {
    let mut ov = unit_betas();
    ov.variant = Some(DriftVariant::ExactRelative);
    let hs = build_preset(PresetName::SpeedSweep, BarrierMode::Hocbf, &ov).unwrap();
    let ds = build_preset(PresetName::SpeedSweep, BarrierMode::Dhocbf, &ov).unwrap();
    let gaps: Vec<f64> = hs
        .iter()
        .zip(&ds)
        .map(|(h, d)| ade_to_reference(h, &run(h)) - ade_to_reference(d, &run(d)))
        .collect();
    let fastest = gaps[2] > 0.0;
    let monotone = gaps.windows(2).all(|w| w[1] >= w[0]);
    (
        fastest && monotone,
        format!("ADE(hocbf) - ADE(dhocbf) at obstacle speeds 0/1/3 m/s: {gaps:.4?}"),
    )
}

fn qp_exactness() -> Outcome {
    let start = Instant::now();
    let report = run_validation(&ValidateConfig::new(1000, 2024)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let qp_failures = report
        .failures
        .iter()
        .filter(|f| matches!(f, dhocbf::validate::Failure::Qp { .. }))
        .count();
    (
        qp_failures == 0 && report.qp_instances == 1000 && secs < 10.0,
        format!(
            "{} instances ({} infeasible), objective excess {:.1e}, {qp_failures} failures, {secs:.2} s",
            report.qp_instances, report.qp_infeasible, report.max_objective_excess
        ),
    )
}

fn derivative_consistency() -> Outcome {
    let p = BarrierParams::new(1.0, 1.0, DriftVariant::ExactRelative).unwrap();
    let errors = |dt: f64| {
        let ov = Overrides {
            dt: Some(dt),
            ..unit_betas()
        };
        let s = build_preset(PresetName::SpeedSweep, BarrierMode::Dhocbf, &ov).unwrap().remove(2);
        let trace = run(&s);
        let h: Vec<f64> = trace
            .iter()
            .map(|r| barrier_value(&r.ego, &s.obstacle_states(r.t)[0], r.obstacles[0].d_safe))
            .collect();
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for k in 1..trace.len() - 1 {
            let r = &trace[k];
            let ev = lie_derivatives(&r.ego, &s.obstacle_states(r.t)[0], r.obstacles[0].d_safe, &p);
            first = first.max(((h[k + 1] - h[k]) / dt - (ev.lf_h + ev.lfobs_h)).abs());
            let hdd = ev.second_order_drift + ev.lglf_h[0] * r.u_applied.ux + ev.lglf_h[1] * r.u_applied.uy;
            second = second.max(((h[k + 1] - 2.0 * h[k] + h[k - 1]) / (dt * dt) - hdd).abs());
        }
        (first / dt, second / dt)
    };
    let fits: Vec<(f64, f64)> = [0.02, 0.01, 0.005].into_iter().map(errors).collect();
    let stable = |c: &dyn Fn(&(f64, f64)) -> f64| fits.windows(2).all(|w| (c(&w[1]) / c(&w[0]) - 1.0).abs() < 0.25);
    let ok = stable(&|f| f.0) && stable(&|f| f.1);
    (
        ok,
        format!(
            "fitted C (first, second difference) at dt 0.02/0.01/0.005: {:.3?}",
            fits
        ),
    )
}

fn geometry_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut rect = || {
        ShapeSpec::Rectangle {
            width: rng.random_range(0.2..3.0),
            length: rng.random_range(0.2..5.0),
        }
        .placed(
            Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)),
            rng.random_range(-PI..PI),
        )
    };
    let mut worst = 0.0f64;
    let mut asymmetric = 0;
    for _ in 0..500 {
        let (a, b) = (rect(), rect());
        let ab = shape_min_distance(&a, &b);
        let ba = shape_min_distance(&b, &a);
        worst = worst.max((ab.distance - sampled_min_distance(&a, &b, 10_000)).abs());
        if ab.distance.to_bits() != ba.distance.to_bits() || ab.penetration.to_bits() != ba.penetration.to_bits() {
            asymmetric += 1;
        }
    }
    (
        worst <= 1e-3 && asymmetric == 0,
        format!("500 pairs, max deviation {worst:.2e} m, {asymmetric} asymmetric"),
    )
}

fn idm_closed_form() -> Outcome {
    let p = IdmParams::default();
    let at_rest = idm_acceleration(0.0, None, &p);
    let cruising = idm_acceleration(9.63, None, &p);
    let following = idm_acceleration(
        5.0,
        Some(LeaderGap {
            gap: 10.5,
            approach_rate: 0.0,
        }),
        &p,
    );
    // -2 (5/9.63)^4 evaluated in exact rational arithmetic
    let expected = -0.145_346_595_802_378_7;
    let ok = (at_rest - 2.0).abs() <= 1e-6 && cruising.abs() <= 1e-6 && (following - expected).abs() <= 1e-6;
    (ok, format!("a = {at_rest}, {cruising:e}, {following}"))
}

fn fixture(ds: &[f64]) -> Vec<TraceRecord> {
    ds.iter()
        .enumerate()
        .map(|(k, &d)| TraceRecord {
            t: 0.1 * k as f64,
            ego: EgoState::default(),
            u_ref: ControlInput::ZERO,
            u_applied: ControlInput::ZERO,
            obstacles: vec![ObstacleRecord {
                distance: d,
                d_safe: 1.0,
                h: 0.0,
                residual: None,
            }],
            status: QpStatus::Optimal,
            active_set: Vec::new(),
            slack: 0.0,
        })
        .collect()
}

fn metric_definitions() -> Outcome {
    let line = |n: usize, dy: f64| (0..n).map(|i| Vec2::new(i as f64, dy)).collect::<Vec<_>>();
    let mut long = line(10, 0.0);
    long[9] = Vec2::new(50.0, 50.0);
    let pinned_a = [Vec2::ZERO, Vec2::new(1.0, 1.0), Vec2::new(5.0, 5.0)];
    let pinned_b = [Vec2::ZERO, Vec2::new(1.0, 3.0), Vec2::new(5.0, 5.0)];
    let traces = vec![fixture(&[3.0, 2.0, 1.5]), fixture(&[3.0, -0.2, 1.0]), fixture(&[0.4, 0.3, 0.9])];
    let checks = [
        ade(&line(5, 0.0), &line(5, 0.0)).unwrap() == 0.0,
        ade(&line(5, 0.0), &line(5, 1.0)).unwrap() == 1.0,
        ade(&long, &line(8, 0.0)).unwrap() == 0.0,
        ade(&[], &line(1, 0.0)).is_err(),
        fde(&line(4, 0.0), &line(4, 0.0), false).unwrap() == 0.0,
        fde(&[Vec2::ZERO], &[Vec2::new(3.0, 4.0)], false).unwrap() == 5.0,
        fde(&pinned_a, &pinned_b, false).unwrap() == 0.0,
        fde(&pinned_a, &pinned_b, true).unwrap() == 2.0,
        success_rate(&traces, 0.0).unwrap() == 2.0 / 3.0,
        success_rate(&traces[..1], 0.0).unwrap() == 1.0,
        success_rate(&traces, 0.35).unwrap() == 1.0 / 3.0,
        trace_min_distance(&traces[1]) == -0.2,
    ];
    let passed = checks.iter().filter(|c| **c).count();
    (passed == checks.len(), format!("{passed}/{} definition checks", checks.len()))
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let modes = [BarrierMode::Hocbf, BarrierMode::Dhocbf];
    let mut files = 0;
    let mut identical = true;
    for name in PresetName::ALL {
        let written: Vec<Vec<std::path::PathBuf>> = dirs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                // different thread counts must not change the bytes
                let runs = run_preset(name, &modes, &unit_betas(), 1 + 3 * i).unwrap();
                let checks = preset_checks(name, &runs);
                write_preset_outputs(name, &runs, &checks, d.path()).unwrap()
            })
            .collect();
        for (a, b) in written[0].iter().zip(&written[1]) {
            files += 1;
            identical &= std::fs::read(a).unwrap() == std::fs::read(b).unwrap();
        }
    }
    (identical && files > 0, format!("{files} file pairs compared byte for byte"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("forward invariance on all presets", forward_invariance),
        ("static equivalence before the switch", static_equivalence),
        ("dynamic adaptation after the switch", dynamic_adaptation),
        ("reduced conservatism in the speed sweep", reduced_conservatism),
        ("QP exactness against the grid oracle", qp_exactness),
        ("barrier derivative consistency", derivative_consistency),
        ("rectangle distance against sampling", geometry_oracle),
        ("IDM closed form", idm_closed_form),
        ("ADE/FDE/SR definitions", metric_definitions),
        ("bitwise deterministic traces", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!("{} criterion {:>2}: {name} ({detail})", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
