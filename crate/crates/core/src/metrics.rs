//! Displacement errors, success rate, and distance summaries.

use alloc::vec::Vec;

use crate::math::Vec2;
use crate::simulator::TraceRecord;
use crate::{Error, Result};

/// Mean displacement over the common prefix of two position sequences.
pub fn ade(a: &[Vec2], b: &[Vec2]) -> Result<f64> {
    let n = a.len().min(b.len());
    if n == 0 {
        return Err(Error::invalid("trajectory", "ADE needs two nonempty sequences"));
    }
    let total: f64 = a.iter().zip(b).map(|(p, q)| p.distance(*q)).sum();
    Ok(total / n as f64)
}

/// Displacement at the last aligned index, or the one before it when
/// `penultimate` is set (for planners whose final point is pinned to the
/// goal).
pub fn fde(a: &[Vec2], b: &[Vec2], penultimate: bool) -> Result<f64> {
    let n = a.len().min(b.len());
    let need = if penultimate { 2 } else { 1 };
    if n < need {
        return Err(Error::invalid("trajectory", "too short for FDE"));
    }
    let i = n - need;
    Ok(a[i].distance(b[i]))
}

/// Smallest signed surface distance over a whole trace.
pub fn trace_min_distance(trace: &[TraceRecord]) -> f64 {
    trace.iter().map(TraceRecord::min_distance).fold(f64::INFINITY, f64::min)
}

/// Fraction of traces whose surface distance stays above `collision_margin`
/// at every step.
pub fn success_rate(traces: &[Vec<TraceRecord>], collision_margin: f64) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::invalid("traces", "success rate needs at least one trace"));
    }
    let clean = traces
        .iter()
        .filter(|t| trace_min_distance(t) > collision_margin)
        .count();
    Ok(clean as f64 / traces.len() as f64)
}

/// Per-step minimum surface distance; `+inf` at steps without obstacles.
pub fn min_distance_series(trace: &[TraceRecord]) -> Vec<(f64, f64)> {
    trace.iter().map(|r| (r.t, r.min_distance())).collect()
}

/// Population mean and variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Summary over a batch of rollouts (typically one per seed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub ade: f64,
    pub fde: f64,
    pub fde_penultimate: f64,
    pub sr: f64,
    pub min_distance: f64,
    pub var_ade: f64,
    pub var_fde: f64,
}

/// One rollout paired with the trajectory it is scored against.
#[derive(Debug, Clone, Copy)]
pub struct Rollout<'a> {
    pub trace: &'a [TraceRecord],
    pub reference: &'a [Vec2],
}

impl MetricReport {
    pub fn from_rollouts(runs: &[Rollout<'_>], collision_margin: f64) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::invalid("rollouts", "need at least one rollout"));
        }
        let mut ades = Vec::with_capacity(runs.len());
        let mut fdes = Vec::with_capacity(runs.len());
        let mut fdes_pen = Vec::with_capacity(runs.len());
        let mut clean = 0usize;
        let mut min_distance = f64::INFINITY;
        for run in runs {
            let actual: Vec<Vec2> = run.trace.iter().map(|r| r.ego.position()).collect();
            ades.push(ade(&actual, run.reference)?);
            fdes.push(fde(&actual, run.reference, false)?);
            fdes_pen.push(fde(&actual, run.reference, true)?);
            let d = trace_min_distance(run.trace);
            if d > collision_margin {
                clean += 1;
            }
            min_distance = min_distance.min(d);
        }
        let (ade_mean, var_ade) = mean_and_variance(&ades);
        let (fde_mean, var_fde) = mean_and_variance(&fdes);
        Ok(Self {
            ade: ade_mean,
            fde: fde_mean,
            fde_penultimate: mean_and_variance(&fdes_pen).0,
            sr: clean as f64 / runs.len() as f64,
            min_distance,
            var_ade,
            var_fde,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ControlInput, EgoState};
    use crate::safety_filter::QpStatus;
    use crate::simulator::ObstacleRecord;
    use alloc::vec;
    use proptest::prelude::*;

    fn line(n: usize, dy: f64) -> Vec<Vec2> {
        (0..n).map(|i| Vec2::new(i as f64, dy)).collect()
    }

    fn trace_with_distances(ds: &[f64]) -> Vec<TraceRecord> {
        ds.iter()
            .enumerate()
            .map(|(k, &d)| TraceRecord {
                t: k as f64 * 0.1,
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
                active_set: vec![],
                slack: 0.0,
            })
            .collect()
    }

    #[test]
    fn ade_examples() {
        assert_eq!(ade(&line(5, 0.0), &line(5, 0.0)).unwrap(), 0.0);
        assert_eq!(ade(&line(5, 0.0), &line(5, 1.0)).unwrap(), 1.0);
        let mut long = line(10, 0.0);
        long[9] = Vec2::new(100.0, 100.0);
        assert_eq!(ade(&long, &line(8, 0.0)).unwrap(), 0.0);
        assert!(ade(&[], &line(3, 0.0)).is_err());
    }

    #[test]
    fn fde_examples() {
        assert_eq!(fde(&line(4, 0.0), &line(4, 0.0), false).unwrap(), 0.0);
        let a = vec![Vec2::ZERO, Vec2::new(0.0, 0.0)];
        let b = vec![Vec2::ZERO, Vec2::new(3.0, 4.0)];
        assert_eq!(fde(&a, &b, false).unwrap(), 5.0);
        let pinned_a = vec![Vec2::ZERO, Vec2::new(1.0, 1.0), Vec2::new(5.0, 5.0)];
        let pinned_b = vec![Vec2::ZERO, Vec2::new(1.0, 3.0), Vec2::new(5.0, 5.0)];
        assert_eq!(fde(&pinned_a, &pinned_b, false).unwrap(), 0.0);
        assert_eq!(fde(&pinned_a, &pinned_b, true).unwrap(), 2.0);
        assert!(fde(&line(1, 0.0), &line(1, 0.0), true).is_err());
    }

    #[test]
    fn success_rate_examples() {
        let traces = vec![
            trace_with_distances(&[3.0, 2.0, 1.5]),
            trace_with_distances(&[3.0, -0.2, 1.0]),
            trace_with_distances(&[0.4, 0.3, 0.9]),
        ];
        assert!((success_rate(&traces, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(success_rate(&traces[..1], 0.0).unwrap(), 1.0);
        assert!((success_rate(&traces, 0.35).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(success_rate(&[], 0.0).is_err());
    }

    #[test]
    fn distance_series() {
        let tr = trace_with_distances(&[2.0, 2.0, 2.0]);
        assert!(min_distance_series(&tr).iter().all(|&(_, d)| d == 2.0));
        let mut empty = tr.clone();
        for r in &mut empty {
            r.obstacles.clear();
        }
        assert!(min_distance_series(&empty).iter().all(|&(_, d)| d == f64::INFINITY));
        let tr = trace_with_distances(&[2.0, 0.5, 1.0]);
        let m = min_distance_series(&tr).iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert_eq!(m, trace_min_distance(&tr));
    }

    #[test]
    fn report_variance_is_population() {
        let tr = trace_with_distances(&[1.0, 1.0]);
        let r0 = line(2, 0.0);
        let mut pos1 = tr.clone();
        pos1[0].ego = EgoState::new(0.0, 2.0, 0.0, 0.0);
        pos1[1].ego = EgoState::new(1.0, 2.0, 0.0, 0.0);
        let mut pos0 = tr.clone();
        pos0[1].ego = EgoState::new(1.0, 0.0, 0.0, 0.0);
        let report = MetricReport::from_rollouts(
            &[Rollout { trace: &pos0, reference: &r0 }, Rollout { trace: &pos1, reference: &r0 }],
            0.0,
        )
        .unwrap();
        assert_eq!(report.ade, 1.0);
        assert_eq!(report.var_ade, 1.0);
        assert_eq!(report.sr, 1.0);
        assert_eq!(report.min_distance, 1.0);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            pts in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64), 2..30)
        ) {
            let a: Vec<Vec2> = pts.iter().map(|p| Vec2::new(p.0, p.1)).collect();
            let b: Vec<Vec2> = pts.iter().map(|p| Vec2::new(p.2, p.3)).collect();
            let per_step: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p.distance(*q)).collect();
            let max = per_step.iter().cloned().fold(0.0, f64::max);
            prop_assert_eq!(ade(&a, &b).unwrap(), ade(&b, &a).unwrap());
            prop_assert_eq!(fde(&a, &b, false).unwrap(), fde(&b, &a, false).unwrap());
            prop_assert!(ade(&a, &b).unwrap() <= max + 1e-12);
            prop_assert!(per_step.contains(&fde(&a, &b, false).unwrap()));
        }

        #[test]
        fn success_rate_monotone_in_margin(
            ds in proptest::collection::vec(proptest::collection::vec(-1.0..5.0f64, 1..10), 1..8),
            m1 in -1.0..5.0f64, dm in 0.0..3.0f64,
        ) {
            let traces: Vec<_> = ds.iter().map(|d| trace_with_distances(d)).collect();
            prop_assert!(success_rate(&traces, m1 + dm).unwrap() <= success_rate(&traces, m1).unwrap());
        }
    }
}
