//! Randomized self-checks: the exact QP against the grid search, and the
//! closed-form shape distance against boundary sampling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use dhocbf_core::dynamics::ControlInput;
use dhocbf_core::geometry::{shape_min_distance, PlacedShape, ShapeSpec};
use dhocbf_core::oracle::{brute_force_qp, sampled_min_distance};
use dhocbf_core::safety_filter::{
    objective, solve_qp2, ControlBox, LinearConstraintRow, QpStatus, RowSource, FEASIBILITY_TOL,
};
use dhocbf_core::Vec2;

use crate::{Error, Result};

pub const MAX_ROWS: usize = 6;
pub const GEOMETRY_TOL: f64 = 1e-3;
pub const BOUNDARY_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateConfig {
    pub samples: usize,
    pub seed: u64,
    pub resolution: f64,
    /// Rectangle pairs checked; defaults to half the QP sample count.
    pub geometry_pairs: usize,
}

impl ValidateConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            resolution: 1e-3,
            geometry_pairs: samples.div_ceil(2),
        }
    }
}

/// A QP instance in a form that can be pasted back into a test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpInstance {
    pub index: usize,
    pub u_ref: [f64; 2],
    /// `[a_x, a_y, b]` per row.
    pub rows: Vec<[f64; 3]>,
    pub u_min: [f64; 2],
    pub u_max: [f64; 2],
}

impl QpInstance {
    pub fn rows(&self) -> Vec<LinearConstraintRow> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| LinearConstraintRow::new([r[0], r[1]], r[2], RowSource::Given(i)))
            .collect()
    }

    pub fn control_box(&self) -> ControlBox {
        ControlBox {
            min: self.u_min,
            max: self.u_max,
        }
    }

    pub fn reference(&self) -> ControlInput {
        ControlInput::new(self.u_ref[0], self.u_ref[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectanglePair {
    pub index: usize,
    /// `[cx, cy, heading, width, length]` per rectangle.
    pub a: [f64; 5],
    pub b: [f64; 5],
}

fn placed(r: &[f64; 5]) -> PlacedShape {
    ShapeSpec::Rectangle {
        width: r[3],
        length: r[4],
    }
    .placed(Vec2::new(r[0], r[1]), r[2])
}

pub fn random_qp(rng: &mut ChaCha8Rng, index: usize) -> QpInstance {
    let (u_min, u_max) = if rng.random_bool(0.3) {
        (
            [rng.random_range(-4.0..-0.5), rng.random_range(-4.0..-0.5)],
            [rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)],
        )
    } else {
        ([-3.0; 2], [3.0; 2])
    };
    let n = rng.random_range(0..=MAX_ROWS);
    let rows = (0..n)
        .map(|_| {
            if rng.random_bool(0.03) {
                return [0.0, 0.0, rng.random_range(-1.0..1.0)];
            }
            let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let mag = 10f64.powf(rng.random_range(-1.0..1.0));
            let through = Vec2::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let a = Vec2::from_heading(angle) * mag;
            // lines through random points, shifted outwards so that more
            // instances stay feasible
            [a.x, a.y, a.dot(through) + mag * rng.random_range(0.0..1.5)]
        })
        .collect();
    QpInstance {
        index,
        u_ref: [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
        rows,
        u_min,
        u_max,
    }
}

pub fn random_pair(rng: &mut ChaCha8Rng, index: usize) -> RectanglePair {
    let mut rect = || {
        [
            rng.random_range(-6.0..6.0),
            rng.random_range(-6.0..6.0),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.random_range(0.2..3.0),
            rng.random_range(0.2..5.0),
        ]
    };
    RectanglePair {
        index,
        a: rect(),
        b: rect(),
    }
}

/// Objective change across one grid cell: the objective's largest gradient
/// over the box times the resolution, doubled.
pub fn objective_tolerance(inst: &QpInstance, resolution: f64) -> f64 {
    let far = |r: f64, lo: f64, hi: f64| (r - lo).abs().max((r - hi).abs());
    let dx = far(inst.u_ref[0], inst.u_min[0], inst.u_max[0]);
    let dy = far(inst.u_ref[1], inst.u_min[1], inst.u_max[1]);
    2.0 * resolution * 2.0 * dx.hypot(dy)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Qp { instance: QpInstance, reason: String },
    Geometry { pair: RectanglePair, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub qp_instances: usize,
    pub qp_infeasible: usize,
    /// Largest `exact - grid` objective over instances both solved; should
    /// be <= 0 up to rounding.
    pub max_objective_excess: f64,
    /// Largest `grid - exact`; bounded by grid coarseness, informational.
    pub max_grid_gap: f64,
    pub max_row_violation: f64,
    pub geometry_pairs: usize,
    pub max_geometry_deviation: f64,
    pub failures: Vec<Failure>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "qp instances: {} ({} infeasible)", self.qp_instances, self.qp_infeasible);
        let _ = writeln!(s, "max objective excess over grid: {:.3e}", self.max_objective_excess);
        let _ = writeln!(s, "max grid gap: {:.3e}", self.max_grid_gap);
        let _ = writeln!(s, "max row violation: {:.3e}", self.max_row_violation);
        let _ = writeln!(s, "rectangle pairs: {}", self.geometry_pairs);
        let _ = writeln!(s, "max distance deviation: {:.3e}", self.max_geometry_deviation);
        let _ = write!(s, "failures: {}", self.failures.len());
        s
    }
}

impl Failure {
    /// TOML rendering of the failing input.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Wrapped<'a, T: Serialize> {
            reason: &'a str,
            instance: &'a T,
        }
        let text = match self {
            Failure::Qp { instance, reason } => toml::to_string(&Wrapped { reason, instance }),
            Failure::Geometry { pair, reason } => toml::to_string(&Wrapped { reason, instance: pair }),
        };
        text.expect("finite numbers serialize")
    }
}

pub fn check_qp(inst: &QpInstance, resolution: f64, report: &mut ValidationReport) -> Result<()> {
    let rows = inst.rows();
    let bx = inst.control_box();
    let u_ref = inst.reference();
    let exact = solve_qp2(u_ref, &rows, &bx)?;
    let grid = brute_force_qp(u_ref, &rows, &bx, resolution)?;
    report.qp_instances += 1;
    let mut fail = |reason: String| {
        report.failures.push(Failure::Qp {
            instance: inst.clone(),
            reason,
        })
    };
    match (exact.status, grid.status) {
        (QpStatus::Infeasible, QpStatus::Optimal) => {
            fail(format!("exact solver reports infeasible but grid point {:?} is feasible", grid.u_star));
            return Ok(());
        }
        (QpStatus::Infeasible, _) => {
            report.qp_infeasible += 1;
            return Ok(());
        }
        _ => {}
    }
    let violation = rows.iter().map(|r| r.residual(&exact.u_star)).fold(0.0, f64::max);
    report.max_row_violation = report.max_row_violation.max(violation);
    if violation > FEASIBILITY_TOL || !bx.contains(&exact.u_star) {
        fail(format!("exact solution {:?} violates a constraint by {violation:e}", exact.u_star));
        return Ok(());
    }
    if grid.status == QpStatus::Optimal {
        let e = objective(&exact.u_star, &u_ref);
        let g = objective(&grid.u_star, &u_ref);
        report.max_objective_excess = report.max_objective_excess.max(e - g);
        report.max_grid_gap = report.max_grid_gap.max(g - e);
        if e > g + objective_tolerance(inst, resolution) {
            fail(format!("exact objective {e} exceeds grid objective {g}"));
        }
    }
    Ok(())
}

pub fn check_pair(pair: &RectanglePair, report: &mut ValidationReport) {
    let (a, b) = (placed(&pair.a), placed(&pair.b));
    let exact = shape_min_distance(&a, &b);
    let swapped = shape_min_distance(&b, &a);
    let sampled = sampled_min_distance(&a, &b, BOUNDARY_SAMPLES);
    let dev = (exact.distance - sampled).abs();
    report.geometry_pairs += 1;
    report.max_geometry_deviation = report.max_geometry_deviation.max(dev);
    let reason = if dev > GEOMETRY_TOL {
        Some(format!("distance {} vs sampled {sampled}", exact.distance))
    } else if swapped.distance.to_bits() != exact.distance.to_bits()
        || swapped.penetration.to_bits() != exact.penetration.to_bits()
    {
        Some(format!("asymmetric: {exact:?} vs {swapped:?}"))
    } else {
        None
    };
    if let Some(reason) = reason {
        report.failures.push(Failure::Geometry {
            pair: pair.clone(),
            reason,
        });
    }
}

pub fn run_validation(cfg: &ValidateConfig) -> Result<ValidationReport> {
    if cfg.samples == 0 {
        return Err(Error::Usage("--samples must be > 0".into()));
    }
    if !(cfg.resolution > 0.0 && cfg.resolution.is_finite()) {
        return Err(Error::Usage("--resolution must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = ValidationReport::default();
    for i in 0..cfg.samples {
        let inst = random_qp(&mut rng, i);
        check_qp(&inst, cfg.resolution, &mut report)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    for i in 0..cfg.geometry_pairs {
        check_pair(&random_pair(&mut rng, i), &mut report);
    }
    Ok(report)
}
