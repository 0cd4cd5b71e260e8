//! Minimal-perturbation safety modifier.
//!
//! `u* = argmin |u - u_ref|^2` subject to every barrier half-plane and the
//! control box. With two decision variables the optimum is one of a finite
//! set of candidates (the reference itself, its projection onto a single
//! constraint boundary, or the intersection of two boundaries), so the solver
//! enumerates them and keeps the best feasible one. Under the slack policy
//! the barrier rows are softened with a shared `xi >= 0` penalised by
//! `rho * xi^2`; that three-variable problem is solved the same way by
//! enumerating active sets of size at most three.

use alloc::vec::Vec;

use crate::barrier::{constraint_row, lie_derivatives, BarrierMode, BarrierParams};
use crate::dynamics::{ControlInput, EgoBody, ObstacleState, DEFAULT_SENSORY_RADIUS};
use crate::error::ensure_finite;
use crate::geometry::{dynamic_safe_distance, shape_min_distance, PARALLEL_EPS};
use crate::math::{sqrt, Vec2};
use crate::{Error, Result};

/// Rows may be violated by at most this much at a returned optimum.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Default slack penalty.
pub const DEFAULT_SLACK_WEIGHT: f64 = 1e6;
/// Default per-axis acceleration bound in m/s^2.
pub const DEFAULT_ACCEL_BOUND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
}

/// Where a constraint row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowSource {
    /// Dynamic barrier for the obstacle at this index.
    Dhocbf(usize),
    /// Static barrier for the obstacle at this index.
    Hocbf(usize),
    /// A control bound.
    Box { axis: Axis, upper: bool },
    /// A caller-supplied row.
    Given(usize),
    /// Non-negativity of the slack variable.
    Slack,
}

/// Half-plane `a . u <= b` on the control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConstraintRow {
    pub a: [f64; 2],
    pub b: f64,
    pub source: RowSource,
}

impl LinearConstraintRow {
    pub const fn new(a: [f64; 2], b: f64, source: RowSource) -> Self {
        Self { a, b, source }
    }

    /// `a . u - b`; positive means violated.
    pub fn residual(&self, u: &ControlInput) -> f64 {
        self.a[0] * u.ux + self.a[1] * u.uy - self.b
    }

    fn normal(&self) -> Vec2 {
        Vec2::new(self.a[0], self.a[1])
    }
}

/// Per-axis control bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for ControlBox {
    fn default() -> Self {
        Self::symmetric(DEFAULT_ACCEL_BOUND)
    }
}

impl ControlBox {
    pub fn symmetric(bound: f64) -> Self {
        Self {
            min: [-bound, -bound],
            max: [bound, bound],
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("control box", &[self.min[0], self.min[1], self.max[0], self.max[1]])?;
        if self.min[0] > self.max[0] || self.min[1] > self.max[1] {
            return Err(Error::invalid("control box", "min must not exceed max"));
        }
        Ok(())
    }

    pub fn rows(&self) -> [LinearConstraintRow; 4] {
        [
            LinearConstraintRow::new([1.0, 0.0], self.max[0], RowSource::Box { axis: Axis::X, upper: true }),
            LinearConstraintRow::new([-1.0, 0.0], -self.min[0], RowSource::Box { axis: Axis::X, upper: false }),
            LinearConstraintRow::new([0.0, 1.0], self.max[1], RowSource::Box { axis: Axis::Y, upper: true }),
            LinearConstraintRow::new([0.0, -1.0], -self.min[1], RowSource::Box { axis: Axis::Y, upper: false }),
        ]
    }

    pub fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput::new(u.ux.clamp(self.min[0], self.max[0]), u.uy.clamp(self.min[1], self.max[1]))
    }

    pub fn contains(&self, u: &ControlInput) -> bool {
        (self.min[0]..=self.max[0]).contains(&u.ux) && (self.min[1]..=self.max[1]).contains(&u.uy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Relaxed,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::Relaxed => "relaxed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpResult {
    pub status: QpStatus,
    pub u_star: ControlInput,
    /// Rows whose boundary passes through `u_star`.
    pub active_set: Vec<RowSource>,
    /// Slack added to every barrier row; zero unless relaxed.
    pub slack: f64,
}

pub fn objective(u: &ControlInput, u_ref: &ControlInput) -> f64 {
    let dx = u.ux - u_ref.ux;
    let dy = u.uy - u_ref.uy;
    dx * dx + dy * dy
}

fn validate_inputs(u_ref: &ControlInput, rows: &[LinearConstraintRow], bx: &ControlBox) -> Result<()> {
    ensure_finite("reference control", &[u_ref.ux, u_ref.uy])?;
    for r in rows {
        ensure_finite("constraint row", &[r.a[0], r.a[1], r.b])?;
    }
    bx.validate()
}

fn all_feasible(rows: &[LinearConstraintRow], u: &ControlInput) -> bool {
    rows.iter().all(|r| r.residual(u) <= FEASIBILITY_TOL)
}

fn active_sources(rows: &[LinearConstraintRow], u: &ControlInput) -> Vec<RowSource> {
    rows.iter()
        .filter(|r| r.normal() != Vec2::ZERO && r.residual(u).abs() <= FEASIBILITY_TOL)
        .map(|r| r.source)
        .collect()
}

/// Strictly better objective, ties broken towards the lexicographically
/// smallest control.
fn improves(cand: (f64, ControlInput), best: &Option<(f64, ControlInput)>) -> bool {
    match best {
        None => true,
        Some((obj, u)) => {
            cand.0 < *obj
                || (cand.0 == *obj
                    && (cand.1.ux < u.ux || (cand.1.ux == u.ux && cand.1.uy < u.uy)))
        }
    }
}

/// Puts a point that should lie on an axis-aligned row (box faces) exactly
/// on it, so box faces are not missed by a rounding error.
fn on_axis_row(row: &LinearConstraintRow, mut u: ControlInput) -> ControlInput {
    if row.a[1] == 0.0 && row.a[0] != 0.0 {
        u.ux = row.b / row.a[0];
    } else if row.a[0] == 0.0 && row.a[1] != 0.0 {
        u.uy = row.b / row.a[1];
    }
    u
}

/// Exact solution of the two-variable safety QP.
pub fn solve_qp2(u_ref: ControlInput, rows: &[LinearConstraintRow], bx: &ControlBox) -> Result<QpResult> {
    validate_inputs(&u_ref, rows, bx)?;
    let mut all: Vec<LinearConstraintRow> = Vec::with_capacity(rows.len() + 4);
    all.extend_from_slice(rows);
    all.extend_from_slice(&bx.rows());

    if all_feasible(&all, &u_ref) {
        return Ok(QpResult {
            status: QpStatus::Optimal,
            u_star: u_ref,
            active_set: active_sources(&all, &u_ref),
            slack: 0.0,
        });
    }

    let mut best: Option<(f64, ControlInput)> = None;
    let mut consider = |u: ControlInput| {
        if u.is_finite() && all_feasible(&all, &u) {
            let cand = (objective(&u, &u_ref), u);
            if improves(cand, &best) {
                best = Some(cand);
            }
        }
    };

    let r = u_ref.as_vec();
    for row in &all {
        let n = row.normal();
        let nn = n.norm_sq();
        if nn == 0.0 {
            continue;
        }
        let excess = n.dot(r) - row.b;
        consider(on_axis_row(row, (r - n * (excess / nn)).into()));
    }

    for (i, ri) in all.iter().enumerate() {
        for rj in &all[i + 1..] {
            let det = ri.a[0] * rj.a[1] - ri.a[1] * rj.a[0];
            if det.abs() < PARALLEL_EPS {
                continue;
            }
            let ux = (ri.b * rj.a[1] - ri.a[1] * rj.b) / det;
            let uy = (ri.a[0] * rj.b - ri.b * rj.a[0]) / det;
            consider(on_axis_row(rj, on_axis_row(ri, ControlInput::new(ux, uy))));
        }
    }

    Ok(match best {
        Some((_, u)) => QpResult {
            status: QpStatus::Optimal,
            u_star: u,
            active_set: active_sources(&all, &u),
            slack: 0.0,
        },
        None => QpResult {
            status: QpStatus::Infeasible,
            u_star: bx.clamp(u_ref),
            active_set: Vec::new(),
            slack: 0.0,
        },
    })
}

/// Solves `min |u - u_ref|^2 + rho xi^2` s.t. `a_i . u <= b_i + xi`,
/// `xi >= 0`, with the box kept hard. A feasible hard problem is returned
/// unrelaxed.
pub fn solve_slack_qp(
    u_ref: ControlInput,
    rows: &[LinearConstraintRow],
    bx: &ControlBox,
    rho: f64,
) -> Result<QpResult> {
    validate_inputs(&u_ref, rows, bx)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid("slack weight", "must be a finite value > 0"));
    }
    let hard = solve_qp2(u_ref, rows, bx)?;
    if hard.status == QpStatus::Optimal {
        return Ok(hard);
    }
    // Scaled slack s = sqrt(rho) xi turns the objective into a plain
    // squared distance in (ux, uy, s).
    let inv_scale = 1.0 / sqrt(rho);
    let mut cons: Vec<([f64; 3], f64, RowSource)> = Vec::with_capacity(rows.len() + 5);
    for r in rows {
        cons.push(([r.a[0], r.a[1], -inv_scale], r.b, r.source));
    }
    for r in bx.rows() {
        cons.push(([r.a[0], r.a[1], 0.0], r.b, r.source));
    }
    cons.push(([0.0, 0.0, -1.0], 0.0, RowSource::Slack));

    let z_ref = [u_ref.ux, u_ref.uy, 0.0];
    let feasible = |z: &[f64; 3]| cons.iter().all(|(a, b, _)| dot3(a, z) - b <= FEASIBILITY_TOL);
    let mut best: Option<(f64, [f64; 3])> = None;
    let n = cons.len();
    let mut subset = [0usize; 3];
    let mut visit = |idx: &[usize]| {
        let affine = || idx.iter().map(|&k| (&cons[k].0, cons[k].1));
        // The slack column is tiny next to the barrier normals, so the
        // second pass acts as a refinement step on the first.
        let Some(z) = project_affine(&z_ref, affine()).and_then(|z| project_affine(&z, affine())) else {
            return;
        };
        if !feasible(&z) {
            return;
        }
        let d = [z[0] - z_ref[0], z[1] - z_ref[1], z[2] - z_ref[2]];
        let obj = dot3(&d, &d);
        let better = match &best {
            None => true,
            Some((o, bz)) => obj < *o || (obj == *o && (z[0], z[1]) < (bz[0], bz[1])),
        };
        if better {
            best = Some((obj, z));
        }
    };
    visit(&[]);
    for i in 0..n {
        subset[0] = i;
        visit(&subset[..1]);
        for j in i + 1..n {
            subset[1] = j;
            visit(&subset[..2]);
            for k in j + 1..n {
                subset[2] = k;
                visit(&subset[..3]);
            }
        }
    }

    let (_, z) = best.ok_or(Error::Infeasible { step: None })?;
    let u = ControlInput::new(z[0], z[1]);
    let slack = (z[2] * inv_scale).max(0.0);
    let active_set = cons
        .iter()
        .filter(|(a, b, _)| (dot3(a, &z) - b).abs() <= FEASIBILITY_TOL)
        .map(|c| c.2)
        .filter(|s| *s != RowSource::Slack)
        .collect();
    let status = if slack > 0.0 { QpStatus::Relaxed } else { QpStatus::Optimal };
    Ok(QpResult {
        status,
        u_star: u,
        active_set,
        slack,
    })
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Euclidean projection of `z0` onto `{z : a_k . z = b_k}`; `None` when the
/// normals are linearly dependent.
fn project_affine<'a>(z0: &[f64; 3], rows: impl Iterator<Item = (&'a [f64; 3], f64)>) -> Option<[f64; 3]> {
    let rows: Vec<(&[f64; 3], f64)> = rows.collect();
    let k = rows.len();
    if k == 0 {
        return Some(*z0);
    }
    // (A A^T) lambda = A z0 - b
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..k {
        for j in 0..k {
            m[i][j] = dot3(rows[i].0, rows[j].0);
        }
        m[i][3] = dot3(rows[i].0, z0) - rows[i].1;
    }
    let scale = (0..k).map(|i| m[i][i]).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..k {
        let pivot = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..k {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut z = *z0;
    for i in 0..k {
        let lambda = m[i][3] / m[i][i];
        for (zc, ac) in z.iter_mut().zip(rows[i].0) {
            *zc -= lambda * ac;
        }
    }
    Some(z)
}

/// What to do when the hard-constrained QP has no solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfeasibilityPolicy {
    /// Fail with [`Error::Infeasible`].
    Error,
    /// Soften the barrier rows with a penalised slack.
    Slack { weight: f64 },
    /// Brake at full authority against the current velocity.
    MaxBrake,
}

impl Default for InfeasibilityPolicy {
    fn default() -> Self {
        InfeasibilityPolicy::Slack {
            weight: DEFAULT_SLACK_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub mode: BarrierMode,
    pub params: BarrierParams,
    pub control_box: ControlBox,
    /// Extra clearance added to the safe distance, meters.
    pub margin: f64,
    pub sensory_radius: f64,
    pub policy: InfeasibilityPolicy,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            mode: BarrierMode::Dhocbf,
            params: BarrierParams::default(),
            control_box: ControlBox::default(),
            margin: 0.0,
            sensory_radius: DEFAULT_SENSORY_RADIUS,
            policy: InfeasibilityPolicy::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.control_box.validate()?;
        ensure_finite("margin", &[self.margin])?;
        if self.margin < 0.0 {
            return Err(Error::invalid("margin", "must be >= 0"));
        }
        if !(self.sensory_radius > 0.0) {
            return Err(Error::invalid("sensory_radius", "must be > 0"));
        }
        if let InfeasibilityPolicy::Slack { weight } = self.policy {
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::invalid("slack weight", "must be a finite value > 0"));
            }
        }
        Ok(())
    }
}

/// Barrier quantities for one obstacle at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleAssessment {
    /// Signed surface distance (negative when overlapping).
    pub distance: f64,
    pub d_safe: f64,
    pub h: f64,
    /// Constraint row, present when the obstacle is within sensory range.
    pub row: Option<LinearConstraintRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub applied: ControlInput,
    pub qp: QpResult,
    /// One entry per input obstacle, in input order.
    pub obstacles: Vec<ObstacleAssessment>,
}

/// Evaluates every obstacle and builds rows for those within range.
pub fn assess_obstacles(ego: &EgoBody, obstacles: &[ObstacleState], cfg: &FilterConfig) -> Vec<ObstacleAssessment> {
    let placed_ego = ego.placed();
    obstacles
        .iter()
        .enumerate()
        .map(|(i, obs)| {
            let placed_obs = obs.placed();
            let distance = shape_min_distance(&placed_ego, &placed_obs).signed_distance();
            let d_safe = dynamic_safe_distance(&placed_ego, &placed_obs, cfg.margin);
            let ev = lie_derivatives(&ego.state, obs, d_safe, &cfg.params);
            let row = (distance <= cfg.sensory_radius).then(|| constraint_row(&ev, &cfg.params, cfg.mode, i));
            ObstacleAssessment {
                distance,
                d_safe,
                h: ev.h,
                row,
            }
        })
        .collect()
}

pub fn filter_control(
    u_ref: ControlInput,
    ego: &EgoBody,
    obstacles: &[ObstacleState],
    cfg: &FilterConfig,
) -> Result<FilterOutput> {
    let assessed = assess_obstacles(ego, obstacles, cfg);
    let rows: Vec<LinearConstraintRow> = assessed.iter().filter_map(|a| a.row).collect();
    let mut qp = solve_qp2(u_ref, &rows, &cfg.control_box)?;
    if qp.status == QpStatus::Infeasible {
        qp = match cfg.policy {
            InfeasibilityPolicy::Error => return Err(Error::Infeasible { step: None }),
            InfeasibilityPolicy::Slack { weight } => solve_slack_qp(u_ref, &rows, &cfg.control_box, weight)?,
            InfeasibilityPolicy::MaxBrake => QpResult {
                status: QpStatus::Infeasible,
                u_star: max_brake(ego, &cfg.control_box),
                active_set: Vec::new(),
                slack: 0.0,
            },
        };
    }
    Ok(FilterOutput {
        applied: qp.u_star,
        qp,
        obstacles: assessed,
    })
}

/// Box corner opposing the current velocity, per axis.
fn max_brake(ego: &EgoBody, bx: &ControlBox) -> ControlInput {
    let pick = |v: f64, lo: f64, hi: f64| {
        if v > 0.0 {
            lo
        } else if v < 0.0 {
            hi
        } else {
            0.0f64.clamp(lo, hi)
        }
    };
    ControlInput::new(
        pick(ego.state.vx, bx.min[0], bx.max[0]),
        pick(ego.state.vy, bx.min[1], bx.max[1]),
    )
}
