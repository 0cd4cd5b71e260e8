//! Independent reference computations used to cross-check the solvers.
//!
//! These take a deliberately different route from the production code:
//! the QP oracles search a uniform grid over the control box, and the
//! geometry oracle samples shape boundaries and measures each sample against
//! the other shape in that shape's local frame.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::dynamics::ControlInput;
use crate::geometry::{PlacedShape, ShapeSpec};
use crate::math::{ceil, round, Vec2};
use crate::safety_filter::{objective, ControlBox, LinearConstraintRow, QpResult, QpStatus};
use crate::{Error, Result};

/// Uniform grid on one axis with spacing at most `resolution`.
#[derive(Debug, Clone, Copy)]
struct AxisGrid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl AxisGrid {
    fn new(lo: f64, hi: f64, resolution: f64) -> Self {
        let n = if hi > lo { ceil((hi - lo) / resolution) as usize } else { 0 };
        Self { lo, hi, n }
    }

    fn at(&self, i: usize) -> f64 {
        if i == self.n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * (i as f64 / self.n as f64)
        }
    }

    /// Index in `[i0, i1]` whose coordinate is closest to `v`; ties go low.
    fn nearest(&self, v: f64, i0: usize, i1: usize) -> usize {
        let guess = if self.n == 0 {
            0
        } else {
            let f = (v - self.lo) / (self.hi - self.lo) * self.n as f64;
            round(f.clamp(0.0, self.n as f64)) as usize
        };
        let lo = guess.saturating_sub(1).clamp(i0, i1);
        let hi = (guess + 1).clamp(i0, i1);
        let mut best = lo;
        for i in lo..=hi {
            if (self.at(i) - v).abs() < (self.at(best) - v).abs() {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    lb: f64,
    i: (usize, usize),
    j: (usize, usize),
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    // min-heap on the lower bound
    fn cmp(&self, o: &Self) -> Ordering {
        o.lb.total_cmp(&self.lb).then_with(|| (o.i, o.j).cmp(&(self.i, self.j)))
    }
}

fn dist_sq_to_interval(v: f64, lo: f64, hi: f64) -> f64 {
    let d = if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        0.0
    };
    d * d
}

struct GridSearch<'a> {
    gx: AxisGrid,
    gy: AxisGrid,
    u_ref: ControlInput,
    rows: &'a [LinearConstraintRow],
}

impl GridSearch<'_> {
    fn corners(&self, c: &Cell) -> [ControlInput; 4] {
        let (x0, x1) = (self.gx.at(c.i.0), self.gx.at(c.i.1));
        let (y0, y1) = (self.gy.at(c.j.0), self.gy.at(c.j.1));
        [
            ControlInput::new(x0, y0),
            ControlInput::new(x1, y0),
            ControlInput::new(x0, y1),
            ControlInput::new(x1, y1),
        ]
    }

    fn cell(&self, i: (usize, usize), j: (usize, usize), extra_lb: impl Fn(&Self, &[ControlInput; 4]) -> f64) -> Cell {
        let mut c = Cell { lb: 0.0, i, j };
        let k = self.corners(&c);
        c.lb = dist_sq_to_interval(self.u_ref.ux, k[0].ux, k[3].ux)
            + dist_sq_to_interval(self.u_ref.uy, k[0].uy, k[3].uy)
            + extra_lb(self, &k);
        c
    }

    fn split(&self, c: &Cell) -> Option<[((usize, usize), (usize, usize)); 2]> {
        let wi = c.i.1 - c.i.0;
        let wj = c.j.1 - c.j.0;
        if wi == 0 && wj == 0 {
            None
        } else if wi >= wj {
            let m = c.i.0 + wi / 2;
            Some([((c.i.0, m), c.j), ((m + 1, c.i.1), c.j)])
        } else {
            let m = c.j.0 + wj / 2;
            Some([(c.i, (c.j.0, m)), (c.i, (m + 1, c.j.1))])
        }
    }
}

fn better(cand: (f64, ControlInput), best: &Option<(f64, ControlInput)>) -> bool {
    match best {
        None => true,
        Some((o, u)) => cand.0 < *o || (cand.0 == *o && (cand.1.ux, cand.1.uy) < (u.ux, u.uy)),
    }
}

fn check_resolution(resolution: f64, bx: &ControlBox) -> Result<()> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::invalid("resolution", "must be a finite value > 0"));
    }
    bx.validate()
}

/// Best grid point of the box (spacing at most `resolution` per axis) that
/// satisfies every row exactly. The search is exhaustive over the grid;
/// cells are discarded only when a bound proves none of their points can
/// win.
pub fn brute_force_qp(
    u_ref: ControlInput,
    rows: &[LinearConstraintRow],
    bx: &ControlBox,
    resolution: f64,
) -> Result<QpResult> {
    check_resolution(resolution, bx)?;
    let s = GridSearch {
        gx: AxisGrid::new(bx.min[0], bx.max[0], resolution),
        gy: AxisGrid::new(bx.min[1], bx.max[1], resolution),
        u_ref,
        rows,
    };
    let no_extra = |_: &GridSearch, _: &[ControlInput; 4]| 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(s.cell((0, s.gx.n), (0, s.gy.n), no_extra));
    let mut best: Option<(f64, ControlInput)> = None;

    while let Some(c) = heap.pop() {
        if best.is_some_and(|(o, _)| c.lb > o) {
            break;
        }
        let k = s.corners(&c);
        let residuals = |r: &LinearConstraintRow| k.map(|u| r.residual(&u));
        if rows.iter().any(|r| residuals(r).iter().all(|&v| v > 0.0)) {
            continue; // every grid point in the cell violates this row
        }
        if rows.iter().all(|r| residuals(r).iter().all(|&v| v <= 0.0)) {
            // whole cell feasible; objective separable per axis
            let i = s.gx.nearest(u_ref.ux, c.i.0, c.i.1);
            let j = s.gy.nearest(u_ref.uy, c.j.0, c.j.1);
            let u = ControlInput::new(s.gx.at(i), s.gy.at(j));
            let cand = (objective(&u, &u_ref), u);
            if better(cand, &best) {
                best = Some(cand);
            }
            continue;
        }
        if let Some(halves) = s.split(&c) {
            for (i, j) in halves {
                heap.push(s.cell(i, j, no_extra));
            }
        }
    }

    Ok(match best {
        Some((_, u)) => QpResult {
            status: QpStatus::Optimal,
            u_star: u,
            active_set: Vec::new(),
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

/// Penalised objective of the slack-relaxed problem at a fixed control:
/// the optimal slack is the largest row violation.
pub fn slack_objective(u: &ControlInput, u_ref: &ControlInput, rows: &[LinearConstraintRow], rho: f64) -> f64 {
    let xi = rows.iter().map(|r| r.residual(u)).fold(0.0, f64::max);
    objective(u, u_ref) + rho * xi * xi
}

/// Grid minimiser of [`slack_objective`] over the box.
pub fn brute_force_slack_qp(
    u_ref: ControlInput,
    rows: &[LinearConstraintRow],
    bx: &ControlBox,
    rho: f64,
    resolution: f64,
) -> Result<(ControlInput, f64)> {
    check_resolution(resolution, bx)?;
    let s = GridSearch {
        gx: AxisGrid::new(bx.min[0], bx.max[0], resolution),
        gy: AxisGrid::new(bx.min[1], bx.max[1], resolution),
        u_ref,
        rows,
    };
    // A row's violation over a cell is at least its smallest corner value.
    let penalty_lb = |s: &GridSearch, k: &[ControlInput; 4]| {
        let xi = s
            .rows
            .iter()
            .map(|r| k.iter().map(|u| r.residual(u)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        rho * xi * xi
    };
    let mut heap = BinaryHeap::new();
    heap.push(s.cell((0, s.gx.n), (0, s.gy.n), penalty_lb));
    let mut best: Option<(f64, ControlInput)> = None;
    while let Some(c) = heap.pop() {
        if best.is_some_and(|(o, _)| c.lb > o) {
            break;
        }
        match s.split(&c) {
            Some(halves) => {
                for (i, j) in halves {
                    heap.push(s.cell(i, j, penalty_lb));
                }
            }
            None => {
                let u = ControlInput::new(s.gx.at(c.i.0), s.gy.at(c.j.0));
                let cand = (slack_objective(&u, &u_ref, rows, rho), u);
                if better(cand, &best) {
                    best = Some(cand);
                }
            }
        }
    }
    let (obj, u) = best.expect("box is nonempty");
    Ok((u, obj))
}

/// Points spaced along the boundary of a placed shape. Rectangles get an
/// equal share per edge with both corners included.
pub fn boundary_samples(shape: &PlacedShape, per_perimeter: usize) -> Vec<Vec2> {
    let per_perimeter = per_perimeter.max(4);
    match shape.shape {
        ShapeSpec::Point => alloc::vec![shape.center],
        ShapeSpec::Circle { radius } => (0..per_perimeter)
            .map(|k| {
                let a = 2.0 * core::f64::consts::PI * k as f64 / per_perimeter as f64;
                shape.center + Vec2::from_heading(a) * radius
            })
            .collect(),
        ShapeSpec::Rectangle { width, length } => {
            let (hl, hw) = (0.5 * length, 0.5 * width);
            let local = [
                Vec2::new(hl, hw),
                Vec2::new(-hl, hw),
                Vec2::new(-hl, -hw),
                Vec2::new(hl, -hw),
            ];
            let per_edge = per_perimeter / 4;
            let mut out = Vec::with_capacity(4 * (per_edge + 1));
            for e in 0..4 {
                let (p, q) = (local[e], local[(e + 1) % 4]);
                for k in 0..=per_edge {
                    let t = k as f64 / per_edge as f64;
                    out.push(shape.center + (p + (q - p) * t).rotated(shape.heading));
                }
            }
            out
        }
    }
}

/// Distance from a point to a filled shape (zero inside).
pub fn point_to_shape(p: Vec2, shape: &PlacedShape) -> f64 {
    match shape.shape {
        ShapeSpec::Point => p.distance(shape.center),
        ShapeSpec::Circle { radius } => (p.distance(shape.center) - radius).max(0.0),
        ShapeSpec::Rectangle { width, length } => {
            let rel = (p - shape.center).rotated(-shape.heading);
            let clamped = Vec2::new(rel.x.clamp(-0.5 * length, 0.5 * length), rel.y.clamp(-0.5 * width, 0.5 * width));
            rel.distance(clamped)
        }
    }
}

/// Sampled surface distance between two shapes (zero when they overlap).
pub fn sampled_min_distance(a: &PlacedShape, b: &PlacedShape, per_perimeter: usize) -> f64 {
    let ab = boundary_samples(a, per_perimeter)
        .into_iter()
        .map(|p| point_to_shape(p, b))
        .fold(f64::INFINITY, f64::min);
    let ba = boundary_samples(b, per_perimeter)
        .into_iter()
        .map(|p| point_to_shape(p, a))
        .fold(f64::INFINITY, f64::min);
    ab.min(ba)
}
