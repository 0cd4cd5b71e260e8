//! Distance barrier `h = |p - p_obs|^2 - d_safe^2`, its Lie derivatives
//! along the ego and obstacle flows, and the second-order half-plane
//! constraints on the control.
//!
//! Both class-K functions are linear with slopes `beta1`, `beta2`, and the
//! time derivative of `beta1` is zero. With obstacle acceleration taken as
//! zero, the second-order condition reads
//!
//! ```text
//! -LgLf h . u <= drift + (beta1 + beta2) (Lf h + Lf_obs h) + beta1 beta2 h
//! ```
//!
//! where `drift` is `2|v|^2 + 2|v_obs|^2` in the [`DriftVariant::PaperLiteral`]
//! form and `2|v - v_obs|^2` (the true second derivative of `h` at zero
//! control) in the [`DriftVariant::ExactRelative`] form.

use crate::dynamics::{ControlInput, EgoState, ObstacleState};
use crate::error::ensure_finite;
use crate::math::Vec2;
use crate::safety_filter::{LinearConstraintRow, RowSource};
use crate::{Error, Result};

/// Absolute tolerance on the residual of an admissibility check.
pub const ADMISSIBLE_TOL: f64 = 1e-9;

/// Second-order drift term used in the dynamic constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftVariant {
    /// `2|v|^2 + 2|v_obs|^2`.
    PaperLiteral,
    /// `2|v - v_obs|^2`.
    #[default]
    ExactRelative,
}

/// Which constraint the filter builds for each obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BarrierMode {
    /// Treats every obstacle as if it were standing still.
    Hocbf,
    /// Includes the obstacle's motion.
    #[default]
    Dhocbf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub beta1: f64,
    pub beta2: f64,
    pub variant: DriftVariant,
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 1.0,
            variant: DriftVariant::ExactRelative,
        }
    }
}

impl BarrierParams {
    /// The first class-K slope is constant in time.
    pub const BETA1_DOT: f64 = 0.0;

    pub fn new(beta1: f64, beta2: f64, variant: DriftVariant) -> Result<Self> {
        let p = Self { beta1, beta2, variant };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("beta", &[self.beta1, self.beta2])?;
        if self.beta1 <= 0.0 || self.beta2 <= 0.0 {
            return Err(Error::invalid("beta", "beta1 and beta2 must be > 0"));
        }
        Ok(())
    }
}

/// Barrier value and the Lie derivatives entering the constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEval {
    pub h: f64,
    pub lf_h: f64,
    pub lfobs_h: f64,
    pub lglf_h: [f64; 2],
    pub second_order_drift: f64,
    /// Ego velocity, kept for the static constraint.
    pub ego_velocity: Vec2,
}

pub fn barrier_value(ego: &EgoState, obs: &ObstacleState, d_safe: f64) -> f64 {
    let dx = ego.x - obs.position.x;
    let dy = ego.y - obs.position.y;
    dx * dx + dy * dy - d_safe * d_safe
}

pub fn lie_derivatives(ego: &EgoState, obs: &ObstacleState, d_safe: f64, p: &BarrierParams) -> BarrierEval {
    let dx = ego.x - obs.position.x;
    let dy = ego.y - obs.position.y;
    let (ovx, ovy) = (obs.velocity.x, obs.velocity.y);
    let second_order_drift = match p.variant {
        DriftVariant::PaperLiteral => 2.0 * speed_sq(ego.vx, ego.vy) + 2.0 * speed_sq(ovx, ovy),
        DriftVariant::ExactRelative => 2.0 * speed_sq(ego.vx - ovx, ego.vy - ovy),
    };
    BarrierEval {
        h: barrier_value(ego, obs, d_safe),
        lf_h: 2.0 * dx * ego.vx + 2.0 * dy * ego.vy,
        lfobs_h: -2.0 * dx * ovx - 2.0 * dy * ovy,
        lglf_h: [2.0 * dx, 2.0 * dy],
        second_order_drift,
        ego_velocity: ego.velocity(),
    }
}

#[inline]
fn speed_sq(vx: f64, vy: f64) -> f64 {
    vx * vx + vy * vy
}

/// Constraint including the obstacle motion terms.
pub fn dhocbf_row(ev: &BarrierEval, p: &BarrierParams, source: RowSource) -> LinearConstraintRow {
    let b = ev.second_order_drift
        + (p.beta1 + p.beta2) * (ev.lf_h + ev.lfobs_h)
        + (BarrierParams::BETA1_DOT + p.beta1 * p.beta2) * ev.h;
    LinearConstraintRow::new([-ev.lglf_h[0], -ev.lglf_h[1]], b, source)
}

/// Static constraint: obstacle terms dropped, drift `2|v|^2` only.
pub fn hocbf_row(ev: &BarrierEval, p: &BarrierParams, source: RowSource) -> LinearConstraintRow {
    let v = ev.ego_velocity;
    let b = 2.0 * speed_sq(v.x, v.y)
        + (p.beta1 + p.beta2) * ev.lf_h
        + (BarrierParams::BETA1_DOT + p.beta1 * p.beta2) * ev.h;
    LinearConstraintRow::new([-ev.lglf_h[0], -ev.lglf_h[1]], b, source)
}

pub fn constraint_row(ev: &BarrierEval, p: &BarrierParams, mode: BarrierMode, obstacle: usize) -> LinearConstraintRow {
    match mode {
        BarrierMode::Dhocbf => dhocbf_row(ev, p, RowSource::Dhocbf(obstacle)),
        BarrierMode::Hocbf => hocbf_row(ev, p, RowSource::Hocbf(obstacle)),
    }
}

/// Membership of `u` in the closed half-plane of the selected constraint.
pub fn cbf_admissible(ev: &BarrierEval, u: &ControlInput, p: &BarrierParams, mode: BarrierMode) -> bool {
    constraint_row(ev, p, mode, 0).residual(u) <= ADMISSIBLE_TOL
}
