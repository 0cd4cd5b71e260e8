//! Double-integrator ego model, scripted obstacle motion, and sensory-range
//! selection.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::ensure_finite;
use crate::geometry::{shape_min_distance, PlacedShape, ShapeSpec};
use crate::math::Vec2;
use crate::{Error, Result};

/// Default control period in seconds.
pub const DEFAULT_DT: f64 = 0.1;
/// Default sensory range in meters.
pub const DEFAULT_SENSORY_RADIUS: f64 = 8.0;

/// Planar position and velocity of the controlled vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EgoState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl EgoState {
    pub const fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self { x, y, vx, vy }
    }

    pub fn from_parts(position: Vec2, velocity: Vec2) -> Self {
        Self::new(position.x, position.y, velocity.x, velocity.y)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("ego state", &[self.x, self.y, self.vx, self.vy])
    }

    /// Heading of the velocity, or `fallback` when standing still.
    pub fn heading_or(&self, fallback: f64) -> f64 {
        if self.vx == 0.0 && self.vy == 0.0 {
            fallback
        } else {
            self.velocity().heading()
        }
    }
}

/// Ego state together with its footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoBody {
    pub state: EgoState,
    pub shape: ShapeSpec,
    pub heading: f64,
}

impl EgoBody {
    /// A point-sized ego, heading taken from its velocity.
    pub fn point(state: EgoState) -> Self {
        Self {
            state,
            shape: ShapeSpec::Point,
            heading: state.heading_or(0.0),
        }
    }

    pub fn placed(&self) -> PlacedShape {
        self.shape.placed(self.state.position(), self.heading)
    }
}

/// Longitudinal and lateral acceleration command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub ux: f64,
    pub uy: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { ux: 0.0, uy: 0.0 };

    pub const fn new(ux: f64, uy: f64) -> Self {
        Self { ux, uy }
    }

    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.ux, self.uy)
    }

    pub fn is_finite(&self) -> bool {
        self.ux.is_finite() && self.uy.is_finite()
    }
}

impl From<Vec2> for ControlInput {
    fn from(v: Vec2) -> Self {
        ControlInput::new(v.x, v.y)
    }
}

/// Integrates the double integrator over `dt` with `u` held constant.
pub fn step_ego(s: &EgoState, u: &ControlInput, dt: f64) -> Result<EgoState> {
    s.validate()?;
    ensure_finite("control", &[u.ux, u.uy])?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be a finite value > 0"));
    }
    let half_dt2 = 0.5 * dt * dt;
    Ok(EgoState {
        x: s.x + s.vx * dt + u.ux * half_dt2,
        y: s.y + s.vy * dt + u.uy * half_dt2,
        vx: s.vx + u.ux * dt,
        vy: s.vy + u.uy * dt,
    })
}

/// One piece of an obstacle's velocity script, active from `start_time`
/// until the next segment starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSegment {
    pub start_time: f64,
    pub velocity: Vec2,
}

/// Shape and piecewise-constant velocity script of a surrounding vehicle.
/// Obstacles never react to the ego.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleProfile {
    pub id: String,
    pub shape: ShapeSpec,
    pub initial_position: Vec2,
    segments: Vec<MotionSegment>,
}

impl ObstacleProfile {
    pub fn new(
        id: impl Into<String>,
        shape: ShapeSpec,
        initial_position: Vec2,
        segments: Vec<MotionSegment>,
    ) -> Result<Self> {
        shape.validate()?;
        if !initial_position.is_finite() {
            return Err(Error::invalid("initial_position", "must be finite"));
        }
        let Some(first) = segments.first() else {
            return Err(Error::invalid("segments", "at least one segment is required"));
        };
        if first.start_time != 0.0 {
            return Err(Error::invalid("segments", "first segment must start at t = 0"));
        }
        for seg in &segments {
            ensure_finite("segments", &[seg.start_time, seg.velocity.x, seg.velocity.y])?;
        }
        if segments.windows(2).any(|w| w[1].start_time <= w[0].start_time) {
            return Err(Error::invalid("segments", "start times must be strictly increasing"));
        }
        Ok(Self {
            id: id.into(),
            shape,
            initial_position,
            segments,
        })
    }

    /// An obstacle moving at one constant velocity.
    pub fn constant_velocity(id: impl Into<String>, shape: ShapeSpec, position: Vec2, velocity: Vec2) -> Result<Self> {
        Self::new(
            id,
            shape,
            position,
            alloc::vec![MotionSegment {
                start_time: 0.0,
                velocity
            }],
        )
    }

    pub fn segments(&self) -> &[MotionSegment] {
        &self.segments
    }
}

/// Snapshot of an obstacle at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub shape: ShapeSpec,
    pub heading: f64,
}

impl ObstacleState {
    pub fn placed(&self) -> PlacedShape {
        self.shape.placed(self.position, self.heading)
    }
}

/// Evaluates the motion script at `t` (negative times clamp to 0).
pub fn obstacle_state_at(p: &ObstacleProfile, t: f64) -> ObstacleState {
    let t = t.max(0.0);
    let mut position = p.initial_position;
    let mut heading = 0.0;
    let mut velocity = Vec2::ZERO;
    for (i, seg) in p.segments.iter().enumerate() {
        if seg.start_time > t {
            break;
        }
        let end = p.segments.get(i + 1).map_or(t, |next| next.start_time.min(t));
        position += seg.velocity * (end - seg.start_time);
        velocity = seg.velocity;
        if velocity != Vec2::ZERO {
            heading = velocity.heading();
        }
    }
    ObstacleState {
        position,
        velocity,
        shape: p.shape,
        heading,
    }
}

/// Surface distance from the ego to an obstacle (negative on overlap).
pub fn surface_distance(ego: &PlacedShape, obs: &ObstacleState) -> f64 {
    shape_min_distance(ego, &obs.placed()).signed_distance()
}

/// Indices of the obstacles whose surface distance to the ego is within
/// `radius` (inclusive), in input order.
pub fn in_range_indices(ego: &PlacedShape, all: &[ObstacleState], radius: f64) -> Vec<usize> {
    all.iter()
        .enumerate()
        .filter(|(_, o)| surface_distance(ego, o) <= radius)
        .map(|(i, _)| i)
        .collect()
}

pub fn obstacles_in_range(ego: &PlacedShape, all: &[ObstacleState], radius: f64) -> Vec<ObstacleState> {
    in_range_indices(ego, all, radius).into_iter().map(|i| all[i]).collect()
}
