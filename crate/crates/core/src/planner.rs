//! Reference-control providers: PD tracking of a timed trajectory, replay of
//! a recorded trajectory, and an Intelligent Driver Model follower.

use alloc::vec::Vec;

use crate::dynamics::{ControlInput, EgoState, ObstacleState};
use crate::error::ensure_finite;
use crate::geometry::point_segment_closest;
use crate::math::{pow, sqrt, wrap_angle, Vec2};
use crate::{Error, Result};

/// One timed sample of a reference trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefSample {
    pub t: f64,
    pub position: Vec2,
    pub velocity: Vec2,
}

/// Time-stamped positions and velocities, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    samples: Vec<RefSample>,
}

/// Reference state at a query time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPoint {
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

/// Relative tolerance for snapping a query time onto a sample time.
const TIME_SNAP: f64 = 1e-9;

impl ReferenceTrajectory {
    pub fn new(samples: Vec<RefSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("reference", "trajectory has no samples"));
        }
        for s in &samples {
            ensure_finite(
                "reference",
                &[s.t, s.position.x, s.position.y, s.velocity.x, s.velocity.y],
            )?;
        }
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid("reference", "sample times must be strictly increasing"));
        }
        Ok(Self { samples })
    }

    /// Straight line at constant velocity, sampled every `dt` over
    /// `[0, duration]`.
    pub fn constant_velocity(start: Vec2, velocity: Vec2, duration: f64, dt: f64) -> Result<Self> {
        ensure_finite("reference", &[start.x, start.y, velocity.x, velocity.y, duration, dt])?;
        if !(dt > 0.0) || !(duration > 0.0) {
            return Err(Error::invalid("reference", "duration and dt must be > 0"));
        }
        let n = crate::math::ceil(duration / dt - TIME_SNAP) as usize;
        let samples = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                RefSample {
                    t,
                    position: start + velocity * t,
                    velocity,
                }
            })
            .collect();
        Self::new(samples)
    }

    pub fn samples(&self) -> &[RefSample] {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Linear interpolation of position and velocity; the feed-forward
    /// acceleration is the velocity slope of the active interval. Past the
    /// last sample the final point is held at rest; before the first the
    /// first sample is used as is.
    pub fn at(&self, t: f64) -> RefPoint {
        let s = &self.samples;
        let last = s[s.len() - 1];
        let snap = |a: f64, b: f64| (a - b).abs() <= TIME_SNAP * (1.0 + b.abs());
        if s.len() == 1 || (t > last.t && !snap(t, last.t)) {
            return RefPoint {
                position: last.position,
                velocity: Vec2::ZERO,
                acceleration: Vec2::ZERO,
            };
        }
        if t <= s[0].t || snap(t, s[0].t) {
            let first = s[0];
            return RefPoint {
                position: first.position,
                velocity: first.velocity,
                acceleration: slope(&first, &s[1]),
            };
        }
        // first k with s[k].t > t (after snapping t onto a sample time)
        let k = s.partition_point(|p| p.t <= t || snap(t, p.t));
        if k >= s.len() {
            return RefPoint {
                position: last.position,
                velocity: last.velocity,
                acceleration: Vec2::ZERO,
            };
        }
        let (a, b) = (s[k - 1], s[k]);
        if snap(t, a.t) {
            return RefPoint {
                position: a.position,
                velocity: a.velocity,
                acceleration: slope(&a, &b),
            };
        }
        let w = (t - a.t) / (b.t - a.t);
        RefPoint {
            position: a.position + (b.position - a.position) * w,
            velocity: a.velocity + (b.velocity - a.velocity) * w,
            acceleration: slope(&a, &b),
        }
    }

    /// Closest point on the position polyline: (arc length, lateral
    /// distance, unit tangent, foot point).
    pub fn project(&self, p: Vec2) -> PathProjection {
        let s = &self.samples;
        if s.len() == 1 {
            return PathProjection {
                arc_length: 0.0,
                lateral: p.distance(s[0].position),
                tangent: Vec2::new(1.0, 0.0),
                foot: s[0].position,
            };
        }
        let mut best: Option<PathProjection> = None;
        let mut arc = 0.0;
        for w in s.windows(2) {
            let (a, b) = (w[0].position, w[1].position);
            let seg = b - a;
            let len = seg.norm();
            if len == 0.0 {
                continue;
            }
            let proj = point_segment_closest(p, a, b);
            if best.is_none_or(|q| proj.distance < q.lateral) {
                best = Some(PathProjection {
                    arc_length: arc + proj.r.clamp(0.0, 1.0) * len,
                    lateral: proj.distance,
                    tangent: seg / len,
                    foot: proj.point,
                });
            }
            arc += len;
        }
        best.unwrap_or(PathProjection {
            arc_length: 0.0,
            lateral: p.distance(s[0].position),
            tangent: Vec2::new(1.0, 0.0),
            foot: s[0].position,
        })
    }
}

fn slope(a: &RefSample, b: &RefSample) -> Vec2 {
    (b.velocity - a.velocity) / (b.t - a.t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathProjection {
    pub arc_length: f64,
    pub lateral: f64,
    pub tangent: Vec2,
    pub foot: Vec2,
}

/// Proportional and derivative tracking gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdGains {
    /// Critically damped for `kp = 2`.
    fn default() -> Self {
        Self { kp: 2.0, kd: 2.83 }
    }
}

impl PdGains {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("gains", &[self.kp, self.kd])?;
        if self.kp < 0.0 || self.kd < 0.0 {
            return Err(Error::invalid("gains", "must be >= 0"));
        }
        Ok(())
    }
}

pub fn pd_tracking_control(ego: &EgoState, reference: &ReferenceTrajectory, t: f64, gains: &PdGains) -> ControlInput {
    let r = reference.at(t);
    let u = (r.position - ego.position()) * gains.kp + (r.velocity - ego.velocity()) * gains.kd + r.acceleration;
    u.into()
}

/// Tracks a recorded trajectory; same law as [`pd_tracking_control`].
pub fn replay_control(ego: &EgoState, recorded: &ReferenceTrajectory, t: f64, gains: &PdGains) -> ControlInput {
    pd_tracking_control(ego, recorded, t, gains)
}

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    /// Desired speed, m/s.
    pub v0: f64,
    /// Minimum spacing, m.
    pub s0: f64,
    /// Desired time headway, s.
    pub time_headway: f64,
    pub a_max: f64,
    /// Comfortable deceleration (positive), m/s^2.
    pub b_comf: f64,
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: 9.63,
            s0: 2.5,
            time_headway: 1.6,
            a_max: 2.0,
            b_comf: 3.0,
            delta: 4.0,
        }
    }
}

impl IdmParams {
    /// Braking cap as a multiple of the comfortable deceleration.
    pub const BRAKE_CAP: f64 = 2.0;

    pub fn validate(&self) -> Result<()> {
        let v = [self.v0, self.s0, self.time_headway, self.a_max, self.b_comf, self.delta];
        ensure_finite("idm", &v)?;
        if v.iter().any(|&x| x <= 0.0) {
            return Err(Error::invalid("idm", "all parameters must be > 0"));
        }
        Ok(())
    }

    fn max_brake(&self) -> f64 {
        -self.b_comf * Self::BRAKE_CAP
    }
}

/// Bumper-to-bumper gap to the leader and the approach rate
/// `v_ego - v_leader`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderGap {
    pub gap: f64,
    pub approach_rate: f64,
}

/// Longitudinal IDM acceleration; the free-road law when there is no leader.
pub fn idm_acceleration(v: f64, leader: Option<LeaderGap>, p: &IdmParams) -> f64 {
    let free = 1.0 - pow(v / p.v0, p.delta);
    let a = match leader {
        None => p.a_max * free,
        Some(l) if !(l.gap > 0.0) => return p.max_brake(),
        Some(l) => {
            let s_star = p.s0 + v * p.time_headway + v * l.approach_rate / (2.0 * sqrt(p.a_max * p.b_comf));
            let r = s_star / l.gap;
            p.a_max * (free - r * r)
        }
    };
    a.clamp(p.max_brake(), p.a_max)
}

/// Maximum lateral offset from the path for a leader candidate, m.
pub const LEADER_PATH_DISTANCE: f64 = 8.0;
/// Maximum heading difference for a leader candidate, radians (15 deg).
pub const LEADER_HEADING_TOL: f64 = 15.0 * core::f64::consts::PI / 180.0;

/// A selected leader and its position along the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub index: usize,
    pub state: ObstacleState,
    /// Arc-length distance from the ego's projection to the leader's.
    pub along_path: f64,
}

/// Nearest obstacle ahead on the path that is within 8 m laterally and
/// heads within 15 degrees of the path direction at the ego.
pub fn idm_select_leader(ego: &EgoState, path: &ReferenceTrajectory, others: &[ObstacleState]) -> Option<Leader> {
    let me = path.project(ego.position());
    let path_heading = me.tangent.heading();
    others
        .iter()
        .enumerate()
        .filter_map(|(index, o)| {
            let proj = path.project(o.position);
            let along = proj.arc_length - me.arc_length;
            let heading_ok = wrap_angle(o.heading - path_heading).abs() < LEADER_HEADING_TOL;
            (proj.lateral <= LEADER_PATH_DISTANCE && heading_ok && along > 0.0).then_some(Leader {
                index,
                state: *o,
                along_path: along,
            })
        })
        .min_by(|a, b| a.along_path.total_cmp(&b.along_path))
}

/// IDM along the path plus PD correction across it.
pub fn idm_control(
    ego: &EgoState,
    ego_half_length: f64,
    path: &ReferenceTrajectory,
    others: &[ObstacleState],
    p: &IdmParams,
    gains: &PdGains,
) -> ControlInput {
    let me = path.project(ego.position());
    let tangent = me.tangent;
    let normal = tangent.perp();
    let v = ego.velocity();
    let speed = v.dot(tangent);
    let leader = idm_select_leader(ego, path, others).map(|l| LeaderGap {
        gap: l.along_path - ego_half_length - l.state.shape.half_length(),
        approach_rate: speed - l.state.velocity.dot(tangent),
    });
    let a_long = idm_acceleration(speed.max(0.0), leader, p);
    let offset = (me.foot - ego.position()).dot(normal);
    let a_lat = gains.kp * offset - gains.kd * v.dot(normal);
    (tangent * a_long + normal * a_lat).into()
}
