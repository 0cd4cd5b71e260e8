//! Closed-loop execution: sense, reference, barrier rows, QP, integrate,
//! log. Also builds the four validity-experiment presets and runs the
//! class-K slope sweep used to tune them.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::barrier::{BarrierMode, DriftVariant};
use crate::dynamics::{
    obstacle_state_at, step_ego, ControlInput, EgoBody, EgoState, MotionSegment, ObstacleProfile, ObstacleState,
};
use crate::error::ensure_finite;
use crate::geometry::ShapeSpec;
use crate::math::{ceil, Vec2};
use crate::planner::{idm_control, pd_tracking_control, replay_control, IdmParams, PdGains, ReferenceTrajectory};
use crate::safety_filter::{filter_control, FilterConfig, InfeasibilityPolicy, QpStatus, RowSource};
use crate::{Error, Result};

/// Where the reference control comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSource {
    /// PD tracking of a scripted timed trajectory.
    Scripted(ReferenceTrajectory),
    /// PD tracking of a recorded trajectory.
    Replay(ReferenceTrajectory),
    /// IDM along a path, PD across it.
    Idm { path: ReferenceTrajectory, params: IdmParams },
}

impl ReferenceSource {
    pub fn trajectory(&self) -> &ReferenceTrajectory {
        match self {
            ReferenceSource::Scripted(t) | ReferenceSource::Replay(t) => t,
            ReferenceSource::Idm { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub ego_init: EgoState,
    pub ego_shape: ShapeSpec,
    pub reference: ReferenceSource,
    pub gains: PdGains,
    pub obstacles: Vec<ObstacleProfile>,
    pub filter: FilterConfig,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.ego_init.validate()?;
        self.ego_shape.validate()?;
        self.gains.validate()?;
        self.filter.validate()?;
        if let ReferenceSource::Idm { params, .. } = &self.reference {
            params.validate()?;
        }
        ensure_finite("dt", &[self.dt])?;
        ensure_finite("t_end", &[self.t_end])?;
        if self.dt <= 0.0 {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if self.t_end <= 0.0 {
            return Err(Error::invalid("t_end", "must be > 0"));
        }
        Ok(())
    }

    /// Number of control steps, `ceil(t_end / dt)`.
    pub fn step_count(&self) -> usize {
        ceil(self.t_end / self.dt - 1e-9) as usize
    }

    pub fn obstacle_states(&self, t: f64) -> Vec<ObstacleState> {
        self.obstacles.iter().map(|p| obstacle_state_at(p, t)).collect()
    }

    /// Reference positions at the record times of a trace.
    pub fn reference_positions(&self, trace: &[TraceRecord]) -> Vec<Vec2> {
        let traj = self.reference.trajectory();
        trace.iter().map(|r| traj.at(r.t).position).collect()
    }
}

/// Per-obstacle quantities logged at each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleRecord {
    /// Signed surface distance, negative when overlapping.
    pub distance: f64,
    pub d_safe: f64,
    pub h: f64,
    /// `a . u_applied - b` of this obstacle's row; `None` when out of range.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub ego: EgoState,
    pub u_ref: ControlInput,
    pub u_applied: ControlInput,
    pub obstacles: Vec<ObstacleRecord>,
    pub status: QpStatus,
    pub active_set: Vec<RowSource>,
    pub slack: f64,
}

impl TraceRecord {
    /// Smallest surface distance over obstacles; `+inf` with none.
    pub fn min_distance(&self) -> f64 {
        self.obstacles.iter().map(|o| o.distance).fold(f64::INFINITY, f64::min)
    }

    pub fn min_h(&self) -> f64 {
        self.obstacles.iter().map(|o| o.h).fold(f64::INFINITY, f64::min)
    }

    fn barrier_active(&self) -> bool {
        self.active_set
            .iter()
            .any(|s| matches!(s, RowSource::Dhocbf(_) | RowSource::Hocbf(_)))
    }
}

/// Runs a scenario to completion. Collisions are logged, not fatal; only an
/// infeasible QP under [`InfeasibilityPolicy::Error`] aborts.
pub fn run_scenario(s: &Scenario) -> Result<Vec<TraceRecord>> {
    s.validate()?;
    let steps = s.step_count();
    let mut trace = Vec::with_capacity(steps);
    let mut ego = s.ego_init;
    let mut heading = ego.heading_or(0.0);
    for k in 0..steps {
        let t = k as f64 * s.dt;
        let obstacles = s.obstacle_states(t);
        heading = ego.heading_or(heading);
        let body = EgoBody {
            state: ego,
            shape: s.ego_shape,
            heading,
        };
        let u_ref = match &s.reference {
            ReferenceSource::Scripted(traj) => pd_tracking_control(&ego, traj, t, &s.gains),
            ReferenceSource::Replay(traj) => replay_control(&ego, traj, t, &s.gains),
            ReferenceSource::Idm { path, params } => {
                idm_control(&ego, s.ego_shape.half_length(), path, &obstacles, params, &s.gains)
            }
        };
        let out = filter_control(u_ref, &body, &obstacles, &s.filter).map_err(|e| e.at_step(k))?;
        let records = out
            .obstacles
            .iter()
            .map(|a| ObstacleRecord {
                distance: a.distance,
                d_safe: a.d_safe,
                h: a.h,
                residual: a.row.map(|r| r.residual(&out.applied)),
            })
            .collect();
        trace.push(TraceRecord {
            t,
            ego,
            u_ref,
            u_applied: out.applied,
            obstacles: records,
            status: out.qp.status,
            active_set: out.qp.active_set,
            slack: out.qp.slack,
        });
        ego = step_ego(&ego, &out.applied, s.dt)?;
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    SpeedSweep,
    RadiusSweep,
    Perturbation,
    MultiObstacle,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::SpeedSweep,
        PresetName::RadiusSweep,
        PresetName::Perturbation,
        PresetName::MultiObstacle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::SpeedSweep => "speed_sweep",
            PresetName::RadiusSweep => "radius_sweep",
            PresetName::Perturbation => "perturbation",
            PresetName::MultiObstacle => "multi_obstacle",
        }
    }
}

impl core::str::FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Fixed geometry of the validity presets. None of these values are
/// dictated by the experiments being reproduced except the obstacle speeds
/// and the minimum reference speed; everything else can be overridden.
pub mod preset_constants {
    /// Reference speed along +x, m/s (must exceed 5.2).
    pub const REFERENCE_SPEED: f64 = 6.0;
    pub const T_END: f64 = 10.0;
    pub const DT: f64 = 0.1;
    /// Sensory radius used by the presets, m.
    pub const SENSORY_RADIUS: f64 = 30.0;
    /// Lateral offset of obstacle centers from the reference line, m.
    pub const LATERAL_OFFSET: f64 = 0.5;
    /// Initial along-track distance to the obstacle, m.
    pub const OBSTACLE_AHEAD: f64 = 15.0;
    pub const OBSTACLE_RADIUS: f64 = 1.0;
    pub const SPEEDS: [f64; 3] = [0.0, 1.0, 3.0];
    pub const SWEEP_RADII: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
    pub const RADIUS_SWEEP_SPEED: f64 = 2.0;
    /// Perturbation obstacle position; it starts moving at `t_end / 2`.
    pub const PERTURBATION_AHEAD: f64 = 36.0;
    pub const PERTURBATION_VELOCITY: f64 = -1.0;
}

/// Scenario-level overrides applied on top of a preset or file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub variant: Option<DriftVariant>,
    pub mode: Option<BarrierMode>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub margin: Option<f64>,
    pub policy: Option<InfeasibilityPolicy>,
    pub sensory_radius: Option<f64>,
    pub accel_bound: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        let f = &mut s.filter;
        if let Some(v) = self.beta1 {
            f.params.beta1 = v;
        }
        if let Some(v) = self.beta2 {
            f.params.beta2 = v;
        }
        if let Some(v) = self.variant {
            f.params.variant = v;
        }
        if let Some(v) = self.mode {
            f.mode = v;
        }
        if let Some(v) = self.margin {
            f.margin = v;
        }
        if let Some(v) = self.policy {
            f.policy = v;
        }
        if let Some(v) = self.sensory_radius {
            f.sensory_radius = v;
        }
        if let Some(v) = self.accel_bound {
            f.control_box = crate::safety_filter::ControlBox::symmetric(v);
        }
        if let Some(v) = self.dt {
            s.dt = v;
        }
        if let Some(v) = self.t_end {
            s.t_end = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
    }
}

fn circle(radius: f64) -> ShapeSpec {
    ShapeSpec::Circle { radius }
}

fn mode_tag(mode: BarrierMode) -> &'static str {
    match mode {
        BarrierMode::Hocbf => "hocbf",
        BarrierMode::Dhocbf => "dhocbf",
    }
}

/// Builds the scenarios of a validity preset for one barrier mode.
pub fn build_preset(name: PresetName, mode: BarrierMode, overrides: &Overrides) -> Result<Vec<Scenario>> {
    use preset_constants::*;
    let t_end = overrides.t_end.unwrap_or(T_END);
    let dt = overrides.dt.unwrap_or(DT);
    // the reference outlasts any run so t_end overrides keep a moving target
    let reference = ReferenceTrajectory::constant_velocity(Vec2::ZERO, Vec2::new(REFERENCE_SPEED, 0.0), t_end.max(T_END) + 1.0, DT)?;
    let base = |label: String, obstacles: Vec<ObstacleProfile>| {
        let mut s = Scenario {
            name: format!("{}_{}_{}", name.as_str(), label, mode_tag(mode)),
            ego_init: EgoState::new(0.0, 0.0, REFERENCE_SPEED, 0.0),
            ego_shape: ShapeSpec::Point,
            reference: ReferenceSource::Scripted(reference.clone()),
            gains: PdGains::default(),
            obstacles,
            filter: FilterConfig {
                mode,
                sensory_radius: SENSORY_RADIUS,
                ..FilterConfig::default()
            },
            dt,
            t_end,
            seed: 0,
        };
        overrides.apply(&mut s);
        s.filter.mode = mode;
        s
    };
    let ahead = Vec2::new(OBSTACLE_AHEAD, LATERAL_OFFSET);

    let scenarios = match name {
        PresetName::SpeedSweep => SPEEDS
            .iter()
            .map(|&v| {
                let obs = ObstacleProfile::constant_velocity("obstacle", circle(OBSTACLE_RADIUS), ahead, Vec2::new(v, 0.0))?;
                Ok(base(format!("v{v}"), vec![obs]))
            })
            .collect::<Result<Vec<_>>>()?,
        PresetName::RadiusSweep => SWEEP_RADII
            .iter()
            .map(|&r| {
                let obs = ObstacleProfile::constant_velocity("obstacle", circle(r), ahead, Vec2::new(RADIUS_SWEEP_SPEED, 0.0))?;
                Ok(base(format!("r{r}"), vec![obs]))
            })
            .collect::<Result<Vec<_>>>()?,
        PresetName::Perturbation => {
            let switch = perturbation_switch_time(t_end);
            let obs = ObstacleProfile::new(
                "obstacle",
                circle(OBSTACLE_RADIUS),
                Vec2::new(PERTURBATION_AHEAD, LATERAL_OFFSET),
                vec![
                    MotionSegment {
                        start_time: 0.0,
                        velocity: Vec2::ZERO,
                    },
                    MotionSegment {
                        start_time: switch,
                        velocity: Vec2::new(PERTURBATION_VELOCITY, 0.0),
                    },
                ],
            )?;
            vec![base("switch".to_string(), vec![obs])]
        }
        PresetName::MultiObstacle => {
            let a = ObstacleProfile::constant_velocity("a", circle(1.0), Vec2::new(14.0, 0.6), Vec2::new(1.0, 0.0))?;
            let b = ObstacleProfile::constant_velocity("b", circle(1.2), Vec2::new(26.0, -0.8), Vec2::new(0.5, 0.1))?;
            let c = ObstacleProfile::new(
                "c",
                circle(0.8),
                Vec2::new(44.0, 0.4),
                vec![
                    MotionSegment {
                        start_time: 0.0,
                        velocity: Vec2::ZERO,
                    },
                    MotionSegment {
                        start_time: 4.0,
                        velocity: Vec2::new(-0.5, 0.0),
                    },
                ],
            )?;
            vec![base("three".to_string(), vec![a, b, c])]
        }
    };
    Ok(scenarios)
}

/// Time at which the perturbation obstacle starts moving.
pub fn perturbation_switch_time(t_end: f64) -> f64 {
    0.5 * t_end
}

/// Outcome of one class-K slope pair in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaTrial {
    pub beta1: f64,
    pub beta2: f64,
    /// Every step solved without relaxation.
    pub all_optimal: bool,
    pub min_distance: f64,
    /// Smallest `h` among barrier rows at the first step where one is
    /// active; `None` if no barrier ever becomes active.
    pub h_at_first_activation: Option<f64>,
    pub ade_to_reference: f64,
}

/// Runs `s` for every `(beta1, beta2)` pair.
pub fn beta_sweep(s: &Scenario, beta1: &[f64], beta2: &[f64]) -> Result<Vec<BetaTrial>> {
    let mut out = Vec::with_capacity(beta1.len() * beta2.len());
    for &b1 in beta1 {
        for &b2 in beta2 {
            let mut sc = s.clone();
            sc.filter.params.beta1 = b1;
            sc.filter.params.beta2 = b2;
            out.push(beta_trial(&sc)?);
        }
    }
    Ok(out)
}

pub fn beta_trial(s: &Scenario) -> Result<BetaTrial> {
    let trace = match run_scenario(s) {
        Ok(t) => t,
        Err(Error::Infeasible { .. }) => {
            return Ok(BetaTrial {
                beta1: s.filter.params.beta1,
                beta2: s.filter.params.beta2,
                all_optimal: false,
                min_distance: f64::NAN,
                h_at_first_activation: None,
                ade_to_reference: f64::NAN,
            })
        }
        Err(e) => return Err(e),
    };
    let first_active = trace.iter().find(|r| r.barrier_active()).map(|r| {
        r.active_set
            .iter()
            .filter_map(|src| match src {
                RowSource::Dhocbf(i) | RowSource::Hocbf(i) => Some(r.obstacles[*i].h),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    });
    let reference = s.reference_positions(&trace);
    let actual: Vec<Vec2> = trace.iter().map(|r| r.ego.position()).collect();
    Ok(BetaTrial {
        beta1: s.filter.params.beta1,
        beta2: s.filter.params.beta2,
        all_optimal: trace.iter().all(|r| r.status == QpStatus::Optimal),
        min_distance: crate::metrics::trace_min_distance(&trace),
        h_at_first_activation: first_active,
        ade_to_reference: crate::metrics::ade(&actual, &reference)?,
    })
}

/// Picks the feasible trial whose barrier value is smallest when the
/// constraint first becomes active; ties go to the earlier trial.
pub fn select_beta(trials: &[BetaTrial]) -> Option<BetaTrial> {
    trials
        .iter()
        .filter(|t| t.all_optimal && t.min_distance > 0.0)
        .filter_map(|t| t.h_at_first_activation.map(|h| (h, t)))
        .fold(None, |best: Option<(f64, &BetaTrial)>, (h, t)| match best {
            Some((bh, _)) if bh <= h => best,
            _ => Some((h, t)),
        })
        .map(|(_, t)| *t)
}
