//! TOML scenario files.
//!
//! Field names carry their units. Anything left out takes the defaults
//! below; unknown keys are errors.
//!
//! ```toml
//! name = "overtake"
//! dt_s = 0.1            # default 0.1
//! t_end_s = 10.0        # default 10
//!
//! [ego]
//! position_m = [0.0, 0.0]
//! velocity_mps = [6.0, 0.0]
//! shape = { kind = "point" }
//!
//! [reference]           # default: straight line at the ego's initial velocity
//! kind = "line"
//! velocity_mps = [6.0, 0.0]
//!
//! [filter]
//! mode = "dhocbf"
//! beta1_per_s = 1.0
//! beta2_per_s = 1.0
//! policy = "slack"
//!
//! [[obstacles]]
//! id = "lead"
//! shape = { kind = "circle", radius_m = 1.0 }
//! position_m = [15.0, 0.5]
//! velocity_mps = [3.0, 0.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dhocbf_core::barrier::{BarrierMode, BarrierParams, DriftVariant};
use dhocbf_core::dynamics::{EgoState, MotionSegment, ObstacleProfile, DEFAULT_DT, DEFAULT_SENSORY_RADIUS};
use dhocbf_core::geometry::ShapeSpec;
use dhocbf_core::planner::{IdmParams, PdGains, RefSample, ReferenceTrajectory};
use dhocbf_core::safety_filter::{ControlBox, FilterConfig, InfeasibilityPolicy, DEFAULT_ACCEL_BOUND, DEFAULT_SLACK_WEIGHT};
use dhocbf_core::simulator::{ReferenceSource, Scenario};
use dhocbf_core::Vec2;

use crate::trace_csv::read_recorded_file;
use crate::{Error, Result};

pub const DEFAULT_T_END: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_t_end")]
    pub t_end_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub ego: EgoFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceFile>,
    #[serde(default)]
    pub gains: GainsFile,
    #[serde(default)]
    pub filter: FilterFile,
    #[serde(default)]
    pub obstacles: Vec<ObstacleFile>,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_t_end() -> f64 {
    DEFAULT_T_END
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoFile {
    pub position_m: [f64; 2],
    #[serde(default)]
    pub velocity_mps: [f64; 2],
    #[serde(default)]
    pub shape: ShapeFile,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeFile {
    #[default]
    Point,
    Circle {
        radius_m: f64,
    },
    Rectangle {
        width_m: f64,
        length_m: f64,
    },
}

impl From<ShapeFile> for ShapeSpec {
    fn from(s: ShapeFile) -> Self {
        match s {
            ShapeFile::Point => ShapeSpec::Point,
            ShapeFile::Circle { radius_m } => ShapeSpec::Circle { radius: radius_m },
            ShapeFile::Rectangle { width_m, length_m } => ShapeSpec::Rectangle {
                width: width_m,
                length: length_m,
            },
        }
    }
}

impl From<ShapeSpec> for ShapeFile {
    fn from(s: ShapeSpec) -> Self {
        match s {
            ShapeSpec::Point => ShapeFile::Point,
            ShapeSpec::Circle { radius } => ShapeFile::Circle { radius_m: radius },
            ShapeSpec::Rectangle { width, length } => ShapeFile::Rectangle {
                width_m: width,
                length_m: length,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointFile {
    pub t_s: f64,
    pub position_m: [f64; 2],
    pub velocity_mps: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmFile {
    pub v0_mps: f64,
    pub s0_m: f64,
    pub time_headway_s: f64,
    pub a_max_mps2: f64,
    pub b_comf_mps2: f64,
    pub delta: f64,
}

impl Default for IdmFile {
    fn default() -> Self {
        IdmParams::default().into()
    }
}

impl From<IdmParams> for IdmFile {
    fn from(p: IdmParams) -> Self {
        Self {
            v0_mps: p.v0,
            s0_m: p.s0,
            time_headway_s: p.time_headway,
            a_max_mps2: p.a_max,
            b_comf_mps2: p.b_comf,
            delta: p.delta,
        }
    }
}

impl From<IdmFile> for IdmParams {
    fn from(p: IdmFile) -> Self {
        Self {
            v0: p.v0_mps,
            s0: p.s0_m,
            time_headway: p.time_headway_s,
            a_max: p.a_max_mps2,
            b_comf: p.b_comf_mps2,
            delta: p.delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceFile {
    /// Straight line from `start_m` (default: ego position).
    Line {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start_m: Option<[f64; 2]>,
        velocity_mps: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_s: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample_dt_s: Option<f64>,
    },
    Waypoints {
        points: Vec<WaypointFile>,
    },
    /// Recorded trajectory, inline or from a trace CSV (path relative to
    /// the scenario file).
    Replay {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<WaypointFile>>,
    },
    Idm {
        points: Vec<WaypointFile>,
        #[serde(default)]
        params: IdmFile,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsFile {
    pub kp_per_s2: f64,
    pub kd_per_s: f64,
}

impl Default for GainsFile {
    fn default() -> Self {
        let g = PdGains::default();
        Self {
            kp_per_s2: g.kp,
            kd_per_s: g.kd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeFile {
    Hocbf,
    Dhocbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantFile {
    PaperLiteral,
    ExactRelative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyFile {
    Error,
    Slack,
    MaxBrake,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterFile {
    pub mode: ModeFile,
    pub beta1_per_s: f64,
    pub beta2_per_s: f64,
    pub variant: VariantFile,
    pub margin_m: f64,
    pub sensory_radius_m: f64,
    pub u_min_mps2: [f64; 2],
    pub u_max_mps2: [f64; 2],
    pub policy: PolicyFile,
    /// Only used by the slack policy.
    pub slack_weight: f64,
}

impl Default for FilterFile {
    fn default() -> Self {
        let p = BarrierParams::default();
        Self {
            mode: ModeFile::Dhocbf,
            beta1_per_s: p.beta1,
            beta2_per_s: p.beta2,
            variant: VariantFile::ExactRelative,
            margin_m: 0.0,
            sensory_radius_m: DEFAULT_SENSORY_RADIUS,
            u_min_mps2: [-DEFAULT_ACCEL_BOUND; 2],
            u_max_mps2: [DEFAULT_ACCEL_BOUND; 2],
            policy: PolicyFile::Slack,
            slack_weight: DEFAULT_SLACK_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub start_s: f64,
    pub velocity_mps: [f64; 2],
}

/// Give either `velocity_mps` (constant) or `segments`; neither means
/// stationary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleFile {
    pub id: String,
    pub shape: ShapeFile,
    pub position_m: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_mps: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentFile>>,
}

fn v2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

fn arr(v: Vec2) -> [f64; 2] {
    [v.x, v.y]
}

fn samples(points: &[WaypointFile]) -> Vec<RefSample> {
    points
        .iter()
        .map(|w| RefSample {
            t: w.t_s,
            position: v2(w.position_m),
            velocity: v2(w.velocity_mps),
        })
        .collect()
}

fn waypoints(traj: &ReferenceTrajectory) -> Vec<WaypointFile> {
    traj.samples()
        .iter()
        .map(|s| WaypointFile {
            t_s: s.t,
            position_m: arr(s.position),
            velocity_mps: arr(s.velocity),
        })
        .collect()
}

/// Per-field checks with the file's own key names.
struct Checker<'a> {
    path: &'a Path,
}

impl Checker<'_> {
    fn fail(&self, field: &str, reason: &str) -> Error {
        Error::Field {
            path: self.path.into(),
            field: field.into(),
            reason: reason.into(),
        }
    }

    fn finite(&self, field: &str, v: &[f64]) -> Result<()> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(self.fail(field, "must be finite"))
        }
    }

    fn positive(&self, field: &str, v: f64) -> Result<()> {
        self.finite(field, &[v])?;
        if v > 0.0 {
            Ok(())
        } else {
            Err(self.fail(field, "must be > 0"))
        }
    }

    fn non_negative(&self, field: &str, v: f64) -> Result<()> {
        self.finite(field, &[v])?;
        if v >= 0.0 {
            Ok(())
        } else {
            Err(self.fail(field, "must be >= 0"))
        }
    }

    fn shape(&self, field: &str, s: &ShapeFile) -> Result<()> {
        match *s {
            ShapeFile::Point => Ok(()),
            ShapeFile::Circle { radius_m } => self.non_negative(&format!("{field}.radius_m"), radius_m),
            ShapeFile::Rectangle { width_m, length_m } => {
                self.positive(&format!("{field}.width_m"), width_m)?;
                self.positive(&format!("{field}.length_m"), length_m)
            }
        }
    }

    /// Wraps a core validation error with the file path.
    fn core<T>(&self, field: &str, r: dhocbf_core::Result<T>) -> Result<T> {
        r.map_err(|e| self.fail(field, &e.to_string()))
    }
}

impl ScenarioFile {
    /// Builds a validated scenario. `base_dir` resolves relative replay
    /// paths; `path` is only used in error messages.
    pub fn into_scenario(self, base_dir: &Path, path: &Path) -> Result<Scenario> {
        let c = Checker { path };
        c.positive("dt_s", self.dt_s)?;
        c.positive("t_end_s", self.t_end_s)?;
        c.finite("ego.position_m", &self.ego.position_m)?;
        c.finite("ego.velocity_mps", &self.ego.velocity_mps)?;
        c.shape("ego.shape", &self.ego.shape)?;
        c.positive("gains.kp_per_s2", self.gains.kp_per_s2)?;
        c.positive("gains.kd_per_s", self.gains.kd_per_s)?;

        let f = &self.filter;
        c.positive("filter.beta1_per_s", f.beta1_per_s)?;
        c.positive("filter.beta2_per_s", f.beta2_per_s)?;
        c.non_negative("filter.margin_m", f.margin_m)?;
        c.positive("filter.sensory_radius_m", f.sensory_radius_m)?;
        c.finite("filter.u_min_mps2", &f.u_min_mps2)?;
        c.finite("filter.u_max_mps2", &f.u_max_mps2)?;
        if f.policy == PolicyFile::Slack {
            c.positive("filter.slack_weight", f.slack_weight)?;
        }
        let control_box = ControlBox {
            min: f.u_min_mps2,
            max: f.u_max_mps2,
        };
        c.core("filter.u_min_mps2", control_box.validate())?;
        let filter = FilterConfig {
            mode: match f.mode {
                ModeFile::Hocbf => BarrierMode::Hocbf,
                ModeFile::Dhocbf => BarrierMode::Dhocbf,
            },
            params: BarrierParams {
                beta1: f.beta1_per_s,
                beta2: f.beta2_per_s,
                variant: match f.variant {
                    VariantFile::PaperLiteral => DriftVariant::PaperLiteral,
                    VariantFile::ExactRelative => DriftVariant::ExactRelative,
                },
            },
            control_box,
            margin: f.margin_m,
            sensory_radius: f.sensory_radius_m,
            policy: match f.policy {
                PolicyFile::Error => InfeasibilityPolicy::Error,
                PolicyFile::Slack => InfeasibilityPolicy::Slack { weight: f.slack_weight },
                PolicyFile::MaxBrake => InfeasibilityPolicy::MaxBrake,
            },
        };

        let ego_init = EgoState::from_parts(v2(self.ego.position_m), v2(self.ego.velocity_mps));
        let reference = match self.reference {
            None => ReferenceSource::Scripted(c.core(
                "reference",
                ReferenceTrajectory::constant_velocity(ego_init.position(), ego_init.velocity(), self.t_end_s, self.dt_s),
            )?),
            Some(ReferenceFile::Line {
                start_m,
                velocity_mps,
                duration_s,
                sample_dt_s,
            }) => {
                let start = start_m.map_or(ego_init.position(), v2);
                ReferenceSource::Scripted(c.core(
                    "reference",
                    ReferenceTrajectory::constant_velocity(
                        start,
                        v2(velocity_mps),
                        duration_s.unwrap_or(self.t_end_s),
                        sample_dt_s.unwrap_or(self.dt_s),
                    ),
                )?)
            }
            Some(ReferenceFile::Waypoints { points }) => {
                ReferenceSource::Scripted(c.core("reference.points", ReferenceTrajectory::new(samples(&points)))?)
            }
            Some(ReferenceFile::Replay { path: Some(p), points: None }) => {
                ReferenceSource::Replay(read_recorded_file(&base_dir.join(p))?)
            }
            Some(ReferenceFile::Replay { path: None, points: Some(points) }) => {
                ReferenceSource::Replay(c.core("reference.points", ReferenceTrajectory::new(samples(&points)))?)
            }
            Some(ReferenceFile::Replay { .. }) => {
                return Err(c.fail("reference", "replay needs exactly one of `path` and `points`"))
            }
            Some(ReferenceFile::Idm { points, params }) => {
                let params: IdmParams = params.into();
                c.core("reference.params", params.validate())?;
                ReferenceSource::Idm {
                    path: c.core("reference.points", ReferenceTrajectory::new(samples(&points)))?,
                    params,
                }
            }
        };

        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for (i, o) in self.obstacles.into_iter().enumerate() {
            let field = format!("obstacles[{i}]");
            c.shape(&format!("{field}.shape"), &o.shape)?;
            c.finite(&format!("{field}.position_m"), &o.position_m)?;
            let segments = match (o.velocity_mps, o.segments) {
                (Some(_), Some(_)) => return Err(c.fail(&field, "give `velocity_mps` or `segments`, not both")),
                (v, None) => vec![MotionSegment {
                    start_time: 0.0,
                    velocity: v2(v.unwrap_or_default()),
                }],
                (None, Some(segs)) => segs
                    .iter()
                    .map(|s| MotionSegment {
                        start_time: s.start_s,
                        velocity: v2(s.velocity_mps),
                    })
                    .collect(),
            };
            let profile = ObstacleProfile::new(o.id, o.shape.into(), v2(o.position_m), segments);
            obstacles.push(c.core(&format!("{field}.segments"), profile)?);
        }

        let scenario = Scenario {
            name: self.name,
            ego_init,
            ego_shape: self.ego.shape.into(),
            reference,
            gains: PdGains {
                kp: self.gains.kp_per_s2,
                kd: self.gains.kd_per_s,
            },
            obstacles,
            filter,
            dt: self.dt_s,
            t_end: self.t_end_s,
            seed: self.seed,
        };
        c.core("scenario", scenario.validate())?;
        Ok(scenario)
    }

    /// File form of a scenario. References are written as explicit
    /// sample lists, so a replay file path is inlined.
    pub fn from_scenario(s: &Scenario) -> Self {
        let f = &s.filter;
        let (policy, slack_weight) = match f.policy {
            InfeasibilityPolicy::Error => (PolicyFile::Error, DEFAULT_SLACK_WEIGHT),
            InfeasibilityPolicy::Slack { weight } => (PolicyFile::Slack, weight),
            InfeasibilityPolicy::MaxBrake => (PolicyFile::MaxBrake, DEFAULT_SLACK_WEIGHT),
        };
        let reference = match &s.reference {
            ReferenceSource::Scripted(t) => ReferenceFile::Waypoints { points: waypoints(t) },
            ReferenceSource::Replay(t) => ReferenceFile::Replay {
                path: None,
                points: Some(waypoints(t)),
            },
            ReferenceSource::Idm { path, params } => ReferenceFile::Idm {
                points: waypoints(path),
                params: (*params).into(),
            },
        };
        ScenarioFile {
            name: s.name.clone(),
            dt_s: s.dt,
            t_end_s: s.t_end,
            seed: s.seed,
            ego: EgoFile {
                position_m: arr(s.ego_init.position()),
                velocity_mps: arr(s.ego_init.velocity()),
                shape: s.ego_shape.into(),
            },
            reference: Some(reference),
            gains: GainsFile {
                kp_per_s2: s.gains.kp,
                kd_per_s: s.gains.kd,
            },
            filter: FilterFile {
                mode: match f.mode {
                    BarrierMode::Hocbf => ModeFile::Hocbf,
                    BarrierMode::Dhocbf => ModeFile::Dhocbf,
                },
                beta1_per_s: f.params.beta1,
                beta2_per_s: f.params.beta2,
                variant: match f.params.variant {
                    DriftVariant::PaperLiteral => VariantFile::PaperLiteral,
                    DriftVariant::ExactRelative => VariantFile::ExactRelative,
                },
                margin_m: f.margin,
                sensory_radius_m: f.sensory_radius,
                u_min_mps2: f.control_box.min,
                u_max_mps2: f.control_box.max,
                policy,
                slack_weight,
            },
            obstacles: s
                .obstacles
                .iter()
                .map(|o| ObstacleFile {
                    id: o.id.clone(),
                    shape: o.shape.into(),
                    position_m: arr(o.initial_position),
                    velocity_mps: None,
                    segments: Some(
                        o.segments()
                            .iter()
                            .map(|m| SegmentFile {
                                start_s: m.start_time,
                                velocity_mps: arr(m.velocity),
                            })
                            .collect(),
                    ),
                })
                .collect(),
        }
    }
}

pub fn parse_scenario_str(text: &str, base_dir: &Path, path: &Path) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    file.into_scenario(base_dir, path)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario_str(&text, base, path)
}

pub fn serialize_scenario(s: &Scenario) -> String {
    toml::to_string(&ScenarioFile::from_scenario(s)).expect("scenario files contain only TOML-representable values")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        parse_scenario_str(text, Path::new("."), Path::new("test.toml"))
    }

    const MINIMAL: &str = r#"
[ego]
position_m = [0.0, 0.0]
velocity_mps = [6.0, 0.0]

[[obstacles]]
id = "lead"
shape = { kind = "circle", radius_m = 1.0 }
position_m = [15.0, 0.5]
velocity_mps = [3.0, 0.0]
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.name, "scenario");
        assert_eq!(s.dt, 0.1);
        assert_eq!(s.t_end, 10.0);
        assert_eq!(s.seed, 0);
        assert_eq!(s.ego_shape, ShapeSpec::Point);
        assert_eq!(s.filter, FilterConfig::default());
        assert_eq!(s.gains, PdGains::default());
        let traj = s.reference.trajectory();
        assert_eq!(traj.at(2.0).position, Vec2::new(12.0, 0.0));
        assert_eq!(s.obstacles.len(), 1);
        assert_eq!(s.obstacles[0].segments()[0].velocity, Vec2::new(3.0, 0.0));
    }

    #[test]
    fn negative_dt_is_a_field_error() {
        let err = parse(&format!("dt_s = -0.1\n{MINIMAL}")).unwrap_err();
        match &err {
            Error::Field { field, .. } => assert_eq!(field, "dt_s"),
            other => panic!("{other:?}"),
        }
        assert!(err.to_string().contains("dt_s"));
    }

    #[test]
    fn unknown_keys_rejected_with_line() {
        let err = parse(&format!("{MINIMAL}\nspeed_of_light = 3\n")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(msg.contains("speed_of_light") && msg.contains("line"), "{msg}");
        let err = parse(&MINIMAL.replace("radius_m", "radius")).unwrap_err();
        assert!(err.to_string().contains("radius"), "{err}");
    }

    #[test]
    fn nested_field_errors_name_the_key() {
        let err = parse(&MINIMAL.replace("radius_m = 1.0", "radius_m = -1.0")).unwrap_err();
        assert!(matches!(&err, Error::Field { field, .. } if field == "obstacles[0].shape.radius_m"), "{err:?}");
        let text = format!("{MINIMAL}\n[filter]\nbeta1_per_s = 0.0\n");
        let err = parse(&text).unwrap_err();
        assert!(matches!(&err, Error::Field { field, .. } if field == "filter.beta1_per_s"), "{err:?}");
    }

    #[test]
    fn round_trip_is_stable() {
        let full = r#"
name = "full"
dt_s = 0.05
t_end_s = 4.0
seed = 9

[ego]
position_m = [1.0, -0.5]
velocity_mps = [5.0, 0.1]
shape = { kind = "rectangle", width_m = 1.8, length_m = 4.5 }

[reference]
kind = "line"
velocity_mps = [5.5, 0.0]

[gains]
kp_per_s2 = 1.5

[filter]
mode = "hocbf"
beta1_per_s = 0.7
variant = "paper_literal"
margin_m = 0.2
policy = "max_brake"

[[obstacles]]
id = "a"
shape = { kind = "rectangle", width_m = 2.0, length_m = 4.0 }
position_m = [20.0, 0.0]
segments = [{ start_s = 0.0, velocity_mps = [0.0, 0.0] }, { start_s = 2.0, velocity_mps = [-1.0, 0.0] }]

[[obstacles]]
id = "b"
shape = { kind = "point" }
position_m = [9.0, 3.0]
"#;
        let s = parse(full).unwrap();
        let again = parse(&serialize_scenario(&s)).unwrap();
        assert_eq!(s, again);
        let s = parse(MINIMAL).unwrap();
        assert_eq!(parse(&serialize_scenario(&s)).unwrap(), s);
    }

    #[test]
    fn replay_needs_one_source() {
        let text = format!("{MINIMAL}\n[reference]\nkind = \"replay\"\n");
        assert!(matches!(parse(&text), Err(Error::Field { .. })));
    }
}
