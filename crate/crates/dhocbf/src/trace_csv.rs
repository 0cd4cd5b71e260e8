//! Trace CSV files: one header row, one row per step.
//!
//! Columns are `t,x,y,vx,vy,ux_ref,uy_ref,ux,uy`, then `dist_i,dsafe_i,h_i,residual_i`
//! for each obstacle `i`, then `qp_status,slack`. Empty cells stand for
//! absent or non-finite values.

use std::io::{Read, Write};
use std::path::Path;

use dhocbf_core::dynamics::{ControlInput, EgoState};
use dhocbf_core::planner::{RefSample, ReferenceTrajectory};
use dhocbf_core::safety_filter::QpStatus;
use dhocbf_core::simulator::{ObstacleRecord, TraceRecord};
use dhocbf_core::Vec2;

use crate::number::format_g9;
use crate::{Error, Result};

const EGO_COLUMNS: [&str; 9] = ["t", "x", "y", "vx", "vy", "ux_ref", "uy_ref", "ux", "uy"];
const OBSTACLE_COLUMNS: [&str; 4] = ["dist", "dsafe", "h", "residual"];

pub fn header(obstacles: usize) -> Vec<String> {
    let mut h: Vec<String> = EGO_COLUMNS.iter().map(|s| s.to_string()).collect();
    for i in 0..obstacles {
        h.extend(OBSTACLE_COLUMNS.iter().map(|c| format!("{c}_{i}")));
    }
    h.push("qp_status".into());
    h.push("slack".into());
    h
}

fn row(r: &TraceRecord) -> Vec<String> {
    let mut out: Vec<String> = [
        r.t,
        r.ego.x,
        r.ego.y,
        r.ego.vx,
        r.ego.vy,
        r.u_ref.ux,
        r.u_ref.uy,
        r.u_applied.ux,
        r.u_applied.uy,
    ]
    .into_iter()
    .map(format_g9)
    .collect();
    for o in &r.obstacles {
        out.push(format_g9(o.distance));
        out.push(format_g9(o.d_safe));
        out.push(format_g9(o.h));
        out.push(o.residual.map(format_g9).unwrap_or_default());
    }
    out.push(r.status.as_str().into());
    out.push(format_g9(r.slack));
    out
}

pub fn write_trace<W: Write>(w: W, trace: &[TraceRecord]) -> csv::Result<()> {
    let n = trace.first().map_or(0, |r| r.obstacles.len());
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header(n))?;
    for r in trace {
        wr.write_record(row(r))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(std::io::BufWriter::new(file), trace).map_err(|e| Error::csv(path, e))
}

fn parse_status(s: &str) -> Option<QpStatus> {
    [QpStatus::Optimal, QpStatus::Infeasible, QpStatus::Relaxed]
        .into_iter()
        .find(|q| q.as_str() == s)
}

/// Looks up columns by name so readers tolerate extra columns.
struct Columns(csv::StringRecord);

impl Columns {
    fn index(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> std::result::Result<usize, String> {
        self.index(name).ok_or_else(|| format!("missing column `{name}`"))
    }
}

fn cell(rec: &csv::StringRecord, i: usize, line: usize) -> std::result::Result<Option<f64>, String> {
    match rec.get(i).map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| format!("line {line}: `{s}` is not a number")),
    }
}

fn number(rec: &csv::StringRecord, i: usize, line: usize) -> std::result::Result<f64, String> {
    cell(rec, i, line)?.ok_or_else(|| format!("line {line}: empty cell in column {}", i + 1))
}

/// Parses a trace written by [`write_trace`]. Active sets are not stored,
/// so they come back empty.
pub fn read_trace<R: Read>(r: R) -> std::result::Result<Vec<TraceRecord>, String> {
    let mut rd = csv::Reader::from_reader(r);
    let cols = Columns(rd.headers().map_err(|e| e.to_string())?.clone());
    let ego: Vec<usize> = EGO_COLUMNS.iter().map(|c| cols.require(c)).collect::<Result<_, _>>()?;
    let mut obstacle_cols = Vec::new();
    for i in 0.. {
        let Some(dist) = cols.index(&format!("dist_{i}")) else { break };
        obstacle_cols.push([
            dist,
            cols.require(&format!("dsafe_{i}"))?,
            cols.require(&format!("h_{i}"))?,
            cols.require(&format!("residual_{i}"))?,
        ]);
    }
    let status_col = cols.require("qp_status")?;
    let slack_col = cols.require("slack")?;

    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| e.to_string())?;
        let v: Vec<f64> = ego.iter().map(|&i| number(&rec, i, line)).collect::<Result<_, _>>()?;
        let obstacles = obstacle_cols
            .iter()
            .map(|c| {
                Ok(ObstacleRecord {
                    distance: cell(&rec, c[0], line)?.unwrap_or(f64::INFINITY),
                    d_safe: number(&rec, c[1], line)?,
                    h: number(&rec, c[2], line)?,
                    residual: cell(&rec, c[3], line)?,
                })
            })
            .collect::<Result<_, String>>()?;
        let status_text = rec.get(status_col).unwrap_or("");
        let status = parse_status(status_text).ok_or_else(|| format!("line {line}: unknown qp_status `{status_text}`"))?;
        out.push(TraceRecord {
            t: v[0],
            ego: EgoState::new(v[1], v[2], v[3], v[4]),
            u_ref: ControlInput::new(v[5], v[6]),
            u_applied: ControlInput::new(v[7], v[8]),
            obstacles,
            status,
            active_set: Vec::new(),
            slack: cell(&rec, slack_col, line)?.unwrap_or(0.0),
        });
    }
    Ok(out)
}

pub fn read_trace_file(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(file).map_err(|message| Error::Parse {
        path: path.into(),
        message,
    })
}

/// Loads a recorded trajectory from any CSV with `t,x,y,vx,vy` columns.
pub fn read_recorded<R: Read>(r: R) -> std::result::Result<ReferenceTrajectory, String> {
    let mut rd = csv::Reader::from_reader(r);
    let cols = Columns(rd.headers().map_err(|e| e.to_string())?.clone());
    let idx: Vec<usize> = ["t", "x", "y", "vx", "vy"]
        .iter()
        .map(|c| cols.require(c))
        .collect::<Result<_, _>>()?;
    let mut samples = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let v: Vec<f64> = idx.iter().map(|&i| number(&rec, i, k + 2)).collect::<Result<_, _>>()?;
        samples.push(RefSample {
            t: v[0],
            position: Vec2::new(v[1], v[2]),
            velocity: Vec2::new(v[3], v[4]),
        });
    }
    ReferenceTrajectory::new(samples).map_err(|e| e.to_string())
}

pub fn read_recorded_file(path: &Path) -> Result<ReferenceTrajectory> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_recorded(file).map_err(|message| Error::Parse {
        path: path.into(),
        message,
    })
}
