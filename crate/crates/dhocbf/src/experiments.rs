//! Batch runs: presets in one or both barrier modes, their ordinal checks,
//! and class-K slope sweeps.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use dhocbf_core::barrier::BarrierMode;
use dhocbf_core::metrics::{ade, trace_min_distance};
use dhocbf_core::safety_filter::QpStatus;
use dhocbf_core::simulator::{
    beta_trial, build_preset, perturbation_switch_time, run_scenario, select_beta, BetaTrial, Overrides, PresetName,
    Scenario, TraceRecord,
};
use dhocbf_core::Vec2;

use crate::number::format_g9;
use crate::trace_csv::write_trace_file;
use crate::{Error, Result};

/// Tolerance for "greater or equal" comparisons between modes.
pub const EQUALITY_TOL: f64 = 1e-6;
/// Per-step control agreement required before an obstacle starts moving.
pub const STATIC_AGREEMENT_TOL: f64 = 1e-9;

pub fn mode_name(mode: BarrierMode) -> &'static str {
    match mode {
        BarrierMode::Hocbf => "hocbf",
        BarrierMode::Dhocbf => "dhocbf",
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub trace: Vec<TraceRecord>,
}

impl RunOutcome {
    pub fn ade_to_reference(&self) -> f64 {
        let reference = self.scenario.reference_positions(&self.trace);
        let actual: Vec<Vec2> = self.trace.iter().map(|r| r.ego.position()).collect();
        ade(&actual, &reference).unwrap_or(f64::NAN)
    }

    pub fn min_distance(&self) -> f64 {
        trace_min_distance(&self.trace)
    }

    pub fn non_optimal_steps(&self) -> usize {
        self.trace.iter().filter(|r| r.status != QpStatus::Optimal).count()
    }

    /// Every optimal step keeps clearance above the margin and `h >= 0`.
    pub fn safe_while_optimal(&self) -> bool {
        self.trace
            .iter()
            .filter(|r| r.status == QpStatus::Optimal)
            .all(|r| r.min_distance() > self.scenario.filter.margin && r.min_h() >= 0.0)
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} worker threads: {e}")))
}

/// Runs scenarios on `jobs` threads; results keep the input order.
pub fn run_batch(scenarios: Vec<Scenario>, jobs: usize) -> Result<Vec<RunOutcome>> {
    thread_pool(jobs)?.install(|| {
        scenarios
            .into_par_iter()
            .map(|scenario| {
                let trace = run_scenario(&scenario)?;
                Ok(RunOutcome { scenario, trace })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
}

/// Runs of one preset, split by mode; either side may be absent.
#[derive(Debug, Clone, Default)]
pub struct PresetRuns {
    pub hocbf: Vec<RunOutcome>,
    pub dhocbf: Vec<RunOutcome>,
}

impl PresetRuns {
    pub fn all(&self) -> impl Iterator<Item = &RunOutcome> {
        self.hocbf.iter().chain(&self.dhocbf)
    }
}

pub fn run_preset(name: PresetName, modes: &[BarrierMode], overrides: &Overrides, jobs: usize) -> Result<PresetRuns> {
    let mut scenarios = Vec::new();
    let mut counts = Vec::new();
    for &mode in modes {
        let s = build_preset(name, mode, overrides)?;
        counts.push((mode, s.len()));
        scenarios.extend(s);
    }
    let mut outcomes = run_batch(scenarios, jobs)?.into_iter();
    let mut runs = PresetRuns::default();
    for (mode, n) in counts {
        let part: Vec<_> = outcomes.by_ref().take(n).collect();
        match mode {
            BarrierMode::Hocbf => runs.hocbf = part,
            BarrierMode::Dhocbf => runs.dhocbf = part,
        }
    }
    Ok(runs)
}

/// Ordinal checks that apply to the modes present in `runs`.
pub fn preset_checks(name: PresetName, runs: &PresetRuns) -> Vec<Check> {
    let mut checks = Vec::new();
    if !runs.dhocbf.is_empty() {
        checks.push(Check {
            name: "dhocbf_safe_while_optimal",
            pass: runs.dhocbf.iter().all(RunOutcome::safe_while_optimal),
        });
    }
    if runs.hocbf.is_empty() || runs.dhocbf.is_empty() {
        return checks;
    }
    match name {
        PresetName::SpeedSweep => {
            let gaps: Vec<f64> = runs
                .hocbf
                .iter()
                .zip(&runs.dhocbf)
                .map(|(h, d)| h.ade_to_reference() - d.ade_to_reference())
                .collect();
            checks.push(Check {
                name: "dhocbf_closer_to_reference_at_fastest_obstacle",
                pass: gaps.last().is_some_and(|g| *g > 0.0),
            });
            checks.push(Check {
                name: "ade_gap_nondecreasing_in_obstacle_speed",
                pass: gaps.windows(2).all(|w| w[1] >= w[0] - EQUALITY_TOL),
            });
        }
        PresetName::Perturbation => {
            let (h, d) = (&runs.hocbf[0], &runs.dhocbf[0]);
            let switch = perturbation_switch_time(h.scenario.t_end);
            let before = |r: &&TraceRecord| r.t < switch - 1e-9;
            let agree = h.trace.iter().filter(before).zip(d.trace.iter().filter(before)).all(|(a, b)| {
                (a.u_applied.ux - b.u_applied.ux).abs() <= STATIC_AGREEMENT_TOL
                    && (a.u_applied.uy - b.u_applied.uy).abs() <= STATIC_AGREEMENT_TOL
            });
            checks.push(Check {
                name: "modes_agree_before_obstacle_moves",
                pass: agree,
            });
            checks.push(Check {
                name: "dhocbf_keeps_larger_distance_after_switch",
                pass: min_distance_from(d, switch) >= min_distance_from(h, switch) - EQUALITY_TOL,
            });
        }
        PresetName::RadiusSweep | PresetName::MultiObstacle => {}
    }
    checks
}

/// Smallest surface distance over steps at or after `t0`.
pub fn min_distance_from(run: &RunOutcome, t0: f64) -> f64 {
    run.trace
        .iter()
        .filter(|r| r.t >= t0 - 1e-9)
        .map(TraceRecord::min_distance)
        .fold(f64::INFINITY, f64::min)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::csv(path, e)
}

/// Writes a trace per run plus a summary with one row per run and one per
/// check. Returns the paths written, summary last.
pub fn write_preset_outputs(name: PresetName, runs: &PresetRuns, checks: &[Check], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = runs
        .all()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|run| {
            let path = out.join(format!("{}.csv", run.scenario.name));
            write_trace_file(&path, &run.trace)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;

    let path = out.join(format!("{}_summary.csv", name.as_str()));
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["kind", "name", "mode", "min_distance_m", "ade_m", "non_optimal_steps", "pass"])
        .map_err(csv_err(&path))?;
    for run in runs.all() {
        w.write_record([
            "run".to_string(),
            run.scenario.name.clone(),
            mode_name(run.scenario.filter.mode).to_string(),
            format_g9(run.min_distance()),
            format_g9(run.ade_to_reference()),
            run.non_optimal_steps().to_string(),
            String::new(),
        ])
        .map_err(csv_err(&path))?;
    }
    for c in checks {
        w.write_record(["check", c.name, "", "", "", "", if c.pass { "true" } else { "false" }])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Sweep result for one scenario.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub scenario: String,
    pub trials: Vec<BetaTrial>,
    pub selected: Option<BetaTrial>,
}

pub fn beta_sweep(scenarios: &[Scenario], beta1: &[f64], beta2: &[f64], jobs: usize) -> Result<Vec<SweepOutcome>> {
    if beta1.is_empty() || beta2.is_empty() {
        return Err(Error::Usage("sweep needs at least one value per slope".into()));
    }
    if beta1.iter().chain(beta2).any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::Usage("class-K slopes must be finite and > 0".into()));
    }
    let jobs_list: Vec<(usize, Scenario)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            beta1.iter().flat_map(move |&b1| {
                beta2.iter().map(move |&b2| {
                    let mut s = s.clone();
                    s.filter.params.beta1 = b1;
                    s.filter.params.beta2 = b2;
                    (i, s)
                })
            })
        })
        .collect();
    let trials: Vec<(usize, BetaTrial)> = thread_pool(jobs)?.install(|| {
        jobs_list
            .into_par_iter()
            .map(|(i, s)| Ok((i, beta_trial(&s)?)))
            .collect::<Result<_>>()
    })?;
    Ok(scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mine: Vec<BetaTrial> = trials.iter().filter(|(j, _)| *j == i).map(|(_, t)| *t).collect();
            SweepOutcome {
                scenario: s.name.clone(),
                selected: select_beta(&mine),
                trials: mine,
            }
        })
        .collect())
}

pub fn write_sweep(path: &Path, sweeps: &[SweepOutcome]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "scenario",
        "beta1_per_s",
        "beta2_per_s",
        "all_optimal",
        "min_distance_m",
        "h_first_active",
        "ade_m",
        "selected",
    ])
    .map_err(csv_err(path))?;
    for s in sweeps {
        for t in &s.trials {
            let selected = s.selected.as_ref() == Some(t);
            w.write_record([
                s.scenario.clone(),
                format_g9(t.beta1),
                format_g9(t.beta2),
                t.all_optimal.to_string(),
                format_g9(t.min_distance),
                t.h_at_first_activation.map(format_g9).unwrap_or_default(),
                format_g9(t.ade_to_reference),
                selected.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
