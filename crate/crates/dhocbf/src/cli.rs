use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dhocbf_core::barrier::{BarrierMode, DriftVariant};
use dhocbf_core::metrics::{MetricReport, Rollout};
use dhocbf_core::safety_filter::{InfeasibilityPolicy, DEFAULT_SLACK_WEIGHT};
use dhocbf_core::simulator::{build_preset, Overrides, PresetName, Scenario};
use dhocbf_core::Vec2;

use crate::experiments::{
    beta_sweep, mode_name, preset_checks, run_batch, run_preset, write_preset_outputs, write_sweep,
};
use crate::number::format_g9;
use crate::scenario_file::parse_scenario;
use crate::trace_csv::{read_recorded_file, read_trace_file, write_trace_file};
use crate::validate::{run_validation, ValidateConfig};
use crate::{Error, Result};

pub const OUT_DIR_ENV: &str = "DHOCBF_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "dhocbf", version, about = "Barrier-function safety filter simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario file and write its trace.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run a validity preset, in both modes unless --mode is given.
    Preset {
        name: String,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        jobs: JobsArg,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Grid search over the two class-K slopes.
    Sweep {
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        preset: Option<String>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "dhocbf")]
        mode: ModeArg,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        beta1_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        beta2_grid: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        jobs: JobsArg,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Compare the QP solver and shape distance against brute force.
    Validate {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
    },
    /// ADE/FDE/SR over trace files against a reference.
    Metrics {
        /// Reference trajectory: a scenario file (.toml) or a CSV with t,x,y,vx,vy.
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        collision_margin: f64,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct JobsArg {
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Hocbf,
    Dhocbf,
}

impl From<ModeArg> for BarrierMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Hocbf => BarrierMode::Hocbf,
            ModeArg::Dhocbf => BarrierMode::Dhocbf,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    PaperLiteral,
    ExactRelative,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Error,
    Slack,
    MaxBrake,
}

#[derive(Debug, Default, Args)]
pub struct OverrideArgs {
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Slack penalty weight; implies --policy slack.
    #[arg(long)]
    pub slack_weight: Option<f64>,
    #[arg(long)]
    pub sensory_radius: Option<f64>,
    /// Symmetric acceleration bound per axis.
    #[arg(long)]
    pub accel_bound: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl OverrideArgs {
    pub fn to_overrides(&self, mode: Option<ModeArg>) -> Result<Overrides> {
        let policy = match (self.policy, self.slack_weight) {
            (Some(PolicyArg::Error), Some(_)) | (Some(PolicyArg::MaxBrake), Some(_)) => {
                return Err(Error::Usage("--slack-weight only applies to --policy slack".into()))
            }
            (Some(PolicyArg::Error), None) => Some(InfeasibilityPolicy::Error),
            (Some(PolicyArg::MaxBrake), None) => Some(InfeasibilityPolicy::MaxBrake),
            (Some(PolicyArg::Slack), w) => Some(InfeasibilityPolicy::Slack {
                weight: w.unwrap_or(DEFAULT_SLACK_WEIGHT),
            }),
            (None, Some(w)) => Some(InfeasibilityPolicy::Slack { weight: w }),
            (None, None) => None,
        };
        Ok(Overrides {
            beta1: self.beta1,
            beta2: self.beta2,
            variant: self.variant.map(|v| match v {
                VariantArg::PaperLiteral => DriftVariant::PaperLiteral,
                VariantArg::ExactRelative => DriftVariant::ExactRelative,
            }),
            mode: mode.map(Into::into),
            dt: self.dt,
            t_end: self.t_end,
            margin: self.margin,
            policy,
            sensory_radius: self.sensory_radius,
            accel_bound: self.accel_bound,
            seed: self.seed,
        })
    }
}

/// Parses arguments, runs the command, and maps the outcome to an exit
/// code: 0 success, 1 failed check or run, 2 usage error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn parse_preset(name: &str) -> Result<PresetName> {
    Ok(name.parse::<PresetName>()?)
}

/// Runs a command; `Ok(false)` means it ran but a check failed.
pub fn execute(command: Command) -> Result<bool> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Run {
            scenario,
            out: dir,
            mode,
            overrides,
        } => {
            let mut s = parse_scenario(&scenario)?;
            overrides.to_overrides(mode)?.apply(&mut s);
            s.validate()?;
            let run = run_batch(vec![s], 1)?.remove(0);
            std::fs::create_dir_all(&dir.out).map_err(|e| Error::io(&dir.out, e))?;
            let path = dir.out.join(format!("{}.csv", run.scenario.name));
            write_trace_file(&path, &run.trace)?;
            let _ = writeln!(
                out,
                "{}: min distance {} m, ADE {} m, {} non-optimal steps -> {}",
                run.scenario.name,
                format_g9(run.min_distance()),
                format_g9(run.ade_to_reference()),
                run.non_optimal_steps(),
                path.display()
            );
            Ok(true)
        }
        Command::Preset {
            name,
            mode,
            out: dir,
            jobs,
            overrides,
        } => {
            let preset = parse_preset(&name)?;
            let modes: Vec<BarrierMode> = match mode {
                Some(m) => vec![m.into()],
                None => vec![BarrierMode::Hocbf, BarrierMode::Dhocbf],
            };
            // mode selection is per preset run, not an override
            let ov = overrides.to_overrides(None)?;
            let runs = run_preset(preset, &modes, &ov, jobs.jobs as usize)?;
            let checks = preset_checks(preset, &runs);
            let written = write_preset_outputs(preset, &runs, &checks, &dir.out)?;
            for run in runs.all() {
                let _ = writeln!(
                    out,
                    "{:<32} {:<6} min distance {:>12} m  ADE {:>12} m",
                    run.scenario.name,
                    mode_name(run.scenario.filter.mode),
                    format_g9(run.min_distance()),
                    format_g9(run.ade_to_reference())
                );
            }
            for c in &checks {
                let _ = writeln!(out, "{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
            let _ = writeln!(out, "wrote {} files to {}", written.len(), dir.out.display());
            Ok(checks.iter().all(|c| c.pass))
        }
        Command::Sweep {
            preset,
            scenario,
            mode,
            beta1_grid,
            beta2_grid,
            out: dir,
            jobs,
            overrides,
        } => {
            let scenarios: Vec<Scenario> = match (preset, scenario) {
                (Some(p), None) => build_preset(parse_preset(&p)?, mode.into(), &overrides.to_overrides(None)?)?,
                (None, Some(path)) => {
                    let mut s = parse_scenario(&path)?;
                    overrides.to_overrides(Some(mode))?.apply(&mut s);
                    vec![s]
                }
                _ => return Err(Error::Usage("give exactly one of --preset and --scenario".into())),
            };
            let sweeps = beta_sweep(&scenarios, &beta1_grid, &beta2_grid, jobs.jobs as usize)?;
            let path = dir.out.join("beta_sweep.csv");
            write_sweep(&path, &sweeps)?;
            for s in &sweeps {
                match s.selected {
                    Some(t) => {
                        let _ = writeln!(out, "{}: beta1 {} beta2 {}", s.scenario, t.beta1, t.beta2);
                    }
                    None => {
                        let _ = writeln!(out, "{}: no feasible pair", s.scenario);
                    }
                }
            }
            let _ = writeln!(out, "wrote {}", path.display());
            Ok(true)
        }
        Command::Validate {
            samples,
            seed,
            resolution,
        } => {
            let cfg = ValidateConfig {
                resolution,
                ..ValidateConfig::new(samples, seed)
            };
            let report = run_validation(&cfg)?;
            let _ = writeln!(out, "{}", report.summary());
            if let Some(first) = report.failures.first() {
                eprintln!("first failing instance:\n{}", first.to_toml());
            }
            Ok(report.passed())
        }
        Command::Metrics {
            reference,
            collision_margin,
            traces,
        } => {
            let traces = traces.iter().map(|p| read_trace_file(p)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<Vec<Vec2>> = if is_toml(&reference) {
                let s = parse_scenario(&reference)?;
                traces.iter().map(|t| s.reference_positions(t)).collect()
            } else {
                let r = read_recorded_file(&reference)?;
                let pts: Vec<Vec2> = r.samples().iter().map(|s| s.position).collect();
                vec![pts; traces.len()]
            };
            let rollouts: Vec<Rollout<'_>> = traces
                .iter()
                .zip(&refs)
                .map(|(t, r)| Rollout { trace: t, reference: r })
                .collect();
            let m = MetricReport::from_rollouts(&rollouts, collision_margin)?;
            let _ = writeln!(out, "ade_m,fde_m,fde_penultimate_m,sr,min_distance_m,var_ade,var_fde");
            let _ = writeln!(
                out,
                "{}",
                [m.ade, m.fde, m.fde_penultimate, m.sr, m.min_distance, m.var_ade, m.var_fde]
                    .map(format_g9)
                    .join(",")
            );
            Ok(true)
        }
    }
}

fn is_toml(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_weight_implies_slack_policy() {
        let args = OverrideArgs {
            slack_weight: Some(10.0),
            ..OverrideArgs::default()
        };
        assert_eq!(
            args.to_overrides(None).unwrap().policy,
            Some(InfeasibilityPolicy::Slack { weight: 10.0 })
        );
        let args = OverrideArgs {
            policy: Some(PolicyArg::MaxBrake),
            slack_weight: Some(10.0),
            ..OverrideArgs::default()
        };
        assert!(args.to_overrides(None).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_grids_and_overrides() {
        let cli = Cli::try_parse_from([
            "dhocbf", "sweep", "--preset", "speed_sweep", "--beta1-grid", "0.5,1", "--beta2", "2", "--jobs", "3",
        ])
        .unwrap();
        match cli.command {
            Command::Sweep {
                beta1_grid,
                beta2_grid,
                overrides,
                jobs,
                ..
            } => {
                assert_eq!(beta1_grid, vec![0.5, 1.0]);
                assert_eq!(beta2_grid, vec![0.5, 1.0, 2.0]);
                assert_eq!(overrides.beta2, Some(2.0));
                assert_eq!(jobs.jobs, 3);
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["dhocbf", "preset", "speed_sweep", "--jobs", "0"]).is_err());
    }
}
