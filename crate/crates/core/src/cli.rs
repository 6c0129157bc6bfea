//! The `opinion` command-line tool.
//!
//! One JSON config per run; the command line only selects the command and
//! overrides the horizon, the step and the output directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;
use thiserror::Error;

use crate::config::{Command, ConfigError, LoadedConfig};
use crate::dynamics::{simulate, ModelParams, SigmaScaling, SimConfig};
use crate::experiments::{
    energy_descent_study, marginal_stability_study, mean_field_study, mono_opinion_study,
    profile_checks, trajectory_invariants, uniqueness_study, StudyError, StudyReport,
};
use crate::io::{self, IoError, ProfileRow};
use crate::measure::{conviction_marginal, ConvictionMarginal, EmpiricalMeasure};
use crate::steady::{
    extreme_value_check, figure_alphas, figure_curves, figure_is_monotone, figure_theta_grid,
    inflection_points, refined_lower_bound_check, solve_profile, DEFAULT_GRID,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

const EXIT_HELP: &str = "\
Exit status:
  0  success, every non-advisory check passed
  2  configuration or file error (unreadable, malformed or incomplete config,
     unwritable output directory)
  3  numerical failure (integration blow-up, solver bracketing failure)
  4  verification failure (a non-advisory report did not pass)

Environment:
  OPINION_THREADS  maximum number of worker threads";

#[derive(Debug, Parser)]
#[command(
    name = "opinion",
    version,
    about = "Simulate opinion dynamics with fixed convictions and verify its asymptotics",
    after_help = EXIT_HELP
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration.
    pub config: PathBuf,
    /// Override `sim.t_final`.
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Override `sim.dt`.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output directory (default: `output_dir` from the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: IoError },
    #[error("{context}: {message}")]
    Numerical { context: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => EXIT_CONFIG,
            CliError::Numerical { .. } => EXIT_NUMERICAL,
        }
    }
}

fn numerical(context: &LoadedConfig, command: Command) -> impl Fn(&dyn std::fmt::Display) -> CliError + '_ {
    move |e| CliError::Numerical {
        context: format!("{} ({})", context.path.display(), command),
        message: e.to_string(),
    }
}

fn output(path: &Path) -> impl FnOnce(IoError) -> CliError + '_ {
    move |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    }
}

/// What a run produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub reports: Vec<StudyReport>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| !r.is_blocking_failure())
    }

    fn write_report(&mut self, dir: &Path, report: StudyReport) -> Result<(), CliError> {
        let json_path = dir.join(format!("{}.json", report.name));
        io::write_json(&json_path, &report).map_err(output(&json_path))?;
        let csv_path = dir.join(format!("{}.csv", report.name));
        io::write_series_csv(&csv_path, &report.series).map_err(output(&csv_path))?;
        self.files.push(json_path);
        self.files.push(csv_path);
        self.reports.push(report);
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
}

impl Overrides {
    fn apply(&self, mut sim: SimConfig, cfg: &LoadedConfig) -> Result<SimConfig, CliError> {
        if let Some(t) = self.t_final {
            sim.t_final = t;
        }
        if let Some(dt) = self.dt {
            sim.dt = dt;
        }
        sim.validate().map_err(|e| CliError::Config(cfg.invalid(e.to_string())))?;
        Ok(sim)
    }
}

/// Runs `command` on a loaded config, writing artifacts into `out`.
pub fn run_loaded(
    command: Command,
    cfg: &LoadedConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<Outcome, CliError> {
    if let Some(declared) = cfg.config.command {
        if declared != command {
            return Err(cfg
                .invalid(format!("config is for `{declared}`, not `{command}`"))
                .into());
        }
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Output {
        path: out.to_path_buf(),
        source: e.into(),
    })?;
    let fail = numerical(cfg, command);
    let mut outcome = Outcome::default();
    match command {
        Command::Simulate => {
            let params = cfg.params(command)?;
            let sim = overrides.apply(cfg.sim(command)?, cfg)?;
            let mu0 = cfg.initial_measure(command)?;
            let traj = simulate(&mu0, &params, &sim).map_err(|e| fail(&e))?;
            io::write_trajectory(out, "trajectory", &traj).map_err(output(out))?;
            outcome.files.push(out.join("trajectory.csv"));
            outcome.files.push(out.join("trajectory.json"));
            let report = trajectory_invariants(&traj, &params, sim.dt).map_err(|e| fail(&e))?;
            outcome.write_report(out, report)?;
        }
        Command::Steady => {
            let params = cfg.params(command)?;
            let pi = unit_marginal(cfg, command, &params)?;
            let grid = cfg.config.grid_n.unwrap_or(DEFAULT_GRID);
            let profile = solve_profile(&pi, params.p, grid).map_err(|e| fail(&e))?;
            let g1 = profile.g_prime_values().map_err(|e| fail(&e))?;
            let g2 = profile.g_second_values().map_err(|e| fail(&e))?;
            let rows: Vec<ProfileRow> = (0..profile.thetas.len())
                .map(|k| ProfileRow {
                    theta: profile.thetas[k],
                    g: profile.g[k],
                    g_prime: g1[k],
                    g_second: g2[k],
                })
                .collect();
            let csv_path = out.join("profile.csv");
            io::write_profile_csv(&csv_path, &rows).map_err(output(&csv_path))?;
            let inflections = inflection_points(&profile).map_err(|e| fail(&e))?;
            let (low_ok, high_ok) = extreme_value_check(&profile);
            let meta = json!({
                "alpha": profile.alpha,
                "p": profile.p,
                "sigma": params.sigma,
                "variables": "unit_sigma",
                "residual": profile.residual,
                "consistency_residual": profile.consistency_residual,
                "alpha_candidates": profile.alpha_candidates,
                "non_unique": profile.non_unique,
                "uniqueness_condition": profile.uniqueness_condition,
                "inflection_points": inflections,
                "bound_checks": {
                    "refined_lower_bound_violation": refined_lower_bound_check(&profile),
                    "low_extreme_ok": low_ok,
                    "high_extreme_ok": high_ok,
                },
            });
            let json_path = out.join("profile.json");
            io::write_json(&json_path, &meta).map_err(output(&json_path))?;
            outcome.files.push(csv_path);
            outcome.files.push(json_path);
            let report = profile_checks(&profile).map_err(|e| fail(&e))?;
            outcome.write_report(out, report)?;
        }
        Command::Figure => {
            let p = cfg.config.params.map_or(6.0, |prm| prm.p);
            let alphas = cfg.config.alphas.clone().unwrap_or_else(figure_alphas);
            let thetas = cfg.config.theta_grid.clone().unwrap_or_else(figure_theta_grid);
            let rows = figure_curves(p, &alphas, &thetas).map_err(|e| fail(&e))?;
            let csv_path = out.join("figure.csv");
            io::write_figure_csv(&csv_path, &rows).map_err(output(&csv_path))?;
            outcome.files.push(csv_path);
            let monotone = figure_is_monotone(&rows, thetas.len());
            let report = StudyReport {
                name: "figure_checks".into(),
                inputs: json!({ "p": p, "alphas": alphas, "thetas": thetas }),
                series: rows
                    .chunks(thetas.len())
                    .map(|c| (c[0].alpha, c[c.len() - 1].g))
                    .collect(),
                fit: None,
                metrics: [("curves".to_string(), alphas.len() as f64)].into_iter().collect(),
                pass: monotone,
                advisory: false,
                notes: String::from("series holds the value of each curve at the largest conviction"),
            };
            outcome.write_report(out, report)?;
        }
        Command::Meanfield => {
            let params = cfg.params(command)?;
            let sim = overrides.apply(cfg.sim(command)?, cfg)?;
            let mu = cfg.initial_measure(command)?;
            let ns = cfg.config.ns.clone().unwrap_or_else(|| vec![10, 20, 40, 80]);
            let report = mean_field_study(&mu, &ns, &params, &sim).map_err(|e| fail(&e))?;
            outcome.write_report(out, report)?;
            let inv = invariants_of_run(&mu, &params, &sim, "").map_err(|e| fail(&e))?;
            outcome.write_report(out, inv)?;
        }
        Command::Rates => {
            let params = cfg.params(command)?;
            let sim = overrides.apply(cfg.sim(command)?, cfg)?;
            let mu0 = cfg.initial_measure(command)?;
            let mono = mono_opinion_study(&mu0, &params, &sim).map_err(|e| fail(&e))?;
            outcome.write_report(out, mono)?;
            let inv = invariants_of_run(&mu0, &params, &sim, "").map_err(|e| fail(&e))?;
            outcome.write_report(out, inv)?;
            let energy = energy_descent_study(&mu0, &params, &sim).map_err(|e| fail(&e))?;
            outcome.write_report(out, energy)?;
        }
        Command::Uniqueness => {
            let params = cfg.params(command)?;
            let sim = overrides.apply(cfg.sim(command)?, cfg)?;
            let a = cfg.initial_measure(command)?;
            let b = cfg.initial_measure_b(command)?;
            let report = uniqueness_study(&a, &b, &params, &sim).map_err(|e| fail(&e))?;
            outcome.write_report(out, report)?;
            for (mu0, suffix) in [(&a, "_a"), (&b, "_b")] {
                let inv = invariants_of_run(mu0, &params, &sim, suffix).map_err(|e| fail(&e))?;
                outcome.write_report(out, inv)?;
            }
        }
        Command::Stability => {
            let params = cfg.params(command)?;
            let pi = unit_marginal(cfg, command, &params)?;
            let eps = cfg.config.epsilon.unwrap_or(1e-3);
            let report = marginal_stability_study(&pi, eps, params.p).map_err(|e| fail(&e))?;
            outcome.write_report(out, report)?;
        }
        Command::Verify => {
            let suite = cfg
                .config
                .suite
                .as_ref()
                .ok_or_else(|| cfg.missing("suite", command))?;
            let mut entries = Vec::new();
            for member in suite {
                let loaded = LoadedConfig::load(&cfg.resolve(member))?;
                let member_command = loaded
                    .config
                    .command
                    .ok_or_else(|| loaded.missing("command", Command::Verify))?;
                if member_command == Command::Verify {
                    return Err(loaded.invalid("verify suites cannot nest").into());
                }
                let dir = out.join(loaded.stem());
                let result = run_loaded(member_command, &loaded, overrides, &dir)?;
                for r in &result.reports {
                    entries.push(json!({
                        "config": member,
                        "command": member_command,
                        "report": r.name,
                        "pass": r.pass,
                        "advisory": r.advisory,
                    }));
                }
                outcome.files.extend(result.files);
                outcome.reports.extend(result.reports);
            }
            let summary = json!({ "pass": outcome.pass(), "reports": entries });
            let path = out.join("verify.json");
            io::write_json(&path, &summary).map_err(output(&path))?;
            outcome.files.push(path);
        }
    }
    Ok(outcome)
}

fn invariants_of_run(
    mu0: &EmpiricalMeasure,
    params: &ModelParams,
    sim: &SimConfig,
    suffix: &str,
) -> Result<StudyReport, StudyError> {
    let traj = simulate(mu0, params, sim)?;
    let mut report = trajectory_invariants(&traj, params, sim.dt)?;
    report.name.push_str(suffix);
    Ok(report)
}

/// Conviction marginal in `sigma = 1` variables, from `pi` or the initial
/// measure.
fn unit_marginal(
    cfg: &LoadedConfig,
    command: Command,
    params: &ModelParams,
) -> Result<ConvictionMarginal, CliError> {
    let pi = match &cfg.config.pi {
        Some(pi) => pi.clone(),
        None if cfg.config.initial_measure.is_some() => conviction_marginal(&cfg.initial_measure(command)?),
        None => return Err(cfg.missing("pi", command).into()),
    };
    let scaling = SigmaScaling::new(params);
    let atoms = pi
        .atoms()
        .iter()
        .map(|&(t, m)| (scaling.theta_to_unit(t), m))
        .collect();
    ConvictionMarginal::new(atoms).map_err(|e| CliError::Config(cfg.invalid(e.to_string())))
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = LoadedConfig::load(&cli.config)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir());
    let overrides = Overrides {
        t_final: cli.t_final,
        dt: cli.dt,
    };
    run_loaded(cli.command, &cfg, &overrides, &out)
}

/// Caps the rayon pool at `OPINION_THREADS` when set.
pub fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("OPINION_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("OPINION_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Parses `args`, runs, prints a summary and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Err(message) = configure_threads() {
        eprintln!("error: {message}");
        return EXIT_CONFIG;
    }
    match run(&cli) {
        Ok(outcome) => {
            for r in &outcome.reports {
                let status = match (r.pass, r.advisory) {
                    (true, _) => "PASS",
                    (false, true) => "ADVISORY",
                    (false, false) => "FAIL",
                };
                println!("{status:8} {}", r.name);
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.pass() {
                EXIT_OK
            } else {
                EXIT_VERIFICATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
