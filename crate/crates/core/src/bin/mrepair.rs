use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use martingale_repair::constraints::{self, DetectOptions};
use martingale_repair::entropic::{epsilon_sweep, EntropicProblem};
use martingale_repair::io::{self, LoadedSurface, RepairRecord, ReportRecord, RunManifest};
use martingale_repair::lp::{self, LpOptions};
use martingale_repair::market_data::{apply_stress, CalibrationMark, NormalizedSurface, StressScenario};
use martingale_repair::repair::{self, RepairConfig, RepairMode};
use martingale_repair::{Error, Result};

/// Remove static arbitrage from option price surfaces.
#[derive(Parser)]
#[command(name = "mrepair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a surface for static arbitrage (exit 2 if any is found).
    Check {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Apply a stress scenario and write the stressed surface.
    Stress {
        input: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project a (possibly stressed) surface onto arbitrage-free prices.
    Repair {
        input: PathBuf,
        #[command(flatten)]
        opts: RepairArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Entropic cost against epsilon, with the exact value for reference.
    Sweep {
        input: PathBuf,
        /// Comma-separated regularization levels.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        eps: Vec<f64>,
        #[command(flatten)]
        opts: RepairArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModeArg {
    Lp,
    Entropic,
}

#[derive(Args)]
struct RepairArgs {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    e_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    kmax_margin: Option<f64>,
    #[arg(long)]
    shift: Option<f64>,
    /// Stress scenario applied before repairing (JSON).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Calibration marks, a JSON list of `{"maturity": i, "node": j}`.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// JSON file with any of the options above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mode: Option<ModeArg>,
    epsilon: Option<f64>,
    e_tol: Option<f64>,
    max_iters: Option<usize>,
    kmax_margin: Option<f64>,
    shift: Option<f64>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

impl RepairArgs {
    fn config(&self) -> Result<RepairConfig> {
        let file: ConfigFile = match &self.config {
            Some(p) => read_json(p)?,
            None => ConfigFile::default(),
        };
        let mut cfg = RepairConfig::default();
        if let Some(m) = self.mode.or(file.mode) {
            cfg.mode = match m {
                ModeArg::Lp => RepairMode::LpExact,
                ModeArg::Entropic => RepairMode::Entropic,
            };
        }
        cfg.epsilon = self.epsilon.or(file.epsilon).unwrap_or(cfg.epsilon);
        cfg.e_tol = self.e_tol.or(file.e_tol).unwrap_or(cfg.e_tol);
        cfg.max_iters = self.max_iters.or(file.max_iters).unwrap_or(cfg.max_iters);
        cfg.kmax_margin = self.kmax_margin.or(file.kmax_margin).unwrap_or(cfg.kmax_margin);
        cfg.shift = self.shift.or(file.shift).unwrap_or(cfg.shift);
        if let Some(p) = &self.calibration {
            cfg.calibration_marks = read_json::<Vec<CalibrationMark>>(p)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn scenario(&self) -> Result<Option<StressScenario>> {
        self.scenario.as_deref().map(read_json).transpose()
    }

    fn manifest(&self, command: &str, input: &Path, out: &Path, cfg: &RepairConfig) -> RunManifest {
        let mut m = RunManifest::new(command, input, out);
        m.scenario = self.scenario.as_ref().map(|p| p.display().to_string());
        m.calibration = self.calibration.as_ref().map(|p| p.display().to_string());
        m.config = Some(cfg.clone());
        m
    }
}

fn warn_unused(scenario: &StressScenario, surface: &NormalizedSurface) {
    for b in scenario.unused_bands(surface) {
        eprintln!("warning: stress band {} covers no quoted node", b + 1);
    }
}

fn stressed(surface: &NormalizedSurface, scenario: Option<&StressScenario>, cfg: &mut RepairConfig) -> Result<Option<NormalizedSurface>> {
    let Some(scenario) = scenario else { return Ok(None) };
    warn_unused(scenario, surface);
    let s = apply_stress(surface, scenario)?;
    for m in s.calibration_marks {
        if !cfg.calibration_marks.contains(&m) {
            cfg.calibration_marks.push(m);
        }
    }
    Ok(Some(s.surface))
}

fn check(input: &Path, out: Option<&Path>, tol: Option<f64>) -> Result<ExitCode> {
    let LoadedSurface { surface, curve, .. } = io::read_surface(input)?;
    let options = DetectOptions {
        tol: tol.unwrap_or(DetectOptions::default().tol),
        ..DetectOptions::default()
    };
    let report = constraints::detect_arbitrage_with(&surface, &options);
    let record = ReportRecord::new(&report, &surface.maturities(), curve.as_ref());
    let json = io::to_json(&record)?;
    match out {
        Some(dir) => {
            io::write_file(dir, "report.json", &json)?;
            io::write_file(dir, "manifest.json", &io::to_json(&RunManifest::new("check", input, dir))?)?;
        }
        None => print!("{json}"),
    }
    if report.feasible {
        eprintln!("no static arbitrage found");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("static arbitrage: {} violation(s)", report.violations.len());
        Ok(ExitCode::from(2))
    }
}

fn stress(input: &Path, scenario_path: &Path, out: &Path) -> Result<ExitCode> {
    let LoadedSurface { surface, .. } = io::read_surface(input)?;
    let scenario: StressScenario = read_json(scenario_path)?;
    warn_unused(&scenario, &surface);
    let s = apply_stress(&surface, &scenario)?;
    io::write_file(out, "stressed_surface.csv", &io::surface_csv(&s.surface))?;
    io::write_file(out, "smiles.csv", &io::smiles_csv(&surface, Some(&s.surface), &s.surface))?;
    let mut manifest = RunManifest::new("stress", input, out);
    manifest.scenario = Some(scenario_path.display().to_string());
    io::write_file(out, "manifest.json", &io::to_json(&manifest)?)?;
    eprintln!("stressed {} node(s)", s.stressed_nodes);
    Ok(ExitCode::SUCCESS)
}

fn run_repair(input: &Path, opts: &RepairArgs, out: &Path) -> Result<ExitCode> {
    let LoadedSurface { surface, curve, .. } = io::read_surface(input)?;
    let mut cfg = opts.config()?;
    let scenario = opts.scenario()?;
    let stressed = stressed(&surface, scenario.as_ref(), &mut cfg)?;
    let target = stressed.as_ref().unwrap_or(&surface);
    let result = repair::repair(target, &cfg)?;

    io::write_file(out, "repaired_surface.csv", &io::surface_csv(&result.repaired))?;
    io::write_file(out, "measure.csv", &io::measure_csv(&result.mu, &result.theta, result.periods)?)?;
    io::write_file(out, "marginals.csv", &io::marginals_csv(&result, &target.maturities()))?;
    io::write_file(out, "smiles.csv", &io::smiles_csv(&surface, stressed.as_ref(), &result.repaired))?;
    io::write_file(out, "history.csv", &io::history_csv(result.history()))?;
    let record = RepairRecord::new(&result, target, curve.as_ref());
    io::write_file(out, "report.json", &io::to_json(&record)?)?;
    io::write_file(out, "manifest.json", &io::to_json(&opts.manifest("repair", input, out, &cfg))?)?;

    if !result.after.feasible {
        eprintln!("error: repaired surface still fails the arbitrage check");
        return Ok(ExitCode::FAILURE);
    }
    match (result.unchanged, result.w1_value) {
        (true, _) => eprintln!("input is free of static arbitrage; left unchanged"),
        (false, Some(w)) => eprintln!("repaired; W1 distance {}", io::fmt12(w)),
        (false, None) => eprintln!("repaired"),
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(input: &Path, eps: &[f64], opts: &RepairArgs, out: &Path) -> Result<ExitCode> {
    if eps.is_empty() {
        return Err(Error::Parameter("--eps needs at least one value".into()));
    }
    let LoadedSurface { surface, .. } = io::read_surface(input)?;
    let mut cfg = opts.config()?;
    let scenario = opts.scenario()?;
    let stressed = stressed(&surface, scenario.as_ref(), &mut cfg)?;
    let target = stressed.as_ref().unwrap_or(&surface);
    let calibration = repair::calibration_for(target, &cfg)?;
    let inputs = repair::prepare(target, &calibration, &cfg)?;

    let mut eps = eps.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let problem = EntropicProblem::new(inputs.system.clone(), &inputs.nu)?;
    let points = epsilon_sweep(&inputs.distance, &problem, &eps, cfg.e_tol, cfg.max_iters, true)?;

    let n = inputs.nu.nu.len();
    let lp_value = if n * n + n <= LpOptions::default().max_vars {
        Some(lp::solve_p_prime(&inputs.distance, &inputs.nu, &inputs.system, &cfg.lp)?.value)
    } else {
        eprintln!("warning: {n} paths is too many for the exact baseline; skipped");
        None
    };
    io::write_file(out, "sweep.csv", &io::sweep_csv(&points, lp_value))?;
    let mut manifest = opts.manifest("sweep", input, out, &cfg);
    manifest.epsilons = Some(eps);
    io::write_file(out, "manifest.json", &io::to_json(&manifest)?)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Check { input, out, tol } => check(input, out.as_deref(), *tol),
        Command::Stress { input, scenario, out } => stress(input, scenario, out),
        Command::Repair { input, opts, out } => run_repair(input, opts, out),
        Command::Sweep { input, eps, opts, out } => sweep(input, eps, opts, out),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
