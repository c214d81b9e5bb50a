//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{error::ErrorKind, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sinkhorn_dro::dual::LinearGaussianDual;
use sinkhorn_dro::finite_space::{brute_force_primal, exact_dual_discrete, to_cbf, FiniteInstance};
use sinkhorn_dro::optimizer::{solve_dual, InnerSolverConfig};
use sinkhorn_dro::worstcase::{check_first_order, sinkhorn_distance_discrete};
use sinkhorn_dro::{CostSpec, EmpiricalDistribution, Mahalanobis};

use crate::benchmark::{run_benchmark, write_csv, write_report, Experiment};
use crate::config::{App, ExperimentConfig, FiniteSettings, LinearSettings};
use crate::error::{HarnessError, Result};

/// Configuration used by `verify` when no `--config` is given.
pub const BUNDLED_EXAMPLE: &str = include_str!("../configs/example1.toml");

#[derive(Debug, Parser)]
#[command(name = "sinkhorn-dro", version, about = "Sinkhorn DRO solver and experiment harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file, TOML or JSON.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve one instance from the config.
    Solve,
    /// Repeated trials with cross-validation and out-of-sample evaluation.
    Benchmark,
    /// Cross-validation on the first trial only.
    Cv,
    /// Closed-form, duality and optimality checks.
    Verify,
    /// Write the finite-space conic program in CBF.
    ExportCbf,
    /// Discrete Sinkhorn distance between two weight vectors.
    SinkhornDist,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if cli.command == Command::Verify => {
            ExperimentConfig::from_toml(BUNDLED_EXAMPLE).map_err(|reason| HarnessError::ConfigParse {
                path: "<bundled example>".into(),
                reason,
            })?
        }
        None => return Err(HarnessError::Config("--config <path> is required".into())),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(cli: &Cli, out: &mut dyn Write, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        }),
        None => out.write_all(text.as_bytes()).map_err(|source| HarnessError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn io_err(source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: "<stdout>".into(),
        source,
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Solve => solve(cli, &cfg, out),
        Command::Benchmark => {
            let mut cfg = cfg;
            if let Some(path) = &cli.out {
                cfg.output = Some(path.clone());
            }
            let report = run_benchmark(&cfg, cli.threads)?;
            let path = cfg.output.clone().unwrap_or_else(|| "results.csv".into());
            write_report(&report, &path, cli.format == Format::Json)?;
            let failures: usize = report.summary.methods.values().map(|m| m.failures).sum();
            writeln!(
                out,
                "wrote {} rows to {} ({failures} failed)",
                report.rows.len(),
                path.display()
            )
            .map_err(io_err)?;
            Ok(0)
        }
        Command::Cv => {
            let exp = Experiment::new(cfg.clone())?;
            let data = exp.trial(0)?;
            let mut chosen = Vec::new();
            for &m in &cfg.methods {
                chosen.push((m, exp.select(&data, m)?));
            }
            emit(cli, out, &format!("{}\n", serde_json::to_string_pretty(&chosen)?))?;
            Ok(0)
        }
        Command::Verify => {
            let checks = verify_suite(&cfg)?;
            for c in &checks {
                writeln!(
                    out,
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )
                .map_err(io_err)?;
            }
            Ok(if checks.iter().all(|c| c.passed) { 0 } else { 2 })
        }
        Command::ExportCbf => {
            let inst = finite_instance(&cfg)?;
            emit(cli, out, &to_cbf(&inst))?;
            Ok(0)
        }
        Command::SinkhornDist => {
            let d = cfg
                .distance
                .as_ref()
                .ok_or_else(|| HarnessError::Config("`sinkhorn-dist` needs a [distance] section".into()))?;
            let cost: Vec<f64> = d.cost.iter().flatten().copied().collect();
            let nu = d.nu.clone().unwrap_or_else(|| vec![1.0; d.q.len()]);
            let (value, coupling) = sinkhorn_distance_discrete(&d.p, &d.q, &cost, d.epsilon, &nu, d.tol, d.max_iters)?;
            #[derive(Serialize)]
            struct Distance {
                value: f64,
                marginal_violation: f64,
            }
            let text = serde_json::to_string_pretty(&Distance {
                value,
                marginal_violation: coupling.marginal_violation(),
            })?;
            emit(cli, out, &format!("{text}\n"))?;
            Ok(0)
        }
    }
}

fn solve(cli: &Cli, cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32> {
    if cfg.app == App::CustomFinite {
        let inst = finite_instance(cfg)?;
        let sol = exact_dual_discrete(&inst)?;
        #[derive(Serialize)]
        struct FiniteSolve {
            lambda: Option<f64>,
            value: f64,
            regime: String,
        }
        let text = serde_json::to_string_pretty(&FiniteSolve {
            lambda: sol.lambda.is_finite().then_some(sol.lambda),
            value: sol.value,
            regime: format!("{:?}", sol.regime),
        })?;
        emit(cli, out, &format!("{text}\n"))?;
        return Ok(0);
    }
    let exp = Experiment::new(cfg.clone())?;
    let rows = exp.run_trial(0);
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(&mut buf, exp.theta_dim(), &rows)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
    };
    emit(cli, out, &text)?;
    Ok(if rows.iter().any(|r| r.error.is_some()) { 2 } else { 0 })
}

pub fn finite_instance(cfg: &ExperimentConfig) -> Result<FiniteInstance> {
    let FiniteSettings { f, q, rho_bar, epsilon } = cfg
        .finite
        .as_ref()
        .ok_or_else(|| HarnessError::Config("missing [finite] section".into()))?;
    let flat: Vec<f64> = q.iter().flatten().copied().collect();
    Ok(FiniteInstance::new(f.clone(), flat, q.len(), *rho_bar, *epsilon)?)
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn linear_dual(s: &LinearSettings) -> Result<LinearGaussianDual> {
    let data = EmpiricalDistribution::from_rows(&s.data)?;
    let cost = match &s.omega {
        Some(rows) => {
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let m = Mahalanobis::from_row_major(rows.len(), &flat)?;
            CostSpec::mahalanobis(m.omega().clone(), s.epsilon)?
        }
        None => CostSpec::quadratic(s.epsilon)?,
    };
    Ok(LinearGaussianDual::new(&s.a, &data, &cost, s.rho_bar)?)
}

/// Closed-form, finite-space duality and first-order checks on the config's
/// `[linear]` and `[finite]` sections; absent sections are skipped.
pub fn verify_suite(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    if let Some(lin) = &cfg.linear {
        let dual = linear_dual(lin)?;
        let sol = solve_dual(&dual, lin.rho_bar, &[], &InnerSolverConfig::default(), 1e-12, 200)?;
        let closed = dual.optimal_value();
        let gap = (sol.value - closed).abs();
        checks.push(Check {
            name: "linear closed form",
            passed: gap <= 1e-5 * closed.abs().max(1e-12),
            detail: format!("|V_num - V_closed| = {gap:.3e} (V_closed = {closed})"),
        });
        let lam = dual.optimal_lambda();
        let lam_err = (sol.lambda - lam).abs() / lam;
        checks.push(Check {
            name: "linear optimal multiplier",
            passed: lam_err <= 1e-4,
            detail: format!("relative error {lam_err:.3e} (lambda = {lam})"),
        });
        let residual = check_first_order(&dual, sol.lambda)?;
        checks.push(Check {
            name: "first-order residual",
            passed: residual <= 1e-3,
            detail: format!("lambda * |dF/dlambda| = {residual:.3e}"),
        });
    }
    if cfg.finite.is_some() {
        let inst = finite_instance(cfg)?;
        let dual = exact_dual_discrete(&inst)?;
        let primal = brute_force_primal(&inst)?;
        let gap = (dual.value - primal).abs();
        checks.push(Check {
            name: "finite-space strong duality",
            passed: gap <= 1e-4 * (1.0 + dual.value.abs()),
            detail: format!("|V_dual - V_primal| = {gap:.3e} (regime {:?})", dual.regime),
        });
    }
    if checks.is_empty() {
        return Err(HarnessError::Config(
            "`verify` needs a [linear] or [finite] section".into(),
        ));
    }
    Ok(checks)
}
