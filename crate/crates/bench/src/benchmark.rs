//! Repeated out-of-sample experiments.
//!
//! Every random quantity of trial `t` comes from a stream below
//! `SeedSpec::new(seed).with_trial(t)`, selected by the `fold` slot:
//! training data, test data, the final kernel pool, fold permutations and the
//! per-fold pools of cross-validation each own a slot. A row is therefore a
//! pure function of `(config, trial, method)` and does not depend on thread
//! count or scheduling.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sinkhorn_dro::apps::{exp_demand_sample, factor_returns_sample, LogisticLoss, NewsvendorLoss, PortfolioLoss};
use sinkhorn_dro::{EmpiricalDistribution, SeedSpec};

use crate::config::{App, ExperimentConfig, Method};
use crate::cv::{cross_validate, CvOutcome, CvSeeds};
use crate::error::{HarnessError, Result};
use crate::eval::{out_of_sample, relative_gap, true_optimum, AppLoss};
use crate::io::{read_labeled_csv, LabeledTable};
use crate::methods::{solve_method, SolveContext, TrainSet};

pub const STREAM_TRAIN: u64 = 0;
pub const STREAM_TEST: u64 = 1;
pub const STREAM_POOL: u64 = 2;
pub const STREAM_FOLDS: u64 = 3;
pub const STREAM_SPLIT: u64 = 4;
/// Fold `k` of cross-validation draws its pools from slot `STREAM_CV_POOLS + k`.
pub const STREAM_CV_POOLS: u64 = 100;

/// One `(trial, method)` outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub method: Method,
    pub epsilon: Option<f64>,
    pub rho_bar: Option<f64>,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub theta: Vec<f64>,
    /// Out-of-sample objective.
    #[serde(rename = "J")]
    pub j: Option<f64>,
    /// Absent when the true optimum is unknown or the solve failed.
    pub gap: Option<f64>,
    pub seconds: Option<f64>,
    pub seed_path: String,
    pub error: Option<String>,
}

/// Data of one trial, shared by all methods.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub trial: usize,
    pub loss: AppLoss,
    pub train: TrainSet,
    pub test: EmpiricalDistribution,
    pub j_star: Option<f64>,
}

/// A validated configuration plus the inputs shared across trials.
#[derive(Debug, Clone)]
pub struct Experiment {
    cfg: ExperimentConfig,
    table: Option<LabeledTable>,
    portfolio_optimum: Option<f64>,
}

fn to_distribution(rows: &[Vec<f64>]) -> Result<EmpiricalDistribution> {
    Ok(EmpiricalDistribution::from_rows(rows)?)
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut table = None;
        let mut portfolio_optimum = None;
        match cfg.app {
            App::Semisup => {
                let s = cfg.semisup.as_ref().expect("validated");
                let mut t = read_labeled_csv(&s.path, s.label_column.as_deref())?;
                if t.len() <= s.n_labeled + s.n_unlabeled {
                    return Err(HarnessError::Config(format!(
                        "dataset has {} rows, fewer than n_labeled + n_unlabeled + 1",
                        t.len()
                    )));
                }
                if s.standardize {
                    t.standardize();
                }
                table = Some(t);
            }
            App::Portfolio => {
                let p = &cfg.portfolio;
                let loss = AppLoss::Portfolio(PortfolioLoss::new(p.dim, p.alpha, p.varrho)?);
                portfolio_optimum = true_optimum(&loss, 0.0)?;
            }
            _ => {}
        }
        Ok(Self {
            cfg,
            table,
            portfolio_optimum,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn trial_seed(&self, trial: usize) -> SeedSpec {
        SeedSpec::new(self.cfg.seed).with_trial(trial as u64)
    }

    /// Training sample, test sample and loss of trial `trial`.
    pub fn trial(&self, trial: usize) -> Result<TrialData> {
        let cfg = &self.cfg;
        let seed = self.trial_seed(trial);
        match cfg.app {
            App::Newsvendor => {
                let s = cfg.newsvendor;
                let train = exp_demand_sample(s.s, cfg.n, seed.with_fold(STREAM_TRAIN))?;
                let test = exp_demand_sample(s.s, cfg.test_size, seed.with_fold(STREAM_TEST))?;
                let max = train.as_flat().iter().copied().fold(0.0, f64::max);
                let loss = AppLoss::Newsvendor(NewsvendorLoss::new(s.k, s.u, 3.0 * max.max(s.s))?);
                let j_star = true_optimum(&loss, s.s)?;
                Ok(TrialData {
                    trial,
                    loss,
                    train: TrainSet::plain(train),
                    test,
                    j_star,
                })
            }
            App::Portfolio => {
                let p = cfg.portfolio;
                let train = factor_returns_sample(p.dim, cfg.n, seed.with_fold(STREAM_TRAIN))?;
                let test = factor_returns_sample(p.dim, cfg.test_size, seed.with_fold(STREAM_TEST))?;
                Ok(TrialData {
                    trial,
                    loss: AppLoss::Portfolio(PortfolioLoss::new(p.dim, p.alpha, p.varrho)?),
                    train: TrainSet::plain(train),
                    test,
                    j_star: self.portfolio_optimum,
                })
            }
            App::Semisup => {
                let s = cfg.semisup.as_ref().expect("validated");
                let table = self.table.as_ref().expect("loaded");
                let mut order: Vec<usize> = (0..table.len()).collect();
                order.shuffle(&mut seed.with_fold(STREAM_SPLIT).rng());
                let labeled_row = |i: usize| {
                    let mut r = table.features[i].clone();
                    r.push(table.labels[i]);
                    r
                };
                let (lab, rest) = order.split_at(s.n_labeled);
                let (unlab, test) = rest.split_at(s.n_unlabeled);
                let test: Vec<usize> = test.iter().copied().take(cfg.test_size).collect();
                let labeled = to_distribution(&lab.iter().map(|&i| labeled_row(i)).collect::<Vec<_>>())?;
                let unlabeled = if unlab.is_empty() {
                    None
                } else {
                    Some(to_distribution(
                        &unlab.iter().map(|&i| table.features[i].clone()).collect::<Vec<_>>(),
                    )?)
                };
                let test = to_distribution(&test.iter().map(|&i| labeled_row(i)).collect::<Vec<_>>())?;
                Ok(TrialData {
                    trial,
                    loss: AppLoss::Logistic(LogisticLoss::new(table.dim())),
                    train: TrainSet {
                        data: labeled,
                        unlabeled,
                    },
                    test,
                    j_star: None,
                })
            }
            App::CustomFinite => Err(HarnessError::Config("app `custom-finite` has no trials".into())),
        }
    }

    fn context<'a>(
        &'a self,
        loss: &'a AppLoss,
        inner: &'a sinkhorn_dro::optimizer::InnerSolverConfig,
    ) -> SolveContext<'a> {
        SolveContext {
            loss,
            inner,
            m: self.cfg.m,
            newsvendor_cost: self.cfg.newsvendor.wasserstein_cost.into(),
        }
    }

    /// Hyper-parameters of `method` for this trial: fixed ones from the
    /// config, the rest by cross-validation on the training sample.
    pub fn select(&self, data: &TrialData, method: Method) -> Result<CvOutcome> {
        let inner = self.cfg.inner();
        let ctx = self.context(&data.loss, &inner);
        let seed = self.trial_seed(data.trial);
        let seeds = CvSeeds {
            folds: seed.with_fold(STREAM_FOLDS),
            pools: seed.with_fold(STREAM_CV_POOLS),
        };
        let n = data.train.data.len();
        cross_validate(
            &ctx,
            method,
            &self.cfg.hyper,
            &self.cfg.grids,
            &data.train,
            self.cfg.folds,
            &seeds,
            n..n + data.test.len(),
        )
    }

    /// Selects, solves and evaluates one method; failures become the row's
    /// `error` field.
    pub fn run_row(&self, data: &TrialData, method: Method) -> TrialResult {
        let start = Instant::now();
        let mut row = TrialResult {
            trial: data.trial,
            method,
            epsilon: None,
            rho_bar: None,
            rho: None,
            eta: None,
            theta: Vec::new(),
            j: None,
            gap: None,
            seconds: None,
            seed_path: format!("{}/{}", self.cfg.seed, data.trial),
            error: None,
        };
        let outcome = self.select(data, method).and_then(|cv| {
            let inner = self.cfg.inner();
            let ctx = self.context(&data.loss, &inner);
            let pool_seed = self.trial_seed(data.trial).with_fold(STREAM_POOL);
            let solved = solve_method(&ctx, method, &cv.hyper, &data.train, pool_seed)?;
            Ok((cv.hyper, solved))
        });
        match outcome {
            Ok((hyper, solved)) => {
                row.epsilon = hyper.epsilon;
                row.rho_bar = hyper.rho_bar;
                row.rho = hyper.rho;
                row.eta = hyper.eta;
                match out_of_sample(&data.loss, &solved.theta, &data.test) {
                    Ok(j) => {
                        row.j = Some(j);
                        row.gap = data.j_star.map(|s| relative_gap(j, s));
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
                row.theta = solved.theta;
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        if self.cfg.record_time {
            row.seconds = Some(start.elapsed().as_secs_f64());
        }
        row
    }

    /// All rows of one trial, in configured method order.
    pub fn run_trial(&self, trial: usize) -> Vec<TrialResult> {
        match self.trial(trial) {
            Ok(data) => self.cfg.methods.par_iter().map(|&m| self.run_row(&data, m)).collect(),
            Err(e) => self
                .cfg
                .methods
                .iter()
                .map(|&method| TrialResult {
                    trial,
                    method,
                    epsilon: None,
                    rho_bar: None,
                    rho: None,
                    eta: None,
                    theta: Vec::new(),
                    j: None,
                    gap: None,
                    seconds: None,
                    seed_path: format!("{}/{}", self.cfg.seed, trial),
                    error: Some(e.to_string()),
                })
                .collect(),
        }
    }

    /// Every row, ordered by `(trial, method)`.
    pub fn run(&self) -> Vec<TrialResult> {
        let per_trial: Vec<Vec<TrialResult>> = (0..self.cfg.trials)
            .into_par_iter()
            .map(|t| self.run_trial(t))
            .collect();
        per_trial.into_iter().flatten().collect()
    }

    /// Width of the `θ` columns.
    pub fn theta_dim(&self) -> usize {
        match self.cfg.app {
            App::Newsvendor => 1,
            App::Portfolio => self.cfg.portfolio.dim + 1,
            App::Semisup => self.table.as_ref().map_or(0, |t| t.dim()),
            App::CustomFinite => 0,
        }
    }
}

/// Runs the benchmark on a pool of `threads` workers (all cores when `None`).
pub fn run_benchmark(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<BenchmarkReport> {
    let exp = Experiment::new(cfg.clone())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let rows = pool.install(|| exp.run());
    let summary = Summary::from_rows(cfg.app, &rows);
    Ok(BenchmarkReport {
        theta_dim: exp.theta_dim(),
        rows,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub theta_dim: usize,
    pub rows: Vec<TrialResult>,
    pub summary: Summary,
}

/// Location and spread of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q25: f64,
    pub q75: f64,
    pub q95: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics of a sorted slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            count: v.len(),
            mean: values.iter().sum::<f64>() / v.len() as f64,
            median: quantile(&v, 0.5),
            q05: quantile(&v, 0.05),
            q25: quantile(&v, 0.25),
            q75: quantile(&v, 0.75),
            q95: quantile(&v, 0.95),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub rows: usize,
    pub failures: usize,
    #[serde(rename = "J")]
    pub j: Option<Stats>,
    pub gap: Option<Stats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub app: App,
    pub methods: BTreeMap<String, MethodSummary>,
}

impl Summary {
    pub fn from_rows(app: App, rows: &[TrialResult]) -> Self {
        let mut grouped: BTreeMap<String, Vec<&TrialResult>> = BTreeMap::new();
        for r in rows {
            grouped.entry(r.method.name().to_string()).or_default().push(r);
        }
        let methods = grouped
            .into_iter()
            .map(|(name, rs)| {
                let js: Vec<f64> = rs.iter().filter_map(|r| r.j).collect();
                let gaps: Vec<f64> = rs.iter().filter_map(|r| r.gap).collect();
                let summary = MethodSummary {
                    rows: rs.len(),
                    failures: rs.iter().filter(|r| r.error.is_some()).count(),
                    j: Stats::of(&js),
                    gap: Stats::of(&gaps),
                };
                (name, summary)
            })
            .collect();
        Self { app, methods }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// CSV header for `theta_dim` decision coordinates.
pub fn csv_header(theta_dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["trial", "method", "epsilon", "rho_bar", "rho", "eta"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..theta_dim).map(|i| format!("theta_{i}")));
    h.extend(
        ["J", "gap", "seconds", "seed_path", "error"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

/// Writes rows as CSV; floats use the shortest exact decimal form.
pub fn write_csv<W: Write>(out: W, theta_dim: usize, rows: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(theta_dim))?;
    for r in rows {
        let mut rec = vec![
            r.trial.to_string(),
            r.method.name().to_string(),
            opt(r.epsilon),
            opt(r.rho_bar),
            opt(r.rho),
            opt(r.eta),
        ];
        rec.extend((0..theta_dim).map(|i| opt(r.theta.get(i).copied())));
        rec.extend([
            opt(r.j),
            opt(r.gap),
            opt(r.seconds),
            r.seed_path.clone(),
            r.error.clone().unwrap_or_default(),
        ]);
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

/// `(method, J, gap)` of one results row.
pub type RowColumns = (String, Option<f64>, Option<f64>);

/// Reads back the `method`, `J` and `gap` columns of a results CSV.
pub fn read_csv_columns(path: &Path) -> Result<Vec<RowColumns>> {
    let mut r = csv::Reader::from_path(path)?;
    let h = r.headers()?.clone();
    let col = |name: &str| {
        h.iter().position(|c| c == name).ok_or_else(|| HarnessError::Dataset {
            path: path.to_path_buf(),
            reason: format!("missing column `{name}`"),
        })
    };
    let (mi, ji, gi) = (col("method")?, col("J")?, col("gap")?);
    let num = |s: &str| s.parse::<f64>().ok();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push((rec[mi].to_string(), num(&rec[ji]), num(&rec[gi])));
    }
    Ok(out)
}

/// Writes `rows.csv` (or JSON rows) to `path` and the summary next to it as
/// `<path>.summary.json`.
pub fn write_report(report: &BenchmarkReport, path: &Path, json_rows: bool) -> Result<()> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut buf = std::io::BufWriter::new(file);
    if json_rows {
        serde_json::to_writer_pretty(&mut buf, &report.rows)?;
    } else {
        write_csv(&mut buf, report.theta_dim, &report.rows)?;
    }
    buf.flush().map_err(io)?;
    let summary_path = summary_path(path);
    let text = serde_json::to_string_pretty(&report.summary)?;
    std::fs::write(&summary_path, text).map_err(|source| HarnessError::Io {
        path: summary_path.clone(),
        source,
    })?;
    Ok(())
}

pub fn summary_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".summary.json");
    s.into()
}

/// Reproduces a single row without running the rest of the benchmark.
pub fn rerun_row(cfg: &ExperimentConfig, trial: usize, method: Method) -> Result<TrialResult> {
    let exp = Experiment::new(cfg.clone())?;
    let data = exp.trial(trial)?;
    Ok(exp.run_row(&data, method))
}
