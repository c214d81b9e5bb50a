//! Reproducibility of benchmark result files.

use sinkhorn_dro_bench::benchmark::{
    read_csv_columns, rerun_row, run_benchmark, summary_path, write_report, Stats, Summary,
};
use sinkhorn_dro_bench::{App, ExperimentConfig, Method};

fn small_newsvendor() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(App::Newsvendor);
    cfg.trials = 3;
    cfg.n = 12;
    cfg.m = 10;
    cfg.folds = 3;
    cfg.test_size = 2000;
    cfg.seed = 2024;
    cfg.record_time = false;
    cfg.grids.epsilon = vec![0.05, 0.2];
    cfg.grids.rho_bar = vec![1e-3, 1e-2];
    cfg.grids.rho = vec![1e-2, 1e-1];
    cfg.grids.eta = vec![1e-2, 1e-1];
    cfg
}

#[test]
fn result_files_are_byte_identical_across_thread_counts() {
    let cfg = small_newsvendor();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write_report(&run_benchmark(&cfg, Some(1)).unwrap(), &a, false).unwrap();
    write_report(&run_benchmark(&cfg, Some(4)).unwrap(), &b, false).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(summary_path(&a)).unwrap(),
        std::fs::read(summary_path(&b)).unwrap()
    );
}

#[test]
fn summary_matches_statistics_recomputed_from_csv() {
    let cfg = small_newsvendor();
    let report = run_benchmark(&cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_report(&report, &path, false).unwrap();
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(summary_path(&path)).unwrap()).unwrap();
    let cols = read_csv_columns(&path).unwrap();
    assert_eq!(cols.len(), cfg.trials * cfg.methods.len());
    for (name, ms) in &summary.methods {
        let js: Vec<f64> = cols.iter().filter(|c| &c.0 == name).filter_map(|c| c.1).collect();
        let gaps: Vec<f64> = cols.iter().filter(|c| &c.0 == name).filter_map(|c| c.2).collect();
        let (sj, sg) = (Stats::of(&js).unwrap(), Stats::of(&gaps).unwrap());
        let (mj, mg) = (ms.j.unwrap(), ms.gap.unwrap());
        for (x, y) in [
            (sj.mean, mj.mean),
            (sj.median, mj.median),
            (sj.q95, mj.q95),
            (sg.mean, mg.mean),
            (sg.q05, mg.q05),
        ] {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{name}: {x} vs {y}");
        }
        assert_eq!(ms.failures, 0);
    }
}

#[test]
fn single_row_rerun_reproduces_the_benchmark_row() {
    let cfg = small_newsvendor();
    let report = run_benchmark(&cfg, Some(2)).unwrap();
    for method in [Method::Sinkhorn, Method::Kl] {
        let row = report.rows.iter().find(|r| r.trial == 2 && r.method == method).unwrap();
        assert_eq!(&rerun_row(&cfg, 2, method).unwrap(), row);
    }
}
