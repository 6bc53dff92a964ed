use std::process::Command;

use proptest::prelude::*;

use race_stream::compression::Variant;
use race_stream::data_io::{synth_stream, SynthConfig};
use race_stream::harness::{
    run_method, run_prequential, sweep_k, DataSource, ExperimentConfig, Method, Report,
};
use race_stream::metrics::{competition_ranks, Metric};

fn small(seed: u64, n: usize) -> SynthConfig {
    SynthConfig {
        seed,
        instances: n,
        features: 6,
        labels: 8,
        density: 0.25,
        dependency: 0.5,
    }
}

fn all_methods() -> Vec<Method> {
    let mut m: Vec<Method> = Variant::ALL.iter().map(|&v| Method::Race(v)).collect();
    m.extend([Method::Obr, Method::Oecc, Method::Majority, Method::Negative]);
    m
}

fn config(seed: u64, runs: usize) -> ExperimentConfig {
    ExperimentConfig {
        runs,
        seed,
        ..ExperimentConfig::new(DataSource::Synthetic(small(seed, 300)), all_methods(), 50)
    }
}

#[test]
fn every_method_scores_all_but_the_first_batch() {
    // 502 rows in windows of 50: 11 batches, 10 scored
    let data = synth_stream(&small(2, 502)).unwrap();
    for method in all_methods() {
        let r = run_method(&data, method, None, 50, 1, 3).unwrap();
        assert_eq!(r.batches.len(), 10, "{method}");
        assert_eq!(r.variant, method.variant());
        assert_eq!(r.k.is_some(), method.variant().is_some());
        assert!(r.runtime_seconds >= 0.0);
    }
}

#[test]
fn seeds_reproduce_and_deterministic_baselines_repeat() {
    let cfg = config(5, 3);
    let data = cfg.source.load().unwrap();
    let a = run_prequential(&cfg, &data).unwrap();
    let b = run_prequential(&cfg, &data).unwrap();
    assert_eq!(a.len(), all_methods().len() * 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.batches.iter().map(|r| r.micro_f1).collect::<Vec<_>>(), y.batches.iter().map(|r| r.micro_f1).collect::<Vec<_>>());
        assert_eq!(x.seed, y.seed);
    }
    let seeds: Vec<u64> = a.iter().take(3).map(|r| r.seed).collect();
    assert_eq!(seeds, vec![5, 6, 7]);
    for name in ["Majority", "Negative"] {
        let runs: Vec<_> = a.iter().filter(|r| r.method == name).collect();
        assert_eq!(runs.len(), 3);
        for r in &runs[1..] {
            let mut masked = r.aggregate;
            masked.runtime_seconds = runs[0].aggregate.runtime_seconds;
            assert_eq!(masked, runs[0].aggregate);
        }
    }
}

#[test]
fn report_ranks_agree_with_means() {
    let cfg = config(8, 2);
    let data = cfg.source.load().unwrap();
    let report = Report::from_results(&run_prequential(&cfg, &data).unwrap());
    assert_eq!(report.rows.len(), all_methods().len() * Metric::ALL.len());
    for metric in Metric::ALL {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.metric == metric).collect();
        let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
        let ranks = competition_ranks(&means, metric.lower_is_better());
        assert_eq!(rows.iter().map(|r| r.rank).collect::<Vec<_>>(), ranks);
    }
    let json = report.to_json().unwrap();
    assert_eq!(Report::from_json(&json).unwrap(), report);
    let csv = report.to_csv().unwrap();
    assert!(csv.starts_with("dataset,method,variant,metric,mean,std,rank"));
    assert_eq!(csv.lines().count(), report.rows.len() + 1);
}

#[test]
fn sweep_covers_every_k_and_rejects_baselines() {
    let data = synth_stream(&small(9, 200)).unwrap();
    let mut cfg = ExperimentConfig::new(DataSource::Synthetic(small(9, 200)), vec![Method::Race(Variant::RegFixed)], 50);
    cfg.runs = 2;
    let sweep = sweep_k(&cfg, &data, &[2, 3, 4]).unwrap();
    let series = sweep.series("RACE(reg-fixed)", Metric::HammingLoss);
    assert_eq!(series.iter().map(|p| p.0).collect::<Vec<_>>(), vec![2, 3, 4]);
    cfg.methods.push(Method::Obr);
    assert!(sweep_k(&cfg, &data, &[2]).is_err());
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut cfg = config(1, 1);
    cfg.iter = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = config(1, 1);
    cfg.methods.clear();
    assert!(cfg.validate().is_err());
    let data = synth_stream(&small(1, 100)).unwrap();
    assert!(run_method(&data, Method::Race(Variant::ClsFixed), Some(9), 50, 1, 1).is_err());
    assert!("race:nope".parse::<Method>().is_err());
    assert_eq!("race:reg-adaptive".parse::<Method>().unwrap(), Method::Race(Variant::RegAdaptive));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn aggregates_are_mean_of_batches(seed in 0u64..1000, window in 20usize..80) {
        let data = synth_stream(&small(seed, 240)).unwrap();
        let r = run_method(&data, Method::Race(Variant::ClsAdaptive), None, window, 1, seed).unwrap();
        for metric in Metric::QUALITY {
            let mean = r.batches.iter().map(|b| b.get(metric)).sum::<f64>() / r.batches.len() as f64;
            prop_assert!((r.aggregate.get(metric) - mean).abs() < 1e-12);
        }
    }
}

fn race() -> Command {
    Command::new(env!("CARGO_BIN_EXE_race"))
}

#[test]
fn cli_writes_csv_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let status = race()
        .args(["run", "--synth", "m=5,l=6,n=200,density=0.3,dep=0.4", "--method", "race", "--method", "negative"])
        .args(["--window", "50", "--runs", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("dataset,method,variant,metric,mean,std,rank"));
    assert!(text.contains("RACE(cls-adaptive)"));
    assert!(text.contains("Negative"));
}

#[test]
fn cli_sweep_prints_every_k() {
    let out = race()
        .args(["sweep-k", "--synth", "m=5,l=8,n=200,density=0.3,dep=0.4", "--variant", "reg-fixed"])
        .args(["--window", "50", "--runs", "1", "--k-min", "2", "--k-max", "4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(&reader.headers().unwrap()[3], "k");
    let ks: std::collections::BTreeSet<String> =
        reader.records().map(|r| r.unwrap()[3].to_string()).collect();
    assert_eq!(ks.into_iter().collect::<Vec<_>>(), ["2", "3", "4"]);
}

#[test]
fn cli_fails_with_a_diagnostic() {
    for args in [
        vec!["run", "--synth", "m=5,l=6,n=100", "--method", "bogus"],
        vec!["run", "--synth", "m=5,l=6,n=100", "--window", "0"],
        vec!["run", "--data", "/nonexistent.arff", "--labels", "/nonexistent.xml"],
        vec!["run"],
    ] {
        let out = race().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}
