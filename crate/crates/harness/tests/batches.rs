use usd_core::{StepMode, StopReason};
use usd_harness::output::{write_aggregate_json, write_trials_csv, CSV_HEADER};
use usd_harness::sweep::{sweep, write_rows_csv, SweepGrid};
use usd_harness::{run_trials, run_trials_with_threads, ExperimentSpec, InitKind};

fn spec(n: u64, k: usize, trials: u64, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        trials,
        master_seed: seed,
        ..ExperimentSpec::new(n, k)
    }
}

fn csv_bytes(spec: &ExperimentSpec, threads: usize) -> Vec<u8> {
    let batch = run_trials_with_threads(spec, threads).unwrap();
    let mut out = Vec::new();
    write_trials_csv(&mut out, &batch.records).unwrap();
    out
}

#[test]
fn csv_is_identical_across_thread_counts() {
    for mode in [StepMode::Exact, StepMode::ProductiveSkip] {
        let s = ExperimentSpec {
            mode: Some(mode),
            init: InitKind::Additive { beta: Some(20) },
            ..spec(400, 3, 24, 11)
        };
        let one = csv_bytes(&s, 1);
        assert_eq!(one, csv_bytes(&s, 4));
        assert_eq!(one, csv_bytes(&s, 3));
    }
}

#[test]
fn csv_layout() {
    let batch = run_trials(&spec(60, 3, 5, 1)).unwrap();
    let mut out = Vec::new();
    write_trials_csv(&mut out, &batch.records).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 19);
        assert_eq!(row[0], i.to_string());
        let winner: usize = row[14].parse().unwrap();
        assert!((1..=3).contains(&winner), "winners are 1-based");
        assert_eq!(row[5], "", "beta is empty for uniform starts");
        assert_eq!(row[13], row[8], "t5 equals the total at consensus");
    }
}

#[test]
fn aggregate_json_fields() {
    let batch = run_trials(&spec(100, 4, 6, 2)).unwrap();
    let mut out = Vec::new();
    write_aggregate_json(&mut out, &batch).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["stats"]["trials"], 6);
    assert_eq!(v["stats"]["consensus_trials"], 6);
    assert_eq!(v["spec"]["init"]["kind"], "uniform");
    assert!(v["version"].is_string() && v["build"].is_string());
    let wins: u64 = v["stats"]["wins"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_u64().unwrap())
        .sum();
    assert_eq!(wins, 6);
}

#[test]
fn single_trial_batch_matches_a_lone_trial() {
    let s = spec(200, 2, 1, 9);
    let batch = run_trials(&s).unwrap();
    let initial = usd_harness::make_initial(&s).unwrap();
    let lone = usd_harness::run_trial(&s, &initial, 0, false).unwrap();
    assert_eq!(batch.records, vec![lone.record]);
}

#[test]
fn cap_is_reported() {
    let s = ExperimentSpec {
        cap: Some(10),
        ..spec(1_000, 2, 3, 0)
    };
    let batch = run_trials(&s).unwrap();
    for r in &batch.records {
        assert_eq!(r.stop_reason, StopReason::Cap);
        assert_eq!(r.winner, None);
        assert!(r.total_interactions <= 10);
    }
    assert_eq!(batch.stats.consensus_trials, 0);
}

#[test]
fn symmetric_start_has_no_favourite() {
    let batch = run_trials(&ExperimentSpec {
        mode: Some(StepMode::ProductiveSkip),
        ..spec(60, 2, 2_000, 5)
    })
    .unwrap();
    let wins = &batch.stats.wins;
    assert_eq!(wins.iter().sum::<u64>(), 2_000);
    // binomial(2000, 1/2): 4.5 standard deviations is about 100
    assert!(wins[0].abs_diff(1_000) < 100, "{wins:?}");
}

#[test]
fn mean_time_grows_with_k() {
    let means: Vec<f64> = [2, 4, 8]
        .into_iter()
        .map(|k| {
            run_trials(&spec(2_000, k, 30, 3))
                .unwrap()
                .stats
                .total_interactions
                .unwrap()
                .mean
        })
        .collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

#[test]
fn empty_grid_yields_no_rows() {
    let grid = SweepGrid {
        ns: vec![],
        ks: vec![2],
        inits: vec![InitKind::Uniform],
    };
    let rows = sweep(&spec(10, 2, 1, 0), &grid, None).unwrap();
    assert!(rows.is_empty());
    let mut out = Vec::new();
    write_rows_csv(&mut out, &rows).unwrap();
    assert!(out.is_empty());
}

#[test]
fn infeasible_cells_become_error_rows() {
    let grid = SweepGrid {
        ns: vec![10],
        ks: vec![2, 3],
        inits: vec![InitKind::Additive { beta: Some(50) }, InitKind::Uniform],
    };
    let rows = sweep(&spec(10, 2, 2, 0), &grid, None).unwrap();
    assert_eq!(rows.len(), 4);
    let errors: Vec<_> = rows.iter().filter(|r| !r.is_ok()).collect();
    assert_eq!(errors.len(), 2);
    assert!(errors
        .iter()
        .all(|r| r.status == "error" && r.error.is_some() && r.mean_interactions.is_none()));
    assert!(rows.iter().filter(|r| r.is_ok()).all(|r| r.consensus_trials == Some(2)));
}

#[test]
fn sweep_resumes_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("cells.jsonl");
    let base = spec(80, 2, 4, 21);
    let first = SweepGrid {
        ns: vec![80],
        ks: vec![2],
        inits: vec![InitKind::Uniform],
    };
    let rows = sweep(&base, &first, Some(&manifest)).unwrap();
    assert_eq!(std::fs::read_to_string(&manifest).unwrap().lines().count(), 1);

    // a torn trailing line is ignored and the finished cell is reused
    std::fs::OpenOptions::new()
        .append(true)
        .open(&manifest)
        .and_then(|mut f| std::io::Write::write_all(&mut f, b"{\"key\":"))
        .unwrap();
    let wider = SweepGrid {
        ns: vec![80],
        ks: vec![2, 3],
        inits: vec![InitKind::Uniform],
    };
    let resumed = sweep(&base, &wider, Some(&manifest)).unwrap();
    assert_eq!(resumed.len(), 2);
    assert_eq!(resumed[0], rows[0]);
    let fresh = sweep(&base, &wider, None).unwrap();
    assert_eq!(resumed, fresh);
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with('}')).count(), 2);
    assert_eq!(sweep(&base, &wider, Some(&manifest)).unwrap(), fresh);
    assert_eq!(std::fs::read_to_string(&manifest).unwrap(), text, "nothing is rerun");
}
