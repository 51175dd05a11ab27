use std::collections::BTreeSet;

use focused_skills::evaluation::{coverage_curve, CoverageMode};
use focused_skills::experiments::*;
use focused_skills::{Algorithm, EnvKind};

fn small(dir: &std::path::Path, env: EnvKind, algorithm: Algorithm) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { env, algorithm, seed: 5, out_dir: dir.to_path_buf(), ..Default::default() };
    cfg.discovery.episodes = 1_500;
    cfg.task.episodes = 30;
    cfg.task.runs = 4;
    cfg.coverage.max_length = 2;
    cfg.coverage.starts = 3;
    cfg
}

#[test]
fn discover_is_byte_identical_across_repeats() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for algorithm in [Algorithm::FocusedVic, Algorithm::FocusedDiayn, Algorithm::Lsd, Algorithm::DusdiVic] {
        let oa = cmd_discover(&small(a.path(), EnvKind::MudWorld, algorithm)).unwrap();
        let ob = cmd_discover(&small(b.path(), EnvKind::MudWorld, algorithm)).unwrap();
        assert_eq!(std::fs::read(&oa.checkpoint).unwrap(), std::fs::read(&ob.checkpoint).unwrap());
        assert_eq!(std::fs::read(&oa.trace).unwrap(), std::fs::read(&ob.trace).unwrap());
        assert_eq!(oa.checkpoint.file_name(), ob.checkpoint.file_name());
    }
}

#[test]
fn checkpoint_round_trip_preserves_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), EnvKind::FourRooms, Algorithm::FocusedLsd);
    let out = cmd_discover(&cfg).unwrap();
    let ckpt = Checkpoint::load(&out.checkpoint).unwrap();
    assert_eq!(ckpt.format_version, CHECKPOINT_FORMAT_VERSION);
    let again = Checkpoint::from_json(&ckpt.to_json()).unwrap();
    assert_eq!(again, ckpt);

    let env = cfg.env.build();
    let mut rng = focused_skills::rng::stream(cfg.seed, "discover", &[]);
    let fresh = focused_skills::train_skills(&env, cfg.algorithm, &cfg.discovery_config(), &mut rng).unwrap();
    let loaded = ckpt.skill_set().unwrap();
    assert_eq!(loaded, fresh.skills);
    assert_eq!(ckpt.reward_model().unwrap(), fresh.model);
    let s0 = env.initial_state();
    let c1 = coverage_curve(&env, &loaded, &s0, 2, CoverageMode::Exhaustive, 9).unwrap();
    let c2 = coverage_curve(&env, &fresh.skills, &s0, 2, CoverageMode::Exhaustive, 9).unwrap();
    assert_eq!(c1, c2);
}

#[test]
fn checkpoint_rejects_other_versions() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_discover(&small(dir.path(), EnvKind::MudWorld, Algorithm::Vic)).unwrap();
    let text = std::fs::read_to_string(&out.checkpoint).unwrap().replacen("\"format_version\":1", "\"format_version\":99", 1);
    assert!(matches!(Checkpoint::from_json(&text), Err(ExperimentError::Checkpoint(_))));
}

#[test]
fn downstream_writes_one_run_id_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), EnvKind::ForageWorld, Algorithm::FocusedVic);
    cfg.task.runs = 50;
    cfg.task.episodes = 5;
    let ckpt = cmd_discover(&cfg).unwrap().checkpoint;
    let csv = cmd_downstream(&cfg, &ckpt).unwrap();
    let rows = read_rows(&csv).unwrap();
    let runs: BTreeSet<u32> = rows.iter().map(|r| r.run).collect();
    assert_eq!(runs.len(), 50);
    assert_eq!(rows.iter().filter(|r| r.metric == "return").count(), 50 * 5);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("metric,env,algorithm,seed,run,episode_or_x,value\n"));
    let again = cmd_downstream(&cfg, &ckpt).unwrap();
    assert_eq!(again, csv);
}

#[test]
fn proxy_downstream_labels_its_return() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), EnvKind::MudWorld, Algorithm::FocusedDiayn);
    let ckpt = cmd_discover(&cfg).unwrap().checkpoint;
    cfg.task.mode = focused_skills::downstream::RewardMode::Proxy;
    let rows = read_rows(&cmd_downstream(&cfg, &ckpt).unwrap()).unwrap();
    assert!(rows.iter().any(|r| r.metric == "proxy_return"));
    assert!(rows.iter().all(|r| r.metric != "return"));
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = cmd_discover(&small(dir.path(), EnvKind::MudWorld, Algorithm::Vic)).unwrap().checkpoint;
    let other = small(dir.path(), EnvKind::ForageWorld, Algorithm::Vic);
    assert!(matches!(cmd_downstream(&other, &ckpt), Err(ExperimentError::EnvMismatch { .. })));
    assert!(matches!(cmd_coverage(&other, &ckpt), Err(ExperimentError::EnvMismatch { .. })));
}

#[test]
fn coverage_outputs_curve_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), EnvKind::FourRooms, Algorithm::FocusedVic);
    let ckpt = cmd_discover(&cfg).unwrap().checkpoint;
    let out = cmd_coverage(&cfg, &ckpt).unwrap();
    let rows = read_rows(&out.csv).unwrap();
    assert_eq!(rows.len(), 3 * 2);
    let summary: CoverageSummary = serde_json::from_str(&std::fs::read_to_string(&out.json).unwrap()).unwrap();
    assert_eq!(summary.aucs.len(), 3);
    assert_eq!(summary.lengths, vec![1, 2]);
    for r in rows.chunks(2) {
        assert!(r[0].value <= r[1].value);
    }
}

#[test]
fn ablate_writes_one_file_per_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), EnvKind::MudWorld, Algorithm::FocusedVic);
    let files = cmd_ablate(&cfg, &[0.0, 2.0, 10.0]).unwrap();
    assert_eq!(files.len(), 3);
    let labels: BTreeSet<String> = files.iter().flat_map(|f| read_rows(f).unwrap()).map(|r| r.algorithm).collect();
    assert_eq!(labels.len(), 3);
}

#[test]
fn report_matches_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), EnvKind::MudWorld, Algorithm::FocusedVic);
    let ckpt = cmd_discover(&cfg).unwrap().checkpoint;
    let csv = cmd_downstream(&cfg, &ckpt).unwrap();
    let report_dir = tempfile::tempdir().unwrap();
    std::fs::copy(&csv, report_dir.path().join("d.csv")).unwrap();
    let path = cmd_report(report_dir.path(), report_dir.path(), 10).unwrap();
    let report: Report = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();

    let rows = read_rows(&csv).unwrap();
    let group = report.groups.iter().find(|g| g.metric == "side_effects").unwrap();
    let per_run: Vec<f64> = (0..cfg.task.runs)
        .map(|run| {
            let mut v: Vec<&MetricRow> = rows.iter().filter(|r| r.metric == "side_effects" && r.run == run).collect();
            v.sort_by(|a, b| a.episode_or_x.total_cmp(&b.episode_or_x));
            v[v.len() - 10..].iter().map(|r| r.value).sum::<f64>() / 10.0
        })
        .collect();
    let mean = per_run.iter().sum::<f64>() / per_run.len() as f64;
    assert!((group.final_window.mean - mean).abs() < 1e-12);
    assert_eq!(group.final_window.p5, percentile(&per_run, 5.0));
    assert_eq!(group.final_window.p95, percentile(&per_run, 95.0));
}

#[test]
fn report_of_constant_returns() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<MetricRow> = (0..3)
        .flat_map(|run| {
            (0..20).map(move |e| MetricRow {
                metric: "return".into(),
                env: "forageworld".into(),
                algorithm: "focused-vic".into(),
                seed: 0,
                run,
                episode_or_x: e as f64,
                value: 1.0,
            })
        })
        .collect();
    write_rows(&dir.path().join("c.csv"), &rows).unwrap();
    let path = cmd_report(dir.path(), dir.path(), 5).unwrap();
    let report: Report = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let f = report.groups[0].final_window;
    assert_eq!((f.mean, f.p5, f.p95), (1.0, 1.0, 1.0));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let cfg = small(&blocker.join("sub"), EnvKind::MudWorld, Algorithm::Vic);
    assert!(matches!(cmd_discover(&cfg), Err(ExperimentError::Io { .. })));
}
