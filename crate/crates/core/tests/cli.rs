use std::path::Path;
use std::process::{Command, Output};

use ndarray::Array2;

use doa_refine::audio::write_wav;
use doa_refine::pipeline::LocateReport;
use doa_refine::sim::{CellSummary, GroundTruth};
use doa_refine::prelude::*;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doa-refine")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn simulate_then_locate_within_one_degree() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&run(&["simulate", "--seed", "11", "--snr", "20", "--output", "scene.wav"], dir.path()));
    let truth: GroundTruth = serde_json::from_str(&std::fs::read_to_string(dir.path().join("scene.truth.json")).unwrap()).unwrap();
    assert_eq!(truth.seed, 11);
    assert_eq!(truth.snr_db, 20.0);

    let args = ["locate", "--input", "scene.wav", "--geometry", "scene.geometry.json", "--grid", "100", "--variant", "quadratic", "--iters", "30"];
    let report: LocateReport = serde_json::from_str(&stdout(&run(&args, dir.path()))).unwrap();
    assert_eq!(report.sources.len(), 1);
    let src = &report.sources[0];
    let found = DoaVector::from_xyz(src.doa[0], src.doa[1], src.doa[2]).unwrap();
    let err = great_circle_distance(&found, &truth.sources[0].doa).to_degrees();
    assert!(err < 1.0, "error {err} deg");
    assert!(src.trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    assert_eq!(*src.trace.last().unwrap(), src.objective);
    let (colat, az) = found.angles();
    assert!((colat.to_degrees() - src.colatitude_deg).abs() < 1e-9);
    assert!((az.to_degrees() - src.azimuth_deg).abs() < 1e-9);
}

#[test]
fn variant_none_reports_the_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&run(&["simulate", "--seed", "4", "--snr", "15", "--output", "s.wav"], dir.path()));
    let base = ["locate", "--input", "s.wav", "--geometry", "s.geometry.json", "--grid", "200"];
    let none: LocateReport =
        serde_json::from_str(&stdout(&run(&[&base[..], &["--variant", "none"]].concat(), dir.path()))).unwrap();
    let refined: LocateReport =
        serde_json::from_str(&stdout(&run(&[&base[..], &["--variant", "linear"]].concat(), dir.path()))).unwrap();
    assert_eq!(none.sources[0].trace.len(), 1);
    // refinement starts from the same grid point
    assert_eq!(refined.sources[0].trace[0], none.sources[0].objective);

    let grid = fibonacci_grid(200).unwrap();
    let q = none.sources[0].doa;
    assert!(grid.points().iter().any(|p| p.to_array() == q));
}

#[test]
fn mono_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write_wav(dir.path().join("mono.wav"), Array2::<f64>::zeros((4096, 1)).view(), 16_000).unwrap();
    let out = run(&["locate", "--input", "mono.wav"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channels"));

    let out = run(&["locate", "--input", "missing.wav"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["locate", "--input", "mono.wav", "--estimator", "beamformer"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn singular_mvdr_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"estimator": "mvdr", "mvdr_loading": 0.0, "snr_db": 20}"#).unwrap();
    // a constant signal has rank-one covariances
    write_wav(dir.path().join("flat.wav"), Array2::<f64>::from_elem((4096, 12), 0.5).view(), 16_000).unwrap();
    let out = run(&["locate", "--config", "cfg.json", "--input", "flat.wav"], dir.path());
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn grid_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&run(&["grid", "--grid", "4"], dir.path()));
    assert_eq!(text.lines().count(), 5);
    let text = stdout(&run(&["grid", "--grid", "100"], dir.path()));
    let back = SphericalGrid::from_csv(&text, 8).unwrap();
    let grid = fibonacci_grid(100).unwrap();
    assert_eq!(back.points(), grid.points());
    assert!(back.points().iter().all(|q| (q.as_vector().norm() - 1.0).abs() < 1e-15));
    assert_eq!(run(&["grid", "--grid", "3"], dir.path()).status.code(), Some(2));
}

#[test]
fn bench_writes_four_timed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = r#"{"grid_sizes": [100, 2000], "iters": [0, 30], "trials": 3, "duration": 0.3, "seed": 5}"#;
    std::fs::write(dir.path().join("sweep.json"), sweep).unwrap();
    stdout(&run(&["bench", "--config", "sweep.json", "--output", "out.csv"], dir.path()));
    stdout(&run(&["bench", "--config", "sweep.json", "--output", "again.csv"], dir.path()));

    let errors = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(errors.lines().next().unwrap(), "estimator,s,grid_size,variant,iters,snr_db,trial,src_index,error_deg");
    assert_eq!(errors, std::fs::read_to_string(dir.path().join("again.csv")).unwrap());

    let summary: Vec<CellSummary> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.summary.json")).unwrap()).unwrap();
    assert_eq!(summary.len(), 4);
    assert!(summary.iter().all(|c| c.median_runtime_s > 0.0 && c.median_error_deg.is_finite()));
    let timings = std::fs::read_to_string(dir.path().join("out.timings.csv")).unwrap();
    assert_eq!(timings.lines().count(), 1 + 4 * 3);

    std::fs::write(dir.path().join("bad.json"), r#"{"grid_sizes": "many"}"#).unwrap();
    assert_eq!(run(&["bench", "--config", "bad.json"], dir.path()).status.code(), Some(2));
}
