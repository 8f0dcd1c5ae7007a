use std::path::Path;

use stnn::cli::{run, EXIT_DIVERGENCE, EXIT_IO, EXIT_OK, EXIT_SHAPE, EXIT_USAGE, EXIT_VERIFY};
use stnn::complexity::ComplexityReport;
use stnn::data::{make_dataset, save_dataset, ArrayGeometry, DataFormat};
use stnn::net::{build_network, init_from_dvm, Network, NetworkConfig};
use stnn::train::TrainReport;

fn stnn(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("stnn").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, n: usize, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let n = n.to_string();
    let mut args = vec!["gen-data", "--n", &n, "--out", p(&out)];
    args.extend_from_slice(extra);
    let (code, stdout, stderr) = stnn(&args);
    assert_eq!(code, EXIT_OK, "{stdout}{stderr}");
    out
}

#[test]
fn gen_data_defaults_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.bin");
    let (code, out, _) = stnn(&["gen-data", "--n", "16", "--freq-ghz", "24", "--out", p(&a)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("samples: 3000"), "{out}");
    assert!(out.contains("target consistency: PASS"), "{out}");
    assert!(out.starts_with(stnn::VERSION));

    let b = dir.path().join("b.bin");
    let (code, _, _) = stnn(&["gen-data", "--n", "16", "--freq-ghz", "24", "--out", p(&b)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn gen_data_rejects_zero_samples_and_reports_io_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.bin");
    let (code, _, err) = stnn(&["gen-data", "--samples-per-angle", "0", "--out", p(&out)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("samples-per-angle"), "{err}");
    let missing = dir.path().join("no/such/dir/x.bin");
    let (code, _, _) = stnn(&["gen-data", "--n", "4", "--samples-per-angle", "2", "--out", p(&missing)]);
    assert_eq!(code, EXIT_IO);
    let (code, _, _) = stnn(&["gen-data", "--n", "6", "--out", p(&out)]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn csv_datasets_train_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(
        dir.path(),
        "n4.csv",
        4,
        &["--samples-per-angle", "10", "--format", "csv"],
    );
    let model = dir.path().join("m.model");
    let (code, out, err) = stnn(&["train", "--data", p(&data), "--epochs", "2", "--out-model", p(&model)]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    let (code, out, _) = stnn(&["eval", "--model", p(&model), "--data", p(&data)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("samples: 30"));
}

#[test]
fn train_reports_table_parameter_counts() {
    let dir = tempfile::tempdir().unwrap();
    let n8 = gen(dir.path(), "n8.bin", 8, &["--samples-per-angle", "10"]);
    let report = dir.path().join("ffnn.json");
    let (code, out, _) = stnn(&[
        "train",
        "--model",
        "ffnn",
        "--data",
        p(&n8),
        "--epochs",
        "1",
        "--out-report",
        p(&report),
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    let r: TrainReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.param_count, 1104);
    assert_eq!(r.version, stnn::VERSION);
    assert_eq!(r.config.data.as_ref().unwrap().n, 8);

    let n16 = gen(dir.path(), "n16.bin", 16, &["--samples-per-angle", "10"]);
    let report = dir.path().join("stnn.json");
    let (code, _, _) = stnn(&[
        "train",
        "--model",
        "stnn",
        "--p",
        "1",
        "--lambda",
        "5",
        "--data",
        p(&n16),
        "--epochs",
        "1",
        "--out-report",
        p(&report),
    ]);
    assert_eq!(code, EXIT_OK);
    let r: TrainReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let rel = (r.param_count as f64 - 428.0).abs() / 428.0;
    assert!(rel <= 0.15, "{} params", r.param_count);
    assert_eq!(r.config.network.lambda, 5);
}

#[test]
fn zero_epochs_gives_untrained_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.bin", 4, &["--samples-per-angle", "10"]);
    let report = dir.path().join("r.json");
    let (code, out, _) = stnn(&["train", "--data", p(&data), "--epochs", "0", "--out-report", p(&report)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("epochs: 0"));
    let r: TrainReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.train_mse.len(), 1);
    assert_eq!(r.val_mse.len(), 1);
}

#[test]
fn divergence_and_shape_errors_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.bin", 4, &["--samples-per-angle", "10"]);
    let (code, _, err) = stnn(&[
        "train",
        "--data",
        p(&data),
        "--optimizer",
        "sgd",
        "--lr",
        "1e6",
        "--epochs",
        "50",
    ]);
    assert_eq!(code, EXIT_DIVERGENCE, "{err}");

    let model = dir.path().join("n8.model");
    build_network(NetworkConfig::structured(8, 1, 4))
        .unwrap()
        .save(&model)
        .unwrap();
    let (code, _, _) = stnn(&["train", "--data", p(&data), "--init-model", p(&model), "--epochs", "1"]);
    assert_eq!(code, EXIT_SHAPE);
    let (code, _, _) = stnn(&["eval", "--model", p(&model), "--data", p(&data)]);
    assert_eq!(code, EXIT_SHAPE);
}

#[test]
fn lm_refuses_oversized_models() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "n32.bin", 32, &["--samples-per-angle", "2"]);
    let (code, _, err) = stnn(&[
        "train",
        "--model",
        "ffnn",
        "--optimizer",
        "lm",
        "--data",
        p(&data),
        "--epochs",
        "1",
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("adam"), "{err}");
}

#[test]
fn verify_passes_and_catches_a_corrupted_twiddle() {
    let (code, out, _) = stnn(&["verify"]);
    assert_eq!(code, EXIT_OK, "{out}");
    for name in ["factorization", "recursive-dft", "exact-init", "gradients"] {
        assert!(
            out.lines().any(|l| l.starts_with(name) && l.contains("PASS")),
            "{name}\n{out}"
        );
    }
    let (code, out, _) = stnn(&["verify", "--n-max", "16", "--trials", "2", "--corrupt-twiddle"]);
    assert_eq!(code, EXIT_VERIFY);
    assert!(out.contains("FAILED: recursive-dft"), "{out}");
    let (code, _, _) = stnn(&["verify", "--trials", "0"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn bench_writes_a_round_trippable_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let (code, out, _) = stnn(&["bench", "--out", p(&out_dir)]);
    assert_eq!(code, EXIT_OK, "{out}");
    let csv = std::fs::read_to_string(out_dir.join("complexity.csv")).unwrap();
    let report = ComplexityReport::from_csv(&csv).unwrap();
    for (n, want) in [(8, 1104), (16, 4256), (32, 16704)] {
        assert_eq!(report.row(n, "ffnn").unwrap().params, want);
    }
    let pr = report.row(32, "stnn").unwrap().pr_flops_pct;
    assert!((pr - 85.0).abs() <= 5.0, "{pr}");
    let json: ComplexityReport =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("complexity.json")).unwrap()).unwrap();
    assert_eq!(json.rows, report.rows);
    assert_eq!(json.version, stnn::VERSION);
    assert_eq!(json.configs.len(), 3);
}

#[test]
fn eval_of_exact_linear_network_is_exact_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let g = ArrayGeometry::new(8, 32e9).unwrap();
    let ds = make_dataset(&g, 27e9, &[30.0, 40.0, 50.0], 20, 0.0, 3).unwrap();
    let data = dir.path().join("clean.bin");
    save_dataset(&ds, &data, DataFormat::Binary).unwrap();
    let cfg = NetworkConfig::structured(8, 1, 4).with_slope(1.0);
    let net = init_from_dvm(&build_network(cfg).unwrap().with_zero_delay(), &ds.dvm().unwrap()).unwrap();
    let model = dir.path().join("exact.model");
    net.save(&model).unwrap();
    assert_eq!(Network::load(&model).unwrap(), net);

    let (code, first, _) = stnn(&["eval", "--model", p(&model), "--data", p(&data)]);
    assert_eq!(code, EXIT_OK);
    let mse: f64 = first
        .lines()
        .find_map(|l| l.strip_prefix("mse: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(mse <= 1e-18, "{mse}");
    assert_eq!(first.lines().filter(|l| l.starts_with("angle")).count(), 3);
    let (_, second, _) = stnn(&["eval", "--model", p(&model), "--data", p(&data)]);
    assert_eq!(first, second);
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let nothing = dir.path().join("nothing.bin");
    let (code, _, _) = stnn(&["eval", "--model", p(&nothing), "--data", p(&nothing)]);
    assert_eq!(code, EXIT_IO);
    let (code, _, _) = stnn(&["train", "--data", p(&nothing)]);
    assert_eq!(code, EXIT_IO);
}

#[test]
fn restarts_list_every_attempt() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.bin", 4, &["--samples-per-angle", "10"]);
    let report = dir.path().join("r.json");
    let (code, out, _) = stnn(&[
        "train",
        "--data",
        p(&data),
        "--epochs",
        "2",
        "--restarts",
        "3",
        "--target-mse",
        "1e-30",
        "--out-report",
        p(&report),
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    for i in 0..3 {
        assert!(out.contains(&format!("attempt {i} (seed {i})")), "{out}");
    }
    let r: TrainReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r.seed < 3);

    let model = dir.path().join("m.model");
    build_network(NetworkConfig::structured(4, 1, 2))
        .unwrap()
        .save(&model)
        .unwrap();
    let (code, _, err) = stnn(&[
        "train",
        "--data",
        p(&data),
        "--init-model",
        p(&model),
        "--restarts",
        "2",
    ]);
    assert_eq!(code, EXIT_USAGE, "{err}");
}
