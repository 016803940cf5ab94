use qmeasure::observable::{materialize, HermitianParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn qmeasure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmeasure"))
        .args(args)
        .env_remove("QMEASURE_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn eigenvalues(out: &Output) -> Vec<f64> {
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    v["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn train_writes_one_csv_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = qmeasure(&["train", "--output-dir", out_dir.to_str().unwrap(), "--overrides", "epochs=1", "seeds=1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let csvs = names.iter().filter(|n| n.ends_with(".csv")).count();
    let jsons = names.iter().filter(|n| n.ends_with("_aggregate.json")).count();
    assert_eq!(csvs, 9);
    assert_eq!(jsons, 9);
    let csv = std::fs::read_to_string(out_dir.join("learnable_separate_0.1_0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().next(), Some("regime,noise,test_acc_mean,test_acc_std"));
    assert_eq!(stdout.lines().count(), 10);
}

#[test]
fn train_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmeasure(&["train", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = qmeasure(&["train", "--overrides", "no_such_key=3"]);
    assert_eq!(code(&out), 2);
    let out = qmeasure(&["train", "--overrides", "epochs"]);
    assert_eq!(code(&out), 2);
    let bad = write(dir.path(), "bad.json", "{\"epochs\": 0}");
    let out = qmeasure(&["train", "--config", &bad, "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let out = qmeasure(&["gradcheck"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("trials: 100"));
    let out = qmeasure(&["gradcheck", "--trials", "500"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("trials: 500"));
    let out = qmeasure(&["gradcheck", "--trials", "5", "--corrupt"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn spectrum_of_known_observables() {
    let dir = tempfile::tempdir().unwrap();
    let z = write(
        dir.path(),
        "z.json",
        r#"{"layout":{"type":"local_single_qubit","target":0},"dim":2,"d":[1.0,-1.0],"a":[0.0],"c":[0.0]}"#,
    );
    let out = qmeasure(&["spectrum", &z]);
    assert_eq!(code(&out), 0);
    assert_eq!(eigenvalues(&out), vec![-1.0, 1.0]);

    let id = write(
        dir.path(),
        "id.json",
        r#"{"layout":{"type":"local_single_qubit","target":1},"dim":2,"d":[1.0,1.0],"a":[0.0],"c":[0.0]}"#,
    );
    let out = qmeasure(&["spectrum", &id]);
    assert_eq!(code(&out), 0);
    assert_eq!(eigenvalues(&out), vec![1.0, 1.0]);
}

#[test]
fn spectrum_of_random_four_by_four() {
    // Σλ = tr A and Σλ² = tr A² pin down a 4×4 spectrum well enough to catch
    // any wrong eigenvalue.
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let flat: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = HermitianParams::from_flat(4, &flat).unwrap();
    let json = serde_json::json!({
        "layout": {"type": "full_hermitian", "n_qubits": 2},
        "dim": 4, "d": p.d(), "a": p.a(), "c": p.c(),
    });
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "r.json", &json.to_string());
    let out = qmeasure(&["spectrum", &path]);
    assert_eq!(code(&out), 0);
    let eig = eigenvalues(&out);
    assert_eq!(eig.len(), 4);
    let m = materialize(&p);
    let tr2: f64 = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| (m.get(i, j) * m.get(j, i)).re)
        .sum();
    assert!((eig.iter().sum::<f64>() - m.trace()).abs() < 1e-9);
    assert!((eig.iter().map(|l| l * l).sum::<f64>() - tr2).abs() < 1e-9);
    assert!(eig.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn spectrum_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"dim\": 2, \"d\": [1.0]");
    assert_eq!(code(&qmeasure(&["spectrum", &bad])), 2);
    let short = write(
        dir.path(),
        "short.json",
        r#"{"layout":{"type":"local_single_qubit","target":0},"dim":2,"d":[1.0],"a":[0.0],"c":[0.0]}"#,
    );
    assert_eq!(code(&qmeasure(&["spectrum", &short])), 2);
}

#[test]
fn gen_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = qmeasure(&["gen-data", "--n", "300", "--noise", "0.1", "--seed", "3", "--output", p.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert_eq!(text.lines().count(), 301);
    assert_eq!(text.lines().next(), Some("x1,x2,label"));
}

#[test]
fn gen_data_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    let out = qmeasure(&["gen-data", "--noise", "-1", "--output", p.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let unwritable = dir.path().join("missing").join("x.csv");
    let out = qmeasure(&["gen-data", "--output", unwritable.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn help_is_available_everywhere() {
    for sub in [&["--help"][..], &["train", "--help"], &["gradcheck", "--help"], &["spectrum", "--help"], &["gen-data", "--help"]] {
        let out = qmeasure(sub);
        assert_eq!(code(&out), 0, "{sub:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
    assert_eq!(code(&qmeasure(&["bogus"])), 2);
}
