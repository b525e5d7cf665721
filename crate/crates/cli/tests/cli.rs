use std::path::Path;
use std::process::{Command, Output};

use polyagg::nn::{load_checkpoint, ModelConfig};
use polyagg::train::initial_params;

fn polyagg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyagg")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, kind: &str, count: usize) {
    let out = polyagg(&["generate", "--kind", kind, "--cells", "3", "--count", &count.to_string(), "--seed", "5", "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = polyagg(&["train", "--bogus"]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn seed_is_required() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polyagg(&["generate", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn auto_seed_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polyagg(&["generate", "--cells", "2", "--seed", "auto", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 0);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed_was_drawn"], true);
    assert!(m["seed"].is_u64());
}

#[test]
fn epochs_zero_checkpoint_equals_init() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    generate(&data, "cube", 2);
    let out = polyagg(&["train", "--model", "base", "--data", s(&data), "--epochs", "0", "--seed", "11", "--out", s(&run)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let params = load_checkpoint(run.join("checkpoint.json")).unwrap();
    assert_eq!(params, initial_params(ModelConfig::Base, 11));
    assert!(run.join("history.csv").exists());
    assert!(run.join("manifest.json").exists());
}

#[test]
fn hetero_without_sidecar_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "cube", 1);
    let out = polyagg(&["train", "--model", "hetero", "--data", s(&data), "--epochs", "1", "--seed", "1", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 3);
    let m = std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap();
    assert!(m.contains("\"status\": \"error\""));
}

#[test]
fn empty_data_dir_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polyagg(&["train", "--model", "base", "--data", s(tmp.path()), "--seed", "1", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn target_frac_out_of_range_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "cube", 1);
    let mesh = tmp.path().join("mesh000.msh");
    for f in ["1.5", "0", "-0.1"] {
        let out = polyagg(&["agglomerate", s(&mesh), "--model", "kmeans", &format!("--target-frac={f}"), "--seed", "1", "--out", s(tmp.path())]);
        assert_eq!(code(&out), 2, "f = {f}");
    }
    let both = polyagg(&["agglomerate", s(&mesh), "--model", "kmeans", "--target-frac", "0.5", "--target-abs", "0.3", "--seed", "1"]);
    assert_eq!(code(&both), 2);
}

#[test]
fn bad_checkpoint_is_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "cube", 1);
    let ckpt = tmp.path().join("bad.json");
    std::fs::write(&ckpt, "{\"nope\": 1}").unwrap();
    let out = polyagg(&[
        "agglomerate",
        s(&tmp.path().join("mesh000.msh")),
        "--model",
        &format!("gnn:{}", s(&ckpt)),
        "--target-frac",
        "0.5",
        "--seed",
        "1",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn empty_mesh_glob_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let pattern = format!("{}/*.msh", s(tmp.path()));
    let out = polyagg(&["bench", "--models", "kmeans", "--meshes", &pattern, "--seed", "1", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bench_writes_one_row_per_model_and_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "cube", 2);
    let pattern = format!("{}/*.msh", s(tmp.path()));
    let out = polyagg(&["bench", "--models", "kmeans,multilevel", "--meshes", &pattern, "--reps", "1", "--seed", "1", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn agglomerate_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "two-region", 2);
    let run = tmp.path().join("run");
    let out = polyagg(&["train", "--model", "hetero", "--data", s(&data), "--epochs", "2", "--seed", "4", "--out", s(&run)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = format!("gnn:{}", s(&run.join("checkpoint.json")));
    let mesh = data.join("mesh000.msh");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let dir = tmp.path().join(format!("agg{i}"));
        let out = polyagg(&[
            "--threads",
            threads,
            "agglomerate",
            s(&mesh),
            "--model",
            &model,
            "--target-frac",
            "0.25",
            "--seed",
            "9",
            "--out",
            s(&dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        for f in ["report.csv", "summary.json", "manifest.json", "mesh000.vtk"] {
            assert!(dir.join(f).exists(), "{f}");
        }
        outputs.push(std::fs::read(dir.join("mesh000.agg.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
