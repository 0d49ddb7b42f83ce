use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use downwash_cli::config::RunConfig;
use downwash_cli::pipeline;
use downwash_core::dataset::Dataset;
use downwash_core::models::{saved_from_trainable, ModelKind};
use walkdir::WalkDir;

const SMALL: &str = r#"
seed = 5

[sweep]
legs = 4
samples_per_leg = 20
altitudes = [0.3, 0.8]

[[datasets]]
formation = "side_by_side"
k = 1
oracle = "merging"

[[datasets]]
formation = "leader_follower"
k = 3
oracle = "merging"

[naive]
e_cells = 11

[train]
epochs = 2
batch_size = 32

[train.architecture]
psi = [6, 8, 6]
phi = [6, 8, 8]
big_phi = [8, 8, 6]

[eval]
altitudes = [0.8]
resolution = 16
slice_resolution = 21
cases = [{ formation = "leader_follower", k = 3 }]
"#;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p
}

fn downwash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_downwash"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = downwash(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn full_run(config: &Path, out: &Path) {
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    for stage in ["gen", "train", "eval", "report"] {
        run_ok(&[stage, "--config", c, "--out", o]);
    }
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_path_buf();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn shipped_default_config_equals_builtin_defaults() {
    let path = workspace_root().join("configs/default.toml");
    let cfg = RunConfig::load(Some(&path), &[]).unwrap();
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn shipped_configs_validate() {
    for name in ["default.toml", "additive.toml"] {
        RunConfig::load(Some(&workspace_root().join("configs").join(name)), &[]).unwrap();
    }
}

#[test]
fn pipeline_writes_every_artefact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    full_run(&small_config(dir.path()), &out);

    for f in [
        "run_config.toml",
        "datasets/side_by_side_k1_merging.csv",
        "datasets/side_by_side_k1_merging.json",
        "datasets/leader_follower_k3_merging.csv",
        "datasets/leader_follower_k3_merging.json",
        "models/naive.json",
        "models/linear.json",
        "models/linear_loss.csv",
        "models/deepset.json",
        "models/deepset_loss.csv",
        "reports/benchmark.csv",
        "reports/benchmark.json",
        "reports/summary.json",
        "reports/slice_leader_follower_k3_0p8.csv",
        "reports/contour_leader_follower_k3_0p8_deepset.csv",
        "reports/contour_leader_follower_k3_0p8_ground_truth.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    let csv = fs::read_to_string(out.join("reports/benchmark.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "formation,k,oracle,altitude,model,N,E,D,Pitch,Roll,Yaw,wins"
    );
    assert_eq!(lines.count(), 3);

    let loss = fs::read_to_string(out.join("models/linear_loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 3);

    let data = Dataset::read(&out.join("datasets/leader_follower_k3_merging.csv")).unwrap();
    assert_eq!(data.records.len(), 2 * 4 * 20);
    assert_eq!(data.k(), 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    full_run(&cfg, &a);
    full_run(&cfg, &b);
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), tb.len());
    for ((pa, ca), (pb, cb)) in ta.iter().zip(&tb) {
        assert_eq!(pa, pb);
        if pa.as_path() == Path::new("run_config.toml") {
            continue; // records the output root
        }
        assert!(ca == cb, "{} differs", pa.display());
    }
}

#[test]
fn seed_flag_changes_the_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (c, a, b) = (cfg.to_str().unwrap(), dir.path().join("a"), dir.path().join("b"));
    run_ok(&["gen", "--config", c, "--out", a.to_str().unwrap()]);
    run_ok(&["gen", "--config", c, "--out", b.to_str().unwrap(), "--seed", "6"]);
    let f = "datasets/side_by_side_k1_merging.csv";
    assert_ne!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (c, o) = (cfg.to_str().unwrap(), dir.path().join("out"));
    let o = o.to_str().unwrap();

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[sweep]\nlegz = 1\n").unwrap();
    let out = downwash(&["gen", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert_eq!(
        downwash(&["gen", "--config", c, "--set", "sweep.legs=0"]).status.code(),
        Some(2)
    );
    assert_eq!(downwash(&["eval", "--config", c, "--out", o]).status.code(), Some(3));
    assert_eq!(downwash(&["train", "--config", c, "--out", o]).status.code(), Some(3));

    let junk = dir.path().join("junk.csv");
    fs::write(&junk, "not,a,dataset\n").unwrap();
    let code = downwash(&["train", "--config", c, "--out", o, junk.to_str().unwrap()])
        .status
        .code();
    assert_eq!(code, Some(3));

    let junk_model = dir.path().join("junk.json");
    fs::write(&junk_model, "{}").unwrap();
    let code = downwash(&["eval", "--config", c, "--out", o, junk_model.to_str().unwrap()])
        .status
        .code();
    assert_eq!(code, Some(3));
}

#[test]
fn explicit_dataset_arguments_replace_the_mix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (c, out) = (cfg.to_str().unwrap(), dir.path().join("out"));
    let o = out.to_str().unwrap();
    run_ok(&["gen", "--config", c, "--out", o]);
    let single = out.join("datasets/side_by_side_k1_merging.csv");
    run_ok(&[
        "train",
        "--config",
        c,
        "--out",
        o,
        "--set",
        "train.models=[]",
        single.to_str().unwrap(),
    ]);
    assert!(out.join("models/naive.json").is_file());
    assert!(!out.join("models/linear.json").exists());
}

#[test]
fn oracle_scored_against_itself_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    run_ok(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "oracle:merging",
        "oracle:additive",
    ]);
    let csv = fs::read_to_string(out.join("reports/benchmark.csv")).unwrap();
    let row = csv.lines().find(|l| l.contains(",merging,")).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[4], "merging");
    for c in &cells[5..11] {
        assert!(*c == "0" || *c == "n/a", "{row}");
    }
}

#[test]
fn zero_learning_rate_returns_the_initial_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::from_toml(SMALL, "small").unwrap();
    cfg.out = dir.path().to_path_buf();
    cfg.train.learning_rate = 0.0;
    pipeline::cmd_gen(&cfg).unwrap();
    let data: Vec<_> = cfg
        .datasets
        .iter()
        .map(|d| {
            let stem = d.stem();
            let path = dir.path().join(format!("datasets/{stem}.csv"));
            (stem, Dataset::read(&path).unwrap())
        })
        .collect();
    for kind in [ModelKind::Linear, ModelKind::DeepSet] {
        let (saved, _) = pipeline::train_one(&cfg, kind, &data).unwrap();
        let init = kind
            .init_trainable(&cfg.train.architecture, cfg.init_seed(kind.as_str()))
            .unwrap();
        let mut init = saved_from_trainable(kind, &cfg.train.architecture, init.as_ref()).unwrap();
        // Training standardises outputs even when the weights stay put.
        copy_scale(&saved, &mut init);
        assert_eq!(
            serde_json::to_string(&saved).unwrap(),
            serde_json::to_string(&init).unwrap()
        );
    }
}

fn copy_scale(from: &downwash_core::models::SavedModel, to: &mut downwash_core::models::SavedModel) {
    use downwash_core::models::SavedModel as S;
    match (from, to) {
        (S::Linear { output_scale: a, .. }, S::Linear { output_scale: b, .. })
        | (S::DeepSet { output_scale: a, .. }, S::DeepSet { output_scale: b, .. }) => *b = *a,
        _ => panic!("model kinds differ"),
    }
}
