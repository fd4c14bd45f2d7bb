use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dflsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dflsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const DIFFUSION: &str = r#"
name = "ring"
kind = "diffusion_trace"
seeds = [3, 4]
params = 64
rounds = 12
sigma_noise = 0.05
graph = { family = "cycle", n = 9 }
"#;

#[test]
fn run_is_reproducible_without_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ring.toml", DIFFUSION);
    let read_all = |out: &str| {
        let mut names: Vec<_> = fs::read_dir(dir.path().join(out))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        names.sort();
        names.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>()
    };
    for out in ["a", "b"] {
        let o = dflsim(
            &["run", "--config", &cfg, "--out", out, "--quiet", "--no-timestamp"],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = read_all("a");
    assert_eq!(a.len(), 3);
    assert_eq!(a, read_all("b"));

    let o = dflsim(&["run", "--config", &cfg, "--out", "c", "--quiet"], dir.path());
    assert!(o.status.success());
    let seed3 = fs::read_to_string(dir.path().join("c/ring_seed3.csv")).unwrap();
    assert!(seed3.starts_with("# generated_at_unix="));
    let body: Vec<&str> = seed3.lines().skip(1).collect();
    let plain = String::from_utf8(a[0].clone()).unwrap();
    assert_eq!(body, plain.lines().collect::<Vec<_>>());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ring.toml", DIFFUSION);
    let o = dflsim(
        &[
            "run",
            "--config",
            &cfg,
            "--seed",
            "9",
            "--seed",
            "10",
            "--out",
            "o",
            "--quiet",
            "--no-timestamp",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(dir.path().join("o/ring_seed9.csv").is_file());
    assert!(dir.path().join("o/ring_seed10.csv").is_file());
    assert!(!dir.path().join("o/ring_seed3.csv").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.toml",
        r#"
        name = "bad"
        seeds = [1]
        kind = "fl_run"
        graph = { family = "k_regular", k = 3, n = 7 }
        [fl]
        rounds = 5
        dataset_dir = "missing"
        partition = { scheme = "zipf", alpha = -0.5 }
        "#,
    );
    let o = dflsim(&["validate", "--config", &bad], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("graph:"), "{text}");
    assert!(text.contains("fl.dataset_dir"), "{text}");
    assert!(text.contains("fl.partition.alpha"), "{text}");

    let o = dflsim(&["run", "--config", &bad, "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());

    let garbage = write(dir.path(), "garbage.toml", "kind = 5");
    assert_eq!(
        dflsim(&["run", "--config", &garbage], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        dflsim(&["run", "--preset", "nonexistent"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn runtime_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    // the output path is an existing file, so the directory cannot be created
    fs::write(dir.path().join("taken"), "").unwrap();
    let cfg = write(dir.path(), "ring.toml", DIFFUSION);
    let o = dflsim(&["run", "--config", &cfg, "--out", "taken", "--quiet"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn presets_are_listed_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let o = dflsim(&["presets"], dir.path());
    let names = String::from_utf8(o.stdout).unwrap();
    assert!(names.lines().any(|l| l == "vsteady_scaling"));
    for name in names.lines() {
        let o = dflsim(&["validate", "--preset", name], dir.path());
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stdout));
    }
    let o = dflsim(&["presets", "plateau"], dir.path());
    assert!(String::from_utf8(o.stdout).unwrap().contains("kind = \"fl_sweep\""));
}

#[test]
fn federated_run_writes_metrics_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fl.toml",
        r#"
        name = "tiny_fl"
        kind = "fl_sweep"
        seeds = [0]
        thresholds = [2.2]
        graphs = [{ family = "complete", n = 4 }]
        gains = [{ mode = "none" }, { mode = "exact" }]

        [fl]
        layers = [784, 16, 10]
        items_per_node = 32
        rounds = 3
        test_items = 100

        [fl.training]
        local_batches = 2
        "#,
    );
    let o = dflsim(
        &["run", "--config", &cfg, "--out", "o", "--quiet", "--no-timestamp"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("o/tiny_fl_seed0.csv")).unwrap();
    // comment, header, then rounds 0..=3 for each of the two gain modes
    assert_eq!(csv.lines().count(), 2 + 2 * 4);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("label,graph_family,n,gain,dropout,round,mean_test_loss"));
    let summary = fs::read_to_string(dir.path().join("o/tiny_fl_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2 + 2);
}
