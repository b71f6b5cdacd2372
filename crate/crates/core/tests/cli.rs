use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tcd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("TCD_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

const QUICK: &[&str] = &["--max-epochs", "5", "--orderings", "3", "--seed", "9"];

#[test]
fn simulate_writes_series_truth_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&tcd(
        &[
            "simulate", "--out", "s", "--t", "120", "--d", "3", "--tau", "2", "--seed", "4",
        ],
        tmp.path(),
    ));
    assert_eq!(
        files(&tmp.path().join("s")),
        ["manifest.json", "series.csv", "truth.edges"]
    );
    let series = fs::read_to_string(tmp.path().join("s/series.csv")).unwrap();
    assert_eq!(series.lines().count(), 121);
    assert!(fs::read_to_string(tmp.path().join("s/truth.edges"))
        .unwrap()
        .starts_with("# d=3 tau_max=2\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("s/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["command"], "simulate");
}

#[test]
fn grid_has_one_directory_per_cell_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&tcd(&["simulate", "--grid", "--out", "g"], tmp.path()));
    let dirs: Vec<String> = files(&tmp.path().join("g"))
        .into_iter()
        .filter(|n| n.starts_with('T'))
        .collect();
    assert_eq!(dirs.len(), 4 * 4 * 3 * 10);
    assert!(dirs.contains(&"T5000_d6_tau3_seed9".to_string()));
    assert_eq!(files(&tmp.path().join("g/T200_d3_tau1_seed0")).len(), 3);
}

#[test]
fn discover_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&tcd(
        &[
            "simulate", "--out", "s", "--t", "200", "--d", "2", "--seed", "1",
        ],
        tmp.path(),
    ));
    for out in ["a", "b"] {
        let mut args = vec!["discover", "--input", "s/series.csv", "--out", out];
        args.extend_from_slice(QUICK);
        ok(&tcd(&args, tmp.path()));
    }
    for f in [
        "window.edges",
        "window_adjacency.csv",
        "summary.csv",
        "orderings.json",
    ] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn seed_falls_back_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tcd"))
        .args(["simulate", "--out", "s", "--t", "50", "--d", "2"])
        .current_dir(tmp.path())
        .env("TCD_SEED", "17")
        .output()
        .unwrap();
    ok(&out);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("s/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 17);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "seed = 5\n[simulate]\nt = 80\nd = 4\n",
    )
    .unwrap();
    ok(&tcd(
        &["simulate", "--config", "run.toml", "--out", "s", "--d", "2"],
        tmp.path(),
    ));
    let series = fs::read_to_string(tmp.path().join("s/series.csv")).unwrap();
    assert_eq!(series.lines().count(), 81);
    assert_eq!(series.lines().next().unwrap(), "x0,x1");
}

#[test]
fn missing_input_exits_with_io_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tcd(
        &["discover", "--input", "absent.csv", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn occupied_output_directory_is_refused_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&tcd(
        &["simulate", "--out", "s", "--t", "50", "--d", "2"],
        tmp.path(),
    ));
    let again = tcd(
        &["simulate", "--out", "s", "--t", "50", "--d", "2"],
        tmp.path(),
    );
    assert_eq!(again.status.code(), Some(2));
    ok(&tcd(
        &["simulate", "--out", "s", "--t", "50", "--d", "2", "--force"],
        tmp.path(),
    ));
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&tcd(
        &["simulate", "--out", "s", "--t", "50", "--d", "2"],
        tmp.path(),
    ));
    let out = tcd(
        &[
            "discover",
            "--input",
            "s/series.csv",
            "--out",
            "o",
            "--theta",
            "1.5",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn evaluate_scores_a_graph_against_itself() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&tcd(
        &[
            "simulate", "--out", "s", "--t", "50", "--d", "3", "--seed", "2",
        ],
        tmp.path(),
    ));
    ok(&tcd(
        &[
            "evaluate",
            "--pred",
            "s/truth.edges",
            "--truth",
            "s/truth.edges",
            "--out",
            "e.json",
            "--csv",
            "e.csv",
        ],
        tmp.path(),
    ));
    let scores: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("e.json")).unwrap()).unwrap();
    assert_eq!(scores["window"]["f1"], 1.0);
    let csv = fs::read_to_string(tmp.path().join("e.csv")).unwrap();
    assert!(csv.contains("window,f1,1\n"));
}

#[test]
fn study_writes_records_and_curves() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&tcd(
        &[
            "study",
            "--out",
            "st",
            "--repetitions",
            "4",
            "--fractions",
            "50,100",
            "--d",
            "2",
            "--tau-max",
            "1",
        ],
        tmp.path(),
    ));
    assert_eq!(
        files(&tmp.path().join("st")),
        ["manifest.json", "study.csv", "summary.json"]
    );
    let csv = fs::read_to_string(tmp.path().join("st/study.csv")).unwrap();
    // 4 repetitions x 2 fractions x 2 variants x 2 metrics
    assert_eq!(csv.lines().count(), 1 + 32);
}

#[test]
fn ablate_writes_one_row_per_dataset_value_and_metric() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&tcd(
        &[
            "simulate", "--out", "s1", "--t", "150", "--d", "2", "--seed", "1",
        ],
        tmp.path(),
    ));
    ok(&tcd(
        &[
            "simulate", "--out", "s2", "--t", "150", "--d", "2", "--seed", "2",
        ],
        tmp.path(),
    ));
    let mut args = vec![
        "ablate", "--data", "s1", "s2", "--param", "theta", "--values", "0,1", "--out", "ab",
    ];
    args.extend_from_slice(QUICK);
    ok(&tcd(&args, tmp.path()));
    let csv = fs::read_to_string(tmp.path().join("ab/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2 * 3);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("ab/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
}
