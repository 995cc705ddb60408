use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const THREE_STATE: &str = r#"
seed = 7
[model]
rates = [5.0, 100.0, 6000.0]
transition = [[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]]
[strategy]
eta = 0.1
[trace]
cycles = 1000
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oppaccess"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a `#`-commented CSV report, header included.
fn rows(report: &str) -> Vec<Vec<String>> {
    report
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(table: &[Vec<String>], name: &str) -> usize {
    table[0].iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn generate_is_deterministic_and_well_formed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", THREE_STATE);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["generate", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["generate", "--config", s(&cfg), "--out", s(&b)]);
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(text.starts_with("# oppaccess-trace v1\n"));
    assert!(text.contains("# > transition = [[0.9, 0.05, 0.05]"));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 1000);
    for line in data {
        let (d, state) = line.split_once(',').unwrap();
        assert!(d.parse::<f64>().unwrap() > 0.0);
        assert!(state.parse::<usize>().unwrap() < 3);
    }
    let other = ok(&["generate", "--config", s(&cfg), "--seed", "8"]);
    assert_ne!(other, fs::read_to_string(&a).unwrap());
}

#[test]
fn generate_marks_segment_switch() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        r#"
        [model]
        rates = [100.0, 6000.0]
        weights = [0.5, 0.5]
        [[traffic.segments]]
        cycles = 30
        rates = [100.0, 6000.0]
        weights = [0.5, 0.5]
        [[traffic.segments]]
        cycles = 20
        rates = [100.0, 6000.0]
        weights = [0.9, 0.1]
        "#,
    );
    let text = ok(&["generate", "--config", s(&cfg)]);
    let lines: Vec<&str> = text.lines().collect();
    let mark = lines.iter().position(|l| *l == "# segment 1").expect("segment marker");
    assert_eq!(lines[..mark].iter().filter(|l| !l.starts_with('#')).count(), 30);
    assert_eq!(lines[mark..].iter().filter(|l| !l.starts_with('#')).count(), 20);
}

#[test]
fn fit_single_component_is_inverse_mean() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "[model]\nrates = [100.0]\nweights = [1.0]\n[trace]\ncycles = 5000\n");
    let trace = dir.path().join("t.csv");
    ok(&["generate", "--config", s(&cfg), "--out", s(&trace)]);
    let record = ok(&["fit", s(&trace), "-n", "1"]);
    let d: oppaccess::HyperExpDist = serde_json::from_str(&record).unwrap();
    let text = fs::read_to_string(&trace).unwrap();
    let xs: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!((d.lambdas()[0] * mean - 1.0).abs() < 1e-12);
}

#[test]
fn generate_then_fit_recovers_mixture() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        "[model]\nrates = [160.0, 3670.0]\nweights = [0.32, 0.68]\n[trace]\ncycles = 100000\n",
    );
    let trace = dir.path().join("t.csv");
    let record = dir.path().join("fit.json");
    ok(&["generate", "--config", s(&cfg), "--out", s(&trace)]);
    ok(&["fit", s(&trace), "-n", "2", "--out", s(&record)]);
    let d: oppaccess::HyperExpDist = serde_json::from_str(&fs::read_to_string(&record).unwrap()).unwrap();
    for (got, want) in d.lambdas().iter().zip([160.0, 3670.0]) {
        assert!((got / want - 1.0).abs() < 0.1, "{got}");
    }
    for (got, want) in d.alphas().iter().zip([0.32, 0.68]) {
        assert!((got - want).abs() < 0.05, "{got}");
    }

    // The fitted record can drive a new experiment.
    let cfg2 = write(&dir, "c2.toml", "[model]\nfile = \"fit.json\"\n[strategy]\neta = 0.05\n[trace]\ncycles = 2000\n");
    let report = ok(&["eval", "--config", s(&cfg2), "--strategy", "stat_optimal"]);
    assert_eq!(rows(&report).len(), 2);
}

#[test]
fn windowed_fit_reports_each_group() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        "[model]\nrates = [160.0, 3670.0]\nweights = [0.32, 0.68]\n[trace]\ncycles = 100000\n",
    );
    let trace = dir.path().join("t.csv");
    let summary = dir.path().join("summary.csv");
    ok(&["generate", "--config", s(&cfg), "--out", s(&trace)]);
    let table = ok(&["fit", s(&trace), "-n", "2", "--group-size", "1000", "--summary", s(&summary)]);
    let table = rows(&table);
    assert_eq!(table.len(), 101);
    assert_eq!(table[0][..5], ["group", "start", "status", "alpha0", "alpha1"]);
    let summary = rows(&fs::read_to_string(&summary).unwrap());
    let names: Vec<&str> = summary[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["alpha0", "alpha1", "lambda0", "lambda1"]);
}

#[test]
fn eval_always_transmit_collides_every_cycle() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", THREE_STATE);
    let t = rows(&ok(&["eval", "--config", s(&cfg), "--strategy", "always_transmit"]));
    assert_eq!(t[1][column(&t, "collision")].parse::<f64>().unwrap(), 1.0);
    assert_eq!(t[1][column(&t, "outage")].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn eval_multiple_shot_within_budget() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        "[model]\nrates = [100.0, 6000.0]\nweights = [0.5, 0.5]\n[strategy]\neta = 0.05\n[trace]\ncycles = 200000\n",
    );
    let t = rows(&ok(&["eval", "--config", s(&cfg), "--strategy", "multiple_shot", "--epsilon", "1e-3"]));
    let c: f64 = t[1][column(&t, "collision")].parse().unwrap();
    let se: f64 = t[1][column(&t, "collision_se")].parse().unwrap();
    assert!(c <= 0.05 + 3.0 * se, "{c} ± {se}");
}

#[test]
fn eval_reports_embed_config_and_strategy_record() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", THREE_STATE);
    let saved = dir.path().join("s.json");
    let windows = dir.path().join("w.csv");
    let report = ok(&[
        "eval", "--config", s(&cfg), "--ptsi", "markov", "--save-strategy", s(&saved), "--windows", s(&windows),
    ]);
    assert!(report.contains("# > rates = [5.0, 100.0, 6000.0]"));
    assert_eq!(rows(&report)[1][0], "markov_optimal");
    let strategy: oppaccess::Strategy = serde_json::from_str(&fs::read_to_string(&saved).unwrap()).unwrap();
    assert_eq!(strategy.num_contexts(), 3);
    assert_eq!(rows(&fs::read_to_string(&windows).unwrap()).len(), 11);
}

#[test]
fn full_mode_without_labels_fails_naming_the_mode() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", THREE_STATE);
    let trace = dir.path().join("t.csv");
    ok(&["generate", "--config", s(&cfg), "--unlabeled", "--out", s(&trace)]);
    let out = run(&["eval", "--config", s(&cfg), "--ptsi", "full", "--trace", s(&trace)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("full"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", THREE_STATE);
    let out = run(&["eval", "--config", s(&cfg), "--strategy", "stat_optimal", "--eta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let bad = write(&dir, "bad.toml", "[model]\nrates = [1.0]\ntransition = [[1.0]]\nunknown = 1\n");
    assert_eq!(run(&["generate", "--config", s(&bad)]).status.code(), Some(2));
    let garbage = write(&dir, "g.csv", "0.1\nnot-a-number\n");
    assert_eq!(run(&["fit", s(&garbage), "-n", "1"]).status.code(), Some(3));
    let reducible = write(&dir, "r.toml", "[model]\nrates = [1.0, 2.0]\ntransition = [[1.0, 0.0], [0.0, 1.0]]\n[trace]\ncycles = 5\n");
    assert_eq!(run(&["generate", "--config", s(&reducible)]).status.code(), Some(2));
    let close = write(
        &dir,
        "m.toml",
        "[model]\nrates = [100.0, 1000.0, 2000.0]\nweights = [0.3, 0.3, 0.4]\n[strategy]\neta = 0.4\nepsilon = 0.5\n[trace]\ncycles = 10\n",
    );
    assert_eq!(run(&["eval", "--config", s(&close), "--strategy", "multiple_shot"]).status.code(), Some(4));
}

#[test]
fn sweep_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", THREE_STATE);
    let one = rows(&ok(&["sweep", "--config", s(&cfg), "--eta", "0.05", "--strategy", "full_optimal", "--predict-only"]));
    assert_eq!(one.len(), 2);

    let etas = "0.01,0.05,0.1,0.2";
    let t = rows(&ok(&["sweep", "--config", s(&cfg), "--eta", etas, "--predict-only"]));
    assert_eq!(t.len(), 1 + 4 * 9);
    let (name, eta, cap) = (column(&t, "strategy"), column(&t, "eta"), column(&t, "predicted_capacity"));
    let get = |k: &str, e: &str| -> f64 {
        t.iter().find(|r| r[name] == k && r[eta] == e).unwrap()[cap].parse().unwrap()
    };
    for e in etas.split(',') {
        let slack = 1.0 + 1e-9;
        assert!(get("full_optimal", e) * slack >= get("markov_optimal", e));
        assert!(get("markov_optimal", e) * slack >= get("markov_opt_balanced", e));
        assert!(get("full_optimal", e) * slack >= get("stat_optimal", e));
        assert!(get("stat_optimal", e) * slack >= get("stat_one_shot", e));
        assert!(get("full_balanced", e) * slack >= get("stat_one_shot", e));
    }
}

#[test]
fn weight_mismatch_sweep() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        r#"
        seed = 11
        [model]
        rates = [100.0, 6000.0]
        weights = [0.5, 0.5]
        [strategy]
        names = ["stat_optimal", "multiple_shot"]
        [trace]
        cycles = 50000
        [sweep]
        etas = [0.1]
        traffic_weights = [[0.5, 0.5], [0.9, 0.1]]
        "#,
    );
    let t = rows(&ok(&["sweep", "--config", s(&cfg)]));
    assert_eq!(t.len(), 5);
    let col = column(&t, "collision");
    let at = |traffic: &str, k: &str| -> f64 {
        t.iter().find(|r| r[0] == traffic && r[1] == k).unwrap()[col].parse().unwrap()
    };
    assert!(at("0.9|0.1", "stat_optimal") > 0.15);
    assert!(at("0.9|0.1", "multiple_shot") < 0.1);
}

#[test]
fn compare_and_diagnose() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", THREE_STATE);
    let t = rows(&ok(&["compare", "--config", s(&cfg)]));
    assert_eq!(t.len(), 10);
    let trace = dir.path().join("t.csv");
    ok(&["generate", "--config", s(&cfg), "--unlabeled", "--out", s(&trace)]);
    let only_stat = rows(&ok(&["compare", "--config", s(&cfg), "--trace", s(&trace)]));
    assert!(only_stat[1..].iter().all(|r| r[1] == "stat"));
    let points = dir.path().join("p.csv");
    let d = rows(&ok(&["diagnose", s(&trace), "--points", s(&points)]));
    assert_eq!(d[0][0], "knee");
    assert!(d[1][0].parse::<f64>().unwrap() > 0.0);
    assert!(rows(&fs::read_to_string(&points).unwrap()).len() > 10);
}
