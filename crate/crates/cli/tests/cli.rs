use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
depths = [1, 2]
record_wall_time = false
[pool]
candidates = 2
[unitary]
kind = "rotation"
[detector]
kind = "apd"
efficiencies = [0.8, 0.9]
"#;

fn admeas(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_admeas")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", CONFIG);
    let out = dir.path().join("out");
    let o = admeas(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "N,eta,detector,unitary,D,R,E,pruned_mass,wall_ms");
    assert_eq!(lines.len(), 5);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), csv);
    assert!(out.join("trees/N2_eta0.9.jsonl").exists());
    assert!(out.join("histograms/N1_eta0.8.jsonl").exists());
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(admeas(&["run", &cfg, "--out", out.to_str().unwrap()]).status.success());
    }
    for rel in ["results.csv", "trees/N2_eta0.8.jsonl", "histograms/N2_eta0.9.jsonl"] {
        assert_eq!(std::fs::read(a.join(rel)).unwrap(), std::fs::read(b.join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &CONFIG.replace("[0.8, 0.9]", "[1.5]"));
    let o = admeas(&["validate", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let garbled = write(dir.path(), "garbled.toml", "depths = [");
    assert_eq!(admeas(&["validate", &garbled]).status.code(), Some(2));
    let good = write(dir.path(), "good.toml", CONFIG);
    assert_eq!(admeas(&["validate", &good]).status.code(), Some(0));
}

#[test]
fn over_budget_exhaustive_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("optimizer = \"exhaustive\"\nexhaustive_budget = 100\n{}", CONFIG.replace("[1, 2]", "[3]"));
    let cfg = write(dir.path(), "x.toml", &body);
    let o = admeas(&["cost", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("3,2,40,7,163840000000,"), "{table}");
    let out = dir.path().join("out");
    assert_eq!(admeas(&["run", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(3));
    assert!(!out.join("results.csv").exists());
}
