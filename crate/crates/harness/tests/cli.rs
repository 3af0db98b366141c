use std::process::Command;

fn hetnet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hetnet")).args(args).output().unwrap()
}

#[test]
fn run_writes_the_listed_files() {
    let dir = std::env::temp_dir().join(format!("hetnet-cli-{}", std::process::id()));
    let out = hetnet(&["run", "runtime_compare", "--trials", "1", "--solver", "iterative", "--scenario", "ms", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(listed.lines().count(), 3);
    for line in listed.lines() {
        assert!(std::path::Path::new(line).exists());
    }
    let summary = std::fs::read_to_string(dir.join("runtime_compare_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().contains(",ms,iterative,"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn accept_prints_a_verdict_line_and_json() {
    let dir = std::env::temp_dir().join(format!("hetnet-accept-{}", std::process::id()));
    let out = hetnet(&["accept", "--criterion", "2", "--strict", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("criterion 2 stationarity: PASS"), "{text}");
    assert!(std::fs::read_to_string(dir.join("acceptance.json")).unwrap().contains("\"criterion\": 2"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_requests_exit_nonzero() {
    assert!(!hetnet(&["run", "no_such_experiment"]).status.success());
    assert!(!hetnet(&["run", "pricing_vs_fossil", "--scenario", "ms"]).status.success());
    assert!(!hetnet(&["accept", "--criterion", "9"]).status.success());
    assert!(!hetnet(&["accept", "--trials", "3"]).status.success());
    assert!(!hetnet(&["run", "power_vs_users", "--config", "/nonexistent.toml"]).status.success());
}
