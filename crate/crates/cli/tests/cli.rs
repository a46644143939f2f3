use std::process::{Command, Output};

fn pdmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdmp")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn martingale_check_passes_and_reports_json() {
    let out = pdmp(&["martingale-check", "--model", "cramer-lundberg", "--n", "4000", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v[0]["name"], "martingale-check");
    assert_eq!(v[0]["passed"], true);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("PASS"));
}

#[test]
fn worker_count_does_not_change_output() {
    let run = |w: &str| {
        let out = pdmp(&["is-consistency", "--model", "aimd", "--n", "3000", "--workers", w]);
        let mut v = stdout_json(&out);
        v[0]["wall_time_s"] = serde_json::Value::Null;
        v
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn dumped_config_reloads() {
    let out = pdmp(&["reverse-check", "--model", "boundary-reset", "--param", "eta=0.5", "--n", "500", "--dump-config"]);
    assert!(out.status.success());
    let path = std::env::temp_dir().join(format!("pdmp-cli-{}.json", std::process::id()));
    std::fs::write(&path, &out.stdout).unwrap();
    let again = pdmp(&["reverse-check", "--config", path.to_str().unwrap(), "--dump-config"]);
    let from_flags = pdmp(&["reverse-check", "--config", path.to_str().unwrap(), "--format", "csv"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.stdout, again.stdout);
    assert!(from_flags.status.success());
    assert!(String::from_utf8_lossy(&from_flags.stdout).contains("model.eta"));
}

#[test]
fn bad_input_fails_cleanly() {
    assert!(!pdmp(&["simulate", "--model", "nope"]).status.success());
    assert!(!pdmp(&["simulate", "--param", "rate0"]).status.success());
    assert!(!pdmp(&["simulate", "--format", "xml", "--n", "10"]).status.success());
}
