use pdmp_core::harness::{
    experiment_martingale_check, run, to_csv, to_json, Config, ExperimentKind, RunConfig,
};
use pdmp_core::models::build_default;

const CONFIG: &str = r#"{
  "model": { "name": "ctmc3", "params": { "rate1": 2.5 } },
  "h": { "name": "h" },
  "experiment": { "kind": "martingale-check", "t": 1.0, "n": 2000 },
  "rng": { "seed": 42 }
}"#;

#[test]
fn config_round_trips() {
    let c = Config::from_json(CONFIG).unwrap();
    assert_eq!(c.experiment.kind, ExperimentKind::MartingaleCheck);
    assert_eq!(Config::from_json(&c.to_json()).unwrap(), c);
}

#[test]
fn unknown_fields_are_rejected() {
    let bad = CONFIG.replace("\"n\": 2000", "\"n\": 2000, \"m\": 1");
    assert!(Config::from_json(&bad).is_err());
    let bad = CONFIG.replace("rate1", "rate9");
    assert!(run(&Config::from_json(&bad).unwrap()).is_err());
}

#[test]
fn run_matches_direct_call() {
    let c = Config::from_json(CONFIG).unwrap();
    let via_config = run(&c).unwrap();
    let params = [("rate1".to_string(), 2.5)].into_iter().collect();
    let b = pdmp_core::models::build("ctmc3", &params).unwrap();
    let direct = experiment_martingale_check(&b, &b.recommended_h, &RunConfig::new(1.0, 2000, 42)).unwrap();
    assert!(via_config.same_outcome(&direct));
}

#[test]
fn reports_serialize() {
    let b = build_default("epoch-chain").unwrap();
    let r = experiment_martingale_check(&b, &b.recommended_h, &RunConfig::new(2.0, 500, 1)).unwrap();
    let json = to_json(&[r.clone()]).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed[0]["name"], "martingale-check");
    let csv = to_csv(&[r]).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().contains("seed"));
    assert_eq!(lines.count(), 1);
}
