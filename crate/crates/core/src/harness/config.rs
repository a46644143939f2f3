use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiments::{
    experiment_dynkin_check, experiment_generator_forms, experiment_is_consistency,
    experiment_martingale_check, experiment_reverse_check, experiment_simulate,
    ExperimentReport, IsOptions, Observable, RunConfig,
};
use crate::error::{Error, Result};
use crate::models;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    MartingaleCheck,
    DynkinCheck,
    IsConsistency,
    ReverseCheck,
    GeneratorForms,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Simulate,
        ExperimentKind::MartingaleCheck,
        ExperimentKind::DynkinCheck,
        ExperimentKind::IsConsistency,
        ExperimentKind::ReverseCheck,
        ExperimentKind::GeneratorForms,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::MartingaleCheck => "martingale-check",
            ExperimentKind::DynkinCheck => "dynkin-check",
            ExperimentKind::IsConsistency => "is-consistency",
            ExperimentKind::ReverseCheck => "reverse-check",
            ExperimentKind::GeneratorForms => "generator-forms",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn default_h() -> String {
    "h".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HSection {
    #[serde(default = "default_h")]
    pub name: String,
}

impl Default for HSection {
    fn default() -> Self {
        Self { name: default_h() }
    }
}

fn default_f() -> String {
    "f".into()
}

fn default_g() -> String {
    "g".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub t: f64,
    pub n: usize,
    #[serde(default = "default_f")]
    pub f: String,
    #[serde(default = "default_g")]
    pub g: String,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub require_variance_reduction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngSection {
    pub seed: u64,
}

/// One experiment run: the JSON file has sections `model`, `h`,
/// `experiment` and `rng`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    #[serde(default)]
    pub h: HSection,
    pub experiment: ExperimentSection,
    pub rng: RngSection,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig::new(self.experiment.t, self.experiment.n, self.rng.seed)
            .with_workers(self.experiment.workers)
    }
}

/// Build the bundle and run the configured experiment.
pub fn run(config: &Config) -> Result<ExperimentReport> {
    let bundle = models::build(&config.model.name, &config.model.params)?;
    let cfg = config.run_config();
    let e = &config.experiment;
    let h = || bundle.function(&config.h.name);
    match e.kind {
        ExperimentKind::Simulate => experiment_simulate(&bundle, &cfg),
        ExperimentKind::MartingaleCheck => experiment_martingale_check(&bundle, &h()?, &cfg),
        ExperimentKind::DynkinCheck => experiment_dynkin_check(&bundle, &bundle.function(&e.f)?, &cfg),
        ExperimentKind::IsConsistency => experiment_is_consistency(
            &bundle,
            &h()?,
            &Observable::from_bundle(&bundle, &e.g)?,
            &cfg,
            IsOptions {
                require_variance_reduction: e.require_variance_reduction,
            },
        ),
        ExperimentKind::ReverseCheck => experiment_reverse_check(&bundle, &h()?, &cfg),
        ExperimentKind::GeneratorForms => {
            experiment_generator_forms(&bundle, &h()?, &bundle.function(&e.f)?, &cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let text = r#"{
            "model": {"name": "ctmc3"},
            "experiment": {"kind": "martingale-check", "t": 1.0, "n": 100},
            "rng": {"seed": 5}
        }"#;
        let c = Config::from_json(text).unwrap();
        assert_eq!(c.h.name, "h");
        assert_eq!(c.experiment.f, "f");
        assert_eq!(Config::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"model": {"name": "ctmc3"}, "experiment": {"kind": "simulate",
            "t": 1, "n": 10}, "rng": {"seed": 1}, "extra": 1}"#;
        assert!(matches!(Config::from_json(text), Err(Error::Config(_))));
        assert!("martingale".parse::<ExperimentKind>().is_err());
    }
}
