//! Bundled example models, each with a recommended `h`, a few test
//! functions and an oracle that does not go through the simulator.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::engine::{PdmpModel, Skeleton};
use crate::error::{Error, Result};
use crate::function::TestFunction;
use crate::sds::State;

mod aimd;
mod boundary;
mod cramer_lundberg;
mod ctmc;
mod epoch;

pub use aimd::{make_aimd, AimdOracle, LossRate};
pub use boundary::{make_boundary_reset, BoundaryOracle};
pub use cramer_lundberg::{adjustment_coefficient, ruin_time, cl_kappa, make_cramer_lundberg, ClOracle};
pub use ctmc::{
    ctmc_feynman_kac, ctmc_feynman_kac_oracle, ctmc_generator_matrix, make_ctmc, make_ctmc_model,
    CtmcOracle,
};
pub use epoch::{make_epoch_chain, EpochOracle};

/// Expectations computed without simulation.
pub trait Oracle: Send + Sync + fmt::Debug {
    /// `E_{x0} f(X_t)`.
    fn expectation(&self, f: &TestFunction, t: f64) -> Result<f64>;

    /// `E_{x0}[g(X_t) M^h_t]`.
    fn weighted_expectation(&self, _h: &TestFunction, _g: &TestFunction, _t: f64) -> Result<f64> {
        Err(Error::MissingOracle("no weighted oracle for this model".into()))
    }
}

pub type PathValueFn = Arc<dyn Fn(&PdmpModel, &Skeleton, f64) -> Result<f64> + Send + Sync>;
pub type DecisionTimeFn = Arc<dyn Fn(&Skeleton, f64) -> f64 + Send + Sync>;

/// A functional of a whole path on `[0, t]`, such as a ruin indicator, with
/// an optional stopping time `σ <= t` by which its value is decided.
#[derive(Clone)]
pub struct PathEvent {
    pub value: PathValueFn,
    pub decided_by: Option<DecisionTimeFn>,
}

impl PathEvent {
    pub fn eval(&self, model: &PdmpModel, skeleton: &Skeleton, t: f64) -> Result<f64> {
        (self.value)(model, skeleton, t)
    }

    /// `σ ∧ t`, or `t` when no stopping time is declared.
    pub fn decision_time(&self, skeleton: &Skeleton, t: f64) -> f64 {
        self.decided_by.as_ref().map_or(t, |d| d(skeleton, t).min(t))
    }
}

/// A model with its initial state, functions and oracle. Oracle and
/// simulator are built from the same parameter map.
#[derive(Clone)]
pub struct ModelBundle {
    pub name: String,
    pub model: PdmpModel,
    pub x0: State,
    pub recommended_h: TestFunction,
    /// Named test functions; `f` is the default for Dynkin and generator
    /// checks, `g` for change-of-measure checks.
    pub functions: Vec<TestFunction>,
    pub events: Vec<(String, PathEvent)>,
    pub oracle: Option<Arc<dyn Oracle>>,
    pub parameters: BTreeMap<String, f64>,
    /// Documented parameter range.
    pub parameter_notes: String,
}

impl fmt::Debug for ModelBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelBundle")
            .field("name", &self.name)
            .field("x0", &self.x0)
            .field("h", &self.recommended_h.name())
            .field("parameters", &self.parameters)
            .finish()
    }
}

impl ModelBundle {
    /// Look up `h`, `one`, or a named test function.
    pub fn function(&self, name: &str) -> Result<TestFunction> {
        match name {
            "h" | "recommended" => Ok(self.recommended_h.clone()),
            "one" => Ok(TestFunction::one()),
            _ => self
                .functions
                .iter()
                .find(|f| f.name() == name)
                .cloned()
                .ok_or_else(|| {
                    let known: Vec<&str> = self.functions.iter().map(|f| f.name()).collect();
                    Error::Config(format!(
                        "model {} has no function {name:?} (known: h, one, {})",
                        self.name,
                        known.join(", ")
                    ))
                }),
        }
    }

    pub fn event(&self, name: &str) -> Option<PathEvent> {
        self.events
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e.clone())
    }

    pub fn oracle(&self) -> Result<&dyn Oracle> {
        self.oracle
            .as_deref()
            .ok_or_else(|| Error::MissingOracle(format!("model {} has no oracle", self.name)))
    }
}

/// Names accepted by [`build`].
pub const MODEL_NAMES: [&str; 6] = [
    "ctmc3",
    "ctmc2",
    "cramer-lundberg",
    "boundary-reset",
    "aimd",
    "epoch-chain",
];

/// Parameter map with defaults, rejecting unknown keys.
pub(crate) fn merge_params(
    model: &str,
    defaults: &[(&str, f64)],
    overrides: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, f64> =
        defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        match out.get_mut(k) {
            Some(slot) => *slot = *v,
            None => {
                let known: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
                return Err(Error::Config(format!(
                    "unknown parameter {k:?} for {model} (known: {})",
                    known.join(", ")
                )));
            }
        }
    }
    Ok(out)
}

/// Build a bundled model by name with parameter overrides.
pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelBundle> {
    match name {
        "ctmc3" => ctmc::ctmc3(params),
        "ctmc2" => ctmc::ctmc2(params),
        "cramer-lundberg" | "cl" => cramer_lundberg::bundle(params),
        "boundary-reset" | "boundary" => boundary::bundle(params),
        "aimd" => aimd::bundle(params),
        "epoch-chain" | "epoch" => epoch::bundle(params),
        _ => Err(Error::Config(format!(
            "unknown model {name:?} (known: {})",
            MODEL_NAMES.join(", ")
        ))),
    }
}

/// Build with default parameters.
pub fn build_default(name: &str) -> Result<ModelBundle> {
    build(name, &BTreeMap::new())
}
