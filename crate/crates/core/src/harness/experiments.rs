use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::estimate::{replicate, Estimate, Sample};
use crate::engine::{PdmpModel, Skeleton};
use crate::error::{Error, Result};
use crate::function::TestFunction;
use crate::generator::{dynkin_with, generator_apply};
use crate::models::{ModelBundle, PathEvent};
use crate::rng::{Substream, UniformSource, VariateStream};
use crate::sds::State;
use crate::tilting::{tilt_model, tilted_generator, ExpMartingale, TiltedForm};

/// Number of standard errors allowed by the statistical verdicts.
pub const SIGMA_MULTIPLIER: f64 = 3.0;
pub const REVERSE_TOL: f64 = 1e-6;
pub const FORMS_RTOL: f64 = 1e-8;
pub const DOOB_RTOL: f64 = 1e-10;
pub const ORACLE_SELF_TOL: f64 = 1e-9;
/// Floor of the denominator in relative deviations.
pub const RELATIVE_FLOOR: f64 = 1e-14;
/// Quadrature tolerance of interval measures in the generator-form check.
pub const FORMS_QUAD_TOL: f64 = 1e-12;

/// Horizon, sample size, seed and worker count of one experiment run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    /// Worker threads; 0 means one per core. Not part of any report.
    pub workers: usize,
}

impl RunConfig {
    pub fn new(t: f64, n: usize, seed: u64) -> Self {
        Self { t, n, seed, workers: 0 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::BadParameters(format!("horizon t = {}", self.t)));
        }
        if self.n < 2 {
            return Err(Error::BadParameters(format!("need n >= 2, got {}", self.n)));
        }
        Ok(())
    }
}

/// `value <= threshold` (or `<` when `strict`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub value: f64,
    pub threshold: f64,
    pub strict: bool,
    pub passed: bool,
}

impl Verdict {
    pub fn at_most(criterion: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            criterion: criterion.into(),
            value,
            threshold,
            strict: false,
            passed: value <= threshold,
        }
    }

    pub fn below(criterion: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            criterion: criterion.into(),
            value,
            threshold,
            strict: true,
            passed: value < threshold,
        }
    }

    /// `|mean - target| <= 3 stderr`.
    pub fn within_stderr(criterion: impl Into<String>, e: &Estimate, target: f64) -> Self {
        Self::at_most(criterion, (e.mean - target).abs(), SIGMA_MULTIPLIER * e.stderr)
    }

    /// `|a - b| <= 3 sqrt(se_a² + se_b²)`.
    pub fn agree(criterion: impl Into<String>, a: &Estimate, b: &Estimate) -> Self {
        Self::at_most(
            criterion,
            (a.mean - b.mean).abs(),
            SIGMA_MULTIPLIER * a.stderr.hypot(b.stderr),
        )
    }

    pub fn recheck(&self) -> bool {
        if self.strict {
            self.value < self.threshold
        } else {
            self.value <= self.threshold
        }
    }
}

/// Everything needed to judge and reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub model: String,
    pub parameters: BTreeMap<String, Value>,
    pub estimates: BTreeMap<String, Estimate>,
    /// Deterministic quantities: oracle values, maxima of pathwise deviations.
    pub values: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
    pub exploded: usize,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    fn new(name: &str, bundle: &ModelBundle, cfg: &RunConfig) -> Self {
        let mut parameters: BTreeMap<String, Value> = bundle
            .parameters
            .iter()
            .map(|(k, v)| (format!("model.{k}"), json!(v)))
            .collect();
        parameters.insert("t".into(), json!(cfg.t));
        parameters.insert("n".into(), json!(cfg.n));
        Self {
            name: name.into(),
            model: bundle.name.clone(),
            parameters,
            estimates: BTreeMap::new(),
            values: BTreeMap::new(),
            verdicts: Vec::new(),
            passed: true,
            exploded: 0,
            seed: cfg.seed,
            wall_time_s: 0.0,
        }
    }

    fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.into(), value.into());
    }

    fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    fn finish(mut self, started: Instant) -> Self {
        self.passed = self.verdicts.iter().all(|v| v.passed);
        self.wall_time_s = started.elapsed().as_secs_f64();
        self
    }

    /// The verdicts evaluated again from their stored value and threshold.
    pub fn verdicts_consistent(&self) -> bool {
        self.verdicts.iter().all(|v| v.recheck() == v.passed)
            && self.passed == self.verdicts.iter().all(|v| v.passed)
    }

    /// Equality of everything except the wall time, bit for bit.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        serde_json::to_string(&a).ok() == serde_json::to_string(&b).ok()
    }
}

/// What an experiment averages: a function of `X_t` or of the whole path.
#[derive(Clone)]
pub enum Observable {
    State(TestFunction),
    Path(String, PathEvent),
}

impl Observable {
    pub fn name(&self) -> &str {
        match self {
            Observable::State(f) => f.name(),
            Observable::Path(name, _) => name,
        }
    }

    pub fn eval(&self, model: &PdmpModel, skeleton: &Skeleton, t: f64) -> Result<f64> {
        match self {
            Observable::State(f) => Ok(f.at(&skeleton.path_state(model, t)?)),
            Observable::Path(_, e) => e.eval(model, skeleton, t),
        }
    }

    /// Time at which likelihood ratios are evaluated: the event's decision
    /// time for path events (optional stopping), `t` otherwise.
    pub fn weight_time(&self, skeleton: &Skeleton, t: f64) -> f64 {
        match self {
            Observable::State(_) => t,
            Observable::Path(_, e) => e.decision_time(skeleton, t),
        }
    }

    /// A bundle function or, failing that, a bundle path event.
    pub fn from_bundle(bundle: &ModelBundle, name: &str) -> Result<Self> {
        match bundle.function(name) {
            Ok(f) => Ok(Observable::State(f)),
            Err(e) => bundle
                .event(name)
                .map(|ev| Observable::Path(name.to_string(), ev))
                .ok_or(e),
        }
    }
}

fn simulate(model: &PdmpModel, x0: &State, cfg: &RunConfig, rep: u64) -> Result<Option<Skeleton>> {
    let s = model.simulate_replication(x0, cfg.t, cfg.seed, rep)?;
    Ok((!s.exploded()).then_some(s))
}

/// Path averages of every state function of the bundle and of the jump
/// count, compared with the oracle where it has a formula.
pub fn experiment_simulate(bundle: &ModelBundle, cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.check()?;
    let started = Instant::now();
    let mut report = ExperimentReport::new("simulate", bundle, cfg);
    let functions = &bundle.functions;
    let model = &bundle.model;
    let r = replicate(cfg.n as u64, cfg.workers, functions.len() + 1, |rep| {
        let Some(s) = simulate(model, &bundle.x0, cfg, rep)? else {
            return Ok(Sample::Exploded);
        };
        let xt = s.path_state(model, cfg.t)?;
        let mut v: Vec<f64> = functions.iter().map(|f| f.at(&xt)).collect();
        v.push(s.jump_count() as f64);
        Ok(Sample::Values(v))
    })?;
    for (i, f) in functions.iter().enumerate() {
        let e = r.estimate(i);
        report.estimates.insert(format!("{}(X_t)", f.name()), e);
        if let Some(Ok(exact)) = bundle.oracle.as_ref().map(|o| o.expectation(f, cfg.t)) {
            report.values.insert(format!("oracle E {}(X_t)", f.name()), exact);
            report.verdict(Verdict::within_stderr(
                format!("|mean {}(X_t) - oracle| <= 3 stderr", f.name()),
                &e,
                exact,
            ));
        }
    }
    report.estimates.insert("jumps".into(), r.estimate(functions.len()));
    report.exploded = r.exploded;
    Ok(report.finish(started))
}

/// `E M^h_t = 1` within three standard errors.
pub fn experiment_martingale_check(
    bundle: &ModelBundle,
    h: &TestFunction,
    cfg: &RunConfig,
) -> Result<ExperimentReport> {
    cfg.check()?;
    let started = Instant::now();
    let mut report = ExperimentReport::new("martingale-check", bundle, cfg);
    report.param("h", h.name());
    let model = &bundle.model;
    let m = ExpMartingale::new(model, h);
    let r = replicate(cfg.n as u64, cfg.workers, 1, |rep| {
        let Some(s) = simulate(model, &bundle.x0, cfg, rep)? else {
            return Ok(Sample::Exploded);
        };
        Ok(Sample::Values(vec![m.value(model, &s, cfg.t)?]))
    })?;
    let e = r.estimate(0);
    report.estimates.insert("M_t".into(), e);
    report.verdict(Verdict::within_stderr("|mean M_t - 1| <= 3 stderr", &e, 1.0));
    if let Some(Ok(v)) = bundle
        .oracle
        .as_ref()
        .map(|o| o.weighted_expectation(h, &TestFunction::one(), cfg.t))
    {
        report.values.insert("oracle E M_t".into(), v);
        report.verdict(Verdict::at_most("|oracle E M_t - 1|", (v - 1.0).abs(), ORACLE_SELF_TOL));
        report.verdict(Verdict::within_stderr("|mean M_t - oracle| <= 3 stderr", &e, v));
    }
    report.exploded = r.exploded;
    Ok(report.finish(started))
}

/// `E[g(X_t) M^h_t]` against the weighted oracle for several `(g, h)` pairs.
pub fn experiment_oracle_check(
    bundle: &ModelBundle,
    pairs: &[(TestFunction, TestFunction)],
    cfg: &RunConfig,
) -> Result<ExperimentReport> {
    cfg.check()?;
    let started = Instant::now();
    let mut report = ExperimentReport::new("oracle-check", bundle, cfg);
    let oracle = bundle.oracle()?;
    let model = &bundle.model;
    let ms: Vec<ExpMartingale> = pairs.iter().map(|(_, h)| ExpMartingale::new(model, h)).collect();
    let r = replicate(cfg.n as u64, cfg.workers, pairs.len(), |rep| {
        let Some(s) = simulate(model, &bundle.x0, cfg, rep)? else {
            return Ok(Sample::Exploded);
        };
        let xt = s.path_state(model, cfg.t)?;
        pairs
            .iter()
            .zip(&ms)
            .map(|((g, _), m)| Ok(g.at(&xt) * m.value(model, &s, cfg.t)?))
            .collect::<Result<Vec<f64>>>()
            .map(Sample::Values)
    })?;
    for (i, (g, h)) in pairs.iter().enumerate() {
        let key = format!("{}(X_t) M^{}_t", g.name(), h.name());
        let e = r.estimate(i);
        let exact = oracle.weighted_expectation(h, g, cfg.t)?;
        let unit = oracle.weighted_expectation(h, &TestFunction::one(), cfg.t)?;
        report.estimates.insert(key.clone(), e);
        report.values.insert(format!("oracle E {key}"), exact);
        report.values.insert(format!("oracle E M^{}_t", h.name()), unit);
        report.verdict(Verdict::within_stderr(format!("|mean {key} - oracle| <= 3 stderr"), &e, exact));
        report.verdict(Verdict::at_most(
            format!("|oracle E M^{}_t - 1|", h.name()),
            (unit - 1.0).abs(),
            ORACLE_SELF_TOL,
        ));
    }
    report.exploded = r.exploded;
    Ok(report.finish(started))
}

/// `E U^f_t = f(x0)` within three standard errors, with `E f(X_t)` checked
/// against the oracle on the same paths when one exists.
pub fn experiment_dynkin_check(
    bundle: &ModelBundle,
    f: &TestFunction,
    cfg: &RunConfig,
) -> Result<ExperimentReport> {
    cfg.check()?;
    let started = Instant::now();
    let mut report = ExperimentReport::new("dynkin-check", bundle, cfg);
    report.param("f", f.name());
    let model = &bundle.model;
    let af = generator_apply(model, f);
    let r = replicate(cfg.n as u64, cfg.workers, 2, |rep| {
        let Some(s) = simulate(model, &bundle.x0, cfg, rep)? else {
            return Ok(Sample::Exploded);
        };
        let u = dynkin_with(&af, model, f, &s, cfg.t)?;
        Ok(Sample::Values(vec![u, f.at(&s.path_state(model, cfg.t)?)]))
    })?;
    let (u, fx) = (r.estimate(0), r.estimate(1));
    let f0 = f.at(&bundle.x0);
    report.values.insert("f(x0)".into(), f0);
    report.estimates.insert("U_t".into(), u);
    report.estimates.insert("f(X_t)".into(), fx);
    report.verdict(Verdict::within_stderr("|mean U_t - f(x0)| <= 3 stderr", &u, f0));
    if let Some(Ok(exact)) = bundle.oracle.as_ref().map(|o| o.expectation(f, cfg.t)) {
        report.values.insert("oracle E f(X_t)".into(), exact);
        report.verdict(Verdict::within_stderr("|mean f(X_t) - oracle| <= 3 stderr", &fx, exact));
    }
    report.exploded = r.exploded;
    Ok(report.finish(started))
}

/// Options of the change-of-measure check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IsOptions {
    /// Require the importance estimator to have a strictly smaller standard
    /// error than crude simulation.
    pub require_variance_reduction: bool,
}

/// Direct simulation under the tilted triple against likelihood-ratio
/// reweighting, on common random numbers:
/// `Ẽ g = E[g M^h]` and `E g = Ẽ[g M̃^{1/h}]`.
pub fn experiment_is_consistency(
    bundle: &ModelBundle,
    h: &TestFunction,
    g: &Observable,
    cfg: &RunConfig,
    options: IsOptions,
) -> Result<ExperimentReport> {
    cfg.check()?;
    let started = Instant::now();
    let mut report = ExperimentReport::new("is-consistency", bundle, cfg);
    report.param("h", h.name());
    report.param("g", g.name());
    let model = &bundle.model;
    let tilted = tilt_model(model, h)?;
    let forward = ExpMartingale::new(model, h);
    let backward = ExpMartingale::new(&tilted, &h.reciprocal());
    let r = replicate(cfg.n as u64, cfg.workers, 4, |rep| {
        let (Some(p), Some(q)) = (
            simulate(model, &bundle.x0, cfg, rep)?,
            simulate(&tilted, &bundle.x0, cfg, rep)?,
        ) else {
            return Ok(Sample::Exploded);
        };
        let gp = g.eval(model, &p, cfg.t)?;
        let gq = g.eval(&tilted, &q, cfg.t)?;
        Ok(Sample::Values(vec![
            gq,
            gp * forward.value(model, &p, g.weight_time(&p, cfg.t))?,
            gp,
            gq * backward.value(&tilted, &q, g.weight_time(&q, cfg.t))?,
        ]))
    })?;
    let [tilted_direct, reweighted, crude, importance] =
        [0, 1, 2, 3].map(|i| r.estimate(i));
    report.estimates.insert("tilted g".into(), tilted_direct);
    report.estimates.insert("g M^h".into(), reweighted);
    report.estimates.insert("crude g".into(), crude);
    report.estimates.insert("tilted g M~^(1/h)".into(), importance);
    report.values.insert("variance tilted g".into(), tilted_direct.stderr.powi(2) * tilted_direct.n as f64);
    report.values.insert("variance g M^h".into(), reweighted.stderr.powi(2) * reweighted.n as f64);
    report.verdict(Verdict::agree(
        "|tilted g - g M^h| <= 3 combined stderr",
        &tilted_direct,
        &reweighted,
    ));
    report.verdict(Verdict::agree(
        "|crude g - tilted g M~^(1/h)| <= 3 combined stderr",
        &crude,
        &importance,
    ));
    if options.require_variance_reduction {
        report.verdict(Verdict::below(
            "stderr importance < stderr crude",
            importance.stderr,
            crude.stderr,
        ));
    }
    if let (Observable::State(gf), Some(oracle)) = (g, bundle.oracle.as_ref()) {
        if let Ok(exact) = oracle.weighted_expectation(h, gf, cfg.t) {
            report.values.insert("oracle E g M^h".into(), exact);
            report.verdict(Verdict::within_stderr("|tilted g - oracle| <= 3 stderr", &tilted_direct, exact));
            report.verdict(Verdict::within_stderr("|g M^h - oracle| <= 3 stderr", &reweighted, exact));
        }
    }
    report.exploded = r.exploded;
    Ok(report.finish(started))
}

/// Pathwise `M̃^{1/h}_t M^h_t = 1` on paths of the original model.
pub fn experiment_reverse_check(
    bundle: &ModelBundle,
    h: &TestFunction,
    cfg: &RunConfig,
) -> Result<ExperimentReport> {
    cfg.check()?;
    let started = Instant::now();
    let mut report = ExperimentReport::new("reverse-check", bundle, cfg);
    report.param("h", h.name());
    let model = &bundle.model;
    let tilted = tilt_model(model, h)?;
    let forward = ExpMartingale::new(model, h);
    let backward = ExpMartingale::new(&tilted, &h.reciprocal());
    let r = replicate(cfg.n as u64, cfg.workers, 2, |rep| {
        let Some(s) = simulate(model, &bundle.x0, cfg, rep)? else {
            return Ok(Sample::Exploded);
        };
        let product = forward.value(model, &s, cfg.t)? * backward.value(&tilted, &s, cfg.t)?;
        Ok(Sample::Values(vec![(product - 1.0).abs(), s.jump_count() as f64]))
    })?;
    let dev = r.components[0];
    report.estimates.insert("|product - 1|".into(), r.estimate(0));
    report.estimates.insert("jumps".into(), r.estimate(1));
    report.values.insert("max |product - 1|".into(), dev.max);
    report.verdict(Verdict::below("max |product - 1| < 1e-6", dev.max, REVERSE_TOL));
    report.exploded = r.exploded;
    Ok(report.finish(started))
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        return 0.0;
    }
    d / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// `(G̃ f)(ℓ) = λ_ℓ Σ_j Q(ℓ, j) h(j) (f(j) - f(ℓ)) / h(ℓ)` from the rate and
/// mass tables of a constant-flow chain.
pub fn doob_generator_value(model: &PdmpModel, h: &TestFunction, f: &TestFunction, x: &State) -> Result<f64> {
    let lambda = model.hazard.rate(x)?;
    let masses = model
        .kernel
        .masses(x)
        .ok_or_else(|| Error::UnsupportedState("kernel has no mass table".into()))??;
    let (fx, hx) = (f.at(x), h.at(x));
    Ok(lambda * masses.iter().map(|(z, m)| m * h.at(z) * (f.at(z) - fx)).sum::<f64>() / hx)
}

/// The tilted generator in its three forms as interval measures over a
/// random sub-interval of a random segment of each path.
pub fn experiment_generator_forms(
    bundle: &ModelBundle,
    h: &TestFunction,
    f: &TestFunction,
    cfg: &RunConfig,
) -> Result<ExperimentReport> {
    cfg.check()?;
    let started = Instant::now();
    let mut report = ExperimentReport::new("generator-forms", bundle, cfg);
    report.param("h", h.name());
    report.param("f", f.name());
    let model = &bundle.model;
    let forms: Vec<Arc<_>> = TiltedForm::ALL
        .iter()
        .map(|form| Arc::new(tilted_generator(model, h, f, *form)))
        .collect();
    let chain = model.descriptor.labels.is_some()
        && model.flow.is_stationary(&bundle.x0);
    let r = replicate(cfg.n as u64, cfg.workers, 4, |rep| {
        let Some(s) = simulate(model, &bundle.x0, cfg, rep)? else {
            return Ok(Sample::Exploded);
        };
        let mut aux = VariateStream::new(cfg.seed, rep, Substream::Auxiliary);
        let segments = s.segments(cfg.t);
        if segments.is_empty() {
            return Ok(Sample::Values(vec![0.0; 4]));
        }
        let k = ((aux.next_uniform() * segments.len() as f64) as usize).min(segments.len() - 1);
        let seg = segments[k];
        let len = seg.length.min(model.flow.horizon(seg.start_state));
        let (u1, u2) = (aux.next_uniform() * len, aux.next_uniform() * len);
        let (a, b) = (u1.min(u2), u1.max(u2));
        let flow = model.flow.as_ref();
        let v: Vec<f64> = forms
            .iter()
            .map(|g| g.interval(flow, seg.start_state, a, b, FORMS_QUAD_TOL))
            .collect::<Result<_>>()?;
        let doob = if chain {
            let d = doob_generator_value(model, h, f, seg.start_state)? * (b - a);
            relative_deviation(v[0], d)
                .max(relative_deviation(v[1], d))
                .max(relative_deviation(v[2], d))
        } else {
            0.0
        };
        Ok(Sample::Values(vec![
            relative_deviation(v[0], v[1]),
            relative_deviation(v[0], v[2]),
            relative_deviation(v[1], v[2]),
            doob,
        ]))
    })?;
    let names = ["direct-ratio", "direct-bracket", "ratio-bracket"];
    for (i, name) in names.iter().enumerate() {
        let max = r.components[i].max;
        report.values.insert(format!("max rel dev {name}"), max);
        report.verdict(Verdict::at_most(format!("max rel dev {name} <= 1e-8"), max, FORMS_RTOL));
    }
    if chain {
        let max = r.components[3].max;
        report.values.insert("max rel dev vs Doob matrix".into(), max);
        report.verdict(Verdict::at_most("max rel dev vs Doob matrix <= 1e-10", max, DOOB_RTOL));
    }
    report.exploded = r.exploded;
    Ok(report.finish(started))
}
