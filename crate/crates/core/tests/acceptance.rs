//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! values underneath. Exits non-zero on any failure not listed in
//! `KNOWN_CONFLICTS`.

use std::sync::Arc;
use std::time::Instant;

use pdmp_core::engine::PdmpModel;
use pdmp_core::generator::generator_apply;
use pdmp_core::harness::{
    experiment_dynkin_check, experiment_generator_forms, experiment_is_consistency,
    experiment_martingale_check, experiment_oracle_check, experiment_reverse_check,
    experiment_simulate, ExperimentReport, IsOptions, Observable, RunConfig,
};
use pdmp_core::models::{build, build_default, ModelBundle};
use pdmp_core::rng::{Substream, UniformSource, VariateStream};
use pdmp_core::tilting::{
    exp_martingale, martingale_hunt_form, martingale_ito_form, martingale_step_form, tilt_model,
};
use pdmp_core::{Result, State, TestFunction};

const BUNDLES: [&str; 5] = ["ctmc3", "cramer-lundberg", "boundary-reset", "aimd", "epoch-chain"];
const SEED: u64 = 20_240_917;

/// Subchecks whose failure is a documented conflict between the build
/// contract and the theory, not a defect.
const KNOWN_CONFLICTS: [(&str, &str); 1] = [(
    "step form / ctmc3",
    "a constant-flow CTMC has a continuous hazard, so it is not quasi-step and the step \
     form omits exp(-∫𝒜h/h); exercised instead on epoch-chain",
)];

struct Check {
    label: String,
    passed: bool,
    detail: String,
}

impl Check {
    fn new(label: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_error(label: impl Into<String>, e: impl std::fmt::Display) -> Self {
        Self::new(label, false, format!("error: {e}"))
    }
}

struct Criterion {
    id: usize,
    title: &'static str,
    checks: Vec<Check>,
    seconds: f64,
}

impl Criterion {
    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn unexpected_failures(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| !c.passed && !KNOWN_CONFLICTS.iter().any(|(l, _)| *l == c.label))
            .count()
    }
}

fn run(id: usize, title: &'static str, body: impl FnOnce() -> Vec<Check>) -> Criterion {
    let start = Instant::now();
    let checks = body();
    Criterion {
        id,
        title,
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn bundle(name: &str) -> ModelBundle {
    build_default(name).unwrap_or_else(|e| panic!("bundle {name}: {e}"))
}

/// States met along simulated paths, starting with `x0`.
fn probe_states(b: &ModelBundle, paths: u64, t: f64) -> Vec<State> {
    let mut out = vec![b.x0.clone()];
    for rep in 0..paths {
        if let Ok(s) = b.model.simulate_replication(&b.x0, t, SEED ^ 0x5eed, rep) {
            out.extend(s.events.into_iter().map(|e| e.post));
        }
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn report_check(label: String, r: Result<ExperimentReport>, verdicts: Option<&[usize]>) -> Check {
    match r {
        Err(e) => Check::from_error(label, e),
        Ok(r) => {
            let chosen: Vec<_> = match verdicts {
                Some(idx) => idx.iter().filter_map(|i| r.verdicts.get(*i)).collect(),
                None => r.verdicts.iter().collect(),
            };
            let passed = !chosen.is_empty() && chosen.iter().all(|v| v.passed) && r.exploded == 0;
            let detail = chosen
                .iter()
                .map(|v| {
                    format!(
                        "{}: {:.3e} {} {:.3e}",
                        v.criterion,
                        v.value,
                        if v.strict { "<" } else { "<=" },
                        v.threshold
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            Check::new(label, passed, format!("{detail}; exploded {}", r.exploded))
        }
    }
}

fn algebraic_core() -> Vec<Check> {
    const CASES: u64 = 200;
    const TOL: f64 = 1e-8;
    let mut checks = Vec::new();
    for name in BUNDLES {
        let b = bundle(name);
        let model = &b.model;
        let flow = model.flow.as_ref();
        let states = probe_states(&b, 50, 3.0);
        let f = b.function("f").unwrap_or_else(|_| b.recommended_h.clone());
        let af = generator_apply(model, &f);
        let ah = generator_apply(model, &b.recommended_h);
        let hazard = model.hazard.functional();
        let mut u = VariateStream::new(SEED, 1, Substream::Auxiliary);
        let (mut semigroup, mut additivity, mut survival) = (0.0f64, 0.0f64, 0.0f64);
        let mut error = None;
        for _ in 0..CASES {
            let x = &states[(u.next_uniform() * states.len() as f64) as usize % states.len()];
            let c = flow.horizon(x).min(4.0);
            let s = u.next_uniform() * 0.5 * c;
            let t = u.next_uniform() * (c - s) * 0.999;
            let mut step = || -> Result<()> {
                let y = flow.eval(x, s)?;
                let direct = flow.eval(x, s + t)?;
                semigroup = semigroup.max(direct.distance(&flow.eval(&y, t)?));
                for a in [&af, &ah, hazard] {
                    let whole = a.eval(flow, x, s + t, 1e-12)?;
                    let parts = a.eval(flow, x, s, 1e-12)? + a.eval(flow, &y, t, 1e-12)?;
                    additivity = additivity.max(rel(whole, parts));
                }
                let whole = model.hazard.survival(flow, x, s + t)?;
                let parts =
                    model.hazard.survival(flow, x, s)? * model.hazard.survival(flow, &y, t)?;
                survival = survival.max(rel(whole, parts));
                Ok(())
            };
            if let Err(e) = step() {
                error = Some(e);
                break;
            }
        }
        match error {
            Some(e) => checks.push(Check::from_error(name, e)),
            None => checks.push(Check::new(
                name,
                semigroup <= TOL && additivity <= TOL && survival <= TOL,
                format!(
                    "{CASES} cases: semigroup {semigroup:.2e}, additivity {additivity:.2e}, \
                     F multiplicativity {survival:.2e} (tol {TOL:.0e})"
                ),
            )),
        }
    }
    checks
}

fn martingale_property() -> Vec<Check> {
    let cfg = RunConfig::new(1.0, 100_000, SEED);
    ["ctmc3", "cramer-lundberg"]
        .into_iter()
        .map(|name| {
            let b = bundle(name);
            let start = Instant::now();
            match experiment_martingale_check(&b, &b.recommended_h, &cfg) {
                Err(e) => Check::from_error(name, e),
                Ok(r) => {
                    let secs = start.elapsed().as_secs_f64();
                    let e = r.estimates["M_t"];
                    let v = &r.verdicts[0];
                    Check::new(
                        name,
                        v.passed && e.stderr < 0.02 && secs < 60.0,
                        format!(
                            "mean {:.6} stderr {:.2e} (< 0.02), |mean-1| {:.2e} <= {:.2e}, {secs:.1}s (< 60s)",
                            e.mean, e.stderr, v.value, v.threshold
                        ),
                    )
                }
            }
        })
        .collect()
}

fn oracle_equivalence() -> Vec<Check> {
    let b = bundle("ctmc3");
    let f = |n: &str| b.function(n).unwrap();
    let pairs = vec![(f("f"), f("h")), (f("g"), f("h2")), (f("q"), f("h3"))];
    let cfg = RunConfig::new(1.0, 100_000, SEED + 3);
    vec![report_check("ctmc3 (f,h) (g,h2) (q,h3)".into(), experiment_oracle_check(&b, &pairs, &cfg), None)]
}

fn dynkin() -> Vec<Check> {
    let cfg = RunConfig::new(1.0, 100_000, SEED + 4);
    BUNDLES
        .into_iter()
        .map(|name| {
            let b = bundle(name);
            let f = b.function("f").unwrap();
            report_check(format!("{name} f={}", f.name()), experiment_dynkin_check(&b, &f, &cfg), Some(&[0]))
        })
        .collect()
}

fn change_of_measure() -> Vec<Check> {
    let cfg = RunConfig::new(1.0, 50_000, SEED + 5);
    let mut checks: Vec<Check> = BUNDLES
        .into_iter()
        .map(|name| {
            let b = bundle(name);
            let g = Observable::State(b.function("g").unwrap());
            report_check(
                format!("{name} g={}", g.name()),
                experiment_is_consistency(&b, &b.recommended_h, &g, &cfg, IsOptions::default()),
                Some(&[0, 1]),
            )
        })
        .collect();
    let params = [("theta", 1.0), ("u0", 6.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let rare = build("cramer-lundberg", &params).expect("rare-event bundle");
    let ruin = Observable::from_bundle(&rare, "ruin").expect("ruin event");
    let opts = IsOptions {
        require_variance_reduction: true,
    };
    let r = experiment_is_consistency(&rare, &rare.recommended_h, &ruin, &RunConfig::new(10.0, 100_000, SEED + 6), opts);
    let mut c = report_check("cramer-lundberg ruin by T=10, u0=6, θ=R=1".into(), r.clone(), None);
    if let Ok(r) = r {
        c.detail = format!(
            "P(ruin) crude {:.3e}±{:.1e}, tilted {:.3e}±{:.1e}; {}",
            r.estimates["crude g"].mean,
            r.estimates["crude g"].stderr,
            r.estimates["tilted g M~^(1/h)"].mean,
            r.estimates["tilted g M~^(1/h)"].stderr,
            c.detail
        );
    }
    checks.push(c);
    checks
}

fn reverse_identity() -> Vec<Check> {
    let cfg = RunConfig::new(1.0, 10_000, SEED + 7);
    BUNDLES
        .into_iter()
        .map(|name| {
            let b = bundle(name);
            report_check(name.into(), experiment_reverse_check(&b, &b.recommended_h, &cfg), None)
        })
        .collect()
}

fn generator_forms() -> Vec<Check> {
    let cfg = RunConfig::new(1.0, 100, SEED + 8);
    BUNDLES
        .into_iter()
        .map(|name| {
            let b = bundle(name);
            let f = b.function("f").unwrap();
            report_check(name.into(), experiment_generator_forms(&b, &b.recommended_h, &f, &cfg), None)
        })
        .collect()
}

type Form = fn(&PdmpModel, &TestFunction, &pdmp_core::Skeleton, f64) -> Result<f64>;

fn pathwise(label: &str, b: &ModelBundle, h: &TestFunction, form: Form, paths: u64) -> Check {
    const TOL: f64 = 1e-9;
    let t = 2.0;
    let mut worst = 0.0f64;
    for rep in 0..paths {
        let r = b
            .model
            .simulate_replication(&b.x0, t, SEED + 9, rep)
            .and_then(|s| Ok((exp_martingale(&b.model, h, &s, t)?, form(&b.model, h, &s, t)?)));
        match r {
            Ok((m, alt)) => worst = worst.max((m - alt).abs() / m.abs()),
            Err(e) => return Check::from_error(label, e),
        }
    }
    Check::new(label, worst <= TOL, format!("{paths} paths, max rel dev {worst:.2e} (tol {TOL:.0e})"))
}

fn specializations() -> Vec<Check> {
    let mut checks = Vec::new();
    for name in ["ctmc3", "cramer-lundberg", "aimd"] {
        let b = bundle(name);
        checks.push(pathwise(&format!("Hunt form / {name}"), &b, &b.recommended_h, martingale_hunt_form, 1000));
    }
    let boundary = bundle("boundary-reset");
    let wave = boundary.function("wave").unwrap();
    checks.push(pathwise("Itô form / boundary-reset, h = 2 + sin 4πx", &boundary, &wave, martingale_ito_form, 500));
    let cl = bundle("cramer-lundberg");
    checks.push(pathwise("Itô form / cramer-lundberg", &cl, &cl.recommended_h, martingale_ito_form, 500));
    let ctmc = bundle("ctmc3");
    checks.push(pathwise("step form / ctmc3", &ctmc, &ctmc.recommended_h, martingale_step_form, 1000));
    let epoch = bundle("epoch-chain");
    checks.push(pathwise("step form / epoch-chain", &epoch, &epoch.recommended_h, martingale_step_form, 1000));
    checks
}

fn tilt_invariants() -> Vec<Check> {
    const TOL: f64 = 1e-10;
    let mut checks = Vec::new();
    for name in BUNDLES {
        let b = bundle(name);
        let model = &b.model;
        let h = &b.recommended_h;
        let result = (|| -> Result<Check> {
            let tilted = tilt_model(model, h)?;
            let back = tilt_model(&tilted, &h.reciprocal())?;
            let flow = model.flow.as_ref();
            let same_flow = Arc::ptr_eq(&tilted.flow, &model.flow) && Arc::ptr_eq(&back.flow, &model.flow);
            let (mut offsets_equal, mut forced_ok, mut forced_seen) = (true, true, 0usize);
            let (mut rate_dev, mut atom_dev, mut kernel_dev) = (0.0f64, 0.0f64, 0.0f64);
            for x in probe_states(&b, 30, 3.0) {
                let w = flow.horizon(&x).min(3.0);
                let (a0, a1, a2) = (model.hazard.atoms(&x, w)?, tilted.hazard.atoms(&x, w)?, back.hazard.atoms(&x, w)?);
                offsets_equal &= a0.len() == a1.len()
                    && a0.iter().zip(&a1).all(|(p, q)| p.offset.to_bits() == q.offset.to_bits());
                for ((p, q), r) in a0.iter().zip(&a1).zip(&a2) {
                    if p.value == 1.0 {
                        forced_seen += 1;
                        forced_ok &= q.value == 1.0;
                    }
                    atom_dev = atom_dev.max((p.value - r.value).abs());
                }
                rate_dev = rate_dev.max(rel(model.hazard.rate(&x)?, back.hazard.rate(&x)?));
                if let (Some(m0), Some(m2)) = (model.kernel.masses(&x), back.kernel.masses(&x)) {
                    let (m0, m2) = (m0?, m2?);
                    for ((z0, p0), (z2, p2)) in m0.iter().zip(&m2) {
                        kernel_dev = kernel_dev.max((p0 - p2).abs() + z0.distance(z2));
                    }
                } else {
                    for f in &b.functions {
                        let (q0, q2) = (model.kernel.integrate(&x, f)?, back.kernel.integrate(&x, f)?);
                        kernel_dev = kernel_dev.max(rel(q0, q2));
                    }
                }
            }
            let passed = same_flow && offsets_equal && forced_ok && rate_dev <= TOL && atom_dev <= TOL && kernel_dev <= TOL;
            Ok(Check::new(
                name,
                passed,
                format!(
                    "flow shared {same_flow}, offsets identical {offsets_equal}, forced atoms kept {forced_ok} ({forced_seen} seen); \
                     h then 1/h: rate {rate_dev:.1e}, atoms {atom_dev:.1e}, kernel {kernel_dev:.1e} (tol {TOL:.0e})"
                ),
            ))
        })();
        checks.push(result.unwrap_or_else(|e| Check::from_error(name, e)));
    }
    checks
}

fn determinism() -> Vec<Check> {
    let cfg = RunConfig::new(1.0, 3000, SEED + 10);
    let mut checks = Vec::new();
    for name in ["ctmc3", "cramer-lundberg", "boundary-reset"] {
        let b = bundle(name);
        let h = b.recommended_h.clone();
        let f = b.function("f").unwrap();
        let g = Observable::State(b.function("g").unwrap());
        let runs: Vec<(&str, Box<dyn Fn(RunConfig) -> Result<ExperimentReport>>)> = vec![
            ("simulate", Box::new(|c| experiment_simulate(&b, &c))),
            ("martingale-check", Box::new(|c| experiment_martingale_check(&b, &h, &c))),
            ("dynkin-check", Box::new(|c| experiment_dynkin_check(&b, &f, &c))),
            ("is-consistency", Box::new(|c| experiment_is_consistency(&b, &h, &g, &c, IsOptions::default()))),
            ("reverse-check", Box::new(|c| experiment_reverse_check(&b, &h, &c))),
            ("generator-forms", Box::new(|c| experiment_generator_forms(&b, &h, &f, &c))),
        ];
        let mut identical = true;
        let mut detail = Vec::new();
        for (kind, run) in &runs {
            match (run(cfg.with_workers(1)), run(cfg.with_workers(3)), run(cfg.with_workers(1))) {
                (Ok(a), Ok(b2), Ok(c)) => {
                    let same = a.same_outcome(&b2) && a.same_outcome(&c);
                    identical &= same;
                    if !same {
                        detail.push(format!("{kind} differs"));
                    }
                }
                (a, b2, c) => {
                    identical = false;
                    let e = [a.err(), b2.err(), c.err()].into_iter().flatten().next();
                    detail.push(format!("{kind}: {}", e.map_or("error".into(), |e| e.to_string())));
                }
            }
        }
        let summary = if detail.is_empty() {
            "6 experiments x workers {1, 3, 1}: identical reports".to_string()
        } else {
            detail.join("; ")
        };
        checks.push(Check::new(name, identical, summary));
    }
    checks
}

fn main() {
    let started = Instant::now();
    let criteria = vec![
        run(1, "algebraic core: semigroup, additivity, F multiplicativity", algebraic_core),
        run(2, "martingale property E M^h_t = 1", martingale_property),
        run(3, "CTMC weighted oracle equivalence", oracle_equivalence),
        run(4, "Dynkin check E U^f_t = f(x0)", dynkin),
        run(5, "change-of-measure consistency and rare-event variance", change_of_measure),
        run(6, "pathwise reverse identity", reverse_identity),
        run(7, "three-form tilted generator agreement", generator_forms),
        run(8, "specialization identities (Hunt, Itô, step)", specializations),
        run(9, "tilt invariants", tilt_invariants),
        run(10, "determinism across worker counts", determinism),
    ];
    let mut unexpected = 0;
    for c in &criteria {
        unexpected += c.unexpected_failures();
        println!(
            "{} criterion {:>2}: {} ({:.1}s)",
            if c.passed() { "PASS" } else { "FAIL" },
            c.id,
            c.title,
            c.seconds
        );
        for check in &c.checks {
            let tag = if check.passed { "ok  " } else { "FAIL" };
            println!("       {tag} {}: {}", check.label, check.detail);
            if !check.passed {
                if let Some((_, why)) = KNOWN_CONFLICTS.iter().find(|(l, _)| *l == check.label) {
                    println!("            known conflict: {why}");
                }
            }
        }
    }
    let passed = criteria.iter().filter(|c| c.passed()).count();
    println!(
        "acceptance: {passed}/{} criteria passed, {unexpected} unexpected failure(s), {:.1}s",
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
