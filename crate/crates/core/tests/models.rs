use pdmp_core::harness::{experiment_simulate, RunConfig};
use pdmp_core::models::{build_default, cl_kappa, make_cramer_lundberg, make_ctmc, MODEL_NAMES};
use pdmp_core::tilting::{check_good_function, exp_martingale, tilt_model, ExpMartingale};
use pdmp_core::{State, TestFunction};

#[test]
fn cramer_lundberg_martingale_has_closed_form() {
    let (c, lambda, mu, u0, theta) = (1.0, 1.0, 2.0, 1.0, 0.5);
    let b = make_cramer_lundberg(c, lambda, mu, u0, theta).unwrap();
    let kappa = cl_kappa(theta, c, lambda, mu);
    let m = ExpMartingale::new(&b.model, &b.recommended_h);
    let t = 3.0;
    for rep in 0..300 {
        let s = b.model.simulate_replication(&b.x0, t, 5, rep).unwrap();
        let x_t = s.path_state(&b.model, t).unwrap().coord(0);
        let expected = (-theta * (x_t - u0) - kappa * t).exp();
        let got = m.value(&b.model, &s, t).unwrap();
        assert!((got - expected).abs() <= 1e-8 * expected, "rep {rep}: {got} vs {expected}");
    }
}

#[test]
fn tilted_cramer_lundberg_is_cramer_lundberg() {
    let (lambda, mu, theta) = (1.0, 2.0, 0.5);
    let b = make_cramer_lundberg(1.0, lambda, mu, 1.0, theta).unwrap();
    let tilted = tilt_model(&b.model, &b.recommended_h).unwrap();
    let x = TestFunction::polynomial(0, vec![0.0, 1.0]);
    for y in [-0.5, 0.0, 1.0, 4.0] {
        let s = State::scalar(y);
        let rate = tilted.hazard.rate(&s).unwrap();
        assert!((rate - lambda * mu / (mu - theta)).abs() < 1e-10);
        let mean = tilted.kernel.integrate(&s, &x).unwrap();
        assert!((mean - (y - 1.0 / (mu - theta))).abs() < 1e-8, "{mean}");
    }
}

#[test]
fn two_state_chain_matches_closed_form() {
    let b = make_ctmc(vec![2.0, 3.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]], 0).unwrap();
    let oracle = b.oracle().unwrap();
    let ind = TestFunction::label_table(vec![1.0, 0.0]);
    for t in [0.1, 0.7, 2.0] {
        let p00 = 0.6 + 0.4 * (-5.0f64 * t).exp();
        assert!((oracle.expectation(&ind, t).unwrap() - p00).abs() < 1e-12);
    }
}

#[test]
fn recommended_functions_are_good() {
    for name in MODEL_NAMES {
        let b = build_default(name).unwrap();
        let r = check_good_function(&b.model, &b.recommended_h, &b.x0, 1.0, 20);
        assert!(r.positivity_ok, "{name}: {:?}", r.issues);
        assert!(r.H > 0.0 && r.H_minus > 0.0, "{name}");
        assert!(r.issues.is_empty(), "{name}: {:?}", r.issues);
    }
}

#[test]
fn unit_function_gives_unit_martingale() {
    for name in MODEL_NAMES {
        let b = build_default(name).unwrap();
        let one = TestFunction::one();
        for rep in 0..20 {
            let s = b.model.simulate_replication(&b.x0, 2.0, 3, rep).unwrap();
            assert!((exp_martingale(&b.model, &one, &s, 2.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn simulated_means_match_oracles() {
    let cfg = RunConfig::new(1.0, 20_000, 11);
    for name in MODEL_NAMES {
        let b = build_default(name).unwrap();
        let r = experiment_simulate(&b, &cfg).unwrap();
        assert!(!r.verdicts.is_empty(), "{name}");
        for v in &r.verdicts {
            assert!(v.passed, "{name}: {} = {} vs {}", v.criterion, v.value, v.threshold);
        }
    }
}

#[test]
fn unknown_models_and_parameters_are_rejected() {
    assert!(build_default("nope").is_err());
    let params = [("bogus".to_string(), 1.0)].into_iter().collect();
    assert!(pdmp_core::models::build("ctmc3", &params).is_err());
    assert!(make_cramer_lundberg(-1.0, 1.0, 2.0, 1.0, 0.5).is_err());
}
