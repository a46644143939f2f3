use std::collections::BTreeMap;
use std::sync::Arc;

use super::{merge_params, ModelBundle, Oracle, PathEvent};
use crate::engine::{PdmpModel, Skeleton};
use crate::error::{Error, Result};
use crate::function::{FunctionForm, TestFunction};
use crate::jump_law::{HazardLaw, ShiftedExponentialKernel};
use crate::sds::{LinearFlow, State, StateDescriptor};

/// `ψ(b) = log E e^{b(X_1 - X_0)} = b c + λ(μ/(μ+b) - 1)`, finite for `b > -μ`.
fn psi(b: f64, c: f64, lambda: f64, mu: f64) -> Option<f64> {
    (mu + b > 0.0).then(|| b * c + lambda * (mu / (mu + b) - 1.0))
}

/// `κ(θ) = -θc + λ(μ/(μ-θ) - 1)`, the exponent with `M^h_t =
/// exp(-θ(X_t - x0) - κ t)` for `h = e^{-θx}`.
pub fn cl_kappa(theta: f64, c: f64, lambda: f64, mu: f64) -> f64 {
    psi(-theta, c, lambda, mu).unwrap_or(f64::INFINITY)
}

/// Positive root `R = μ - λ/c` of `κ(R) = 0`, when the premium exceeds the
/// mean claim outflow.
pub fn adjustment_coefficient(c: f64, lambda: f64, mu: f64) -> Option<f64> {
    let r = mu - lambda / c;
    (r > 0.0).then_some(r)
}

/// First time the reserve is below 0 on `[0, t]`, `+∞` if it stays above.
/// The flow only increases the reserve, so only post-jump states matter.
pub fn ruin_time(s: &Skeleton, t: f64) -> f64 {
    if s.x0.coord(0) < 0.0 {
        return 0.0;
    }
    s.events
        .iter()
        .take_while(|e| e.time <= t)
        .find(|e| e.post.coord(0) < 0.0)
        .map_or(f64::INFINITY, |e| e.time)
}

/// Reserve `x + ct` with exponential claims of rate `μ` arriving at rate `λ`.
/// `h = e^{-θx}`.
pub fn make_cramer_lundberg(c: f64, lambda: f64, mu: f64, u0: f64, theta: f64) -> Result<ModelBundle> {
    if !(c > 0.0) || !(lambda >= 0.0) || !(mu > 0.0) || !c.is_finite() || !lambda.is_finite() {
        return Err(Error::BadParameters(format!(
            "need c > 0, λ >= 0, μ > 0; got c = {c}, λ = {lambda}, μ = {mu}"
        )));
    }
    if !(theta < mu) || !u0.is_finite() {
        return Err(Error::BadParameters(format!("need θ < μ and finite u0; got θ = {theta}, u0 = {u0}")));
    }
    let model = PdmpModel::new(
        "cramer-lundberg",
        Arc::new(LinearFlow::new(vec![c])),
        HazardLaw::constant(lambda),
        Arc::new(ShiftedExponentialKernel::new(mu)?),
        StateDescriptor::continuous(1),
    );
    let ruin = PathEvent {
        value: Arc::new(|_m: &PdmpModel, s: &Skeleton, t: f64| {
            Ok(if ruin_time(s, t) <= t { 1.0 } else { 0.0 })
        }),
        decided_by: Some(Arc::new(|s: &Skeleton, t: f64| ruin_time(s, t).min(t))),
    };
    let parameters: BTreeMap<String, f64> = [
        ("c", c),
        ("lambda", lambda),
        ("mu", mu),
        ("u0", u0),
        ("theta", theta),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Ok(ModelBundle {
        name: "cramer-lundberg".into(),
        model,
        x0: State::scalar(u0),
        recommended_h: TestFunction::exp(0, 1.0, -theta).named("h"),
        functions: vec![
            TestFunction::exp(0, 1.0, -theta).named("f"),
            TestFunction::exp(0, 1.0, -0.25).named("g"),
            TestFunction::polynomial(0, vec![0.0, 1.0]).named("x"),
            TestFunction::polynomial(0, vec![0.0, 0.0, 1.0]).named("x2"),
        ],
        events: vec![("ruin".into(), ruin)],
        oracle: Some(Arc::new(ClOracle {
            c,
            lambda,
            mu,
            u0,
        })),
        parameters,
        parameter_notes: "c > 0, λ >= 0, μ > 0, θ < μ; state space is all of ℝ, ruin is the event min X < 0".into(),
    })
}

pub(super) fn bundle(overrides: &BTreeMap<String, f64>) -> Result<ModelBundle> {
    let p = merge_params(
        "cramer-lundberg",
        &[("c", 1.0), ("lambda", 1.0), ("mu", 2.0), ("u0", 1.0), ("theta", 0.5)],
        overrides,
    )?;
    make_cramer_lundberg(p["c"], p["lambda"], p["mu"], p["u0"], p["theta"])
}

/// Moments and exponential moments of the compound Poisson reserve.
#[derive(Debug, Clone, Copy)]
pub struct ClOracle {
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
    pub u0: f64,
}

impl ClOracle {
    /// `E e^{b X_t}`.
    pub fn exp_moment(&self, b: f64, t: f64) -> Result<f64> {
        let p = psi(b, self.c, self.lambda, self.mu).ok_or_else(|| {
            Error::MissingOracle(format!("E exp({b} X_t) is infinite for μ = {}", self.mu))
        })?;
        Ok((b * self.u0 + p * t).exp())
    }

    fn exp_sum(&self, terms: &[(f64, f64)], shift: f64, t: f64) -> Result<f64> {
        terms
            .iter()
            .map(|(a, b)| Ok(a * self.exp_moment(b + shift, t)?))
            .sum()
    }
}

impl Oracle for ClOracle {
    fn expectation(&self, f: &TestFunction, t: f64) -> Result<f64> {
        match f.form() {
            Some(FunctionForm::Constant(c)) => Ok(*c),
            Some(FunctionForm::ExpSum { coord: 0, terms }) => self.exp_sum(terms, 0.0, t),
            Some(FunctionForm::Polynomial { coord: 0, coeffs }) if coeffs.len() <= 3 => {
                let mean = self.u0 + (self.c - self.lambda / self.mu) * t;
                let second = mean * mean + 2.0 * self.lambda * t / (self.mu * self.mu);
                let m = [1.0, mean, second];
                Ok(coeffs.iter().zip(m).map(|(a, m)| a * m).sum())
            }
            _ => Err(Error::MissingOracle(format!("no closed form for {}", f.name()))),
        }
    }

    fn weighted_expectation(&self, h: &TestFunction, g: &TestFunction, t: f64) -> Result<f64> {
        let theta = match h.form() {
            Some(FunctionForm::Constant(_)) => 0.0,
            Some(FunctionForm::ExpSum { coord: 0, terms }) if terms.len() == 1 => -terms[0].1,
            _ => return Err(Error::MissingOracle(format!("h = {} is not exponential", h.name()))),
        };
        let kappa = cl_kappa(theta, self.c, self.lambda, self.mu);
        let scale = (theta * self.u0 - kappa * t).exp();
        let inner = match g.form() {
            Some(FunctionForm::Constant(c)) => c * self.exp_moment(-theta, t)?,
            Some(FunctionForm::ExpSum { coord: 0, terms }) => self.exp_sum(terms, -theta, t)?,
            _ => return Err(Error::MissingOracle(format!("no closed form for {}", g.name()))),
        };
        Ok(scale * inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_at_reference_parameters() {
        assert!((cl_kappa(0.5, 1.0, 1.0, 2.0) + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(adjustment_coefficient(1.0, 1.0, 2.0), Some(1.0));
        assert!(cl_kappa(1.0, 1.0, 1.0, 2.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_expectation_of_one_is_one() {
        let b = bundle(&BTreeMap::new()).unwrap();
        let o = b.oracle().unwrap();
        let v = o.weighted_expectation(&b.recommended_h, &TestFunction::one(), 2.5).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_cramer_lundberg(0.0, 1.0, 2.0, 1.0, 0.5).is_err());
        assert!(make_cramer_lundberg(1.0, 1.0, 2.0, 1.0, 2.0).is_err());
    }
}
