use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{merge_params, ModelBundle, Oracle};
use crate::engine::PdmpModel;
use crate::error::{Error, Result};
use crate::function::{FunctionForm, TestFunction};
use crate::jump_law::{DiscreteKernel, HazardLaw};
use crate::sds::{LinearFlow, State, StateDescriptor};

/// Loss intensity of the AIMD window.
#[derive(Clone)]
pub enum LossRate {
    Constant(f64),
    Custom(Arc<dyn Fn(&State) -> f64 + Send + Sync>),
}

/// Window growing at `growth`, cut to `cut · x` at loss events. `h = e^{ηx}`.
pub fn make_aimd(growth: f64, cut: f64, loss: LossRate, x0: f64, eta: f64) -> Result<ModelBundle> {
    if !(cut > 0.0 && cut < 1.0) {
        return Err(Error::BadParameters(format!("cut factor {cut} must lie in (0, 1)")));
    }
    if !(growth >= 0.0) || !growth.is_finite() || !(x0 > 0.0) {
        return Err(Error::BadParameters(format!("growth = {growth}, x0 = {x0}")));
    }
    let (hazard, oracle): (HazardLaw, Option<Arc<dyn Oracle>>) = match &loss {
        LossRate::Constant(l) => {
            if !(*l >= 0.0) {
                return Err(Error::BadParameters(format!("loss rate {l}")));
            }
            (
                HazardLaw::constant(*l),
                Some(Arc::new(AimdOracle {
                    growth,
                    cut,
                    loss: *l,
                    x0,
                })),
            )
        }
        LossRate::Custom(f) => {
            let f = f.clone();
            (HazardLaw::from_rate(move |x| f(x)), None)
        }
    };
    let model = PdmpModel::new(
        "aimd",
        Arc::new(LinearFlow::new(vec![growth])),
        hazard,
        Arc::new(DiscreteKernel::degenerate(move |y| State::scalar(cut * y.coord(0)))),
        StateDescriptor::continuous(1),
    );
    let mut parameters: BTreeMap<String, f64> =
        [("growth", growth), ("cut", cut), ("x0", x0), ("eta", eta)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
    if let LossRate::Constant(l) = loss {
        parameters.insert("loss".into(), l);
    }
    Ok(ModelBundle {
        name: "aimd".into(),
        model,
        x0: State::scalar(x0),
        recommended_h: TestFunction::exp(0, 1.0, eta).named("h"),
        functions: vec![
            TestFunction::polynomial(0, vec![0.0, 1.0]).named("f"),
            TestFunction::polynomial(0, vec![0.0, 0.0, 1.0]).named("g"),
            TestFunction::polynomial(0, vec![0.0, 0.0, 0.0, 1.0]).named("x3"),
        ],
        events: Vec::new(),
        oracle,
        parameters,
        parameter_notes: "growth >= 0, 0 < cut < 1, loss >= 0, x0 > 0".into(),
    })
}

pub(super) fn bundle(overrides: &BTreeMap<String, f64>) -> Result<ModelBundle> {
    let p = merge_params(
        "aimd",
        &[("growth", 1.0), ("cut", 0.5), ("loss", 1.0), ("x0", 1.0), ("eta", 0.3)],
        overrides,
    )?;
    make_aimd(p["growth"], p["cut"], LossRate::Constant(p["loss"]), p["x0"], p["eta"])
}

/// Moments from `m_k' = k g m_{k-1} - λ(1 - cut^k) m_k`, solved by a
/// matrix exponential.
#[derive(Debug, Clone, Copy)]
pub struct AimdOracle {
    pub growth: f64,
    pub cut: f64,
    pub loss: f64,
    pub x0: f64,
}

impl AimdOracle {
    /// `E X_t^k` for `k = 0..=degree`.
    pub fn moments(&self, degree: usize, t: f64) -> Vec<f64> {
        let n = degree + 1;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -self.loss * (1.0 - self.cut.powi(i as i32))
            } else if j + 1 == i {
                i as f64 * self.growth
            } else {
                0.0
            }
        });
        let m0 = DVector::from_fn(n, |k, _| self.x0.powi(k as i32));
        ((a * t).exp() * m0).iter().copied().collect()
    }
}

impl Oracle for AimdOracle {
    fn expectation(&self, f: &TestFunction, t: f64) -> Result<f64> {
        match f.form() {
            Some(FunctionForm::Constant(c)) => Ok(*c),
            Some(FunctionForm::Polynomial { coord: 0, coeffs }) => {
                let m = self.moments(coeffs.len().saturating_sub(1), t);
                Ok(coeffs.iter().zip(m).map(|(a, m)| a * m).sum())
            }
            _ => Err(Error::MissingOracle(format!("no moment formula for {}", f.name()))),
        }
    }
}
