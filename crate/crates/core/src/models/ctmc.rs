use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{merge_params, ModelBundle, Oracle};
use crate::engine::PdmpModel;
use crate::error::{Error, Result};
use crate::function::TestFunction;
use crate::jump_law::{DiscreteKernel, HazardLaw};
use crate::sds::{ConstantFlow, State, StateDescriptor};

const ROW_TOL: f64 = 1e-12;
const FK_RTOL: f64 = 1e-10;
const FK_MAX_STEPS: usize = 1 << 22;

fn validate(rates: &[f64], masses: &[Vec<f64>]) -> Result<()> {
    let n = rates.len();
    if n == 0 {
        return Err(Error::BadStochasticMatrix("no states".into()));
    }
    if masses.len() != n {
        return Err(Error::BadStochasticMatrix(format!(
            "{} rates but {} mass rows",
            n,
            masses.len()
        )));
    }
    for (i, (rate, row)) in rates.iter().zip(masses).enumerate() {
        if !(*rate >= 0.0) || !rate.is_finite() {
            return Err(Error::BadStochasticMatrix(format!("rate {rate} of state {i}")));
        }
        if row.len() != n {
            return Err(Error::BadStochasticMatrix(format!("row {i} has {} entries", row.len())));
        }
        if let Some(m) = row.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(Error::BadStochasticMatrix(format!("mass {m} in row {i}")));
        }
        if row[i] != 0.0 {
            return Err(Error::BadStochasticMatrix(format!("self-mass {} in row {i}", row[i])));
        }
        let total: f64 = row.iter().sum();
        let empty_ok = *rate == 0.0 && total == 0.0;
        if !empty_ok && (total - 1.0).abs() > ROW_TOL {
            return Err(Error::BadStochasticMatrix(format!("row {i} sums to {total}")));
        }
    }
    Ok(())
}

/// Constant flow, rate `rates[label]`, jumps to label `j` with mass
/// `masses[label][j]`.
pub fn make_ctmc_model(rates: Vec<f64>, masses: Vec<Vec<f64>>) -> Result<PdmpModel> {
    validate(&rates, &masses)?;
    let n = rates.len() as u32;
    let r = rates.clone();
    Ok(PdmpModel::new(
        format!("ctmc{n}"),
        Arc::new(ConstantFlow),
        HazardLaw::from_rate(move |x| r.get(x.label_index()).copied().unwrap_or(f64::NAN)),
        Arc::new(DiscreteKernel::label_matrix(masses)),
        StateDescriptor::finite(n),
    ))
}

/// `G(i, j) = λᵢ Q(i, j)`, `G(i, i) = -λᵢ Σⱼ Q(i, j)`.
pub fn ctmc_generator_matrix(rates: &[f64], masses: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rates.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -rates[i] * masses[i].iter().sum::<f64>()
        } else {
            rates[i] * masses[i][j]
        }
    })
}

/// A CTMC bundle started in label `x0`. `h` defaults to the constant 1.
pub fn make_ctmc(rates: Vec<f64>, masses: Vec<Vec<f64>>, x0: u32) -> Result<ModelBundle> {
    let model = make_ctmc_model(rates.clone(), masses.clone())?;
    let n = rates.len();
    if x0 as usize >= n {
        return Err(Error::BadParameters(format!("initial label {x0} outside 0..{n}")));
    }
    let mut parameters = BTreeMap::new();
    parameters.insert("x0".into(), f64::from(x0));
    for (i, r) in rates.iter().enumerate() {
        parameters.insert(format!("rate{i}"), *r);
    }
    Ok(ModelBundle {
        name: model.name.clone(),
        x0: State::labelled(x0),
        recommended_h: TestFunction::one().named("h"),
        functions: Vec::new(),
        events: Vec::new(),
        oracle: Some(Arc::new(CtmcOracle::new(
            ctmc_generator_matrix(&rates, &masses),
            x0 as usize,
        ))),
        parameters,
        parameter_notes: "rates >= 0, rows stochastic with zero diagonal".into(),
        model,
    })
}

fn label_param(p: &BTreeMap<String, f64>, key: &str, n: usize) -> Result<u32> {
    let v = p[key];
    if v.fract() != 0.0 || v < 0.0 || v >= n as f64 {
        return Err(Error::BadParameters(format!("{key} = {v} is not a label in 0..{n}")));
    }
    Ok(v as u32)
}

pub(super) fn ctmc3(overrides: &BTreeMap<String, f64>) -> Result<ModelBundle> {
    let p = merge_params(
        "ctmc3",
        &[("x0", 0.0), ("rate0", 1.0), ("rate1", 2.0), ("rate2", 1.5)],
        overrides,
    )?;
    let rates = vec![p["rate0"], p["rate1"], p["rate2"]];
    let masses = vec![
        vec![0.0, 0.3, 0.7],
        vec![0.5, 0.0, 0.5],
        vec![0.6, 0.4, 0.0],
    ];
    let mut b = make_ctmc(rates, masses, label_param(&p, "x0", 3)?)?;
    b.name = "ctmc3".into();
    b.model.name = "ctmc3".into();
    b.recommended_h = TestFunction::label_table(vec![1.0, 2.0, 0.5]).named("h");
    b.functions = vec![
        TestFunction::label_table(vec![0.5, -1.0, 2.0]).named("f"),
        TestFunction::label_table(vec![1.0, 0.0, 0.0]).named("g"),
        TestFunction::label_table(vec![0.0, 1.0, 4.0]).named("q"),
        TestFunction::label_table(vec![1.0, 0.5, 3.0]).named("h2"),
        TestFunction::label_table(vec![2.0, 1.0, 1.0]).named("h3"),
    ];
    b.parameters = p;
    b.parameter_notes = "rate0..rate2 > 0; x0 in {0, 1, 2}; h = (1, 2, 0.5)".into();
    Ok(b)
}

pub(super) fn ctmc2(overrides: &BTreeMap<String, f64>) -> Result<ModelBundle> {
    let p = merge_params("ctmc2", &[("x0", 0.0), ("rate", 1.0)], overrides)?;
    let rate = p["rate"];
    let mut b = make_ctmc(
        vec![rate, rate],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        label_param(&p, "x0", 2)?,
    )?;
    b.name = "ctmc2".into();
    b.model.name = "ctmc2".into();
    b.recommended_h = TestFunction::label_table(vec![1.0, 3.0]).named("h");
    b.functions = vec![
        TestFunction::label_table(vec![1.0, 0.0]).named("f"),
        TestFunction::label_table(vec![0.0, 1.0]).named("g"),
    ];
    b.parameters = p;
    b.parameter_notes = "rate >= 0; x0 in {0, 1}".into();
    Ok(b)
}

/// Matrix-exponential and Feynman–Kac oracle for a finite chain.
#[derive(Debug, Clone)]
pub struct CtmcOracle {
    generator: DMatrix<f64>,
    x0: usize,
}

impl CtmcOracle {
    pub fn new(generator: DMatrix<f64>, x0: usize) -> Self {
        Self { generator, x0 }
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// `e^{tG}`.
    pub fn transition_matrix(&self, t: f64) -> DMatrix<f64> {
        (&self.generator * t).exp()
    }

    fn values(&self, f: &TestFunction) -> DVector<f64> {
        DVector::from_fn(self.generator.nrows(), |i, _| f.at(&State::labelled(i as u32)))
    }
}

impl Oracle for CtmcOracle {
    fn expectation(&self, f: &TestFunction, t: f64) -> Result<f64> {
        Ok((self.transition_matrix(t) * self.values(f))[self.x0])
    }

    fn weighted_expectation(&self, h: &TestFunction, g: &TestFunction, t: f64) -> Result<f64> {
        let hv: Vec<f64> = self.values(h).iter().copied().collect();
        let gv: Vec<f64> = self.values(g).iter().copied().collect();
        ctmc_feynman_kac(&self.generator, &hv, &gv, self.x0, t)
    }
}

fn rk4(a: &DMatrix<f64>, w0: &DVector<f64>, t: f64, steps: usize) -> DVector<f64> {
    let dt = t / steps as f64;
    let mut w = w0.clone();
    for _ in 0..steps {
        let k1 = a * &w;
        let k2 = a * (&w + &k1 * (0.5 * dt));
        let k3 = a * (&w + &k2 * (0.5 * dt));
        let k4 = a * (&w + &k3 * dt);
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    w
}

/// `E_{x0}[g(X_t) M^h_t]` from `v' = (G - V) v`, `v(0) = g h`, with
/// `V = Gh/h`, divided by `h(x0)`. Fourth-order Runge–Kutta, step halving
/// until two successive solutions agree to `1e-10` relative.
pub fn ctmc_feynman_kac(
    generator: &DMatrix<f64>,
    h: &[f64],
    g: &[f64],
    x0: usize,
    t: f64,
) -> Result<f64> {
    let n = generator.nrows();
    if h.len() != n || g.len() != n || x0 >= n {
        return Err(Error::BadParameters("dimension mismatch in Feynman–Kac oracle".into()));
    }
    if let Some(v) = h.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::DomainViolation(format!("h = {v} is not positive")));
    }
    if !(t >= 0.0) {
        return Err(Error::BadParameters(format!("time {t}")));
    }
    let hv = DVector::from_column_slice(h);
    let gh = generator * &hv;
    let mut a = generator.clone();
    for i in 0..n {
        a[(i, i)] -= gh[i] / h[i];
    }
    let w0 = DVector::from_fn(n, |i, _| g[i] * h[i]);
    if t == 0.0 {
        return Ok(w0[x0] / h[x0]);
    }
    let norm = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut steps = ((4.0 * norm * t).ceil() as usize).max(8);
    let mut coarse = rk4(&a, &w0, t, steps);
    while steps <= FK_MAX_STEPS {
        steps *= 2;
        let fine = rk4(&a, &w0, t, steps);
        let scale = fine.amax().max(f64::MIN_POSITIVE);
        let diff = (&fine - &coarse).amax();
        if diff <= FK_RTOL * scale {
            let extrapolated = (&fine * 16.0 - &coarse) / 15.0;
            return Ok(extrapolated[x0] / h[x0]);
        }
        coarse = fine;
    }
    Err(Error::StiffnessFailure(format!(
        "no convergence with {FK_MAX_STEPS} steps (norm {norm}, t {t})"
    )))
}

/// `E_{x0}[g(X_t) M^h_t]` for a CTMC bundle.
pub fn ctmc_feynman_kac_oracle(
    bundle: &ModelBundle,
    h: &TestFunction,
    g: &TestFunction,
    t: f64,
) -> Result<f64> {
    if bundle.model.descriptor.labels.is_none() {
        return Err(Error::UnsupportedState(format!("{} is not a finite chain", bundle.name)));
    }
    bundle.oracle()?.weighted_expectation(h, g, t)
}
