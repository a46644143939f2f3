use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{merge_params, ModelBundle, Oracle};
use crate::engine::PdmpModel;
use crate::error::{Error, Result};
use crate::function::TestFunction;
use crate::jump_law::{DiscreteKernel, HazardLaw};
use crate::sds::{Atom, LinearFlow, State, StateDescriptor};

/// Slack when locating the next integer crossing of the clock.
const CLOCK_SLACK: f64 = 1e-9;

/// A label chain driven by a unit-speed clock: at each integer time the
/// chain leaves label `ℓ` with probability `deltas[ℓ]` and moves by
/// `masses`. No continuous hazard, so every jump sits on a hazard atom.
pub fn make_epoch_chain(deltas: Vec<f64>, masses: Vec<Vec<f64>>, x0: u32) -> Result<ModelBundle> {
    let n = deltas.len();
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(Error::BadParameters(format!("atom value {d} outside (0, 1]")));
    }
    if masses.len() != n || masses.iter().enumerate().any(|(i, r)| r.len() != n || r[i] != 0.0) {
        return Err(Error::BadStochasticMatrix("need a square matrix with zero diagonal".into()));
    }
    if let Some((i, s)) = masses
        .iter()
        .map(|r| r.iter().sum::<f64>())
        .enumerate()
        .find(|(_, s)| (s - 1.0).abs() > 1e-12)
    {
        return Err(Error::BadStochasticMatrix(format!("row {i} sums to {s}")));
    }
    if x0 as usize >= n {
        return Err(Error::BadParameters(format!("initial label {x0} outside 0..{n}")));
    }
    let d = deltas.clone();
    let hazard = HazardLaw::zero().with_atoms(move |x, w| {
        let clock = x.coord(0);
        let delta = d[x.label_index()];
        let mut k = (clock + CLOCK_SLACK).floor() + 1.0;
        let mut atoms = Vec::new();
        while k - clock <= w {
            atoms.push(Atom::new(k - clock, delta));
            k += 1.0;
        }
        Ok(atoms)
    });
    let model = PdmpModel::new(
        "epoch-chain",
        Arc::new(LinearFlow::new(vec![1.0])),
        hazard,
        Arc::new(DiscreteKernel::label_matrix(masses.clone())),
        StateDescriptor {
            dim: 1,
            labels: Some(n as u32),
        },
    );
    let mut parameters = BTreeMap::new();
    parameters.insert("x0".into(), f64::from(x0));
    for (i, d) in deltas.iter().enumerate() {
        parameters.insert(format!("delta{i}"), *d);
    }
    Ok(ModelBundle {
        name: "epoch-chain".into(),
        model,
        x0: State::new(vec![0.0]).with_label(x0),
        recommended_h: TestFunction::one().named("h"),
        functions: Vec::new(),
        events: Vec::new(),
        oracle: Some(Arc::new(EpochOracle {
            deltas,
            masses: DMatrix::from_fn(n, n, |i, j| masses[i][j]),
            x0: x0 as usize,
        })),
        parameters,
        parameter_notes: "atom values in (0, 1], rows stochastic with zero diagonal".into(),
    })
}

pub(super) fn bundle(overrides: &BTreeMap<String, f64>) -> Result<ModelBundle> {
    let p = merge_params(
        "epoch-chain",
        &[("x0", 0.0), ("delta0", 0.6), ("delta1", 0.9), ("delta2", 1.0)],
        overrides,
    )?;
    let x0 = p["x0"];
    if x0.fract() != 0.0 || !(0.0..3.0).contains(&x0) {
        return Err(Error::BadParameters(format!("x0 = {x0} is not a label in 0..3")));
    }
    let mut b = make_epoch_chain(
        vec![p["delta0"], p["delta1"], p["delta2"]],
        vec![
            vec![0.0, 0.3, 0.7],
            vec![0.5, 0.0, 0.5],
            vec![0.6, 0.4, 0.0],
        ],
        x0 as u32,
    )?;
    b.recommended_h = TestFunction::label_table(vec![1.0, 2.0, 0.5]).named("h");
    b.functions = vec![
        TestFunction::label_table(vec![0.5, -1.0, 2.0]).named("f"),
        TestFunction::label_table(vec![1.0, 0.0, 0.0]).named("g"),
        TestFunction::label_table(vec![0.0, 1.0, 4.0]).named("q"),
    ];
    b.parameters = p;
    Ok(b)
}

/// Powers of the one-epoch transition matrix `I - D + D P`.
#[derive(Debug, Clone)]
pub struct EpochOracle {
    deltas: Vec<f64>,
    masses: DMatrix<f64>,
    x0: usize,
}

impl EpochOracle {
    fn step_matrix(&self) -> DMatrix<f64> {
        let n = self.deltas.len();
        DMatrix::from_fn(n, n, |i, j| {
            let stay = if i == j { 1.0 - self.deltas[i] } else { 0.0 };
            stay + self.deltas[i] * self.masses[(i, j)]
        })
    }

    fn epochs(t: f64) -> usize {
        (t + CLOCK_SLACK).floor().max(0.0) as usize
    }

    fn values(&self, f: &TestFunction, t: f64) -> DVector<f64> {
        DVector::from_fn(self.deltas.len(), |i, _| {
            f.at(&State::new(vec![t]).with_label(i as u32))
        })
    }
}

impl Oracle for EpochOracle {
    fn expectation(&self, f: &TestFunction, t: f64) -> Result<f64> {
        let step = self.step_matrix();
        let mut v = self.values(f, t);
        for _ in 0..Self::epochs(t) {
            v = &step * v;
        }
        Ok(v[self.x0])
    }

    /// Each crossing from `ℓ` contributes `1/(1 + δ_ℓ(Ph - h)(ℓ)/h(ℓ))`.
    fn weighted_expectation(&self, h: &TestFunction, g: &TestFunction, t: f64) -> Result<f64> {
        let step = self.step_matrix();
        let hv = self.values(h, t);
        if let Some(v) = hv.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::DomainViolation(format!("h = {v} is not positive")));
        }
        let ph = &self.masses * &hv;
        let mut weighted = step.clone();
        for i in 0..hv.len() {
            let factor = 1.0 + self.deltas[i] * (ph[i] - hv[i]) / hv[i];
            if !(factor > 0.0) {
                return Err(Error::DomainViolation(format!("factor {factor} at label {i}")));
            }
            weighted.row_mut(i).scale_mut(1.0 / factor);
        }
        let mut v = self.values(g, t).component_mul(&hv);
        for _ in 0..Self::epochs(t) {
            v = &weighted * v;
        }
        Ok(v[self.x0] / hv[self.x0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_at_integer_clock_times() {
        let b = bundle(&BTreeMap::new()).unwrap();
        let atoms = b.model.hazard.atoms(&State::new(vec![0.25]).with_label(1), 2.5).unwrap();
        let offsets: Vec<f64> = atoms.iter().map(|a| a.offset).collect();
        assert_eq!(offsets, vec![0.75, 1.75]);
        assert!(atoms.iter().all(|a| a.value == 0.9));
        let after = b.model.hazard.atoms(&State::new(vec![1.0]).with_label(0), 1.0).unwrap();
        assert_eq!(after.len(), 1);
        assert_eq!(after[0].offset, 1.0);
    }

    #[test]
    fn weighted_oracle_of_one_is_one() {
        let b = bundle(&BTreeMap::new()).unwrap();
        let o = b.oracle().unwrap();
        let v = o.weighted_expectation(&b.recommended_h, &TestFunction::one(), 3.5).unwrap();
        assert!((v - 1.0).abs() < 1e-13);
    }
}
