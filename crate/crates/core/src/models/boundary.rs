use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use super::{merge_params, ModelBundle, Oracle};
use crate::engine::PdmpModel;
use crate::error::{Error, Result};
use crate::function::TestFunction;
use crate::jump_law::{DensityKernel, HazardLaw};
use crate::sds::{Atom, Flow, LinearFlow, State, StateDescriptor};

/// Unit-speed motion on `[0, 1)` with jumps at rate `λ0`, a forced jump on
/// hitting 1 and resets uniform on `[0, reset_hi)`. `h = e^{ηx}`.
pub fn make_boundary_reset(lambda0: f64, x0: f64, reset_hi: f64, eta: f64) -> Result<ModelBundle> {
    if !(lambda0 >= 0.0) || !lambda0.is_finite() {
        return Err(Error::BadParameters(format!("λ0 = {lambda0}")));
    }
    if !(0.0..1.0).contains(&x0) || !(reset_hi > 0.0 && reset_hi <= 1.0) {
        return Err(Error::BadParameters(format!("x0 = {x0}, reset_hi = {reset_hi}")));
    }
    let flow = Arc::new(LinearFlow::new(vec![1.0]).with_wall(0, 1.0));
    let f2 = flow.clone();
    let hazard = HazardLaw::constant(lambda0).with_atoms(move |x, w| {
        let c = f2.horizon(x);
        Ok(if c > 0.0 && c <= w {
            vec![Atom::new(c, 1.0)]
        } else {
            Vec::new()
        })
    });
    let model = PdmpModel::new(
        "boundary-reset",
        flow,
        hazard,
        Arc::new(DensityKernel::uniform_reset(0.0, reset_hi)),
        StateDescriptor::continuous(1),
    );
    let wave = TestFunction::new(|x| 2.0 + (4.0 * PI * x.coord(0)).sin())
        .with_gradient(|x| vec![4.0 * PI * (4.0 * PI * x.coord(0)).cos()])
        .with_range(1.0, 3.0)
        .named("wave");
    let parameters: BTreeMap<String, f64> =
        [("lambda0", lambda0), ("x0", x0), ("reset_hi", reset_hi), ("eta", eta)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
    let (lo, hi) = if eta >= 0.0 { (1.0, eta.exp()) } else { (eta.exp(), 1.0) };
    Ok(ModelBundle {
        name: "boundary-reset".into(),
        model,
        x0: State::scalar(x0),
        recommended_h: TestFunction::exp(0, 1.0, eta).with_range(lo, hi).named("h"),
        functions: vec![
            TestFunction::polynomial(0, vec![0.0, 1.0]).named("f"),
            TestFunction::polynomial(0, vec![0.0, 0.0, 1.0]).named("g"),
            TestFunction::exp(0, 1.0, -1.0).named("e"),
            wave,
        ],
        events: Vec::new(),
        oracle: Some(Arc::new(BoundaryOracle {
            lambda0,
            x0,
            reset_hi,
        })),
        parameters,
        parameter_notes: "λ0 >= 0, 0 <= x0 < 1, 0 < reset_hi <= 1; the wave function \
                          2 + sin(4πx) has Qh = h(1) when reset_hi = 0.5"
            .into(),
    })
}

pub(super) fn bundle(overrides: &BTreeMap<String, f64>) -> Result<ModelBundle> {
    let p = merge_params(
        "boundary-reset",
        &[("lambda0", 1.0), ("x0", 0.3), ("reset_hi", 0.5), ("eta", 0.8)],
        overrides,
    )?;
    make_boundary_reset(p["lambda0"], p["x0"], p["reset_hi"], p["eta"])
}

/// Backward equation `u_t = u_x + λ0(Qu - u)`, `u(t, 1) = Qu(t)`, on a grid
/// whose time step equals its space step, so the transport is an exact
/// shift. Two resolutions are combined by Richardson extrapolation.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryOracle {
    pub lambda0: f64,
    pub x0: f64,
    pub reset_hi: f64,
}

const BASE_CELLS: usize = 4000;

fn grid_index(v: f64, n: usize, what: &str) -> Result<usize> {
    let k = v * n as f64;
    if (k - k.round()).abs() > 1e-9 {
        return Err(Error::MissingOracle(format!("{what} = {v} is not on the 1/{n} grid")));
    }
    Ok(k.round() as usize)
}

impl BoundaryOracle {
    fn solve(&self, f: &TestFunction, t: f64, n: usize) -> Result<f64> {
        let steps = grid_index(t, n, "t")?;
        let i0 = grid_index(self.x0, n, "x0")?;
        let m = grid_index(self.reset_hi, n, "reset_hi")?;
        let dx = 1.0 / n as f64;
        let stay = (-self.lambda0 * dx).exp();
        let mut u: Vec<f64> = (0..=n).map(|i| f.at(&State::scalar(i as f64 * dx))).collect();
        let mut next = vec![0.0; n + 1];
        for _ in 0..steps {
            let trapezoid = (u[1..m].iter().sum::<f64>() + 0.5 * (u[0] + u[m])) * dx;
            let qu = trapezoid / self.reset_hi;
            u[n] = qu;
            for i in 0..n {
                next[i] = stay * u[i + 1] + (1.0 - stay) * qu;
            }
            next[n] = qu;
            std::mem::swap(&mut u, &mut next);
        }
        Ok(u[i0])
    }

    /// Solution at `n` cells, without extrapolation.
    pub fn at_resolution(&self, f: &TestFunction, t: f64, n: usize) -> Result<f64> {
        self.solve(f, t, n)
    }
}

impl Oracle for BoundaryOracle {
    fn expectation(&self, f: &TestFunction, t: f64) -> Result<f64> {
        let coarse = self.solve(f, t, BASE_CELLS)?;
        let fine = self.solve(f, t, 2 * BASE_CELLS)?;
        Ok(2.0 * fine - coarse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_without_rate() {
        let b = make_boundary_reset(0.0, 0.3, 0.5, 0.8).unwrap();
        let o = b.oracle().unwrap();
        let f = b.function("f").unwrap();
        // no jump before 0.7, so X_0.5 = 0.8
        assert!((o.expectation(&f, 0.5).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn wave_function_is_balanced_at_the_wall() {
        let b = bundle(&BTreeMap::new()).unwrap();
        let w = b.function("wave").unwrap();
        let qh = b.model.kernel.integrate(&State::scalar(1.0), &w).unwrap();
        assert!((qh - w.at(&State::scalar(1.0))).abs() < 1e-10);
    }

    #[test]
    fn survival_is_zero_at_the_wall() {
        let b = bundle(&BTreeMap::new()).unwrap();
        let flow = b.model.flow.as_ref();
        let s = b.model.hazard.survival(flow, &b.x0, 0.7).unwrap();
        assert_eq!(s, 0.0);
    }
}
