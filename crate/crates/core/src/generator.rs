//! The measure-valued generator `𝒜f` as an additive functional, the
//! integrability condition of its domain, the Dynkin process
//! `U^f = f(X) - L(𝒜f)` and the carré du champ `⟨f, h⟩_𝒜`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{PdmpModel, Skeleton};
use crate::error::{Error, Result};
use crate::function::TestFunction;
use crate::sds::quadrature::{integrate, DEFAULT_MAX_EVALS};
use crate::sds::{offsets_coincide, Atom, Flow, PathFunctional, State, DEFAULT_TOL};

/// Value of the atom at offset `s` in a sorted atom list, 0 if absent.
pub fn jump_at(atoms: &[Atom], s: f64) -> f64 {
    atoms
        .iter()
        .find(|a| offsets_coincide(a.offset, s))
        .map_or(0.0, |a| a.value)
}

/// Sorted union of atom offsets.
pub fn union_offsets(lists: &[&[Atom]]) -> Vec<f64> {
    let mut offsets: Vec<f64> = lists.iter().flat_map(|l| l.iter().map(|a| a.offset)).collect();
    offsets.sort_by(f64::total_cmp);
    offsets.dedup_by(|a, b| offsets_coincide(*a, *b));
    offsets
}

/// `f(φ_x(s)-) = f(φ_x(s)) - Δf`.
pub fn left_value(f: &TestFunction, y: &State, jumps: &[Atom], s: f64) -> f64 {
    f.at(y) - jump_at(jumps, s)
}

/// `𝒜f`: density `𝒳f + λ(Qf - f)` and atoms `Δf + δ(Qf - f)` at the union
/// of the path-jump offsets of `f` and the hazard-atom offsets.
pub fn generator_apply(model: &PdmpModel, f: &TestFunction) -> PathFunctional {
    let (flow, hazard, kernel) = (model.flow.clone(), model.hazard.clone(), model.kernel.clone());
    let g = f.clone();
    let density = move |x: &State| -> Result<f64> {
        let d = g.path_derivative(flow.as_ref(), x);
        let lambda = hazard.rate(x)?;
        if lambda == 0.0 {
            return Ok(d);
        }
        Ok(d + lambda * (kernel.integrate(x, &g)? - g.at(x)))
    };
    let out = PathFunctional::fallible(density);
    if f.is_path_continuous() && !model.hazard.has_atoms() {
        return out;
    }
    let (flow, hazard, kernel) = (model.flow.clone(), model.hazard.clone(), model.kernel.clone());
    let g = f.clone();
    out.with_atoms(move |x, w| {
        let fj = g.path_jumps(flow.as_ref(), x, w);
        let hz = hazard.atoms(x, w)?;
        union_offsets(&[&fj, &hz])
            .into_iter()
            .map(|s| {
                let y = flow.eval(x, s)?;
                let delta = jump_at(&hz, s);
                let mut v = jump_at(&fj, s);
                if delta > 0.0 {
                    v += delta * (kernel.integrate(&y, &g)? - g.at(&y));
                }
                Ok(Atom::new(s, v))
            })
            .collect()
    })
}

/// Outcome of the domain integrability check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    /// `∫_(0,T] ∫ |f(y) - f(φ_x(s))| Q(φ_x(s), dy) Λ(x, ds)`.
    pub value: f64,
    pub finite: bool,
    /// The window actually used, `min(T, c(x))`.
    pub window: f64,
    pub error: Option<String>,
}

/// Evaluate the domain integral of `f` from `x` over `(0, T]`, clamped to
/// the horizon. Failures are reported, not raised.
pub fn check_domain(model: &PdmpModel, f: &TestFunction, x: &State, horizon: f64) -> DomainReport {
    let flow = model.flow.as_ref();
    let window = horizon.min(flow.horizon(x));
    let inner = |y: &State| -> Result<f64> {
        let fy = f.at(y);
        let g = f.clone();
        let dev = TestFunction::new(move |z| (g.at(z) - fy).abs());
        model.kernel.integrate(y, &dev)
    };
    let run = || -> Result<f64> {
        if window <= 0.0 {
            return Ok(0.0);
        }
        let atoms = model.hazard.atoms(x, window)?;
        let breaks: Vec<f64> = atoms.iter().map(|a| a.offset).collect();
        let continuous = if flow.is_stationary(x) {
            let lambda = model.hazard.rate(x)?;
            if lambda == 0.0 { 0.0 } else { lambda * inner(x)? * window }
        } else {
            integrate(
                |s| {
                    let y = flow.eval(x, s)?;
                    let lambda = model.hazard.rate(&y)?;
                    if lambda == 0.0 { Ok(0.0) } else { Ok(lambda * inner(&y)?) }
                },
                0.0,
                window,
                &breaks,
                DEFAULT_TOL,
                DEFAULT_MAX_EVALS,
            )?
            .value
        };
        let mut total = continuous;
        for a in &atoms {
            total += a.value * inner(&flow.eval(x, a.offset)?)?;
        }
        Ok(total)
    };
    match run() {
        Ok(value) => DomainReport {
            value,
            finite: value.is_finite(),
            window,
            error: None,
        },
        Err(e) => DomainReport {
            value: f64::NAN,
            finite: false,
            window,
            error: Some(e.to_string()),
        },
    }
}

/// `U^f_t = f(X_t) - L(𝒜f)_t`.
pub fn dynkin_process(model: &PdmpModel, f: &TestFunction, skeleton: &Skeleton, t: f64) -> Result<f64> {
    dynkin_with(&generator_apply(model, f), model, f, skeleton, t)
}

/// [`dynkin_process`] with `𝒜f` already built.
pub fn dynkin_with(
    af: &PathFunctional,
    model: &PdmpModel,
    f: &TestFunction,
    skeleton: &Skeleton,
    t: f64,
) -> Result<f64> {
    Ok(f.at(&skeleton.path_state(model, t)?) - skeleton.eval_l(af, model, t)?)
}

/// `Σₙ |f(X_{τₙ}) - f(X_{τₙ}⁻)|` up to `t`, the empirical side of the
/// martingale condition.
pub fn jump_variation(f: &TestFunction, skeleton: &Skeleton, t: f64) -> f64 {
    skeleton
        .events
        .iter()
        .take_while(|e| e.time <= t)
        .map(|e| (f.at(&e.post) - f.at(&e.pre)).abs())
        .sum()
}

/// `⟨f, h⟩_𝒜 = 𝒜(fh) - f(-)𝒜h - h(-)𝒜f - [𝒜f, 𝒜h]`.
pub fn carre_du_champ(model: &PdmpModel, f: &TestFunction, h: &TestFunction) -> PathFunctional {
    let af = Arc::new(generator_apply(model, f));
    let ah = Arc::new(generator_apply(model, h));
    let afh = Arc::new(generator_apply(model, &f.product(h)));
    let (f1, h1) = (f.clone(), h.clone());
    let (a1, b1, c1) = (af.clone(), ah.clone(), afh.clone());
    let density = move |x: &State| -> Result<f64> {
        Ok(c1.density_at(x)? - f1.at(x) * b1.density_at(x)? - h1.at(x) * a1.density_at(x)?)
    };
    let out = PathFunctional::fallible(density);
    if !(af.has_atoms() || ah.has_atoms() || afh.has_atoms()) {
        return out;
    }
    let flow = model.flow.clone();
    let (f2, h2) = (f.clone(), h.clone());
    out.with_atoms(move |x, w| {
        let fl: &dyn Flow = flow.as_ref();
        let (da, db, dc) = (af.atoms_in(x, w)?, ah.atoms_in(x, w)?, afh.atoms_in(x, w)?);
        let (fj, hj) = (f2.path_jumps(fl, x, w), h2.path_jumps(fl, x, w));
        union_offsets(&[&da, &db, &dc])
            .into_iter()
            .map(|s| {
                let y = fl.eval(x, s)?;
                let (jf, jh) = (jump_at(&da, s), jump_at(&db, s));
                let v = jump_at(&dc, s)
                    - left_value(&f2, &y, &fj, s) * jh
                    - left_value(&h2, &y, &hj, s) * jf
                    - jf * jh;
                Ok(Atom::new(s, v))
            })
            .collect()
    })
}

/// Evaluate `a(x, t) - a(x, s)` with a check on the window.
pub fn interval_measure(
    a: &PathFunctional,
    flow: &dyn Flow,
    x: &State,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<f64> {
    if !(s <= t) {
        return Err(Error::BadParameters(format!("interval ({s}, {t}]")));
    }
    a.interval(flow, x, s, t, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump_law::{DiscreteKernel, HazardLaw};
    use crate::sds::{ConstantFlow, StateDescriptor};

    fn ctmc() -> PdmpModel {
        let rates = [1.0, 2.0, 1.5];
        PdmpModel::new(
            "ctmc",
            Arc::new(ConstantFlow),
            HazardLaw::from_rate(move |x| rates[x.label_index()]),
            Arc::new(DiscreteKernel::label_matrix(vec![
                vec![0.0, 0.3, 0.7],
                vec![0.5, 0.0, 0.5],
                vec![0.6, 0.4, 0.0],
            ])),
            StateDescriptor::finite(3),
        )
    }

    #[test]
    fn generator_of_constant_is_zero() {
        let m = ctmc();
        let a = generator_apply(&m, &TestFunction::one());
        for i in 0..3 {
            assert_eq!(a.density_at(&State::labelled(i)).unwrap(), 0.0);
        }
    }

    #[test]
    fn generator_matches_matrix_row() {
        let m = ctmc();
        let f = TestFunction::label_table(vec![0.5, -1.0, 2.0]);
        let a = generator_apply(&m, &f);
        // row 1: 2 * (0.5*0.5 + 0.5*2 - (-1))
        let v = a.density_at(&State::labelled(1)).unwrap();
        assert!((v - 2.0 * (0.25 + 1.0 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn carre_du_champ_density_and_symmetry() {
        let m = ctmc();
        let f = TestFunction::label_table(vec![0.5, -1.0, 2.0]);
        let h = TestFunction::label_table(vec![1.0, 2.0, 0.5]);
        let fh = carre_du_champ(&m, &f, &h);
        let hf = carre_du_champ(&m, &h, &f);
        let x = State::labelled(0);
        // λ Σ_y Q(x,y)(f(y)-f(x))(h(y)-h(x))
        let expect = 1.0 * (0.3 * (-1.5) * 1.0 + 0.7 * 1.5 * (-0.5));
        assert!((fh.density_at(&x).unwrap() - expect).abs() < 1e-14);
        assert!((hf.density_at(&x).unwrap() - expect).abs() < 1e-14);
        let one = carre_du_champ(&m, &f, &TestFunction::one());
        assert!(one.density_at(&x).unwrap().abs() < 1e-15);
    }

    #[test]
    fn domain_integral_for_ctmc() {
        let m = ctmc();
        let ind = TestFunction::label_table(vec![1.0, 0.0, 0.0]);
        let r = check_domain(&m, &ind, &State::labelled(1), 2.0);
        // λ(1) Q(1, {0}) * T
        assert!((r.value - 2.0 * 0.5 * 2.0).abs() < 1e-12);
        assert!(r.finite);
        let r = check_domain(&m, &TestFunction::one(), &State::labelled(1), 2.0);
        assert_eq!(r.value, 0.0);
    }
}
