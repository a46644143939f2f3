//! Stieltjes exponential, the exponential martingale `M^h`, good-function
//! diagnostics, the tilted triple `(φ, Λ̃, Q̃)`, the tilted generator in three
//! forms and the reverse likelihood ratio.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{PdmpModel, Skeleton};
use crate::error::{Error, Result};
use crate::function::TestFunction;
use crate::generator::{carre_du_champ, generator_apply, jump_at, left_value, union_offsets};
use crate::jump_law::HazardLaw;
use crate::sds::quadrature::{integrate, DEFAULT_MAX_EVALS};
use crate::sds::{integrate_along_flow_with, Atom, Flow, PathFunctional, State};

/// Tolerance of the per-segment integrals inside `M^h`.
pub const MARTINGALE_TOL: f64 = 1e-11;

/// `exp(c) ∏ (1 + jᵢ)`.
pub fn stieltjes_exp(continuous: f64, jumps: &[f64]) -> Result<f64> {
    let mut log = continuous;
    for &j in jumps {
        if !(j > -1.0) {
            return Err(Error::DegenerateJump(j));
        }
        log += j.ln_1p();
    }
    Ok(log.exp())
}

/// The pieces of `log M^h_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleParts {
    /// `log h(X_t) - log h(X_0)`.
    pub log_ratio: f64,
    /// `∫_(0,t] dL(𝒜^c h)_s / h(X_{s-})`.
    pub continuous: f64,
    /// Factors `1 + Δ𝒜h(X_s⁻)/h(X_{s-})` in path order.
    pub factors: Vec<f64>,
}

impl MartingaleParts {
    pub fn log_product(&self) -> f64 {
        self.factors.iter().map(|f| f.ln()).sum()
    }

    pub fn log_value(&self) -> f64 {
        self.log_ratio - self.continuous - self.log_product()
    }

    pub fn value(&self) -> f64 {
        self.log_value().exp()
    }

    /// `h(X_t)/h(X_0)` divided by the Stieltjes exponential.
    pub fn via_stieltjes(&self) -> Result<f64> {
        let jumps: Vec<f64> = self.factors.iter().map(|f| f - 1.0).collect();
        Ok(self.log_ratio.exp() / stieltjes_exp(self.continuous, &jumps)?)
    }
}

fn positive(value: f64, what: &str, at: &State) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::DomainViolation(format!("{what} = {value} at {at}")))
    }
}

/// `M^h` for a fixed model and `h`, with `𝒜h` built once.
#[derive(Clone, Debug)]
pub struct ExpMartingale {
    h: TestFunction,
    ah: PathFunctional,
}

impl ExpMartingale {
    pub fn new(model: &PdmpModel, h: &TestFunction) -> Self {
        Self {
            h: h.clone(),
            ah: generator_apply(model, h),
        }
    }

    pub fn generator(&self) -> &PathFunctional {
        &self.ah
    }

    /// Continuous integral and jump factors along one flow segment.
    fn segment(
        &self,
        flow: &dyn Flow,
        z: &State,
        len: f64,
        factors: &mut Vec<f64>,
    ) -> Result<f64> {
        let len = len.min(flow.horizon(z));
        if len <= 0.0 {
            return Ok(0.0);
        }
        let atoms = self.ah.atoms_in(z, len)?;
        let h = &self.h;
        let ah = &self.ah;
        let integrand = |y: &State| -> Result<f64> {
            Ok(ah.density_at(y)? / positive(h.at(y), "h", y)?)
        };
        let continuous = if flow.is_stationary(z) {
            integrand(z)? * len
        } else {
            let breaks: Vec<f64> = atoms.iter().map(|a| a.offset).collect();
            integrate_along_flow_with(integrand, flow, z, len, &breaks, MARTINGALE_TOL)?
        };
        if !atoms.is_empty() {
            let hj = h.path_jumps(flow, z, len);
            for a in &atoms {
                let y = flow.eval(z, a.offset)?;
                let h_minus = positive(left_value(h, &y, &hj, a.offset), "h(y-)", &y)?;
                let factor = 1.0 + a.value / h_minus;
                factors.push(positive(factor, "1 + Δ𝒜h/h(y-)", &y)?);
            }
        }
        Ok(continuous)
    }

    pub fn parts(&self, model: &PdmpModel, skeleton: &Skeleton, t: f64) -> Result<MartingaleParts> {
        let flow = model.flow.as_ref();
        let x0 = &skeleton.x0;
        let xt = skeleton.path_state(model, t)?;
        let log_ratio = positive(self.h.at(&xt), "h(X_t)", &xt)?.ln()
            - positive(self.h.at(x0), "h(X_0)", x0)?.ln();
        let mut factors = Vec::new();
        let mut continuous = 0.0;
        for seg in skeleton.segments(t) {
            continuous += self.segment(flow, seg.start_state, seg.length, &mut factors)?;
        }
        Ok(MartingaleParts {
            log_ratio,
            continuous,
            factors,
        })
    }

    pub fn value(&self, model: &PdmpModel, skeleton: &Skeleton, t: f64) -> Result<f64> {
        Ok(self.parts(model, skeleton, t)?.value())
    }
}

/// `M^h_t` along a skeleton.
pub fn exp_martingale(model: &PdmpModel, h: &TestFunction, skeleton: &Skeleton, t: f64) -> Result<f64> {
    ExpMartingale::new(model, h).value(model, skeleton, t)
}

/// Quasi-Hunt form: `h(X_t)/h(X_0) exp(-∫ dL(𝒜^c h)/h(X_-))` with the
/// integrand `(𝒳h + λ(Qh - h))/h` assembled from the triple directly.
pub fn martingale_hunt_form(
    model: &PdmpModel,
    h: &TestFunction,
    skeleton: &Skeleton,
    t: f64,
) -> Result<f64> {
    let flow = model.flow.as_ref();
    let integrand = |y: &State| -> Result<f64> {
        let hy = positive(h.at(y), "h", y)?;
        let lambda = model.hazard.rate(y)?;
        let jump = if lambda == 0.0 {
            0.0
        } else {
            lambda * (model.kernel.integrate(y, h)? - hy)
        };
        Ok((h.path_derivative(flow, y) + jump) / hy)
    };
    let mut continuous = 0.0;
    for seg in skeleton.segments(t) {
        let len = seg.length.min(flow.horizon(seg.start_state));
        continuous += integrate_along_flow_with(
            &integrand,
            flow,
            seg.start_state,
            len,
            &[],
            MARTINGALE_TOL,
        )?;
    }
    let xt = skeleton.path_state(model, t)?;
    Ok(h.at(&xt) / h.at(&skeleton.x0) * (-continuous).exp())
}

/// Itô form: `h(X_t)/h(X_0) exp(-∫_0^t 𝒳𝒜h(X_s)/h(X_s) ds)`, integrated in
/// global time along the reconstructed path.
pub fn martingale_ito_form(
    model: &PdmpModel,
    h: &TestFunction,
    skeleton: &Skeleton,
    t: f64,
) -> Result<f64> {
    let ah = generator_apply(model, h);
    let breaks: Vec<f64> = skeleton
        .events
        .iter()
        .map(|e| e.time)
        .filter(|&s| s < t)
        .collect();
    let integral = if t > 0.0 {
        integrate(
            |s| {
                let y = skeleton.path_state(model, s)?;
                Ok(ah.density_at(&y)? / positive(h.at(&y), "h", &y)?)
            },
            0.0,
            t,
            &breaks,
            MARTINGALE_TOL,
            DEFAULT_MAX_EVALS,
        )?
        .value
    } else {
        0.0
    };
    let xt = skeleton.path_state(model, t)?;
    Ok(h.at(&xt) / h.at(&skeleton.x0) * (-integral).exp())
}

/// Step form: `h(X_t)/h(X_0) ∏ (1 + Δ𝒜h(X_s⁻)/h(X_{s-}))^{-1}`.
pub fn martingale_step_form(
    model: &PdmpModel,
    h: &TestFunction,
    skeleton: &Skeleton,
    t: f64,
) -> Result<f64> {
    let m = ExpMartingale::new(model, h);
    let parts = m.parts(model, skeleton, t)?;
    Ok((parts.log_ratio - parts.log_product()).exp())
}

/// Numerical evidence for the good-function conditions.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodFunctionReport {
    pub positivity_ok: bool,
    /// `sup |h|` over the probed states.
    pub H: f64,
    /// `inf h` over the probed states.
    pub H_minus: f64,
    /// `inf b` and `sup b` with `b = Δ𝒜h/(h - Δh)`, 0 off atoms.
    pub B_minus: f64,
    pub B_plus: f64,
    /// Largest number of `𝒜h` atoms on a probed trajectory window.
    pub K: usize,
    pub c1_ok: bool,
    pub c2_ok: bool,
    pub good: bool,
    pub probed_states: usize,
    pub issues: Vec<String>,
    pub note: String,
}

const PROBE_GRID: usize = 32;
const PROBE_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Sweep `h` and `𝒜h` along the trajectories of `x0` and of the jump
/// states of `n_probe` simulated paths on `[0, T]`.
pub fn check_good_function(
    model: &PdmpModel,
    h: &TestFunction,
    x0: &State,
    horizon: f64,
    n_probe: usize,
) -> GoodFunctionReport {
    let flow = model.flow.as_ref();
    let ah = generator_apply(model, h);
    let mut issues = Vec::new();
    let mut starts = vec![x0.clone()];
    for rep in 0..n_probe as u64 {
        match model.simulate_replication(x0, horizon, PROBE_SEED, rep) {
            Ok(s) => starts.extend(s.events.into_iter().flat_map(|e| [e.pre, e.post])),
            Err(e) => issues.push(format!("probe path {rep}: {e}")),
        }
    }
    starts.retain(|s| !s.is_cemetery());
    let (mut sup_abs, mut inf_h) = (0.0f64, f64::INFINITY);
    let (mut b_minus, mut b_plus) = (0.0f64, 0.0f64);
    let mut k_max = 0usize;
    let mut positivity_ok = true;
    let mut a_finite = true;
    let mut ac_finite = true;
    let mut probed = 0usize;
    for z in &starts {
        let window = horizon.min(flow.horizon(z));
        let mut visit = |y: &State| {
            let v = h.at(y);
            probed += 1;
            sup_abs = sup_abs.max(v.abs());
            inf_h = inf_h.min(v);
            if !(v > 0.0) {
                positivity_ok = false;
            }
        };
        visit(z);
        if window <= 0.0 {
            continue;
        }
        for i in 1..=PROBE_GRID {
            if let Ok(y) = flow.eval(z, window * i as f64 / PROBE_GRID as f64) {
                visit(&y);
            }
        }
        match ah.atoms_in(z, window) {
            Ok(atoms) => {
                k_max = k_max.max(atoms.len());
                let hj = h.path_jumps(flow, z, window);
                for a in atoms {
                    if let Ok(y) = flow.eval(z, a.offset) {
                        let b = a.value / left_value(h, &y, &hj, a.offset);
                        b_minus = b_minus.min(b);
                        b_plus = b_plus.max(b);
                    }
                }
            }
            Err(e) => issues.push(format!("atoms of 𝒜h from {z}: {e}")),
        }
        let abs_ac = integrate_along_flow_with(
            |y| Ok(ah.density_at(y)?.abs()),
            flow,
            z,
            window,
            &[],
            1e-8,
        );
        let abs_a = integrate_along_flow_with(
            |y| Ok(ah.density_at(y)?.abs() / h.at(y).abs()),
            flow,
            z,
            window,
            &[],
            1e-8,
        );
        match abs_ac {
            Ok(v) if v.is_finite() => {}
            Ok(v) => {
                ac_finite = false;
                issues.push(format!("∫|𝒜^c h| = {v} from {z}"));
            }
            Err(e) => {
                ac_finite = false;
                issues.push(format!("∫|𝒜^c h| from {z}: {e}"));
            }
        }
        match abs_a {
            Ok(v) if v.is_finite() => {}
            _ => a_finite = false,
        }
    }
    if !positivity_ok {
        issues.push(format!("h is not strictly positive (inf = {inf_h})"));
    }
    let bounded = sup_abs.is_finite();
    let b_ok = b_minus > -1.0 && b_plus.is_finite();
    if !b_ok {
        issues.push(format!("b range [{b_minus}, {b_plus}] violates B- > -1, B+ < ∞"));
    }
    let common = positivity_ok && bounded && b_ok;
    let c1_ok = common && a_finite;
    let c2_ok = common && ac_finite && inf_h > 0.0;
    GoodFunctionReport {
        positivity_ok,
        H: sup_abs,
        H_minus: inf_h,
        B_minus: b_minus,
        B_plus: b_plus,
        K: k_max,
        c1_ok,
        c2_ok,
        good: c1_ok || c2_ok,
        probed_states: probed,
        issues,
        note: format!(
            "numerical evidence from {} probe trajectories over [0, {horizon}], not a proof",
            starts.len()
        ),
    }
}

const ATOM_ROUND: f64 = 1e-12;

/// The triple under `dP̃/dP = M^h`: same flow, `λ̃ = λ Qh/h`,
/// `δ̃ = δ Qh / ((1-δ) h + δ Qh)` (equal to `δ Qh/(h(y-) + Δ𝒜h)`), and
/// `Q̃ = h Q / Qh`.
pub fn tilt_model(model: &PdmpModel, h: &TestFunction) -> Result<PdmpModel> {
    let kernel = model.kernel.tilt(h)?;
    let (hazard, base_kernel) = (model.hazard.clone(), model.kernel.clone());
    let g = h.clone();
    let rate = move |x: &State| -> Result<f64> {
        let lambda = hazard.rate(x)?;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let qh = base_kernel.integrate(x, &g)?;
        if !(qh > 0.0) {
            return Err(Error::ZeroQh(format!("Qh = {qh} at {x}")));
        }
        Ok(lambda * qh / positive(g.at(x), "h", x)?)
    };
    let mut functional = PathFunctional::fallible(rate);
    if model.hazard.has_atoms() {
        let (flow, hazard, base_kernel) =
            (model.flow.clone(), model.hazard.clone(), model.kernel.clone());
        let g = h.clone();
        functional = functional.with_atoms(move |x, w| {
            hazard
                .atoms(x, w)?
                .into_iter()
                .map(|a| {
                    let y = flow.eval(x, a.offset)?;
                    let qh = base_kernel.integrate(&y, &g)?;
                    if !(qh > 0.0) {
                        return Err(Error::ZeroQh(format!("Qh = {qh} at {y}")));
                    }
                    let d = a.value;
                    let mut tilted = d * qh / ((1.0 - d) * g.at(&y) + d * qh);
                    if tilted > 1.0 && tilted <= 1.0 + ATOM_ROUND {
                        tilted = 1.0;
                    }
                    Ok(Atom::new(a.offset, tilted))
                })
                .collect()
        });
    }
    Ok(PdmpModel {
        name: format!("{}~{}", model.name, h.name()),
        flow: model.flow.clone(),
        hazard: HazardLaw::new(functional),
        kernel,
        max_jumps: model.max_jumps,
        descriptor: model.descriptor,
    })
}

/// The three algebraic forms of the tilted generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiltedForm {
    Direct,
    Ratio,
    Bracket,
}

impl TiltedForm {
    pub const ALL: [TiltedForm; 3] = [TiltedForm::Direct, TiltedForm::Ratio, TiltedForm::Bracket];
}

/// `h(y-) + Δ𝒜h(y)` from the triple, with `Δ𝒜h = Δh + δ(Qh - h)`.
fn tilted_denominator(
    model: &PdmpModel,
    h: &TestFunction,
    y: &State,
    dh: f64,
    delta: f64,
) -> Result<f64> {
    let hy = h.at(y);
    let dah = if delta > 0.0 {
        dh + delta * (model.kernel.integrate(y, h)? - hy)
    } else {
        dh
    };
    positive(hy - dh + dah, "h(y-) + Δ𝒜h", y)
}

/// `𝒜̃f` computed by the selected form.
pub fn tilted_generator(
    model: &PdmpModel,
    h: &TestFunction,
    f: &TestFunction,
    form: TiltedForm,
) -> PathFunctional {
    match form {
        TiltedForm::Direct => direct_form(model, h, f),
        TiltedForm::Ratio => ratio_form(model, h, f),
        TiltedForm::Bracket => bracket_form(model, h, f),
    }
}

fn direct_form(model: &PdmpModel, h: &TestFunction, f: &TestFunction) -> PathFunctional {
    let m = model.clone();
    let (f1, h1) = (f.clone(), h.clone());
    let fh = f.product(h);
    let fh1 = fh.clone();
    let density = move |x: &State| -> Result<f64> {
        let d = f1.path_derivative(m.flow.as_ref(), x);
        let lambda = m.hazard.rate(x)?;
        if lambda == 0.0 {
            return Ok(d);
        }
        let q_fh = m.kernel.integrate(x, &fh1)?;
        let qh = m.kernel.integrate(x, &h1)?;
        Ok(d + lambda * (q_fh - f1.at(x) * qh) / positive(h1.at(x), "h", x)?)
    };
    let out = PathFunctional::fallible(density);
    if f.is_path_continuous() && !model.hazard.has_atoms() {
        return out;
    }
    let m = model.clone();
    let (f2, h2) = (f.clone(), h.clone());
    out.with_atoms(move |x, w| {
        let flow = m.flow.as_ref();
        let fj = f2.path_jumps(flow, x, w);
        let hj = h2.path_jumps(flow, x, w);
        let hz = m.hazard.atoms(x, w)?;
        union_offsets(&[&fj, &hz])
            .into_iter()
            .map(|s| {
                let y = flow.eval(x, s)?;
                let delta = jump_at(&hz, s);
                let mut v = jump_at(&fj, s);
                if delta > 0.0 {
                    let denom = tilted_denominator(&m, &h2, &y, jump_at(&hj, s), delta)?;
                    let q_fh = m.kernel.integrate(&y, &fh)?;
                    let qh = m.kernel.integrate(&y, &h2)?;
                    v += delta * (q_fh - f2.at(&y) * qh) / denom;
                }
                Ok(Atom::new(s, v))
            })
            .collect()
    })
}

fn ratio_form(model: &PdmpModel, h: &TestFunction, f: &TestFunction) -> PathFunctional {
    let afh = Arc::new(generator_apply(model, &f.product(h)));
    let ah = Arc::new(generator_apply(model, h));
    let (f1, h1) = (f.clone(), h.clone());
    let (a1, b1) = (afh.clone(), ah.clone());
    let density = move |x: &State| -> Result<f64> {
        Ok((a1.density_at(x)? - f1.at(x) * b1.density_at(x)?) / positive(h1.at(x), "h", x)?)
    };
    let out = PathFunctional::fallible(density);
    if !(afh.has_atoms() || ah.has_atoms()) {
        return out;
    }
    let flow = model.flow.clone();
    let (f2, h2) = (f.clone(), h.clone());
    out.with_atoms(move |x, w| {
        let fl: &dyn Flow = flow.as_ref();
        let (da, db) = (afh.atoms_in(x, w)?, ah.atoms_in(x, w)?);
        let (fj, hj) = (f2.path_jumps(fl, x, w), h2.path_jumps(fl, x, w));
        union_offsets(&[&da, &db])
            .into_iter()
            .map(|s| {
                let y = fl.eval(x, s)?;
                let dah = jump_at(&db, s);
                let denom = positive(left_value(&h2, &y, &hj, s) + dah, "h(y-) + Δ𝒜h", &y)?;
                let v = (jump_at(&da, s) - left_value(&f2, &y, &fj, s) * dah) / denom;
                Ok(Atom::new(s, v))
            })
            .collect()
    })
}

fn bracket_form(model: &PdmpModel, h: &TestFunction, f: &TestFunction) -> PathFunctional {
    let af = Arc::new(generator_apply(model, f));
    let ah = Arc::new(generator_apply(model, h));
    let cdc = Arc::new(carre_du_champ(model, f, h));
    let h1 = h.clone();
    let (a1, c1) = (af.clone(), cdc.clone());
    let density = move |x: &State| -> Result<f64> {
        Ok(a1.density_at(x)? + c1.density_at(x)? / positive(h1.at(x), "h", x)?)
    };
    let out = PathFunctional::fallible(density);
    if !(af.has_atoms() || ah.has_atoms() || cdc.has_atoms()) {
        return out;
    }
    let flow = model.flow.clone();
    let h2 = h.clone();
    out.with_atoms(move |x, w| {
        let fl: &dyn Flow = flow.as_ref();
        let (da, db, dc) = (af.atoms_in(x, w)?, ah.atoms_in(x, w)?, cdc.atoms_in(x, w)?);
        let hj = h2.path_jumps(fl, x, w);
        union_offsets(&[&da, &db, &dc])
            .into_iter()
            .map(|s| {
                let y = fl.eval(x, s)?;
                let denom =
                    positive(left_value(&h2, &y, &hj, s) + jump_at(&db, s), "h(y-) + Δ𝒜h", &y)?;
                Ok(Atom::new(s, jump_at(&da, s) + jump_at(&dc, s) / denom))
            })
            .collect()
    })
}

/// `M̃^{1/h}_t`: the exponential martingale of `1/h` under the tilted model.
pub fn reverse_martingale(
    tilted: &PdmpModel,
    h: &TestFunction,
    skeleton: &Skeleton,
    t: f64,
) -> Result<f64> {
    exp_martingale(tilted, &h.reciprocal(), skeleton, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump_law::DiscreteKernel;
    use crate::sds::{ConstantFlow, StateDescriptor};

    #[test]
    fn stieltjes_cases() {
        assert_eq!(stieltjes_exp(0.0, &[]).unwrap(), 1.0);
        assert!((stieltjes_exp(0.7, &[]).unwrap() - 0.7f64.exp()).abs() < 1e-15);
        let v = stieltjes_exp(0.3, &[0.5]).unwrap();
        assert!((v - 0.3f64.exp() * 1.5).abs() < 1e-15);
        assert!(matches!(stieltjes_exp(0.0, &[-1.0]), Err(Error::DegenerateJump(_))));
    }

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
    fn trivial_h_gives_unit_martingale() {
        let m = ctmc();
        let s = m.simulate_replication(&State::labelled(0), 2.0, 1, 0).unwrap();
        assert_eq!(exp_martingale(&m, &TestFunction::one(), &s, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn tilted_ctmc_rates_follow_doob_transform() {
        let m = ctmc();
        let h = TestFunction::label_table(vec![1.0, 2.0, 0.5]);
        let t = tilt_model(&m, &h).unwrap();
        let x = State::labelled(0);
        let qh = 0.3 * 2.0 + 0.7 * 0.5;
        assert!((t.hazard.rate(&x).unwrap() - qh).abs() < 1e-15);
        assert!(Arc::ptr_eq(&t.flow, &m.flow));
    }

    #[test]
    fn reverse_identity_on_a_path() {
        let m = ctmc();
        let h = TestFunction::label_table(vec![1.0, 2.0, 0.5]);
        let tm = tilt_model(&m, &h).unwrap();
        for rep in 0..20 {
            let s = m.simulate_replication(&State::labelled(0), 1.5, 4, rep).unwrap();
            let a = exp_martingale(&m, &h, &s, 1.5).unwrap();
            let b = reverse_martingale(&tm, &h, &s, 1.5).unwrap();
            assert!((a * b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn crossing_h_fails_positivity() {
        let m = ctmc();
        let h = TestFunction::label_table(vec![1.0, -1.0, 0.5]);
        let r = check_good_function(&m, &h, &State::labelled(0), 1.0, 20);
        assert!(!r.positivity_ok && !r.good);
        let r = check_good_function(&m, &TestFunction::one(), &State::labelled(0), 1.0, 20);
        assert!(r.good && r.B_minus == 0.0 && r.B_plus == 0.0);
    }
}
