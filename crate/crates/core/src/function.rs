//! Test functions `f` on the state space, together with the two path
//! quantities the generator needs: the right derivative along the flow `𝒳f`
//! and the jumps `Δf` of `t ↦ f(φ_x(t))`.
//!
//! Functions built from a [`FunctionForm`] carry their closed form, which
//! moment-oracle kernels and expectation oracles can read.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::sds::{normalize_atoms, offsets_coincide, Atom, Flow, State};

pub type ValueFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;
pub type PathDerivativeFn = Arc<dyn Fn(&dyn Flow, &State) -> f64 + Send + Sync>;
pub type PathJumpFn = Arc<dyn Fn(&dyn Flow, &State, f64) -> Vec<Atom> + Send + Sync>;

/// Forward step used when `𝒳f` has to be approximated by a difference quotient.
pub const FD_STEP: f64 = 1e-6;

/// Closed forms understood by kernels and oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionForm {
    Constant(f64),
    /// `Σ coef · exp(rate · x[coord])`, terms as `(coef, rate)`.
    ExpSum { coord: usize, terms: Vec<(f64, f64)> },
    /// `Σ_k coeffs[k] · x[coord]^k`.
    Polynomial { coord: usize, coeffs: Vec<f64> },
    /// Value indexed by the discrete label.
    LabelTable(Vec<f64>),
}

impl FunctionForm {
    pub fn eval(&self, x: &State) -> f64 {
        match self {
            FunctionForm::Constant(c) => *c,
            FunctionForm::ExpSum { coord, terms } => {
                let z = x.coord(*coord);
                terms.iter().map(|(a, b)| a * (b * z).exp()).sum()
            }
            FunctionForm::Polynomial { coord, coeffs } => {
                let z = x.coord(*coord);
                coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
            }
            FunctionForm::LabelTable(values) => {
                values.get(x.label_index()).copied().unwrap_or(f64::NAN)
            }
        }
    }

    /// Partial derivative along the coordinate the form depends on, if any.
    fn partial(&self, x: &State) -> Option<(usize, f64)> {
        match self {
            FunctionForm::ExpSum { coord, terms } => {
                let z = x.coord(*coord);
                Some((*coord, terms.iter().map(|(a, b)| a * b * (b * z).exp()).sum()))
            }
            FunctionForm::Polynomial { coord, coeffs } => {
                let z = x.coord(*coord);
                let d = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * z + k as f64 * c);
                Some((*coord, d))
            }
            FunctionForm::Constant(_) | FunctionForm::LabelTable(_) => None,
        }
    }

    fn scale(&self, alpha: f64) -> Self {
        match self {
            FunctionForm::Constant(c) => FunctionForm::Constant(alpha * c),
            FunctionForm::ExpSum { coord, terms } => FunctionForm::ExpSum {
                coord: *coord,
                terms: terms.iter().map(|(a, b)| (alpha * a, *b)).collect(),
            },
            FunctionForm::Polynomial { coord, coeffs } => FunctionForm::Polynomial {
                coord: *coord,
                coeffs: coeffs.iter().map(|c| alpha * c).collect(),
            },
            FunctionForm::LabelTable(v) => {
                FunctionForm::LabelTable(v.iter().map(|c| alpha * c).collect())
            }
        }
    }

    /// Express a constant in the shape of `like`.
    fn constant_like(c: f64, like: &Self) -> Option<Self> {
        match like {
            FunctionForm::Constant(_) => Some(FunctionForm::Constant(c)),
            FunctionForm::ExpSum { coord, .. } => Some(FunctionForm::ExpSum {
                coord: *coord,
                terms: vec![(c, 0.0)],
            }),
            FunctionForm::Polynomial { coord, .. } => Some(FunctionForm::Polynomial {
                coord: *coord,
                coeffs: vec![c],
            }),
            FunctionForm::LabelTable(_) => None,
        }
    }

    pub fn product(&self, other: &Self) -> Option<Self> {
        use FunctionForm::*;
        match (self, other) {
            (Constant(c), f) | (f, Constant(c)) => Some(f.scale(*c)),
            (ExpSum { coord: c1, terms: t1 }, ExpSum { coord: c2, terms: t2 }) if c1 == c2 => {
                let mut terms: Vec<(f64, f64)> = Vec::new();
                for (a1, b1) in t1 {
                    for (a2, b2) in t2 {
                        push_term(&mut terms, a1 * a2, b1 + b2);
                    }
                }
                Some(ExpSum { coord: *c1, terms })
            }
            (Polynomial { coord: c1, coeffs: p }, Polynomial { coord: c2, coeffs: q })
                if c1 == c2 =>
            {
                let mut coeffs = vec![0.0; p.len() + q.len() - 1];
                for (i, a) in p.iter().enumerate() {
                    for (j, b) in q.iter().enumerate() {
                        coeffs[i + j] += a * b;
                    }
                }
                Some(Polynomial { coord: *c1, coeffs })
            }
            (LabelTable(a), LabelTable(b)) if a.len() == b.len() => {
                Some(LabelTable(a.iter().zip(b).map(|(x, y)| x * y).collect()))
            }
            _ => None,
        }
    }

    /// `α f + β g`.
    pub fn linear(f: &Self, alpha: f64, g: &Self, beta: f64) -> Option<Self> {
        use FunctionForm::*;
        match (f, g) {
            (Constant(a), Constant(b)) => Some(Constant(alpha * a + beta * b)),
            (Constant(a), other) => {
                Self::linear(&Self::constant_like(*a, other)?, alpha, other, beta)
            }
            (other, Constant(b)) => {
                Self::linear(other, alpha, &Self::constant_like(*b, other)?, beta)
            }
            (ExpSum { coord: c1, terms: t1 }, ExpSum { coord: c2, terms: t2 }) if c1 == c2 => {
                let mut terms = Vec::new();
                for (a, b) in t1 {
                    push_term(&mut terms, alpha * a, *b);
                }
                for (a, b) in t2 {
                    push_term(&mut terms, beta * a, *b);
                }
                Some(ExpSum { coord: *c1, terms })
            }
            (Polynomial { coord: c1, coeffs: p }, Polynomial { coord: c2, coeffs: q })
                if c1 == c2 =>
            {
                let n = p.len().max(q.len());
                let coeffs = (0..n)
                    .map(|k| {
                        alpha * p.get(k).copied().unwrap_or(0.0)
                            + beta * q.get(k).copied().unwrap_or(0.0)
                    })
                    .collect();
                Some(Polynomial { coord: *c1, coeffs })
            }
            (LabelTable(a), LabelTable(b)) if a.len() == b.len() => Some(LabelTable(
                a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect(),
            )),
            _ => None,
        }
    }

    pub fn reciprocal(&self) -> Option<Self> {
        match self {
            FunctionForm::Constant(c) => Some(FunctionForm::Constant(1.0 / c)),
            FunctionForm::ExpSum { coord, terms } if terms.len() == 1 => {
                let (a, b) = terms[0];
                Some(FunctionForm::ExpSum {
                    coord: *coord,
                    terms: vec![(1.0 / a, -b)],
                })
            }
            FunctionForm::LabelTable(v) => {
                Some(FunctionForm::LabelTable(v.iter().map(|c| 1.0 / c).collect()))
            }
            _ => None,
        }
    }
}

fn push_term(terms: &mut Vec<(f64, f64)>, coef: f64, rate: f64) {
    match terms.iter_mut().find(|(_, b)| *b == rate) {
        Some(term) => term.0 += coef,
        None => terms.push((coef, rate)),
    }
}

fn finite_difference(value: &ValueFn, flow: &dyn Flow, x: &State) -> f64 {
    let horizon = flow.horizon(x);
    if !(horizon > 0.0) {
        return 0.0;
    }
    let step = FD_STEP.min(0.5 * horizon);
    match flow.eval(x, step) {
        Ok(y) => (value(&y) - value(x)) / step,
        Err(_) => f64::NAN,
    }
}

fn interval_product(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let p = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        p.iter().copied().fold(f64::INFINITY, f64::min),
        p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn interval_scale(a: (f64, f64), alpha: f64) -> (f64, f64) {
    if alpha >= 0.0 {
        (alpha * a.0, alpha * a.1)
    } else {
        (alpha * a.1, alpha * a.0)
    }
}

/// A measurable function `f` on the extended state space, in the domain of
/// the generator (locally path-finite-variation is the author's contract).
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    value: ValueFn,
    derivative: PathDerivativeFn,
    jumps: Option<PathJumpFn>,
    form: Option<FunctionForm>,
    range: Option<(f64, f64)>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("form", &self.form)
            .field("range", &self.range)
            .field("path_jumps", &self.jumps.is_some())
            .finish()
    }
}

impl TestFunction {
    /// A function with `𝒳f` approximated by a forward difference along the
    /// flow (step [`FD_STEP`]).
    pub fn new(value: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        let value: ValueFn = Arc::new(value);
        let v = value.clone();
        Self {
            name: "f".into(),
            value,
            derivative: Arc::new(move |flow, x| finite_difference(&v, flow, x)),
            jumps: None,
            form: None,
            range: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_form(FunctionForm::Constant(c)).named(format!("{c}"))
    }

    pub fn one() -> Self {
        Self::constant(1.0).named("one")
    }

    /// `coef · exp(rate · x[coord])`.
    pub fn exp(coord: usize, coef: f64, rate: f64) -> Self {
        Self::from_form(FunctionForm::ExpSum {
            coord,
            terms: vec![(coef, rate)],
        })
        .named(format!("{coef}*exp({rate}*x{coord})"))
    }

    pub fn polynomial(coord: usize, coeffs: Vec<f64>) -> Self {
        Self::from_form(FunctionForm::Polynomial { coord, coeffs }).named("poly")
    }

    pub fn label_table(values: Vec<f64>) -> Self {
        Self::from_form(FunctionForm::LabelTable(values)).named("table")
    }

    /// Build value and `𝒳f` from a closed form. Label tables are constant
    /// along flows; coordinate forms use the flow's velocity and fall back to
    /// a forward difference when the flow has none.
    pub fn from_form(form: FunctionForm) -> Self {
        let shared = Arc::new(form.clone());
        let for_value = shared.clone();
        let value: ValueFn = Arc::new(move |x| for_value.eval(x));
        let v = value.clone();
        let derivative: PathDerivativeFn = Arc::new(move |flow, x| match shared.partial(x) {
            None => 0.0,
            Some((coord, d)) => match flow.velocity(x) {
                Some(vel) => d * vel.get(coord).copied().unwrap_or(0.0),
                None => finite_difference(&v, flow, x),
            },
        });
        let range = match &form {
            FunctionForm::Constant(c) => Some((*c, *c)),
            FunctionForm::LabelTable(v) => Some((
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )),
            _ => None,
        };
        Self {
            name: "form".into(),
            value,
            derivative,
            jumps: None,
            form: Some(form),
            range,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Closed-form `𝒳f`.
    pub fn with_path_derivative(
        mut self,
        derivative: impl Fn(&State) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Arc::new(move |_, x| derivative(x));
        self
    }

    /// `𝒳f = ∇f · v` using the flow's velocity field.
    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&State) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let v = self.value.clone();
        self.derivative = Arc::new(move |flow, x| match flow.velocity(x) {
            Some(vel) => gradient(x).iter().zip(&vel).map(|(g, u)| g * u).sum(),
            None => finite_difference(&v, flow, x),
        });
        self
    }

    /// Jumps `Δf(φ_x(t)) = f(φ_x(t)) - f(φ_x(t-))` on `(0, w]`.
    pub fn with_path_jumps(
        mut self,
        jumps: impl Fn(&dyn Flow, &State, f64) -> Vec<Atom> + Send + Sync + 'static,
    ) -> Self {
        self.jumps = Some(Arc::new(jumps));
        self
    }

    /// Declared bounds `lo <= f <= hi` on the extended state space.
    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn form(&self) -> Option<&FunctionForm> {
        self.form.as_ref()
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }

    pub fn at(&self, x: &State) -> f64 {
        (self.value)(x)
    }

    /// `𝒳f(x)`.
    pub fn path_derivative(&self, flow: &dyn Flow, x: &State) -> f64 {
        (self.derivative)(flow, x)
    }

    pub fn is_path_continuous(&self) -> bool {
        self.jumps.is_none()
    }

    /// `Δf` along the trajectory from `x` on `(0, w]`, sorted and merged.
    pub fn path_jumps(&self, flow: &dyn Flow, x: &State, w: f64) -> Vec<Atom> {
        match &self.jumps {
            None => Vec::new(),
            Some(j) => normalize_atoms(j(flow, x, w), w),
        }
    }

    /// `f(y-)` given `f(y)` and the path jump at that instant.
    pub fn left_value(value: f64, jump: f64) -> f64 {
        value - jump
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::linear(alpha, self, 0.0, &Self::constant(0.0))
    }

    /// `α f + β g`.
    pub fn linear(alpha: f64, f: &TestFunction, beta: f64, g: &TestFunction) -> Self {
        let (fv, gv) = (f.value.clone(), g.value.clone());
        let (fd, gd) = (f.derivative.clone(), g.derivative.clone());
        let jumps: Option<PathJumpFn> = if f.jumps.is_none() && g.jumps.is_none() {
            None
        } else {
            let (f, g) = (f.clone(), g.clone());
            Some(Arc::new(move |flow, x, w| {
                let mut all: Vec<Atom> = f
                    .path_jumps(flow, x, w)
                    .into_iter()
                    .map(|a| Atom::new(a.offset, alpha * a.value))
                    .collect();
                all.extend(
                    g.path_jumps(flow, x, w)
                        .into_iter()
                        .map(|a| Atom::new(a.offset, beta * a.value)),
                );
                normalize_atoms(all, w)
            }))
        };
        let form = match (&f.form, &g.form) {
            (Some(a), Some(b)) => FunctionForm::linear(a, alpha, b, beta),
            _ => None,
        };
        let range = match (f.range, g.range) {
            (Some(a), Some(b)) => {
                let (a, b) = (interval_scale(a, alpha), interval_scale(b, beta));
                Some((a.0 + b.0, a.1 + b.1))
            }
            _ => None,
        };
        Self {
            name: format!("{alpha}*{}+{beta}*{}", f.name, g.name),
            value: Arc::new(move |x| alpha * fv(x) + beta * gv(x)),
            derivative: Arc::new(move |flow, x| alpha * fd(flow, x) + beta * gd(flow, x)),
            jumps,
            form,
            range,
        }
    }

    /// Pointwise product `f h`, with `𝒳(fh) = 𝒳f h + f 𝒳h` and
    /// `Δ(fh) = f(y) h(y) - f(y-) h(y-)`.
    pub fn product(&self, other: &TestFunction) -> Self {
        let (fv, gv) = (self.value.clone(), other.value.clone());
        let (f2, g2) = (self.value.clone(), other.value.clone());
        let (fd, gd) = (self.derivative.clone(), other.derivative.clone());
        let jumps: Option<PathJumpFn> = if self.jumps.is_none() && other.jumps.is_none() {
            None
        } else {
            let (f, g) = (self.clone(), other.clone());
            Some(Arc::new(move |flow, x, w| {
                paired_jumps(flow, x, w, &f, &g, |fy, df, gy, dg| {
                    fy * gy - (fy - df) * (gy - dg)
                })
            }))
        };
        let form = match (&self.form, &other.form) {
            (Some(a), Some(b)) => a.product(b),
            _ => None,
        };
        let range = match (self.range, other.range) {
            (Some(a), Some(b)) => Some(interval_product(a, b)),
            _ => None,
        };
        Self {
            name: format!("{}*{}", self.name, other.name),
            value: Arc::new(move |x| fv(x) * gv(x)),
            derivative: Arc::new(move |flow, x| {
                fd(flow, x) * g2(x) + f2(x) * gd(flow, x)
            }),
            jumps,
            form,
            range,
        }
    }

    /// `1/h`, with `𝒳(1/h) = -𝒳h/h²` and `Δ(1/h) = 1/h(y) - 1/h(y-)`.
    pub fn reciprocal(&self) -> Self {
        let v = self.value.clone();
        let v2 = self.value.clone();
        let d = self.derivative.clone();
        let jumps: Option<PathJumpFn> = self.jumps.as_ref().map(|_| {
            let h = self.clone();
            let jumps: PathJumpFn = Arc::new(move |flow: &dyn Flow, x: &State, w: f64| {
                h.path_jumps(flow, x, w)
                    .into_iter()
                    .filter_map(|a| {
                        let y = flow.eval(x, a.offset).ok()?;
                        let hy = h.at(&y);
                        Some(Atom::new(a.offset, 1.0 / hy - 1.0 / (hy - a.value)))
                    })
                    .collect()
            });
            jumps
        });
        let range = self.range.and_then(|(lo, hi)| {
            if lo > 0.0 || hi < 0.0 {
                Some((1.0 / hi, 1.0 / lo))
            } else {
                None
            }
        });
        Self {
            name: format!("1/{}", self.name),
            value: Arc::new(move |x| 1.0 / v(x)),
            derivative: Arc::new(move |flow, x| {
                let hx = v2(x);
                -d(flow, x) / (hx * hx)
            }),
            jumps,
            form: self.form.as_ref().and_then(FunctionForm::reciprocal),
            range,
        }
    }
}

/// Combine the path jumps of two functions at the union of their offsets.
/// `combine(f(y), Δf, g(y), Δg)` gives the jump of the combination.
fn paired_jumps(
    flow: &dyn Flow,
    x: &State,
    w: f64,
    f: &TestFunction,
    g: &TestFunction,
    combine: impl Fn(f64, f64, f64, f64) -> f64,
) -> Vec<Atom> {
    let jf = f.path_jumps(flow, x, w);
    let jg = g.path_jumps(flow, x, w);
    let mut offsets: Vec<f64> = jf.iter().chain(&jg).map(|a| a.offset).collect();
    offsets.sort_by(f64::total_cmp);
    offsets.dedup_by(|a, b| offsets_coincide(*a, *b));
    let lookup = |list: &[Atom], s: f64| {
        list.iter()
            .find(|a| offsets_coincide(a.offset, s))
            .map_or(0.0, |a| a.value)
    };
    offsets
        .into_iter()
        .filter_map(|s| {
            let y = flow.eval(x, s).ok()?;
            let value = combine(f.at(&y), lookup(&jf, s), g.at(&y), lookup(&jg, s));
            Some(Atom::new(s, value))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sds::{ConstantFlow, LinearFlow};

    #[test]
    fn forms_evaluate() {
        let x = State::scalar(2.0);
        let e = FunctionForm::ExpSum {
            coord: 0,
            terms: vec![(2.0, 0.5), (1.0, 0.0)],
        };
        assert!((e.eval(&x) - (2.0 * 1f64.exp() + 1.0)).abs() < 1e-14);
        let p = FunctionForm::Polynomial {
            coord: 0,
            coeffs: vec![1.0, -1.0, 3.0],
        };
        assert_eq!(p.eval(&x), 1.0 - 2.0 + 12.0);
        let t = FunctionForm::LabelTable(vec![1.0, 4.0]);
        assert_eq!(t.eval(&State::labelled(1)), 4.0);
    }

    #[test]
    fn derivative_from_velocity_and_finite_difference_agree() {
        let flow = LinearFlow::new(vec![1.5]);
        let x = State::scalar(0.4);
        let f = TestFunction::exp(0, 2.0, -0.7);
        let exact = 2.0 * -0.7 * (-0.7f64 * 0.4).exp() * 1.5;
        assert!((f.path_derivative(&flow, &x) - exact).abs() < 1e-14);
        let fd = TestFunction::new(|y| 2.0 * (-0.7 * y.coord(0)).exp());
        assert!((fd.path_derivative(&flow, &x) - exact).abs() < 1e-5);
    }

    #[test]
    fn label_functions_are_constant_along_stationary_flows() {
        let f = TestFunction::label_table(vec![1.0, 2.0, 3.0]);
        assert_eq!(f.path_derivative(&ConstantFlow, &State::labelled(2)), 0.0);
        assert_eq!(f.range(), Some((1.0, 3.0)));
    }

    #[test]
    fn product_and_reciprocal_forms() {
        let f = TestFunction::exp(0, 1.0, 0.3);
        let h = TestFunction::exp(0, 2.0, -0.5);
        let fh = f.product(&h);
        assert_eq!(
            fh.form(),
            Some(&FunctionForm::ExpSum {
                coord: 0,
                terms: vec![(2.0, 0.3 - 0.5)]
            })
        );
        let x = State::scalar(1.3);
        assert!((fh.at(&x) - f.at(&x) * h.at(&x)).abs() < 1e-14);
        let inv = h.reciprocal();
        assert!((inv.at(&x) * h.at(&x) - 1.0).abs() < 1e-15);
        assert!(inv.form().is_some());

        let flow = LinearFlow::new(vec![1.0]);
        let d = fh.path_derivative(&flow, &x);
        let expect = f.path_derivative(&flow, &x) * h.at(&x) + f.at(&x) * h.path_derivative(&flow, &x);
        assert!((d - expect).abs() < 1e-14);
    }

    #[test]
    fn jumps_of_products_use_left_limits() {
        // f jumps from 1 to 2 when the coordinate crosses 1; g = x + 1.
        let step = |y: &State| if y.coord(0) >= 1.0 { 2.0 } else { 1.0 };
        let f = TestFunction::new(step)
            .with_path_derivative(|_| 0.0)
            .with_path_jumps(|_, x, w| {
                let s = 1.0 - x.coord(0);
                if s > 0.0 && s <= w {
                    vec![Atom::new(s, 1.0)]
                } else {
                    vec![]
                }
            });
        let g = TestFunction::polynomial(0, vec![1.0, 1.0]);
        let flow = LinearFlow::new(vec![1.0]);
        let x = State::scalar(0.25);
        let j = f.product(&g).path_jumps(&flow, &x, 2.0);
        assert_eq!(j.len(), 1);
        // f(y)g(y) - f(y-)g(y-) = 2*2 - 1*2
        assert!((j[0].value - 2.0).abs() < 1e-14);
        let r = f.reciprocal().path_jumps(&flow, &x, 2.0);
        assert!((r[0].value - (0.5 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn linear_combination_forms() {
        let a = TestFunction::polynomial(0, vec![1.0, 2.0]);
        let b = TestFunction::constant(3.0);
        let c = TestFunction::linear(2.0, &a, -1.0, &b);
        assert_eq!(
            c.form(),
            Some(&FunctionForm::Polynomial {
                coord: 0,
                coeffs: vec![-1.0, 4.0]
            })
        );
    }
}
