use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::flow::Flow;
use super::quadrature::{integrate, DEFAULT_MAX_EVALS};
use super::state::State;

/// Rate density `𝒳a` of an additive functional, evaluated at a state.
pub type DensityFn = Arc<dyn Fn(&State) -> Result<f64> + Send + Sync>;
/// Atom schedule: atoms of `a(x, ·)` on the window `(0, w]`.
pub type AtomFn = Arc<dyn Fn(&State, f64) -> Result<Vec<Atom>> + Send + Sync>;
/// Closed form of `t ↦ ∫_0^t density(φ_x(s)) ds`.
pub type CumulativeFn = Arc<dyn Fn(&State, f64) -> f64 + Send + Sync>;

/// A jump of an additive functional at `offset` time units along the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub offset: f64,
    pub value: f64,
}

impl Atom {
    pub fn new(offset: f64, value: f64) -> Self {
        Self { offset, value }
    }
}

const OFFSET_RTOL: f64 = 1e-12;

/// Two atom offsets name the same instant.
pub fn offsets_coincide(a: f64, b: f64) -> bool {
    (a - b).abs() <= OFFSET_RTOL * a.abs().max(b.abs()).max(1.0)
}

/// Restrict atoms to `(0, window]`, sort them by offset and merge atoms at
/// coinciding offsets by summing their values.
pub fn normalize_atoms(mut atoms: Vec<Atom>, window: f64) -> Vec<Atom> {
    atoms.retain(|a| a.offset > 0.0 && a.offset <= window);
    atoms.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match merged.last_mut() {
            Some(last) if offsets_coincide(last.offset, atom.offset) => last.value += atom.value,
            _ => merged.push(atom),
        }
    }
    merged
}

/// An additive functional of a flow: `a(x, 0) = 0` and
/// `a(x, s) + a(φ_x(s), t) = a(x, s + t)`.
///
/// It is stored through its Lebesgue decomposition: a rate density integrated
/// along the trajectory plus a schedule of atoms. There is no singular
/// continuous part.
#[derive(Clone)]
pub struct PathFunctional {
    density: DensityFn,
    atoms: Option<AtomFn>,
    cumulative: Option<CumulativeFn>,
}

impl fmt::Debug for PathFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathFunctional")
            .field("atoms", &self.atoms.is_some())
            .field("closed_form", &self.cumulative.is_some())
            .finish()
    }
}

impl PathFunctional {
    pub fn new(density: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        Self::fallible(move |x| Ok(density(x)))
    }

    pub fn fallible(density: impl Fn(&State) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self {
            density: Arc::new(density),
            atoms: None,
            cumulative: None,
        }
    }

    pub fn zero() -> Self {
        Self::constant_rate(0.0)
    }

    /// `a(x, t) = c t`.
    pub fn constant_rate(c: f64) -> Self {
        Self::new(move |_| c).with_cumulative(move |_, t| c * t)
    }

    pub fn with_atoms(
        mut self,
        atoms: impl Fn(&State, f64) -> Result<Vec<Atom>> + Send + Sync + 'static,
    ) -> Self {
        self.atoms = Some(Arc::new(atoms));
        self
    }

    pub fn with_cumulative(
        mut self,
        cumulative: impl Fn(&State, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.cumulative = Some(Arc::new(cumulative));
        self
    }

    pub fn without_cumulative(mut self) -> Self {
        self.cumulative = None;
        self
    }

    pub fn has_atoms(&self) -> bool {
        self.atoms.is_some()
    }

    pub fn has_closed_form(&self) -> bool {
        self.cumulative.is_some()
    }

    pub fn density_at(&self, x: &State) -> Result<f64> {
        (self.density)(x)
    }

    /// Atoms of `a(x, ·)` on `(0, window]`, sorted and merged.
    pub fn atoms_in(&self, x: &State, window: f64) -> Result<Vec<Atom>> {
        match &self.atoms {
            None => Ok(Vec::new()),
            Some(schedule) => Ok(normalize_atoms(schedule(x, window)?, window)),
        }
    }

    /// `∫_0^t density(φ_x(s)) ds`, from the closed form when present.
    pub fn continuous_part(&self, flow: &dyn Flow, x: &State, t: f64, tol: f64) -> Result<f64> {
        match &self.cumulative {
            Some(c) => {
                check_window(flow, x, t)?;
                Ok(c(x, t))
            }
            None => {
                let breaks: Vec<f64> = self.atoms_in(x, t)?.iter().map(|a| a.offset).collect();
                self.continuous_by_quadrature(flow, x, t, &breaks, tol)
            }
        }
    }

    fn continuous_by_quadrature(
        &self,
        flow: &dyn Flow,
        x: &State,
        t: f64,
        breaks: &[f64],
        tol: f64,
    ) -> Result<f64> {
        check_window(flow, x, t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        if flow.is_stationary(x) {
            return Ok(self.density_at(x)? * t);
        }
        let density = &self.density;
        integrate_along_flow_with(|y| density(y), flow, x, t, breaks, tol)
    }

    /// `a(x, t)`.
    pub fn eval(&self, flow: &dyn Flow, x: &State, t: f64, tol: f64) -> Result<f64> {
        if t == 0.0 {
            check_window(flow, x, t)?;
            return Ok(0.0);
        }
        let atoms = self.atoms_in(x, t)?;
        let jumps: f64 = atoms.iter().map(|a| a.value).sum();
        let continuous = match &self.cumulative {
            Some(c) => {
                check_window(flow, x, t)?;
                c(x, t)
            }
            None => {
                let breaks: Vec<f64> = atoms.iter().map(|a| a.offset).collect();
                self.continuous_by_quadrature(flow, x, t, &breaks, tol)?
            }
        };
        Ok(continuous + jumps)
    }

    /// `a(x, t)` ignoring any closed-form cumulative.
    pub fn eval_by_quadrature(
        &self,
        flow: &dyn Flow,
        x: &State,
        t: f64,
        tol: f64,
    ) -> Result<f64> {
        let atoms = self.atoms_in(x, t)?;
        let breaks: Vec<f64> = atoms.iter().map(|a| a.offset).collect();
        let continuous = self.continuous_by_quadrature(flow, x, t, &breaks, tol)?;
        Ok(continuous + atoms.iter().map(|a| a.value).sum::<f64>())
    }

    /// Mass `a(x, (s, t]) = a(x, t) - a(x, s)` of the measure `a(x, ·)`.
    pub fn interval(&self, flow: &dyn Flow, x: &State, s: f64, t: f64, tol: f64) -> Result<f64> {
        Ok(self.eval(flow, x, t, tol)? - self.eval(flow, x, s, tol)?)
    }

    /// `α a + β b`.
    pub fn linear(a: &PathFunctional, b: &PathFunctional, alpha: f64, beta: f64) -> Self {
        let (da, db) = (a.density.clone(), b.density.clone());
        let density: DensityFn = Arc::new(move |x| Ok(alpha * da(x)? + beta * db(x)?));
        let atoms: Option<AtomFn> = match (a.atoms.clone(), b.atoms.clone()) {
            (None, None) => None,
            (sa, sb) => Some(Arc::new(move |x, w| {
                let mut all = Vec::new();
                if let Some(sa) = &sa {
                    all.extend(sa(x, w)?.into_iter().map(|t| Atom::new(t.offset, alpha * t.value)));
                }
                if let Some(sb) = &sb {
                    all.extend(sb(x, w)?.into_iter().map(|t| Atom::new(t.offset, beta * t.value)));
                }
                Ok(normalize_atoms(all, w))
            })),
        };
        let cumulative: Option<CumulativeFn> = match (a.cumulative.clone(), b.cumulative.clone()) {
            (Some(ca), Some(cb)) => Some(Arc::new(move |x, t| alpha * ca(x, t) + beta * cb(x, t))),
            _ => None,
        };
        Self {
            density,
            atoms,
            cumulative,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::linear(self, &Self::zero(), alpha, 0.0)
    }
}

fn check_window(flow: &dyn Flow, x: &State, t: f64) -> Result<()> {
    if x.is_cemetery() {
        return Err(Error::CemeteryInput);
    }
    if !(t >= 0.0) {
        return Err(Error::BadParameters(format!("negative time {t}")));
    }
    let horizon = flow.horizon(x);
    if t > horizon {
        return Err(Error::HorizonExceeded { t, horizon });
    }
    Ok(())
}

/// `a(x, t)` for an additive functional `a` along `flow`.
pub fn af_eval(a: &PathFunctional, flow: &dyn Flow, x: &State, t: f64, tol: f64) -> Result<f64> {
    a.eval(flow, x, t, tol)
}

pub fn af_linear(a: &PathFunctional, b: &PathFunctional, alpha: f64, beta: f64) -> PathFunctional {
    PathFunctional::linear(a, b, alpha, beta)
}

/// `∫_0^t g(φ_x(s)) ds`.
pub fn integrate_along_flow(
    g: impl Fn(&State) -> f64,
    flow: &dyn Flow,
    x: &State,
    t: f64,
    tol: f64,
) -> Result<f64> {
    integrate_along_flow_with(|y| Ok(g(y)), flow, x, t, &[], tol)
}

/// Fallible variant of [`integrate_along_flow`] with extra breakpoints.
pub fn integrate_along_flow_with(
    mut g: impl FnMut(&State) -> Result<f64>,
    flow: &dyn Flow,
    x: &State,
    t: f64,
    breakpoints: &[f64],
    tol: f64,
) -> Result<f64> {
    check_window(flow, x, t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let r = integrate(
        |s| g(&flow.eval(x, s)?),
        0.0,
        t,
        breakpoints,
        tol,
        DEFAULT_MAX_EVALS,
    )?;
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sds::{ConstantFlow, LinearFlow};

    const TOL: f64 = 1e-10;

    fn unit_flow() -> LinearFlow {
        LinearFlow::new(vec![1.0])
    }

    /// Atoms whenever the first coordinate crosses an integer.
    fn integer_crossings(x: &State, w: f64) -> Result<Vec<Atom>> {
        let start = x.coord(0);
        let mut atoms = Vec::new();
        let mut k = start.floor() + 1.0;
        while k - start <= w {
            atoms.push(Atom::new(k - start, 0.5 + 0.1 * k));
            k += 1.0;
        }
        Ok(atoms)
    }

    #[test]
    fn vanishes_at_zero() {
        let a = PathFunctional::new(|x| x.coord(0)).with_atoms(integer_crossings);
        assert_eq!(a.eval(&unit_flow(), &State::scalar(0.3), 0.0, TOL).unwrap(), 0.0);
    }

    #[test]
    fn constant_density() {
        let a = PathFunctional::new(|_| 2.5);
        let v = a.eval(&unit_flow(), &State::scalar(0.0), 3.0, TOL).unwrap();
        assert!((v - 7.5).abs() < 1e-12);
    }

    #[test]
    fn identity_density_on_unit_flow() {
        let v = integrate_along_flow(|y| y.coord(0), &unit_flow(), &State::scalar(0.0), 1.0, TOL)
            .unwrap();
        assert!((v - 0.5).abs() < TOL);
        let zero = integrate_along_flow(|_| 0.0, &unit_flow(), &State::scalar(0.0), 1.0, TOL);
        assert_eq!(zero.unwrap(), 0.0);
        let len = integrate_along_flow(|_| 1.0, &unit_flow(), &State::scalar(4.0), 2.5, TOL);
        assert!((len.unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn atoms_are_counted_on_half_open_windows() {
        let a = PathFunctional::zero().with_atoms(integer_crossings);
        let flow = unit_flow();
        // crossing of 1 at offset 0.5 is inside (0, 0.5]
        assert!((a.eval(&flow, &State::scalar(0.5), 0.5, TOL).unwrap() - 0.6).abs() < 1e-12);
        // starting on an integer does not count that integer
        assert_eq!(a.eval(&flow, &State::scalar(1.0), 0.5, TOL).unwrap(), 0.0);
    }

    #[test]
    fn additivity_with_atoms() {
        let a = PathFunctional::new(|x| x.coord(0).sin() + 1.0).with_atoms(integer_crossings);
        let flow = unit_flow();
        let x = State::scalar(0.2);
        for (s, t) in [(0.3, 1.4), (0.8, 0.8), (1.7, 2.05)] {
            let lhs = a.eval(&flow, &x, s, TOL).unwrap()
                + a.eval(&flow, &flow.eval(&x, s).unwrap(), t, TOL).unwrap();
            let rhs = a.eval(&flow, &x, s + t, TOL).unwrap();
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn linear_combinations() {
        let flow = unit_flow();
        let x = State::scalar(0.1);
        let a = PathFunctional::new(|y| y.coord(0) * y.coord(0)).with_atoms(integer_crossings);
        let b = PathFunctional::constant_rate(3.0);

        let same = af_linear(&a, &b, 1.0, 0.0);
        let t = 2.3;
        assert!(
            (same.eval(&flow, &x, t, TOL).unwrap() - a.eval(&flow, &x, t, TOL).unwrap()).abs()
                < 1e-12
        );
        let cancel = af_linear(&a, &a, 1.0, -1.0);
        assert!(cancel.eval(&flow, &x, t, TOL).unwrap().abs() < 1e-12);
        for atom in cancel.atoms_in(&x, t).unwrap() {
            assert_eq!(atom.value, 0.0);
        }

        let c1 = PathFunctional::constant_rate(1.25);
        let c2 = PathFunctional::new(|_| -0.5);
        let sum = af_linear(&c1, &c2, 1.0, 1.0);
        let separate = c1.eval(&flow, &x, t, TOL).unwrap() + c2.eval(&flow, &x, t, TOL).unwrap();
        assert!((sum.eval(&flow, &x, t, TOL).unwrap() - separate).abs() < 1e-12);
        assert!((sum.density_at(&x).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn stationary_flows_skip_quadrature() {
        let a = PathFunctional::new(|y| 2.0 + y.label_index() as f64);
        let v = a.eval(&ConstantFlow, &State::labelled(1), 0.75, TOL).unwrap();
        assert_eq!(v, 2.25);
    }

    #[test]
    fn horizon_is_enforced() {
        let flow = LinearFlow::new(vec![1.0]).with_wall(0, 1.0);
        let a = PathFunctional::new(|_| 1.0);
        assert!(matches!(
            a.eval(&flow, &State::scalar(0.5), 0.6, TOL),
            Err(Error::HorizonExceeded { .. })
        ));
        assert!((a.eval(&flow, &State::scalar(0.5), 0.5, TOL).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn normalize_merges_coincident_offsets() {
        let atoms = normalize_atoms(
            vec![
                Atom::new(0.5, 1.0),
                Atom::new(0.2, 2.0),
                Atom::new(0.5 + 1e-15, 3.0),
                Atom::new(1.5, 9.0),
                Atom::new(0.0, 9.0),
            ],
            1.0,
        );
        assert_eq!(atoms, vec![Atom::new(0.2, 2.0), Atom::new(0.5, 4.0)]);
    }
}
