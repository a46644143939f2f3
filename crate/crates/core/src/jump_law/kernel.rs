use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{FunctionForm, TestFunction};
use crate::rng::UniformSource;
use crate::sds::quadrature::{integrate, DEFAULT_MAX_EVALS};
use crate::sds::State;

/// Absolute tolerance for kernel integrals computed by quadrature.
const KERNEL_TOL: f64 = 1e-10;
const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportKind {
    Discrete,
    Density1d,
    MomentOracle,
}

/// State-indexed transition kernel `Q(y, dz)`.
pub trait JumpKernel: Send + Sync + fmt::Debug {
    fn support_kind(&self) -> SupportKind;

    /// A draw from `Q(y, ·)`, deterministic in the uniforms consumed.
    fn sample(&self, y: &State, u: &mut dyn UniformSource) -> Result<State>;

    /// `Qf(y) = ∫ f(z) Q(y, dz)`.
    fn integrate(&self, y: &State, f: &TestFunction) -> Result<f64>;

    /// Atoms of `Q(y, ·)` for discrete kernels.
    fn masses(&self, _y: &State) -> Option<Result<Vec<(State, f64)>>> {
        None
    }

    /// `Q̃(y, dz) = h(z) Q(y, dz) / Qh(y)`.
    fn tilt(&self, h: &TestFunction) -> Result<Arc<dyn JumpKernel>>;
}

pub type MassFn = Arc<dyn Fn(&State) -> Result<Vec<(State, f64)>> + Send + Sync>;

/// Finitely many destinations with masses, sampled by inverse CDF in listed
/// order.
#[derive(Clone)]
pub struct DiscreteKernel {
    masses: MassFn,
    label: String,
}

impl fmt::Debug for DiscreteKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiscreteKernel({})", self.label)
    }
}

impl DiscreteKernel {
    pub fn new(
        masses: impl Fn(&State) -> Result<Vec<(State, f64)>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            masses: Arc::new(masses),
            label: "custom".into(),
        }
    }

    /// Row `label(y)` of `matrix` gives the masses of the destinations
    /// `y.with_label(j)`; coordinates are carried over.
    pub fn label_matrix(matrix: Vec<Vec<f64>>) -> Self {
        let rows = matrix.len();
        Self {
            masses: Arc::new(move |y: &State| {
                let i = y.label_index();
                let row = matrix.get(i).ok_or_else(|| {
                    Error::UnsupportedState(format!("label {i} outside 0..{rows}"))
                })?;
                Ok(row
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| **m > 0.0)
                    .map(|(j, m)| (y.clone().with_label(j as u32), *m))
                    .collect())
            }),
            label: format!("{rows}x{rows} matrix"),
        }
    }

    /// `Q(y, ·) = δ_{map(y)}`.
    pub fn degenerate(map: impl Fn(&State) -> State + Send + Sync + 'static) -> Self {
        Self {
            masses: Arc::new(move |y: &State| Ok(vec![(map(y), 1.0)])),
            label: "degenerate".into(),
        }
    }

    fn tilted(&self, h: &TestFunction) -> Self {
        let base = self.masses.clone();
        let h = h.clone();
        let label = format!("{} tilted by {}", self.label, h.name());
        Self {
            masses: Arc::new(move |y: &State| {
                let weighted: Vec<(State, f64)> = base(y)?
                    .into_iter()
                    .map(|(z, m)| {
                        let w = m * h.at(&z);
                        (z, w)
                    })
                    .collect();
                let qh: f64 = weighted.iter().map(|(_, w)| w).sum();
                if !(qh > 0.0) || !qh.is_finite() {
                    return Err(Error::ZeroQh(format!("Qh = {qh} at {y}")));
                }
                Ok(weighted.into_iter().map(|(z, w)| (z, w / qh)).collect())
            }),
            label,
        }
    }
}

impl JumpKernel for DiscreteKernel {
    fn support_kind(&self) -> SupportKind {
        SupportKind::Discrete
    }

    fn sample(&self, y: &State, u: &mut dyn UniformSource) -> Result<State> {
        let masses = (self.masses)(y)?;
        let v = u.next_uniform();
        let mut cum = 0.0;
        let mut last = None;
        for (z, m) in &masses {
            if *m <= 0.0 {
                continue;
            }
            cum += m;
            if v < cum {
                return Ok(z.clone());
            }
            last = Some(z);
        }
        last.cloned()
            .ok_or_else(|| Error::UnsupportedState(format!("no destinations from {y}")))
    }

    fn integrate(&self, y: &State, f: &TestFunction) -> Result<f64> {
        Ok((self.masses)(y)?.iter().map(|(z, m)| m * f.at(z)).sum())
    }

    fn masses(&self, y: &State) -> Option<Result<Vec<(State, f64)>>> {
        Some((self.masses)(y))
    }

    fn tilt(&self, h: &TestFunction) -> Result<Arc<dyn JumpKernel>> {
        Ok(Arc::new(self.tilted(h)))
    }
}

pub type SupportFn = Arc<dyn Fn(&State) -> (f64, f64) + Send + Sync>;
pub type DensityValueFn = Arc<dyn Fn(&State, f64) -> f64 + Send + Sync>;
pub type PlaceFn = Arc<dyn Fn(&State, f64) -> State + Send + Sync>;
pub type SamplerFn = Arc<dyn Fn(&State, &mut dyn UniformSource) -> f64 + Send + Sync>;
/// Bound `M(y) >= sup_z h(z)` over the support of `Q(y, ·)`.
pub type EnvelopeFn = Arc<dyn Fn(&State, &TestFunction) -> Option<f64> + Send + Sync>;

/// Destination `place(y, z)` with `z` drawn from a density on a bounded
/// interval `support(y)`.
#[derive(Clone)]
pub struct DensityKernel {
    support: SupportFn,
    density: DensityValueFn,
    place: PlaceFn,
    sampler: SamplerFn,
    envelope: Option<EnvelopeFn>,
    label: String,
}

impl fmt::Debug for DensityKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DensityKernel({})", self.label)
    }
}

impl DensityKernel {
    pub fn new(
        support: impl Fn(&State) -> (f64, f64) + Send + Sync + 'static,
        density: impl Fn(&State, f64) -> f64 + Send + Sync + 'static,
        place: impl Fn(&State, f64) -> State + Send + Sync + 'static,
        sampler: impl Fn(&State, &mut dyn UniformSource) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            support: Arc::new(support),
            density: Arc::new(density),
            place: Arc::new(place),
            sampler: Arc::new(sampler),
            envelope: None,
            label: "density".into(),
        }
    }

    /// Reset to a uniform draw on `[lo, hi)` in coordinate 0, whatever `y` is.
    pub fn uniform_reset(lo: f64, hi: f64) -> Self {
        let width = hi - lo;
        let mut k = Self::new(
            move |_| (lo, hi),
            move |_, _| 1.0 / width,
            |_, z| State::scalar(z),
            move |_, u| lo + width * u.next_uniform(),
        );
        k.label = format!("uniform[{lo},{hi})");
        k
    }

    /// Author-supplied rejection envelope, used when `h` has no declared range.
    pub fn with_envelope(
        mut self,
        envelope: impl Fn(&State, &TestFunction) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        self.envelope = Some(Arc::new(envelope));
        self
    }

    fn envelope_for(&self, y: &State, h: &TestFunction) -> Option<f64> {
        if let Some(env) = &self.envelope {
            if let Some(m) = env(y, h) {
                return Some(m);
            }
        }
        h.range().map(|(_, hi)| hi).filter(|m| m.is_finite() && *m > 0.0)
    }
}

impl JumpKernel for DensityKernel {
    fn support_kind(&self) -> SupportKind {
        SupportKind::Density1d
    }

    fn sample(&self, y: &State, u: &mut dyn UniformSource) -> Result<State> {
        let z = (self.sampler)(y, u);
        Ok((self.place)(y, z))
    }

    fn integrate(&self, y: &State, f: &TestFunction) -> Result<f64> {
        let (lo, hi) = (self.support)(y);
        let r = integrate(
            |z| Ok(f.at(&(self.place)(y, z)) * (self.density)(y, z)),
            lo,
            hi,
            &[],
            KERNEL_TOL,
            DEFAULT_MAX_EVALS,
        )?;
        Ok(r.value)
    }

    fn tilt(&self, h: &TestFunction) -> Result<Arc<dyn JumpKernel>> {
        TiltedKernel::new(Arc::new(self.clone()), h.clone())
            .map(|k| Arc::new(k) as Arc<dyn JumpKernel>)
    }
}

/// `h(z) Q(y, dz) / Qh(y)` for a density kernel, sampled by rejection from
/// `Q(y, ·)`: accept `z` when `u · M(y) <= h(z)`.
#[derive(Clone)]
pub struct TiltedKernel {
    base: Arc<DensityKernel>,
    h: TestFunction,
}

impl fmt::Debug for TiltedKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TiltedKernel({:?} by {})", self.base, self.h.name())
    }
}

impl TiltedKernel {
    pub fn new(base: Arc<DensityKernel>, h: TestFunction) -> Result<Self> {
        if base.envelope.is_none() && h.range().is_none_or(|(_, hi)| !hi.is_finite()) {
            return Err(Error::MissingEnvelope);
        }
        Ok(Self { base, h })
    }

    pub fn weight(&self) -> &TestFunction {
        &self.h
    }
}

impl JumpKernel for TiltedKernel {
    fn support_kind(&self) -> SupportKind {
        SupportKind::Density1d
    }

    fn sample(&self, y: &State, u: &mut dyn UniformSource) -> Result<State> {
        let bound = self.base.envelope_for(y, &self.h).ok_or(Error::MissingEnvelope)?;
        for _ in 0..MAX_REJECTIONS {
            let z = self.base.sample(y, u)?;
            let hz = self.h.at(&z);
            if hz > bound {
                return Err(Error::EnvelopeViolated { value: hz, bound });
            }
            if u.next_uniform() * bound <= hz {
                return Ok(z);
            }
        }
        Err(Error::InversionFailure(format!(
            "rejection sampler made no acceptance in {MAX_REJECTIONS} proposals at {y}"
        )))
    }

    fn integrate(&self, y: &State, f: &TestFunction) -> Result<f64> {
        let qh = self.base.integrate(y, &self.h)?;
        if !(qh > 0.0) {
            return Err(Error::ZeroQh(format!("Qh = {qh} at {y}")));
        }
        Ok(self.base.integrate(y, &f.product(&self.h))? / qh)
    }

    fn tilt(&self, h: &TestFunction) -> Result<Arc<dyn JumpKernel>> {
        TiltedKernel::new(self.base.clone(), self.h.product(h))
            .map(|k| Arc::new(k) as Arc<dyn JumpKernel>)
    }
}

/// `z = y - E` in coordinate 0 with `E ~ Exp(μ)`; integrals of exponential
/// sums and polynomials come from moment formulas.
#[derive(Clone, Debug)]
pub struct ShiftedExponentialKernel {
    mu: f64,
    quadrature_fallback: bool,
}

impl ShiftedExponentialKernel {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::BadParameters(format!("claim rate {mu} must be > 0")));
        }
        Ok(Self {
            mu,
            quadrature_fallback: true,
        })
    }

    /// Refuse functions without a closed form instead of integrating them
    /// numerically.
    pub fn oracle_only(mut self) -> Self {
        self.quadrature_fallback = false;
        self
    }

    pub fn rate(&self) -> f64 {
        self.mu
    }

    fn moment_integral(&self, y: f64, form: &FunctionForm) -> Option<Result<f64>> {
        let mu = self.mu;
        match form {
            FunctionForm::Constant(c) => Some(Ok(*c)),
            FunctionForm::ExpSum { coord: 0, terms } => Some(
                terms
                    .iter()
                    .map(|(a, b)| {
                        if mu + b > 0.0 {
                            Ok(a * (b * y).exp() * mu / (mu + b))
                        } else if *a == 0.0 {
                            Ok(0.0)
                        } else {
                            Err(Error::MissingOracle(format!(
                                "E exp({b} (y - E)) diverges for claim rate {mu}"
                            )))
                        }
                    })
                    .sum(),
            ),
            FunctionForm::Polynomial { coord: 0, coeffs } => {
                // E[(y - E)^k] = Σ_j C(k,j) y^{k-j} (-1)^j j!/μ^j
                let mut total = 0.0;
                for (k, c) in coeffs.iter().enumerate() {
                    let mut binom = 1.0;
                    let mut fact_over_mu = 1.0;
                    let mut term = 0.0;
                    for j in 0..=k {
                        if j > 0 {
                            binom *= (k - j + 1) as f64 / j as f64;
                            fact_over_mu *= j as f64 / mu;
                        }
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        term += binom * y.powi((k - j) as i32) * sign * fact_over_mu;
                    }
                    total += c * term;
                }
                Some(Ok(total))
            }
            _ => None,
        }
    }
}

impl JumpKernel for ShiftedExponentialKernel {
    fn support_kind(&self) -> SupportKind {
        SupportKind::MomentOracle
    }

    fn sample(&self, y: &State, u: &mut dyn UniformSource) -> Result<State> {
        if y.coords.is_empty() {
            return Err(Error::UnsupportedState(format!("{y} has no coordinate")));
        }
        let claim = -u.next_uniform().ln() / self.mu;
        let mut z = y.clone();
        z.coords[0] -= claim;
        z.tag = crate::sds::StateTag::Interior;
        Ok(z)
    }

    fn integrate(&self, y: &State, f: &TestFunction) -> Result<f64> {
        let y0 = y.coord(0);
        if let Some(v) = f.form().and_then(|form| self.moment_integral(y0, form)) {
            return v;
        }
        if !self.quadrature_fallback {
            return Err(Error::MissingOracle(format!(
                "no moment formula for {}",
                f.name()
            )));
        }
        // u = exp(-μ e) maps the claim law to the uniform law on (0, 1).
        let mu = self.mu;
        let r = integrate(
            |u: f64| {
                let mut z = y.clone();
                z.coords[0] = y0 + u.ln() / mu;
                Ok(f.at(&z))
            },
            0.0,
            1.0,
            &[],
            KERNEL_TOL,
            DEFAULT_MAX_EVALS,
        )?;
        Ok(r.value)
    }

    fn tilt(&self, h: &TestFunction) -> Result<Arc<dyn JumpKernel>> {
        match h.form() {
            Some(FunctionForm::Constant(c)) if *c > 0.0 => Ok(Arc::new(self.clone())),
            Some(FunctionForm::ExpSum { coord: 0, terms })
                if terms.len() == 1 && terms[0].0 > 0.0 =>
            {
                let b = terms[0].1;
                if self.mu + b > 0.0 {
                    Ok(Arc::new(Self {
                        mu: self.mu + b,
                        quadrature_fallback: self.quadrature_fallback,
                    }))
                } else {
                    Err(Error::ZeroQh(format!(
                        "exponential tilt {b} leaves no claim law for rate {}",
                        self.mu
                    )))
                }
            }
            _ => Err(Error::MissingOracle(format!(
                "no tilted sampler for {} under exponential claims",
                h.name()
            ))),
        }
    }
}
