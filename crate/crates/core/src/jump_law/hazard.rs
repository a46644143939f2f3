use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sds::{Atom, Flow, PathFunctional, State};

/// Time tolerance of the jump-time inversion.
pub const JUMP_TIME_TOL: f64 = 1e-12;
const HAZARD_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;
/// Beyond this elapsed time an unbounded search reports "no jump".
const SEARCH_CAP: f64 = 1e12;

/// Conditional hazard `Λ(x, dt)`: a rate `λ` integrated along the flow plus
/// atoms `δ ∈ (0, 1]`. An atom with `δ = 1` is a forced jump.
#[derive(Clone, Debug)]
pub struct HazardLaw {
    functional: Arc<PathFunctional>,
}

impl HazardLaw {
    /// Wrap an additive functional whose density is the rate and whose atoms
    /// are the hazard atoms.
    pub fn new(functional: PathFunctional) -> Self {
        Self {
            functional: Arc::new(functional),
        }
    }

    pub fn constant(rate: f64) -> Self {
        Self::new(PathFunctional::constant_rate(rate))
    }

    pub fn from_rate(rate: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(PathFunctional::new(rate))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn with_atoms(
        self,
        atoms: impl Fn(&State, f64) -> Result<Vec<Atom>> + Send + Sync + 'static,
    ) -> Self {
        Self::new((*self.functional).clone().with_atoms(atoms))
    }

    pub fn functional(&self) -> &PathFunctional {
        &self.functional
    }

    pub fn has_atoms(&self) -> bool {
        self.functional.has_atoms()
    }

    /// `λ(x)`.
    pub fn rate(&self, x: &State) -> Result<f64> {
        let r = self.functional.density_at(x)?;
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::BadHazard(format!("rate {r} at {x}")));
        }
        Ok(r)
    }

    /// Hazard atoms `(offset, δ)` on `(0, window]`.
    pub fn atoms(&self, x: &State, window: f64) -> Result<Vec<Atom>> {
        let atoms = self.functional.atoms_in(x, window)?;
        if let Some(bad) = atoms.iter().find(|a| !(a.value > 0.0 && a.value <= 1.0)) {
            return Err(Error::BadHazard(format!(
                "atom value {} at offset {} from {x}",
                bad.value, bad.offset
            )));
        }
        Ok(atoms)
    }

    /// Whether a forced atom sits at the horizon `c(x)`.
    pub fn terminal_forced(&self, flow: &dyn Flow, x: &State) -> Result<bool> {
        let c = flow.horizon(x);
        if !c.is_finite() {
            return Ok(false);
        }
        Ok(self
            .atoms(x, c)?
            .last()
            .is_some_and(|a| a.value == 1.0 && crate::sds::offsets_coincide(a.offset, c)))
    }

    /// `(∫_0^t λ(φ_x(s)) ds, atoms on (0, t])`.
    pub fn cumulative_hazard(
        &self,
        flow: &dyn Flow,
        x: &State,
        t: f64,
    ) -> Result<(f64, Vec<Atom>)> {
        let continuous = self.functional.continuous_part(flow, x, t, HAZARD_TOL)?;
        let atoms = if t > 0.0 { self.atoms(x, t)? } else { Vec::new() };
        Ok((continuous, atoms))
    }

    /// `F(x, t) = exp(-∫λ) ∏(1 - δ)`.
    pub fn survival(&self, flow: &dyn Flow, x: &State, t: f64) -> Result<f64> {
        let (continuous, atoms) = self.cumulative_hazard(flow, x, t)?;
        Ok(atoms
            .iter()
            .fold((-continuous).exp(), |acc, a| acc * (1.0 - a.value)))
    }

    /// `inf{t : F(x, t) <= u}`, or `+∞` when the survival never drops to `u`.
    pub fn sample_jump_time(&self, flow: &dyn Flow, x: &State, u: f64) -> Result<f64> {
        Ok(self
            .sample_jump_time_within(flow, x, u, f64::INFINITY)?
            .unwrap_or(f64::INFINITY))
    }

    /// As [`Self::sample_jump_time`], restricted to `(0, limit]`: `None` means
    /// no jump by `min(limit, c(x))`.
    pub fn sample_jump_time_within(
        &self,
        flow: &dyn Flow,
        x: &State,
        u: f64,
        limit: f64,
    ) -> Result<Option<f64>> {
        if x.is_cemetery() {
            return Err(Error::CemeteryInput);
        }
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::BadParameters(format!("uniform {u} outside (0,1)")));
        }
        let target = -u.ln();
        let end = limit.min(flow.horizon(x));
        if !(end > 0.0) {
            return Ok(None);
        }
        if end.is_finite() {
            let (hit, _) = self.scan(flow, x, 0.0, end, target)?;
            return Ok(hit);
        }
        // Unbounded window: scan doubling blocks, rebasing at each block start.
        let mut start = 0.0;
        let mut width = 1.0;
        let mut acc = 0.0;
        let mut base = x.clone();
        while start < SEARCH_CAP {
            let (hit, spent) = self.scan(flow, &base, acc, width, target)?;
            if let Some(s) = hit {
                return Ok(Some(start + s));
            }
            acc = spent;
            base = flow.eval(&base, width)?;
            start += width;
            width *= 2.0;
        }
        Ok(None)
    }

    /// Scan `(0, end]` from `z` with `acc` hazard already spent. Returns the
    /// crossing offset, if any, and the hazard spent by `end`.
    fn scan(
        &self,
        flow: &dyn Flow,
        z: &State,
        mut acc: f64,
        end: f64,
        target: f64,
    ) -> Result<(Option<f64>, f64)> {
        let atoms = self.atoms(z, end)?;
        let cont = |t: f64| self.functional.continuous_part(flow, z, t, HAZARD_TOL);
        let mut prev = 0.0;
        let mut c_prev = 0.0;
        let stops = atoms
            .iter()
            .map(|a| (a.offset, Some(a.value)))
            .chain(std::iter::once((end, None)));
        for (s, delta) in stops {
            if s > prev {
                let c_s = cont(s)?;
                if acc + c_s - c_prev >= target {
                    let t = self.invert(flow, z, prev, s, acc - c_prev, target, &cont)?;
                    return Ok((Some(t), target));
                }
                acc += c_s - c_prev;
                c_prev = c_s;
                prev = s;
            }
            if let Some(delta) = delta {
                if delta >= 1.0 {
                    return Ok((Some(s), f64::INFINITY));
                }
                acc -= (1.0 - delta).ln();
                if acc >= target {
                    return Ok((Some(s), acc));
                }
            }
        }
        Ok((None, acc))
    }

    /// Solve `base + C(t) = target` on `(lo, hi]` where `C` is the continuous
    /// cumulative from `z`, by Newton steps safeguarded with bisection.
    #[allow(clippy::too_many_arguments)]
    fn invert(
        &self,
        flow: &dyn Flow,
        z: &State,
        lo: f64,
        hi: f64,
        base: f64,
        target: f64,
        cont: &dyn Fn(f64) -> Result<f64>,
    ) -> Result<f64> {
        let (mut lo, mut hi) = (lo, hi);
        let rate_at = |t: f64| -> Result<f64> { self.rate(&flow.eval(z, t)?) };
        let g = |t: f64| -> Result<f64> { Ok(base + cont(t)? - target) };
        let r0 = rate_at(lo)?;
        let mut t = if r0 > 0.0 {
            lo - g(lo)? / r0
        } else {
            0.5 * (lo + hi)
        };
        if !(t > lo && t <= hi) {
            t = 0.5 * (lo + hi);
        }
        for _ in 0..MAX_ITERATIONS {
            let gt = g(t)?;
            if gt >= 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if hi - lo <= JUMP_TIME_TOL * hi.max(1.0) {
                return Ok(hi);
            }
            let r = rate_at(t)?;
            let step = if r > 0.0 { gt / r } else { f64::NAN };
            let next = t - step;
            if step.abs() <= 0.25 * JUMP_TIME_TOL * t.max(1.0) && next > lo && next <= hi {
                return Ok(next);
            }
            t = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::InversionFailure(format!(
            "no convergence on ({lo}, {hi}] for target {target}"
        )))
    }
}
