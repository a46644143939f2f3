use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{PdmpModel, Skeleton};
use crate::error::{Error, Result};
use crate::sds::State;

/// Replications per chunk. Chunks are the unit of parallel work and are
/// merged in index order, so results do not depend on the worker count.
pub const CHUNK: u64 = 1024;

/// Running mean, variance and range (Welford, merged by Chan's formula).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for Accumulator {
    fn default() -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (a, b) = (self.n as f64, other.n as f64);
        self.mean += d * b / n as f64;
        self.m2 += other.m2 + d * d * a * b / n as f64;
        self.n = n;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self, excluded_exploded: usize) -> Estimate {
        let stderr = (self.variance() / self.n as f64).sqrt();
        Estimate {
            mean: self.mean,
            stderr,
            n: self.n as usize,
            ci95: (self.mean - 1.96 * stderr, self.mean + 1.96 * stderr),
            excluded_exploded,
        }
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub ci95: (f64, f64),
    pub excluded_exploded: usize,
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Values(Vec<f64>),
    /// The path hit the jump cap and is left out of every statistic.
    Exploded,
}

/// Per-component accumulators over `n` replications.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicated {
    pub components: Vec<Accumulator>,
    pub exploded: usize,
}

impl Replicated {
    pub fn estimate(&self, i: usize) -> Estimate {
        self.components[i].estimate(self.exploded)
    }
}

/// Run `sample(rep)` for `rep in 0..n` on `workers` threads (0: all cores).
/// Each call must return `dims` values or [`Sample::Exploded`]. The first
/// error in replication order is returned.
pub fn replicate<F>(n: u64, workers: usize, dims: usize, sample: F) -> Result<Replicated>
where
    F: Fn(u64) -> Result<Sample> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let run_chunk = |c: u64| -> Result<(Vec<Accumulator>, usize)> {
        let mut acc = vec![Accumulator::default(); dims];
        let mut exploded = 0;
        for rep in c * CHUNK..((c + 1) * CHUNK).min(n) {
            match sample(rep)? {
                Sample::Exploded => exploded += 1,
                Sample::Values(v) => {
                    if v.len() != dims {
                        return Err(Error::BadParameters(format!(
                            "replication {rep} returned {} values, expected {dims}",
                            v.len()
                        )));
                    }
                    for (a, x) in acc.iter_mut().zip(v) {
                        a.push(x);
                    }
                }
            }
        }
        Ok((acc, exploded))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let parts: Vec<Result<(Vec<Accumulator>, usize)>> =
        pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect());
    let mut components = vec![Accumulator::default(); dims];
    let mut exploded = 0;
    for part in parts {
        let (acc, e) = part?;
        for (total, a) in components.iter_mut().zip(&acc) {
            total.merge(a);
        }
        exploded += e;
    }
    if n > 0 && exploded as u64 == n {
        return Err(Error::AllExploded);
    }
    Ok(Replicated {
        components,
        exploded,
    })
}

/// Mean and standard error of `functional` over `n` skeletons on `[0, T]`
/// from `x0`, replication `r` using the streams keyed by `(seed, r)`.
pub fn estimate<F>(
    model: &PdmpModel,
    functional: F,
    x0: &State,
    horizon: f64,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<Estimate>
where
    F: Fn(&Skeleton) -> Result<f64> + Sync,
{
    if n < 2 {
        return Err(Error::BadParameters(format!("need at least 2 replications, got {n}")));
    }
    let r = replicate(n as u64, workers, 1, |rep| {
        let s = model.simulate_replication(x0, horizon, seed, rep)?;
        if s.exploded() {
            return Ok(Sample::Exploded);
        }
        Ok(Sample::Values(vec![functional(&s)?]))
    })?;
    Ok(r.estimate(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump_law::{DiscreteKernel, HazardLaw};
    use crate::sds::{ConstantFlow, StateDescriptor};
    use std::sync::Arc;

    fn poisson(rate: f64) -> PdmpModel {
        PdmpModel::new(
            "poisson",
            Arc::new(ConstantFlow),
            HazardLaw::constant(rate),
            Arc::new(DiscreteKernel::label_matrix(vec![
                vec![0.0, 1.0],
                vec![1.0, 0.0],
            ])),
            StateDescriptor::finite(2),
        )
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
        let mut all = Accumulator::default();
        xs.iter().for_each(|x| all.push(*x));
        let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
        xs[..40].iter().for_each(|x| a.push(*x));
        xs[40..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn constant_functional_has_zero_stderr() {
        let m = poisson(1.0);
        let e = estimate(&m, |_| Ok(1.0), &State::labelled(0), 1.0, 100, 3, 2).unwrap();
        assert_eq!((e.mean, e.stderr, e.n), (1.0, 0.0, 100));
        assert_eq!(e.ci95, (1.0, 1.0));
    }

    #[test]
    fn jump_count_is_poisson_and_deterministic() {
        let m = poisson(2.0);
        let count = |s: &Skeleton| Ok(s.jump_count() as f64);
        let a = estimate(&m, count, &State::labelled(0), 1.0, 20_000, 11, 1).unwrap();
        let b = estimate(&m, count, &State::labelled(0), 1.0, 20_000, 11, 4).unwrap();
        assert_eq!(a, b);
        assert!((a.mean - 2.0).abs() < 3.0 * a.stderr);
    }

    #[test]
    fn all_exploded_is_an_error() {
        let m = poisson(100.0).with_max_jumps(1);
        let r = estimate(&m, |_| Ok(0.0), &State::labelled(0), 10.0, 10, 1, 1);
        assert_eq!(r, Err(Error::AllExploded));
    }
}
