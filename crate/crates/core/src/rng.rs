//! Counter-based uniform variates.
//!
//! Every replication owns disjoint ChaCha8 streams keyed by
//! `(seed, replication, substream)`; the draw index is the position within the
//! stream. A replication's variates therefore do not depend on which worker
//! runs it or in what order.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source of uniform variates on the open interval `(0, 1)`.
pub trait UniformSource {
    fn next_uniform(&mut self) -> f64;
}

/// Sub-streams of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    HoldingTime = 0,
    Destination = 1,
    Auxiliary = 2,
}

const STREAMS_PER_REPLICATION: u64 = 4;

/// Map 52 random bits to the midpoint grid of `(0, 1)`; never returns 0 or 1.
pub fn bits_to_open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

fn key(seed: u64) -> [u8; 32] {
    let mut k = [0u8; 32];
    k[..8].copy_from_slice(&seed.to_le_bytes());
    k[8..16].copy_from_slice(b"pdmp-rng");
    k
}

/// One keyed stream `(seed, replication, substream)`.
#[derive(Debug, Clone)]
pub struct VariateStream {
    rng: ChaCha8Rng,
    draws: u64,
}

impl VariateStream {
    pub fn new(seed: u64, replication: u64, substream: Substream) -> Self {
        let mut rng = ChaCha8Rng::from_seed(key(seed));
        rng.set_stream(replication * STREAMS_PER_REPLICATION + substream as u64);
        Self { rng, draws: 0 }
    }

    /// Number of uniforms consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// The `index`-th uniform of the stream, independent of the cursor.
    pub fn uniform_at(&self, index: u64) -> f64 {
        let mut rng = self.rng.clone();
        rng.set_word_pos(u128::from(index) * 2);
        bits_to_open_unit(rng.next_u64())
    }
}

impl UniformSource for VariateStream {
    fn next_uniform(&mut self) -> f64 {
        self.draws += 1;
        bits_to_open_unit(self.rng.next_u64())
    }
}

/// The three sub-streams of a replication.
#[derive(Debug, Clone)]
pub struct ReplicationStreams {
    pub holding: VariateStream,
    pub destination: VariateStream,
    pub auxiliary: VariateStream,
}

impl ReplicationStreams {
    pub fn new(seed: u64, replication: u64) -> Self {
        Self {
            holding: VariateStream::new(seed, replication, Substream::HoldingTime),
            destination: VariateStream::new(seed, replication, Substream::Destination),
            auxiliary: VariateStream::new(seed, replication, Substream::Auxiliary),
        }
    }
}

/// Replays a fixed list of uniforms, cycling when exhausted.
#[derive(Debug, Clone)]
pub struct FixedUniforms {
    values: Vec<f64>,
    pos: usize,
}

impl FixedUniforms {
    pub fn new(values: impl Into<Vec<f64>>) -> Self {
        let values = values.into();
        assert!(!values.is_empty(), "FixedUniforms needs at least one value");
        Self { values, pos: 0 }
    }
}

impl UniformSource for FixedUniforms {
    fn next_uniform(&mut self) -> f64 {
        let u = self.values[self.pos % self.values.len()];
        self.pos += 1;
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniforms_are_in_open_interval() {
        assert!(bits_to_open_unit(0) > 0.0);
        assert!(bits_to_open_unit(u64::MAX) < 1.0);
        let mut s = VariateStream::new(1, 0, Substream::HoldingTime);
        for _ in 0..10_000 {
            let u = s.next_uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn streams_are_keyed_and_random_access() {
        let mut a = VariateStream::new(7, 3, Substream::Destination);
        let b = VariateStream::new(7, 3, Substream::Destination);
        let first: Vec<f64> = (0..5).map(|_| a.next_uniform()).collect();
        for (i, u) in first.iter().enumerate() {
            assert_eq!(*u, b.uniform_at(i as u64));
        }
        let mut c = VariateStream::new(7, 3, Substream::HoldingTime);
        let mut d = VariateStream::new(7, 4, Substream::Destination);
        let mut e = VariateStream::new(8, 3, Substream::Destination);
        assert_ne!(c.next_uniform(), first[0]);
        assert_ne!(d.next_uniform(), first[0]);
        assert_ne!(e.next_uniform(), first[0]);
    }

    #[test]
    fn mean_and_variance_are_uniform() {
        let mut s = VariateStream::new(42, 0, Substream::Auxiliary);
        let n = 200_000;
        let (mut m, mut q) = (0.0, 0.0);
        for _ in 0..n {
            let u = s.next_uniform();
            m += u;
            q += u * u;
        }
        m /= n as f64;
        q /= n as f64;
        assert!((m - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
        assert!((q - m * m - 1.0 / 12.0).abs() < 2e-3);
    }

    #[test]
    fn fixed_uniforms_cycle() {
        let mut f = FixedUniforms::new(vec![0.2, 0.7]);
        assert_eq!(
            [f.next_uniform(), f.next_uniform(), f.next_uniform()],
            [0.2, 0.7, 0.2]
        );
    }
}
