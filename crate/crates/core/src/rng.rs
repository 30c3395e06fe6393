//! Seeded random streams.
//!
//! Everything random in the crate draws from [`ChaCha8Rng`] so results are
//! reproducible across platforms given a seed.

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng as Rng64;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::Tensor;

pub fn seeded(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

/// Independent child stream `stream` of a root seed.
pub fn substream(seed: u64, stream: u64) -> Rng64 {
    let mut r = Rng64::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| normal(rng)).collect();
    Tensor::new(data, shape).expect("length matches shape")
}

pub fn uniform_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(data, shape).expect("length matches shape")
}
