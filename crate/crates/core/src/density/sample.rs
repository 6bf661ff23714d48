use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interval::Interval;

use super::gaussian::GaussianLowerBound;
use super::DensityBound;

/// A samplable probability density with a known pdf.
#[derive(Clone, Debug)]
pub enum Sampler {
    Gaussian(GaussianLowerBound),
    /// Uniform on a box.
    Uniform(Vec<Interval>),
    /// Weights are normalized to sum to one.
    Mixture(Vec<(f64, Sampler)>),
}

impl Sampler {
    /// A mixture with the given nonnegative weights, normalized.
    pub fn mixture(parts: Vec<(f64, Sampler)>) -> Sampler {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        assert!(total > 0.0, "mixture needs positive total weight");
        Sampler::Mixture(parts.into_iter().map(|(w, s)| (w / total, s)).collect())
    }

    pub fn dim(&self) -> usize {
        match self {
            Sampler::Gaussian(g) => g.dim(),
            Sampler::Uniform(b) => b.len(),
            Sampler::Mixture(parts) => parts[0].1.dim(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Sampler::Gaussian(g) => g.draw(rng, out),
            Sampler::Uniform(b) => {
                for (o, iv) in out.iter_mut().zip(b) {
                    let u: f64 = rng.random();
                    *o = iv.lo() + u * (iv.hi() - iv.lo());
                }
            }
            Sampler::Mixture(parts) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, s) in parts {
                    acc += w;
                    if u < acc {
                        return s.draw(rng, out);
                    }
                }
                parts.last().expect("empty mixture").1.draw(rng, out)
            }
        }
    }

    /// `count` points from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        (0..count)
            .map(|_| {
                let mut p = vec![0.0; n];
                self.draw(&mut rng, &mut p);
                p
            })
            .collect()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match self {
            Sampler::Gaussian(g) => g.value(x),
            Sampler::Uniform(b) => {
                if x.iter().zip(b).all(|(xi, iv)| iv.contains(*xi)) {
                    1.0 / b.iter().map(|iv| iv.hi() - iv.lo()).product::<f64>()
                } else {
                    0.0
                }
            }
            Sampler::Mixture(parts) => parts.iter().map(|(w, s)| w * s.pdf(x)).sum(),
        }
    }
}
