//! Plain Monte Carlo estimates of `Pr(criterion)`. Uncertified; used to
//! cross-check the search.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensityBound, DensityError, Sampler};
use crate::engine::Problem;
use crate::expr::{Criterion, Model};

const CHUNK: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub samples: u64,
    /// Points where the criterion holds.
    pub hits: u64,
    /// Points where it could not be evaluated (a division by zero).
    pub undefined: u64,
    pub estimate: f64,
    /// Binomial standard error of `estimate`.
    pub std_error: f64,
}

/// Estimates `Pr(criterion)` for points drawn from `sampler`.
///
/// Draws come in chunks of 65536, chunk `i` from stream `i` of a ChaCha8
/// generator seeded with `seed`, so the result does not depend on the
/// number of threads.
pub fn mc_probability(model: &Model, criterion: &Criterion, sampler: &Sampler, samples: u64, seed: u64) -> McEstimate {
    let chunks = samples.div_ceil(CHUNK);
    let n = sampler.dim();
    let (hits, undefined) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut x = vec![0.0; n];
            let mut values = Vec::with_capacity(model.n_vars());
            let mut scratch = Vec::new();
            let (mut hits, mut undefined) = (0u64, 0u64);
            for _ in 0..count {
                sampler.draw(&mut rng, &mut x);
                model.eval_point_into(&x, &mut values, &mut scratch);
                match criterion.eval_point(&values) {
                    Ok(true) => hits += 1,
                    Ok(false) => {}
                    Err(_) => undefined += 1,
                }
            }
            (hits, undefined)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let p = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
    McEstimate {
        samples,
        hits,
        undefined,
        estimate: p,
        std_error: if samples == 0 { 0.0 } else { (p * (1.0 - p) / samples as f64).sqrt() },
    }
}

/// Monte Carlo under the density that the problem's bound lies beneath.
pub fn mc_check(problem: &Problem, samples: u64, seed: u64) -> Result<McEstimate, DensityError> {
    let base = problem.density().base_member().ok_or(DensityError::NoBaseMember)?;
    Ok(mc_probability(problem.model(), problem.criterion(), &base, samples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::bundled;

    #[test]
    fn standard_normal_below_one() {
        let p = bundled("normal-1d").unwrap().build().unwrap();
        let e = mc_check(&p, 200_000, 7).unwrap();
        assert!((e.estimate - 0.841_344_746).abs() < 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn tautology_and_determinism() {
        let c = bundled("pvr-gaussian").unwrap();
        let p = c.build().unwrap().with_criterion("PVR >= 0").unwrap();
        assert_eq!(mc_check(&p, 10_000, 3).unwrap().estimate, 1.0);
        let p = c.build().unwrap();
        assert_eq!(mc_check(&p, 100_000, 3).unwrap(), mc_check(&p, 100_000, 3).unwrap());
    }
}
