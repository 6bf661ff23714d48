//! Globally adaptive tensor Gauss-Legendre integration over a box.
//!
//! The box is first cut into a uniform grid. Each cell carries the sum of
//! the rule over its two halves and, as error estimate, the difference to
//! the rule over the whole cell. The cell with the largest estimate is
//! bisected until the summed estimate drops below the tolerance or the
//! evaluation budget runs out. Not certified; used for mass fractions and
//! as a test oracle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::interval::Interval;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub max_evals: usize,
    /// Grid cells per dimension before refinement; chosen from the
    /// dimension when `None`.
    pub cells_per_dim: Option<usize>,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            abs_tol: 1e-3,
            max_evals: 20_000_000,
            cells_per_dim: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    fn for_dim(n: usize) -> Rule {
        if n <= 4 {
            let a = (3.0f64 / 5.0).sqrt();
            Rule {
                nodes: vec![-a, 0.0, a],
                weights: vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
            }
        } else {
            let a = 1.0 / 3f64.sqrt();
            Rule {
                nodes: vec![-a, a],
                weights: vec![1.0, 1.0],
            }
        }
    }

    fn apply(&self, f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], x: &mut [f64], evals: &mut usize) -> f64 {
        let n = lo.len();
        let m = self.nodes.len();
        let total = m.pow(n as u32);
        let mut sum = 0.0;
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            let mut w = 1.0;
            for k in 0..n {
                let c = 0.5 * (lo[k] + hi[k]);
                let h = 0.5 * (hi[k] - lo[k]);
                x[k] = c + h * self.nodes[idx[k]];
                w *= self.weights[idx[k]] * h;
            }
            sum += w * f(x);
            for k in 0..n {
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
            }
        }
        *evals += total;
        sum
    }
}

struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Rule applied to each half along `axis`.
    halves: [f64; 2],
    axis: usize,
    err: f64,
}

impl Cell {
    fn value(&self) -> f64 {
        self.halves[0] + self.halves[1]
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

pub fn integrate_adaptive(f: &dyn Fn(&[f64]) -> f64, region: &[Interval], opts: &AdaptiveOptions) -> Integral {
    let n = region.len();
    assert!(n > 0, "empty region");
    let rule = Rule::for_dim(n);
    let per_dim = opts
        .cells_per_dim
        .unwrap_or_else(|| (4096f64.powf(1.0 / n as f64).floor() as usize).clamp(2, 64));
    let scale: Vec<f64> = region.iter().map(|r| r.hi() - r.lo()).collect();
    let mut x = vec![0.0; n];
    let mut evals = 0usize;

    let make = |lo: Vec<f64>, hi: Vec<f64>, whole: f64, x: &mut [f64], evals: &mut usize| -> Cell {
        // bisect along the relatively widest side
        let axis = (0..n)
            .max_by(|&a, &b| {
                let ra = (hi[a] - lo[a]) / scale[a];
                let rb = (hi[b] - lo[b]) / scale[b];
                ra.total_cmp(&rb).then(b.cmp(&a))
            })
            .unwrap();
        let mid = 0.5 * (lo[axis] + hi[axis]);
        let mut hi0 = hi.clone();
        hi0[axis] = mid;
        let mut lo1 = lo.clone();
        lo1[axis] = mid;
        let h0 = rule.apply(f, &lo, &hi0, x, evals);
        let h1 = rule.apply(f, &lo1, &hi, x, evals);
        Cell {
            err: (h0 + h1 - whole).abs(),
            halves: [h0, h1],
            axis,
            lo,
            hi,
        }
    };

    let mut heap = BinaryHeap::new();
    let cells = per_dim.pow(n as u32);
    let mut idx = vec![0usize; n];
    for _ in 0..cells {
        let lo: Vec<f64> = (0..n)
            .map(|k| region[k].lo() + scale[k] * idx[k] as f64 / per_dim as f64)
            .collect();
        let hi: Vec<f64> = (0..n)
            .map(|k| {
                if idx[k] + 1 == per_dim {
                    region[k].hi()
                } else {
                    region[k].lo() + scale[k] * (idx[k] + 1) as f64 / per_dim as f64
                }
            })
            .collect();
        let whole = rule.apply(f, &lo, &hi, &mut x, &mut evals);
        heap.push(make(lo, hi, whole, &mut x, &mut evals));
        for k in 0..n {
            idx[k] += 1;
            if idx[k] < per_dim {
                break;
            }
            idx[k] = 0;
        }
    }

    let mut err: f64 = heap.iter().map(|c| c.err).sum();
    while err > opts.abs_tol && evals < opts.max_evals {
        let c = heap.pop().expect("nonempty heap");
        err -= c.err;
        let mid = 0.5 * (c.lo[c.axis] + c.hi[c.axis]);
        let mut hi0 = c.hi.clone();
        hi0[c.axis] = mid;
        let mut lo1 = c.lo.clone();
        lo1[c.axis] = mid;
        let a = make(c.lo.clone(), hi0, c.halves[0], &mut x, &mut evals);
        let b = make(lo1, c.hi.clone(), c.halves[1], &mut x, &mut evals);
        err += a.err + b.err;
        heap.push(a);
        heap.push(b);
        // guard against drift in the running sum
        if err < opts.abs_tol {
            err = heap.iter().map(|c| c.err).sum();
        }
    }
    let value = heap.iter().map(|c| c.value()).sum();
    let error_estimate = heap.iter().map(|c| c.err).sum();
    Integral {
        value,
        error_estimate,
        evaluations: evals,
    }
}
