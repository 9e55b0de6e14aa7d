//! Order-fixed reductions, so ensemble averages do not depend on how the
//! trajectories were scheduled.

use serde::{Deserialize, Serialize};

const LEAF: usize = 32;

/// Pairwise (cascade) summation with a fixed split, hence a fixed rounding
/// pattern for a given slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    /// Two-pass estimate. With a single sample the variance is reported as 0.
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                variance: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let variance = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            pairwise_sum(&dev) / (n - 1) as f64
        } else {
            0.0
        };
        Summary {
            mean,
            variance,
            stderr: (variance / n as f64).sqrt(),
            n,
        }
    }
}
