//! Sample statistics for replicated experiments.

use serde::Serialize;

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Zero for fewer than two samples.
    pub stderr: f64,
    pub samples: usize,
}

/// Mean with the standard error from the unbiased sample variance.
pub fn mean_stderr(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            stderr: f64::NAN,
            samples: 0,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let stderr = if n < 2 {
        0.0
    } else {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    MeanEstimate {
        mean,
        stderr,
        samples: n,
    }
}

/// `p + z sqrt(p (1 - p) / n)`, the upper edge of a binomial band around `p`.
pub fn binomial_upper(p: f64, n: usize, z: f64) -> f64 {
    p + z * (p * (1.0 - p) / n as f64).sqrt()
}
