//! Empirical check of the VMF density-ratio bound
//! `ln f(y | x1) - ln f(y | x2) <= eps * d2(x1, x2) <= eps * d_angle(x1, x2)`.

use idshield::geometry::{self, UnitVector};
use idshield::vmf::{self, VmfParams, VmfSampler};
use idshield::{RandomStream, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const SLACK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpCheckReport {
    pub epsilon: f64,
    pub dim: usize,
    pub trials: usize,
    /// Largest `ratio - eps * d2` seen; never positive beyond rounding.
    pub max_slack_chord: f64,
    /// Largest `ratio - eps * d_angle` seen.
    pub max_slack_angular: f64,
    pub max_log_ratio: f64,
    pub violations: usize,
}

impl DpCheckReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Trial `t` draws `x1, x2` uniformly and takes `y` from `VMF(x1, eps)`,
/// uniformly, or as the worst case `(x1 - x2) / |x1 - x2|`, cycling by `t mod 3`.
pub fn check_dp(dim: usize, epsilon: f64, trials: usize, seed: u64) -> Result<DpCheckReport> {
    let sampler = VmfSampler::new(dim, epsilon)?;
    let per_trial: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = RandomStream::derive(seed, &[t as u64]);
            let x1 = geometry::uniform_sample(dim, &mut rng)?;
            let x2 = geometry::uniform_sample(dim, &mut rng)?;
            let y = match t % 3 {
                0 => sampler.sample(&x1, &mut rng)?,
                1 => geometry::uniform_sample(dim, &mut rng)?,
                _ => UnitVector::new(x1.as_slice().iter().zip(x2.as_slice()).map(|(a, b)| a - b).collect())?,
            };
            let ratio = vmf::log_density(&y, &VmfParams::new(x1.clone(), epsilon)?)?
                - vmf::log_density(&y, &VmfParams::new(x2.clone(), epsilon)?)?;
            let chord = epsilon * geometry::euclidean_distance(&x1, &x2)?;
            let arc = epsilon * geometry::angular_distance(&x1, &x2)?.radians();
            Ok((ratio, ratio - chord, ratio - arc))
        })
        .collect::<Result<_>>()?;
    let max = |f: fn(&(f64, f64, f64)) -> f64| per_trial.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    Ok(DpCheckReport {
        epsilon,
        dim,
        trials,
        max_slack_chord: max(|t| t.1),
        max_slack_angular: max(|t| t.2),
        max_log_ratio: max(|t| t.0),
        violations: per_trial
            .iter()
            .filter(|t| t.1 > SLACK_TOLERANCE || t.2 > SLACK_TOLERANCE)
            .count(),
    })
}
