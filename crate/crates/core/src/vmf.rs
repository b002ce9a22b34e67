//! von Mises-Fisher distribution on `S^{n-1}`: exact sampling and log-density.
//!
//! Sampling follows Wood (1994): the cosine `w = <mu, y>` is drawn by rejection
//! from a Beta-based envelope, a tangent direction is drawn uniformly on the
//! `(n-2)`-sphere orthogonal to the pole, and the pole `e1` is carried onto
//! `mu` by a Householder reflection.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{self, UnitVector};
use crate::special::{bessel_i_ratio, ln_bessel_i};

/// Iteration cap for the rejection loop. Expected acceptance is bounded away
/// from zero, so hitting this means the envelope is wrong.
pub const MAX_REJECTION_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct VmfParams {
    mu: UnitVector,
    kappa: f64,
}

impl VmfParams {
    pub fn new(mu: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "concentration must be finite and >= 0, got {kappa}"
            )));
        }
        Ok(Self { mu, kappa })
    }

    pub fn mu(&self) -> &UnitVector {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }
}

/// Precomputed envelope for repeated draws at a fixed `(dim, kappa)`.
#[derive(Debug, Clone)]
pub struct VmfSampler {
    dim: usize,
    kappa: f64,
    envelope: Option<Envelope>,
}

#[derive(Debug, Clone)]
struct Envelope {
    b: f64,
    x0: f64,
    c: f64,
    beta: Beta<f64>,
}

impl VmfSampler {
    pub fn new(dim: usize, kappa: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimTooSmall(dim));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "concentration must be finite and >= 0, got {kappa}"
            )));
        }
        let envelope = if kappa == 0.0 {
            None
        } else {
            let m = (dim - 1) as f64;
            // (-2k + sqrt(4k^2 + m^2)) / m without the cancellation at large k.
            let b = m / (2.0 * kappa + (4.0 * kappa * kappa + m * m).sqrt());
            let x0 = (1.0 - b) / (1.0 + b);
            let c = kappa * x0 + m * (1.0 - x0 * x0).ln();
            let beta = Beta::new(0.5 * m, 0.5 * m)
                .map_err(|e| Error::InvalidParameter(format!("beta envelope: {e}")))?;
            Some(Envelope { b, x0, c, beta })
        };
        Ok(Self {
            dim,
            kappa,
            envelope,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Draws `(w, 1 - w^2)` for the cosine to the mean direction.
    fn sample_cosine<R: Rng + ?Sized>(&self, env: &Envelope, rng: &mut R) -> Result<(f64, f64)> {
        let m = (self.dim - 1) as f64;
        for _ in 0..MAX_REJECTION_ITERATIONS {
            let z = env.beta.sample(rng);
            let denom = 1.0 - (1.0 - env.b) * z;
            let w = (1.0 - (1.0 + env.b) * z) / denom;
            let u: f64 = 1.0 - rng.random::<f64>();
            if self.kappa * w + m * (1.0 - env.x0 * w).ln() - env.c >= u.ln() {
                let sin2 = 4.0 * env.b * z * (1.0 - z) / (denom * denom);
                return Ok((w, sin2));
            }
        }
        Err(Error::RejectionLimit(MAX_REJECTION_ITERATIONS))
    }

    pub fn sample<R: Rng + ?Sized>(&self, mu: &UnitVector, rng: &mut R) -> Result<UnitVector> {
        if mu.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: mu.dim(),
            });
        }
        let Some(env) = &self.envelope else {
            return geometry::uniform_sample(self.dim, rng);
        };
        let (w, sin2) = self.sample_cosine(env, rng)?;

        // Sample around the pole e1.
        let mut y = vec![0.0; self.dim];
        let tangent = &mut y[1..];
        loop {
            tangent
                .iter_mut()
                .for_each(|c| *c = rng.sample::<f64, _>(StandardNormal));
            let n = geometry::norm(tangent);
            if n >= geometry::ZERO_NORM {
                let scale = sin2.max(0.0).sqrt() / n;
                tangent.iter_mut().for_each(|c| *c *= scale);
                break;
            }
        }
        y[0] = w;

        householder_from_pole(mu.as_slice(), &mut y);
        UnitVector::new(y)
    }
}

/// Applies the reflection `H = I - 2 u u^T / (u^T u)`, `u = e1 - mu`, which maps
/// `e1` to `mu`.
fn householder_from_pole(mu: &[f64], y: &mut [f64]) {
    let tail: f64 = mu[1..].iter().map(|c| c * c).sum();
    // 1 - mu1 = |mu_tail|^2 / (1 + mu1) on the sphere; avoids cancellation near e1.
    let u1 = if mu[0] > 0.5 {
        tail / (1.0 + mu[0])
    } else {
        1.0 - mu[0]
    };
    let uu = u1 * u1 + tail;
    if uu == 0.0 {
        return;
    }
    let uy = u1 * y[0] - geometry::dot(&mu[1..], &y[1..]);
    let f = 2.0 * uy / uu;
    y[0] -= f * u1;
    y[1..]
        .iter_mut()
        .zip(&mu[1..])
        .for_each(|(yi, mi)| *yi += f * mi);
}

/// One draw from `VMF(mu, kappa)`. `kappa = 0` is the uniform law.
pub fn sample_vmf<R: Rng + ?Sized>(params: &VmfParams, rng: &mut R) -> Result<UnitVector> {
    VmfSampler::new(params.dim(), params.kappa)?.sample(&params.mu, rng)
}

/// `ln C_n(kappa) + kappa <mu, y>`, where
/// `C_n(kappa) = kappa^{n/2-1} / ((2 pi)^{n/2} I_{n/2-1}(kappa))`.
pub fn log_density(y: &UnitVector, params: &VmfParams) -> Result<f64> {
    if y.dim() != params.dim() {
        return Err(Error::DimMismatch {
            expected: params.dim(),
            found: y.dim(),
        });
    }
    Ok(log_normalizer(params.dim(), params.kappa)? + params.kappa * params.mu.dot(y))
}

/// Log of the normalizing constant; the uniform density when `kappa = 0`.
pub fn log_normalizer(dim: usize, kappa: f64) -> Result<f64> {
    if dim < 2 {
        return Err(Error::DimTooSmall(dim));
    }
    if kappa == 0.0 {
        return Ok(-geometry::log_unit_sphere_area(dim)?);
    }
    let half = dim as f64 / 2.0;
    let nu = half - 1.0;
    Ok(nu * kappa.ln() - half * (2.0 * PI).ln() - ln_bessel_i(nu, kappa))
}

/// `A_n(kappa) = I_{n/2}(kappa) / I_{n/2-1}(kappa) = E[<mu, y>]`.
pub fn mean_resultant_length(dim: usize, kappa: f64) -> Result<f64> {
    if dim < 2 {
        return Err(Error::DimTooSmall(dim));
    }
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "concentration must be >= 0, got {kappa}"
        )));
    }
    Ok(bessel_i_ratio(dim as f64 / 2.0 - 1.0, kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::uniform_sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_density_closed_form_dim3() {
        let mu = UnitVector::basis(3, 0).unwrap();
        let p = VmfParams::new(mu.clone(), 1.0).unwrap();
        // ln(1 / (4 pi sinh 1)) + 1 at 50 digits
        let expected = -1.692_463_608_540_486_4;
        assert!((log_density(&mu, &p).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn log_density_differences_cancel_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &dim in &[3usize, 16, 512] {
            let mu = uniform_sample(dim, &mut rng).unwrap();
            let y1 = uniform_sample(dim, &mut rng).unwrap();
            let y2 = uniform_sample(dim, &mut rng).unwrap();
            let k = 37.5;
            let p = VmfParams::new(mu.clone(), k).unwrap();
            let diff = log_density(&y1, &p).unwrap() - log_density(&y2, &p).unwrap();
            let expected = k * (mu.dot(&y1) - mu.dot(&y2));
            assert!((diff - expected).abs() < 1e-11, "dim {dim}");
        }
    }

    #[test]
    fn log_density_dim_mismatch() {
        let p = VmfParams::new(UnitVector::basis(3, 0).unwrap(), 1.0).unwrap();
        let y = UnitVector::basis(4, 0).unwrap();
        assert!(matches!(log_density(&y, &p), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn mean_resultant_examples() {
        assert_eq!(mean_resultant_length(8, 0.0).unwrap(), 0.0);
        assert!((mean_resultant_length(3, 10.0).unwrap() - 0.900_000_004_122_307_3).abs() < 1e-12);
        assert!((mean_resultant_length(2, 2.0).unwrap() - 0.697_774_657_964_008).abs() < 1e-12);
        assert!((mean_resultant_length(16, 10.0).unwrap() - 0.487_621_667_979_391_4).abs() < 1e-12);
        assert!((mean_resultant_length(512, 1.0).unwrap() - 0.001_953_117_578_466_171_8).abs() < 1e-14);
    }

    #[test]
    fn mean_resultant_is_increasing() {
        for &dim in &[2usize, 3, 16, 512] {
            let mut prev = 0.0;
            for i in 1..400 {
                let k = 0.05 * (i as f64).powf(2.2);
                let a = mean_resultant_length(dim, k).unwrap();
                assert!(a > prev && a < 1.0, "dim {dim} kappa {k}: {a} <= {prev}");
                prev = a;
            }
        }
    }

    #[test]
    fn sampler_rejects_bad_params() {
        assert!(VmfSampler::new(1, 1.0).is_err());
        assert!(VmfSampler::new(3, -1.0).is_err());
        assert!(VmfSampler::new(3, f64::NAN).is_err());
        assert!(VmfParams::new(UnitVector::basis(3, 0).unwrap(), f64::INFINITY).is_err());
    }

    #[test]
    fn samples_are_unit_and_deterministic() {
        for &dim in &[2usize, 3, 16, 512] {
            for &k in &[0.0, 0.5, 50.0, 1e6] {
                let mu = uniform_sample(dim, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
                let p = VmfParams::new(mu, k).unwrap();
                let a = sample_vmf(&p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
                let b = sample_vmf(&p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
                assert_eq!(a, b);
                assert!((geometry::norm(a.as_slice()) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn householder_maps_pole_to_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let mu = uniform_sample(7, &mut rng).unwrap();
            let mut y = vec![0.0; 7];
            y[0] = 1.0;
            householder_from_pole(mu.as_slice(), &mut y);
            for (a, b) in y.iter().zip(mu.as_slice()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        // Nearly aligned with the pole.
        let mu = UnitVector::new(vec![1.0, 1e-9, -2e-9]).unwrap();
        let mut y = vec![1.0, 0.0, 0.0];
        householder_from_pole(mu.as_slice(), &mut y);
        for (a, b) in y.iter().zip(mu.as_slice()) {
            assert!((a - b).abs() < 1e-18);
        }
    }
}
