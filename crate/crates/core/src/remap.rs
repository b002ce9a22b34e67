//! PCA remapping for sparsely populated embedding domains.
//!
//! References are centered by the dataset mean and scaled to unit norm, then
//! projected onto the leading principal directions and normalized, giving a
//! dense angular space where the sphere mechanisms apply. A privatized point is
//! mapped back as a softmax-weighted average of its `j` nearest references,
//! with weights `softmax(-lambda * d_angle)` so nearer references weigh more.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, UnitVector};
use crate::mechanisms::{self, MechanismSpec};
use crate::stream::RandomStream;

pub const DEFAULT_NEIGHBORS: usize = 8;
pub const DEFAULT_TEMPERATURE: f64 = 32.0;

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    entries: Vec<(u64, Vec<f64>)>,
}

impl ReferenceSet {
    pub fn new(entries: Vec<(u64, Vec<f64>)>) -> Result<Self> {
        let Some((_, first)) = entries.first() else {
            return Err(Error::InsufficientReferences {
                needed: 1,
                found: 0,
            });
        };
        let dim = first.len();
        if dim < 2 {
            return Err(Error::DimTooSmall(dim));
        }
        if let Some((_, bad)) = entries.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].1.len()
    }

    pub fn entries(&self) -> &[(u64, Vec<f64>)] {
        &self.entries
    }
}

/// One of the `j` nearest references selected during reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaRemapper {
    source_dim: usize,
    target_dim: usize,
    dataset_mean: Vec<f64>,
    /// `target_dim` orthonormal rows of length `source_dim`.
    components: Vec<Vec<f64>>,
    explained_variance: Vec<f64>,
    reference_ids: Vec<u64>,
    reference_original: Vec<Vec<f64>>,
    reference_projected: Vec<UnitVector>,
    j: usize,
    lambda: f64,
}

fn check_reconstruction_params(j: usize, lambda: f64, references: usize) -> Result<()> {
    if j == 0 || j > references {
        return Err(Error::InvalidParameter(format!(
            "neighbor count j must be in 1..={references}, got {j}"
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature lambda must be > 0, got {lambda}"
        )));
    }
    Ok(())
}

fn standardize(x: &[f64], mean: &[f64]) -> Result<Vec<f64>> {
    let centered: Vec<f64> = x.iter().zip(mean).map(|(a, m)| a - m).collect();
    let n = geometry::norm(&centered);
    if n < geometry::ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok(centered.into_iter().map(|c| c / n).collect())
}

/// `softmax(-lambda * d)`, stable for large `lambda * d`.
pub fn softmax_weights(distances: &[f64], lambda: f64) -> Vec<f64> {
    let Some(min) = distances.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let raw: Vec<f64> = distances.iter().map(|d| (-lambda * (d - min)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Fits the standardization and projection on `references`.
pub fn fit(references: &ReferenceSet, target_dim: usize, j: usize, lambda: f64) -> Result<PcaRemapper> {
    let n = references.len();
    let source_dim = references.dim();
    if target_dim < 2 {
        return Err(Error::DimTooSmall(target_dim));
    }
    if target_dim > source_dim {
        return Err(Error::InvalidParameter(format!(
            "target dim {target_dim} exceeds source dim {source_dim}"
        )));
    }
    if n <= target_dim {
        return Err(Error::InsufficientReferences {
            needed: target_dim,
            found: n,
        });
    }
    check_reconstruction_params(j, lambda, n)?;

    let mut mean = vec![0.0; source_dim];
    for (_, v) in references.entries() {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let standardized = references
        .entries()
        .iter()
        .map(|(_, v)| standardize(v, &mean))
        .collect::<Result<Vec<_>>>()?;

    // Covariance of the standardized set.
    let data = DMatrix::from_fn(n, source_dim, |r, c| standardized[r][c]);
    let col_mean = data.row_mean();
    let centered = DMatrix::from_fn(n, source_dim, |r, c| data[(r, c)] - col_mean[c]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..source_dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let last = eig.eigenvalues[order[target_dim - 1]];
    if !(last > RANK_TOLERANCE * top) {
        return Err(Error::DegenerateCovariance(target_dim));
    }

    let components: Vec<Vec<f64>> = order[..target_dim]
        .iter()
        .map(|&k| {
            let mut row: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // Fix the sign: largest-magnitude entry positive.
            let pivot = row
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0);
            if pivot < 0.0 {
                row.iter_mut().for_each(|c| *c = -*c);
            }
            row
        })
        .collect();
    let explained_variance = order[..target_dim]
        .iter()
        .map(|&k| eig.eigenvalues[k])
        .collect();

    let mut remapper = PcaRemapper {
        source_dim,
        target_dim,
        dataset_mean: mean,
        components,
        explained_variance,
        reference_ids: references.entries().iter().map(|(id, _)| *id).collect(),
        reference_original: references.entries().iter().map(|(_, v)| v.clone()).collect(),
        reference_projected: Vec::with_capacity(n),
        j,
        lambda,
    };
    remapper.reference_projected = standardized
        .iter()
        .map(|s| remapper.project_standardized(s))
        .collect::<Result<_>>()?;
    Ok(remapper)
}

impl PcaRemapper {
    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dataset_mean(&self) -> &[f64] {
        &self.dataset_mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn reference_ids(&self) -> &[u64] {
        &self.reference_ids
    }

    pub fn reference_original(&self) -> &[Vec<f64>] {
        &self.reference_original
    }

    pub fn reference_projected(&self) -> &[UnitVector] {
        &self.reference_projected
    }

    /// Copy with different reconstruction parameters.
    pub fn with_neighbors(&self, j: usize, lambda: f64) -> Result<Self> {
        check_reconstruction_params(j, lambda, self.reference_original.len())?;
        Ok(Self {
            j,
            lambda,
            ..self.clone()
        })
    }

    fn project_standardized(&self, s: &[f64]) -> Result<UnitVector> {
        let y: Vec<f64> = self.components.iter().map(|row| geometry::dot(row, s)).collect();
        UnitVector::new(y)
    }

    /// Standardizes with the fitted mean, projects, and normalizes.
    pub fn project(&self, x: &[f64]) -> Result<UnitVector> {
        if x.len() != self.source_dim {
            return Err(Error::DimMismatch {
                expected: self.source_dim,
                found: x.len(),
            });
        }
        self.project_standardized(&standardize(x, &self.dataset_mean)?)
    }

    /// The `j` references nearest to `y` in angle (ties broken by index) with
    /// their softmax weights.
    pub fn neighbors(&self, y: &UnitVector) -> Result<Vec<Neighbor>> {
        if y.dim() != self.target_dim {
            return Err(Error::DimMismatch {
                expected: self.target_dim,
                found: y.dim(),
            });
        }
        let mut scored: Vec<(usize, f64)> = self
            .reference_projected
            .iter()
            .map(|p| geometry::angular_distance(y, p).map(|d| d.radians()))
            .enumerate()
            .map(|(i, d)| d.map(|d| (i, d)))
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        scored.truncate(self.j);
        let distances: Vec<f64> = scored.iter().map(|&(_, d)| d).collect();
        let weights = softmax_weights(&distances, self.lambda);
        Ok(scored
            .into_iter()
            .zip(weights)
            .map(|((index, distance), weight)| Neighbor {
                index,
                distance,
                weight,
            })
            .collect())
    }

    /// Weighted average of the nearest original-domain references.
    pub fn reconstruct(&self, y: &UnitVector) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.source_dim];
        for nb in self.neighbors(y)? {
            out.iter_mut()
                .zip(&self.reference_original[nb.index])
                .for_each(|(o, r)| *o += nb.weight * r);
        }
        Ok(out)
    }

    /// Re-checks the structural invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.reference_original.len();
        if self.components.len() != self.target_dim
            || self.dataset_mean.len() != self.source_dim
            || self.reference_projected.len() != n
            || self.reference_ids.len() != n
        {
            return Err(Error::InvalidParameter("remapper shape is inconsistent".into()));
        }
        if let Some(row) = self.components.iter().find(|r| r.len() != self.source_dim) {
            return Err(Error::DimMismatch {
                expected: self.source_dim,
                found: row.len(),
            });
        }
        for (a, ra) in self.components.iter().enumerate() {
            for (b, rb) in self.components.iter().enumerate().skip(a) {
                let expected = if a == b { 1.0 } else { 0.0 };
                if (geometry::dot(ra, rb) - expected).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "components {a} and {b} are not orthonormal"
                    )));
                }
            }
        }
        check_reconstruction_params(self.j, self.lambda, n)?;
        for (orig, proj) in self.reference_original.iter().zip(&self.reference_projected) {
            let p = self.project(orig)?;
            if geometry::dot(p.as_slice(), proj.as_slice()) < 1.0 - 1e-9 {
                return Err(Error::InvalidParameter(
                    "stored projections do not match the fitted projection".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `reconstruct(apply(spec, project(x)))`.
pub fn privatize_remapped(
    remapper: &PcaRemapper,
    x: &[f64],
    spec: &MechanismSpec,
    stream: &mut RandomStream,
) -> Result<Vec<f64>> {
    let projected = remapper.project(x)?;
    let released = mechanisms::apply(spec, &projected, stream)?;
    // Off-sphere baselines are compared by direction.
    let direction = UnitVector::new(released.vector)?;
    remapper.reconstruct(&direction)
}
