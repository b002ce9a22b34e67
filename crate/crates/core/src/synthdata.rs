//! Synthetic identity databases: identity means uniform on the sphere, samples
//! drawn from a von Mises-Fisher cloud around each mean, and binary attributes
//! given by the side of a random hyperplane the identity mean falls on.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, UnitVector};
use crate::vmf::VmfSampler;

pub const POSITIVE: &str = "pos";
pub const NEGATIVE: &str = "neg";

/// Category for the side of the hyperplane with normal `direction`.
pub fn attribute_label(direction: &UnitVector, point: &[f64]) -> &'static str {
    if geometry::dot(direction.as_slice(), point) >= 0.0 {
        POSITIVE
    } else {
        NEGATIVE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub identity_id: u64,
    pub embedding: UnitVector,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityDatabase {
    pub dim: usize,
    pub records: Vec<IdentityRecord>,
    #[serde(default)]
    pub identity_means: BTreeMap<u64, UnitVector>,
    #[serde(default)]
    pub attribute_directions: BTreeMap<String, UnitVector>,
}

impl IdentityDatabase {
    /// A database with the same means and attribute directions but other records.
    pub fn with_records(&self, records: Vec<IdentityRecord>) -> Self {
        Self {
            dim: self.dim,
            records,
            identity_means: self.identity_means.clone(),
            attribute_directions: self.attribute_directions.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record indices grouped by identity, in first-appearance order.
    pub fn records_by_identity(&self) -> BTreeMap<u64, Vec<usize>> {
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            groups.entry(r.identity_id).or_default().push(i);
        }
        groups
    }

    /// Checks dimensions, means, and that labels agree with the mean-side rule.
    /// Databases loaded without means or directions only get the dimension check.
    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if r.embedding.dim() != self.dim {
                return Err(Error::DimMismatch {
                    expected: self.dim,
                    found: r.embedding.dim(),
                });
            }
            if self.identity_means.is_empty() {
                continue;
            }
            let Some(mean) = self.identity_means.get(&r.identity_id) else {
                return Err(Error::InvalidParameter(format!(
                    "identity {} has no mean",
                    r.identity_id
                )));
            };
            for (name, dir) in &self.attribute_directions {
                let expected = attribute_label(dir, mean.as_slice());
                if r.attributes.get(name).map(String::as_str) != Some(expected) {
                    return Err(Error::InvalidParameter(format!(
                        "identity {} attribute {name} disagrees with its mean",
                        r.identity_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generates `num_identities * samples_per_identity` records.
///
/// Draw order: all identity means, then attribute directions, then samples
/// identity by identity.
pub fn generate<R: Rng + ?Sized>(
    num_identities: usize,
    samples_per_identity: usize,
    dim: usize,
    within_kappa: f64,
    attribute_names: &[String],
    rng: &mut R,
) -> Result<IdentityDatabase> {
    if num_identities == 0 || samples_per_identity == 0 {
        return Err(Error::InvalidParameter(
            "identity and sample counts must be positive".into(),
        ));
    }
    let sampler = VmfSampler::new(dim, within_kappa)?;
    let mut identity_means = BTreeMap::new();
    for id in 0..num_identities as u64 {
        identity_means.insert(id, geometry::uniform_sample(dim, rng)?);
    }
    let mut attribute_directions = BTreeMap::new();
    for name in attribute_names {
        if attribute_directions
            .insert(name.clone(), geometry::uniform_sample(dim, rng)?)
            .is_some()
        {
            return Err(Error::InvalidParameter(format!("duplicate attribute {name}")));
        }
    }
    let mut records = Vec::with_capacity(num_identities * samples_per_identity);
    for (&id, mean) in &identity_means {
        let attributes: BTreeMap<String, String> = attribute_directions
            .iter()
            .map(|(name, dir)| (name.clone(), attribute_label(dir, mean.as_slice()).to_string()))
            .collect();
        for _ in 0..samples_per_identity {
            records.push(IdentityRecord {
                identity_id: id,
                embedding: sampler.sample(mean, rng)?,
                attributes: attributes.clone(),
            });
        }
    }
    Ok(IdentityDatabase {
        dim,
        records,
        identity_means,
        attribute_directions,
    })
}

/// Splits each identity's records into `queries_per_identity` queries and the
/// rest as gallery. Records keep their original relative order on each side.
pub fn split_query_gallery<R: Rng + ?Sized>(
    db: &IdentityDatabase,
    queries_per_identity: usize,
    rng: &mut R,
) -> Result<(IdentityDatabase, IdentityDatabase)> {
    if queries_per_identity == 0 {
        return Err(Error::InvalidParameter(
            "queries_per_identity must be at least 1".into(),
        ));
    }
    let mut is_query = vec![false; db.records.len()];
    for (id, mut idx) in db.records_by_identity() {
        if idx.len() <= queries_per_identity {
            return Err(Error::InsufficientSamples {
                identity: id,
                available: idx.len(),
                requested: queries_per_identity,
            });
        }
        idx.shuffle(rng);
        for &i in &idx[..queries_per_identity] {
            is_query[i] = true;
        }
    }
    let (q, g): (Vec<_>, Vec<_>) = db
        .records
        .iter()
        .zip(is_query)
        .partition(|(_, query)| *query);
    Ok((
        db.with_records(q.into_iter().map(|(r, _)| r.clone()).collect()),
        db.with_records(g.into_iter().map(|(r, _)| r.clone()).collect()),
    ))
}
