//! Embedding-level privacy/utility evaluation.
//!
//! Identification sorts the gallery by angular distance to each privatized
//! query; verification computes an equal error rate from genuine and impostor
//! distances; utility is approximated by how often a binary attribute read off
//! a fixed hyperplane survives privatization.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, AngularDistance, UnitVector};
use crate::mechanisms::{Mechanism, MechanismSpec};
use crate::stream::RandomStream;
use crate::synthdata::{self, attribute_label, IdentityDatabase, IdentityRecord};

pub const DEFAULT_K_VALUES: [usize; 2] = [1, 50];
pub const HISTOGRAM_BINS: usize = 180;
/// Queries scored together per pass over the gallery.
const RANK_BLOCK: usize = 16;

// Substream tags; each draw site gets its own path so results do not depend
// on iteration order.
const TAG_SPLIT: u64 = 1;
const TAG_RELEASE: u64 = 2;
const TAG_PAIR: u64 = 3;
const TAG_INPUT: u64 = 4;
const TAG_ATTACK: u64 = 5;

/// Gallery embeddings laid out row-major for fast scoring.
struct GalleryMatrix {
    dim: usize,
    ids: Vec<u64>,
    rows: Vec<f64>,
    by_identity: BTreeMap<u64, Vec<usize>>,
}

impl GalleryMatrix {
    fn new(gallery: &IdentityDatabase) -> Result<Self> {
        if gallery.is_empty() {
            return Err(Error::EmptyGallery);
        }
        let mut rows = Vec::with_capacity(gallery.len() * gallery.dim);
        for r in &gallery.records {
            if r.embedding.dim() != gallery.dim {
                return Err(Error::DimMismatch {
                    expected: gallery.dim,
                    found: r.embedding.dim(),
                });
            }
            rows.extend_from_slice(r.embedding.as_slice());
        }
        Ok(Self {
            dim: gallery.dim,
            ids: gallery.records.iter().map(|r| r.identity_id).collect(),
            rows,
            by_identity: gallery.records_by_identity(),
        })
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// For each `(query, identity)`, the 0-based position of the identity's
    /// first record when the gallery is stably sorted by `d_angle` to the
    /// query (`len()` if absent). Each gallery row is read once per block.
    fn ranks(&self, queries: &[(&[f64], u64)]) -> Vec<usize> {
        let n = self.len();
        let mut sims = vec![0.0; queries.len() * n];
        for i in 0..n {
            let row = self.row(i);
            for (b, (q, _)) in queries.iter().enumerate() {
                sims[b * n + i] = geometry::dot(row, q).clamp(-1.0, 1.0);
            }
        }
        queries
            .iter()
            .enumerate()
            .map(|(b, &(_, id))| self.rank_from_similarities(&sims[b * n..(b + 1) * n], id))
            .collect()
    }

    fn rank_from_similarities(&self, sims: &[f64], identity: u64) -> usize {
        let Some(own) = self.by_identity.get(&identity) else {
            return self.len();
        };
        // Records are visited in index order, so `>` keeps the lowest index on ties.
        let mut best = own[0];
        for &i in &own[1..] {
            if sims[i] > sims[best] {
                best = i;
            }
        }
        let s = sims[best];
        sims.iter()
            .zip(&self.ids)
            .enumerate()
            .filter(|&(i, (&v, &id))| id != identity && (v > s || (v == s && i < best)))
            .count()
    }

    fn nearest_identity(&self, query: &[f64]) -> u64 {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for i in 0..self.len() {
            let s = geometry::dot(self.row(i), query).clamp(-1.0, 1.0);
            if s > best_sim {
                best_sim = s;
                best = i;
            }
        }
        self.ids[best]
    }
}

fn direction(v: Vec<f64>) -> Result<UnitVector> {
    UnitVector::new(v)
}

/// Identification rank (0-based) of each query against `gallery`.
pub fn identification_ranks(queries: &[IdentityRecord], gallery: &IdentityDatabase) -> Result<Vec<usize>> {
    let matrix = GalleryMatrix::new(gallery)?;
    if let Some(q) = queries.iter().find(|q| q.embedding.dim() != matrix.dim) {
        return Err(Error::DimMismatch {
            expected: matrix.dim,
            found: q.embedding.dim(),
        });
    }
    Ok(queries
        .par_chunks(RANK_BLOCK)
        .flat_map_iter(|block| {
            let pairs: Vec<(&[f64], u64)> = block.iter().map(|q| (q.embedding.as_slice(), q.identity_id)).collect();
            matrix.ranks(&pairs)
        })
        .collect())
}

/// Fraction of ranks below `k`.
pub fn rank_k_rate(ranks: &[usize], k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r < k).count() as f64 / ranks.len() as f64
}

/// Fraction of queries whose identity appears among the `k` nearest gallery records.
pub fn rank_k_identification(
    queries: &[IdentityRecord],
    gallery: &IdentityDatabase,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    Ok(rank_k_rate(&identification_ranks(queries, gallery)?, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerPoint {
    pub rate: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy)]
struct RocPoint {
    far: f64,
    frr: f64,
    threshold: f64,
}

/// Equal error rate of a distance-threshold verifier (accept when `d <= t`).
///
/// Operating points `(FAR(t), FRR(t))` are collected at every distinct pooled
/// distance, their lower convex hull is taken, and the rate is read where the
/// hull crosses `FAR = FRR`, interpolating linearly between hull vertices.
/// The threshold is interpolated the same way. Only the ordering of the
/// distances matters.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<EerPoint> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::EmptyInput);
    }
    if genuine.iter().chain(impostor).any(|d| d.is_nan()) {
        return Err(Error::InvalidParameter("NaN distance".into()));
    }
    let mut pooled: Vec<(f64, bool)> = genuine
        .iter()
        .map(|&d| (d, true))
        .chain(impostor.iter().map(|&d| (d, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (ng, ni) = (genuine.len() as f64, impostor.len() as f64);
    let mut points = vec![RocPoint {
        far: 0.0,
        frr: 1.0,
        threshold: pooled[0].0,
    }];
    let (mut accepted_impostors, mut rejected_genuine) = (0usize, genuine.len());
    let mut i = 0;
    while i < pooled.len() {
        let t = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == t {
            if pooled[i].1 {
                rejected_genuine -= 1;
            } else {
                accepted_impostors += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            far: accepted_impostors as f64 / ni,
            frr: rejected_genuine as f64 / ng,
            threshold: t,
        });
    }

    // Lower convex hull; points already have nondecreasing FAR.
    let cross = |o: &RocPoint, a: &RocPoint, b: &RocPoint| {
        (a.far - o.far) * (b.frr - o.frr) - (a.frr - o.frr) * (b.far - o.far)
    };
    let mut hull: Vec<RocPoint> = Vec::with_capacity(points.len());
    for p in points {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }

    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ga = a.frr - a.far;
        let gb = b.frr - b.far;
        if ga >= 0.0 && gb <= 0.0 {
            let s = if ga == gb { 0.0 } else { ga / (ga - gb) };
            return Ok(EerPoint {
                rate: a.far + s * (b.far - a.far),
                threshold: a.threshold + s * (b.threshold - a.threshold),
            });
        }
    }
    // The hull runs from (0, 1) to (1, 0), so a crossing always exists.
    unreachable!("ROC hull does not cross the diagonal")
}

fn privatize_record(
    mechanism: &Mechanism,
    record: &IdentityRecord,
    stream: &mut RandomStream,
) -> Result<Vec<f64>> {
    mechanism.sample(&record.embedding, stream)
}

/// Per-attribute agreement between the true label and the label read off the
/// privatized embedding of every record.
pub fn attribute_preservation(
    db: &IdentityDatabase,
    spec: &MechanismSpec,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    if db.attribute_directions.is_empty() {
        return Err(Error::NoAttributes);
    }
    let mechanism = spec.validate()?;
    let released: Vec<Vec<f64>> = db
        .records
        .par_iter()
        .enumerate()
        .map(|(i, r)| privatize_record(&mechanism, r, &mut RandomStream::derive(seed, &[i as u64])))
        .collect::<Result<_>>()?;
    Ok(db
        .attribute_directions
        .iter()
        .map(|(name, dir)| {
            let hits = db
                .records
                .iter()
                .zip(&released)
                .filter(|(r, y)| {
                    r.attributes.get(name).map(String::as_str) == Some(attribute_label(dir, y))
                })
                .count();
            (name.clone(), hits as f64 / db.len().max(1) as f64)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Lower edge of the first bin and upper edge of the last, in radians.
    pub range: (f64, f64),
    pub counts: Vec<u64>,
}

impl Histogram {
    fn angular(values: &[f64], bins: usize) -> Self {
        let mut counts = vec![0u64; bins];
        let width = std::f64::consts::PI / bins as f64;
        for &v in values {
            let b = ((v / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self {
            range: (0.0, std::f64::consts::PI),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementStats {
    pub mean: AngularDistance,
    pub median: AngularDistance,
    pub histogram: Histogram,
}

impl DisplacementStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        Ok(Self {
            mean: AngularDistance::new(mean.clamp(0.0, std::f64::consts::PI))?,
            median: AngularDistance::new(median(samples))?,
            histogram: Histogram::angular(samples, HISTOGRAM_BINS),
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `d_angle(x, apply(spec, x))` for `trials` uniformly random inputs.
pub fn displacement_samples(
    spec: &MechanismSpec,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mechanism = spec.validate()?;
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let x = geometry::uniform_sample(dim, &mut RandomStream::derive(seed, &[TAG_INPUT, i as u64]))?;
            let y = direction(mechanism.sample(&x, &mut RandomStream::derive(seed, &[TAG_RELEASE, i as u64]))?)?;
            Ok(geometry::angular_distance(&x, &y)?.radians())
        })
        .collect()
}

pub fn displacement_stats(
    spec: &MechanismSpec,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<DisplacementStats> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    DisplacementStats::from_samples(&displacement_samples(spec, dim, trials, seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub observations: usize,
    pub cosine_to_true: f64,
    /// 1.0 when the nearest gallery record belongs to the true identity.
    pub rank1_after_attack: f64,
}

/// Averages `m` independent releases of `x` and normalizes the mean.
pub fn averaging_attack<R: Rng + ?Sized>(
    x: &UnitVector,
    true_identity: u64,
    spec: &MechanismSpec,
    m: usize,
    gallery: &IdentityDatabase,
    rng: &mut R,
) -> Result<AttackReport> {
    let matrix = GalleryMatrix::new(gallery)?;
    attack_with_matrix(x, true_identity, &spec.validate()?, m, &matrix, rng)
}

fn attack_with_matrix<R: Rng + ?Sized>(
    x: &UnitVector,
    true_identity: u64,
    mechanism: &Mechanism,
    m: usize,
    gallery: &GalleryMatrix,
    rng: &mut R,
) -> Result<AttackReport> {
    if m == 0 {
        return Err(Error::InvalidParameter("observations must be at least 1".into()));
    }
    if x.dim() != gallery.dim {
        return Err(Error::DimMismatch {
            expected: gallery.dim,
            found: x.dim(),
        });
    }
    let mut sum = vec![0.0; x.dim()];
    for _ in 0..m {
        let y = mechanism.sample(x, rng)?;
        sum.iter_mut().zip(&y).for_each(|(s, v)| *s += v);
    }
    let estimate = direction(sum)?;
    let hit = gallery.nearest_identity(estimate.as_slice()) == true_identity;
    Ok(AttackReport {
        observations: m,
        cosine_to_true: estimate.dot(x),
        rank1_after_attack: if hit { 1.0 } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub observations: usize,
    pub repetitions: usize,
    pub mean_cosine_to_true: f64,
    pub rank1_after_attack: f64,
}

/// Averaging attack over an `m` grid. Repetition `r` targets identity
/// `r mod N`, using its mean direction when known and its first gallery
/// record otherwise.
pub fn attack_series(
    gallery: &IdentityDatabase,
    spec: &MechanismSpec,
    m_grid: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<AttackSummary>> {
    if repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
    }
    let mechanism = spec.validate()?;
    let matrix = GalleryMatrix::new(gallery)?;
    let targets: Vec<(u64, UnitVector)> = matrix
        .by_identity
        .iter()
        .map(|(&id, idx)| {
            let x = gallery
                .identity_means
                .get(&id)
                .cloned()
                .unwrap_or_else(|| gallery.records[idx[0]].embedding.clone());
            (id, x)
        })
        .collect();
    m_grid
        .iter()
        .map(|&m| {
            let reports: Vec<AttackReport> = (0..repetitions)
                .into_par_iter()
                .map(|r| {
                    let (id, x) = &targets[r % targets.len()];
                    let mut stream = RandomStream::derive(seed, &[TAG_ATTACK, m as u64, r as u64]);
                    attack_with_matrix(x, *id, &mechanism, m, &matrix, &mut stream)
                })
                .collect::<Result<_>>()?;
            let n = reports.len() as f64;
            Ok(AttackSummary {
                observations: m,
                repetitions,
                mean_cosine_to_true: reports.iter().map(|r| r.cosine_to_true).sum::<f64>() / n,
                rank1_after_attack: reports.iter().map(|r| r.rank1_after_attack).sum::<f64>() / n,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub queries_per_identity: usize,
    /// Independent privatizations of each query (re-draw frequency).
    pub draws_per_query: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            queries_per_identity: 1,
            draws_per_query: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mechanism: MechanismSpec,
    pub rank_k: BTreeMap<usize, f64>,
    pub eer: f64,
    pub eer_threshold: f64,
    pub mean_displacement: AngularDistance,
    pub median_displacement: AngularDistance,
    pub attribute_accuracy: BTreeMap<String, f64>,
    /// Privatized query releases scored (queries times draws).
    pub num_queries: usize,
    pub draws_per_query: usize,
    pub seed: u64,
}

struct QueryOutcome {
    rank: usize,
    genuine: f64,
    impostor: f64,
    displacement: f64,
    attribute_hits: Vec<bool>,
}

/// Evaluates each spec on the same query/gallery split.
///
/// Queries are privatized against an unaltered gallery. Per release: the
/// identification rank, one genuine distance (to a random gallery record of
/// the same identity) and one impostor distance (to a random record of a random
/// other identity), the displacement from the original query, and attribute
/// agreement. All draws come from substreams of `seed` keyed by
/// `(draw, query)`, so each report depends only on `(db, spec, seed)`.
pub fn privacy_utility_sweep(
    db: &IdentityDatabase,
    specs: &[MechanismSpec],
    k_values: &[usize],
    options: SweepOptions,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("no mechanisms to evaluate".into()));
    }
    if k_values.contains(&0) {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if options.draws_per_query == 0 {
        return Err(Error::InvalidParameter("draws_per_query must be at least 1".into()));
    }
    let mechanisms = specs.iter().map(MechanismSpec::validate).collect::<Result<Vec<_>>>()?;
    let (queries, gallery) = synthdata::split_query_gallery(
        db,
        options.queries_per_identity,
        &mut RandomStream::derive(seed, &[TAG_SPLIT]),
    )?;
    let matrix = GalleryMatrix::new(&gallery)?;
    let identities: Vec<u64> = matrix.by_identity.keys().copied().collect();
    if identities.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two identities for impostor pairs".into(),
        ));
    }
    let attributes: Vec<(&String, &UnitVector)> = db.attribute_directions.iter().collect();

    let jobs: Vec<(usize, usize)> = (0..options.draws_per_query)
        .flat_map(|r| (0..queries.len()).map(move |i| (r, i)))
        .collect();

    specs
        .iter()
        .zip(&mechanisms)
        .map(|(spec, mechanism)| {
            let outcomes: Vec<QueryOutcome> = jobs
                .par_chunks(RANK_BLOCK)
                .map(|block| {
                    let mut outs = Vec::with_capacity(block.len());
                    let mut released = Vec::with_capacity(block.len());
                    for &(r, i) in block {
                        let q = &queries.records[i];
                        let mut release = RandomStream::derive(seed, &[TAG_RELEASE, r as u64, i as u64]);
                        let raw = privatize_record(mechanism, q, &mut release)?;
                        let y = direction(raw.clone())?;

                        let mut pair = RandomStream::derive(seed, &[TAG_PAIR, r as u64, i as u64]);
                        let own = &matrix.by_identity[&q.identity_id];
                        let g = own[pair.random_range(0..own.len())];
                        let own_pos = identities.binary_search(&q.identity_id).unwrap_or(0);
                        let mut j = pair.random_range(0..identities.len() - 1);
                        if j >= own_pos {
                            j += 1;
                        }
                        let others = &matrix.by_identity[&identities[j]];
                        let imp = others[pair.random_range(0..others.len())];

                        let d = |row: usize| geometry::dot(matrix.row(row), y.as_slice()).clamp(-1.0, 1.0).acos();
                        outs.push(QueryOutcome {
                            rank: 0,
                            genuine: d(g),
                            impostor: d(imp),
                            displacement: geometry::angular_distance(&q.embedding, &y)?.radians(),
                            attribute_hits: attributes
                                .iter()
                                .map(|(name, dir)| {
                                    q.attributes.get(*name).map(String::as_str)
                                        == Some(attribute_label(dir, &raw))
                                })
                                .collect(),
                        });
                        released.push((y, q.identity_id));
                    }
                    let pairs: Vec<(&[f64], u64)> = released.iter().map(|(y, id)| (y.as_slice(), *id)).collect();
                    for (o, rank) in outs.iter_mut().zip(matrix.ranks(&pairs)) {
                        o.rank = rank;
                    }
                    Ok(outs)
                })
                .collect::<Result<Vec<Vec<_>>>>()?
                .into_iter()
                .flatten()
                .collect();

            let ranks: Vec<usize> = outcomes.iter().map(|o| o.rank).collect();
            let genuine: Vec<f64> = outcomes.iter().map(|o| o.genuine).collect();
            let impostor: Vec<f64> = outcomes.iter().map(|o| o.impostor).collect();
            let displacement: Vec<f64> = outcomes.iter().map(|o| o.displacement).collect();
            let eer = compute_eer(&genuine, &impostor)?;
            let disp = DisplacementStats::from_samples(&displacement)?;
            let n = outcomes.len() as f64;
            Ok(EvalReport {
                mechanism: spec.clone(),
                rank_k: k_values.iter().map(|&k| (k, rank_k_rate(&ranks, k))).collect(),
                eer: eer.rate,
                eer_threshold: eer.threshold,
                mean_displacement: disp.mean,
                median_displacement: disp.median,
                attribute_accuracy: attributes
                    .iter()
                    .enumerate()
                    .map(|(a, (name, _))| {
                        let hits = outcomes.iter().filter(|o| o.attribute_hits[a]).count();
                        ((*name).clone(), hits as f64 / n)
                    })
                    .collect(),
                num_queries: outcomes.len(),
                draws_per_query: options.draws_per_query,
                seed,
            })
        })
        .collect()
}
