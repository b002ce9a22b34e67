//! Privatization mechanisms over unit-norm embeddings.
//!
//! * `AvatarLdp`: resample from `VMF(x, epsilon)`; `epsilon * d_angle` metric privacy.
//! * `AvatarRotation`: rotate by exactly `theta` inside the plane spanned by `x`
//!   and a uniformly random direction.
//! * `ComposeLdpRotation`: rotation applied to the LDP output (post-processing).
//! * `UniformBaseline`: a uniform point on the sphere, independent of `x`.
//! * `LaplaceBaseline`: per-coordinate Laplace noise with scale `2 / epsilon`,
//!   optionally projected back onto the sphere.
//! * `Identity`: no-op.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, AngularDistance, UnitVector};
use crate::stream::{RandomStream, SeedFingerprint};
use crate::vmf::VmfSampler;

/// Per-coordinate L1 sensitivity assumed by the Laplace baseline
/// (unit-vector components live in `[-1, 1]`).
pub const LAPLACE_SENSITIVITY: f64 = 2.0;

pub const ANTIPODE_WARNING: &str = "theta = 180 degrees sends every embedding to its antipode: \
the release is deterministic and is undone by applying the same rotation again";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    AvatarLdp,
    AvatarRotation,
    ComposeLdpRotation,
    UniformBaseline,
    LaplaceBaseline,
    Identity,
}

/// Declarative, serializable description of a mechanism. Parameters must be
/// present exactly when `kind` needs them; see [`MechanismSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<AngularDistance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renormalize_output: Option<bool>,
}

/// A validated mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mechanism {
    AvatarLdp { epsilon: f64 },
    AvatarRotation { theta: AngularDistance },
    ComposeLdpRotation { epsilon: f64, theta: AngularDistance },
    UniformBaseline,
    LaplaceBaseline { epsilon: f64, renormalize: bool },
    Identity,
}

impl MechanismSpec {
    fn bare(kind: MechanismKind) -> Self {
        Self {
            kind,
            epsilon: None,
            theta: None,
            renormalize_output: None,
        }
    }

    pub fn avatar_ldp(epsilon: f64) -> Self {
        Self {
            epsilon: Some(epsilon),
            ..Self::bare(MechanismKind::AvatarLdp)
        }
    }

    pub fn avatar_rotation(theta: AngularDistance) -> Self {
        Self {
            theta: Some(theta),
            ..Self::bare(MechanismKind::AvatarRotation)
        }
    }

    pub fn compose_ldp_rotation(epsilon: f64, theta: AngularDistance) -> Self {
        Self {
            epsilon: Some(epsilon),
            theta: Some(theta),
            ..Self::bare(MechanismKind::ComposeLdpRotation)
        }
    }

    pub fn uniform_baseline() -> Self {
        Self::bare(MechanismKind::UniformBaseline)
    }

    pub fn laplace_baseline(epsilon: f64, renormalize: bool) -> Self {
        Self {
            epsilon: Some(epsilon),
            renormalize_output: Some(renormalize),
            ..Self::bare(MechanismKind::LaplaceBaseline)
        }
    }

    pub fn identity() -> Self {
        Self::bare(MechanismKind::Identity)
    }

    pub fn validate(&self) -> Result<Mechanism> {
        use MechanismKind::*;
        let wants_eps = matches!(self.kind, AvatarLdp | ComposeLdpRotation | LaplaceBaseline);
        let wants_theta = matches!(self.kind, AvatarRotation | ComposeLdpRotation);
        let wants_renorm = self.kind == LaplaceBaseline;
        let name = format!("{:?}", self.kind);
        let epsilon = match (wants_eps, self.epsilon) {
            (true, Some(e)) if e > 0.0 && e.is_finite() => e,
            (true, Some(e)) => {
                return Err(Error::InvalidSpec(format!("{name}: epsilon must be > 0, got {e}")))
            }
            (true, None) => return Err(Error::InvalidSpec(format!("{name} requires epsilon"))),
            (false, Some(_)) => {
                return Err(Error::InvalidSpec(format!("{name} does not take epsilon")))
            }
            (false, None) => 0.0,
        };
        let theta = match (wants_theta, self.theta) {
            (true, Some(t)) => t,
            (true, None) => return Err(Error::InvalidSpec(format!("{name} requires theta"))),
            (false, Some(_)) => {
                return Err(Error::InvalidSpec(format!("{name} does not take theta")))
            }
            (false, None) => AngularDistance::ZERO,
        };
        if !wants_renorm && self.renormalize_output.is_some() {
            return Err(Error::InvalidSpec(format!(
                "{name} does not take renormalize_output"
            )));
        }
        Ok(match self.kind {
            AvatarLdp => Mechanism::AvatarLdp { epsilon },
            AvatarRotation => Mechanism::AvatarRotation { theta },
            ComposeLdpRotation => Mechanism::ComposeLdpRotation { epsilon, theta },
            UniformBaseline => Mechanism::UniformBaseline,
            LaplaceBaseline => Mechanism::LaplaceBaseline {
                epsilon,
                renormalize: self.renormalize_output.unwrap_or(true),
            },
            Identity => Mechanism::Identity,
        })
    }

    /// Whether outputs are guaranteed to lie on the sphere.
    pub fn preserves_sphere(&self) -> bool {
        !(self.kind == MechanismKind::LaplaceBaseline && self.renormalize_output == Some(false))
    }
}

impl fmt::Display for MechanismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let deg = |t: &Option<AngularDistance>| t.map(|t| t.degrees()).unwrap_or(f64::NAN);
        let eps = self.epsilon.unwrap_or(f64::NAN);
        match self.kind {
            MechanismKind::AvatarLdp => write!(f, "AvatarLDP eps={eps}"),
            MechanismKind::AvatarRotation => write!(f, "AvatarRotation theta={:.0}", deg(&self.theta)),
            MechanismKind::ComposeLdpRotation => write!(
                f,
                "AvatarLDP+Rotation eps={eps} theta={:.0}",
                deg(&self.theta)
            ),
            MechanismKind::UniformBaseline => write!(f, "Rand. sampling"),
            MechanismKind::LaplaceBaseline => write!(
                f,
                "Laplace eps={eps}{}",
                if self.renormalize_output == Some(false) { " (raw)" } else { "" }
            ),
            MechanismKind::Identity => write!(f, "Identity"),
        }
    }
}

impl From<Mechanism> for MechanismSpec {
    fn from(m: Mechanism) -> Self {
        match m {
            Mechanism::AvatarLdp { epsilon } => Self::avatar_ldp(epsilon),
            Mechanism::AvatarRotation { theta } => Self::avatar_rotation(theta),
            Mechanism::ComposeLdpRotation { epsilon, theta } => {
                Self::compose_ldp_rotation(epsilon, theta)
            }
            Mechanism::UniformBaseline => Self::uniform_baseline(),
            Mechanism::LaplaceBaseline {
                epsilon,
                renormalize,
            } => Self::laplace_baseline(epsilon, renormalize),
            Mechanism::Identity => Self::identity(),
        }
    }
}

/// Returns the reversibility caveat for rotations by exactly `pi`.
pub fn reversal_warning(spec: &MechanismSpec) -> Option<&'static str> {
    match spec.kind {
        MechanismKind::AvatarRotation | MechanismKind::ComposeLdpRotation
            if spec.theta == Some(AngularDistance::STRAIGHT) =>
        {
            Some(ANTIPODE_WARNING)
        }
        _ => None,
    }
}

impl Mechanism {
    /// Raw output vector. Unit norm unless this is a non-renormalized Laplace baseline.
    pub fn sample<R: Rng + ?Sized>(&self, x: &UnitVector, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match *self {
            Mechanism::AvatarLdp { epsilon } => ldp(x, epsilon, rng)?.into_vec(),
            Mechanism::AvatarRotation { theta } => rotation(x, theta, rng)?.into_vec(),
            Mechanism::ComposeLdpRotation { epsilon, theta } => {
                let stage = ldp(x, epsilon, rng)?;
                rotation(&stage, theta, rng)?.into_vec()
            }
            Mechanism::UniformBaseline => geometry::uniform_sample(x.dim(), rng)?.into_vec(),
            Mechanism::LaplaceBaseline {
                epsilon,
                renormalize,
            } => laplace(x, epsilon, renormalize, rng)?,
            Mechanism::Identity => x.as_slice().to_vec(),
        })
    }
}

fn ldp<R: Rng + ?Sized>(x: &UnitVector, epsilon: f64, rng: &mut R) -> Result<UnitVector> {
    VmfSampler::new(x.dim(), epsilon)?.sample(x, rng)
}

fn rotation<R: Rng + ?Sized>(
    x: &UnitVector,
    theta: AngularDistance,
    rng: &mut R,
) -> Result<UnitVector> {
    if theta == AngularDistance::ZERO {
        return Ok(x.clone());
    }
    loop {
        let z = geometry::uniform_sample(x.dim(), rng)?;
        match geometry::orthonormal_pair(x, &z) {
            Ok(basis) => return geometry::rotate_in_plane(x, &basis, theta),
            Err(Error::DegeneratePlane(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

fn laplace<R: Rng + ?Sized>(
    x: &UnitVector,
    epsilon: f64,
    renormalize: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let scale = LAPLACE_SENSITIVITY / epsilon;
    let mut out: Vec<f64> = x
        .as_slice()
        .iter()
        .map(|&c| c + sample_laplace(scale, rng))
        .collect();
    if renormalize {
        out = UnitVector::new(out)?.into_vec();
    }
    Ok(out)
}

fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    // Inverse CDF on u in (-1/2, 1/2).
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        if u != -0.5 {
            return -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

/// A released embedding together with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivatizedEmbedding {
    pub vector: Vec<f64>,
    pub source_dim: usize,
    pub mechanism: MechanismSpec,
    pub seed_fingerprint: SeedFingerprint,
}

impl PrivatizedEmbedding {
    /// The output as a unit vector; fails for off-sphere Laplace outputs.
    pub fn to_unit(&self) -> Result<UnitVector> {
        UnitVector::from_unit(self.vector.clone())
    }
}

fn release(
    mechanism: Mechanism,
    x: &UnitVector,
    stream: &mut RandomStream,
) -> Result<PrivatizedEmbedding> {
    let seed_fingerprint = stream.fingerprint();
    let vector = mechanism.sample(x, stream)?;
    Ok(PrivatizedEmbedding {
        vector,
        source_dim: x.dim(),
        mechanism: mechanism.into(),
        seed_fingerprint,
    })
}

fn positive_epsilon(epsilon: f64) -> Result<f64> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(epsilon)
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must be finite and > 0, got {epsilon}"
        )))
    }
}

pub fn avatar_ldp(
    x: &UnitVector,
    epsilon: f64,
    stream: &mut RandomStream,
) -> Result<PrivatizedEmbedding> {
    let epsilon = positive_epsilon(epsilon)?;
    release(Mechanism::AvatarLdp { epsilon }, x, stream)
}

pub fn avatar_rotation(
    x: &UnitVector,
    theta: AngularDistance,
    stream: &mut RandomStream,
) -> Result<PrivatizedEmbedding> {
    release(Mechanism::AvatarRotation { theta }, x, stream)
}

pub fn compose_ldp_rotation(
    x: &UnitVector,
    epsilon: f64,
    theta: AngularDistance,
    stream: &mut RandomStream,
) -> Result<PrivatizedEmbedding> {
    let epsilon = positive_epsilon(epsilon)?;
    release(Mechanism::ComposeLdpRotation { epsilon, theta }, x, stream)
}

pub fn uniform_baseline(x: &UnitVector, stream: &mut RandomStream) -> Result<PrivatizedEmbedding> {
    release(Mechanism::UniformBaseline, x, stream)
}

pub fn laplace_baseline(
    x: &UnitVector,
    epsilon: f64,
    renormalize: bool,
    stream: &mut RandomStream,
) -> Result<PrivatizedEmbedding> {
    let epsilon = positive_epsilon(epsilon)?;
    release(
        Mechanism::LaplaceBaseline {
            epsilon,
            renormalize,
        },
        x,
        stream,
    )
}

/// Dispatches on `spec`.
pub fn apply(
    spec: &MechanismSpec,
    x: &UnitVector,
    stream: &mut RandomStream,
) -> Result<PrivatizedEmbedding> {
    let mechanism = spec.validate()?;
    let mut out = release(mechanism, x, stream)?;
    out.mechanism = spec.clone();
    Ok(out)
}

/// Privatizes every input with its own substream `derive(seed, [index])`, in
/// parallel. The result does not depend on the number of worker threads.
pub fn privatize_batch(
    spec: &MechanismSpec,
    inputs: &[UnitVector],
    seed: u64,
) -> Result<Vec<PrivatizedEmbedding>> {
    spec.validate()?;
    inputs
        .par_iter()
        .enumerate()
        .map(|(i, x)| apply(spec, x, &mut RandomStream::derive(seed, &[i as u64])))
        .collect()
}

/// Sequential twin of [`privatize_batch`]; produces identical output.
pub fn privatize_batch_serial(
    spec: &MechanismSpec,
    inputs: &[UnitVector],
    seed: u64,
) -> Result<Vec<PrivatizedEmbedding>> {
    spec.validate()?;
    inputs
        .iter()
        .enumerate()
        .map(|(i, x)| apply(spec, x, &mut RandomStream::derive(seed, &[i as u64])))
        .collect()
}
