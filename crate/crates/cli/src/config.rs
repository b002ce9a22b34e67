//! Command-line configuration. A [`RunConfig`] is both the parsed argument
//! set and the document embedded in every output for replay.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use idshield::{AngularDistance, MechanismKind, MechanismSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "IDSHIELD_SEED";
pub const DEFAULT_SEED: u64 = 0x1d5e_ed00;

/// Mechanism rows of the default sweep, in table order.
pub const DEFAULT_SWEEP: &[&str] = &[
    "identity",
    "ldp:200",
    "ldp:100",
    "ldp:50",
    "ldp:10",
    "ldp:1",
    "uniform",
    "rotation:60",
    "rotation:90",
    "rotation:135",
    "rotation:150",
    "laplace:100",
    "laplace:1",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write a synthetic identity database.
    Gen,
    /// Privatize every embedding of a file.
    Privatize,
    /// Fit a PCA remapper on a reference file.
    FitRemap,
    /// Evaluate one mechanism on a database.
    Eval,
    /// Evaluate a list of mechanisms on a database.
    Sweep,
    /// Run the averaging attack over a grid of observation counts.
    Attack,
    /// Check the VMF density-ratio bound on random triples.
    CheckDp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Bin,
}

impl Format {
    /// `.bin` files are binary, anything else is JSON Lines.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Format::Bin,
            _ => Format::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    #[value(alias = "avatar-ldp")]
    Ldp,
    #[value(alias = "avatar-rotation")]
    Rotation,
    #[value(alias = "compose-ldp-rotation")]
    Compose,
    #[value(alias = "uniform-baseline")]
    Uniform,
    #[value(alias = "laplace-baseline")]
    Laplace,
    Identity,
}

impl From<KindArg> for MechanismKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Ldp => MechanismKind::AvatarLdp,
            KindArg::Rotation => MechanismKind::AvatarRotation,
            KindArg::Compose => MechanismKind::ComposeLdpRotation,
            KindArg::Uniform => MechanismKind::UniformBaseline,
            KindArg::Laplace => MechanismKind::LaplaceBaseline,
            KindArg::Identity => MechanismKind::Identity,
        }
    }
}

/// A mechanism in the compact sweep syntax: `identity`, `uniform`,
/// `ldp:EPS`, `rotation:DEG`, `compose:EPS:DEG`, `laplace:EPS` (raw output)
/// or `laplace-unit:EPS` (renormalized output).
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismArg(pub MechanismSpec);

impl FromStr for MechanismArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64, String> {
            parts
                .get(i)
                .ok_or_else(|| format!("{s}: missing parameter"))?
                .parse::<f64>()
                .map_err(|e| format!("{s}: {e}"))
        };
        let deg = |i: usize| -> Result<AngularDistance, String> {
            AngularDistance::from_degrees(num(i)?).map_err(|e| format!("{s}: {e}"))
        };
        let (spec, arity) = match parts[0] {
            "identity" => (MechanismSpec::identity(), 1),
            "uniform" => (MechanismSpec::uniform_baseline(), 1),
            "ldp" => (MechanismSpec::avatar_ldp(num(1)?), 2),
            "rotation" => (MechanismSpec::avatar_rotation(deg(1)?), 2),
            "compose" => (MechanismSpec::compose_ldp_rotation(num(1)?, deg(2)?), 3),
            "laplace" => (MechanismSpec::laplace_baseline(num(1)?, false), 2),
            "laplace-unit" => (MechanismSpec::laplace_baseline(num(1)?, true), 2),
            other => return Err(format!("unknown mechanism '{other}'")),
        };
        if parts.len() != arity {
            return Err(format!("{s}: expected {} parameter(s)", arity - 1));
        }
        spec.validate().map_err(|e| format!("{s}: {e}"))?;
        Ok(Self(spec))
    }
}

impl fmt::Display for MechanismArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[command(name = "idshield", version, about = "Privatize identity embeddings on the unit hypersphere")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,

    /// Input embedding or database file.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Output file; a `.meta.json` sidecar is written next to embedding files.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Fitted remapper; `privatize` then works in the remapped space.
    #[arg(long)]
    pub remapper: Option<PathBuf>,
    /// Embedding file format (default: by extension, `.bin` or JSON Lines).
    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Mechanism for `privatize`, `eval` and `attack`.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Privacy parameter; also the VMF concentration.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Rotation angle in degrees, in (0, 180].
    #[arg(long)]
    pub theta_degrees: Option<f64>,
    /// Renormalize Laplace baseline outputs onto the sphere.
    #[arg(long)]
    pub renormalize: bool,
    /// Sweep rows, e.g. `identity,ldp:200,rotation:90,uniform`.
    #[arg(long, value_delimiter = ',')]
    pub mechanisms: Vec<String>,

    /// Embedding dimension (`gen`, `check-dp`).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of synthetic identities.
    #[arg(long)]
    pub identities: Option<usize>,
    /// Embeddings per identity.
    #[arg(long)]
    pub samples: Option<usize>,
    /// VMF concentration of samples around their identity mean.
    #[arg(long)]
    pub within_kappa: Option<f64>,
    /// Binary attribute names for `gen`.
    #[arg(long, value_delimiter = ',')]
    pub attributes: Vec<String>,

    /// Rank-k cut-offs to report.
    #[arg(long, value_delimiter = ',', default_value = "1,50")]
    pub k: Vec<usize>,
    /// Records per identity held out as queries.
    #[arg(long, default_value_t = 1)]
    pub queries_per_identity: usize,
    /// Independent releases of each query.
    #[arg(long, default_value_t = 1)]
    pub draws_per_query: usize,

    /// Dimension of the remapped space.
    #[arg(long)]
    pub target_dim: Option<usize>,
    /// References blended per reconstruction.
    #[arg(long, default_value_t = idshield::remap::DEFAULT_NEIGHBORS)]
    pub j: usize,
    /// Softmax temperature of the reconstruction weights.
    #[arg(long, default_value_t = idshield::remap::DEFAULT_TEMPERATURE)]
    pub lambda: f64,

    /// Observation counts for the averaging attack.
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    pub m_grid: Vec<usize>,
    /// Attack repetitions per observation count.
    #[arg(long, default_value_t = 100)]
    pub repetitions: usize,
    /// Random triples for `check-dp`.
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,

    /// Master seed; falls back to $IDSHIELD_SEED, then a fixed default.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

impl RunConfig {
    /// The seed to use; always `Some` after [`RunConfig::resolve_seed`].
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Fills in the default seed. Returns true if the default was used.
    pub fn resolve_seed(&mut self) -> bool {
        let defaulted = self.seed.is_none();
        self.seed = Some(self.seed());
        defaulted
    }

    pub fn input(&self) -> CliResult<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::usage("--input is required"))
    }

    pub fn output(&self) -> CliResult<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::usage("--output is required"))
    }

    pub fn require<T: Copy>(value: Option<T>, flag: &str) -> CliResult<T> {
        value.ok_or_else(|| CliError::usage(format!("--{flag} is required")))
    }

    pub fn input_format(&self) -> CliResult<Format> {
        Ok(self.format.unwrap_or(Format::for_path(self.input()?)))
    }

    pub fn output_format(&self) -> CliResult<Format> {
        Ok(self.format.unwrap_or(Format::for_path(self.output()?)))
    }

    /// The single mechanism given by `--kind` and its parameter flags.
    pub fn mechanism(&self) -> CliResult<MechanismSpec> {
        let kind = Self::require(self.kind, "kind")?;
        let theta = self
            .theta_degrees
            .map(AngularDistance::from_degrees)
            .transpose()
            .map_err(|e| CliError::usage(format!("--theta-degrees: {e}")))?;
        let laplace = kind == KindArg::Laplace;
        let spec = MechanismSpec {
            kind: kind.into(),
            epsilon: self.epsilon,
            theta,
            renormalize_output: if laplace || self.renormalize {
                Some(self.renormalize)
            } else {
                None
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Sweep rows from `--mechanisms`, or the default table.
    pub fn sweep_mechanisms(&self) -> CliResult<Vec<MechanismSpec>> {
        let rows: Vec<&str> = if self.mechanisms.is_empty() {
            DEFAULT_SWEEP.to_vec()
        } else {
            self.mechanisms.iter().map(String::as_str).collect()
        };
        rows.into_iter()
            .map(|s| s.parse::<MechanismArg>().map(|m| m.0).map_err(CliError::Usage))
            .collect()
    }
}
