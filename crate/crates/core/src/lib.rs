//! Identity-embedding privatization on the unit hypersphere.
//!
//! Embeddings are treated as points of `S^{n-1}`. Two mechanisms perturb them:
//! von Mises-Fisher resampling (metric local differential privacy under the
//! angular distance) and fixed-angle rotation in a random 2-plane (exact,
//! guaranteed dissimilarity). Supporting modules cover PCA remapping for
//! sparse embedding domains, synthetic identity databases, and an
//! identification/verification evaluation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod error;
pub mod eval;
pub mod geometry;
pub mod mechanisms;
pub mod remap;
pub mod special;
pub mod stream;
pub mod synthdata;
pub mod vmf;

pub use error::{Error, Result};
pub use geometry::{AngularDistance, PlaneBasis, UnitVector};
pub use mechanisms::{Mechanism, MechanismKind, MechanismSpec, PrivatizedEmbedding};
pub use stream::{RandomStream, SeedFingerprint};
pub use vmf::VmfParams;
