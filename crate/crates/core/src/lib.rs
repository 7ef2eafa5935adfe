//! Mirror mean-field Langevin dynamics on constrained domains.
//!
//! * [`geometry`]: entropic simplex and box log-barrier mirror maps.
//! * [`objectives`]: mean-field functionals and their first variations.
//! * [`dynamics`]: the mirror sampler, the projected baseline and plain MFLD.
//! * [`oracle`]: grid ground truth for the 2-simplex (minimizer, KL, entropy sandwich).
//! * [`theory`]: calculators for the convergence bounds.
//! * [`harness`]: configuration, runs, outputs and run comparison.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod objectives;
pub mod oracle;
pub mod theory;

pub use dynamics::{MetricsRow, ParticleEnsemble, SamplerConfig, SamplerKind};
pub use error::{Error, Result};
pub use geometry::{Domain, MirrorKind, MirrorMap};
pub use objectives::{Dataset, EnsembleStats, MeanFieldObjective};
