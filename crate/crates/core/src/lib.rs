//! Random matrix ensembles with independent or exchangeable entries.
//!
//! The crate is organised bottom-up:
//!
//! - [`mixtures`]: de Finetti mixtures of bounded component laws and the
//!   exchangeable sequences they generate.
//! - [`ensembles`]: band prototypes and random symmetric matrix builders.
//! - [`spectra`]: dense symmetric eigensolver and spectral summaries.
//! - [`limits`]: closed-form limit laws (semicircle, mixtures) and the KS metric.
//! - [`oracle`]: exact moment-method path enumeration.
//! - [`perturb`]: finite-rank and small-norm perturbation estimates.
//! - [`experiments`]: seeded experiment runner and result emission.

pub mod ensembles;
pub mod experiments;
pub mod limits;
pub mod linalg;
pub mod mixtures;
pub mod oracle;
pub mod perturb;
pub mod rng;
pub mod spectra;
pub mod stats;

pub use ensembles::{BandKind, BandSpec, MatrixSample};
pub use limits::TargetLaw;
pub use linalg::Matrix;
pub use mixtures::{ComponentLaw, DeFinettiMixture, TauTag};
pub use spectra::SpectralSummary;
