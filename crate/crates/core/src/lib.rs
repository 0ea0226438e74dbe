//! Localization of planted elevated-mean submatrices in noisy matrices.
//!
//! The crate is organised around the observation model `X = M + Z`, where
//! `M` holds one or more non-overlapping constant blocks and `Z` is i.i.d.
//! sub-Gaussian noise:
//!
//! * [`model`]: planted signals, noise families, instance generation and
//!   the SNR threshold formulas.
//! * [`linalg`]: top-r singular triplets by subspace iteration, projections.
//! * [`localize`]: spectral, de-noised spectral and multi-block spectral
//!   localizers, 1-D splitting, k-means and the MAD noise estimate.
//! * [`search`]: exhaustive (statistically optimal) search and its greedy
//!   multi-block extension.
//! * [`convex`]: the nuclear-norm relaxation solved by consensus ADMM.
//! * [`reduction`]: planted-clique instances, the bootstrap and
//!   block-averaging transforms, and the clique clean-up step.
//! * [`experiment`]: seeded Monte Carlo sweeps and phase diagrams.

pub mod convex;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod localize;
pub mod model;
pub mod reduction;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
pub use model::{
    generate_instance, random_signal, snr_thresholds, Block, LocalizationResult, NoiseFamily,
    NoiseSpec, Observation, PlantedSignal, SnrThresholds,
};
