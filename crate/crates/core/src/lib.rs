//! Selecting the best of `m` candidates from noisy 2-, 3- and 4-way comparisons.
//!
//! The crate is organised around the life cycle of comparison data:
//!
//! - [`data`]: comparison logs, item registries and their CSV formats.
//! - [`model`]: choice models (Bradley-Terry merits, saturated per-subset
//!   multinomials, position multinomials) that score and simulate choices.
//! - [`selection`]: tournament selection, elimination selection and
//!   Condorcet voting as resumable request/response state machines, plus a
//!   simulation driver and an error-versus-cost benchmark.
//! - [`inference`]: maximum-likelihood fits and the likelihood-ratio test
//!   battery comparing the model families.
//! - [`posterior`]: posterior sampling over model parameters and
//!   posterior-expected error/cost of the selection algorithms.
//! - [`guarantees`]: the discriminating margin of a choice model and the
//!   resulting error bound for elimination selection.
//! - [`report`]: plain CSV emission for curve and report rows.

pub mod data;
pub mod error;
pub mod guarantees;
pub mod inference;
pub mod model;
pub mod posterior;
pub mod report;
pub mod rng;
pub mod selection;
pub mod special;
pub mod stats;

pub use data::{ComparisonRecord, ComparisonSet, Dataset, ItemEntry, ItemId, WinTally};
pub use error::{Error, Result};
pub use guarantees::{DeltaEstimate, GuaranteeReport};
pub use inference::{FitResult, TestResult};
pub use model::{ChoiceModel, MeritVector, PositionMultinomial, SaturatedModel};
pub use posterior::{McmcConfig, PosteriorEstimate, PosteriorSamples};
pub use selection::{
    AlgorithmConfig, ComparisonRequest, CondorcetConfig, EliminationConfig, ErrorCostEstimate,
    RunResult, SelectionSession, TournamentConfig,
};
