//! Simulation engine for Bayesian network meta-analysis.
//!
//! The crate generates synthetic dichotomous trial data on a treatment
//! network, fits the contrast-based random-effects model with a
//! Metropolis-within-Gibbs sampler, and summarises how the degree
//! irregularity of the network shows up in rank probabilities, SUCRA values
//! and the spread of treatment-effect estimates.
//!
//! Module map:
//!
//! - [`network`]: treatments, trials, comparison counts and degree statistics.
//! - [`generate`]: synthetic event data from known model parameters.
//! - [`sampler`]: log-posterior terms and the MCMC fit of one dataset.
//! - [`rank`]: rank probabilities, cumulative ranks, SUCRA.
//! - [`metrics`]: truth, per-replication bias and aggregate quality indicators.
//! - [`harness`]: replicated experiments, suites and their on-disk outputs.
//! - [`planner`]: candidate future trials ranked by resulting irregularity.

pub mod error;
pub mod generate;
pub mod harness;
pub mod math;
pub mod metrics;
pub mod network;
pub mod planner;
pub mod rank;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use generate::{DgmKind, Dataset, ModelParams, TrialEffects};
pub use harness::{ExperimentConfig, ExperimentRecord};
pub use metrics::{AggregateReport, ReplicationResult, TruthSummary};
pub use network::{EvidenceNetwork, GeometrySummary, TreatmentId, Trial};
pub use planner::{Allocation, PlanCandidate};
pub use rank::{RankProbabilityMatrix, SucraVector};
pub use sampler::{ChainConfig, PosteriorSamples};
