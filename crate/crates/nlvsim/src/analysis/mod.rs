//! Oracles and statistics: the Born-rule reference distribution,
//! signaling audits, termination law, resource counts, and the helpers the
//! empirical comparisons share.

pub mod resources;
pub mod signaling;
pub mod termination;

pub use resources::{enumerate_cluster_addresses, resource_count, ResourceBudget};
pub use signaling::{
    no_signaling_audit, signaling_demo_monte_carlo, signaling_demo_von_neumann, AuditScenario,
};
pub use termination::{empirical_termination, termination_law, TerminationLaw, TerminationStats};

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg;
use crate::protocols::ProtocolError;
use crate::qsim::QsimError;
use crate::teleport::TeleportError;
use crate::variable::NonlocalVariable;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Sim(#[from] QsimError),
    #[error(transparent)]
    Teleport(#[from] TeleportError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("state has dimension {got}, variable needs {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("probabilities sum to {sum}, expected 1")]
    NotADistribution { sum: f64 },
    #[error("parameter out of range: {0}")]
    BadParameter(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Deterministic per-trial seed derivation (splitmix64 over base ⊕ index).
///
/// Trials seeded this way are independent streams reproducible from the
/// base seed alone, whatever order they run in.
pub fn derive_trial_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A probability distribution over eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    entries: Vec<(f64, f64)>,
}

impl Distribution {
    /// Build from (eigenvalue, probability) pairs; repeated eigenvalues
    /// are merged. Probabilities must sum to 1 within 1e-10.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut entries: Vec<(f64, f64)> = Vec::new();
        for (value, p) in pairs {
            match entries.iter_mut().find(|(v, _)| *v == value) {
                Some((_, acc)) => *acc += p,
                None => entries.push((value, p)),
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sum: f64 = entries.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(AnalysisError::NotADistribution { sum });
        }
        Ok(Distribution { entries })
    }

    /// Empirical distribution of a list of observed eigenvalues.
    pub fn from_observations(observations: &[f64]) -> Result<Self> {
        if observations.is_empty() {
            return Err(AnalysisError::BadParameter(
                "no observations to build a distribution from".into(),
            ));
        }
        let weight = 1.0 / observations.len() as f64;
        Self::from_pairs(observations.iter().map(|&v| (v, weight)))
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn probability(&self, value: f64) -> f64 {
        self.entries
            .iter()
            .find(|(v, _)| *v == value)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Total variation distance: half the L1 distance over the union
    /// support.
    pub fn total_variation(&self, other: &Distribution) -> f64 {
        let mut values: Vec<f64> = self
            .entries
            .iter()
            .chain(&other.entries)
            .map(|&(v, _)| v)
            .collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        0.5 * values
            .iter()
            .map(|&v| (self.probability(v) - other.probability(v)).abs())
            .sum::<f64>()
    }
}

/// Exact Born distribution of a variable on a state: |⟨colᵢ|ψ⟩|²
/// aggregated by eigenvalue.
pub fn born_distribution(variable: &NonlocalVariable, state: &[Complex64]) -> Result<Distribution> {
    if state.len() != variable.dim() {
        return Err(AnalysisError::DimensionMismatch {
            expected: variable.dim(),
            got: state.len(),
        });
    }
    let norm = linalg::norm_sqr(state);
    if (norm - 1.0).abs() > 1e-10 {
        return Err(AnalysisError::NotADistribution { sum: norm });
    }
    Distribution::from_pairs((0..variable.dim()).map(|col| {
        let column = variable.eigenstate(col);
        (
            variable.eigenvalue(col),
            linalg::inner(&column, state).norm_sqr(),
        )
    }))
}

/// 3σ acceptance band for an observed frequency of a Bernoulli(p) over n
/// trials (normal approximation).
pub fn within_three_sigma(observed_count: u64, trials: u64, p: f64) -> bool {
    let n = trials as f64;
    let sigma = (p * (1.0 - p) / n).sqrt();
    let freq = observed_count as f64 / n;
    (freq - p).abs() <= 3.0 * sigma
}
