//! The termination law of the universal two-party protocol and its
//! empirical verification.
//!
//! Round 1 succeeds when Bob's opening teleport is undistorted
//! (probability 1/N, N = 4^K); every later round succeeds when his newest
//! return teleport is (probability 1/M, M = 4^{2K}). Termination rounds are
//! therefore distributed as
//!
//! ```text
//! P(1) = 1/N,   P(r ≥ 2) = (1 − 1/N)(1 − 1/M)^{r−2} · 1/M
//! ```
//!
//! with cumulative 1 − (1 − 1/N)(1 − 1/M)^{r−1} → 1.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{derive_trial_seed, AnalysisError, Result};

/// Expected-count floor per chi-square bin; sparser rounds get pooled
/// into the tail.
const MIN_EXPECTED: f64 = 5.0;

/// The per-round success law for the two-party protocol at a given K.
#[derive(Debug, Clone, Copy)]
pub struct TerminationLaw {
    n: u64,
    m: u64,
}

impl TerminationLaw {
    pub fn two_party(k: u32) -> Result<Self> {
        if !(1..=15).contains(&k) {
            return Err(AnalysisError::BadParameter(format!(
                "K must be in 1..=15, got {k}"
            )));
        }
        Ok(TerminationLaw {
            n: 4u64.pow(k),
            m: 4u64.pow(2 * k),
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// P(terminate exactly at round r).
    pub fn round_probability(&self, r: u32) -> f64 {
        let n = self.n as f64;
        let m = self.m as f64;
        match r {
            0 => 0.0,
            1 => 1.0 / n,
            _ => (1.0 - 1.0 / n) * (1.0 - 1.0 / m).powi(r as i32 - 2) / m,
        }
    }

    /// P(terminate by round r) = 1 − (1 − 1/N)(1 − 1/M)^{r−1}.
    pub fn cumulative(&self, r: u32) -> f64 {
        if r == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.m as f64;
        1.0 - (1.0 - 1.0 / n) * (1.0 - 1.0 / m).powi(r as i32 - 1)
    }
}

/// Cumulative termination probability after `r` rounds at a given `k`.
pub fn termination_law(k: u32, r: u32) -> Result<f64> {
    if r < 1 {
        return Err(AnalysisError::BadParameter(format!(
            "round must be at least 1, got {r}"
        )));
    }
    Ok(TerminationLaw::two_party(k)?.cumulative(r))
}

/// Seeded Monte Carlo comparison of observed termination rounds against a
/// [`TerminationLaw`].
#[derive(Debug, Clone)]
pub struct TerminationStats {
    pub trials: u64,
    pub max_rounds: u32,
    /// counts[r−1] = trials that terminated exactly at round r.
    pub counts: Vec<u64>,
    pub exhausted: u64,
    pub chi_square: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    /// Rounds kept as individual chi-square bins; later rounds and
    /// exhaustion are pooled into the tail bin.
    pub binned_rounds: u32,
}

impl TerminationStats {
    pub fn frequency(&self, round: u32) -> f64 {
        self.counts
            .get(round as usize - 1)
            .map_or(0.0, |&c| c as f64 / self.trials as f64)
    }

    /// Observed fraction terminating at or before `round`.
    pub fn cumulative_frequency(&self, round: u32) -> f64 {
        let upto: u64 = self.counts.iter().take(round as usize).sum();
        upto as f64 / self.trials as f64
    }
}

/// Run `runner` once per trial (with a seed derived from `seed`), collect
/// the termination rounds, and fit them against `law` with a chi-square
/// goodness-of-fit test. `runner` returns `Some(round)` on termination and
/// `None` on exhaustion.
pub fn empirical_termination<F>(
    mut runner: F,
    trials: u64,
    seed: u64,
    law: &TerminationLaw,
    max_rounds: u32,
) -> Result<TerminationStats>
where
    F: FnMut(u64) -> Result<Option<u32>>,
{
    if trials < 1000 {
        return Err(AnalysisError::BadParameter(format!(
            "termination statistics need at least 1000 trials, got {trials}"
        )));
    }
    let mut counts = vec![0u64; max_rounds as usize];
    let mut exhausted = 0u64;
    for trial in 0..trials {
        match runner(derive_trial_seed(seed, trial))? {
            Some(round) if (1..=max_rounds).contains(&round) => {
                counts[round as usize - 1] += 1;
            }
            Some(round) => {
                return Err(AnalysisError::BadParameter(format!(
                    "runner reported round {round} outside 1..={max_rounds}"
                )));
            }
            None => exhausted += 1,
        }
    }

    // individual bins while the expected count stays healthy, then a tail
    let mut binned_rounds = 0u32;
    for r in 1..=max_rounds {
        if trials as f64 * law.round_probability(r) >= MIN_EXPECTED {
            binned_rounds = r;
        } else {
            break;
        }
    }
    if binned_rounds == 0 {
        return Err(AnalysisError::BadParameter(
            "too few trials for even one chi-square bin".into(),
        ));
    }

    let mut chi_square = 0.0;
    for r in 1..=binned_rounds {
        let expected = trials as f64 * law.round_probability(r);
        let observed = counts[r as usize - 1] as f64;
        chi_square += (observed - expected).powi(2) / expected;
    }
    let tail_expected = trials as f64 * (1.0 - law.cumulative(binned_rounds));
    let tail_observed = (counts[binned_rounds as usize..].iter().sum::<u64>() + exhausted) as f64;
    if tail_expected > 0.0 {
        chi_square += (tail_observed - tail_expected).powi(2) / tail_expected;
    }

    let degrees_of_freedom = binned_rounds as usize; // bins − 1, with the tail bin
    let dist = ChiSquared::new(degrees_of_freedom as f64)
        .map_err(|e| AnalysisError::BadParameter(e.to_string()))?;
    let p_value = 1.0 - dist.cdf(chi_square);

    Ok(TerminationStats {
        trials,
        max_rounds,
        counts,
        exhausted,
        chi_square,
        p_value,
        degrees_of_freedom,
        binned_rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{run_universal_two_party, ProtocolConfig, ProtocolStatus};
    use crate::qsim::OutcomeDriver;
    use crate::variable::NonlocalVariable;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_values() {
        assert!((termination_law(1, 1).unwrap() - 0.25).abs() < 1e-15);
        assert!((termination_law(1, 2).unwrap() - 0.296875).abs() < 1e-15);
        assert!(termination_law(0, 1).is_err());
        assert!(termination_law(1, 0).is_err());
    }

    #[test]
    fn cumulative_is_monotone_and_approaches_one() {
        let law = TerminationLaw::two_party(1).unwrap();
        let mut prev = 0.0;
        for r in 1..=400 {
            let c = law.cumulative(r);
            assert!(c >= prev);
            assert!(c <= 1.0 + 1e-12);
            prev = c;
        }
        assert!(prev > 0.999);
    }

    #[test]
    fn round_probabilities_sum_to_the_cumulative() {
        let law = TerminationLaw::two_party(2).unwrap();
        let sum: f64 = (1..=30).map(|r| law.round_probability(r)).sum();
        assert!((sum - law.cumulative(30)).abs() < 1e-12);
    }

    fn universal_runner(max_rounds: u32) -> impl FnMut(u64) -> Result<Option<u32>> {
        let variable = NonlocalVariable::eq1();
        let input = variable.eigenstate(0);
        let config = ProtocolConfig {
            max_rounds,
            ..ProtocolConfig::default()
        };
        move |trial_seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let mut driver = OutcomeDriver::sampled(&mut rng);
            let run = run_universal_two_party(&variable, &input, &config, &mut driver)
                .map_err(AnalysisError::Protocol)?;
            Ok(match run.result.status {
                ProtocolStatus::Decoded => Some(run.result.rounds_used),
                ProtocolStatus::Exhausted => None,
            })
        }
    }

    #[test]
    fn empirical_frequencies_track_the_law() {
        let law = TerminationLaw::two_party(1).unwrap();
        let stats = empirical_termination(universal_runner(40), 4000, 97, &law, 40).unwrap();
        assert!(super::super::within_three_sigma(
            stats.counts[0],
            stats.trials,
            law.round_probability(1)
        ));
        assert!(super::super::within_three_sigma(
            stats.counts[1],
            stats.trials,
            law.round_probability(2)
        ));
        assert!(stats.p_value > 0.01, "p = {}", stats.p_value);
    }

    #[test]
    fn same_seed_gives_identical_statistics() {
        let law = TerminationLaw::two_party(1).unwrap();
        let a = empirical_termination(universal_runner(10), 1000, 5, &law, 10).unwrap();
        let b = empirical_termination(universal_runner(10), 1000, 5, &law, 10).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.exhausted, b.exhausted);
        assert_eq!(a.chi_square, b.chi_square);
    }
}
