//! The universal two-party protocol: measuring any nonlocal variable of a
//! system split between Alice and Bob with back-and-forth teleportations
//! through a cluster tree of prearranged channels.
//!
//! One round: Bob's side of the system reaches Alice by teleportation, she
//! applies the correction that would map the variable's eigenstates to
//! z-basis product states *if the newest teleportation had no distortion*,
//! and teleports everything to Bob. Whenever the newest distortion really
//! was trivial (index 1), Bob's z measurements finish the job; otherwise he
//! teleports the system back through the channel whose address spells out
//! his previous outcome, and the next round begins. Nobody ever sends a
//! classical bit — the channel choice *is* the message, and it only becomes
//! readable when the records are merged afterwards.
//!
//! Only the channel path the system actually takes is simulated. Alice's
//! identical operations on the other clusters act on fresh singlets that
//! never touch the system; a validation hook (`probe_inactive_cluster`)
//! simulates one of them anyway so a test can check that nothing changes.

use ndarray::Array2;
use num_complex::Complex64;

use crate::qsim::{Disposal, OutcomeDriver, QubitId, Register, Site, UnitarySpec};
use crate::teleport::{outcome_index, ChannelAddress, TeleportChannel};
use crate::variable::NonlocalVariable;

use super::transcript::{TeleportLeg, Transcript};
use super::{
    correction_operator, frame_matrix, merge_records, revealed_distortion, MeasurementResult,
    ProtocolConfig, ProtocolError, ProtocolRun, ProtocolStatus, ResourceAccounting, Result,
    RunDiagnostics,
};

/// Alice's local correction for round `round_number`, given the channel
/// path Bob's choices have disclosed and her own recorded outcomes.
///
/// `bob_path` holds the address components (round-1 outcome first), and
/// `alice_history` her forward-teleport outcomes of rounds `1..round_number`;
/// both must have `round_number − 1` entries. Round 1 is the bare
/// diagonalizer.
pub fn alice_round_correction(
    variable: &NonlocalVariable,
    round_number: u32,
    bob_path: &ChannelAddress,
    alice_history: &[Vec<crate::teleport::BellOutcome>],
) -> Result<Array2<Complex64>> {
    let (k_bob, total) = two_party_shape(variable)?;
    let expected = round_number.saturating_sub(1) as usize;
    if bob_path.len() != expected || alice_history.len() != expected {
        return Err(ProtocolError::HistoryLength {
            round: round_number,
            path_len: bob_path.len(),
            history_len: alice_history.len(),
            expected,
        });
    }
    let mut revealed = Vec::with_capacity(expected);
    for (level, &component) in bob_path.components().iter().enumerate() {
        let len = if level == 0 { k_bob } else { total };
        revealed.push(revealed_distortion(component, len, total)?);
    }
    let frames: Vec<Array2<Complex64>> = alice_history
        .iter()
        .map(|outcomes| frame_matrix(outcomes))
        .collect();
    Ok(correction_operator(
        &variable.diagonalizer(),
        &revealed,
        &frames,
    ))
}

fn two_party_shape(variable: &NonlocalVariable) -> Result<(usize, usize)> {
    match variable.partition() {
        [(Site::A, k_alice), (Site::B, k_bob)] => Ok((*k_bob, k_alice + k_bob)),
        other => Err(ProtocolError::PartitionMismatch {
            expected: "A block then B block".into(),
            found: format!("{other:?}"),
        }),
    }
}

/// Run the universal protocol on `input` (a state over the variable's
/// qubits in tensor order). Returns the measurement result, the per-party
/// transcripts and run diagnostics.
pub fn run_universal_two_party(
    variable: &NonlocalVariable,
    input: &[Complex64],
    config: &ProtocolConfig,
    driver: &mut OutcomeDriver,
) -> Result<ProtocolRun> {
    let (k_bob, total) = two_party_shape(variable)?;
    if input.len() != variable.dim() {
        return Err(ProtocolError::InputDimension {
            expected: variable.dim(),
            got: input.len(),
        });
    }
    if config.max_rounds < 1 {
        return Err(ProtocolError::NoRounds);
    }
    let n_outcomes = 4u64.pow(k_bob as u32);

    let mut reg = Register::new();
    let mut system = reg.allocate_group(&variable.site_layout(), input)?;
    let mut alice_t = Transcript::new(Site::A);
    let mut bob_t = Transcript::new(Site::B);
    let mut diagnostics = RunDiagnostics::default();
    let mut pairs: u128 = 0;

    // Round 1, Bob's leg: his block of the system reaches Alice.
    let mut channel = TeleportChannel::prepare(&mut reg, Site::B, Site::A, k_bob);
    pairs += k_bob as u128;
    let bob_block: Vec<QubitId> = system[total - k_bob..].to_vec();
    let outcomes = crate::teleport::teleport_system(&mut reg, &bob_block, &mut channel, driver)?;
    let mut last_index = outcome_index(&outcomes)?;
    bob_t.record_teleport(1, TeleportLeg::Initial, outcomes);
    system.splice(total - k_bob.., channel.remote_halves());

    // Round 1, Alice's leg: diagonalize and send everything to Bob.
    let w1 = UnitarySpec::new(variable.diagonalizer(), system.clone())?;
    reg.apply_unitary(&w1, false)?;
    let mut channel = TeleportChannel::prepare(&mut reg, Site::A, Site::B, total);
    pairs += total as u128;
    let outcomes = crate::teleport::teleport_system(&mut reg, &system, &mut channel, driver)?;
    let mut alice_history = vec![outcomes.clone()];
    alice_t.record_teleport(1, TeleportLeg::Forward, outcomes);
    system = channel.remote_halves();

    let mut path: Vec<u64> = Vec::new();
    let mut status = ProtocolStatus::Exhausted;
    let mut rounds_used = config.max_rounds;

    for round in 1..=config.max_rounds {
        if last_index == 1 {
            // The newest teleportation was undistorted: Bob measures.
            let rho = reg.reduced_density(&system)?;
            let peak = (0..rho.dim().0)
                .map(|i| rho[(i, i)].re)
                .fold(0.0f64, f64::max);
            diagnostics.pre_measure_peak_prob = Some(peak);
            diagnostics.terminating_address = Some(ChannelAddress::new(path.clone()));
            let mut bits = Vec::with_capacity(total);
            for &q in &system {
                bits.push(reg.measure_z_with(q, driver, Disposal::Consume)?);
            }
            bob_t.record_z_measurement(round, bits);
            status = ProtocolStatus::Decoded;
            rounds_used = round;
            break;
        }
        if round == config.max_rounds {
            rounds_used = round;
            break;
        }

        // Bob returns the system through the cluster that spells out his
        // latest outcome.
        path.push(last_index);
        bob_t.record_channel_choice(round, ChannelAddress::new(path.clone()));
        let mut channel = TeleportChannel::prepare(&mut reg, Site::B, Site::A, total);
        pairs += total as u128;
        let outcomes = crate::teleport::teleport_system(&mut reg, &system, &mut channel, driver)?;
        last_index = outcome_index(&outcomes)?;
        bob_t.record_teleport(round + 1, TeleportLeg::Return, outcomes);
        system = channel.remote_halves();

        if config.probe_inactive_cluster && round == 1 {
            probe_one_inactive_cluster(
                &mut reg,
                variable,
                &alice_history,
                path[0],
                n_outcomes,
                k_bob,
                total,
                driver,
            )?;
        }

        // Alice's correction for this cluster, then everything goes back
        // to Bob.
        let w = alice_round_correction(
            variable,
            round + 1,
            &ChannelAddress::new(path.clone()),
            &alice_history,
        )?;
        let spec = UnitarySpec::new(w, system.clone())?;
        reg.apply_unitary(&spec, false)?;
        let mut channel = TeleportChannel::prepare(&mut reg, Site::A, Site::B, total);
        pairs += total as u128;
        let outcomes = crate::teleport::teleport_system(&mut reg, &system, &mut channel, driver)?;
        alice_history.push(outcomes.clone());
        alice_t.record_teleport(round + 1, TeleportLeg::Forward, outcomes);
        system = channel.remote_halves();
    }

    diagnostics.active_path_pairs = pairs;
    let transcripts = vec![alice_t, bob_t];
    let epr_pairs_consumed = match config.resource_accounting {
        ResourceAccounting::SimulatedActivePath => pairs,
        ResourceAccounting::Analytic => analytic_pairs(k_bob, total, rounds_used),
    };
    let result = match status {
        ProtocolStatus::Decoded => {
            let merged = merge_records(&transcripts, variable)?;
            MeasurementResult {
                status,
                eigenvalue: Some(merged.eigenvalue),
                eigenstate_label: Some(merged.eigenstate_label),
                rounds_used,
                epr_pairs_consumed,
            }
        }
        ProtocolStatus::Exhausted => MeasurementResult {
            status,
            eigenvalue: None,
            eigenstate_label: None,
            rounds_used,
            epr_pairs_consumed,
        },
    };
    Ok(ProtocolRun {
        result,
        transcripts,
        diagnostics,
    })
}

/// Full cost model: Alice teleports in every channel of every round that
/// started. Round 1 needs `k_bob + total` pairs; round j ≥ 2 has
/// (N−1)(M−1)^{j−2} clusters, each burning `2·total` pairs. The growth is
/// exponential, so deep runs saturate at `u128::MAX`.
fn analytic_pairs(k_bob: usize, total: usize, rounds: u32) -> u128 {
    let n = 4u128.pow(k_bob as u32);
    let m = 4u128.pow(total as u32);
    let mut pairs = (k_bob + total) as u128;
    let mut clusters = n - 1;
    for _ in 2..=rounds {
        pairs = pairs.saturating_add(clusters.saturating_mul(2 * total as u128));
        clusters = clusters.saturating_mul(m - 1);
    }
    pairs
}

/// Simulate Alice's operations on one cluster the system never entered:
/// she corrects the remote halves of its return channel as if the system
/// had arrived there, and teleports them on to Bob. Everything acts on
/// fresh singlets uncorrelated with the system path.
#[allow(clippy::too_many_arguments)]
fn probe_one_inactive_cluster(
    reg: &mut Register,
    variable: &NonlocalVariable,
    alice_history: &[Vec<crate::teleport::BellOutcome>],
    active_cluster: u64,
    n_outcomes: u64,
    _k_bob: usize,
    total: usize,
    driver: &mut OutcomeDriver,
) -> Result<()> {
    let Some(idle) = (2..=n_outcomes).find(|&c| c != active_cluster) else {
        return Ok(());
    };
    let return_channel = TeleportChannel::prepare(reg, Site::B, Site::A, total);
    let ghosts = return_channel.remote_halves();
    let w = alice_round_correction(
        variable,
        2,
        &ChannelAddress::new(vec![idle]),
        &alice_history[..1],
    )?;
    let spec = UnitarySpec::new(w, ghosts.clone())?;
    reg.apply_unitary(&spec, false)?;
    let mut onward = TeleportChannel::prepare(reg, Site::A, Site::B, total);
    crate::teleport::teleport_system(reg, &ghosts, &mut onward, driver)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::derive_trial_seed;
    use crate::linalg;
    use crate::teleport::BellOutcome::{self, *};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run_seeded(
        variable: &NonlocalVariable,
        input: &[Complex64],
        config: &ProtocolConfig,
        seed: u64,
    ) -> ProtocolRun {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut driver = OutcomeDriver::sampled(&mut rng);
        run_universal_two_party(variable, input, config, &mut driver).unwrap()
    }

    #[test]
    fn eigenstate_inputs_always_decode_to_their_eigenvalue() {
        let variable = NonlocalVariable::eq1();
        let input = variable.eigenstate(1); // |Ψ₂⟩
        let config = ProtocolConfig::default();
        let mut terminated = 0u32;
        for trial in 0..500u64 {
            let run = run_seeded(&variable, &input, &config, derive_trial_seed(1001, trial));
            if run.result.is_decoded() {
                terminated += 1;
                assert_eq!(run.result.eigenvalue, Some(2.0), "trial {trial}");
            }
        }
        assert!(terminated > 400, "only {terminated} runs terminated");
    }

    #[test]
    fn bell_operator_eigenstate_decodes_to_its_eigenvalue() {
        let variable = NonlocalVariable::bell_basis();
        // |Φ+⟩ is column 3, eigenvalue 4
        let input = variable.eigenstate(3);
        let config = ProtocolConfig::default();
        for trial in 0..200u64 {
            let run = run_seeded(&variable, &input, &config, derive_trial_seed(1002, trial));
            if run.result.is_decoded() {
                assert_eq!(run.result.eigenvalue, Some(4.0));
            }
        }
    }

    /// Verification only promises the eigenvalue: an eigenstate inside a
    /// degenerate eigenspace may decode to either column, but the merged
    /// eigenvalue never wavers.
    #[test]
    fn degenerate_eigenspaces_decode_to_the_shared_eigenvalue() {
        let variable = NonlocalVariable::new(
            vec![(Site::A, 1), (Site::B, 1)],
            linalg::identity(4),
            vec![7.0, 7.0, 1.0, 2.0],
        )
        .unwrap();
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut input = vec![Complex64::new(0.0, 0.0); 4];
        input[0] = h;
        input[1] = h;
        let config = ProtocolConfig::default();
        let mut labels_seen = std::collections::HashSet::new();
        for trial in 0..300u64 {
            let run = run_seeded(&variable, &input, &config, derive_trial_seed(1005, trial));
            if run.result.is_decoded() {
                assert_eq!(run.result.eigenvalue, Some(7.0), "trial {trial}");
                labels_seen.insert(run.result.eigenstate_label.unwrap());
            }
        }
        // both degenerate columns actually occur
        assert_eq!(labels_seen, [0usize, 1].into_iter().collect());
    }

    #[test]
    fn round_one_terminations_happen_a_quarter_of_the_time() {
        let variable = NonlocalVariable::eq1();
        let input = variable.eigenstate(0);
        let config = ProtocolConfig::default();
        let trials = 4000u64;
        let mut round_one = 0u64;
        for trial in 0..trials {
            let run = run_seeded(&variable, &input, &config, derive_trial_seed(1003, trial));
            if run.result.is_decoded() && run.result.rounds_used == 1 {
                round_one += 1;
            }
        }
        let freq = round_one as f64 / trials as f64;
        let sigma = (0.25 * 0.75 / trials as f64).sqrt();
        assert!((freq - 0.25).abs() < 3.0 * sigma, "frequency {freq}");
    }

    #[test]
    fn round_one_correction_is_the_bare_diagonalizer() {
        let variable = NonlocalVariable::eq1();
        let w = alice_round_correction(&variable, 1, &ChannelAddress::new(vec![]), &[]).unwrap();
        let v = variable.diagonalizer();
        for r in 0..4 {
            for c in 0..4 {
                assert!((w[(r, c)] - v[(r, c)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn round_two_correction_composes_the_revealed_pauli() {
        let variable = NonlocalVariable::eq1();
        // cluster index for outcome [Φ−] (Pauli X on the teleported line)
        let n = crate::teleport::outcome_index(&[PhiMinus]).unwrap();
        let trivial_history = vec![vec![PsiMinus, PsiMinus]];
        let w = alice_round_correction(
            &variable,
            2,
            &ChannelAddress::new(vec![n]),
            &trivial_history,
        )
        .unwrap();
        let v = variable.diagonalizer();
        let x_on_bob = linalg::kron(&linalg::identity(2), &linalg::pauli_x());
        let expected = v.dot(&x_on_bob).dot(&linalg::dagger(&v));
        for r in 0..4 {
            for c in 0..4 {
                assert!((w[(r, c)] - expected[(r, c)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn history_length_mismatch_is_an_error() {
        let variable = NonlocalVariable::eq1();
        assert!(matches!(
            alice_round_correction(&variable, 3, &ChannelAddress::new(vec![2]), &[]),
            Err(ProtocolError::HistoryLength { .. })
        ));
    }

    /// Force a specific path through rounds 1..4 whose last leg is
    /// undistorted. The pre-measurement state of an eigenstate input must
    /// be an exact z product: the final bits come out with probability 1.
    #[test]
    fn forced_undistorted_legs_give_exact_z_products() {
        let variable = NonlocalVariable::eq1();
        let config = ProtocolConfig {
            max_rounds: 6,
            ..ProtocolConfig::default()
        };
        // per-round scripts: bob digits (round 1: 1 pair; later: 2) then
        // alice digits (2 per round)
        for target_round in 1..=4u32 {
            for col in 0..4usize {
                let input = variable.eigenstate(col);
                let mut script: Vec<usize> = Vec::new();
                let mut bell_picks = 0usize;
                // round 1 bob leg: undistorted only if we stop at round 1
                let first_digit = if target_round == 1 { 0 } else { 2 };
                script.push(first_digit);
                bell_picks += 1;
                // alice outcomes, round 1: pick a non-trivial pattern
                let alice_digits = [1usize, 2];
                script.extend(alice_digits);
                bell_picks += 2;
                let mut alice_last: Vec<BellOutcome> = alice_digits
                    .iter()
                    .map(|&d| BellOutcome::from_digit(d).unwrap())
                    .collect();
                for round in 2..=target_round {
                    // bob's return leg: distorted except when it enters the
                    // terminating round
                    let digits = if round == target_round {
                        [0usize, 0]
                    } else {
                        [3usize, 1]
                    };
                    script.extend(digits);
                    bell_picks += 2;
                    // alice's forward leg
                    let digits = [round as usize % 4, (round as usize + 1) % 4];
                    script.extend(digits);
                    bell_picks += 2;
                    alice_last = digits
                        .iter()
                        .map(|&d| BellOutcome::from_digit(d).unwrap())
                        .collect();
                }
                // expected final bits: the label bits flipped by Alice's
                // last forward frame
                let frame = crate::teleport::PauliFrame::from_outcomes(&alice_last);
                for (i, flip) in frame.z_flip_mask().iter().enumerate() {
                    let bit = ((col >> (1 - i)) & 1 != 0) ^ flip;
                    script.push(bit as usize);
                }

                let mut driver = OutcomeDriver::forced(&script);
                let run = run_universal_two_party(&variable, &input, &config, &mut driver).unwrap();
                assert_eq!(run.result.rounds_used, target_round);
                assert_eq!(run.result.eigenvalue, Some(variable.eigenvalue(col)));
                if target_round == 1 {
                    // analytic accounting: round 1 costs K + 2K pairs
                    assert_eq!(run.result.epr_pairs_consumed, 3);
                }
                let peak = run.diagnostics.pre_measure_peak_prob.unwrap();
                assert!(
                    (peak - 1.0).abs() < 1e-10,
                    "round {target_round}, column {col}: peak {peak}"
                );
                // the bit picks were deterministic, so the branch weight is
                // exactly the product of the Bell probabilities
                let expected_weight = 0.25f64.powi(bell_picks as i32);
                let weight = driver.branch_weight();
                assert!(
                    (weight - expected_weight).abs() < expected_weight * 1e-9,
                    "weight {weight} vs {expected_weight}"
                );
            }
        }
    }

    /// Round-1 success probability is exactly 1/N: the joint probability
    /// of all-singlet outcomes across Bob's opening Bell measurements,
    /// computed analytically with sequential conditioning.
    #[test]
    fn round_one_success_probability_is_one_over_n() {
        for k in [1usize, 2] {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + k as u64);
            let variable =
                NonlocalVariable::random(vec![(Site::A, k), (Site::B, k)], &mut rng).unwrap();
            let input = linalg::random_state(variable.dim(), &mut rng);
            let mut reg = Register::new();
            let system = reg.allocate_group(&variable.site_layout(), &input).unwrap();
            let channel = TeleportChannel::prepare(&mut reg, Site::B, Site::A, k);
            let locals = channel.local_halves();
            let mut joint = 1.0;
            for (i, &q) in system[k..].iter().enumerate() {
                let probs = crate::teleport::bell_probabilities(&reg, q, locals[i]).unwrap();
                joint *= probs[0];
                reg.project_onto_state(
                    &[q, locals[i]],
                    &BellOutcome::PsiMinus.state_vector(),
                    Disposal::Consume,
                    false,
                )
                .unwrap();
            }
            let n = 4f64.powi(k as i32);
            assert!((joint - 1.0 / n).abs() < 1e-12, "K={k}: joint {joint}");
        }
    }

    #[test]
    fn exhausted_runs_report_the_configured_maximum() {
        let variable = NonlocalVariable::eq1();
        let input = variable.eigenstate(0);
        let config = ProtocolConfig {
            max_rounds: 2,
            resource_accounting: ResourceAccounting::SimulatedActivePath,
            ..ProtocolConfig::default()
        };
        let mut saw_exhausted = false;
        for trial in 0..60u64 {
            let run = run_seeded(&variable, &input, &config, derive_trial_seed(1004, trial));
            if !run.result.is_decoded() {
                saw_exhausted = true;
                assert_eq!(run.result.rounds_used, 2);
                assert!(run.result.eigenvalue.is_none());
                // active path: 3 pairs round 1, 4 more for the second round
                assert_eq!(run.result.epr_pairs_consumed, 7);
            }
        }
        assert!(saw_exhausted);
    }

    #[test]
    fn analytic_accounting_matches_the_cost_model() {
        assert_eq!(analytic_pairs(1, 2, 1), 3);
        assert_eq!(analytic_pairs(1, 2, 2), 15);
        assert_eq!(analytic_pairs(1, 2, 3), 195);
        assert_eq!(analytic_pairs(1, 2, 4), 2895);
    }

    /// A forced undistorted round-1 run at K=2 exercises multi-pair
    /// teleports end to end.
    #[test]
    fn k2_forced_round_one_decodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let variable =
            NonlocalVariable::random(vec![(Site::A, 2), (Site::B, 2)], &mut rng).unwrap();
        let col = 5;
        let input = variable.eigenstate(col);
        // bob: 2 singlet digits; alice: 4 digits; bits follow from frame
        let alice_digits = [0usize, 3, 1, 2];
        let mut script = vec![0usize, 0];
        script.extend(alice_digits);
        let outcomes: Vec<BellOutcome> = alice_digits
            .iter()
            .map(|&d| BellOutcome::from_digit(d).unwrap())
            .collect();
        let frame = crate::teleport::PauliFrame::from_outcomes(&outcomes);
        for (i, flip) in frame.z_flip_mask().iter().enumerate() {
            let bit = ((col >> (3 - i)) & 1 != 0) ^ flip;
            script.push(bit as usize);
        }
        let mut driver = OutcomeDriver::forced(&script);
        let config = ProtocolConfig::default();
        let run = run_universal_two_party(&variable, &input, &config, &mut driver).unwrap();
        assert_eq!(run.result.rounds_used, 1);
        assert_eq!(run.result.eigenstate_label, Some(col));
    }
}
