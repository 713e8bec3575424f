//! Causality bookkeeping: the superluminal-signaling demonstration for an
//! instantaneous von Neumann measurement, and the no-signaling audit that
//! the verification protocols pass.
//!
//! The audit computes Bob's outcome-averaged reduced density matrix at the
//! end of the instantaneous phase by exact branch enumeration (forced
//! outcomes weighted by their Born probabilities), with and without a local
//! operation Alice slips in just before time t. Local physics says the two
//! must match entry for entry; the oracle-mode projection demonstrably does
//! not.

use ndarray::Array2;
use num_complex::Complex64;

use crate::linalg::{self, ZERO};
use crate::protocols::{run_product_basis_protocol, ProtocolError};
use crate::qsim::{Disposal, OutcomeDriver, QsimError, Register, Site};
use crate::teleport::{teleport_system_with, TeleportChannel, TeleportError};
use crate::variable::NonlocalVariable;

use super::{AnalysisError, Result};

/// P(Bob finds ↓z) after an instantaneous ideal measurement of the
/// product-basis variable on |Ψ₁⟩, averaged over outcomes analytically.
/// `flip` is Alice's last-moment local X.
fn bob_down_probability_after_projection(flip: bool) -> Result<f64> {
    let variable = NonlocalVariable::eq1();
    let input = variable.eigenstate(0);
    let mut total = 0.0;
    for (_, columns) in variable.eigenvalue_groups() {
        let mut reg = Register::new();
        let qubits = reg.allocate_group(&variable.site_layout(), &input)?;
        if flip {
            let spec = crate::qsim::UnitarySpec::new(linalg::pauli_x(), vec![qubits[0]])?;
            reg.apply_unitary(&spec, false)?;
        }
        let prob = match reg.project_onto_span(&qubits, variable.eigenbasis(), &columns, true) {
            Ok(p) => p,
            Err(QsimError::ImpossibleOutcome { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let rho_b = reg.reduced_density(&[qubits[1]])?;
        total += prob * rho_b[(1, 1)].re;
    }
    Ok(total)
}

/// The signaling gap of the ideal von Neumann measurement: returns
/// (p_flip, p_noflip) — Bob's probability of "down" when Alice flips her
/// spin first versus when she does not. Analytic: (0.5, 0.0).
pub fn signaling_demo_von_neumann() -> Result<(f64, f64)> {
    Ok((
        bob_down_probability_after_projection(true)?,
        bob_down_probability_after_projection(false)?,
    ))
}

/// Monte Carlo replication of [`signaling_demo_von_neumann`]: sample the
/// projection and Bob's z measurement `trials` times per arm.
pub fn signaling_demo_monte_carlo(trials: u64, seed: u64) -> Result<(f64, f64)> {
    let variable = NonlocalVariable::eq1();
    let input = variable.eigenstate(0);
    let arm = |flip: bool, salt: u64| -> Result<f64> {
        let mut downs = 0u64;
        for trial in 0..trials {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(super::derive_trial_seed(
                seed ^ salt,
                trial,
            ));
            let mut driver = OutcomeDriver::sampled(&mut rng);
            let mut reg = Register::new();
            let qubits = reg.allocate_group(&variable.site_layout(), &input)?;
            if flip {
                let spec = crate::qsim::UnitarySpec::new(linalg::pauli_x(), vec![qubits[0]])?;
                reg.apply_unitary(&spec, false)?;
            }
            crate::protocols::ideal_projective_measurement(
                &mut reg,
                &variable,
                &qubits,
                &mut driver,
            )?;
            if reg.measure_z_with(qubits[1], &mut driver, Disposal::Consume)? == 1 {
                downs += 1;
            }
        }
        Ok(downs as f64 / trials as f64)
    };
    Ok((arm(true, 0x66)?, arm(false, 0x99)?))
}

/// What the audit runs and snapshots.
pub enum AuditScenario<'a> {
    /// The product-basis protocol on the given two-qubit input; snapshot
    /// after all measurements, over every qubit left at site B.
    ProductBasis { input: &'a [Complex64] },
    /// Round 1 of the universal protocol (both teleports done, before
    /// Bob's conditional action), over every qubit at site B.
    UniversalRoundOne {
        variable: &'a NonlocalVariable,
        input: &'a [Complex64],
    },
    /// The oracle-mode instantaneous projection, over Bob's system block.
    IdealProjective {
        variable: &'a NonlocalVariable,
        input: &'a [Complex64],
    },
}

fn is_impossible_branch(err: &ProtocolError) -> bool {
    matches!(
        err,
        ProtocolError::Sim(QsimError::ImpossibleOutcome { .. })
            | ProtocolError::Teleport(TeleportError::Sim(QsimError::ImpossibleOutcome { .. }))
    )
}

/// Fold Alice's pre-operation into the input state: apply `op` to her
/// leading block of qubits. This is exactly a local unitary at A applied
/// immediately before the protocol starts.
fn fold_pre_op(
    input: &[Complex64],
    pre_op: Option<&Array2<Complex64>>,
    alice_dim: usize,
) -> Result<Vec<Complex64>> {
    let Some(op) = pre_op else {
        return Ok(input.to_vec());
    };
    if op.dim() != (alice_dim, alice_dim) {
        return Err(AnalysisError::DimensionMismatch {
            expected: alice_dim,
            got: op.dim().0,
        });
    }
    let rest = input.len() / alice_dim;
    let full = linalg::kron(op, &linalg::identity(rest));
    Ok((0..input.len())
        .map(|r| (0..input.len()).map(|c| full[(r, c)] * input[c]).sum())
        .collect())
}

/// Enumerate every outcome branch of a scenario and return Bob's
/// outcome-averaged reduced density matrix.
fn averaged_bob_density(
    scenario: &AuditScenario,
    pre_op: Option<&Array2<Complex64>>,
) -> Result<Array2<Complex64>> {
    let mut branches: Vec<(f64, Array2<Complex64>)> = Vec::new();
    match scenario {
        AuditScenario::ProductBasis { input } => {
            let input = fold_pre_op(input, pre_op, 2)?;
            for outcome in 0..4usize {
                for z_bit in 0..2usize {
                    for cond_bit in 0..2usize {
                        let script = [outcome, z_bit, cond_bit];
                        let mut driver = OutcomeDriver::forced(&script);
                        match run_product_basis_protocol(&input, &mut driver, Disposal::Retain) {
                            Ok(run) => {
                                let at_b = run.register.qubits_at(Site::B);
                                let rho = run.register.reduced_density(&at_b)?;
                                branches.push((driver.branch_weight(), rho));
                            }
                            Err(ref e) if is_impossible_branch(e) => {}
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
        }
        AuditScenario::UniversalRoundOne { variable, input } => {
            let (k_alice, k_bob) = match variable.partition() {
                [(Site::A, ka), (Site::B, kb)] => (*ka, *kb),
                other => {
                    return Err(AnalysisError::BadParameter(format!(
                        "universal audit needs an A/B variable, got {other:?}"
                    )))
                }
            };
            let total = k_alice + k_bob;
            let input = fold_pre_op(input, pre_op, 1 << k_alice)?;
            let picks = k_bob + total;
            let mut script = vec![0usize; picks];
            loop {
                let mut driver = OutcomeDriver::forced(&script);
                match universal_round_one(variable, &input, &mut driver) {
                    Ok(rho) => branches.push((driver.branch_weight(), rho)),
                    Err(ref e) if is_impossible_branch(e) => {}
                    Err(ProtocolError::Sim(e)) => return Err(e.into()),
                    Err(e) => return Err(e.into()),
                }
                // next radix-4 script
                let mut done = true;
                for digit in script.iter_mut().rev() {
                    *digit += 1;
                    if *digit < 4 {
                        done = false;
                        break;
                    }
                    *digit = 0;
                }
                if done {
                    break;
                }
            }
        }
        AuditScenario::IdealProjective { variable, input } => {
            let alice_dim = 1usize
                << variable
                    .partition()
                    .iter()
                    .find(|(s, _)| *s == Site::A)
                    .map_or(0, |&(_, k)| k);
            let input = fold_pre_op(input, pre_op, alice_dim)?;
            for (_, columns) in variable.eigenvalue_groups() {
                let mut reg = Register::new();
                let qubits = reg.allocate_group(&variable.site_layout(), &input)?;
                let prob =
                    match reg.project_onto_span(&qubits, variable.eigenbasis(), &columns, true) {
                        Ok(p) => p,
                        Err(QsimError::ImpossibleOutcome { .. }) => continue,
                        Err(e) => return Err(e.into()),
                    };
                let at_b = reg.qubits_at(Site::B);
                let rho = reg.reduced_density(&at_b)?;
                branches.push((prob, rho));
            }
        }
    }

    let total_weight: f64 = branches.iter().map(|(w, _)| w).sum();
    if (total_weight - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::NotADistribution { sum: total_weight });
    }
    let dim = branches[0].1.dim().0;
    let mut averaged = Array2::from_elem((dim, dim), ZERO);
    for (w, rho) in branches {
        let w = Complex64::new(w, 0.0);
        averaged = averaged + rho.mapv(|z| z * w);
    }
    Ok(averaged)
}

/// Round 1 of the universal protocol up to (not including) Bob's
/// conditional action, returning the site-B reduced density.
fn universal_round_one(
    variable: &NonlocalVariable,
    input: &[Complex64],
    driver: &mut OutcomeDriver,
) -> std::result::Result<Array2<Complex64>, ProtocolError> {
    let k_bob = variable
        .partition()
        .iter()
        .find(|(s, _)| *s == Site::B)
        .map_or(0, |&(_, k)| k);
    let total = variable.total_qubits();
    let mut reg = Register::new();
    let mut system = reg.allocate_group(&variable.site_layout(), input)?;
    let mut channel = TeleportChannel::prepare(&mut reg, Site::B, Site::A, k_bob);
    let bob_block: Vec<_> = system[total - k_bob..].to_vec();
    teleport_system_with(&mut reg, &bob_block, &mut channel, driver, Disposal::Retain)?;
    system.splice(total - k_bob.., channel.remote_halves());

    let spec = crate::qsim::UnitarySpec::new(variable.diagonalizer(), system.clone())?;
    reg.apply_unitary(&spec, false)?;
    let mut channel = TeleportChannel::prepare(&mut reg, Site::A, Site::B, total);
    teleport_system_with(&mut reg, &system, &mut channel, driver, Disposal::Retain)?;

    let at_b = reg.qubits_at(Site::B);
    Ok(reg.reduced_density(&at_b)?)
}

/// Largest absolute entry difference of Bob's outcome-averaged reduced
/// density with and without Alice's pre-operation.
pub fn no_signaling_audit(
    scenario: &AuditScenario,
    alice_pre_op: &Array2<Complex64>,
) -> Result<f64> {
    let with = averaged_bob_density(scenario, Some(alice_pre_op))?;
    let without = averaged_bob_density(scenario, None)?;
    let mut worst = 0.0f64;
    for r in 0..with.dim().0 {
        for c in 0..with.dim().1 {
            worst = worst.max((with[(r, c)] - without[(r, c)]).norm());
        }
    }
    Ok(worst)
}
