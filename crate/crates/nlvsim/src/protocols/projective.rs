//! Ideal (von Neumann) projective measurement of a nonlocal variable.
//!
//! Samples an eigenvalue by the Born rule and projects onto the — possibly
//! degenerate — eigenspace, leaving the system in the corresponding
//! eigenstate. Performed instantaneously on a nonlocal variable this is
//! exactly the operation that contradicts causality, so it only runs in
//! oracle mode; the verification protocols never touch it. It doubles as
//! the reference against which their statistics are checked.

use num_complex::Complex64;

use crate::qsim::{OutcomeDriver, QubitId, Register};
use crate::variable::NonlocalVariable;

use super::{ProtocolError, Result};

/// Project `targets` (the variable's qubits, in tensor order) onto an
/// eigenspace of the variable. Returns the sampled eigenvalue and the
/// eigenvalue-group index; the register keeps the projected state.
pub fn ideal_projective_measurement(
    reg: &mut Register,
    variable: &NonlocalVariable,
    targets: &[QubitId],
    driver: &mut OutcomeDriver,
) -> Result<(f64, usize)> {
    if targets.len() != variable.total_qubits() {
        return Err(ProtocolError::InputDimension {
            expected: variable.total_qubits(),
            got: targets.len(),
        });
    }
    let groups = variable.eigenvalue_groups();
    let columns: Vec<Vec<usize>> = groups.iter().map(|(_, cols)| cols.clone()).collect();
    let chosen = reg.measure_eigengroups(
        targets,
        variable.eigenbasis(),
        &columns,
        driver,
        true, // deliberately nonphysical: the projector spans sites
    )?;
    Ok((groups[chosen].0, chosen))
}

/// Convenience: allocate `state` over the variable's sites, project once,
/// and return (eigenvalue, group, register, qubits).
pub fn project_fresh_state(
    variable: &NonlocalVariable,
    state: &[Complex64],
    driver: &mut OutcomeDriver,
) -> Result<(f64, usize, Register, Vec<QubitId>)> {
    let mut reg = Register::new();
    let qubits = reg.allocate_group(&variable.site_layout(), state)?;
    let (value, group) = ideal_projective_measurement(&mut reg, variable, &qubits, driver)?;
    Ok((value, group, reg, qubits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::derive_trial_seed;
    use crate::qsim::Site;
    use crate::variable::NonlocalVariable;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigenstate_input_is_a_fixed_point() {
        let variable = NonlocalVariable::eq1();
        let input = variable.eigenstate(0);
        for trial in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(3000, trial));
            let mut driver = OutcomeDriver::sampled(&mut rng);
            let (value, _, reg, qubits) =
                project_fresh_state(&variable, &input, &mut driver).unwrap();
            assert_eq!(value, 1.0);
            let fid = reg.fidelity_in_order(&qubits, &input).unwrap();
            assert!((fid - 1.0).abs() < 1e-10);
        }
    }

    /// |↓z↑z⟩ = (|Ψ₃⟩ + |Ψ₄⟩)/√2, so eigenvalues 3 and 4 come out half the
    /// time each, and the post-state is the selected eigenstate.
    #[test]
    fn down_up_splits_between_eigenvalues_three_and_four() {
        let variable = NonlocalVariable::eq1();
        let mut input = vec![Complex64::new(0.0, 0.0); 4];
        input[0b10] = Complex64::new(1.0, 0.0);

        // forced-branch probabilities are exactly 1/2 each
        for (group, expected_value) in [(2usize, 3.0), (3usize, 4.0)] {
            let script = [group];
            let mut driver = OutcomeDriver::forced(&script);
            let (value, chosen, reg, qubits) =
                project_fresh_state(&variable, &input, &mut driver).unwrap();
            assert_eq!(value, expected_value);
            assert_eq!(chosen, group);
            assert!((driver.branch_weight() - 0.5).abs() < 1e-12);
            let eigenstate = variable.eigenstate(chosen);
            let fid = reg.fidelity_in_order(&qubits, &eigenstate).unwrap();
            assert!((fid - 1.0).abs() < 1e-10);
        }
        // and eigenvalues 1, 2 never appear
        for group in [0usize, 1] {
            let script = [group];
            let mut driver = OutcomeDriver::forced(&script);
            assert!(project_fresh_state(&variable, &input, &mut driver).is_err());
        }
    }

    #[test]
    fn degenerate_groups_project_onto_the_whole_eigenspace() {
        // two columns share eigenvalue 1; a superposition inside that
        // eigenspace survives the projection untouched
        let variable = NonlocalVariable::new(
            vec![(Site::A, 1), (Site::B, 1)],
            crate::linalg::identity(4),
            vec![1.0, 1.0, 2.0, 3.0],
        )
        .unwrap();
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let input = vec![h, h, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut driver = OutcomeDriver::sampled(&mut rng);
        let (value, _, reg, qubits) = project_fresh_state(&variable, &input, &mut driver).unwrap();
        assert_eq!(value, 1.0);
        let fid = reg.fidelity_in_order(&qubits, &input).unwrap();
        assert!((fid - 1.0).abs() < 1e-10);
    }
}
