//! The two-qubit product-basis example: distinguishing |↑z↑z⟩, |↑z↓z⟩,
//! |↓z↑x⟩ and |↓z↓x⟩ with one teleportation and two local measurements.
//!
//! Bob Bell-measures his particle against his half of a shared singlet.
//! Alice measures her own particle in z; if it came up "up" she measures
//! the teleported particle in z, otherwise in x. Because z and x
//! eigenstates are teleported without leaving their lines, Bob's knowledge
//! of the possible flip plus Alice's two bits identify the eigenstate with
//! certainty — even though nobody waited for anybody.

use num_complex::Complex64;

use crate::linalg::hadamard;
use crate::qsim::{Disposal, OutcomeDriver, QubitId, Register, Site, UnitarySpec};
use crate::teleport::{pauli_of, BellOutcome, TeleportChannel};
use crate::variable::NonlocalVariable;

use super::transcript::{MeasureAxis, TeleportLeg, Transcript};
use super::{ProtocolError, Result};

/// Everything a single run produces, including the final register so tests
/// can inspect what the protocol left behind.
#[derive(Debug)]
pub struct ProductBasisRun {
    /// Eigenbasis column index (0 ↦ |Ψ₁⟩ … 3 ↦ |Ψ₄⟩).
    pub label: usize,
    pub eigenvalue: f64,
    pub transcripts: Vec<Transcript>,
    pub register: Register,
    /// The original system qubits (Alice's, Bob's).
    pub system: (QubitId, QubitId),
}

/// Decode the eigenstate from Bob's Bell outcome and Alice's two bits.
///
/// Alice's z bit picks the |↑z·⟩ vs |↓z·⟩ branch. Her conditional bit is
/// un-flipped according to whether the teleportation Pauli flips the line
/// she measured (X and Y flip the z line; Z and Y flip the x line), which
/// recovers Bob's original spin on that line.
pub fn decode_product_basis(bob_outcome: BellOutcome, alice_z: u8, alice_cond: u8) -> usize {
    let pauli = pauli_of(bob_outcome);
    if alice_z == 0 {
        let original = (alice_cond != 0) ^ pauli.flips_z();
        original as usize
    } else {
        let original = (alice_cond != 0) ^ pauli.flips_x();
        2 + original as usize
    }
}

/// Run the protocol on a two-qubit input (first qubit at A, second at B).
///
/// `disposal` controls whether measured qubits are dropped (the protocol
/// default) or left collapsed in place for post-state inspection.
pub fn run_product_basis_protocol(
    input: &[Complex64],
    driver: &mut OutcomeDriver,
    disposal: Disposal,
) -> Result<ProductBasisRun> {
    if input.len() != 4 {
        return Err(ProtocolError::InputDimension {
            expected: 4,
            got: input.len(),
        });
    }
    let variable = NonlocalVariable::eq1();
    let mut reg = Register::new();
    let system = reg.allocate_group(&[Site::A, Site::B], input)?;
    let (alice_q, bob_q) = (system[0], system[1]);

    let mut alice_t = Transcript::new(Site::A);
    let mut bob_t = Transcript::new(Site::B);

    // Bob teleports his particle to Alice: Bell measurement only.
    let mut channel = TeleportChannel::prepare(&mut reg, Site::B, Site::A, 1);
    let outcomes =
        crate::teleport::teleport_system_with(&mut reg, &[bob_q], &mut channel, driver, disposal)?;
    let bob_outcome = outcomes[0];
    bob_t.record_teleport(1, TeleportLeg::Initial, outcomes);
    let teleported = channel.remote_halves()[0];

    // Alice, without waiting: z on her own particle, then z or x on the
    // teleported one.
    let alice_z = reg.measure_z_with(alice_q, driver, disposal)?;
    let axis = if alice_z == 0 {
        MeasureAxis::Z
    } else {
        MeasureAxis::X
    };
    if axis == MeasureAxis::X {
        let spec = UnitarySpec::new(hadamard(), vec![teleported])?;
        reg.apply_unitary(&spec, false)?;
    }
    let alice_cond = reg.measure_z_with(teleported, driver, disposal)?;
    alice_t.record_basis_choice(1, axis);
    alice_t.record_z_measurement(1, vec![alice_z, alice_cond]);

    let label = decode_product_basis(bob_outcome, alice_z, alice_cond);
    Ok(ProductBasisRun {
        label,
        eigenvalue: variable.eigenvalue(label),
        transcripts: vec![alice_t, bob_t],
        register: reg,
        system: (alice_q, bob_q),
    })
}
