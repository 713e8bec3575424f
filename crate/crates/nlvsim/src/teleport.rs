//! Bell measurements, one-way teleportation channels and Pauli-frame
//! bookkeeping.
//!
//! "Teleportation" here is only the sender's Bell measurement against the
//! local halves of prearranged singlet pairs; no classical message ever
//! travels to the receiver. The receiver's qubits end up carrying the input
//! state distorted by one Pauli per qubit, determined by the Bell outcome:
//!
//! ```text
//! |Ψ⟩₁|Ψ−⟩₂₃ = ½ ( |Ψ−⟩₁₂ |Ψ⟩₃ + |Ψ+⟩₁₂ Z|Ψ⟩₃
//!               + |Φ−⟩₁₂ X|Ψ⟩₃ + |Φ+⟩₁₂ Y|Ψ⟩₃ )   (up to phases)
//! ```
//!
//! π-rotations about the z, x and y axes equal Z, X and Y up to a global
//! phase, so frames are tracked as phase-free Pauli strings.
//!
//! Outcome lists are encoded as 1-based indices in a fixed radix-4 order
//! (Ψ− = 0, Ψ+ = 1, Φ− = 2, Φ+ = 3, first qubit most significant), so the
//! all-singlet outcome — teleportation without distortion — is index 1.

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, ZERO};
use crate::qsim::{Disposal, OutcomeDriver, QsimError, QubitId, Register, Site, UnitarySpec};

#[derive(Debug, Error)]
pub enum TeleportError {
    #[error(transparent)]
    Sim(#[from] QsimError),
    #[error("bell measurement requires both qubits at one site, got {0} and {1}")]
    CrossSitePair(Site, Site),
    #[error("teleport channel already used")]
    ChannelReused,
    #[error("channel capacity {capacity} does not match system size {system}")]
    CapacityMismatch { capacity: usize, system: usize },
    #[error("system qubit {qubit} is at {found}, expected sender site {expected}")]
    SiteMismatch {
        qubit: QubitId,
        found: Site,
        expected: Site,
    },
    #[error("outcome list is empty")]
    EmptyOutcomes,
    #[error("outcome index {index} out of range 1..={max}")]
    IndexOutOfRange { index: u64, max: u64 },
    #[error("frame lengths differ: {0} vs {1}")]
    FrameLengthMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, TeleportError>;

/// The four Bell-measurement results, in the fixed digit order used for
/// outcome indexing. `PsiMinus` is the no-distortion outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellOutcome {
    PsiMinus,
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PsiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PhiPlus,
    ];

    /// Radix-4 digit of this outcome.
    pub fn digit(self) -> usize {
        match self {
            BellOutcome::PsiMinus => 0,
            BellOutcome::PsiPlus => 1,
            BellOutcome::PhiMinus => 2,
            BellOutcome::PhiPlus => 3,
        }
    }

    pub fn from_digit(d: usize) -> Option<Self> {
        Self::ALL.get(d).copied()
    }

    /// The Bell state as a two-qubit amplitude vector (first qubit most
    /// significant).
    pub fn state_vector(self) -> [Complex64; 4] {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            BellOutcome::PsiMinus => [ZERO, h, -h, ZERO],
            BellOutcome::PsiPlus => [ZERO, h, h, ZERO],
            BellOutcome::PhiMinus => [h, ZERO, ZERO, -h],
            BellOutcome::PhiPlus => [h, ZERO, ZERO, h],
        }
    }
}

impl std::fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BellOutcome::PsiMinus => "Psi-",
            BellOutcome::PsiPlus => "Psi+",
            BellOutcome::PhiMinus => "Phi-",
            BellOutcome::PhiPlus => "Phi+",
        };
        f.write_str(s)
    }
}

/// Phase-free single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl std::ops::Mul for PauliOp {
    type Output = PauliOp;

    /// Composition with the phase discarded.
    fn mul(self, other: Self) -> Self {
        use PauliOp::*;
        match (self, other) {
            (I, p) | (p, I) => p,
            (a, b) if a == b => I,
            (X, Y) | (Y, X) => Z,
            (Y, Z) | (Z, Y) => X,
            (X, Z) | (Z, X) => Y,
            _ => unreachable!(),
        }
    }
}

impl PauliOp {
    pub fn matrix(self) -> Array2<Complex64> {
        match self {
            PauliOp::I => linalg::identity(2),
            PauliOp::X => linalg::pauli_x(),
            PauliOp::Y => linalg::pauli_y(),
            PauliOp::Z => linalg::pauli_z(),
        }
    }

    /// Does this Pauli flip z-basis eigenstates? (X and Y do.)
    pub fn flips_z(self) -> bool {
        matches!(self, PauliOp::X | PauliOp::Y)
    }

    /// Does this Pauli flip x-basis eigenstates? (Z and Y do.)
    pub fn flips_x(self) -> bool {
        matches!(self, PauliOp::Z | PauliOp::Y)
    }
}

impl std::fmt::Display for PauliOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PauliOp::I => "I",
            PauliOp::X => "X",
            PauliOp::Y => "Y",
            PauliOp::Z => "Z",
        };
        f.write_str(s)
    }
}

/// The Pauli distortion a Bell outcome imprints on the receiving qubit.
pub fn pauli_of(outcome: BellOutcome) -> PauliOp {
    match outcome {
        BellOutcome::PsiMinus => PauliOp::I,
        BellOutcome::PsiPlus => PauliOp::Z,
        BellOutcome::PhiMinus => PauliOp::X,
        BellOutcome::PhiPlus => PauliOp::Y,
    }
}

/// Phase-free Pauli string, one operator per tracked qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliFrame(Vec<PauliOp>);

impl PauliFrame {
    pub fn identity(len: usize) -> Self {
        PauliFrame(vec![PauliOp::I; len])
    }

    pub fn from_ops(ops: Vec<PauliOp>) -> Self {
        PauliFrame(ops)
    }

    /// The frame implied by a list of Bell outcomes, one per qubit.
    pub fn from_outcomes(outcomes: &[BellOutcome]) -> Self {
        PauliFrame(outcomes.iter().map(|&o| pauli_of(o)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ops(&self) -> &[PauliOp] {
        &self.0
    }

    /// Per-qubit composition, phase discarded.
    pub fn compose(&self, other: &PauliFrame) -> Result<PauliFrame> {
        if self.len() != other.len() {
            return Err(TeleportError::FrameLengthMismatch(self.len(), other.len()));
        }
        Ok(PauliFrame(
            self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).collect(),
        ))
    }

    /// Which qubits get their z-basis value flipped by this frame.
    pub fn z_flip_mask(&self) -> Vec<bool> {
        self.0.iter().map(|p| p.flips_z()).collect()
    }

    /// Dense matrix of the full string (first qubit most significant).
    pub fn matrix(&self) -> Array2<Complex64> {
        let mut m = linalg::identity(1);
        for p in &self.0 {
            m = linalg::kron(&m, &p.matrix());
        }
        m
    }
}

impl std::fmt::Display for PauliFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.0 {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Per-qubit composition of two frames of equal length.
pub fn compose_frames(f1: &PauliFrame, f2: &PauliFrame) -> Result<PauliFrame> {
    f1.compose(f2)
}

/// Apply a frame as local single-qubit unitaries to co-located targets.
pub fn apply_frame(reg: &mut Register, frame: &PauliFrame, targets: &[QubitId]) -> Result<()> {
    if frame.len() != targets.len() {
        return Err(TeleportError::FrameLengthMismatch(
            frame.len(),
            targets.len(),
        ));
    }
    for (&p, &q) in frame.ops().iter().zip(targets) {
        if p == PauliOp::I {
            continue;
        }
        let spec = UnitarySpec::new(p.matrix(), vec![q])?;
        reg.apply_unitary(&spec, false)?;
    }
    Ok(())
}

/// Bell-basis matrix with outcome `o` in column `o.digit()`.
fn bell_basis_matrix() -> Array2<Complex64> {
    let mut m = Array2::from_elem((4, 4), ZERO);
    for o in BellOutcome::ALL {
        let v = o.state_vector();
        for (row, &z) in v.iter().enumerate() {
            m[(row, o.digit())] = z;
        }
    }
    m
}

/// Analytic Born probabilities of the four Bell outcomes on `(q1, q2)`.
pub fn bell_probabilities(reg: &Register, q1: QubitId, q2: QubitId) -> Result<[f64; 4]> {
    let probs = reg.projection_probabilities(&[q1, q2], &bell_basis_matrix())?;
    Ok([probs[0], probs[1], probs[2], probs[3]])
}

fn check_colocated(q1: QubitId, q2: QubitId) -> Result<()> {
    if q1.site() != q2.site() {
        return Err(TeleportError::CrossSitePair(q1.site(), q2.site()));
    }
    Ok(())
}

/// Bell measurement of a co-located pair. Both qubits are consumed and the
/// rest of the register is renormalized onto the sampled branch.
pub fn bell_measure(
    reg: &mut Register,
    q1: QubitId,
    q2: QubitId,
    driver: &mut OutcomeDriver,
) -> Result<BellOutcome> {
    bell_measure_with(reg, q1, q2, driver, Disposal::Consume)
}

/// Bell measurement that can also leave the pair collapsed in place
/// (`Disposal::Retain`), for post-measurement state inspection.
pub fn bell_measure_with(
    reg: &mut Register,
    q1: QubitId,
    q2: QubitId,
    driver: &mut OutcomeDriver,
    disposal: Disposal,
) -> Result<BellOutcome> {
    check_colocated(q1, q2)?;
    let probs = bell_probabilities(reg, q1, q2)?;
    let digit = driver.pick(&probs)?;
    let outcome = BellOutcome::from_digit(digit).expect("digit in range");
    reg.project_onto_state(&[q1, q2], &outcome.state_vector(), disposal, false)?;
    Ok(outcome)
}

/// A one-way teleportation channel: `capacity` singlet pairs with the local
/// halves at the sender site and the remote halves at the receiver site.
/// Single use; reuse is an error.
#[derive(Debug)]
pub struct TeleportChannel {
    pairs: Vec<(QubitId, QubitId)>,
    sender: Site,
    receiver: Site,
    used: bool,
}

impl TeleportChannel {
    /// Allocate `capacity` fresh singlets in `reg`.
    pub fn prepare(reg: &mut Register, sender: Site, receiver: Site, capacity: usize) -> Self {
        let pairs = (0..capacity)
            .map(|_| reg.allocate_epr_pair(sender, receiver))
            .collect();
        TeleportChannel {
            pairs,
            sender,
            receiver,
            used: false,
        }
    }

    pub fn capacity(&self) -> usize {
        self.pairs.len()
    }

    pub fn sender(&self) -> Site {
        self.sender
    }

    pub fn receiver(&self) -> Site {
        self.receiver
    }

    pub fn is_used(&self) -> bool {
        self.used
    }

    pub fn local_halves(&self) -> Vec<QubitId> {
        self.pairs.iter().map(|&(l, _)| l).collect()
    }

    pub fn remote_halves(&self) -> Vec<QubitId> {
        self.pairs.iter().map(|&(_, r)| r).collect()
    }
}

/// Teleport `system` through `channel`: Bell-measure each system qubit
/// against the matching local half. The remote halves then carry the input
/// state, distorted qubit-by-qubit by `pauli_of` of the outcomes, in the
/// same positional order.
pub fn teleport_system(
    reg: &mut Register,
    system: &[QubitId],
    channel: &mut TeleportChannel,
    driver: &mut OutcomeDriver,
) -> Result<Vec<BellOutcome>> {
    teleport_system_with(reg, system, channel, driver, Disposal::Consume)
}

/// [`teleport_system`] with an explicit disposal for the measured pairs.
pub fn teleport_system_with(
    reg: &mut Register,
    system: &[QubitId],
    channel: &mut TeleportChannel,
    driver: &mut OutcomeDriver,
    disposal: Disposal,
) -> Result<Vec<BellOutcome>> {
    if channel.used {
        return Err(TeleportError::ChannelReused);
    }
    if channel.capacity() != system.len() {
        return Err(TeleportError::CapacityMismatch {
            capacity: channel.capacity(),
            system: system.len(),
        });
    }
    for &q in system {
        if q.site() != channel.sender {
            return Err(TeleportError::SiteMismatch {
                qubit: q,
                found: q.site(),
                expected: channel.sender,
            });
        }
    }
    channel.used = true;
    let mut outcomes = Vec::with_capacity(system.len());
    for (&q, &(local, _)) in system.iter().zip(&channel.pairs) {
        outcomes.push(bell_measure_with(reg, q, local, driver, disposal)?);
    }
    Ok(outcomes)
}

/// 1-based radix-4 encoding of an outcome list; all-Ψ− maps to 1 and the
/// first outcome is the most significant digit.
pub fn outcome_index(outcomes: &[BellOutcome]) -> Result<u64> {
    if outcomes.is_empty() {
        return Err(TeleportError::EmptyOutcomes);
    }
    let mut value = 0u64;
    for o in outcomes {
        value = value * 4 + o.digit() as u64;
    }
    Ok(value + 1)
}

/// Inverse of [`outcome_index`] for a known list length.
pub fn outcomes_from_index(index: u64, len: usize) -> Result<Vec<BellOutcome>> {
    if len == 0 {
        return Err(TeleportError::EmptyOutcomes);
    }
    let max = 4u64.pow(len as u32);
    if index < 1 || index > max {
        return Err(TeleportError::IndexOutOfRange { index, max });
    }
    let mut value = index - 1;
    let mut digits = vec![0usize; len];
    for d in digits.iter_mut().rev() {
        *d = (value % 4) as usize;
        value /= 4;
    }
    Ok(digits
        .into_iter()
        .map(|d| BellOutcome::from_digit(d).expect("digit in range"))
        .collect())
}

/// Cluster-tree coordinates (n, m₁, m₂, …) of a teleportation channel.
/// The path is the only information that ever travels between parties
/// during the instantaneous phase.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelAddress(Vec<u64>);

impl ChannelAddress {
    pub fn new(path: Vec<u64>) -> Self {
        debug_assert!(
            path.iter().all(|&c| c >= 1),
            "address components are 1-based"
        );
        ChannelAddress(path)
    }

    pub fn components(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Validate against per-position bounds: `bound(i)` is the inclusive
    /// maximum of component `i`.
    pub fn validate(&self, bound: impl Fn(usize) -> u64) -> Result<()> {
        for (i, &c) in self.0.iter().enumerate() {
            let max = bound(i);
            if c < 1 || c > max {
                return Err(TeleportError::IndexOutOfRange { index: c, max });
            }
        }
        Ok(())
    }

    pub fn starts_with(&self, prefix: &ChannelAddress) -> bool {
        self.0.len() >= prefix.0.len() && self.0[..prefix.0.len()] == prefix.0[..]
    }
}

impl std::fmt::Display for ChannelAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}
