//! Pure-state simulator of site-tagged qubits.
//!
//! A [`Register`] holds the joint state of every live qubit as a dense
//! amplitude vector together with an explicit qubit sequence. This module is
//! the single source of truth for the tensor-index conventions used by the
//! whole crate:
//!
//! - the **first** qubit in the register order is the **most significant**
//!   bit of an amplitude index (`order[0]` ↔ bit `n−1`);
//! - bit value 0 is spin-up along z, bit value 1 is spin-down;
//! - multi-qubit operations take explicitly ordered targets, and the first
//!   target is the most significant bit of the operator's local index.
//!
//! Every qubit is tagged with the [`Site`] that holds it. Unitaries and
//! joint projections that touch more than one site are rejected unless the
//! caller explicitly asks for oracle mode; that escape hatch exists only for
//! the nonlocal von Neumann projection used in causality demonstrations and
//! is never taken on a protocol path.
//!
//! Measuring a qubit removes it from the register, so the simulated
//! dimension stays bounded while protocols burn through entangled pairs.
//! Projections that keep the measured qubits alive (`Disposal::Retain`) are
//! available for post-measurement state inspection.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, RngCore};
use thiserror::Error;

use crate::linalg::{self, ZERO};

/// Normalization and unitarity tolerance for analytic identities.
pub const TOLERANCE: f64 = 1e-10;

/// Probability below which a forced or projected outcome is impossible.
const PROB_FLOOR: f64 = 1e-14;

/// Party identifier. The set of sites is fixed; a register may use any
/// subset of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    A,
    B,
    C,
}

impl Site {
    pub fn name(self) -> &'static str {
        match self {
            Site::A => "A",
            Site::B => "B",
            Site::C => "C",
        }
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Site {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Site::A),
            "B" | "b" => Ok(Site::B),
            "C" | "c" => Ok(Site::C),
            other => Err(format!("unknown site `{other}` (expected A, B or C)")),
        }
    }
}

/// Opaque handle to a live qubit. Handles of measured qubits stay around
/// but no longer resolve inside the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QubitId {
    id: u64,
    site: Site,
}

impl QubitId {
    pub fn site(self) -> Site {
        self.site
    }
}

impl std::fmt::Display for QubitId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.site, self.id)
    }
}

#[derive(Debug, Error)]
pub enum QsimError {
    #[error("state vector is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("qubit {0} is not live in this register")]
    DeadQubit(QubitId),
    #[error("duplicate target qubit {0}")]
    DuplicateTarget(QubitId),
    #[error("operation spans sites {0:?} without oracle mode")]
    LocalityViolation(Vec<Site>),
    #[error("matrix is not unitary: deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    NotUnitary { deviation: f64, tolerance: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation needs at least one target qubit")]
    NoTargets,
    #[error("outcome has probability {probability:.3e}; branch is impossible")]
    ImpossibleOutcome { probability: f64 },
    #[error("forced outcome script exhausted after {consumed} choices")]
    ScriptExhausted { consumed: usize },
    #[error("forced choice {choice} out of range for {arity} outcomes")]
    ForcedChoiceOutOfRange { choice: usize, arity: usize },
}

pub type Result<T> = std::result::Result<T, QsimError>;

/// What happens to a qubit after a projective measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Disposal {
    /// Project, renormalize and drop the qubit from the register.
    #[default]
    Consume,
    /// Project and renormalize in place, keeping the qubit live.
    Retain,
}

/// Chooses measurement outcomes, either sampled by the Born probabilities
/// or replayed from a fixed script.
///
/// Forced mode accumulates the branch weight (product of the Born
/// probabilities of the forced choices), which is what exact
/// outcome-enumeration needs.
pub enum OutcomeDriver<'a> {
    Sample(&'a mut dyn RngCore),
    Force {
        script: &'a [usize],
        cursor: usize,
        weight: f64,
    },
}

impl<'a> OutcomeDriver<'a> {
    pub fn sampled(rng: &'a mut dyn RngCore) -> Self {
        OutcomeDriver::Sample(rng)
    }

    pub fn forced(script: &'a [usize]) -> Self {
        OutcomeDriver::Force {
            script,
            cursor: 0,
            weight: 1.0,
        }
    }

    /// Pick one outcome from `probs` (which sum to 1 up to rounding).
    pub fn pick(&mut self, probs: &[f64]) -> Result<usize> {
        match self {
            OutcomeDriver::Sample(rng) => {
                let total: f64 = probs.iter().sum();
                let u = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut last_possible = 0;
                for (i, &p) in probs.iter().enumerate() {
                    if p > 0.0 {
                        last_possible = i;
                    }
                    acc += p;
                    if u < acc && p > 0.0 {
                        return Ok(i);
                    }
                }
                Ok(last_possible)
            }
            OutcomeDriver::Force {
                script,
                cursor,
                weight,
            } => {
                let Some(&choice) = script.get(*cursor) else {
                    return Err(QsimError::ScriptExhausted { consumed: *cursor });
                };
                *cursor += 1;
                if choice >= probs.len() {
                    return Err(QsimError::ForcedChoiceOutOfRange {
                        choice,
                        arity: probs.len(),
                    });
                }
                let p = probs[choice];
                if p < PROB_FLOOR {
                    return Err(QsimError::ImpossibleOutcome { probability: p });
                }
                *weight *= p;
                Ok(choice)
            }
        }
    }

    /// Probability of the branch selected so far (1.0 in sampled mode).
    pub fn branch_weight(&self) -> f64 {
        match self {
            OutcomeDriver::Sample(_) => 1.0,
            OutcomeDriver::Force { weight, .. } => *weight,
        }
    }
}

/// A k-qubit unitary together with the ordered qubits it acts on.
///
/// Construction validates unitarity to [`TOLERANCE`]; the target list fixes
/// the bit order (first target = most significant local bit).
#[derive(Debug, Clone)]
pub struct UnitarySpec {
    matrix: Array2<Complex64>,
    targets: Vec<QubitId>,
}

impl UnitarySpec {
    pub fn new(matrix: Array2<Complex64>, targets: Vec<QubitId>) -> Result<Self> {
        if targets.is_empty() {
            return Err(QsimError::NoTargets);
        }
        let dim = 1usize << targets.len();
        if matrix.dim() != (dim, dim) {
            return Err(QsimError::DimensionMismatch {
                expected: dim,
                got: matrix.dim().0,
            });
        }
        let deviation = linalg::unitarity_deviation(&matrix);
        if deviation > TOLERANCE {
            return Err(QsimError::NotUnitary {
                deviation,
                tolerance: TOLERANCE,
            });
        }
        Ok(UnitarySpec { matrix, targets })
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn targets(&self) -> &[QubitId] {
        &self.targets
    }
}

/// Precomputed index plan for operations on a target subset.
struct GatherPlan {
    /// Offsets of the 2^k local basis states inside a full index.
    offsets: Vec<usize>,
    /// Bit shifts of the non-target qubits, most significant first.
    comp_shifts: Vec<usize>,
}

impl GatherPlan {
    fn spread(&self, c: usize) -> usize {
        let mut base = 0;
        for (l, &shift) in self.comp_shifts.iter().enumerate() {
            let bit = (c >> (self.comp_shifts.len() - 1 - l)) & 1;
            base |= bit << shift;
        }
        base
    }

    fn complement_count(&self) -> usize {
        1 << self.comp_shifts.len()
    }
}

/// Dense state vector over an ordered set of live, site-tagged qubits.
#[derive(Debug, Clone)]
pub struct Register {
    amps: Vec<Complex64>,
    order: Vec<QubitId>,
    next_id: u64,
}

impl Default for Register {
    fn default() -> Self {
        Self::new()
    }
}

impl Register {
    /// Empty register (scalar amplitude 1).
    pub fn new() -> Self {
        Register {
            amps: vec![linalg::ONE],
            order: Vec::new(),
            next_id: 0,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.order.len()
    }

    pub fn qubits(&self) -> &[QubitId] {
        &self.order
    }

    pub fn qubits_at(&self, site: Site) -> Vec<QubitId> {
        self.order
            .iter()
            .copied()
            .filter(|q| q.site == site)
            .collect()
    }

    pub fn is_live(&self, q: QubitId) -> bool {
        self.order.contains(&q)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        linalg::norm_sqr(&self.amps)
    }

    fn position(&self, q: QubitId) -> Result<usize> {
        self.order
            .iter()
            .position(|&x| x == q)
            .ok_or(QsimError::DeadQubit(q))
    }

    /// Bit shift of the qubit at `pos` in the order (first qubit = MSB).
    fn shift(&self, pos: usize) -> usize {
        self.order.len() - 1 - pos
    }

    fn plan(&self, targets: &[QubitId]) -> Result<GatherPlan> {
        if targets.is_empty() {
            return Err(QsimError::NoTargets);
        }
        let mut positions = Vec::with_capacity(targets.len());
        for (i, &q) in targets.iter().enumerate() {
            if targets[..i].contains(&q) {
                return Err(QsimError::DuplicateTarget(q));
            }
            positions.push(self.position(q)?);
        }
        let shifts: Vec<usize> = positions.iter().map(|&p| self.shift(p)).collect();
        let k = targets.len();
        let mut offsets = vec![0usize; 1 << k];
        for (j, off) in offsets.iter_mut().enumerate() {
            for (l, &s) in shifts.iter().enumerate() {
                *off |= ((j >> (k - 1 - l)) & 1) << s;
            }
        }
        let comp_shifts: Vec<usize> = (0..self.order.len())
            .filter(|p| !positions.contains(p))
            .map(|p| self.shift(p))
            .collect();
        Ok(GatherPlan {
            offsets,
            comp_shifts,
        })
    }

    fn check_locality(&self, targets: &[QubitId], oracle_mode: bool) -> Result<()> {
        if oracle_mode {
            return Ok(());
        }
        let mut sites: Vec<Site> = targets.iter().map(|q| q.site).collect();
        sites.sort();
        sites.dedup();
        if sites.len() > 1 {
            return Err(QsimError::LocalityViolation(sites));
        }
        Ok(())
    }

    fn assert_normalized(&self) {
        debug_assert!(
            (self.norm_sqr() - 1.0).abs() < TOLERANCE,
            "register norm drifted: {}",
            self.norm_sqr()
        );
    }

    /// Extend the register with one qubit in the given single-qubit state.
    pub fn allocate_qubit(
        &mut self,
        site: Site,
        amp_up: Complex64,
        amp_down: Complex64,
    ) -> Result<QubitId> {
        Ok(self.allocate_group(&[site], &[amp_up, amp_down])?[0])
    }

    /// Extend the register by the tensor product with a joint state over
    /// freshly allocated qubits (one per site entry, in order).
    pub fn allocate_group(&mut self, sites: &[Site], state: &[Complex64]) -> Result<Vec<QubitId>> {
        if sites.is_empty() {
            return Err(QsimError::NoTargets);
        }
        let dim = 1usize << sites.len();
        if state.len() != dim {
            return Err(QsimError::DimensionMismatch {
                expected: dim,
                got: state.len(),
            });
        }
        let norm_sqr = linalg::norm_sqr(state);
        if (norm_sqr - 1.0).abs() > TOLERANCE {
            return Err(QsimError::NotNormalized { norm_sqr });
        }
        let mut new_amps = vec![ZERO; self.amps.len() * dim];
        for (i, &a) in self.amps.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (j, &s) in state.iter().enumerate() {
                new_amps[i * dim + j] = a * s;
            }
        }
        self.amps = new_amps;
        let ids: Vec<QubitId> = sites
            .iter()
            .map(|&site| {
                let id = QubitId {
                    id: self.next_id,
                    site,
                };
                self.next_id += 1;
                self.order.push(id);
                id
            })
            .collect();
        self.assert_normalized();
        Ok(ids)
    }

    /// Allocate a fresh EPR (Bohm) pair |Ψ−⟩ = (|↑↓⟩ − |↓↑⟩)/√2 with one
    /// half at each site.
    pub fn allocate_epr_pair(&mut self, site_x: Site, site_y: Site) -> (QubitId, QubitId) {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let ids = self
            .allocate_group(&[site_x, site_y], &[ZERO, h, -h, ZERO])
            .expect("singlet state is normalized");
        (ids[0], ids[1])
    }

    /// Apply a matrix to the target subset without a unitarity check.
    fn apply_matrix(&mut self, matrix: &Array2<Complex64>, targets: &[QubitId]) -> Result<()> {
        let plan = self.plan(targets)?;
        let dim = plan.offsets.len();
        let mut gathered = vec![ZERO; dim];
        for c in 0..plan.complement_count() {
            let base = plan.spread(c);
            for (j, &off) in plan.offsets.iter().enumerate() {
                gathered[j] = self.amps[base + off];
            }
            for (j, &off) in plan.offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (l, &g) in gathered.iter().enumerate() {
                    acc += matrix[(j, l)] * g;
                }
                self.amps[base + off] = acc;
            }
        }
        Ok(())
    }

    /// Apply a validated unitary. Without `oracle_mode` all targets must
    /// share one site; cross-site unitaries are a locality violation.
    pub fn apply_unitary(&mut self, spec: &UnitarySpec, oracle_mode: bool) -> Result<()> {
        self.check_locality(spec.targets(), oracle_mode)?;
        self.apply_matrix(spec.matrix(), spec.targets())?;
        self.assert_normalized();
        Ok(())
    }

    /// Born probabilities (up, down) of a z measurement of `q`.
    pub fn prob_z(&self, q: QubitId) -> Result<(f64, f64)> {
        let shift = self.shift(self.position(q)?);
        let mut p_down = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            if (i >> shift) & 1 == 1 {
                p_down += a.norm_sqr();
            }
        }
        Ok(((1.0 - p_down).max(0.0), p_down))
    }

    /// Joint probability of a simultaneous z-basis assignment.
    pub fn joint_probability(&self, assignment: &[(QubitId, u8)]) -> Result<f64> {
        let mut mask = 0usize;
        let mut want = 0usize;
        for &(q, bit) in assignment {
            let shift = self.shift(self.position(q)?);
            mask |= 1 << shift;
            if bit != 0 {
                want |= 1 << shift;
            }
        }
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Probabilities |⟨colᵢ ⊗ I|ψ⟩|² of projecting the target subset onto
    /// each column of an orthonormal `columns` matrix.
    pub fn projection_probabilities(
        &self,
        targets: &[QubitId],
        columns: &Array2<Complex64>,
    ) -> Result<Vec<f64>> {
        let plan = self.plan(targets)?;
        let dim = plan.offsets.len();
        if columns.dim() != (dim, dim) {
            return Err(QsimError::DimensionMismatch {
                expected: dim,
                got: columns.dim().0,
            });
        }
        let mut probs = vec![0.0; dim];
        let mut gathered = vec![ZERO; dim];
        for c in 0..plan.complement_count() {
            let base = plan.spread(c);
            for (j, &off) in plan.offsets.iter().enumerate() {
                gathered[j] = self.amps[base + off];
            }
            for (i, p) in probs.iter_mut().enumerate() {
                let mut amp = ZERO;
                for (j, &g) in gathered.iter().enumerate() {
                    amp += columns[(j, i)].conj() * g;
                }
                *p += amp.norm_sqr();
            }
        }
        Ok(probs)
    }

    /// Project the target subset onto the joint state `phi`, renormalize,
    /// and either drop the targets or leave them collapsed in place.
    ///
    /// Returns the Born probability of the branch. `oracle_mode` lifts the
    /// one-site restriction, exactly as for [`Register::apply_unitary`].
    pub fn project_onto_state(
        &mut self,
        targets: &[QubitId],
        phi: &[Complex64],
        disposal: Disposal,
        oracle_mode: bool,
    ) -> Result<f64> {
        self.check_locality(targets, oracle_mode)?;
        let plan = self.plan(targets)?;
        let dim = plan.offsets.len();
        if phi.len() != dim {
            return Err(QsimError::DimensionMismatch {
                expected: dim,
                got: phi.len(),
            });
        }
        let comp = plan.complement_count();
        let mut reduced = vec![ZERO; comp];
        let mut prob = 0.0;
        for (c, r) in reduced.iter_mut().enumerate() {
            let base = plan.spread(c);
            let mut amp = ZERO;
            for (j, &off) in plan.offsets.iter().enumerate() {
                amp += phi[j].conj() * self.amps[base + off];
            }
            prob += amp.norm_sqr();
            *r = amp;
        }
        if prob < PROB_FLOOR {
            return Err(QsimError::ImpossibleOutcome { probability: prob });
        }
        let scale = Complex64::new(1.0 / prob.sqrt(), 0.0);
        match disposal {
            Disposal::Consume => {
                for r in &mut reduced {
                    *r *= scale;
                }
                self.amps = reduced;
                let positions: Vec<usize> = targets
                    .iter()
                    .map(|&q| self.position(q).expect("validated above"))
                    .collect();
                let mut keep: Vec<QubitId> = Vec::with_capacity(self.order.len() - targets.len());
                for (p, &q) in self.order.iter().enumerate() {
                    if !positions.contains(&p) {
                        keep.push(q);
                    }
                }
                self.order = keep;
            }
            Disposal::Retain => {
                for (c, r) in reduced.iter().enumerate() {
                    let base = plan.spread(c);
                    for (j, &off) in plan.offsets.iter().enumerate() {
                        self.amps[base + off] = phi[j] * r * scale;
                    }
                }
            }
        }
        self.assert_normalized();
        Ok(prob)
    }

    /// Project the target subset onto the span of the `group` columns of
    /// an orthonormal basis, keeping the qubits live (von Neumann
    /// semantics). Returns the branch probability.
    pub fn project_onto_span(
        &mut self,
        targets: &[QubitId],
        columns: &Array2<Complex64>,
        group: &[usize],
        oracle_mode: bool,
    ) -> Result<f64> {
        self.check_locality(targets, oracle_mode)?;
        let plan = self.plan(targets)?;
        let dim = plan.offsets.len();
        if columns.dim() != (dim, dim) {
            return Err(QsimError::DimensionMismatch {
                expected: dim,
                got: columns.dim().0,
            });
        }
        let mut gathered = vec![ZERO; dim];
        let mut projected = vec![ZERO; dim];
        let mut prob = 0.0;
        let mut new_amps = self.amps.clone();
        for c in 0..plan.complement_count() {
            let base = plan.spread(c);
            for (j, &off) in plan.offsets.iter().enumerate() {
                gathered[j] = self.amps[base + off];
            }
            projected.fill(ZERO);
            for &i in group {
                let mut coeff = ZERO;
                for (j, &g) in gathered.iter().enumerate() {
                    coeff += columns[(j, i)].conj() * g;
                }
                prob += coeff.norm_sqr();
                for (j, p) in projected.iter_mut().enumerate() {
                    *p += columns[(j, i)] * coeff;
                }
            }
            for (j, &off) in plan.offsets.iter().enumerate() {
                new_amps[base + off] = projected[j];
            }
        }
        if prob < PROB_FLOOR {
            return Err(QsimError::ImpossibleOutcome { probability: prob });
        }
        let scale = Complex64::new(1.0 / prob.sqrt(), 0.0);
        for a in &mut new_amps {
            *a *= scale;
        }
        self.amps = new_amps;
        self.assert_normalized();
        Ok(prob)
    }

    /// Project `q` onto the given z-basis outcome. Returns the branch
    /// probability; impossible outcomes are an error.
    pub fn project_z(&mut self, q: QubitId, bit: u8, disposal: Disposal) -> Result<f64> {
        let phi = if bit == 0 {
            [linalg::ONE, ZERO]
        } else {
            [ZERO, linalg::ONE]
        };
        self.project_onto_state(&[q], &phi, disposal, false)
    }

    /// Measure `q` in the z basis with an explicit outcome driver.
    pub fn measure_z_with(
        &mut self,
        q: QubitId,
        driver: &mut OutcomeDriver,
        disposal: Disposal,
    ) -> Result<u8> {
        let (p0, p1) = self.prob_z(q)?;
        let bit = driver.pick(&[p0, p1])? as u8;
        self.project_z(q, bit, disposal)?;
        Ok(bit)
    }

    /// Measure `q` in the z basis: sample the outcome by the Born rule,
    /// project, renormalize and remove the qubit from the register.
    pub fn measure_z(&mut self, q: QubitId, rng: &mut dyn RngCore) -> Result<u8> {
        self.measure_z_with(q, &mut OutcomeDriver::sampled(rng), Disposal::Consume)
    }

    /// Projective measurement onto groups of columns of an orthonormal
    /// eigenbasis (degenerate outcomes allowed). The qubits stay live and
    /// the register holds the projected, renormalized state.
    pub fn measure_eigengroups(
        &mut self,
        targets: &[QubitId],
        columns: &Array2<Complex64>,
        groups: &[Vec<usize>],
        driver: &mut OutcomeDriver,
        oracle_mode: bool,
    ) -> Result<usize> {
        self.check_locality(targets, oracle_mode)?;
        let column_probs = self.projection_probabilities(targets, columns)?;
        let group_probs: Vec<f64> = groups
            .iter()
            .map(|g| g.iter().map(|&i| column_probs[i]).sum())
            .collect();
        let chosen = driver.pick(&group_probs)?;
        self.project_onto_span(targets, columns, &groups[chosen], oracle_mode)?;
        Ok(chosen)
    }

    /// Amplitudes re-indexed so that `order` gives the bit significance
    /// (first entry most significant). `order` must be a permutation of
    /// the live qubits.
    pub fn permuted_amplitudes(&self, order: &[QubitId]) -> Result<Vec<Complex64>> {
        if order.len() != self.order.len() {
            return Err(QsimError::DimensionMismatch {
                expected: self.order.len(),
                got: order.len(),
            });
        }
        let n = self.order.len();
        let mut shift_map = Vec::with_capacity(n);
        for (new_pos, &q) in order.iter().enumerate() {
            if order[..new_pos].contains(&q) {
                return Err(QsimError::DuplicateTarget(q));
            }
            let old_shift = self.shift(self.position(q)?);
            let new_shift = n - 1 - new_pos;
            shift_map.push((old_shift, new_shift));
        }
        let mut out = vec![ZERO; self.amps.len()];
        for (i, &a) in self.amps.iter().enumerate() {
            let mut j = 0usize;
            for &(old, new) in &shift_map {
                j |= ((i >> old) & 1) << new;
            }
            out[j] = a;
        }
        Ok(out)
    }

    /// Reduced density matrix of the given qubits (in the given order),
    /// tracing out every other live qubit.
    pub fn reduced_density(&self, qubits: &[QubitId]) -> Result<Array2<Complex64>> {
        let plan = self.plan(qubits)?;
        let dim = plan.offsets.len();
        let mut rho = Array2::from_elem((dim, dim), ZERO);
        let mut v = vec![ZERO; dim];
        for c in 0..plan.complement_count() {
            let base = plan.spread(c);
            for (j, &off) in plan.offsets.iter().enumerate() {
                v[j] = self.amps[base + off];
            }
            for i in 0..dim {
                for j in 0..dim {
                    rho[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        Ok(rho)
    }

    /// |⟨reference|ψ⟩|² against the register's own qubit order.
    pub fn fidelity(&self, reference: &[Complex64]) -> Result<f64> {
        if reference.len() != self.amps.len() {
            return Err(QsimError::DimensionMismatch {
                expected: self.amps.len(),
                got: reference.len(),
            });
        }
        Ok(linalg::inner(reference, &self.amps).norm_sqr())
    }

    /// |⟨reference|ψ⟩|² with the register re-indexed to the given qubit
    /// order first.
    pub fn fidelity_in_order(&self, order: &[QubitId], reference: &[Complex64]) -> Result<f64> {
        let amps = self.permuted_amplitudes(order)?;
        if reference.len() != amps.len() {
            return Err(QsimError::DimensionMismatch {
                expected: amps.len(),
                got: reference.len(),
            });
        }
        Ok(linalg::inner(reference, &amps).norm_sqr())
    }
}
