//! Nonlocal variables: an eigenbasis partitioned across parties, plus the
//! eigenvalue assigned to each eigenstate.
//!
//! The eigenbasis is stored as a unitary whose columns are the eigenstates,
//! written in the variable's tensor order: the partition lists each site's
//! qubits in sequence and the first qubit is the most significant bit (the
//! same convention as [`crate::qsim`]). Degenerate eigenvalues are allowed.
//!
//! # Text format
//!
//! Variables serialize to a line-oriented document (`#` starts a comment,
//! blank lines are ignored):
//!
//! ```text
//! nonlocal-variable v1
//! partition A 1 B 1
//! eigenvalues 1 2 3 4
//! matrix
//! 1 0  0 0  0 0  0 0
//! 0 0  1 0  0 0  0 0
//! 0 0  0 0  0.7071067811865476 0  0.7071067811865476 0
//! 0 0  0 0  0.7071067811865476 0  -0.7071067811865476 0
//! ```
//!
//! `partition` alternates site names and qubit counts; `eigenvalues` lists
//! one real per eigenbasis column; `matrix` is followed by one line per row
//! containing `(real, imaginary)` pairs in row-major order. Parsing
//! validates unitarity to 1e-10 and reports the offending deviation.

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, ZERO};
use crate::qsim::{Site, TOLERANCE};

#[derive(Debug, Error)]
pub enum VariableError {
    #[error("partition is empty")]
    EmptyPartition,
    #[error("partition repeats site {0}")]
    RepeatedSite(Site),
    #[error("partition entry for site {0} has zero qubits")]
    EmptySiteBlock(Site),
    #[error("eigenbasis must be {expected}×{expected}, got {rows}×{cols}")]
    BadShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error(
        "eigenbasis is not unitary: deviation {deviation:.3e} exceeds tolerance {tolerance:.1e}"
    )]
    NotUnitary { deviation: f64, tolerance: f64 },
    #[error("expected {expected} eigenvalues, got {got}")]
    EigenvalueCount { expected: usize, got: usize },
    #[error("eigenvalue {index} is not finite")]
    NonFiniteEigenvalue { index: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, VariableError>;

/// An observable of a composite system with parts at separate sites.
#[derive(Debug, Clone)]
pub struct NonlocalVariable {
    partition: Vec<(Site, usize)>,
    eigenbasis: Array2<Complex64>,
    eigenvalues: Vec<f64>,
}

impl NonlocalVariable {
    pub fn new(
        partition: Vec<(Site, usize)>,
        eigenbasis: Array2<Complex64>,
        eigenvalues: Vec<f64>,
    ) -> Result<Self> {
        if partition.is_empty() {
            return Err(VariableError::EmptyPartition);
        }
        for (i, &(site, count)) in partition.iter().enumerate() {
            if count == 0 {
                return Err(VariableError::EmptySiteBlock(site));
            }
            if partition[..i].iter().any(|&(s, _)| s == site) {
                return Err(VariableError::RepeatedSite(site));
            }
        }
        let total: usize = partition.iter().map(|&(_, k)| k).sum();
        let dim = 1usize << total;
        let (rows, cols) = eigenbasis.dim();
        if (rows, cols) != (dim, dim) {
            return Err(VariableError::BadShape {
                expected: dim,
                rows,
                cols,
            });
        }
        let deviation = linalg::unitarity_deviation(&eigenbasis);
        if deviation > TOLERANCE {
            return Err(VariableError::NotUnitary {
                deviation,
                tolerance: TOLERANCE,
            });
        }
        if eigenvalues.len() != dim {
            return Err(VariableError::EigenvalueCount {
                expected: dim,
                got: eigenvalues.len(),
            });
        }
        if let Some(index) = eigenvalues.iter().position(|v| !v.is_finite()) {
            return Err(VariableError::NonFiniteEigenvalue { index });
        }
        Ok(NonlocalVariable {
            partition,
            eigenbasis,
            eigenvalues,
        })
    }

    pub fn partition(&self) -> &[(Site, usize)] {
        &self.partition
    }

    pub fn total_qubits(&self) -> usize {
        self.partition.iter().map(|&(_, k)| k).sum()
    }

    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }

    /// The flat list of sites, one entry per qubit in tensor order.
    pub fn site_layout(&self) -> Vec<Site> {
        self.partition
            .iter()
            .flat_map(|&(site, k)| std::iter::repeat_n(site, k))
            .collect()
    }

    pub fn eigenbasis(&self) -> &Array2<Complex64> {
        &self.eigenbasis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, column: usize) -> f64 {
        self.eigenvalues[column]
    }

    /// Eigenstate `column` as an amplitude vector.
    pub fn eigenstate(&self, column: usize) -> Vec<Complex64> {
        (0..self.dim())
            .map(|r| self.eigenbasis[(r, column)])
            .collect()
    }

    /// The unitary mapping eigenstates to z-basis product states
    /// (conjugate transpose of the eigenbasis).
    pub fn diagonalizer(&self) -> Array2<Complex64> {
        linalg::dagger(&self.eigenbasis)
    }

    /// Columns grouped by exactly-equal eigenvalue, in order of first
    /// appearance. Degenerate variables have groups of more than one.
    pub fn eigenvalue_groups(&self) -> Vec<(f64, Vec<usize>)> {
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (i, &v) in self.eigenvalues.iter().enumerate() {
            match groups.iter_mut().find(|(g, _)| *g == v) {
                Some((_, members)) => members.push(i),
                None => groups.push((v, vec![i])),
            }
        }
        groups
    }

    /// The four product eigenstates |↑z↑z⟩, |↑z↓z⟩, |↓z↑x⟩, |↓z↓x⟩ with
    /// eigenvalues 1..4: a nonlocal variable with product eigenstates whose
    /// ideal von Neumann measurement would nevertheless allow signaling.
    pub fn eq1() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let one = linalg::ONE;
        let basis = ndarray::array![
            [one, ZERO, ZERO, ZERO],
            [ZERO, one, ZERO, ZERO],
            [ZERO, ZERO, h, h],
            [ZERO, ZERO, h, -h],
        ];
        NonlocalVariable::new(
            vec![(Site::A, 1), (Site::B, 1)],
            basis,
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .expect("built-in variable is valid")
    }

    /// The Bell operator: eigenbasis Ψ−, Ψ+, Φ−, Φ+ with eigenvalues 1..4.
    pub fn bell_basis() -> Self {
        let mut basis = Array2::from_elem((4, 4), ZERO);
        for o in crate::teleport::BellOutcome::ALL {
            let v = o.state_vector();
            for (row, &z) in v.iter().enumerate() {
                basis[(row, o.digit())] = z;
            }
        }
        NonlocalVariable::new(
            vec![(Site::A, 1), (Site::B, 1)],
            basis,
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .expect("built-in variable is valid")
    }

    /// Three-party variable whose eigenstates are the eight GHZ-type
    /// states (|b₁b₂b₃⟩ ± |b̄₁b̄₂b̄₃⟩)/√2, eigenvalues 1..8.
    pub fn ghz_basis() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut basis = Array2::from_elem((8, 8), ZERO);
        for b in 0..4usize {
            basis[(b, 2 * b)] = h;
            basis[(7 - b, 2 * b)] = h;
            basis[(b, 2 * b + 1)] = h;
            basis[(7 - b, 2 * b + 1)] = -h;
        }
        NonlocalVariable::new(
            vec![(Site::A, 1), (Site::B, 1), (Site::C, 1)],
            basis,
            (1..=8).map(|v| v as f64).collect(),
        )
        .expect("built-in variable is valid")
    }

    /// z-basis product eigenstates over the given partition (identity
    /// eigenbasis), eigenvalues 1..2^n.
    pub fn computational(partition: Vec<(Site, usize)>) -> Result<Self> {
        let total: usize = partition.iter().map(|&(_, k)| k).sum();
        let dim = 1usize << total;
        NonlocalVariable::new(
            partition,
            linalg::identity(dim),
            (1..=dim).map(|v| v as f64).collect(),
        )
    }

    /// Random-unitary eigenbasis over the given partition, eigenvalues
    /// 1..2^n.
    pub fn random<R: rand::Rng + ?Sized>(
        partition: Vec<(Site, usize)>,
        rng: &mut R,
    ) -> Result<Self> {
        let total: usize = partition.iter().map(|&(_, k)| k).sum();
        let dim = 1usize << total;
        NonlocalVariable::new(
            partition,
            linalg::random_unitary(dim, rng),
            (1..=dim).map(|v| v as f64).collect(),
        )
    }

    /// Look up a variable shipped with the binary.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "eq1" => Some(Self::eq1()),
            "bell-basis" => Some(Self::bell_basis()),
            "ghz-basis" => Some(Self::ghz_basis()),
            _ => None,
        }
    }

    /// Serialize to the documented text format.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("nonlocal-variable v1\n");
        out.push_str("partition");
        for &(site, count) in &self.partition {
            write!(out, " {site} {count}").unwrap();
        }
        out.push('\n');
        out.push_str("eigenvalues");
        for v in &self.eigenvalues {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
        out.push_str("matrix\n");
        let dim = self.dim();
        for r in 0..dim {
            for c in 0..dim {
                if c > 0 {
                    out.push(' ');
                }
                let z = self.eigenbasis[(r, c)];
                write!(out, "{} {}", z.re, z.im).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parse the documented text format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let mut next = |what: &str| {
            lines.next().ok_or_else(|| VariableError::Parse {
                line: 0,
                message: format!("unexpected end of input, expected {what}"),
            })
        };

        let (line_no, header) = next("header")?;
        if header != "nonlocal-variable v1" {
            return Err(VariableError::Parse {
                line: line_no,
                message: format!("expected `nonlocal-variable v1`, got `{header}`"),
            });
        }

        let (line_no, partition_line) = next("partition")?;
        let mut tokens = partition_line.split_whitespace();
        if tokens.next() != Some("partition") {
            return Err(VariableError::Parse {
                line: line_no,
                message: "expected `partition` line".into(),
            });
        }
        let mut partition = Vec::new();
        let rest: Vec<&str> = tokens.collect();
        if rest.is_empty() || !rest.len().is_multiple_of(2) {
            return Err(VariableError::Parse {
                line: line_no,
                message: "partition needs alternating site names and qubit counts".into(),
            });
        }
        for pair in rest.chunks(2) {
            let site: Site = pair[0].parse().map_err(|message| VariableError::Parse {
                line: line_no,
                message,
            })?;
            let count: usize = pair[1].parse().map_err(|_| VariableError::Parse {
                line: line_no,
                message: format!("bad qubit count `{}`", pair[1]),
            })?;
            partition.push((site, count));
        }
        let total: usize = partition.iter().map(|&(_, k)| k).sum();
        let dim = 1usize << total;

        let (line_no, eig_line) = next("eigenvalues")?;
        let mut tokens = eig_line.split_whitespace();
        if tokens.next() != Some("eigenvalues") {
            return Err(VariableError::Parse {
                line: line_no,
                message: "expected `eigenvalues` line".into(),
            });
        }
        let eigenvalues: Vec<f64> = tokens
            .map(|t| {
                t.parse().map_err(|_| VariableError::Parse {
                    line: line_no,
                    message: format!("bad eigenvalue `{t}`"),
                })
            })
            .collect::<Result<_>>()?;

        let (line_no, matrix_line) = next("matrix")?;
        if matrix_line != "matrix" {
            return Err(VariableError::Parse {
                line: line_no,
                message: "expected `matrix` line".into(),
            });
        }
        let mut basis = Array2::from_elem((dim, dim), ZERO);
        for r in 0..dim {
            let (line_no, row) = next("matrix row")?;
            let values: Vec<f64> = row
                .split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| VariableError::Parse {
                        line: line_no,
                        message: format!("bad matrix entry `{t}`"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != 2 * dim {
                return Err(VariableError::Parse {
                    line: line_no,
                    message: format!(
                        "matrix row has {} numbers, expected {} (re/im pairs)",
                        values.len(),
                        2 * dim
                    ),
                });
            }
            for c in 0..dim {
                basis[(r, c)] = Complex64::new(values[2 * c], values[2 * c + 1]);
            }
        }
        if let Some((line_no, extra)) = lines.next() {
            return Err(VariableError::Parse {
                line: line_no,
                message: format!("unexpected trailing content `{extra}`"),
            });
        }
        NonlocalVariable::new(partition, basis, eigenvalues)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{unitarity_deviation, ONE};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SQ2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn eq1_columns_match_the_product_eigenstates() {
        let v = NonlocalVariable::eq1();
        // column 0 is |↑z⟩⊗|↑z⟩
        assert!((v.eigenbasis()[(0, 0)] - ONE).norm() < 1e-15);
        // column 2 is |↓z⟩⊗|↑x⟩ = (|10⟩ + |11⟩)/√2
        assert!((v.eigenbasis()[(2, 2)].re - SQ2).abs() < 1e-15);
        assert!((v.eigenbasis()[(3, 2)].re - SQ2).abs() < 1e-15);
        assert!(v.eigenbasis()[(0, 2)].norm() < 1e-15);
        assert!(unitarity_deviation(v.eigenbasis()) < 1e-12);
        assert_eq!(v.eigenvalues(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn ghz_basis_is_unitary_and_entangled() {
        let v = NonlocalVariable::ghz_basis();
        assert!(unitarity_deviation(v.eigenbasis()) < 1e-12);
        assert_eq!(v.dim(), 8);
        // first column is (|000⟩ + |111⟩)/√2
        let col = v.eigenstate(0);
        assert!((col[0].re - SQ2).abs() < 1e-15);
        assert!((col[7].re - SQ2).abs() < 1e-15);
    }

    #[test]
    fn non_unitary_basis_is_rejected_with_deviation() {
        let mut basis = linalg::identity(4);
        basis[(0, 0)] = Complex64::new(1.5, 0.0);
        let err = NonlocalVariable::new(
            vec![(Site::A, 1), (Site::B, 1)],
            basis,
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap_err();
        match err {
            VariableError::NotUnitary {
                deviation,
                tolerance,
            } => {
                assert!(deviation > tolerance);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn eigenvalue_groups_collect_degeneracies() {
        let v = NonlocalVariable::new(
            vec![(Site::A, 1), (Site::B, 1)],
            linalg::identity(4),
            vec![1.0, 2.0, 1.0, 3.0],
        )
        .unwrap();
        let groups = v.eigenvalue_groups();
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0], (1.0, vec![0, 2]));
    }

    #[test]
    fn text_round_trip_preserves_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let v = NonlocalVariable::random(vec![(Site::A, 1), (Site::B, 1)], &mut rng).unwrap();
        let text = v.to_text();
        let back = NonlocalVariable::from_text(&text).unwrap();
        assert_eq!(back.partition(), v.partition());
        assert_eq!(back.eigenvalues(), v.eigenvalues());
        for r in 0..v.dim() {
            for c in 0..v.dim() {
                assert!((back.eigenbasis()[(r, c)] - v.eigenbasis()[(r, c)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn parser_reports_non_unitary_matrices() {
        let text =
            "nonlocal-variable v1\npartition A 1\neigenvalues 1 2\nmatrix\n1 0 0 0\n0 0 0 0\n";
        assert!(matches!(
            NonlocalVariable::from_text(text),
            Err(VariableError::NotUnitary { .. })
        ));
    }

    #[test]
    fn parser_tolerates_comments_and_blank_lines() {
        let text = "# a comment\n\nnonlocal-variable v1\npartition A 1 # inline\neigenvalues 5 -2\nmatrix\n1 0 0 0\n0 0 1 0\n";
        let v = NonlocalVariable::from_text(text).unwrap();
        assert_eq!(v.eigenvalues(), &[5.0, -2.0]);
    }

    #[test]
    fn parser_rejects_malformed_documents() {
        for text in [
            "",
            "nonlocal-variable v2\npartition A 1\neigenvalues 1 2\nmatrix\n1 0 0 0\n0 0 1 0\n",
            "nonlocal-variable v1\npartition A\neigenvalues 1 2\nmatrix\n1 0 0 0\n0 0 1 0\n",
            "nonlocal-variable v1\npartition A 1\neigenvalues 1 2\nmatrix\n1 0\n0 0 1 0\n",
        ] {
            assert!(NonlocalVariable::from_text(text).is_err(), "text {text:?}");
        }
    }

    proptest! {
        #[test]
        fn random_variables_round_trip(seed in 0u64..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = NonlocalVariable::random(
                vec![(Site::A, 1), (Site::B, 1)], &mut rng).unwrap();
            let back = NonlocalVariable::from_text(&v.to_text()).unwrap();
            for r in 0..4 {
                for c in 0..4 {
                    prop_assert!((back.eigenbasis()[(r,c)] - v.eigenbasis()[(r,c)]).norm() < 1e-14);
                }
            }
        }
    }
}
