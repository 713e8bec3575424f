//! Small dense complex-matrix helpers shared across the crate.
//!
//! Everything here operates on `ndarray::Array2<Complex64>` and plain
//! amplitude slices. Dimensions stay tiny (at most 2^16), so no effort is
//! made to be clever about performance.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Identity matrix of the given dimension.
pub fn identity(dim: usize) -> Array2<Complex64> {
    Array2::eye(dim)
}

/// Conjugate transpose.
pub fn dagger(m: &Array2<Complex64>) -> Array2<Complex64> {
    m.t().mapv(|z| z.conj())
}

/// Kronecker product with `a` acting on the more significant qubits.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::from_elem((ar * br, ac * bc), ZERO);
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Largest absolute entry of `U U† − I`; zero for an exact unitary.
pub fn unitarity_deviation(m: &Array2<Complex64>) -> f64 {
    let (r, c) = m.dim();
    if r != c {
        return f64::INFINITY;
    }
    let prod = m.dot(&dagger(m));
    let mut worst = 0.0_f64;
    for i in 0..r {
        for j in 0..c {
            let expect = if i == j { ONE } else { ZERO };
            worst = worst.max((prod[(i, j)] - expect).norm());
        }
    }
    worst
}

pub fn pauli_x() -> Array2<Complex64> {
    ndarray::array![[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_y() -> Array2<Complex64> {
    ndarray::array![
        [ZERO, Complex64::new(0.0, -1.0)],
        [Complex64::new(0.0, 1.0), ZERO]
    ]
}

pub fn pauli_z() -> Array2<Complex64> {
    ndarray::array![[ONE, ZERO], [ZERO, -ONE]]
}

pub fn hadamard() -> Array2<Complex64> {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ndarray::array![[h, h], [h, -h]]
}

/// Squared Euclidean norm of an amplitude vector.
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Inner product ⟨a|b⟩ = Σᵢ aᵢ* bᵢ.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Normalized Haar-ish random state vector (Gaussian entries, normalized).
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = norm_sqr(&v).sqrt();
    for z in &mut v {
        *z /= norm;
    }
    v
}

/// Snap a numerically drifted unitary back onto the unitary group by
/// re-orthonormalizing its columns (two-pass modified Gram-Schmidt).
///
/// Products like U† P U are exactly unitary in exact arithmetic, but a
/// recursion that feeds its own output back in compounds rounding error
/// exponentially; applying this once per step keeps the drift at the
/// round-off floor.
pub fn orthonormalize_columns(m: &Array2<Complex64>) -> Array2<Complex64> {
    let (rows, cols) = m.dim();
    debug_assert_eq!(rows, cols);
    let mut out = m.clone();
    for j in 0..cols {
        for _ in 0..2 {
            for prev in 0..j {
                let mut overlap = ZERO;
                for r in 0..rows {
                    overlap += out[(r, prev)].conj() * out[(r, j)];
                }
                for r in 0..rows {
                    let correction = overlap * out[(r, prev)];
                    out[(r, j)] -= correction;
                }
            }
        }
        let norm: f64 = (0..rows)
            .map(|r| out[(r, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        for r in 0..rows {
            out[(r, j)] /= norm;
        }
    }
    out
}

/// Random unitary from Gram-Schmidt on a complex Gaussian matrix.
///
/// Good to ~1e-14 unitarity at the dimensions used here.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array2<Complex64> {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        // two rounds of modified Gram-Schmidt for numerical orthogonality
        for _ in 0..2 {
            for u in &cols {
                let c = inner(u, &v);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
        }
        let norm = norm_sqr(&v).sqrt();
        if norm < 1e-6 {
            continue; // essentially dependent draw; retry
        }
        for z in &mut v {
            *z /= norm;
        }
        cols.push(v);
    }
    let mut m = Array2::from_elem((dim, dim), ZERO);
    for (j, col) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            m[(i, j)] = *z;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kron_places_first_factor_on_high_bits() {
        let m = kron(&pauli_x(), &identity(2));
        // X ⊗ I maps |00⟩ -> |10⟩, so column 0 has its 1 at row 2.
        assert_eq!(m[(2, 0)], ONE);
        assert_eq!(m[(0, 0)], ZERO);
    }

    #[test]
    fn paulis_are_unitary() {
        for m in [pauli_x(), pauli_y(), pauli_z(), hadamard()] {
            assert!(unitarity_deviation(&m) < 1e-15);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 4, 8, 16] {
            let u = random_unitary(dim, &mut rng);
            assert!(unitarity_deviation(&u) < 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn random_state_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_state(8, &mut rng);
        assert!((norm_sqr(&v) - 1.0).abs() < 1e-12);
    }
}
