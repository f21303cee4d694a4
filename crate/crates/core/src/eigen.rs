//! Hermitian eigendecomposition with a fixed ordering and phase convention.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{CMatrix, OperatorMatrix};

const MAX_SWEEPS: usize = 10_000;

/// Eigenvalues in ascending order and the unitary matrix whose columns are
/// the corresponding eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `max(E) - min(E)`.
    pub fn range(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
    }

    /// Threshold below which two levels are treated as degenerate.
    pub fn degeneracy_eps(&self) -> f64 {
        1e-10 * self.range().max(1.0)
    }

    /// `U^dagger M U`.
    pub fn to_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        let u = &self.eigenvectors;
        u.adjoint() * m * u
    }

    /// `U M U^dagger`.
    pub fn from_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        let u = &self.eigenvectors;
        u * m * u.adjoint()
    }

    /// `U diag(E) U^dagger`.
    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&e| Complex64::new(e, 0.0)),
        ));
        self.from_eigenbasis(&d)
    }
}

/// Eigendecomposition of a Hermitian operator.
///
/// Real-symmetric input takes the real solver path. Columns inside a
/// degenerate cluster are ordered by the index of their largest-magnitude
/// component, and every column is rotated so that component is real
/// positive.
pub fn eigh(op: &OperatorMatrix) -> Result<Spectrum> {
    op.require_hermitian()?;
    let n = op.dim();
    let (values, vectors) = if op.is_real() {
        let m: DMatrix<f64> = op.entries().map(|z| z.re);
        let eig =
            SymmetricEigen::try_new(m, f64::EPSILON, MAX_SWEEPS).ok_or(Error::NoConvergence {
                max_iter: MAX_SWEEPS,
            })?;
        (
            eig.eigenvalues.iter().copied().collect::<Vec<_>>(),
            eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
        )
    } else {
        let eig = SymmetricEigen::try_new(op.entries().clone(), f64::EPSILON, MAX_SWEEPS).ok_or(
            Error::NoConvergence {
                max_iter: MAX_SWEEPS,
            },
        )?;
        (
            eig.eigenvalues.iter().copied().collect::<Vec<_>>(),
            eig.eigenvectors,
        )
    };

    let pivots: Vec<usize> = (0..n).map(|j| pivot_index(&vectors, j)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .total_cmp(&values[b])
            .then(pivots[a].cmp(&pivots[b]))
    });

    let range = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps = 1e-10 * range.max(1.0);

    // reorder degenerate clusters by pivot index
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] - values[order[end - 1]] < eps {
            end += 1;
        }
        order[start..end].sort_by_key(|&j| (pivots[j], j));
        start = end;
    }

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (col, &j) in order.iter().enumerate() {
        eigenvalues.push(values[j]);
        let pivot = vectors[(pivots[j], j)];
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            eigenvectors[(i, col)] = vectors[(i, j)] * phase;
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Lowest index of the largest-magnitude component of column `j`.
fn pivot_index(m: &CMatrix, j: usize) -> usize {
    let mut best = 0;
    let mut best_abs = -1.0;
    for i in 0..m.nrows() {
        let a = m[(i, j)].norm();
        // slack so that rounding noise cannot flip equal-magnitude ties
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use crate::operator::{build_hamiltonian, max_abs};
    use crate::polynomial::PolynomialObservable;
    use proptest::prelude::*;

    fn check_invariants(h: &OperatorMatrix, s: &Spectrum) {
        let n = s.dim();
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let u = &s.eigenvectors;
        let unit = u.adjoint() * u - CMatrix::identity(n, n);
        assert!(max_abs(&unit) <= 1e-10);
        let mut d = s.to_eigenbasis(h.entries());
        for i in 0..n {
            d[(i, i)] -= s.eigenvalues[i];
        }
        let emax = s.eigenvalues.iter().fold(1.0f64, |a, e| a.max(e.abs()));
        assert!(max_abs(&d) <= 1e-10 * emax);
        let back = s.reconstruct() - h.entries();
        assert!(max_abs(&back) <= 1e-10 * emax);
    }

    #[test]
    fn harmonic_spectrum_exact() {
        let basis = BasisSpec::unit(40, 2);
        let h = build_hamiltonian(&basis, &PolynomialObservable::harmonic(1.0, 1.0)).unwrap();
        let s = eigh(&h).unwrap();
        for (n, e) in s.eigenvalues.iter().enumerate() {
            assert!((e - (n as f64 + 0.5)).abs() < 1e-12, "level {n}: {e}");
        }
        check_invariants(&h, &s);
    }

    #[test]
    fn diagonal_permutation() {
        let h = OperatorMatrix::diagonal(&[3.0, 1.0, 2.0]);
        let s = eigh(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
        let expect = [1usize, 2, 0];
        for (col, &row) in expect.iter().enumerate() {
            assert_eq!(s.eigenvectors[(row, col)], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn degenerate_tie_break_and_phase() {
        let h = OperatorMatrix::diagonal(&[2.0, 1.0, 2.0, 1.0]);
        let s = eigh(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0, 2.0, 2.0]);
        let pivots: Vec<usize> = (0..4).map(|j| pivot_index(&s.eigenvectors, j)).collect();
        assert_eq!(pivots, vec![1, 3, 0, 2]);
        for (j, &p) in pivots.iter().enumerate() {
            let z = s.eigenvectors[(p, j)];
            assert!(z.re > 0.0 && z.im == 0.0);
        }
    }

    #[test]
    fn complex_hermitian() {
        let c = |re, im| Complex64::new(re, im);
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(2.0, 0.0),
                c(0.0, -1.0),
                c(0.5, 0.5),
                c(0.0, 1.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.5, -0.5),
                c(0.0, 0.0),
                c(-1.0, 0.0),
            ],
        );
        let h = OperatorMatrix::hermitian(m).unwrap();
        let s = eigh(&h).unwrap();
        check_invariants(&h, &s);
        for j in 0..3 {
            let p = pivot_index(&s.eigenvectors, j);
            assert!(s.eigenvectors[(p, j)].im.abs() < 1e-15);
            assert!(s.eigenvectors[(p, j)].re > 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m =
            CMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0].map(|x| Complex64::new(x, 0.0)));
        assert!(matches!(
            eigh(&OperatorMatrix::new(m)),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn anharmonic_levels_converge_in_basis_size() {
        let v = PolynomialObservable::new(vec![0.0, 0.0, 0.5, 0.1, 0.01]);
        let lo = eigh(&build_hamiltonian(&BasisSpec::unit(60, 4), &v).unwrap()).unwrap();
        let hi = eigh(&build_hamiltonian(&BasisSpec::unit(80, 4), &v).unwrap()).unwrap();
        for k in 0..10 {
            assert!(
                (lo.eigenvalues[k] - hi.eigenvalues[k]).abs() < 1e-9,
                "level {k}: {} vs {}",
                lo.eigenvalues[k],
                hi.eigenvalues[k]
            );
        }
    }

    #[test]
    fn deterministic() {
        let v = PolynomialObservable::new(vec![0.0, 0.0, 0.5, 0.1, 0.01]);
        let h = build_hamiltonian(&BasisSpec::unit(30, 4), &v).unwrap();
        assert_eq!(eigh(&h).unwrap(), eigh(&h).unwrap());
    }

    proptest! {
        #[test]
        fn random_hermitian_round_trip(n in 1usize..8, seed in prop::collection::vec(-1.0f64..1.0, 128)) {
            let mut m = CMatrix::zeros(n, n);
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    let z = if i == j {
                        Complex64::new(seed[k], 0.0)
                    } else {
                        Complex64::new(seed[k], seed[k + 1])
                    };
                    k += 2;
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                }
            }
            let h = OperatorMatrix::hermitian(m).unwrap();
            let s = eigh(&h).unwrap();
            check_invariants(&h, &s);
        }
    }
}
