//! Dense operator matrices in the truncated Fock basis.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::polynomial::PolynomialObservable;

pub type CMatrix = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex square matrix plus a flag recording whether it is Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: CMatrix,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Wraps a matrix without checking symmetry.
    pub fn new(entries: CMatrix) -> Self {
        assert!(entries.is_square(), "operator matrix must be square");
        OperatorMatrix {
            entries,
            hermitian: false,
        }
    }

    /// Wraps a matrix and sets the Hermitian flag after checking it.
    pub fn hermitian(entries: CMatrix) -> Result<Self> {
        let asym = hermitian_asymmetry(&entries);
        let scale = max_abs(&entries);
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let mut op = OperatorMatrix::new(entries);
        op.hermitian = true;
        Ok(op)
    }

    /// Hermitian part `(M + M^dagger)/2`, flagged Hermitian.
    pub fn hermitian_part(entries: &CMatrix) -> Self {
        let h = (entries + entries.adjoint()) * Complex64::new(0.5, 0.0);
        OperatorMatrix {
            entries: h,
            hermitian: true,
        }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Self {
        OperatorMatrix::new(m.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        OperatorMatrix {
            entries: CMatrix::identity(dim, dim),
            hermitian: true,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        OperatorMatrix {
            entries: CMatrix::zeros(dim, dim),
            hermitian: true,
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        OperatorMatrix {
            entries: m,
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                asymmetry: hermitian_asymmetry(&self.entries),
            })
        }
    }

    /// Leading `size x size` block.
    pub fn truncate(&self, size: usize) -> Self {
        OperatorMatrix {
            entries: self.entries.view((0, 0), (size, size)).into_owned(),
            hermitian: self.hermitian,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        OperatorMatrix {
            entries: &self.entries * Complex64::new(s, 0.0),
            hermitian: self.hermitian,
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &OperatorMatrix, s: f64) -> Result<Self> {
        check_dims(self, other)?;
        Ok(OperatorMatrix {
            entries: &self.entries + &other.entries * Complex64::new(s, 0.0),
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    /// Max-norm distance to another operator.
    pub fn max_diff(&self, other: &OperatorMatrix) -> f64 {
        max_abs(&(&self.entries - &other.entries))
    }

    pub fn asymmetry(&self) -> f64 {
        hermitian_asymmetry(&self.entries)
    }

    /// True if every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_dims(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        })
    } else {
        Ok(())
    }
}

/// Position on the padded basis: `q_{n,n+1} = sqrt(hbar (n+1) / (2 m w_r))`.
fn padded_position(basis: &BasisSpec) -> CMatrix {
    let dim = basis.padded_size();
    let scale = basis.hbar / (2.0 * basis.mass * basis.ref_frequency);
    let mut q = CMatrix::zeros(dim, dim);
    for n in 0..dim - 1 {
        let x = (scale * (n + 1) as f64).sqrt();
        q[(n, n + 1)] = Complex64::new(x, 0.0);
        q[(n + 1, n)] = Complex64::new(x, 0.0);
    }
    q
}

/// Momentum on the padded basis: `p_{n+1,n} = i sqrt(m hbar w_r (n+1) / 2)`.
fn padded_momentum(basis: &BasisSpec) -> CMatrix {
    let dim = basis.padded_size();
    let scale = 0.5 * basis.mass * basis.hbar * basis.ref_frequency;
    let mut p = CMatrix::zeros(dim, dim);
    for n in 0..dim - 1 {
        let x = (scale * (n + 1) as f64).sqrt();
        p[(n + 1, n)] = Complex64::new(0.0, x);
        p[(n, n + 1)] = Complex64::new(0.0, -x);
    }
    p
}

/// Position operator, `(size + build_pad)` square.
pub fn build_position(basis: &BasisSpec) -> Result<OperatorMatrix> {
    basis.validate()?;
    Ok(OperatorMatrix {
        entries: padded_position(basis),
        hermitian: true,
    })
}

/// Momentum operator, `(size + build_pad)` square.
pub fn build_momentum(basis: &BasisSpec) -> Result<OperatorMatrix> {
    basis.validate()?;
    Ok(OperatorMatrix {
        entries: padded_momentum(basis),
        hermitian: true,
    })
}

fn horner(poly: &PolynomialObservable, q: &CMatrix) -> CMatrix {
    let dim = q.nrows();
    let coeffs = poly.coeffs();
    let deg = poly.degree();
    let mut acc = CMatrix::identity(dim, dim) * Complex64::new(poly.coeff(deg), 0.0);
    for k in (0..deg).rev() {
        acc = &acc * q;
        let c = coeffs[k];
        if c != 0.0 {
            for i in 0..dim {
                acc[(i, i)] += c;
            }
        }
    }
    acc
}

/// `poly(q)` built on the padded basis and truncated to `size`.
pub fn apply_polynomial(poly: &PolynomialObservable, basis: &BasisSpec) -> Result<OperatorMatrix> {
    basis.validate()?;
    basis.require_pad(poly.degree())?;
    let q = padded_position(basis);
    let full = horner(poly, &q);
    Ok(OperatorMatrix {
        entries: full.view((0, 0), (basis.size, basis.size)).into_owned(),
        hermitian: true,
    })
}

/// Momentum truncated to the retained block.
pub fn momentum(basis: &BasisSpec) -> Result<OperatorMatrix> {
    Ok(build_momentum(basis)?.truncate(basis.size))
}

/// Position truncated to the retained block.
pub fn position(basis: &BasisSpec) -> Result<OperatorMatrix> {
    Ok(build_position(basis)?.truncate(basis.size))
}

/// `p^2 / 2m + V(q)`, assembled on the padded basis then truncated.
pub fn build_hamiltonian(
    basis: &BasisSpec,
    potential: &PolynomialObservable,
) -> Result<OperatorMatrix> {
    basis.validate()?;
    basis.require_pad(potential.degree().max(2))?;
    let q = padded_position(basis);
    let p = padded_momentum(basis);
    let kinetic = (&p * &p) * Complex64::new(0.5 / basis.mass, 0.0);
    let full = kinetic + horner(potential, &q);
    let h = full.view((0, 0), (basis.size, basis.size)).into_owned();
    // p^2 and q^k are Hermitian up to rounding in the products; store the
    // exactly Hermitian part.
    Ok(OperatorMatrix::hermitian_part(&h))
}

/// `AB - BA`.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    check_dims(a, b)?;
    let ab = &a.entries * &b.entries;
    let ba = &b.entries * &a.entries;
    Ok(OperatorMatrix::new(ab - ba))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn position_ladder_elements() {
        let q = build_position(&BasisSpec::unit(3, 0)).unwrap();
        assert!((q.get(0, 1).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((q.get(1, 0).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((q.get(1, 2).re - 1.0).abs() < 1e-15);
        assert_eq!(q.get(0, 2), c(0.0, 0.0));
        for i in 0..3 {
            assert_eq!(q.get(i, i), c(0.0, 0.0));
        }
        assert_eq!(q.asymmetry(), 0.0);

        let heavy = BasisSpec::new(2, 0, 4.0, 1.0, 1.0).unwrap();
        let q = build_position(&heavy).unwrap();
        assert!((q.get(0, 1).re - (1.0f64 / 8.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn momentum_ladder_elements() {
        let p = build_momentum(&BasisSpec::unit(3, 0)).unwrap();
        assert!((p.get(1, 0) - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((p.get(0, 1) - c(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
        for i in 0..3 {
            assert_eq!(p.get(i, i), c(0.0, 0.0));
        }
        assert_eq!(p.asymmetry(), 0.0);
    }

    #[test]
    fn canonical_commutator_on_interior() {
        let basis = BasisSpec::new(12, 0, 1.7, 0.8, 0.9).unwrap();
        let q = position(&basis).unwrap();
        let p = momentum(&basis).unwrap();
        let qp = commutator(&q, &p).unwrap();
        let n = basis.size;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let want = if i == j {
                    c(0.0, basis.hbar)
                } else {
                    c(0.0, 0.0)
                };
                assert!((qp.get(i, j) - want).norm() < 1e-13, "({i},{j})");
            }
        }
        // the last diagonal element carries the truncation defect
        assert!((qp.get(n - 1, n - 1) - c(0.0, basis.hbar)).norm() > 1.0);
    }

    #[test]
    fn polynomial_degree_one_and_constant() {
        let basis = BasisSpec::unit(6, 2);
        let q = apply_polynomial(&PolynomialObservable::new(vec![0.0, 1.0]), &basis).unwrap();
        assert_eq!(q, position(&basis).unwrap());
        let k = apply_polynomial(&PolynomialObservable::constant(2.5), &basis).unwrap();
        assert_eq!(k.entries(), &(CMatrix::identity(6, 6) * c(2.5, 0.0)));
    }

    #[test]
    fn half_q_squared() {
        let basis = BasisSpec::unit(8, 2);
        let m = apply_polynomial(&PolynomialObservable::new(vec![0.0, 0.0, 0.5]), &basis).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j {
                    (i as f64 + 0.5) / 2.0
                } else if j == i + 2 {
                    (((i + 1) * (i + 2)) as f64).sqrt() / 4.0
                } else if i == j + 2 {
                    (((j + 1) * (j + 2)) as f64).sqrt() / 4.0
                } else {
                    0.0
                };
                assert!((m.get(i, j) - c(want, 0.0)).norm() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn pad_too_small() {
        let quartic = PolynomialObservable::new(vec![0.0, 0.0, 0.5, 0.1, 0.01]);
        assert_eq!(
            apply_polynomial(&quartic, &BasisSpec::unit(10, 3)),
            Err(Error::PadTooSmall {
                pad: 3,
                required: 4
            })
        );
        assert!(matches!(
            build_hamiltonian(
                &BasisSpec::unit(10, 1),
                &PolynomialObservable::constant(0.0)
            ),
            Err(Error::PadTooSmall {
                pad: 1,
                required: 2
            })
        ));
    }

    #[test]
    fn harmonic_hamiltonian_is_diagonal() {
        let basis = BasisSpec::unit(20, 2);
        let h = build_hamiltonian(&basis, &PolynomialObservable::harmonic(1.0, 1.0)).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                if i == j {
                    assert!((h.get(i, i).re - (i as f64 + 0.5)).abs() < 1e-13);
                } else {
                    assert_eq!(h.get(i, j).norm(), 0.0, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn anharmonic_hamiltonian_band() {
        let basis = BasisSpec::unit(20, 4);
        let v = PolynomialObservable::new(vec![0.0, 0.0, 0.5, 0.1, 0.01]);
        let h = build_hamiltonian(&basis, &v).unwrap();
        assert!(h.is_hermitian());
        assert!(h.asymmetry() <= 1e-12 * h.max_abs());
        assert!(h.get(0, 4).norm() > 0.0);
        for i in 0..20usize {
            for j in 0..20 {
                if i.abs_diff(j) > 4 {
                    assert_eq!(h.get(i, j).norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn commutator_examples() {
        let basis = BasisSpec::unit(10, 3);
        let q = position(&basis).unwrap();
        let q2 = apply_polynomial(&PolynomialObservable::monomial(2), &basis).unwrap();
        let qq2 = commutator(&q, &q2).unwrap();
        // products of truncated matrices differ only in the last row/column
        assert!(qq2.truncate(9).max_abs() < 1e-14);

        let one = OperatorMatrix::identity(10);
        assert_eq!(commutator(&one, &q2).unwrap().max_abs(), 0.0);

        // (i/hbar)[p, q^2/2] = q away from the truncation edge
        let p = momentum(&basis).unwrap();
        let f = apply_polynomial(&PolynomialObservable::new(vec![0.0, 0.0, 0.5]), &basis).unwrap();
        let lhs = commutator(&p, &f).unwrap().entries() * c(0.0, 1.0 / basis.hbar);
        for i in 0..9 {
            for j in 0..9 {
                assert!((lhs[(i, j)] - q.get(i, j)).norm() < 1e-14);
            }
        }

        let small = OperatorMatrix::identity(3);
        assert!(matches!(
            commutator(&small, &q),
            Err(Error::DimMismatch { left: 3, right: 10 })
        ));
    }

    #[test]
    fn constant_potential_shift() {
        let basis = BasisSpec::unit(6, 2);
        let free = build_hamiltonian(&basis, &PolynomialObservable::constant(0.0)).unwrap();
        let shifted = build_hamiltonian(&basis, &PolynomialObservable::constant(5.0)).unwrap();
        let diff = shifted.add_scaled(&free, -1.0).unwrap();
        assert!(diff.max_diff(&OperatorMatrix::identity(6).scale(5.0)) < 1e-14);
    }

    proptest! {
        #[test]
        fn polynomial_is_hermitian(coeffs in prop::collection::vec(-2.0f64..2.0, 1..6),
                                   n in 2usize..14,
                                   mass in 0.3f64..3.0,
                                   wr in 0.3f64..3.0) {
            let poly = PolynomialObservable::new(coeffs);
            let basis = BasisSpec::new(n, poly.degree().max(2), mass, wr, 1.0).unwrap();
            let m = apply_polynomial(&poly, &basis).unwrap();
            prop_assert!(m.asymmetry() <= 1e-12 * m.max_abs().max(f64::MIN_POSITIVE));
            let h = build_hamiltonian(&basis, &poly).unwrap();
            prop_assert!(h.asymmetry() <= 1e-12 * h.max_abs());
        }

        #[test]
        fn pad_sufficiency(coeffs in prop::collection::vec(-2.0f64..2.0, 1..6), n in 2usize..14) {
            let poly = PolynomialObservable::new(coeffs);
            let pad = poly.degree();
            let a = apply_polynomial(&poly, &BasisSpec::unit(n, pad)).unwrap();
            let b = apply_polynomial(&poly, &BasisSpec::unit(n, pad + 2)).unwrap();
            prop_assert!(a.max_diff(&b) <= 1e-12 * a.max_abs().max(1.0));
        }
    }
}
