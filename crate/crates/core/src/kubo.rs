//! Thermal equilibrium quantities and the exact Kubo-transformed correlator,
//! all evaluated in the eigenbasis of the Hamiltonian.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::operator::{CMatrix, OperatorMatrix};
use crate::series::{check_times, CorrelationSeries, Estimator, PhaseSum, SeriesParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    pub beta: f64,
    pub kb: f64,
}

impl ThermalParams {
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_kb(beta, 1.0)
    }

    pub fn with_kb(beta: f64, kb: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be > 0, got {beta}"
            )));
        }
        if !(kb.is_finite() && kb > 0.0) {
            return Err(Error::InvalidParameter(format!("kB must be > 0, got {kb}")));
        }
        Ok(ThermalParams { beta, kb })
    }

    pub fn temperature(&self) -> f64 {
        1.0 / (self.kb * self.beta)
    }
}

/// `Z = exp(-beta * shift) * shifted_sum`, with `shift` the ground energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionFunction {
    pub shifted_sum: f64,
    pub shift: f64,
}

impl PartitionFunction {
    /// `ln Z`, finite even when `Z` itself would overflow.
    pub fn ln_z(&self, beta: f64) -> f64 {
        self.shifted_sum.ln() - beta * self.shift
    }

    /// Partition function relative to a reference energy: `Z * exp(beta * e_ref)`.
    pub fn relative_to(&self, beta: f64, e_ref: f64) -> f64 {
        self.shifted_sum * (-beta * (self.shift - e_ref)).exp()
    }
}

pub fn partition_function(spec: &Spectrum, th: &ThermalParams) -> PartitionFunction {
    let e0 = spec.ground_energy();
    let shifted_sum = spec
        .eigenvalues
        .iter()
        .map(|&e| (-th.beta * (e - e0)).exp())
        .sum();
    PartitionFunction {
        shifted_sum,
        shift: e0,
    }
}

/// Normalized Boltzmann weights `exp(-beta (E_n - E_0)) / Z'`.
pub fn boltzmann_weights(spec: &Spectrum, th: &ThermalParams) -> Vec<f64> {
    let z = partition_function(spec, th);
    spec.eigenvalues
        .iter()
        .map(|&e| (-th.beta * (e - z.shift)).exp() / z.shifted_sum)
        .collect()
}

pub fn thermal_expectation(
    spec: &Spectrum,
    th: &ThermalParams,
    op: &OperatorMatrix,
) -> Result<f64> {
    op.require_hermitian()?;
    let w = boltzmann_weights(spec, th);
    let u = &spec.eigenvectors;
    let au = op.entries() * u;
    let mut acc = 0.0;
    for (n, wn) in w.iter().enumerate() {
        // (U^dagger A U)_nn
        let diag = u.column(n).dotc(&au.column(n));
        acc += wn * diag.re;
    }
    Ok(acc)
}

/// `(exp(x) - 1) / x`, with the second-order series below the degeneracy cut.
fn kappa(x: f64, degenerate: bool) -> f64 {
    if degenerate {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

pub fn kubo_transform(
    spec: &Spectrum,
    th: &ThermalParams,
    op: &OperatorMatrix,
) -> Result<OperatorMatrix> {
    op.require_hermitian()?;
    let eps = spec.degeneracy_eps();
    let e = &spec.eigenvalues;
    let mut a = spec.to_eigenbasis(op.entries());
    let n = spec.dim();
    for i in 0..n {
        for j in 0..n {
            let d = e[i] - e[j];
            a[(i, j)] *= kappa(th.beta * d, d.abs() < eps);
        }
    }
    // A^K is not Hermitian in general; rho A^K is.
    Ok(OperatorMatrix::new(spec.from_eigenbasis(&a)))
}

/// Kubo weights `W_nm = (e^{-beta E_m} - e^{-beta E_n}) / (Z beta (E_n - E_m))`,
/// so that `(rho A^K)_nm = W_nm A_nm` in the eigenbasis.
///
/// Evaluated as `e^{-beta (E_lo - E_0)} (1 - e^{-x}) / (x Z')` with
/// `x = beta |E_n - E_m|`; every exponent is non-positive.
pub fn kubo_weights(spec: &Spectrum, th: &ThermalParams) -> DMatrix<f64> {
    let z = partition_function(spec, th);
    let eps = spec.degeneracy_eps();
    let e = &spec.eigenvalues;
    let n = spec.dim();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (lo, hi) = if e[i] <= e[j] {
                (e[i], e[j])
            } else {
                (e[j], e[i])
            };
            let base = (-th.beta * (lo - z.shift)).exp() / z.shifted_sum;
            let x = th.beta * (hi - lo);
            let factor = if hi - lo < eps {
                1.0 - x / 2.0 + x * x / 6.0
            } else {
                -(-x).exp_m1() / x
            };
            w[(i, j)] = base * factor;
        }
    }
    w
}

/// Eigenbasis matrix `W_nm * A_nm`, i.e. `rho A^K` expressed in the eigenbasis.
pub(crate) fn rho_kubo_eigen(spec: &Spectrum, th: &ThermalParams, a: &OperatorMatrix) -> CMatrix {
    let w = kubo_weights(spec, th);
    let mut k = spec.to_eigenbasis(a.entries());
    k.zip_apply(&w, |z, wv| *z *= wv);
    k
}

/// `Tr(K B)` for eigenbasis matrices, summed row-major.
pub(crate) fn trace_product(k: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = k.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += k[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Exact `C^K_AB(t) = <A^K(0) B(t)>` from the eigen-sum
/// `sum_nm W_nm A_nm B_mn exp(i (E_m - E_n) t / hbar)`.
pub fn kubo_correlator(
    spec: &Spectrum,
    th: &ThermalParams,
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    times: &[f64],
    hbar: f64,
) -> Result<CorrelationSeries> {
    a.require_hermitian()?;
    b.require_hermitian()?;
    check_times(times)?;
    let k = rho_kubo_eigen(spec, th, a);
    let bt = spec.to_eigenbasis(b.entries());
    let e = &spec.eigenvalues;
    let n = spec.dim();
    let mut sum = PhaseSum::default();
    for i in 0..n {
        for j in 0..n {
            sum.push(k[(i, j)] * bt[(j, i)], (e[j] - e[i]) / hbar);
        }
    }
    CorrelationSeries::new(
        times.to_vec(),
        sum.eval_many(times),
        Estimator::ExactKubo,
        SeriesParams {
            beta: th.beta,
            basis_size: n,
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use crate::eigen::eigh;
    use crate::operator::{apply_polynomial, build_hamiltonian, position};
    use crate::polynomial::PolynomialObservable;
    use crate::series::uniform_grid;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn harmonic(n: usize) -> (BasisSpec, OperatorMatrix, Spectrum) {
        let basis = BasisSpec::unit(n, 4);
        let h = build_hamiltonian(&basis, &PolynomialObservable::harmonic(1.0, 1.0)).unwrap();
        let s = eigh(&h).unwrap();
        (basis, h, s)
    }

    fn unit_beta() -> ThermalParams {
        ThermalParams::new(1.0).unwrap()
    }

    #[test]
    fn partition_function_harmonic() {
        let (_, _, s) = harmonic(60);
        let z = partition_function(&s, &unit_beta());
        let full = z.shifted_sum * (-z.shift).exp();
        let expect = (-0.5f64).exp() / (1.0 - (-1.0f64).exp());
        assert!((full - expect).abs() < 1e-12);
        assert!((expect - 0.959517).abs() < 1e-6);

        let cold = partition_function(&s, &ThermalParams::new(200.0).unwrap());
        assert!((cold.shifted_sum - 1.0).abs() < 1e-80);

        let single = Spectrum {
            eigenvalues: vec![3.0],
            eigenvectors: CMatrix::identity(1, 1),
        };
        assert_eq!(partition_function(&single, &unit_beta()).shifted_sum, 1.0);
    }

    #[test]
    fn thermal_expectations() {
        let (basis, _, s) = harmonic(60);
        let th = unit_beta();
        let q = position(&basis).unwrap();
        assert!(thermal_expectation(&s, &th, &q).unwrap().abs() < 1e-14);
        let one = OperatorMatrix::identity(60);
        assert!((thermal_expectation(&s, &th, &one).unwrap() - 1.0).abs() < 1e-14);

        let q2 = apply_polynomial(&PolynomialObservable::monomial(2), &basis).unwrap();
        let got = thermal_expectation(&s, &th, &q2).unwrap();
        // brute-force eigen-sum: <n|q^2|n> = n + 1/2 with unit parameters
        let (mut num, mut den) = (0.0, 0.0);
        for n in 0..200 {
            let w = (-(n as f64 + 0.5)).exp();
            num += w * (n as f64 + 0.5);
            den += w;
        }
        let closed = 0.5 / (0.5f64).tanh();
        assert!((num / den - closed).abs() < 1e-13);
        assert!((closed - 1.08198).abs() < 1e-5);
        assert!((got - closed).abs() < 1e-12);
    }

    #[test]
    fn kubo_transform_examples() {
        let (basis, h, s) = harmonic(30);
        let th = unit_beta();
        let hk = kubo_transform(&s, &th, &h).unwrap();
        assert!(hk.max_diff(&h) < 1e-12);
        let one = OperatorMatrix::identity(30);
        assert!(kubo_transform(&s, &th, &one).unwrap().max_diff(&one) < 1e-14);

        let q = position(&basis).unwrap();
        let qk = kubo_transform(&s, &th, &q).unwrap();
        let elem = s.to_eigenbasis(qk.entries())[(0, 1)];
        let expect = FRAC_1_SQRT_2 * ((-1.0f64).exp() - 1.0) / -1.0;
        assert!((elem.re - expect).abs() < 1e-14);
        assert!((expect - 0.446977).abs() < 1e-6);
    }

    #[test]
    fn correlator_harmonic() {
        let (basis, _, s) = harmonic(60);
        let th = unit_beta();
        let q = position(&basis).unwrap();
        let c = kubo_correlator(&s, &th, &q, &q, &[0.0, PI], 1.0).unwrap();
        assert!((c.values[0].re - 1.0).abs() < 1e-10);
        assert!((c.values[1].re + 1.0).abs() < 1e-10);

        let one = OperatorMatrix::identity(60);
        let grid = uniform_grid(10.0, 41);
        let c1 = kubo_correlator(&s, &th, &one, &one, &grid, 1.0).unwrap();
        assert!(c1.max_error_vs(|_| 1.0) < 1e-13);
    }

    #[test]
    fn correlator_real_and_even() {
        let v = PolynomialObservable::new(vec![0.0, 0.0, 0.5, 0.1, 0.01]);
        let basis = BasisSpec::unit(40, 4);
        let s = eigh(&build_hamiltonian(&basis, &v).unwrap()).unwrap();
        let th = unit_beta();
        let a = apply_polynomial(&PolynomialObservable::monomial(2), &basis).unwrap();
        let b = position(&basis).unwrap();
        let grid = uniform_grid(5.0, 21);
        let c = kubo_correlator(&s, &th, &a, &b, &grid, 1.0).unwrap();
        assert!(c.max_imag() <= 1e-10 * c.max_abs());

        let neg: Vec<f64> = grid.iter().rev().map(|t| -t).collect();
        let ca = kubo_correlator(&s, &th, &a, &a, &grid, 1.0).unwrap();
        let cn = kubo_correlator(&s, &th, &a, &a, &neg, 1.0).unwrap();
        for (k, z) in ca.values.iter().enumerate() {
            assert!((z - cn.values[grid.len() - 1 - k]).norm() < 1e-12);
        }
    }

    #[test]
    fn large_beta_stays_finite() {
        let (basis, _, s) = harmonic(60);
        let th = ThermalParams::new(1e4).unwrap();
        let w = kubo_weights(&s, &th);
        assert!(w.iter().all(|x| x.is_finite()));
        let q = position(&basis).unwrap();
        let c = kubo_correlator(&s, &th, &q, &q, &[0.0], 1.0).unwrap();
        assert!((c.values[0].re - 1e-4).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian_operator() {
        let (_, _, s) = harmonic(4);
        let bad = OperatorMatrix::new(CMatrix::from_fn(4, 4, |i, j| {
            Complex64::new((i * 4 + j) as f64, 0.0)
        }));
        assert!(matches!(
            thermal_expectation(&s, &unit_beta(), &bad),
            Err(Error::NotHermitian { .. })
        ));
        assert!(kubo_transform(&s, &unit_beta(), &bad).is_err());
    }
}
