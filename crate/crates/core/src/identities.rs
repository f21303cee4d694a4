//! Finite-difference checks of the source-derivative identities at `mu = 0`.
//!
//! Each check compares a central difference over two diagonalized perturbed
//! Hamiltonians `H +- h A` with the analytic right-hand side built from the
//! unperturbed spectrum and the Kubo weights. Residuals are returned relative
//! to the scale of the right-hand side.

use num_complex::Complex64;

use crate::eigen::{eigh, Spectrum};
use crate::error::Result;
use crate::esm::{perturbed_hamiltonian, SystemSpec};
use crate::kubo::{boltzmann_weights, partition_function, rho_kubo_eigen, thermal_expectation};
use crate::operator::{apply_polynomial, max_abs, CMatrix};
use crate::polynomial::PolynomialObservable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    /// Max-norm (or absolute) difference between the two sides.
    pub abs: f64,
    /// Scale the residual is measured against.
    pub scale: f64,
}

impl IdentityResidual {
    pub fn relative(&self) -> f64 {
        self.abs / self.scale
    }
}

/// `U exp(-beta (E - e_ref)) U^dagger`.
fn boltzmann_matrix(spec: &Spectrum, beta: f64, e_ref: f64) -> CMatrix {
    let u = &spec.eigenvectors;
    let mut uw = u.clone();
    for (j, e) in spec.eigenvalues.iter().enumerate() {
        uw.column_mut(j).scale_mut((-beta * (e - e_ref)).exp());
    }
    uw * u.adjoint()
}

fn source_pair(sys: &SystemSpec, a: &PolynomialObservable, h: f64) -> Result<(Spectrum, Spectrum)> {
    let plus = eigh(&perturbed_hamiltonian(sys, a, h)?)?;
    let minus = eigh(&perturbed_hamiltonian(sys, a, -h)?)?;
    Ok((plus, minus))
}

/// `d/dmu exp(-beta H_mu) = -beta exp(-beta H) A^K`, energies measured from
/// the unperturbed ground state.
pub fn boltzmann_source_check(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    h: f64,
) -> Result<IdentityResidual> {
    let spec = sys.spectrum()?;
    let beta = sys.thermal.beta;
    let e0 = spec.ground_energy();
    let (plus, minus) = source_pair(sys, a, h)?;
    let fd = (boltzmann_matrix(&plus, beta, e0) - boltzmann_matrix(&minus, beta, e0))
        / Complex64::new(2.0 * h, 0.0);

    // exp(-beta H) A^K = Z' rho A^K
    let a_mat = apply_polynomial(a, &sys.basis)?;
    let z = partition_function(&spec, &sys.thermal).shifted_sum;
    let rhs = spec.from_eigenbasis(&rho_kubo_eigen(&spec, &sys.thermal, &a_mat))
        * Complex64::new(-beta * z, 0.0);
    Ok(IdentityResidual {
        abs: max_abs(&(fd - &rhs)),
        scale: max_abs(&rhs).max(f64::MIN_POSITIVE),
    })
}

/// `dZ_mu/dmu = -beta Z <A>`; the scale is `beta Z max(|<A>|, 1)`.
pub fn partition_source_check(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    h: f64,
) -> Result<IdentityResidual> {
    let spec = sys.spectrum()?;
    let th = &sys.thermal;
    let e0 = spec.ground_energy();
    let (plus, minus) = source_pair(sys, a, h)?;
    let zp = partition_function(&plus, th).relative_to(th.beta, e0);
    let zm = partition_function(&minus, th).relative_to(th.beta, e0);
    let fd = (zp - zm) / (2.0 * h);

    let z = partition_function(&spec, th).shifted_sum;
    let mean = thermal_expectation(&spec, th, &apply_polynomial(a, &sys.basis)?)?;
    let rhs = -th.beta * z * mean;
    Ok(IdentityResidual {
        abs: (fd - rhs).abs(),
        scale: th.beta * z * mean.abs().max(1.0),
    })
}

/// `d rho_mu/dmu = -beta rho (A^K - <A>)`.
pub fn density_source_check(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    h: f64,
) -> Result<IdentityResidual> {
    let spec = sys.spectrum()?;
    let th = &sys.thermal;
    let (plus, minus) = source_pair(sys, a, h)?;
    let rho = |s: &Spectrum| {
        let z = partition_function(s, th);
        boltzmann_matrix(s, th.beta, z.shift) / Complex64::new(z.shifted_sum, 0.0)
    };
    let fd = (rho(&plus) - rho(&minus)) / Complex64::new(2.0 * h, 0.0);

    let a_mat = apply_polynomial(a, &sys.basis)?;
    let mean = thermal_expectation(&spec, th, &a_mat)?;
    let mut k = rho_kubo_eigen(&spec, th, &a_mat);
    for (n, w) in boltzmann_weights(&spec, th).iter().enumerate() {
        k[(n, n)] -= w * mean;
    }
    let rhs = spec.from_eigenbasis(&k) * Complex64::new(-th.beta, 0.0);
    Ok(IdentityResidual {
        abs: max_abs(&(fd - &rhs)),
        scale: max_abs(&rhs).max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use crate::kubo::ThermalParams;

    fn systems() -> Vec<SystemSpec> {
        let th = ThermalParams::new(1.0).unwrap();
        vec![
            SystemSpec::new(
                BasisSpec::unit(40, 4),
                PolynomialObservable::harmonic(1.0, 1.0),
                th,
            )
            .unwrap(),
            SystemSpec::new(
                BasisSpec::unit(40, 4),
                PolynomialObservable::new(vec![0.0, 0.0, 0.5, 0.1, 0.01]),
                th,
            )
            .unwrap(),
        ]
    }

    #[test]
    fn source_identities_hold() {
        for sys in systems() {
            for a in [
                PolynomialObservable::monomial(1),
                PolynomialObservable::monomial(2),
            ] {
                let r6 = boltzmann_source_check(&sys, &a, 1e-4).unwrap();
                let r7 = partition_source_check(&sys, &a, 1e-4).unwrap();
                let r8 = density_source_check(&sys, &a, 1e-4).unwrap();
                assert!(r6.relative() <= 1e-6, "{r6:?}");
                assert!(r7.relative() <= 1e-6, "{r7:?}");
                assert!(r8.abs <= 1e-6, "{r8:?}");
            }
        }
    }
}
