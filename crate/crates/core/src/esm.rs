//! External-source estimators of Kubo-transformed correlation functions.
//!
//! Two sources are attached to the Hamiltonian: `mu` couples to `A(q)` and
//! sets the initial density, `nu` couples to `F(q)` (with `F' = B`) and drives
//! the time evolution of the momentum. The mixed derivative of the momentum
//! expectation `p_{mu nu}(t)` at zero sources yields the Krishna-Voth
//! correlator; adding the Kubo correlator of `A` with the correction
//! operator `D(t)` recovers the exact correlator.
//!
//! Time derivatives are taken analytically on the eigen-sum; source
//! derivatives are finite differences over independently diagonalized
//! perturbed Hamiltonians.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::BasisSpec;
use crate::eigen::{eigh, Spectrum};
use crate::error::{Error, Result};
use crate::kubo::{
    boltzmann_weights, rho_kubo_eigen, thermal_expectation, trace_product, ThermalParams,
};
use crate::operator::{
    apply_polynomial, build_hamiltonian, max_abs, momentum, CMatrix, OperatorMatrix,
};
use crate::polynomial::PolynomialObservable;
use crate::series::{check_times, CorrelationSeries, Estimator, PhaseSum, SeriesParams};

/// Ground-state weight on the top tenth of the basis above which a
/// diagonalization counts as truncation-dominated.
pub const TAIL_WEIGHT_LIMIT: f64 = 1e-8;

/// Basis states dropped for the ground-energy drift estimate.
const DRIFT_DROP: usize = 4;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub basis: BasisSpec,
    pub potential: PolynomialObservable,
    pub thermal: ThermalParams,
}

impl SystemSpec {
    pub fn new(
        basis: BasisSpec,
        potential: PolynomialObservable,
        thermal: ThermalParams,
    ) -> Result<Self> {
        basis.validate()?;
        basis.require_pad(potential.degree().max(2))?;
        if !potential.is_finite() {
            return Err(Error::InvalidParameter(
                "potential has non-finite coefficients".into(),
            ));
        }
        Ok(SystemSpec {
            basis,
            potential,
            thermal,
        })
    }

    pub fn hbar(&self) -> f64 {
        self.basis.hbar
    }

    pub fn hamiltonian(&self) -> Result<OperatorMatrix> {
        build_hamiltonian(&self.basis, &self.potential)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        eigh(&self.hamiltonian()?)
    }

    pub fn with_basis_size(&self, size: usize) -> Self {
        SystemSpec {
            basis: self.basis.with_size(size),
            ..self.clone()
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Ok(SystemSpec {
            thermal: ThermalParams::with_kb(beta, self.thermal.kb)?,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Central2,
    Central2Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuMode {
    /// Central differences in both sources.
    Fd,
    /// Exact `mu` derivative of the density, central differences in `nu`.
    SemianalyticMu,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Central2 => "central2",
            Scheme::Central2Richardson => "central2_richardson",
        })
    }
}

impl fmt::Display for NuMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NuMode::Fd => "fd",
            NuMode::SemianalyticMu => "semianalytic_mu",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceStencil {
    pub h_mu: f64,
    pub h_nu: f64,
    pub scheme: Scheme,
    pub nu_mode: NuMode,
}

impl Default for SourceStencil {
    fn default() -> Self {
        SourceStencil {
            h_mu: 1e-3,
            h_nu: 1e-3,
            scheme: Scheme::Central2,
            nu_mode: NuMode::Fd,
        }
    }
}

impl SourceStencil {
    pub fn new(h_mu: f64, h_nu: f64, scheme: Scheme, nu_mode: NuMode) -> Result<Self> {
        let s = SourceStencil {
            h_mu,
            h_nu,
            scheme,
            nu_mode,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, h) in [("h_mu", self.h_mu), ("h_nu", self.h_nu)] {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {h}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityStatus {
    Pass,
    /// Spectrum unbounded below in the full space but regularized by the
    /// truncation; ground state is still well inside the basis.
    PassWithNote,
    Fail,
}

impl fmt::Display for StabilityStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityStatus::Pass => "pass",
            StabilityStatus::PassWithNote => "pass-with-note",
            StabilityStatus::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub label: String,
    /// Ground-state weight on the top 10% of basis states.
    pub tail_weight: f64,
    /// `|E_0(N) - E_0(N-4)|` from the leading sub-block.
    pub e0_drift: f64,
    pub bounded_below: bool,
    pub status: StabilityStatus,
    pub notes: Vec<String>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.status != StabilityStatus::Fail
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} (tail weight {:.3e}, E0 drift {:.3e})",
            self.label, self.status, self.tail_weight, self.e0_drift
        )?;
        for n in &self.notes {
            write!(f, "; {n}")?;
        }
        Ok(())
    }
}

/// All series share one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EsmReport {
    pub kv_series: CorrelationSeries,
    pub exact_series: Option<CorrelationSeries>,
    pub c_ad_series: Option<CorrelationSeries>,
    pub d_expect_series: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub stability: Vec<StabilityReport>,
    /// Max over the grid of the step-halving change of the mixed derivative.
    pub step_halving_change: f64,
    /// Error estimate for the returned mixed derivative.
    pub fd_error_estimate: f64,
    pub notes: Vec<String>,
}

/// `H + strength * op(q)`.
pub fn perturbed_hamiltonian(
    sys: &SystemSpec,
    op: &PolynomialObservable,
    strength: f64,
) -> Result<OperatorMatrix> {
    build_hamiltonian(&sys.basis, &perturbed_potential(sys, op, strength))
}

fn perturbed_potential(
    sys: &SystemSpec,
    op: &PolynomialObservable,
    strength: f64,
) -> PolynomialObservable {
    if strength == 0.0 {
        sys.potential.clone()
    } else {
        sys.potential.add_scaled(op, strength)
    }
}

/// Checks whether the ground state of a (perturbed) Hamiltonian lives inside
/// the truncated basis.
///
/// `potential` is the full potential of `h`, used to classify boundedness.
pub fn stability_check(
    h: &OperatorMatrix,
    spec: &Spectrum,
    potential: &PolynomialObservable,
) -> StabilityReport {
    let n = spec.dim();
    let tail = n.div_ceil(10);
    let tail_weight: f64 = (n - tail..n)
        .map(|i| spec.eigenvectors[(i, 0)].norm_sqr())
        .sum();

    let e0_drift = if n > DRIFT_DROP {
        let sub = h.truncate(n - DRIFT_DROP);
        match eigh(&sub) {
            Ok(s) => (spec.ground_energy() - s.ground_energy()).abs(),
            Err(_) => f64::INFINITY,
        }
    } else {
        0.0
    };

    let bounded_below = potential.is_bounded_below();
    let mut notes = Vec::new();
    let status = if tail_weight > TAIL_WEIGHT_LIMIT {
        notes.push(format!(
            "ground state truncation-dominated: tail weight {tail_weight:.3e} > {TAIL_WEIGHT_LIMIT:.0e}"
        ));
        StabilityStatus::Fail
    } else if !bounded_below {
        notes.push(format!(
            "potential {potential} is unbounded below; spectrum bounded only by truncation"
        ));
        StabilityStatus::PassWithNote
    } else {
        StabilityStatus::Pass
    };
    if e0_drift > 1e-8 * spec.ground_energy().abs().max(1.0) {
        notes.push(format!(
            "ground energy drifts by {e0_drift:.3e} under basis reduction"
        ));
    }
    StabilityReport {
        label: String::new(),
        tail_weight,
        e0_drift,
        bounded_below,
        status,
        notes,
    }
}

/// Diagonalizes `H + strength * op` and runs the stability check.
/// Spectrum of `H + strength * op` up to a scalar: the constant term of `op`
/// commutes with everything and cancels in densities and Bohr frequencies,
/// so it is dropped rather than passed through the eigensolver.
fn source_spectrum(
    sys: &SystemSpec,
    op: &PolynomialObservable,
    strength: f64,
    label: &str,
) -> Result<(Spectrum, StabilityReport)> {
    let pot = perturbed_potential(sys, &op.without_constant(), strength);
    let h = build_hamiltonian(&sys.basis, &pot)?;
    let spec = eigh(&h)?;
    let mut report = stability_check(&h, &spec, &pot);
    report.label = format!("{label}({strength:+.3e})");
    if report.status == StabilityStatus::Fail {
        return Err(Error::StabilityFailure(report.to_string()));
    }
    Ok((spec, report))
}

/// Thermal density `U diag(w) U^dagger` in the Fock basis.
fn density(spec: &Spectrum, th: &ThermalParams) -> CMatrix {
    let w = boltzmann_weights(spec, th);
    let u = &spec.eigenvectors;
    let mut uw = u.clone();
    for (j, wj) in w.iter().enumerate() {
        uw.column_mut(j).scale_mut(*wj);
    }
    uw * u.adjoint()
}

/// `Tr(X p_nu(t))` as a phase sum over eigenpairs of `H_nu`:
/// amplitudes `X'_nm p'_mn`, frequencies `(E_m - E_n)/hbar`.
fn momentum_sum(initial: &CMatrix, nu_spec: &Spectrum, p: &CMatrix, hbar: f64) -> PhaseSum {
    let x = nu_spec.to_eigenbasis(initial);
    let pe = nu_spec.to_eigenbasis(p);
    let e = &nu_spec.eigenvalues;
    let n = nu_spec.dim();
    let mut sum = PhaseSum::default();
    for i in 0..n {
        for j in 0..n {
            sum.push(x[(i, j)] * pe[(j, i)], (e[j] - e[i]) / hbar);
        }
    }
    sum
}

fn check_source_polys(sys: &SystemSpec, polys: &[&PolynomialObservable]) -> Result<()> {
    for p in polys {
        if !p.is_finite() {
            return Err(Error::InvalidParameter(
                "source polynomial has non-finite coefficients".into(),
            ));
        }
        sys.basis
            .require_pad(sys.potential.add_scaled(p, 1.0).degree().max(2))?;
    }
    Ok(())
}

fn momentum_series(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    f: &PolynomialObservable,
    mu: f64,
    nu: f64,
    times: &[f64],
    rate: bool,
) -> Result<CorrelationSeries> {
    check_times(times)?;
    check_source_polys(sys, &[a, f])?;
    let (mu_spec, _) = source_spectrum(sys, a, mu, "H_mu")?;
    let (nu_spec, _) = source_spectrum(sys, f, nu, "H_nu")?;
    let rho = density(&mu_spec, &sys.thermal);
    let p = momentum(&sys.basis)?;
    let sum = momentum_sum(&rho, &nu_spec, p.entries(), sys.hbar());
    let (values, label) = if rate {
        (sum.eval_dt_many(times), Estimator::MomentumRate)
    } else {
        (sum.eval_many(times), Estimator::Momentum)
    };
    CorrelationSeries::new(
        times.to_vec(),
        values,
        label,
        SeriesParams {
            beta: sys.thermal.beta,
            basis_size: sys.basis.size,
            mu: Some(mu),
            nu: Some(nu),
            ..Default::default()
        },
    )
}

/// Nonequilibrium momentum expectation `Tr(rho_mu p_nu(t))`.
pub fn momentum_expectation(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    f: &PolynomialObservable,
    mu: f64,
    nu: f64,
    times: &[f64],
) -> Result<CorrelationSeries> {
    momentum_series(sys, a, f, mu, nu, times, false)
}

/// Exact time derivative of [`momentum_expectation`].
pub fn momentum_expectation_dt(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    f: &PolynomialObservable,
    mu: f64,
    nu: f64,
    times: &[f64],
) -> Result<CorrelationSeries> {
    momentum_series(sys, a, f, mu, nu, times, true)
}

/// Shared unperturbed data for one estimator run.
struct SourceSetup<'a> {
    sys: &'a SystemSpec,
    a: &'a PolynomialObservable,
    f: PolynomialObservable,
    p: CMatrix,
}

impl SourceSetup<'_> {
    /// A step so small that `H + h op` and `H - h op` round to the same
    /// matrix cannot resolve a derivative.
    fn check_resolved(&self, op: &PolynomialObservable, h: f64) -> Result<()> {
        if op.degree() == 0 {
            return Ok(());
        }
        let plus = perturbed_hamiltonian(self.sys, op, h)?;
        let minus = perturbed_hamiltonian(self.sys, op, -h)?;
        if plus == minus {
            return Err(Error::StencilDegenerate {
                change: 0.0,
                estimate: 0.0,
            });
        }
        Ok(())
    }

    /// `Tr(X d/dt p_nu(t))` at `nu = +h` minus `nu = -h`.
    fn nu_difference(
        &self,
        x: &CMatrix,
        h_nu: f64,
        times: &[f64],
        reports: &mut Vec<StabilityReport>,
    ) -> Result<Vec<Complex64>> {
        self.check_resolved(&self.f, h_nu)?;
        let corners: Vec<Result<(Spectrum, StabilityReport)>> = [h_nu, -h_nu]
            .par_iter()
            .map(|&s| source_spectrum(self.sys, &self.f, s, "H_nu"))
            .collect();
        let mut spectra = Vec::with_capacity(2);
        for c in corners {
            let (s, r) = c?;
            reports.push(r);
            spectra.push(s);
        }
        let hbar = self.sys.hbar();
        let plus = momentum_sum(x, &spectra[0], &self.p, hbar).eval_dt_many(times);
        let minus = momentum_sum(x, &spectra[1], &self.p, hbar).eval_dt_many(times);
        Ok(plus.iter().zip(&minus).map(|(a, b)| a - b).collect())
    }

    /// 2x2 central stencil over `(+-h_mu, +-h_nu)`.
    ///
    /// By linearity in the density, `g(+,+) - g(+,-) - g(-,+) + g(-,-)` is
    /// evaluated as the `nu` difference of `Tr((rho_+ - rho_-) dp_nu/dt)`.
    fn fd_corners(
        &self,
        h_mu: f64,
        h_nu: f64,
        times: &[f64],
        reports: &mut Vec<StabilityReport>,
    ) -> Result<Vec<Complex64>> {
        self.check_resolved(self.a, h_mu)?;
        let corners: Vec<Result<(Spectrum, StabilityReport)>> = [h_mu, -h_mu]
            .par_iter()
            .map(|&s| source_spectrum(self.sys, self.a, s, "H_mu"))
            .collect();
        let mut rhos = Vec::with_capacity(2);
        for c in corners {
            let (s, r) = c?;
            reports.push(r);
            rhos.push(density(&s, &self.sys.thermal));
        }
        let drho = &rhos[0] - &rhos[1];
        let diff = self.nu_difference(&drho, h_nu, times, reports)?;
        let denom = 4.0 * h_mu * h_nu;
        Ok(diff.into_iter().map(|z| z / denom).collect())
    }

    fn semianalytic(
        &self,
        x: &CMatrix,
        h_nu: f64,
        times: &[f64],
        reports: &mut Vec<StabilityReport>,
    ) -> Result<Vec<Complex64>> {
        let diff = self.nu_difference(x, h_nu, times, reports)?;
        let denom = 2.0 * h_nu;
        Ok(diff.into_iter().map(|z| z / denom).collect())
    }
}

/// `d rho_mu / d mu` at zero source: `-beta rho (A^K - <A>)`, Fock basis.
fn density_source_derivative(
    spec: &Spectrum,
    th: &ThermalParams,
    a: &OperatorMatrix,
) -> Result<CMatrix> {
    let mean = thermal_expectation(spec, th, a)?;
    let w = boltzmann_weights(spec, th);
    let mut k = rho_kubo_eigen(spec, th, a);
    for (n, wn) in w.iter().enumerate() {
        k[(n, n)] -= wn * mean;
    }
    Ok(spec.from_eigenbasis(&k) * Complex64::new(-th.beta, 0.0))
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |a, z| a.max(z.norm()))
}

struct MixedEstimate {
    values: Vec<Complex64>,
    diagnostics: Diagnostics,
}

fn mixed_estimate(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    f: PolynomialObservable,
    stencil: &SourceStencil,
    times: &[f64],
) -> Result<MixedEstimate> {
    stencil.validate()?;
    check_times(times)?;
    check_source_polys(sys, &[a, &f])?;
    let setup = SourceSetup {
        sys,
        a,
        f,
        p: momentum(&sys.basis)?.into_entries(),
    };
    let mut reports = Vec::new();

    let (coarse, fine) = match stencil.nu_mode {
        NuMode::Fd => {
            let coarse = setup.fd_corners(stencil.h_mu, stencil.h_nu, times, &mut reports)?;
            let fine =
                setup.fd_corners(stencil.h_mu / 2.0, stencil.h_nu / 2.0, times, &mut reports)?;
            (coarse, fine)
        }
        NuMode::SemianalyticMu => {
            let spec = sys.spectrum()?;
            let a_mat = apply_polynomial(a, &sys.basis)?;
            let x = density_source_derivative(&spec, &sys.thermal, &a_mat)?;
            let coarse = setup.semianalytic(&x, stencil.h_nu, times, &mut reports)?;
            let fine = setup.semianalytic(&x, stencil.h_nu / 2.0, times, &mut reports)?;
            (coarse, fine)
        }
    };

    let change: Vec<Complex64> = coarse.iter().zip(&fine).map(|(c, f)| c - f).collect();
    let change_max = max_norm(&change);
    let fine_max = max_norm(&fine);
    if change_max > fine_max {
        return Err(Error::StencilDegenerate {
            change: change_max,
            estimate: fine_max,
        });
    }
    let (values, fd_error_estimate) = match stencil.scheme {
        // the O(h^2) error of the coarse estimate is ~4/3 of the change
        Scheme::Central2 => (coarse, 4.0 * change_max / 3.0),
        Scheme::Central2Richardson => (
            coarse
                .iter()
                .zip(&fine)
                .map(|(c, f)| (f * 4.0 - c) / 3.0)
                .collect(),
            change_max / 3.0,
        ),
    };
    Ok(MixedEstimate {
        values,
        diagnostics: Diagnostics {
            stability: reports,
            step_halving_change: change_max,
            fd_error_estimate,
            notes: Vec::new(),
        },
    })
}

fn stencil_params(sys: &SystemSpec, stencil: &SourceStencil) -> SeriesParams {
    SeriesParams {
        beta: sys.thermal.beta,
        basis_size: sys.basis.size,
        mu: Some(0.0),
        nu: Some(0.0),
        h_mu: match stencil.nu_mode {
            NuMode::Fd => Some(stencil.h_mu),
            NuMode::SemianalyticMu => None,
        },
        h_nu: Some(stencil.h_nu),
    }
}

/// Estimator of the mixed source/time derivative of `p_{mu nu}(t)` at zero
/// sources, with `F` the antiderivative of `b`.
pub fn mixed_derivative(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    b: &PolynomialObservable,
    stencil: &SourceStencil,
    times: &[f64],
) -> Result<CorrelationSeries> {
    Ok(mixed_derivative_with_diagnostics(sys, a, b, stencil, times)?.0)
}

pub fn mixed_derivative_with_diagnostics(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    b: &PolynomialObservable,
    stencil: &SourceStencil,
    times: &[f64],
) -> Result<(CorrelationSeries, Diagnostics)> {
    let est = mixed_estimate(sys, a, b.antiderivative(), stencil, times)?;
    let series = CorrelationSeries::new(
        times.to_vec(),
        est.values,
        Estimator::MixedDerivative,
        stencil_params(sys, stencil),
    )?;
    Ok((series, est.diagnostics))
}

fn kv_with_diagnostics(
    sys: &SystemSpec,
    spec: &Spectrum,
    a: &PolynomialObservable,
    f: &PolynomialObservable,
    stencil: &SourceStencil,
    times: &[f64],
) -> Result<(CorrelationSeries, Diagnostics)> {
    let b = f.derivative();
    let est = mixed_estimate(sys, a, f.clone(), stencil, times)?;
    let a_mean = thermal_expectation(spec, &sys.thermal, &apply_polynomial(a, &sys.basis)?)?;
    let b_mean = thermal_expectation(spec, &sys.thermal, &apply_polynomial(&b, &sys.basis)?)?;
    let offset = a_mean * b_mean;
    let beta = sys.thermal.beta;
    let values = est.values.iter().map(|z| z / beta + offset).collect();
    let mut diagnostics = est.diagnostics;
    diagnostics.fd_error_estimate /= beta;
    let series = CorrelationSeries::new(
        times.to_vec(),
        values,
        Estimator::KrishnaVoth,
        stencil_params(sys, stencil),
    )?;
    Ok((series, diagnostics))
}

/// Krishna-Voth correlator: `(1/beta) * mixed derivative + <A><B>`.
pub fn kv_correlator(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    b: &PolynomialObservable,
    stencil: &SourceStencil,
    times: &[f64],
) -> Result<CorrelationSeries> {
    let spec = sys.spectrum()?;
    Ok(kv_with_diagnostics(sys, &spec, a, &b.antiderivative(), stencil, times)?.0)
}

/// Krishna-Voth correlator with the `nu` source operator `F` given directly;
/// `B = F'`. Any constant term of `F` only shifts `H_nu`.
pub fn kv_correlator_from_source(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    f: &PolynomialObservable,
    stencil: &SourceStencil,
    times: &[f64],
) -> Result<CorrelationSeries> {
    let spec = sys.spectrum()?;
    Ok(kv_with_diagnostics(sys, &spec, a, f, stencil, times)?.0)
}

/// Like [`kv_correlator`] but also returns stability and step-size diagnostics.
pub fn kv_correlator_with_diagnostics(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    b: &PolynomialObservable,
    stencil: &SourceStencil,
    times: &[f64],
) -> Result<(CorrelationSeries, Diagnostics)> {
    let spec = sys.spectrum()?;
    kv_with_diagnostics(sys, &spec, a, &b.antiderivative(), stencil, times)
}

/// `int_0^t exp(i w s) ds`, series in `w` for degenerate pairs.
fn phase_integral(w: f64, t: f64, degenerate: bool) -> Complex64 {
    if degenerate {
        Complex64::new(t - w * w * t * t * t / 6.0, w * t * t / 2.0)
    } else {
        (Complex64::from_polar(1.0, w * t) - 1.0) / (I * w)
    }
}

/// Eigenbasis data for evaluating `D(t)`.
struct DKernel {
    f: CMatrix,
    force: CMatrix,
    energies: Vec<f64>,
    hbar: f64,
    eps: f64,
}

impl DKernel {
    fn new(sys: &SystemSpec, spec: &Spectrum, f: &OperatorMatrix) -> Result<Self> {
        let dv = sys.potential.derivative();
        let force = apply_polynomial(&dv, &sys.basis)?;
        Ok(DKernel {
            f: spec.to_eigenbasis(f.entries()),
            force: spec.to_eigenbasis(force.entries()),
            energies: spec.eigenvalues.clone(),
            hbar: sys.hbar(),
            eps: spec.degeneracy_eps(),
        })
    }

    /// `G(t) = int_0^t F(s) ds` and `W(t) = V'(t)`, eigenbasis.
    fn parts(&self, t: f64) -> (CMatrix, CMatrix) {
        let n = self.energies.len();
        let e = &self.energies;
        let mut g = CMatrix::zeros(n, n);
        let mut w = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let de = e[i] - e[j];
                let freq = de / self.hbar;
                g[(i, j)] = self.f[(i, j)] * phase_integral(freq, t, de.abs() < self.eps);
                w[(i, j)] = self.force[(i, j)] * Complex64::from_polar(1.0, freq * t);
            }
        }
        (g, w)
    }

    /// `D(t) = -(i/hbar) [G(t), W(t)]`, eigenbasis.
    fn eigen_d(&self, t: f64) -> CMatrix {
        let (g, w) = self.parts(t);
        (&g * &w - &w * &g) * (-I / self.hbar)
    }

    /// `Tr(K D(t))` and `sum_n w_n D(t)_nn` without forming `D(t)`.
    fn traces(&self, k: &CMatrix, weights: &DVector<f64>, t: f64) -> (Complex64, Complex64) {
        let (g, w) = self.parts(t);
        let kg = k * &g;
        let gk = &g * k;
        // Tr(K (GW - WG)) = Tr((KG - GK) W)
        let c = trace_product(&(kg - gk), &w);
        let n = weights.len();
        let mut d = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for l in 0..n {
                row += g[(i, l)] * w[(l, i)] - w[(i, l)] * g[(l, i)];
            }
            d += row * weights[i];
        }
        let scale = -I / self.hbar;
        (c * scale, d * scale)
    }
}

/// Correction operator `D(t) = -(i/hbar) [int_0^t F(s) ds, V'(t)]` in the
/// Fock basis, Heisenberg-evolved with the unperturbed Hamiltonian.
pub fn d_operator(
    sys: &SystemSpec,
    spec: &Spectrum,
    f: &OperatorMatrix,
    t: f64,
) -> Result<OperatorMatrix> {
    let kernel = DKernel::new(sys, spec, f)?;
    Ok(OperatorMatrix::hermitian_part(
        &spec.from_eigenbasis(&kernel.eigen_d(t)),
    ))
}

/// Exact reconstruction `C^KV + C^K_AD - <A><D(t)>` with all intermediate
/// series.
pub fn exact_formula_correlator(
    sys: &SystemSpec,
    a: &PolynomialObservable,
    b: &PolynomialObservable,
    stencil: &SourceStencil,
    times: &[f64],
) -> Result<EsmReport> {
    let spec = sys.spectrum()?;
    let (kv, diagnostics) =
        kv_with_diagnostics(sys, &spec, a, &b.antiderivative(), stencil, times)?;

    let a_mat = apply_polynomial(a, &sys.basis)?;
    let f_mat = apply_polynomial(&b.antiderivative(), &sys.basis)?;
    let a_mean = thermal_expectation(&spec, &sys.thermal, &a_mat)?;
    let k = rho_kubo_eigen(&spec, &sys.thermal, &a_mat);
    let weights = DVector::from_vec(boltzmann_weights(&spec, &sys.thermal));
    let kernel = DKernel::new(sys, &spec, &f_mat)?;

    let traces: Vec<(Complex64, Complex64)> = times
        .par_iter()
        .map(|&t| kernel.traces(&k, &weights, t))
        .collect();
    let c_ad: Vec<Complex64> = traces.iter().map(|x| x.0).collect();
    let d_expect: Vec<f64> = traces.iter().map(|x| x.1.re).collect();
    let total: Vec<Complex64> = kv
        .values
        .iter()
        .zip(&c_ad)
        .zip(&d_expect)
        .map(|((kv, cad), d)| kv + cad - a_mean * d)
        .collect();

    let params = kv.params;
    Ok(EsmReport {
        exact_series: Some(CorrelationSeries::new(
            times.to_vec(),
            total,
            Estimator::ExactFormula,
            params,
        )?),
        c_ad_series: Some(CorrelationSeries::new(
            times.to_vec(),
            c_ad,
            Estimator::KuboAD,
            params,
        )?),
        d_expect_series: Some(d_expect),
        kv_series: kv,
        diagnostics,
    })
}

/// Both sides of the momentum identity at zero source, Fock basis:
/// the `nu` central difference of `d p_nu(t)/dt`, and `-B(t) + D(t)`.
pub fn operator_identity_sides(
    sys: &SystemSpec,
    b: &PolynomialObservable,
    t: f64,
    h_nu: f64,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if !(h_nu.is_finite() && h_nu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "h_nu must be > 0, got {h_nu}"
        )));
    }
    let f = b.antiderivative();
    check_source_polys(sys, &[b, &f])?;
    let hbar = sys.hbar();
    let p = momentum(&sys.basis)?.into_entries();

    let rate_at = |nu: f64| -> Result<CMatrix> {
        let (spec, _) = source_spectrum(sys, &f, nu, "H_nu")?;
        let mut pe = spec.to_eigenbasis(&p);
        let e = &spec.eigenvalues;
        let n = spec.dim();
        for i in 0..n {
            for j in 0..n {
                let freq = (e[i] - e[j]) / hbar;
                pe[(i, j)] *= I * freq * Complex64::from_polar(1.0, freq * t);
            }
        }
        Ok(spec.from_eigenbasis(&pe))
    };
    let lhs = (rate_at(h_nu)? - rate_at(-h_nu)?) / Complex64::new(2.0 * h_nu, 0.0);

    let spec = sys.spectrum()?;
    let b_mat = apply_polynomial(b, &sys.basis)?;
    let f_mat = apply_polynomial(&f, &sys.basis)?;
    let kernel = DKernel::new(sys, &spec, &f_mat)?;
    let mut bt = spec.to_eigenbasis(b_mat.entries());
    let e = &spec.eigenvalues;
    let n = spec.dim();
    for i in 0..n {
        for j in 0..n {
            bt[(i, j)] *= Complex64::from_polar(1.0, (e[i] - e[j]) / hbar * t);
        }
    }
    let rhs = kernel.eigen_d(t) - bt;
    Ok((
        OperatorMatrix::new(lhs),
        OperatorMatrix::new(spec.from_eigenbasis(&rhs)),
    ))
}

/// Max-norm mismatch of the momentum identity, measured in the eigenbasis of
/// the unperturbed Hamiltonian over its lowest [`identity_block`] states.
///
/// The truncated `[p, F(q)]` is wrong in the last rows of the Fock basis and
/// the evolution carries that defect into every high-lying state; the
/// low-energy block is what thermal averages see.
pub fn operator_identity_check(
    sys: &SystemSpec,
    b: &PolynomialObservable,
    t: f64,
    h_nu: f64,
) -> Result<f64> {
    let (lhs, rhs) = operator_identity_sides(sys, b, t, h_nu)?;
    let spec = sys.spectrum()?;
    let keep = identity_block(sys);
    let diff = spec.to_eigenbasis(&(lhs.entries() - rhs.entries()));
    Ok(max_abs(&diff.view((0, 0), (keep, keep)).into_owned()))
}

/// Number of low-lying eigenstates on which the momentum identity is compared.
pub fn identity_block(sys: &SystemSpec) -> usize {
    sys.basis.size.div_ceil(4)
}
