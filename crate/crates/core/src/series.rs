use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Which estimator produced a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Direct eigen-sum of the Kubo correlator.
    ExactKubo,
    /// Nonequilibrium momentum expectation `p_{mu nu}(t)`.
    Momentum,
    /// Its time derivative.
    MomentumRate,
    /// Mixed source/time derivative of the momentum expectation.
    MixedDerivative,
    /// Krishna-Voth correlator.
    KrishnaVoth,
    /// Kubo correlator of `A` with the correction operator `D(t)`.
    KuboAD,
    /// Thermal expectation of `D(t)`.
    DExpectation,
    /// Exact reconstruction from the momentum expectation plus `D(t)` terms.
    ExactFormula,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Estimator::ExactKubo => "exact_kubo",
            Estimator::Momentum => "momentum",
            Estimator::MomentumRate => "momentum_rate",
            Estimator::MixedDerivative => "mixed_derivative",
            Estimator::KrishnaVoth => "krishna_voth",
            Estimator::KuboAD => "kubo_ad",
            Estimator::DExpectation => "d_expectation",
            Estimator::ExactFormula => "exact_formula",
        };
        f.write_str(s)
    }
}

/// Parameters recorded alongside a series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SeriesParams {
    pub beta: f64,
    pub basis_size: usize,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub h_mu: Option<f64>,
    pub h_nu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub label: Estimator,
    pub params: SeriesParams,
}

impl CorrelationSeries {
    pub fn new(
        times: Vec<f64>,
        values: Vec<Complex64>,
        label: Estimator,
        params: SeriesParams,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "series length mismatch: {} times, {} values",
                times.len(),
                values.len()
            )));
        }
        check_times(&times)?;
        Ok(CorrelationSeries {
            times,
            values,
            label,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |a, z| a.max(z.im.abs()))
    }

    /// Max absolute deviation from `f(t)`.
    pub fn max_error_vs<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.times
            .iter()
            .zip(&self.values)
            .fold(0.0, |acc, (&t, z)| acc.max((z - f(t)).norm()))
    }

    /// Max absolute pointwise difference to another series on the same grid.
    pub fn max_diff(&self, other: &CorrelationSeries) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("non-finite time".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `t_k = k * t_max / (n_steps - 1)`.
pub fn uniform_grid(t_max: f64, n_steps: usize) -> Vec<f64> {
    assert!(n_steps >= 2, "a time grid needs at least two points");
    let dt = t_max / (n_steps - 1) as f64;
    (0..n_steps).map(|k| k as f64 * dt).collect()
}

/// `sum_k a_k exp(i w_k t)` with a fixed summation order.
#[derive(Debug, Clone, Default)]
pub(crate) struct PhaseSum {
    amps: Vec<Complex64>,
    freqs: Vec<f64>,
}

impl PhaseSum {
    pub fn push(&mut self, amp: Complex64, freq: f64) {
        if amp != Complex64::new(0.0, 0.0) {
            self.amps.push(amp);
            self.freqs.push(freq);
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, &w) in self.amps.iter().zip(&self.freqs) {
            acc += a * Complex64::from_polar(1.0, w * t);
        }
        acc
    }

    /// d/dt of [`PhaseSum::eval`].
    pub fn eval_dt(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, &w) in self.amps.iter().zip(&self.freqs) {
            acc += a * Complex64::new(0.0, w) * Complex64::from_polar(1.0, w * t);
        }
        acc
    }

    pub fn eval_many(&self, times: &[f64]) -> Vec<Complex64> {
        times.par_iter().map(|&t| self.eval(t)).collect()
    }

    pub fn eval_dt_many(&self, times: &[f64]) -> Vec<Complex64> {
        times.par_iter().map(|&t| self.eval_dt(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(10.0, 501);
        assert_eq!(g.len(), 501);
        assert_eq!(g[0], 0.0);
        assert!((g[500] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unsorted_times() {
        let r = CorrelationSeries::new(
            vec![0.0, 0.0],
            vec![Complex64::new(0.0, 0.0); 2],
            Estimator::ExactKubo,
            SeriesParams::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn phase_sum_derivative() {
        let mut s = PhaseSum::default();
        s.push(Complex64::new(0.5, 0.0), 2.0);
        s.push(Complex64::new(0.5, 0.0), -2.0);
        // cos(2t)
        assert!((s.eval(0.3).re - (0.6f64).cos()).abs() < 1e-15);
        assert!((s.eval_dt(0.3).re + 2.0 * (0.6f64).sin()).abs() < 1e-15);
    }
}
