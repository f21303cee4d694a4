//! Closed-form harmonic-oscillator references.
//!
//! For `V = m w^2 q^2 / 2` with `A = q` and `B = q` (so `F = q^2/2`), every
//! quantity entering the external-source construction has a closed form.

use crate::error::{Error, Result};
use crate::operator::OperatorMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicParams {
    pub mass: f64,
    pub omega: f64,
    pub beta: f64,
    pub hbar: f64,
}

impl HarmonicParams {
    pub fn new(mass: f64, omega: f64, beta: f64, hbar: f64) -> Result<Self> {
        for (name, v) in [
            ("mass", mass),
            ("omega", omega),
            ("beta", beta),
            ("hbar", hbar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(HarmonicParams {
            mass,
            omega,
            beta,
            hbar,
        })
    }

    pub fn unit() -> Self {
        HarmonicParams {
            mass: 1.0,
            omega: 1.0,
            beta: 1.0,
            hbar: 1.0,
        }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        HarmonicParams { beta, ..self }
    }

    fn classical_amplitude(&self) -> f64 {
        1.0 / (self.beta * self.mass * self.omega * self.omega)
    }
}

/// Exact Kubo autocorrelation of position: `cos(wt) / (beta m w^2)`.
pub fn oracle_kubo_qq(hp: &HarmonicParams, t: f64) -> f64 {
    hp.classical_amplitude() * (hp.omega * t).cos()
}

/// `p_{mu nu}(t) = (mu W / w^2) sin(W t)` with `W = sqrt(w^2 + nu/m)`.
pub fn oracle_p_munu(hp: &HarmonicParams, mu: f64, nu: f64, t: f64) -> Result<f64> {
    let limit = -hp.mass * hp.omega * hp.omega;
    if nu <= limit {
        return Err(Error::UnstableNu { nu, limit });
    }
    let big = (hp.omega * hp.omega + nu / hp.mass).sqrt();
    Ok(mu * big / (hp.omega * hp.omega) * (big * t).sin())
}

/// `d p_{mu nu} / dt = (mu W^2 / w^2) cos(W t)`.
pub fn oracle_p_munu_dt(hp: &HarmonicParams, mu: f64, nu: f64, t: f64) -> Result<f64> {
    let limit = -hp.mass * hp.omega * hp.omega;
    if nu <= limit {
        return Err(Error::UnstableNu { nu, limit });
    }
    let big2 = hp.omega * hp.omega + nu / hp.mass;
    Ok(mu * big2 / (hp.omega * hp.omega) * (big2.sqrt() * t).cos())
}

/// Mixed derivative at zero sources: `cos(wt)/(m w^2) - t sin(wt)/(2 m w)`.
pub fn oracle_mixed_derivative(hp: &HarmonicParams, t: f64) -> f64 {
    let wt = hp.omega * t;
    wt.cos() / (hp.mass * hp.omega * hp.omega) - t * wt.sin() / (2.0 * hp.mass * hp.omega)
}

/// `C^K_{qD}(t) = t sin(wt) / (2 beta m w)`.
pub fn oracle_ckad(hp: &HarmonicParams, t: f64) -> f64 {
    t * (hp.omega * t).sin() / (2.0 * hp.beta * hp.mass * hp.omega)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KvOracle {
    pub value: f64,
    pub envelope: f64,
    pub phase: f64,
}

impl KvOracle {
    /// `envelope * cos(wt + phase)`.
    pub fn recombine(&self, omega: f64, t: f64) -> f64 {
        self.envelope * (omega * t + self.phase).cos()
    }
}

/// Krishna-Voth position autocorrelation with its envelope/phase form.
pub fn oracle_kv(hp: &HarmonicParams, t: f64) -> KvOracle {
    let wt = hp.omega * t;
    let amp = hp.classical_amplitude();
    KvOracle {
        value: amp * wt.cos() - t * wt.sin() / (2.0 * hp.beta * hp.mass * hp.omega),
        envelope: amp * (1.0 + wt * wt / 4.0).sqrt(),
        phase: (wt / 2.0).atan(),
    }
}

/// `C^KV / C^K = 1 - (wt/2) tan(wt)`; depends on `wt` only.
pub fn oracle_ratio(omega_t: f64) -> f64 {
    1.0 - omega_t / 2.0 * omega_t.tan()
}

/// Points with `|cos(wt)|` below this are excluded from ratio comparisons.
pub const RATIO_EXCLUSION: f64 = 1e-6;

/// `D(t) = q0 (wt sin wt)/2 + p0 (sin wt - wt cos wt)/(2 m w)`.
pub fn oracle_d_matrix(
    hp: &HarmonicParams,
    t: f64,
    q0: &OperatorMatrix,
    p0: &OperatorMatrix,
) -> Result<OperatorMatrix> {
    let wt = hp.omega * t;
    let cq = wt * wt.sin() / 2.0;
    let cp = (wt.sin() - wt * wt.cos()) / (2.0 * hp.mass * hp.omega);
    q0.scale(cq).add_scaled(p0, cp)
}
