//! The invariant suite behind `kubo verify`.

use std::fmt;

use kubo_core::identities::{boltzmann_source_check, density_source_check, partition_source_check};
use kubo_core::oracle::{oracle_kubo_qq, oracle_kv, RATIO_EXCLUSION};
use kubo_core::{
    apply_polynomial, d_operator, exact_formula_correlator, kv_correlator,
    kv_correlator_from_source, mixed_derivative_with_diagnostics, operator_identity_check,
    HarmonicParams, NuMode, PolynomialObservable, Result as CoreResult, TAIL_WEIGHT_LIMIT,
};

use crate::config::RunConfig;
use crate::runner::{exact_series, RunResult};

/// Source step of the finite-difference identity checks.
pub const IDENTITY_STEP: f64 = 1e-4;
/// Time at which the momentum identity is compared.
pub const IDENTITY_TIME: f64 = 1.0;
/// Inverse temperatures of the ratio check.
pub const RATIO_BETAS: [f64; 3] = [0.5, 1.0, 2.0];
/// Constants added to the source operator in the gauge check.
pub const GAUGE_SHIFTS: [f64; 3] = [-1.0, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "skipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub tolerance: f64,
    /// NaN when skipped or when the computation itself failed.
    pub observed: f64,
    pub status: CheckStatus,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Human-readable table preceded by the config snapshot as `#` lines.
    pub fn render(&self, cfg: &RunConfig) -> String {
        let mut s = String::from("# kubo verify\n# config:\n");
        for line in cfg.snapshot().lines() {
            s.push_str(&format!("# {line}\n"));
        }
        s.push_str(&format!(
            "{:<32} {:>10} {:>10}  {}\n",
            "check", "tolerance", "observed", "status"
        ));
        for c in &self.checks {
            let observed = if c.observed.is_nan() {
                "-".to_string()
            } else {
                format!("{:.3e}", c.observed)
            };
            s.push_str(&format!(
                "{:<32} {:>10} {:>10}  {}",
                c.name,
                format!("{:.1e}", c.tolerance),
                observed,
                c.status
            ));
            if !c.note.is_empty() {
                s.push_str(&format!("  ({})", c.note));
            }
            s.push('\n');
        }
        s.push_str(&format!(
            "{} passed, {} failed, {} skipped\n",
            self.count(CheckStatus::Pass),
            self.failures(),
            self.count(CheckStatus::Skipped)
        ));
        s
    }

    fn count(&self, status: CheckStatus) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }

    fn push(&mut self, name: &'static str, tolerance: f64, observed: CoreResult<f64>) {
        self.push_with_note(name, tolerance, observed.map(|o| (o, String::new())));
    }

    fn push_with_note(
        &mut self,
        name: &'static str,
        tolerance: f64,
        observed: CoreResult<(f64, String)>,
    ) {
        let check = match observed {
            Ok((observed, note)) => Check {
                name,
                tolerance,
                observed,
                status: if observed <= tolerance {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                },
                note,
            },
            Err(e) => Check {
                name,
                tolerance,
                observed: f64::NAN,
                status: CheckStatus::Fail,
                note: e.to_string(),
            },
        };
        self.checks.push(check);
    }

    fn skip(&mut self, name: &'static str, tolerance: f64, why: &str) {
        self.checks.push(Check {
            name,
            tolerance,
            observed: f64::NAN,
            status: CheckStatus::Skipped,
            note: why.into(),
        });
    }
}

fn core<T>(r: RunResult<T>) -> CoreResult<T> {
    r.map_err(|e| match e {
        crate::runner::RunError::Numerical(e) => e,
        other => kubo_core::Error::InvalidParameter(other.to_string()),
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `C^KV / C^K` at the grid points with `|cos wt|` above the exclusion.
fn masked_ratio(hp: &HarmonicParams, times: &[f64], kv: &[f64], exact: &[f64]) -> Vec<f64> {
    times
        .iter()
        .zip(kv.iter().zip(exact))
        .filter(|(t, _)| (hp.omega * **t).cos().abs() >= RATIO_EXCLUSION)
        .map(|(_, (k, e))| k / e)
        .collect()
}

/// Runs every applicable check. Numerical errors inside a check become a
/// failed row rather than an early return.
pub fn run_verify(cfg: &RunConfig) -> RunResult<VerifyReport> {
    let sys = cfg.system_spec()?;
    let (a, b) = (cfg.a(), cfg.b());
    let f = b.antiderivative();
    let stencil = cfg.stencil();
    let times = cfg.times();
    let mut report = VerifyReport::default();

    let direct = core(exact_series(cfg));
    let formula = exact_formula_correlator(&sys, &a, &b, &stencil, &times);

    report.push(
        "realness",
        1e-10,
        direct.as_ref().map(|d| d.max_imag()).map_err(Clone::clone),
    );

    let stationarity = (|| {
        let mut swapped = cfg.clone();
        swapped.esm.a_coeffs = cfg.esm.b_coeffs.clone();
        swapped.esm.b_coeffs = cfg.esm.a_coeffs.clone();
        let backward: Vec<f64> = times.iter().rev().map(|t| -t).collect();
        let sys_s = swapped.system_spec()?;
        let spec = sys_s.spectrum()?;
        let am = apply_polynomial(&swapped.a(), &sys_s.basis)?;
        let bm = apply_polynomial(&swapped.b(), &sys_s.basis)?;
        let ba_back =
            kubo_core::kubo_correlator(&spec, &sys_s.thermal, &am, &bm, &backward, sys_s.hbar())?;
        let ab = direct.clone()?;
        let scale = ab.max_abs().max(1.0);
        Ok(ab
            .values
            .iter()
            .zip(ba_back.values.iter().rev())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            / scale)
    })();
    report.push("stationarity", 1e-12, stationarity);

    report.push(
        "short_time_exactness",
        1e-4,
        formula.as_ref().map_err(Clone::clone).and_then(|r| {
            let d = direct.clone()?;
            Ok((r.kv_series.values[0] - d.values[0]).norm())
        }),
    );

    report.push(
        "secular_cancellation",
        1e-6,
        formula.as_ref().map_err(Clone::clone).and_then(|r| {
            let d = direct.clone()?;
            Ok(r.exact_series.as_ref().expect("formula total").max_diff(&d))
        }),
    );

    let d_zero = (|| {
        let spec = sys.spectrum()?;
        let fm = apply_polynomial(&f, &sys.basis)?;
        Ok(d_operator(&sys, &spec, &fm, 0.0)?.max_abs())
    })();
    report.push("d_zero", 1e-12, d_zero);

    let gauge = (|| {
        let grid = &times;
        let base = kv_correlator(&sys, &a, &b, &stencil, grid)?;
        let scale = base.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for c in GAUGE_SHIFTS {
            let shifted = f.add_scaled(&PolynomialObservable::constant(1.0), c);
            let other = kv_correlator_from_source(&sys, &a, &shifted, &stencil, grid)?;
            worst = worst.max(base.max_diff(&other) / scale);
        }
        Ok(worst)
    })();
    report.push("gauge_invariance", 1e-10, gauge);

    report.push(
        "boltzmann_source_derivative",
        1e-6,
        boltzmann_source_check(&sys, &a, IDENTITY_STEP).map(|r| r.relative()),
    );
    report.push(
        "partition_source_derivative",
        1e-6,
        partition_source_check(&sys, &a, IDENTITY_STEP).map(|r| r.relative()),
    );
    report.push(
        "density_source_derivative",
        1e-6,
        density_source_check(&sys, &a, IDENTITY_STEP).map(|r| r.abs),
    );
    report.push(
        "momentum_identity",
        1e-5,
        operator_identity_check(&sys, &b, IDENTITY_TIME, IDENTITY_STEP),
    );

    let agreement = (|| {
        let mut fd = stencil;
        fd.nu_mode = NuMode::Fd;
        let mut semi = stencil;
        semi.nu_mode = NuMode::SemianalyticMu;
        let (x, dx) = mixed_derivative_with_diagnostics(&sys, &a, &b, &fd, &times)?;
        let (y, dy) = mixed_derivative_with_diagnostics(&sys, &a, &b, &semi, &times)?;
        let bound = dx.fd_error_estimate + dy.fd_error_estimate + 1e-9;
        Ok((x.max_diff(&y), bound))
    })();
    match agreement {
        Ok((diff, bound)) => report.push("fd_semianalytic_agreement", bound, Ok(diff)),
        Err(e) => report.push("fd_semianalytic_agreement", f64::NAN, Err(e)),
    }

    report.push_with_note(
        "stability",
        TAIL_WEIGHT_LIMIT,
        formula.as_ref().map_err(Clone::clone).map(|r| {
            let stab = &r.diagnostics.stability;
            let worst = stab.iter().map(|s| s.tail_weight).fold(0.0, f64::max);
            let failed = stab.iter().any(|s| !s.passed());
            let notes = stab
                .iter()
                .filter(|s| !s.notes.is_empty())
                .map(|s| format!("{}: {}", s.label, s.notes.join("; ")))
                .collect::<Vec<_>>()
                .join("; ");
            (if failed { f64::INFINITY } else { worst }, notes)
        }),
    );

    harmonic_checks(cfg, &times, &direct, &formula, &mut report);
    Ok(report)
}

const HARMONIC_ONLY: &str = "harmonic A = B = q only";

fn harmonic_checks(
    cfg: &RunConfig,
    times: &[f64],
    direct: &CoreResult<kubo_core::CorrelationSeries>,
    formula: &CoreResult<kubo_core::EsmReport>,
    report: &mut VerifyReport,
) {
    let names = [
        ("harmonic_exact_oracle", 1e-8),
        ("harmonic_kv_oracle", 1e-4),
        ("harmonic_d_expectation", 1e-10),
        ("ratio_temperature_independence", 1e-8),
        ("ratio_pipeline", 1e-8),
    ];
    let hp = match cfg.harmonic_params().filter(|_| cfg.is_harmonic_qq()) {
        Some(hp) => hp,
        None => {
            for (name, tol) in names {
                report.skip(name, tol, HARMONIC_ONLY);
            }
            return;
        }
    };

    report.push(
        "harmonic_exact_oracle",
        1e-8,
        direct
            .as_ref()
            .map(|d| d.max_error_vs(|t| oracle_kubo_qq(&hp, t)))
            .map_err(Clone::clone),
    );
    report.push(
        "harmonic_kv_oracle",
        1e-4,
        formula
            .as_ref()
            .map(|r| r.kv_series.max_error_vs(|t| oracle_kv(&hp, t).value))
            .map_err(Clone::clone),
    );
    report.push(
        "harmonic_d_expectation",
        1e-10,
        formula
            .as_ref()
            .map(|r| {
                r.d_expect_series
                    .as_ref()
                    .expect("formula report carries <D>")
                    .iter()
                    .fold(0.0, |m: f64, d| m.max(d.abs()))
            })
            .map_err(Clone::clone),
    );

    // Closed-form ratio evaluated independently at each temperature.
    let closed: Vec<Vec<f64>> = RATIO_BETAS
        .iter()
        .map(|&beta| {
            let hb = hp.with_beta(beta);
            let kv: Vec<f64> = times.iter().map(|&t| oracle_kv(&hb, t).value).collect();
            let ck: Vec<f64> = times.iter().map(|&t| oracle_kubo_qq(&hb, t)).collect();
            masked_ratio(&hb, times, &kv, &ck)
        })
        .collect();
    let spread = closed
        .iter()
        .map(|r| max_abs_diff(r, &closed[1]))
        .fold(0.0, f64::max);
    report.push("ratio_temperature_independence", 1e-8, Ok(spread));

    // Same ratio from the numerical pipeline, weighted by |cos wt| so that
    // points near the poles of tan do not amplify the correlator error.
    let pipeline = (|| {
        let mut worst: f64 = 0.0;
        let mut reference: Option<Vec<f64>> = None;
        for beta in RATIO_BETAS {
            let mut c = cfg.clone();
            c.thermo.beta = beta;
            let sys = c.system_spec()?;
            let kv = kv_correlator(&sys, &c.a(), &c.b(), &c.stencil(), times)?.real();
            let ck = core(exact_series(&c))?.real();
            let weighted: Vec<f64> = times
                .iter()
                .zip(kv.iter().zip(&ck))
                .map(|(t, (k, e))| {
                    let cos = (hp.omega * t).cos();
                    if cos.abs() < RATIO_EXCLUSION {
                        0.0
                    } else {
                        k / e * cos.abs()
                    }
                })
                .collect();
            match &reference {
                None => reference = Some(weighted),
                Some(r) => worst = worst.max(max_abs_diff(r, &weighted)),
            }
        }
        Ok(worst)
    })();
    report.push("ratio_pipeline", 1e-8, pipeline);
}
