//! The `exact`, `esm`, `oracle` and `scan` experiments.

use std::io;
use std::path::PathBuf;
use std::time::Instant;

use kubo_core::oracle::{
    oracle_ckad, oracle_kubo_qq, oracle_kv, oracle_mixed_derivative, oracle_ratio, RATIO_EXCLUSION,
};
use kubo_core::{
    apply_polynomial, exact_formula_correlator, kubo_correlator, kv_correlator, CorrelationSeries,
    Diagnostics, Error as CoreError,
};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, ScanAxis, ScanConfig};
use crate::table::Table;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Numerical(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{failed} verify check(s) failed")]
    VerifyFailed { failed: usize },
}

impl RunError {
    /// 1 usage/parse, 2 validation, 3 numerical failure, 4 verify failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Validation(_)) => 2,
            RunError::Config(_) | RunError::Io { .. } => 1,
            RunError::Numerical(e) => match e {
                CoreError::InvalidBasis(_)
                | CoreError::PadTooSmall { .. }
                | CoreError::InvalidParameter(_)
                | CoreError::UnstableNu { .. }
                | CoreError::DimMismatch { .. } => 2,
                CoreError::NotHermitian { .. }
                | CoreError::NoConvergence { .. }
                | CoreError::StabilityFailure(_)
                | CoreError::StencilDegenerate { .. } => 3,
            },
            RunError::VerifyFailed { .. } => 4,
        }
    }
}

pub type RunResult<T> = Result<T, RunError>;

fn header(command: &str, cfg: &RunConfig) -> Table {
    let mut t = Table::default();
    t.meta.push(format!("kubo {command}"));
    t.meta.push("config:".into());
    t.push_meta_block(&cfg.snapshot());
    t
}

fn diagnostics_meta(t: &mut Table, d: &Diagnostics) {
    t.meta.push("diagnostics:".into());
    for s in &d.stability {
        t.meta.push(format!("stability {s}"));
    }
    t.meta
        .push(format!("step_halving_change = {:e}", d.step_halving_change));
    t.meta
        .push(format!("fd_error_estimate = {:e}", d.fd_error_estimate));
    for n in &d.notes {
        t.meta.push(format!("note: {n}"));
    }
}

/// Direct eigen-sum `C^K_AB(t)` on the config's time grid.
pub fn exact_series(cfg: &RunConfig) -> RunResult<CorrelationSeries> {
    let sys = cfg.system_spec()?;
    let spec = sys.spectrum()?;
    let a = apply_polynomial(&cfg.a(), &sys.basis)?;
    let b = apply_polynomial(&cfg.b(), &sys.basis)?;
    Ok(kubo_correlator(
        &spec,
        &sys.thermal,
        &a,
        &b,
        &cfg.times(),
        sys.hbar(),
    )?)
}

/// Columns `t, c_exact_re, c_exact_im`.
pub fn run_exact(cfg: &RunConfig) -> RunResult<Table> {
    let series = exact_series(cfg)?;
    let mut t = header("exact", cfg);
    t.columns = ["t", "c_exact_re", "c_exact_im"].map(String::from).to_vec();
    for (time, c) in series.times.iter().zip(&series.values) {
        t.push_row(vec![*time, c.re, c.im]);
    }
    Ok(t)
}

/// Columns `t, c_kv, c_ad, d_expect, c_exact_formula, c_exact_direct,
/// err_kv, err_formula`; the errors are absolute differences from the
/// direct correlator.
pub fn run_esm(cfg: &RunConfig) -> RunResult<Table> {
    let sys = cfg.system_spec()?;
    let times = cfg.times();
    let report = exact_formula_correlator(&sys, &cfg.a(), &cfg.b(), &cfg.stencil(), &times)?;
    let direct = exact_series(cfg)?;
    let c_ad = report
        .c_ad_series
        .as_ref()
        .expect("formula report carries C_AD");
    let d_expect = report
        .d_expect_series
        .as_ref()
        .expect("formula report carries <D>");
    let formula = report
        .exact_series
        .as_ref()
        .expect("formula report carries the total");

    let mut t = header("esm", cfg);
    diagnostics_meta(&mut t, &report.diagnostics);
    t.columns = [
        "t",
        "c_kv",
        "c_ad",
        "d_expect",
        "c_exact_formula",
        "c_exact_direct",
        "err_kv",
        "err_formula",
    ]
    .map(String::from)
    .to_vec();
    for k in 0..times.len() {
        let kv = report.kv_series.values[k].re;
        let exact = direct.values[k].re;
        let total = formula.values[k].re;
        t.push_row(vec![
            times[k],
            kv,
            c_ad.values[k].re,
            d_expect[k],
            total,
            exact,
            (kv - exact).abs(),
            (total - exact).abs(),
        ]);
    }
    Ok(t)
}

/// Closed-form harmonic references for `A = B = q`. `ratio` is NaN where
/// `|cos wt|` is below the exclusion threshold.
pub fn run_oracle(cfg: &RunConfig) -> RunResult<Table> {
    let hp = cfg.harmonic_params().ok_or_else(|| {
        ConfigError::Validation("oracle needs a harmonic potential c + k q^2 with k > 0".into())
    })?;
    let mut t = header("oracle", cfg);
    t.meta.push("observables: A = B = q".into());
    t.columns = [
        "t",
        "c_kubo",
        "mixed_derivative",
        "c_ad",
        "c_kv",
        "kv_envelope",
        "kv_phase",
        "ratio",
    ]
    .map(String::from)
    .to_vec();
    for time in cfg.times() {
        let kv = oracle_kv(&hp, time);
        let wt = hp.omega * time;
        let ratio = if wt.cos().abs() < RATIO_EXCLUSION {
            f64::NAN
        } else {
            oracle_ratio(wt)
        };
        t.push_row(vec![
            time,
            oracle_kubo_qq(&hp, time),
            oracle_mixed_derivative(&hp, time),
            oracle_ckad(&hp, time),
            kv.value,
            kv.envelope,
            kv.phase,
            ratio,
        ]);
    }
    Ok(t)
}

fn kv_series(cfg: &RunConfig) -> RunResult<CorrelationSeries> {
    let sys = cfg.system_spec()?;
    Ok(kv_correlator(
        &sys,
        &cfg.a(),
        &cfg.b(),
        &cfg.stencil(),
        &cfg.times(),
    )?)
}

/// One row per axis value: the value, max-abs error of `Re C^KV` against the
/// harmonic closed form (harmonic `A = B = q`) or against a run at
/// `reference_n`, and the wall time of the `C^KV` evaluation.
pub fn run_scan(scan: &ScanConfig) -> RunResult<Table> {
    let mut with_scan = scan.base.clone();
    with_scan.scan = Some(crate::config::ScanSection {
        axis: scan.axis,
        values: scan.values.clone(),
        reference_n: scan.reference_n,
    });
    let mut t = header("scan", &with_scan);
    let reference = if scan.base.is_harmonic_qq() {
        "harmonic closed form".to_string()
    } else {
        format!("run at basis n = {}", scan.reference_n)
    };
    t.meta.push(format!("reference: {reference}"));
    t.columns = vec![
        scan.axis.to_string(),
        "max_abs_err".into(),
        "wall_time_s".into(),
    ];

    let mut shared_reference: Option<CorrelationSeries> = None;
    for &value in &scan.values {
        let mut cfg = scan.base.clone();
        cfg.set_axis(scan.axis, value)?;
        let start = Instant::now();
        let kv = kv_series(&cfg)?;
        let wall = start.elapsed().as_secs_f64();

        let err = match cfg.harmonic_params().filter(|_| cfg.is_harmonic_qq()) {
            Some(hp) => kv
                .times
                .iter()
                .zip(kv.real())
                .map(|(&time, v)| (v - oracle_kv(&hp, time).value).abs())
                .fold(0.0, f64::max),
            None => {
                let mut ref_cfg = cfg.clone();
                ref_cfg.basis.n = scan.reference_n;
                let reference = if scan.axis == ScanAxis::BasisN {
                    match &shared_reference {
                        Some(r) => r.clone(),
                        None => shared_reference.insert(kv_series(&ref_cfg)?).clone(),
                    }
                } else {
                    kv_series(&ref_cfg)?
                };
                kv.real()
                    .iter()
                    .zip(reference.real())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            }
        };
        t.push_row(vec![value, err, wall]);
    }
    Ok(t)
}
