//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [system]
//! potential = 0 0 0.5 0.1 0.01
//! [basis]
//! n = 80
//! ```
//!
//! Every key has a default, so an empty file describes the unit harmonic
//! oscillator with `A = B = q`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use kubo_core::{
    uniform_grid, BasisSpec, HarmonicParams, NuMode, PolynomialObservable, Scheme, SourceStencil,
    SystemSpec, ThermalParams,
};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("--set {arg}: {msg}")]
    Override { arg: String, msg: String },

    #[error("invalid config: {0}")]
    Validation(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSection {
    pub mass: f64,
    pub hbar: f64,
    pub ref_frequency: f64,
    pub potential: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermoSection {
    pub beta: f64,
    pub kb: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSection {
    pub n: usize,
    /// `None` picks the smallest pad that every polynomial needs.
    pub build_pad: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsmSection {
    pub a_coeffs: Vec<f64>,
    pub b_coeffs: Vec<f64>,
    pub h_mu: f64,
    pub h_nu: f64,
    pub scheme: Scheme,
    pub nu_mode: NuMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSection {
    pub t_max: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub path: Option<String>,
    pub precision: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    BasisN,
    HMu,
    HNu,
    Beta,
}

impl fmt::Display for ScanAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanAxis::BasisN => "basis_n",
            ScanAxis::HMu => "h_mu",
            ScanAxis::HNu => "h_nu",
            ScanAxis::Beta => "beta",
        })
    }
}

impl FromStr for ScanAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "basis_n" => Ok(ScanAxis::BasisN),
            "h_mu" => Ok(ScanAxis::HMu),
            "h_nu" => Ok(ScanAxis::HNu),
            "beta" => Ok(ScanAxis::Beta),
            _ => Err(format!(
                "unknown scan axis '{s}' (expected basis_n, h_mu, h_nu or beta)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSection {
    pub axis: ScanAxis,
    pub values: Vec<f64>,
    /// Basis size of the reference run when no closed form applies.
    pub reference_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemSection,
    pub thermo: ThermoSection,
    pub basis: BasisSection,
    pub esm: EsmSection,
    pub time: TimeSection,
    pub output: OutputSection,
    pub scan: Option<ScanSection>,
}

/// A [`RunConfig`] together with the axis it sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub base: RunConfig,
    pub axis: ScanAxis,
    pub values: Vec<f64>,
    pub reference_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemSection {
                mass: 1.0,
                hbar: 1.0,
                ref_frequency: 1.0,
                potential: vec![0.0, 0.0, 0.5],
            },
            thermo: ThermoSection { beta: 1.0, kb: 1.0 },
            basis: BasisSection {
                n: 60,
                build_pad: None,
            },
            esm: EsmSection {
                a_coeffs: vec![0.0, 1.0],
                b_coeffs: vec![0.0, 1.0],
                h_mu: 1e-3,
                h_nu: 1e-3,
                scheme: Scheme::Central2Richardson,
                nu_mode: NuMode::Fd,
            },
            time: TimeSection {
                t_max: 10.0,
                n_steps: 501,
            },
            output: OutputSection {
                path: None,
                precision: 17,
            },
            scan: None,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("system", &["mass", "hbar", "ref_frequency", "potential"]),
    ("thermo", &["beta", "kB"]),
    ("basis", &["n", "build_pad"]),
    (
        "esm",
        &["a_coeffs", "b_coeffs", "h_mu", "h_nu", "scheme", "nu_mode"],
    ),
    ("time", &["t_max", "n_steps"]),
    ("output", &["path", "precision"]),
    ("scan", &["axis", "values", "reference_n"]),
];

fn known_key(section: &str, key: &str) -> Result<(), String> {
    match KEYS.iter().find(|(s, _)| *s == section) {
        None => Err(format!("unknown section [{section}]")),
        Some((_, keys)) if !keys.contains(&key) => {
            Err(format!("unknown key '{key}' in [{section}]"))
        }
        Some(_) => Ok(()),
    }
}

/// Where a raw value came from, for error messages.
#[derive(Debug, Clone)]
enum Origin {
    Line(usize),
    Set(String),
}

impl Origin {
    fn error(&self, msg: String) -> ConfigError {
        match self {
            Origin::Line(line) => ConfigError::Parse { line: *line, msg },
            Origin::Set(arg) => ConfigError::Override {
                arg: arg.clone(),
                msg,
            },
        }
    }
}

type RawEntries = BTreeMap<(String, String), (String, Origin)>;

fn unquote(v: &str) -> &str {
    let v = v.trim();
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .or_else(|| v.strip_prefix('\'').and_then(|s| s.strip_suffix('\'')))
        .unwrap_or(v)
}

fn lex(text: &str) -> Result<RawEntries, ConfigError> {
    let mut entries = RawEntries::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Parse {
                    line,
                    msg: format!("malformed section header '{content}'"),
                })?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("unknown section [{name}]"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            msg: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = key.trim();
        let sec = section.as_deref().ok_or_else(|| ConfigError::Parse {
            line,
            msg: format!("key '{key}' appears before any [section]"),
        })?;
        known_key(sec, key).map_err(|msg| ConfigError::Parse { line, msg })?;
        let slot = (sec.to_string(), key.to_string());
        if let Some((_, Origin::Line(first))) = entries.get(&slot) {
            return Err(ConfigError::Parse {
                line,
                msg: format!("duplicate key '{key}' in [{sec}] (first set on line {first})"),
            });
        }
        entries.insert(slot, (unquote(value).to_string(), Origin::Line(line)));
    }
    Ok(entries)
}

fn apply_overrides(entries: &mut RawEntries, overrides: &[String]) -> Result<(), ConfigError> {
    for arg in overrides {
        let err = |msg: String| ConfigError::Override {
            arg: arg.clone(),
            msg,
        };
        let (path, value) = arg
            .split_once('=')
            .ok_or_else(|| err("expected section.key=value".into()))?;
        let (sec, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| err("expected section.key=value".into()))?;
        known_key(sec, key).map_err(err)?;
        entries.insert(
            (sec.to_string(), key.to_string()),
            (unquote(value).to_string(), Origin::Set(arg.clone())),
        );
    }
    Ok(())
}

fn parse_num<T: FromStr>(v: &str, origin: &Origin, key: &str) -> Result<T, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| origin.error(format!("{key}: cannot parse '{}' as a number", v.trim())))
}

fn parse_list(v: &str, origin: &Origin, key: &str) -> Result<Vec<f64>, ConfigError> {
    v.split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| origin.error(format!("{key}: non-numeric token '{tok}'")))
        })
        .collect()
}

fn parse_scheme(v: &str) -> Option<Scheme> {
    match v {
        "central2" => Some(Scheme::Central2),
        "central2_richardson" => Some(Scheme::Central2Richardson),
        _ => None,
    }
}

fn parse_nu_mode(v: &str) -> Option<NuMode> {
    match v {
        "fd" => Some(NuMode::Fd),
        "semianalytic_mu" => Some(NuMode::SemianalyticMu),
        _ => None,
    }
}

fn assign(
    cfg: &mut RunConfig,
    sec: &str,
    key: &str,
    v: &str,
    origin: &Origin,
) -> Result<(), ConfigError> {
    let scan = || ScanSection {
        axis: ScanAxis::BasisN,
        values: Vec::new(),
        reference_n: 100,
    };
    match (sec, key) {
        ("system", "mass") => cfg.system.mass = parse_num(v, origin, key)?,
        ("system", "hbar") => cfg.system.hbar = parse_num(v, origin, key)?,
        ("system", "ref_frequency") => cfg.system.ref_frequency = parse_num(v, origin, key)?,
        ("system", "potential") => cfg.system.potential = parse_list(v, origin, key)?,
        ("thermo", "beta") => cfg.thermo.beta = parse_num(v, origin, key)?,
        ("thermo", "kB") => cfg.thermo.kb = parse_num(v, origin, key)?,
        ("basis", "n") => cfg.basis.n = parse_num(v, origin, key)?,
        ("basis", "build_pad") => {
            cfg.basis.build_pad = match v.trim() {
                "auto" => None,
                s => Some(parse_num(s, origin, key)?),
            }
        }
        ("esm", "a_coeffs") => cfg.esm.a_coeffs = parse_list(v, origin, key)?,
        ("esm", "b_coeffs") => cfg.esm.b_coeffs = parse_list(v, origin, key)?,
        ("esm", "h_mu") => cfg.esm.h_mu = parse_num(v, origin, key)?,
        ("esm", "h_nu") => cfg.esm.h_nu = parse_num(v, origin, key)?,
        ("esm", "scheme") => {
            cfg.esm.scheme = parse_scheme(v.trim()).ok_or_else(|| {
                origin.error(format!(
                    "scheme: unknown '{v}' (expected central2 or central2_richardson)"
                ))
            })?
        }
        ("esm", "nu_mode") => {
            cfg.esm.nu_mode = parse_nu_mode(v.trim()).ok_or_else(|| {
                origin.error(format!(
                    "nu_mode: unknown '{v}' (expected fd or semianalytic_mu)"
                ))
            })?
        }
        ("time", "t_max") => cfg.time.t_max = parse_num(v, origin, key)?,
        ("time", "n_steps") => cfg.time.n_steps = parse_num(v, origin, key)?,
        ("output", "path") => cfg.output.path = Some(v.to_string()).filter(|p| !p.is_empty()),
        ("output", "precision") => cfg.output.precision = parse_num(v, origin, key)?,
        ("scan", "axis") => {
            cfg.scan.get_or_insert_with(scan).axis =
                v.trim().parse().map_err(|m: String| origin.error(m))?
        }
        ("scan", "values") => {
            cfg.scan.get_or_insert_with(scan).values = parse_list(v, origin, key)?
        }
        ("scan", "reference_n") => {
            cfg.scan.get_or_insert_with(scan).reference_n = parse_num(v, origin, key)?
        }
        _ => return Err(origin.error(format!("unknown key '{key}' in [{sec}]"))),
    }
    Ok(())
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// Parses `text`, applies `section.key=value` overrides, then validates.
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[String],
) -> Result<RunConfig, ConfigError> {
    let mut entries = lex(text)?;
    apply_overrides(&mut entries, overrides)?;
    let mut cfg = RunConfig::default();
    for ((sec, key), (value, origin)) in &entries {
        assign(&mut cfg, sec, key, value, origin)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn positive(name: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} > 0 (got {x})")))
    }
}

fn finite_list(name: &str, xs: &[f64]) -> Result<(), ConfigError> {
    if xs.is_empty() {
        return Err(invalid(format!(
            "{name} must list at least one coefficient"
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{name} coefficients must be finite")));
    }
    Ok(())
}

impl RunConfig {
    /// Checks every invariant the runners rely on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("system.mass", self.system.mass)?;
        positive("system.hbar", self.system.hbar)?;
        positive("system.ref_frequency", self.system.ref_frequency)?;
        finite_list("system.potential", &self.system.potential)?;
        if !self.potential().is_bounded_below() {
            return Err(invalid("system.potential must be bounded below"));
        }
        positive("thermo.beta", self.thermo.beta)?;
        positive("thermo.kB", self.thermo.kb)?;
        if self.basis.n < 2 {
            return Err(invalid(format!("basis.n: size ≥ 2 (got {})", self.basis.n)));
        }
        finite_list("esm.a_coeffs", &self.esm.a_coeffs)?;
        finite_list("esm.b_coeffs", &self.esm.b_coeffs)?;
        let required = self.required_pad();
        if let Some(pad) = self.basis.build_pad {
            if pad < required {
                return Err(invalid(format!(
                    "basis.build_pad: PadTooSmall (pad {pad} < required {required}, the largest polynomial degree)"
                )));
            }
        }
        positive("esm.h_mu", self.esm.h_mu)?;
        positive("esm.h_nu", self.esm.h_nu)?;
        positive("time.t_max", self.time.t_max)?;
        if self.time.n_steps < 2 {
            return Err(invalid(format!(
                "time.n_steps ≥ 2 (got {})",
                self.time.n_steps
            )));
        }
        if !(1..=17).contains(&self.output.precision) {
            return Err(invalid(format!(
                "output.precision in 1..=17 (got {})",
                self.output.precision
            )));
        }
        if let Some(scan) = &self.scan {
            if scan.values.is_empty() {
                return Err(invalid("scan.values must be nonempty"));
            }
            if scan.reference_n < 2 {
                return Err(invalid(format!(
                    "scan.reference_n ≥ 2 (got {})",
                    scan.reference_n
                )));
            }
            for &v in &scan.values {
                let mut probe = self.clone();
                probe.scan = None;
                probe.set_axis(scan.axis, v)?;
                probe.validate()?;
            }
        }
        self.system_spec().map_err(|e| invalid(e.to_string()))?;
        self.stencil()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    /// Sets one scan axis, checking that the value is admissible for it.
    pub fn set_axis(&mut self, axis: ScanAxis, value: f64) -> Result<(), ConfigError> {
        match axis {
            ScanAxis::BasisN => {
                if value.fract() != 0.0 || value < 2.0 || !value.is_finite() {
                    return Err(invalid(format!(
                        "scan value for basis_n must be an integer ≥ 2 (got {value})"
                    )));
                }
                self.basis.n = value as usize;
            }
            ScanAxis::HMu => {
                positive("scan value for h_mu", value)?;
                self.esm.h_mu = value;
            }
            ScanAxis::HNu => {
                positive("scan value for h_nu", value)?;
                self.esm.h_nu = value;
            }
            ScanAxis::Beta => {
                positive("scan value for beta", value)?;
                self.thermo.beta = value;
            }
        }
        Ok(())
    }

    pub fn potential(&self) -> PolynomialObservable {
        PolynomialObservable::new(self.system.potential.clone())
    }

    pub fn a(&self) -> PolynomialObservable {
        PolynomialObservable::new(self.esm.a_coeffs.clone())
    }

    pub fn b(&self) -> PolynomialObservable {
        PolynomialObservable::new(self.esm.b_coeffs.clone())
    }

    /// Largest degree among `V`, `A` and the source `F = int B`, at least 2.
    pub fn required_pad(&self) -> usize {
        [
            2,
            self.potential().degree(),
            self.a().degree(),
            self.b().antiderivative().degree(),
        ]
        .into_iter()
        .max()
        .unwrap_or(2)
    }

    pub fn build_pad(&self) -> usize {
        self.basis.build_pad.unwrap_or_else(|| self.required_pad())
    }

    pub fn system_spec(&self) -> kubo_core::Result<SystemSpec> {
        let basis = BasisSpec::new(
            self.basis.n,
            self.build_pad(),
            self.system.mass,
            self.system.ref_frequency,
            self.system.hbar,
        )?;
        SystemSpec::new(
            basis,
            self.potential(),
            ThermalParams::with_kb(self.thermo.beta, self.thermo.kb)?,
        )
    }

    pub fn stencil(&self) -> SourceStencil {
        SourceStencil {
            h_mu: self.esm.h_mu,
            h_nu: self.esm.h_nu,
            scheme: self.esm.scheme,
            nu_mode: self.esm.nu_mode,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        uniform_grid(self.time.t_max, self.time.n_steps)
    }

    /// Closed-form parameters when the potential is `c + k q^2` with `k > 0`.
    pub fn harmonic_params(&self) -> Option<HarmonicParams> {
        let v = self.potential();
        if v.degree() != 2 || v.coeff(1) != 0.0 || v.coeff(2) <= 0.0 {
            return None;
        }
        let omega = (2.0 * v.coeff(2) / self.system.mass).sqrt();
        HarmonicParams::new(self.system.mass, omega, self.thermo.beta, self.system.hbar).ok()
    }

    /// Harmonic potential and `A = B = q`: every closed form applies.
    pub fn is_harmonic_qq(&self) -> bool {
        let q = PolynomialObservable::monomial(1);
        self.harmonic_params().is_some() && self.a() == q && self.b() == q
    }

    pub fn scan_config(&self) -> Result<ScanConfig, ConfigError> {
        let scan = self
            .scan
            .as_ref()
            .ok_or_else(|| invalid("the scan command needs a [scan] section"))?;
        let mut base = self.clone();
        base.scan = None;
        Ok(ScanConfig {
            base,
            axis: scan.axis,
            values: scan.values.clone(),
            reference_n: scan.reference_n,
        })
    }

    /// Canonical text form; parses back to an equal config.
    pub fn snapshot(&self) -> String {
        let list = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut s = String::new();
        let mut put = |line: String| {
            s.push_str(&line);
            s.push('\n');
        };
        put("[system]".into());
        put(format!("mass = {:?}", self.system.mass));
        put(format!("hbar = {:?}", self.system.hbar));
        put(format!("ref_frequency = {:?}", self.system.ref_frequency));
        put(format!("potential = {}", list(&self.system.potential)));
        put("[thermo]".into());
        put(format!("beta = {:?}", self.thermo.beta));
        put(format!("kB = {:?}", self.thermo.kb));
        put("[basis]".into());
        put(format!("n = {}", self.basis.n));
        put(format!("build_pad = {}", self.build_pad()));
        put("[esm]".into());
        put(format!("a_coeffs = {}", list(&self.esm.a_coeffs)));
        put(format!("b_coeffs = {}", list(&self.esm.b_coeffs)));
        put(format!("h_mu = {:?}", self.esm.h_mu));
        put(format!("h_nu = {:?}", self.esm.h_nu));
        put(format!("scheme = {}", self.esm.scheme));
        put(format!("nu_mode = {}", self.esm.nu_mode));
        put("[time]".into());
        put(format!("t_max = {:?}", self.time.t_max));
        put(format!("n_steps = {}", self.time.n_steps));
        put("[output]".into());
        if let Some(p) = &self.output.path {
            put(format!("path = \"{p}\""));
        }
        put(format!("precision = {}", self.output.precision));
        if let Some(scan) = &self.scan {
            put("[scan]".into());
            put(format!("axis = {}", scan.axis));
            put(format!("values = {}", list(&scan.values)));
            put(format!("reference_n = {}", scan.reference_n));
        }
        s
    }
}
