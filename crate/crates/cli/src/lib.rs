//! Config-driven runner around `kubo-core`: parses run configs, executes the
//! `exact`, `esm`, `oracle`, `scan` and `verify` experiments and writes CSV.

pub mod config;
pub mod runner;
pub mod table;
pub mod verify;

pub use config::{
    parse_config, parse_config_with_overrides, ConfigError, RunConfig, ScanAxis, ScanConfig,
};
pub use runner::{run_esm, run_exact, run_oracle, run_scan, RunError, RunResult};
pub use table::{format_float, parse_csv, Table};
pub use verify::{run_verify, Check, CheckStatus, VerifyReport};
