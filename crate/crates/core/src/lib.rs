//! Kubo-transformed quantum correlation functions for one-dimensional
//! systems, by exact diagonalization and by the external-source method.
//!
//! All operators live in a truncated Fock basis ([`BasisSpec`]). The
//! [`kubo`] module gives the exact eigen-sum reference, [`esm`] the
//! source-derivative estimators, and [`oracle`] closed forms for the
//! harmonic oscillator.

pub mod basis;
pub mod eigen;
pub mod error;
pub mod esm;
pub mod identities;
pub mod kubo;
pub mod operator;
pub mod oracle;
pub mod polynomial;
pub mod series;

pub use basis::BasisSpec;
pub use eigen::{eigh, Spectrum};
pub use error::{Error, Result};
pub use esm::{
    d_operator, exact_formula_correlator, kv_correlator, kv_correlator_from_source,
    kv_correlator_with_diagnostics, mixed_derivative, mixed_derivative_with_diagnostics,
    momentum_expectation, momentum_expectation_dt, operator_identity_check,
    operator_identity_sides, perturbed_hamiltonian, stability_check, Diagnostics, EsmReport,
    NuMode, Scheme, SourceStencil, StabilityReport, StabilityStatus, SystemSpec, TAIL_WEIGHT_LIMIT,
};
pub use kubo::{
    boltzmann_weights, kubo_correlator, kubo_transform, kubo_weights, partition_function,
    thermal_expectation, PartitionFunction, ThermalParams,
};
pub use num_complex::Complex64;
pub use operator::{
    apply_polynomial, build_hamiltonian, build_momentum, build_position, commutator, momentum,
    position, CMatrix, OperatorMatrix,
};
pub use oracle::HarmonicParams;
pub use polynomial::{antiderivative, PolynomialObservable};
pub use series::{uniform_grid, CorrelationSeries, Estimator, SeriesParams};
