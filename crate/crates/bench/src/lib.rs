//! Shared fixtures for the criterion benches.

use kubo_core::{BasisSpec, PolynomialObservable, SystemSpec, ThermalParams};

pub fn harmonic_system(n: usize) -> SystemSpec {
    SystemSpec::new(
        BasisSpec::unit(n, 4),
        PolynomialObservable::harmonic(1.0, 1.0),
        ThermalParams::new(1.0).unwrap(),
    )
    .unwrap()
}

pub fn anharmonic_system(n: usize) -> SystemSpec {
    SystemSpec::new(
        BasisSpec::unit(n, 4),
        PolynomialObservable::new(vec![0.0, 0.0, 0.5, 0.1, 0.01]),
        ThermalParams::new(1.0).unwrap(),
    )
    .unwrap()
}
