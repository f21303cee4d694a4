//! Observables written as real polynomials in the position operator.

use std::fmt;

/// `sum_k coeffs[k] * q^k`. Trailing zeros are allowed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolynomialObservable {
    coeffs: Vec<f64>,
}

impl PolynomialObservable {
    pub fn new(coeffs: Vec<f64>) -> Self {
        PolynomialObservable { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        PolynomialObservable { coeffs: vec![c] }
    }

    /// The monomial `q^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        PolynomialObservable { coeffs }
    }

    /// `(m * omega^2 / 2) q^2`.
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        PolynomialObservable::new(vec![0.0, 0.0, 0.5 * mass * omega * omega])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Index of the last nonzero coefficient; zero for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Formal derivative d/dq.
    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect::<Vec<_>>();
        PolynomialObservable { coeffs }
    }

    /// Antiderivative with zero constant term: `f_{k+1} = b_k / (k + 1)`.
    pub fn antiderivative(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k as f64 + 1.0)),
        );
        PolynomialObservable { coeffs }
    }

    /// `self + s * other`.
    /// Same polynomial with its constant term set to zero.
    pub fn without_constant(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        if let Some(c) = coeffs.first_mut() {
            *c = 0.0;
        }
        Self::new(coeffs)
    }

    pub fn add_scaled(&self, other: &PolynomialObservable, s: f64) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|k| self.coeff(k) + s * other.coeff(k))
            .collect();
        PolynomialObservable { coeffs }
    }

    pub fn scaled(&self, s: f64) -> Self {
        PolynomialObservable {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// A real polynomial is bounded below iff it is constant or its leading
    /// term has even degree and positive coefficient.
    pub fn is_bounded_below(&self) -> bool {
        let d = self.degree();
        d == 0 || (d.is_multiple_of(2) && self.coeff(d) > 0.0)
    }
}

/// Standalone form of [`PolynomialObservable::antiderivative`].
pub fn antiderivative(b: &PolynomialObservable) -> PolynomialObservable {
    b.antiderivative()
}

impl From<Vec<f64>> for PolynomialObservable {
    fn from(coeffs: Vec<f64>) -> Self {
        PolynomialObservable::new(coeffs)
    }
}

impl From<&[f64]> for PolynomialObservable {
    fn from(coeffs: &[f64]) -> Self {
        PolynomialObservable::new(coeffs.to_vec())
    }
}

impl fmt::Display for PolynomialObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c} q")?,
                _ => write!(f, "{c} q^{k}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn antiderivative_examples() {
        let f = PolynomialObservable::new(vec![0.0, 1.0]).antiderivative();
        assert_eq!(f.coeffs(), &[0.0, 0.0, 0.5]);
        let f = PolynomialObservable::constant(1.0).antiderivative();
        assert_eq!(f.coeffs(), &[0.0, 1.0]);
        let f = PolynomialObservable::monomial(2).antiderivative();
        assert_eq!(f.coeffs(), &[0.0, 0.0, 0.0, 1.0 / 3.0]);
    }

    #[test]
    fn degree_ignores_trailing_zeros() {
        assert_eq!(
            PolynomialObservable::new(vec![1.0, 2.0, 0.0, 0.0]).degree(),
            1
        );
        assert_eq!(PolynomialObservable::new(vec![]).degree(), 0);
        assert_eq!(
            PolynomialObservable::new(vec![0.0, 0.0, 0.5, 0.1, 0.01]).degree(),
            4
        );
    }

    #[test]
    fn boundedness() {
        assert!(PolynomialObservable::harmonic(1.0, 1.0).is_bounded_below());
        assert!(!PolynomialObservable::new(vec![0.0, 0.0, 0.5, 1e-3]).is_bounded_below());
        assert!(!PolynomialObservable::new(vec![0.0, 0.0, -0.5]).is_bounded_below());
        assert!(PolynomialObservable::new(vec![0.0, 0.0, 0.5, 0.1, 0.01]).is_bounded_below());
    }

    #[test]
    fn eval_horner() {
        let p = PolynomialObservable::new(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 12.0);
    }

    proptest! {
        #[test]
        fn derivative_inverts_antiderivative(coeffs in prop::collection::vec(-8i32..8, 0..8)) {
            // small integers keep b_k/(k+1)*(k+1) exact
            let b = PolynomialObservable::new(coeffs.iter().map(|&c| c as f64).collect());
            let back = b.antiderivative().derivative();
            prop_assert_eq!(back.coeffs(), b.coeffs());
            prop_assert_eq!(b.antiderivative().coeff(0), 0.0);
        }
    }
}
