use crate::error::{Error, Result};

/// Truncated Fock basis of a reference harmonic oscillator.
///
/// Operators are assembled on `size + build_pad` states and truncated back to
/// `size`, so polynomial products up to degree `build_pad` are exact on the
/// retained block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    pub size: usize,
    pub build_pad: usize,
    pub mass: f64,
    pub ref_frequency: f64,
    pub hbar: f64,
}

impl BasisSpec {
    pub fn new(
        size: usize,
        build_pad: usize,
        mass: f64,
        ref_frequency: f64,
        hbar: f64,
    ) -> Result<Self> {
        let basis = BasisSpec {
            size,
            build_pad,
            mass,
            ref_frequency,
            hbar,
        };
        basis.validate()?;
        Ok(basis)
    }

    /// Unit mass, frequency and hbar.
    pub fn unit(size: usize, build_pad: usize) -> Self {
        BasisSpec {
            size,
            build_pad,
            mass: 1.0,
            ref_frequency: 1.0,
            hbar: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::InvalidBasis("size >= 2 required".into()));
        }
        for (name, v) in [
            ("mass", self.mass),
            ("ref_frequency", self.ref_frequency),
            ("hbar", self.hbar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidBasis(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn padded_size(&self) -> usize {
        self.size + self.build_pad
    }

    pub fn require_pad(&self, degree: usize) -> Result<()> {
        if self.build_pad < degree {
            Err(Error::PadTooSmall {
                pad: self.build_pad,
                required: degree,
            })
        } else {
            Ok(())
        }
    }

    /// Same basis with a different retained size.
    pub fn with_size(&self, size: usize) -> Self {
        BasisSpec { size, ..*self }
    }
}
