use crate::error::{Error, Result};
use crate::numeric::{dot, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `K(a, b) = a . b`
    Linear,
    /// `K(a, b) = exp(-gamma |a - b|^2)`
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let k = Kernel::Rbf { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Rbf { gamma } if !(gamma.is_finite() && gamma > 0.0) => Err(Error::Config(
                format!("RBF gamma must be positive, got {gamma}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.finish(self.base(a, b))
    }

    /// The data-dependent part of the kernel: the dot product for the
    /// linear kernel, the squared distance for RBF. Depends only on the
    /// kernel variant, not on gamma.
    pub fn base(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { .. } => squared_distance(a, b),
        }
    }

    /// Maps a value from [`Kernel::base`] to the kernel value.
    pub fn finish(&self, base: f64) -> f64 {
        match *self {
            Kernel::Linear => base,
            Kernel::Rbf { gamma } => (-gamma * base).exp(),
        }
    }

    pub fn same_variant(&self, other: &Kernel) -> bool {
        matches!(
            (self, other),
            (Kernel::Linear, Kernel::Linear) | (Kernel::Rbf { .. }, Kernel::Rbf { .. })
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf { .. } => "rbf",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Kernel::Linear => None,
            Kernel::Rbf { gamma } => Some(gamma),
        }
    }
}
