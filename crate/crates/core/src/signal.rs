use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which domain a sample vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    Time,
    Daft,
    Frequency,
    DelayDoppler,
}

/// Non-empty complex sample vector tagged with its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    domain: Domain,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "signal must not be empty"));
        }
        Ok(Self { samples, domain })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }
}

pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub(crate) fn ensure_finite(x: &[Complex64], what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `exp(j 2π cycles)`, with the argument reduced to [-0.5, 0.5] first.
#[inline]
pub fn cis_cycles(cycles: f64) -> Complex64 {
    let f = cycles - cycles.round();
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f)
}

/// Largest entry magnitude of a complex matrix.
pub fn matrix_max_abs(m: &nalgebra::DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
