//! Bit mapping, hard demapping and linear equalization over the
//! native-domain effective channel.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::EffectiveChannel;
use crate::error::{Error, Result};
use crate::signal::ensure_finite;
use crate::waveform::SymbolMap;

pub fn map_bits(bits: &[u8], map: &SymbolMap) -> Result<Vec<Complex64>> {
    let k = map.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(Error::invalid(
            "bits",
            format!("{} bits is not a multiple of log2(M) = {k}", bits.len()),
        ));
    }
    Ok(bits.chunks(k).map(|c| map.map_symbol(c)).collect())
}

/// Hard minimum-distance demapping.
pub fn demap_symbols(symbols: &[Complex64], map: &SymbolMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * map.bits_per_symbol());
    for &s in symbols {
        map.demap_symbol(s, &mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerKind {
    ZeroForcing,
    Lmmse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equalizer {
    kind: EqualizerKind,
    noise_var: f64,
}

impl Equalizer {
    pub fn zero_forcing() -> Self {
        Self { kind: EqualizerKind::ZeroForcing, noise_var: 0.0 }
    }

    /// LMMSE needs a strictly positive noise variance.
    pub fn lmmse(noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::invalid("noise_var", "LMMSE needs 0 < σ² < ∞"));
        }
        Ok(Self { kind: EqualizerKind::Lmmse, noise_var })
    }

    pub fn kind(&self) -> EqualizerKind {
        self.kind
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
}

/// ZF: `H⁻¹ y`. LMMSE: `Hᴴ (H Hᴴ + σ² I)⁻¹ y`, solved by Cholesky.
pub fn equalize(y: &[Complex64], eff: &EffectiveChannel, eq: &Equalizer) -> Result<Vec<Complex64>> {
    PreparedChannel::new(eff, eq.kind)?.equalize(y, eq)
}

/// Effective channel with the noise-independent part of the detector
/// precomputed, for reuse across noise levels.
#[derive(Debug, Clone)]
pub struct PreparedChannel {
    h: DMatrix<Complex64>,
    gram: Option<DMatrix<Complex64>>,
    lu: Option<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl PreparedChannel {
    pub fn new(eff: &EffectiveChannel, kind: EqualizerKind) -> Result<Self> {
        if !eff.matrix.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("effective channel"));
        }
        let h = eff.matrix.clone();
        let (gram, lu) = match kind {
            EqualizerKind::Lmmse => (Some(&h * h.adjoint()), None),
            EqualizerKind::ZeroForcing => (None, Some(h.clone().lu())),
        };
        Ok(Self { h, gram, lu })
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn equalize(&self, y: &[Complex64], eq: &Equalizer) -> Result<Vec<Complex64>> {
        let n = self.n();
        if y.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: y.len() });
        }
        ensure_finite(y, "received symbols")?;
        let yv = DVector::from_column_slice(y);
        let x = match eq.kind {
            EqualizerKind::ZeroForcing => {
                let lu = match &self.lu {
                    Some(lu) => lu.clone(),
                    None => self.h.clone().lu(),
                };
                lu.solve(&yv).ok_or(Error::Singular)?
            }
            EqualizerKind::Lmmse => {
                let mut g = match &self.gram {
                    Some(g) => g.clone(),
                    None => &self.h * self.h.adjoint(),
                };
                for i in 0..n {
                    g[(i, i)] += Complex64::new(eq.noise_var, 0.0);
                }
                let chol = g.cholesky().ok_or(Error::Singular)?;
                self.h.adjoint() * chol.solve(&yv)
            }
        };
        if !x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Singular);
        }
        Ok(x.as_slice().to_vec())
    }
}
