use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stream, Stream};
use crate::detection::map_bits;
use crate::error::{Error, Result};
use crate::waveform::{Modem, SymbolMap};

/// `10 log10(max |s|² / mean |s|²)`.
pub fn papr_db(s: &[Complex64]) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::invalid("s", "empty signal"));
    }
    let p: Vec<f64> = s.iter().map(|v| v.norm_sqr()).collect();
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::invalid("s", "signal power must be positive and finite"));
    }
    Ok(10.0 * (p.iter().copied().fold(0.0, f64::max) / mean).log10())
}

/// PAPR of the frame body for `trials` random payloads, in trial order.
pub fn papr_samples(modem: &Modem, map: &SymbolMap, trials: usize, seed: u64) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    let nbits = modem.n() * map.bits_per_symbol();
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, Stream::Bits, t, 0);
            let bits: Vec<u8> = (0..nbits).map(|_| rng.random_range(0..2u8)).collect();
            papr_db(&modem.modulate_body(&map_bits(&bits, map)?)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub threshold_db: f64,
    pub ccdf: f64,
}

/// `P(PAPR > γ)` at each threshold.
pub fn papr_ccdf(samples: &[f64], thresholds_db: &[f64]) -> Vec<CcdfPoint> {
    let n = samples.len().max(1) as f64;
    thresholds_db
        .iter()
        .map(|&g| CcdfPoint { threshold_db: g, ccdf: samples.iter().filter(|&&p| p > g).count() as f64 / n })
        .collect()
}

/// Smallest observed PAPR whose empirical exceedance probability is at
/// most `p`.
pub fn papr_at_ccdf(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() || !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("papr_at_ccdf", "need samples and 0 < p < 1"));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let k = ((p * s.len() as f64).floor() as usize).min(s.len() - 1);
    Ok(s[k])
}
