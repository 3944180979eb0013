//! Rectangular-pulse OTFS over a `K x L` delay-Doppler grid.
//!
//! Symbols are stored row-major with the Doppler index as the row:
//! grid entry `(k, l)` lives at `k * L + l`. The time signal is the inverse
//! discrete Zak transform, `s[l + L n] = 1/sqrt(K) Σ_k x[k, l] e^{j2πnk/K}`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::cis_cycles;
use crate::transforms::{dft_in_place, idft_in_place};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OtfsConfig {
    pub doppler_bins: usize,
    pub delay_bins: usize,
}

impl OtfsConfig {
    pub fn new(doppler_bins: usize, delay_bins: usize) -> Result<Self> {
        if doppler_bins == 0 || delay_bins == 0 {
            return Err(Error::invalid("otfs", "grid dimensions must be positive"));
        }
        Ok(Self { doppler_bins, delay_bins })
    }

    pub fn frame_len(&self) -> usize {
        self.doppler_bins * self.delay_bins
    }

    /// Errors unless `K * L` equals the comparison frame length `n`.
    pub fn check_frame_len(&self, n: usize) -> Result<()> {
        if self.frame_len() != n {
            return Err(Error::invalid(
                "otfs",
                format!(
                    "K*L = {}*{} = {} does not match frame length {n}",
                    self.doppler_bins,
                    self.delay_bins,
                    self.frame_len()
                ),
            ));
        }
        Ok(())
    }
}

pub(crate) fn zak_inverse(x: &[Complex64], cfg: &OtfsConfig) -> Vec<Complex64> {
    let (k_bins, l_bins) = (cfg.doppler_bins, cfg.delay_bins);
    let mut s = vec![Complex64::new(0.0, 0.0); x.len()];
    let mut col = vec![Complex64::new(0.0, 0.0); k_bins];
    for l in 0..l_bins {
        for k in 0..k_bins {
            col[k] = x[k * l_bins + l];
        }
        idft_in_place(&mut col);
        for (n, v) in col.iter().enumerate() {
            s[l + l_bins * n] = *v;
        }
    }
    s
}

pub(crate) fn zak_forward(s: &[Complex64], cfg: &OtfsConfig) -> Vec<Complex64> {
    let (k_bins, l_bins) = (cfg.doppler_bins, cfg.delay_bins);
    let mut x = vec![Complex64::new(0.0, 0.0); s.len()];
    let mut col = vec![Complex64::new(0.0, 0.0); k_bins];
    for l in 0..l_bins {
        for n in 0..k_bins {
            col[n] = s[l + l_bins * n];
        }
        dft_in_place(&mut col);
        for (k, v) in col.iter().enumerate() {
            x[k * l_bins + l] = *v;
        }
    }
    x
}

/// Dense `N x N` body modulation matrix, built entry by entry.
pub(crate) fn zak_matrix(cfg: &OtfsConfig) -> DMatrix<Complex64> {
    let (k_bins, l_bins) = (cfg.doppler_bins, cfg.delay_bins);
    let n = cfg.frame_len();
    let scale = 1.0 / (k_bins as f64).sqrt();
    let mut m = DMatrix::zeros(n, n);
    for l in 0..l_bins {
        for t in 0..k_bins {
            for k in 0..k_bins {
                m[(l + l_bins * t, k * l_bins + l)] =
                    cis_cycles(((t * k) % k_bins) as f64 / k_bins as f64) * scale;
            }
        }
    }
    m
}
