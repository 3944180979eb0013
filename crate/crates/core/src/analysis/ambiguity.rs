use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{cis_cycles, ensure_finite, ComplexSignal, Domain};
use crate::transforms::{dft, idft};
use super::{stream, Stream};
use crate::waveform::{Modem, SymbolMap, Waveform};

/// `|A(τ, ν)|` on a delay-Doppler grid, normalized to a peak of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySurface {
    /// Delays in samples at `fs`.
    pub delays: Vec<i64>,
    pub dopplers_hz: Vec<f64>,
    pub fs: f64,
    /// Row-major in delay.
    pub magnitude: Vec<f64>,
}

impl AmbiguitySurface {
    pub fn at(&self, d: usize, v: usize) -> f64 {
        self.magnitude[d * self.dopplers_hz.len() + v]
    }
}

/// Aperiodic auto-ambiguity `A(τ, ν) = Σ_n s[n] conj(s[n-τ]) e^{-j2πνn/fs}`
/// with `s` zero outside its support.
pub fn ambiguity(s: &ComplexSignal, delays: &[i64], dopplers_hz: &[f64], fs: f64) -> Result<AmbiguitySurface> {
    if s.domain() != Domain::Time {
        return Err(Error::invalid("s", "ambiguity needs a time-domain signal"));
    }
    if delays.is_empty() || dopplers_hz.is_empty() {
        return Err(Error::invalid("grid", "delay and Doppler grids must be non-empty"));
    }
    if !(fs > 0.0 && fs.is_finite()) || dopplers_hz.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("grid", "f_s and Doppler values must be finite, f_s > 0"));
    }
    let x = s.samples();
    ensure_finite(x, "signal")?;
    if s.energy() == 0.0 {
        return Err(Error::invalid("s", "zero-energy signal"));
    }
    let m = x.len() as i64;
    let mut raw = Vec::with_capacity(delays.len() * dopplers_hz.len());
    for &tau in delays {
        let lo = tau.max(0);
        let hi = m.min(m + tau);
        for &nu in dopplers_hz {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in lo..hi {
                let ph = cis_cycles(-(nu * n as f64 / fs).rem_euclid(1.0));
                acc += x[n as usize] * x[(n - tau) as usize].conj() * ph;
            }
            raw.push(acc.norm());
        }
    }
    let peak = raw.iter().copied().fold(0.0, f64::max);
    let magnitude = raw.iter().map(|v| if peak > 0.0 { v / peak } else { 0.0 }).collect();
    Ok(AmbiguitySurface { delays: delays.to_vec(), dopplers_hz: dopplers_hz.to_vec(), fs, magnitude })
}

/// Band-limited interpolation by `factor` through spectral zero-padding.
/// For even lengths the Nyquist bin stays in the negative half.
pub fn upsample(x: &[Complex64], factor: usize) -> Result<Vec<Complex64>> {
    if factor == 0 || x.is_empty() {
        return Err(Error::invalid("upsample", "factor and length must be positive"));
    }
    if factor == 1 {
        return Ok(x.to_vec());
    }
    let n = x.len();
    let m = n * factor;
    let spectrum = dft(x);
    let pos = n.div_ceil(2);
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    z[..pos].copy_from_slice(&spectrum[..pos]);
    z[m - (n - pos)..].copy_from_slice(&spectrum[pos..]);
    // unitary transforms: rescale so sample values interpolate x
    let g = (factor as f64).sqrt();
    Ok(idft(&z).into_iter().map(|v| v * g).collect())
}

/// One slice through the origin of an ambiguity surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityCut {
    /// Delay in samples for the zero-Doppler cut, Doppler in Hz for the
    /// zero-delay cut.
    pub axis: Vec<f64>,
    pub magnitude: Vec<f64>,
}

/// `(zero-Doppler cut, zero-delay cut)`.
pub fn ambiguity_cuts(surface: &AmbiguitySurface) -> Result<(AmbiguityCut, AmbiguityCut)> {
    let d0 = surface
        .delays
        .iter()
        .position(|&d| d == 0)
        .ok_or_else(|| Error::invalid("delays", "grid must contain 0"))?;
    let v0 = surface
        .dopplers_hz
        .iter()
        .position(|&v| v == 0.0)
        .ok_or_else(|| Error::invalid("dopplers", "grid must contain 0"))?;
    let zero_doppler = AmbiguityCut {
        axis: surface.delays.iter().map(|&d| d as f64).collect(),
        magnitude: (0..surface.delays.len()).map(|d| surface.at(d, v0)).collect(),
    };
    let zero_delay = AmbiguityCut {
        axis: surface.dopplers_hz.clone(),
        magnitude: (0..surface.dopplers_hz.len()).map(|v| surface.at(d0, v)).collect(),
    };
    Ok((zero_doppler, zero_delay))
}

/// Peak-to-highest-sidelobe ratio in dB. The mainlobe is the run of
/// strictly decreasing samples on each side of the peak, at most
/// `max_half_width` samples long; `None` when no sidelobe remains.
pub fn peak_sidelobe_ratio_db(cut: &[f64], max_half_width: usize) -> Option<f64> {
    if cut.is_empty() {
        return None;
    }
    let i = cut.iter().enumerate().fold(0, |b, (k, &v)| if v > cut[b] { k } else { b });
    let mut l = i;
    while l > 0 && cut[l - 1] < cut[l] && i - l < max_half_width {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < cut.len() && cut[r + 1] < cut[r] && r - i < max_half_width {
        r += 1;
    }
    let side = cut[..l].iter().chain(&cut[r + 1..]).copied().fold(f64::NEG_INFINITY, f64::max);
    if side == f64::NEG_INFINITY {
        return None;
    }
    Some(20.0 * (cut[i] / side).log10())
}

/// Probing payload for ambiguity experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingPayload {
    /// All symbols equal to 1.
    Unit,
    /// QPSK symbols drawn from the seed.
    Random,
}

impl SensingPayload {
    pub fn symbols(&self, n: usize, seed: u64) -> Vec<Complex64> {
        match self {
            SensingPayload::Unit => vec![Complex64::new(1.0, 0.0); n],
            SensingPayload::Random => {
                let map = SymbolMap::qpsk();
                let mut rng = stream(seed, Stream::Bits, 0, 0);
                (0..n)
                    .map(|_| {
                        let bits = [rng.random_range(0..2u8), rng.random_range(0..2u8)];
                        map.map_symbol(&bits)
                    })
                    .collect()
            }
        }
    }
}

/// Cuts and sidelobe figures of one waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityResult {
    pub waveform: Waveform,
    pub zero_doppler: AmbiguityCut,
    pub zero_delay: AmbiguityCut,
    pub zero_doppler_pslr_db: Option<f64>,
    pub zero_delay_pslr_db: Option<f64>,
}

/// Cuts of the oversampled frame body of `modem` for the given payload.
/// `fs = oversample · bandwidth`; Doppler runs over `k fs / M`,
/// `k ∈ [-M/2, M/2)`, and delay over `(-M, M)` with `M` body samples.
pub fn waveform_ambiguity(modem: &Modem, payload: &[Complex64], oversample: usize, bandwidth_hz: f64) -> Result<AmbiguityResult> {
    let body = modem.modulate_body(payload)?;
    let s = upsample(&body, oversample)?;
    let m = s.len() as i64;
    let fs = oversample as f64 * bandwidth_hz;
    let sig = ComplexSignal::new(s, Domain::Time)?;
    let delays: Vec<i64> = (-m + 1..m).collect();
    let dopplers: Vec<f64> = (-m / 2..m / 2).map(|k| k as f64 * fs / m as f64).collect();
    let zd = ambiguity(&sig, &delays, &[0.0], fs)?;
    let zv = ambiguity(&sig, &[0], &dopplers, fs)?;
    let (zero_doppler, _) = ambiguity_cuts(&zd)?;
    let (_, zero_delay) = ambiguity_cuts(&zv)?;
    Ok(AmbiguityResult {
        waveform: modem.waveform(),
        zero_doppler_pslr_db: peak_sidelobe_ratio_db(&zero_doppler.magnitude, oversample),
        zero_delay_pslr_db: peak_sidelobe_ratio_db(&zero_delay.magnitude, oversample),
        zero_doppler,
        zero_delay,
    })
}
