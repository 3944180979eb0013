//! Embedded-pilot channel estimation in the DAFT domain and on-grid radar
//! parameter extraction.
//!
//! Ranges use the bistatic convention `c0 · l / B`; halve for monostatic
//! geometry.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{afdm_tap_entry, DelayDopplerChannel, PathTap, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::signal::{cis_cycles, energy, ensure_finite};
use crate::waveform::AfdmConfig;

pub const DEFAULT_TARGET_THRESHOLD: f64 = 0.1;

/// Guard half-width that keeps every pilot observation free of data for a
/// profile with Doppler guard `ξ`: `(2(α_max + ξ) + 1)(l_max + 1) - 1`.
pub fn guard_span(l_max: usize, alpha_max: usize, xi: usize) -> usize {
    (2 * (alpha_max + xi) + 1) * (l_max + 1) - 1
}

/// One pilot at `m_p` surrounded by a circular guard of half-width `g`;
/// every other DAFT index carries data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotLayout {
    pub n: usize,
    pub pilot_index: usize,
    pub amplitude: f64,
    pub guard: usize,
}

impl PilotLayout {
    pub fn new(n: usize, pilot_index: usize, amplitude: f64, guard: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("N", "must be at least 2"));
        }
        if pilot_index >= n {
            return Err(Error::invalid("pilot_index", format!("{pilot_index} >= N = {n}")));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", "must be positive and finite"));
        }
        if guard > n / 2 {
            return Err(Error::invalid("guard", format!("{guard} wraps onto itself for N = {n}")));
        }
        Ok(Self { n, pilot_index, amplitude, guard })
    }

    /// Unit-amplitude pilot in the middle of the frame with the guard from
    /// [`guard_span`].
    pub fn for_profile(cfg: &AfdmConfig, l_max: usize, alpha_max: usize) -> Result<Self> {
        let g = guard_span(l_max, alpha_max, cfg.guard);
        if 2 * g + 1 > cfg.n {
            return Err(Error::Infeasible(format!(
                "pilot guard 2·{g} + 1 exceeds N = {}",
                cfg.n
            )));
        }
        Self::new(cfg.n, cfg.n / 2, 1.0, g)
    }

    fn circ_dist(&self, q: usize) -> usize {
        let d = (q + self.n - self.pilot_index) % self.n;
        d.min(self.n - d)
    }

    pub fn is_guard(&self, q: usize) -> bool {
        q != self.pilot_index && self.circ_dist(q) <= self.guard
    }

    pub fn data_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.circ_dist(q) > self.guard).collect()
    }

    pub fn data_len(&self) -> usize {
        self.data_indices().len()
    }

    /// Amplitude scale that brings the frame to energy `N`, assuming
    /// unit-energy data symbols.
    pub fn energy_scale(&self) -> f64 {
        let nominal = self.amplitude * self.amplitude + self.data_len() as f64;
        (self.n as f64 / nominal).sqrt()
    }

    /// Pilot amplitude after energy normalization.
    pub fn pilot_gain(&self) -> f64 {
        self.amplitude * self.energy_scale()
    }

    pub fn extract_data(&self, frame: &[Complex64]) -> Result<Vec<Complex64>> {
        if frame.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: frame.len() });
        }
        let s = self.energy_scale();
        Ok(self.data_indices().into_iter().map(|q| frame[q] / s).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotFrame {
    pub symbols: Vec<Complex64>,
    pub scale: f64,
    pub pilot_boost_db: f64,
}

pub fn insert_pilot(data: &[Complex64], layout: &PilotLayout) -> Result<PilotFrame> {
    let idx = layout.data_indices();
    if data.len() != idx.len() {
        return Err(Error::LengthMismatch { expected: idx.len(), actual: data.len() });
    }
    ensure_finite(data, "data symbols")?;
    let scale = layout.energy_scale();
    let mut symbols = vec![Complex64::new(0.0, 0.0); layout.n];
    symbols[layout.pilot_index] = Complex64::new(layout.amplitude * scale, 0.0);
    for (&q, &d) in idx.iter().zip(data) {
        symbols[q] = d * scale;
    }
    Ok(PilotFrame { symbols, scale, pilot_boost_db: 20.0 * layout.amplitude.log10() })
}

/// Taps read off the pilot response, on the integer delay-Doppler grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelEstimate {
    pub taps: Vec<PathTap>,
}

impl ChannelEstimate {
    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn gain_at(&self, delay: usize, doppler: f64) -> Complex64 {
        self.taps
            .iter()
            .filter(|t| t.delay == delay && (t.doppler - doppler).abs() < 1e-9)
            .map(|t| t.gain)
            .sum()
    }

    /// `None` when no tap was detected.
    pub fn to_channel(&self, like: &DelayDopplerChannel) -> Result<Option<DelayDopplerChannel>> {
        if self.taps.is_empty() {
            return Ok(None);
        }
        DelayDopplerChannel::new(self.taps.clone(), like.l_max, like.alpha_max, like.carrier_hz, like.bandwidth_hz)
            .map(Some)
    }

    pub fn scatterers(&self, scale: &SensingScale) -> Vec<ScattererEstimate> {
        self.taps.iter().map(|t| scale.scatterer(t.delay, t.doppler, t.gain)).collect()
    }
}

/// `Σ |ĥ - h|² / Σ |h|²`, matching taps by grid cell; missed and spurious
/// taps count in full.
pub fn channel_nmse(est: &ChannelEstimate, truth: &DelayDopplerChannel) -> f64 {
    let mut cells: Vec<(usize, i64)> = truth
        .paths
        .iter()
        .chain(&est.taps)
        .map(|t| (t.delay, t.doppler.round() as i64))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    let mut err = 0.0;
    for (l, a) in cells {
        let h: Complex64 = truth
            .paths
            .iter()
            .filter(|t| t.delay == l && t.doppler.round() as i64 == a)
            .map(|t| t.gain)
            .sum();
        err += (est.gain_at(l, a as f64) - h).norm_sqr();
    }
    err / truth.paths.iter().map(|t| t.gain.norm_sqr()).sum::<f64>()
}

fn candidate_offsets(cfg: &AfdmConfig, l_max: usize, alpha_max: usize) -> Result<Vec<(usize, i64, usize)>> {
    let shift = cfg.delay_shift();
    if (shift - shift.round()).abs() > 1e-9 {
        return Err(Error::Infeasible(format!("2N·c1 = {shift} is not an integer")));
    }
    let a = alpha_max as i64;
    let mut out = Vec::new();
    for l in 0..=l_max {
        for alpha in -a..=a {
            let loc = cfg.band_offset(l, alpha as f64).round() as usize % cfg.n;
            out.push((l, alpha, loc));
        }
    }
    Ok(out)
}

/// Checks that the candidate taps land on distinct DAFT offsets and that no
/// data symbol reaches the pilot response region, both widened by `ξ`.
pub fn check_layout(layout: &PilotLayout, cfg: &AfdmConfig, l_max: usize, alpha_max: usize) -> Result<()> {
    if layout.n != cfg.n {
        return Err(Error::LengthMismatch { expected: cfg.n, actual: layout.n });
    }
    let n = cfg.n;
    let xi = cfg.guard as i64;
    let cands = candidate_offsets(cfg, l_max, alpha_max)?;
    let mut seen = vec![false; n];
    for &(_, _, loc) in &cands {
        if seen[loc] {
            return Err(Error::Infeasible("two candidate taps share a DAFT offset".into()));
        }
        seen[loc] = true;
    }
    let widen = |base: usize| (-xi..=xi).map(move |k| (base as i64 + k).rem_euclid(n as i64) as usize);
    let mut response = vec![false; n];
    for &(_, _, loc) in &cands {
        for r in widen(layout.pilot_index + loc) {
            response[r] = true;
        }
    }
    for q in layout.data_indices() {
        for &(_, _, loc) in &cands {
            if widen(q + loc).any(|r| response[r]) {
                return Err(Error::Infeasible(format!(
                    "data at index {q} leaks into the pilot response; guard {} is too small",
                    layout.guard
                )));
            }
        }
    }
    Ok(())
}

/// Gain-magnitude threshold three noise standard deviations above zero at
/// the pilot readout, floored for the noise-free case.
pub fn detection_threshold(noise_var: f64, layout: &PilotLayout) -> f64 {
    (3.0 * noise_var.max(0.0).sqrt() / layout.pilot_gain()).max(1e-8)
}

/// Reads every candidate `(l, α)` at its pilot offset, keeps those whose
/// gain magnitude exceeds `threshold`, then refines the kept gains jointly
/// by least squares over the data-free response region.
pub fn estimate_channel(
    rx: &[Complex64],
    layout: &PilotLayout,
    cfg: &AfdmConfig,
    l_max: usize,
    alpha_max: usize,
    threshold: f64,
) -> Result<ChannelEstimate> {
    if rx.len() != cfg.n {
        return Err(Error::LengthMismatch { expected: cfg.n, actual: rx.len() });
    }
    ensure_finite(rx, "received frame")?;
    if !(threshold > 0.0) {
        return Err(Error::invalid("threshold", "must be positive"));
    }
    check_layout(layout, cfg, l_max, alpha_max)?;
    let n = cfg.n;
    let mp = layout.pilot_index;
    let a = layout.pilot_gain();
    let cands = candidate_offsets(cfg, l_max, alpha_max)?;

    let mut kept = Vec::new();
    for &(l, alpha, loc) in &cands {
        let row = (mp + loc) % n;
        let resp = a * afdm_tap_entry(cfg, l, alpha as f64, row, mp);
        let g = rx[row] / resp;
        if g.norm() > threshold {
            kept.push((l, alpha));
        }
    }
    if kept.is_empty() {
        return Ok(ChannelEstimate::default());
    }

    let xi = cfg.guard as i64;
    let mut rows: Vec<usize> = cands
        .iter()
        .flat_map(|&(_, _, loc)| (-xi..=xi).map(move |k| ((mp + loc) as i64 + k).rem_euclid(n as i64) as usize))
        .collect();
    rows.sort_unstable();
    rows.dedup();
    let m = DMatrix::from_fn(rows.len(), kept.len(), |r, c| {
        let (l, alpha) = kept[c];
        a * afdm_tap_entry(cfg, l, alpha as f64, rows[r], mp)
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| rx[r]));
    let gains = m.svd(true, true).solve(&y, 1e-12).map_err(|_| Error::Singular)?;
    let taps = kept
        .iter()
        .zip(gains.iter())
        .map(|(&(l, alpha), &g)| PathTap::new(g, l, alpha as f64))
        .collect();
    Ok(ChannelEstimate { taps })
}

/// Converts grid indices to bistatic range and radial velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingScale {
    pub n: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
}

impl SensingScale {
    pub fn new(n: usize, carrier_hz: f64, bandwidth_hz: f64) -> Result<Self> {
        if n == 0 || !(carrier_hz > 0.0) || !(bandwidth_hz > 0.0) {
            return Err(Error::invalid("scale", "N, f_c and B must be positive"));
        }
        Ok(Self { n, carrier_hz, bandwidth_hz })
    }

    pub fn for_channel(ch: &DelayDopplerChannel, n: usize) -> Result<Self> {
        Self::new(n, ch.carrier_hz, ch.bandwidth_hz)
    }

    pub fn range_m(&self, delay: f64) -> f64 {
        SPEED_OF_LIGHT * delay / self.bandwidth_hz
    }

    pub fn velocity_mps(&self, doppler: f64) -> f64 {
        doppler * (self.bandwidth_hz / self.n as f64) * SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Range covered by `n` delay bins.
    pub fn unambiguous_range_m(&self) -> f64 {
        self.range_m(self.n as f64)
    }

    /// Velocity span `±N/2` Doppler bins, as its positive half.
    pub fn unambiguous_velocity_mps(&self) -> f64 {
        self.velocity_mps(self.n as f64 / 2.0)
    }

    pub fn scatterer(&self, delay: usize, doppler: f64, gain: Complex64) -> ScattererEstimate {
        ScattererEstimate {
            delay,
            doppler,
            gain_re: gain.re,
            gain_im: gain.im,
            range_m: self.range_m(delay as f64),
            velocity_mps: self.velocity_mps(doppler),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScattererEstimate {
    pub delay: usize,
    pub doppler: f64,
    pub gain_re: f64,
    pub gain_im: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
}

impl ScattererEstimate {
    pub fn gain(&self) -> Complex64 {
        Complex64::new(self.gain_re, self.gain_im)
    }
}

/// Delay-Doppler correlation map, row-major in delay.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDopplerMap {
    pub delays: Vec<usize>,
    pub dopplers: Vec<f64>,
    /// Correlation divided by the reference energy, so a single scaled copy
    /// of the reference reads back its complex gain.
    pub corr: Vec<Complex64>,
    /// `|corr|` normalized to a peak of 1.
    pub magnitude: Vec<f64>,
}

impl DelayDopplerMap {
    pub fn at(&self, d: usize, v: usize) -> f64 {
        self.magnitude[d * self.dopplers.len() + v]
    }

    pub fn corr_at(&self, d: usize, v: usize) -> Complex64 {
        self.corr[d * self.dopplers.len() + v]
    }

    pub fn argmax(&self) -> (usize, usize) {
        let nv = self.dopplers.len();
        let i = self
            .magnitude
            .iter()
            .enumerate()
            .fold(0, |best, (i, &m)| if m > self.magnitude[best] { i } else { best });
        (i / nv, i % nv)
    }
}

/// `map[d, v] = |Σ_n rx[n] conj(tx[(n - d) mod N]) e^{-j2πvn/N}|`.
pub fn matched_filter_map(rx: &[Complex64], tx: &[Complex64], delays: &[usize], dopplers: &[f64]) -> Result<DelayDopplerMap> {
    if delays.is_empty() || dopplers.is_empty() {
        return Err(Error::invalid("grid", "delay and Doppler grids must be non-empty"));
    }
    let n = tx.len();
    if rx.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: rx.len() });
    }
    ensure_finite(rx, "rx")?;
    ensure_finite(tx, "tx")?;
    if let Some(&d) = delays.iter().find(|&&d| d >= n) {
        return Err(Error::invalid("delays", format!("{d} outside [0, {n})")));
    }
    if dopplers.iter().any(|v| !v.is_finite() || v.abs() > n as f64 / 2.0) {
        return Err(Error::invalid("dopplers", format!("must lie within ±{}", n / 2)));
    }
    let e = energy(tx);
    if e == 0.0 {
        return Err(Error::invalid("tx", "reference has zero energy"));
    }
    let corr: Vec<Complex64> = delays
        .par_iter()
        .flat_map_iter(|&d| {
            let prod: Vec<Complex64> = (0..n).map(|i| rx[i] * tx[(i + n - d) % n].conj()).collect();
            dopplers.iter().map(move |&v| {
                prod.iter()
                    .enumerate()
                    .map(|(i, p)| p * cis_cycles(-(v * i as f64 / n as f64).rem_euclid(1.0)))
                    .sum::<Complex64>()
                    / e
            })
        })
        .collect();
    let peak = corr.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let magnitude = corr.iter().map(|c| if peak > 0.0 { c.norm() / peak } else { 0.0 }).collect();
    Ok(DelayDopplerMap { delays: delays.to_vec(), dopplers: dopplers.to_vec(), corr, magnitude })
}

/// Greedy peak picking: take the strongest unmasked cell, accept it if it is
/// a local maximum of the full map, mask its 3 x 3 neighbourhood, repeat.
pub fn estimate_targets(map: &DelayDopplerMap, threshold: f64, max_targets: usize, scale: &SensingScale) -> Vec<ScattererEstimate> {
    let (nd, nv) = (map.delays.len(), map.dopplers.len());
    let mut masked = vec![false; nd * nv];
    let mut out = Vec::new();
    while out.len() < max_targets {
        let best = (0..nd * nv)
            .filter(|&i| !masked[i])
            .fold(None, |b: Option<usize>, i| match b {
                Some(j) if map.magnitude[j] >= map.magnitude[i] => Some(j),
                _ => Some(i),
            });
        let Some(i) = best else { break };
        if map.magnitude[i] < threshold {
            break;
        }
        let (d, v) = (i / nv, i % nv);
        let mut local_max = true;
        for dd in d.saturating_sub(1)..=(d + 1).min(nd - 1) {
            for vv in v.saturating_sub(1)..=(v + 1).min(nv - 1) {
                if map.at(dd, vv) > map.magnitude[i] {
                    local_max = false;
                }
                masked[dd * nv + vv] = true;
            }
        }
        if local_max {
            out.push(scale.scatterer(map.delays[d], map.dopplers[v], map.corr[i]));
        }
    }
    out
}

/// Parabolic interpolation of the Doppler peak through cells `v - 1, v, v + 1`
/// of row `d`; assumes a uniform Doppler grid.
pub fn refine_doppler(map: &DelayDopplerMap, d: usize, v: usize) -> Option<f64> {
    if v == 0 || v + 1 >= map.dopplers.len() {
        return None;
    }
    let (a, b, c) = (map.at(d, v - 1), map.at(d, v), map.at(d, v + 1));
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return None;
    }
    let delta = 0.5 * (a - c) / den;
    let step = map.dopplers[v + 1] - map.dopplers[v];
    Some(map.dopplers[v] + delta * step)
}

#[cfg(test)]
mod tests;
