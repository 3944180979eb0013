use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fingerprint, stream, Stream};
use crate::channel::{add_awgn_in_place, apply_channel_slice, effective_matrix, random_channel_with, ChannelProfile};
use crate::detection::{demap_symbols, map_bits, Equalizer, EqualizerKind, PreparedChannel};
use crate::error::{Error, Result};
use crate::transforms::ChirpParams;
use crate::waveform::{AfdmConfig, Modem, OtfsConfig, SymbolMap, Waveform};

/// Monte Carlo BER setup. SNR values are `Es/N0` in dB with unit-energy
/// symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerConfig {
    pub waveforms: Vec<Waveform>,
    pub n: usize,
    pub modulation_order: usize,
    pub profile: ChannelProfile,
    /// AFDM Doppler guard `ξ`.
    pub xi: usize,
    /// AFDM `c1`; `None` selects [`c1_optimal`](crate::waveform::c1_optimal) for the profile.
    #[serde(default)]
    pub c1: Option<f64>,
    pub c2: f64,
    pub otfs_doppler_bins: usize,
    pub otfs_delay_bins: usize,
    pub equalizer: EqualizerKind,
    pub snr_db: Vec<f64>,
    /// Trial cap per SNR point.
    pub max_trials: usize,
    /// A point stops once it has both this many bit errors and `min_bits`.
    pub target_errors: u64,
    pub min_bits: u64,
    pub batch: usize,
    pub seed: u64,
}

impl BerConfig {
    /// Prefix length shared by all waveforms: the profile's maximum delay.
    pub fn prefix_len(&self) -> usize {
        self.profile.l_max
    }

    pub fn afdm_config(&self) -> Result<AfdmConfig> {
        match self.c1 {
            Some(c1) => AfdmConfig::new(self.n, ChirpParams::new(c1, self.c2)?, self.xi, self.prefix_len()),
            None => AfdmConfig::for_profile(self.n, self.profile.l_max, self.profile.alpha_max, self.xi, self.c2),
        }
    }

    pub fn modem(&self, w: Waveform) -> Result<Modem> {
        let cp = self.prefix_len();
        match w {
            Waveform::Ofdm => Modem::ofdm(self.n, cp),
            Waveform::Ocdm => Modem::ocdm(self.n, cp),
            Waveform::Afdm => Modem::afdm(self.afdm_config()?),
            Waveform::Otfs => {
                let cfg = OtfsConfig::new(self.otfs_doppler_bins, self.otfs_delay_bins)?;
                cfg.check_frame_len(self.n)?;
                Modem::otfs(cfg, cp)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.waveforms.is_empty() {
            return Err(Error::invalid("waveforms", "at least one waveform is required"));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan()) {
            return Err(Error::invalid("snr_db", "need at least one non-NaN SNR"));
        }
        if self.max_trials == 0 {
            return Err(Error::invalid("max_trials", "must be positive"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("batch", "must be positive"));
        }
        if self.profile.l_max >= self.n {
            return Err(Error::invalid("l_max", "must be below N"));
        }
        if self.equalizer == EqualizerKind::Lmmse && self.snr_db.iter().any(|s| s.is_infinite()) {
            return Err(Error::invalid("snr_db", "LMMSE needs finite SNR"));
        }
        SymbolMap::new(self.modulation_order)?;
        for &w in &self.waveforms {
            self.modem(w)?;
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&serde_json::to_string(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub waveform: Waveform,
    pub points: Vec<BerPoint>,
    pub fingerprint: String,
}

impl BerCurve {
    pub fn ber_at(&self, snr_db: f64) -> Option<f64> {
        self.points.iter().find(|p| p.snr_db == snr_db).map(|p| p.ber)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    trials: u64,
    bit_errors: u64,
    frame_errors: u64,
}

/// Per-trial errors for every `(waveform, snr)` pair still marked active.
fn run_trial(
    cfg: &BerConfig,
    modems: &[Modem],
    map: &SymbolMap,
    active: &[Vec<bool>],
    trial: u64,
) -> Result<Vec<Vec<Option<u64>>>> {
    let ch = random_channel_with(&cfg.profile, &mut stream(cfg.seed, Stream::Channel, trial, 0))?;
    let mut rng = stream(cfg.seed, Stream::Bits, trial, 0);
    let nbits = cfg.n * map.bits_per_symbol();
    let bits: Vec<u8> = (0..nbits).map(|_| rng.random_range(0..2u8)).collect();
    let x = map_bits(&bits, map)?;
    let mut out = vec![vec![None; cfg.snr_db.len()]; modems.len()];
    for (wi, modem) in modems.iter().enumerate() {
        if !active[wi].iter().any(|&a| a) {
            continue;
        }
        let frame = modem.modulate(&x)?;
        let clean = apply_channel_slice(frame.tx_time.samples(), modem.prefix_len(), &ch);
        let eff = effective_matrix(&ch, modem)?;
        let prepared = PreparedChannel::new(&eff, cfg.equalizer)?;
        for (si, &snr) in cfg.snr_db.iter().enumerate() {
            if !active[wi][si] {
                continue;
            }
            // same noise draw for every waveform at this (snr, trial)
            let mut noise_rng = stream(cfg.seed, Stream::Noise, si as u64, trial);
            let mut rx = clean.clone();
            let var = add_awgn_in_place(&mut rx, snr, &mut noise_rng)?;
            let y = modem.demodulate(&rx)?;
            let eq = match cfg.equalizer {
                EqualizerKind::Lmmse => Equalizer::lmmse(var)?,
                EqualizerKind::ZeroForcing => Equalizer::zero_forcing(),
            };
            let xhat = match prepared.equalize(&y, &eq) {
                Ok(v) => v,
                // a singular draw counts as a fully erroneous frame
                Err(Error::Singular) => vec![Complex64::new(0.0, 0.0); cfg.n],
                Err(e) => return Err(e),
            };
            let got = demap_symbols(&xhat, map);
            let errs = got.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;
            out[wi][si] = Some(errs);
        }
    }
    Ok(out)
}

/// BER curves for every configured waveform over shared channel, payload
/// and noise draws. Trials run in fixed-size batches; a point stops after
/// the batch in which it reaches both `target_errors` and `min_bits`, or at
/// `max_trials`. Results do not depend on the rayon thread count.
pub fn run_ber(cfg: &BerConfig) -> Result<Vec<BerCurve>> {
    cfg.validate()?;
    let modems = cfg.waveforms.iter().map(|&w| cfg.modem(w)).collect::<Result<Vec<_>>>()?;
    let map = SymbolMap::new(cfg.modulation_order)?;
    let bits_per_frame = (cfg.n * map.bits_per_symbol()) as u64;
    let (nw, ns) = (modems.len(), cfg.snr_db.len());
    let mut tally = vec![vec![Tally::default(); ns]; nw];
    let mut active = vec![vec![true; ns]; nw];
    let mut done = 0usize;
    while done < cfg.max_trials && active.iter().flatten().any(|&a| a) {
        let count = cfg.batch.min(cfg.max_trials - done);
        let results = (done..done + count)
            .into_par_iter()
            .map(|t| run_trial(cfg, &modems, &map, &active, t as u64))
            .collect::<Result<Vec<_>>>()?;
        for r in &results {
            for wi in 0..nw {
                for si in 0..ns {
                    if let Some(e) = r[wi][si] {
                        let t = &mut tally[wi][si];
                        t.trials += 1;
                        t.bit_errors += e;
                        t.frame_errors += u64::from(e > 0);
                    }
                }
            }
        }
        done += count;
        for wi in 0..nw {
            for si in 0..ns {
                let t = &tally[wi][si];
                if t.bit_errors >= cfg.target_errors && t.trials * bits_per_frame >= cfg.min_bits {
                    active[wi][si] = false;
                }
            }
        }
    }
    let fp = cfg.fingerprint();
    Ok(cfg
        .waveforms
        .iter()
        .zip(&tally)
        .map(|(&waveform, row)| BerCurve {
            waveform,
            fingerprint: fp.clone(),
            points: cfg
                .snr_db
                .iter()
                .zip(row)
                .map(|(&snr_db, t)| {
                    let bits = t.trials * bits_per_frame;
                    BerPoint {
                        snr_db,
                        trials: t.trials,
                        bits,
                        bit_errors: t.bit_errors,
                        frame_errors: t.frame_errors,
                        ber: t.bit_errors as f64 / bits as f64,
                    }
                })
                .collect(),
        })
        .collect())
}

/// Minimum bit errors a point needs to enter a slope fit.
pub const MIN_SLOPE_ERRORS: u64 = 100;

/// Diversity order estimate: minus the least-squares slope of `log10(BER)`
/// against `SNR_dB / 10` over points with `lo <= SNR <= hi`.
pub fn diversity_slope(curve: &BerCurve, lo: f64, hi: f64) -> Result<f64> {
    let pts: Vec<&BerPoint> = curve.points.iter().filter(|p| p.snr_db >= lo && p.snr_db <= hi).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientStatistics(format!(
            "{}: {} points in [{lo}, {hi}] dB, need 3",
            curve.waveform,
            pts.len()
        )));
    }
    if let Some(p) = pts.iter().find(|p| p.bit_errors < MIN_SLOPE_ERRORS) {
        return Err(Error::InsufficientStatistics(format!(
            "{} at {} dB has {} bit errors, need {MIN_SLOPE_ERRORS}",
            curve.waveform, p.snr_db, p.bit_errors
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.snr_db / 10.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.ber.log10()).collect();
    let m = DMatrix::from_fn(xs.len(), 2, |r, c| if c == 0 { 1.0 } else { xs[r] });
    let sol = m
        .svd(true, true)
        .solve(&nalgebra::DVector::from_column_slice(&ys), 1e-12)
        .map_err(|e| Error::InsufficientStatistics(e.to_string()))?;
    Ok(-sol[1])
}
