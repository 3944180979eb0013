use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stream, Stream};
use crate::channel::add_awgn_in_place;
use crate::detection::{demap_symbols, map_bits};
use crate::error::{Error, Result};
use crate::transforms::ChirpParams;
use crate::waveform::{AfdmConfig, Modem, SymbolMap};

/// A receiver that knows everything except `c1`, which it takes as
/// `c1 + Δc1`, over an identity channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityConfig {
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    pub prefix_len: usize,
    pub modulation_order: usize,
    pub offsets: Vec<f64>,
    pub snr_db: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityPoint {
    pub delta_c1: f64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

/// BER of a hard-decision receiver per `Δc1`. Every offset sees the same
/// payloads and noise.
pub fn security_experiment(cfg: &SecurityConfig) -> Result<Vec<SecurityPoint>> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    if cfg.offsets.is_empty() {
        return Err(Error::invalid("offsets", "at least one offset is required"));
    }
    let map = SymbolMap::new(cfg.modulation_order)?;
    let tx = Modem::afdm(AfdmConfig::new(cfg.n, ChirpParams::new(cfg.c1, cfg.c2)?, 0, cfg.prefix_len)?)?;
    let rxs = cfg
        .offsets
        .iter()
        .map(|&d| Modem::afdm(AfdmConfig::new(cfg.n, ChirpParams::new(cfg.c1 + d, cfg.c2)?, 0, cfg.prefix_len)?))
        .collect::<Result<Vec<_>>>()?;
    let nbits = cfg.n * map.bits_per_symbol();
    let per_trial = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(cfg.seed, Stream::Bits, t, 0);
            let bits: Vec<u8> = (0..nbits).map(|_| rng.random_range(0..2u8)).collect();
            let frame = tx.modulate(&map_bits(&bits, &map)?)?;
            let mut r = frame.tx_time.into_samples();
            add_awgn_in_place(&mut r, cfg.snr_db, &mut stream(cfg.seed, Stream::Noise, 0, t))?;
            rxs.iter()
                .map(|m| {
                    let got = demap_symbols(&m.demodulate(&r)?, &map);
                    Ok(got.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64)
                })
                .collect::<Result<Vec<u64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let bits = (cfg.trials * nbits) as u64;
    Ok(cfg
        .offsets
        .iter()
        .enumerate()
        .map(|(i, &delta_c1)| {
            let bit_errors: u64 = per_trial.iter().map(|r| r[i]).sum();
            SecurityPoint { delta_c1, bits, bit_errors, ber: bit_errors as f64 / bits as f64 }
        })
        .collect())
}
