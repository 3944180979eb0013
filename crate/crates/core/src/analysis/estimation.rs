use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stream, Stream};
use crate::channel::{add_awgn_in_place, apply_channel_slice, random_channel_with, ChannelProfile};
use crate::detection::map_bits;
use crate::error::{Error, Result};
use crate::sensing::{
    channel_nmse, detection_threshold, estimate_channel, insert_pilot, PilotLayout, ScattererEstimate, SensingScale,
};
use crate::waveform::{AfdmConfig, Modem, SymbolMap};

/// Embedded-pilot estimation over random channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    pub afdm: AfdmSetup,
    pub profile: ChannelProfile,
    pub pilot_amplitude: f64,
    /// `None` runs noise-free.
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
}

/// Serializable AFDM parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AfdmSetup {
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    pub xi: usize,
    pub prefix_len: usize,
}

impl AfdmSetup {
    pub fn config(&self) -> Result<AfdmConfig> {
        AfdmConfig::new(self.n, crate::transforms::ChirpParams::new(self.c1, self.c2)?, self.xi, self.prefix_len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingTrial {
    pub trial: u64,
    pub truth: Vec<ScattererEstimate>,
    pub estimate: Vec<ScattererEstimate>,
    pub nmse: f64,
}

pub fn run_sensing(cfg: &SensingConfig) -> Result<Vec<SensingTrial>> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    let afdm = cfg.afdm.config()?;
    let layout = PilotLayout::for_profile(&afdm, cfg.profile.l_max, cfg.profile.alpha_max)?;
    let layout = PilotLayout::new(layout.n, layout.pilot_index, cfg.pilot_amplitude, layout.guard)?;
    crate::sensing::check_layout(&layout, &afdm, cfg.profile.l_max, cfg.profile.alpha_max)?;
    let modem = Modem::afdm(afdm)?;
    let scale = SensingScale::new(afdm.n, cfg.carrier_hz, cfg.bandwidth_hz)?;
    let map = SymbolMap::qpsk();
    let noise_var = match cfg.snr_db {
        Some(s) => crate::channel::noise_variance(s)?,
        None => 0.0,
    };
    let threshold = detection_threshold(noise_var, &layout);
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ch = random_channel_with(&cfg.profile, &mut stream(cfg.seed, Stream::Channel, t, 0))?;
            let mut rng = stream(cfg.seed, Stream::Bits, t, 0);
            let bits: Vec<u8> = (0..2 * layout.data_len()).map(|_| rng.random_range(0..2u8)).collect();
            let frame = insert_pilot(&map_bits(&bits, &map)?, &layout)?;
            let tx = modem.modulate(&frame.symbols)?;
            let mut rx = apply_channel_slice(tx.tx_time.samples(), afdm.prefix_len, &ch);
            if let Some(s) = cfg.snr_db {
                add_awgn_in_place(&mut rx, s, &mut stream(cfg.seed, Stream::Noise, 0, t))?;
            }
            let y = modem.demodulate(&rx)?;
            let est = estimate_channel(&y, &layout, &afdm, cfg.profile.l_max, cfg.profile.alpha_max, threshold)?;
            Ok(SensingTrial {
                trial: t,
                truth: ch.paths.iter().map(|p| scale.scatterer(p.delay, p.doppler, p.gain)).collect(),
                estimate: est.scatterers(&scale),
                nmse: channel_nmse(&est, &ch),
            })
        })
        .collect()
}
