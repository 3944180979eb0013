//! Binds a resolved config to its harness and renders the result files.

use std::fmt::Write;

use afdm::analysis::{
    ambiguity_csv, ber_csv, diversity_slope, papr_at_ccdf, papr_ccdf, papr_csv, papr_samples, run_ber, run_sensing,
    security_csv, security_experiment, sensing_csv, waveform_ambiguity, ReportHeader,
};
use afdm::channel::{effective_matrix, random_channel};
use afdm::waveform::{SymbolMap, Waveform};
use serde_json::{json, Value};

use crate::config::{lift, ExperimentKind, Resolved};
use crate::CliError;

/// Entries below this fraction of the largest magnitude are left out of
/// `effective_channel.csv`.
const SPARSITY_FLOOR: f64 = 1e-12;

/// Rendered files plus a short machine-readable summary for the manifest.
#[derive(Debug)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub summary: Value,
}

pub fn header(r: &Resolved) -> ReportHeader {
    let mut h = ReportHeader::new(r.kind().name(), r.seed(), &r.fingerprint);
    h.push("tool", concat!("afdm ", env!("CARGO_PKG_VERSION")));
    h.push("config", r.config.canonical_json());
    h
}

pub fn run(r: &Resolved) -> Result<Outputs, CliError> {
    let mut h = header(r);
    match r.kind() {
        ExperimentKind::Ber => {
            let cfg = r.ber_config()?;
            h.push("snr", "Es/N0 in dB, unit-energy symbols");
            h.push("equalizer", json!(cfg.equalizer).as_str().unwrap_or_default());
            let curves = run_ber(&cfg).map_err(lift)?;
            let mut summary = serde_json::Map::new();
            if let Some([lo, hi]) = r.config.ber.as_ref().and_then(|b| b.slope_window_db) {
                let slopes: serde_json::Map<String, Value> = curves
                    .iter()
                    .map(|c| {
                        let v = match diversity_slope(c, lo, hi) {
                            Ok(s) => json!(s),
                            Err(e) => json!(e.to_string()),
                        };
                        (c.waveform.name().to_string(), v)
                    })
                    .collect();
                summary.insert("slope_window_db".into(), json!([lo, hi]));
                summary.insert("diversity_slope".into(), Value::Object(slopes));
            }
            Ok(Outputs { files: vec![("ber.csv".into(), ber_csv(&h, &curves))], summary: summary.into() })
        }
        ExperimentKind::Ambiguity => {
            let a = r.config.ambiguity.as_ref().expect("resolved");
            let bw = r.config.channel.bandwidth_hz;
            h.push("sampling_hz", a.oversample as f64 * bw);
            h.push("payload", json!(a.payload).as_str().unwrap_or_default());
            let payload = a.payload.symbols(r.config.system.n, r.seed());
            let results = r
                .config
                .waveforms
                .iter()
                .map(|&w| waveform_ambiguity(&r.modem(w)?, &payload, a.oversample, bw).map_err(lift))
                .collect::<Result<Vec<_>, _>>()?;
            let summary: serde_json::Map<String, Value> = results
                .iter()
                .map(|x| {
                    let v = json!({
                        "zero_delay_pslr_db": x.zero_delay_pslr_db,
                        "zero_doppler_pslr_db": x.zero_doppler_pslr_db,
                    });
                    (x.waveform.name().to_string(), v)
                })
                .collect();
            Ok(Outputs {
                files: vec![("ambiguity_cut.csv".into(), ambiguity_csv(&h, &results))],
                summary: json!({ "pslr": summary }),
            })
        }
        ExperimentKind::Papr => {
            let p = r.config.papr.as_ref().expect("resolved");
            let map = SymbolMap::new(r.config.system.modulation_order).map_err(lift)?;
            let mut curves = Vec::new();
            let mut at = serde_json::Map::new();
            for &w in &r.config.waveforms {
                let samples = papr_samples(&r.modem(w)?, &map, p.trials, r.seed()).map_err(lift)?;
                at.insert(w.name().into(), json!(papr_at_ccdf(&samples, 1e-2).ok()));
                curves.push((w, papr_ccdf(&samples, &p.thresholds_db)));
            }
            Ok(Outputs {
                files: vec![("papr_ccdf.csv".into(), papr_csv(&h, &curves))],
                summary: json!({ "papr_db_at_ccdf_1e-2": at }),
            })
        }
        ExperimentKind::Sensing => {
            let cfg = r.sensing_config()?;
            h.push("snr", cfg.snr_db.map_or("noise-free".to_string(), |s| format!("{s} dB Es/N0")));
            let trials = run_sensing(&cfg).map_err(lift)?;
            let mut nmse: Vec<f64> = trials.iter().map(|t| t.nmse).collect();
            nmse.sort_by(f64::total_cmp);
            let missed = trials.iter().filter(|t| t.estimate.len() != t.truth.len()).count();
            Ok(Outputs {
                files: vec![("sensing.csv".into(), sensing_csv(&h, &trials))],
                summary: json!({
                    "trials": trials.len(),
                    "median_nmse": nmse[nmse.len() / 2],
                    "max_nmse": nmse[nmse.len() - 1],
                    "path_count_mismatches": missed,
                }),
            })
        }
        ExperimentKind::Security => {
            let cfg = r.security_config()?;
            h.push("snr", "Es/N0 in dB, unit-energy symbols");
            h.push("channel", "identity");
            let points = security_experiment(&cfg).map_err(lift)?;
            Ok(Outputs {
                files: vec![("security.csv".into(), security_csv(&h, &points))],
                summary: json!({ "c1": cfg.c1 }),
            })
        }
        ExperimentKind::EffectiveChannel => effective_channel(r, &h),
    }
}

fn effective_channel(r: &Resolved, h: &ReportHeader) -> Result<Outputs, CliError> {
    let ch_cfg = &r.config.channel;
    let mut ch = random_channel(&ch_cfg.profile(), r.seed()).map_err(lift)?;
    ch.carrier_hz = ch_cfg.carrier_hz;
    ch.bandwidth_hz = ch_cfg.bandwidth_hz;
    let mut text = String::new();
    h.render(&mut text);
    text.push_str("waveform,row,col,re,im\n");
    let mut counts = serde_json::Map::new();
    for &w in &r.config.waveforms {
        let eff = effective_matrix(&ch, &r.modem(w)?).map_err(lift)?;
        let peak = eff.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut kept = 0usize;
        for row in 0..eff.n() {
            for col in 0..eff.n() {
                let z = eff.matrix[(row, col)];
                if z.norm() > SPARSITY_FLOOR * peak {
                    kept += 1;
                    let _ = writeln!(text, "{},{row},{col},{},{}", w.name(), z.re, z.im);
                }
            }
        }
        counts.insert(w.name().into(), json!(kept));
    }
    let record = serde_json::to_string_pretty(&ch.to_record()).expect("record serializes");
    let afdm_offsets = r.afdm.filter(|_| r.config.waveforms.contains(&Waveform::Afdm)).map(|cfg| {
        ch.paths.iter().map(|p| cfg.band_offset(p.delay, p.doppler)).collect::<Vec<_>>()
    });
    Ok(Outputs {
        files: vec![
            ("effective_channel.csv".into(), text),
            ("channel.json".into(), format!("{record}\n")),
        ],
        summary: json!({ "nonzero_entries": counts, "afdm_band_offsets": afdm_offsets }),
    })
}
