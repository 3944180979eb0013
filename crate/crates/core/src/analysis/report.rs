use std::fmt::Write;

use super::{AmbiguityResult, BerCurve, CcdfPoint, SecurityPoint, SensingTrial};
use crate::waveform::Waveform;

/// Comment block at the top of every CSV: `# key: value` per line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportHeader {
    pub entries: Vec<(String, String)>,
}

impl ReportHeader {
    pub fn new(experiment: &str, seed: u64, fingerprint: &str) -> Self {
        let mut h = Self::default();
        h.push("experiment", experiment);
        h.push("seed", seed);
        h.push("config_sha256", fingerprint);
        h
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        // keep each entry on one comment line
        let v = value.to_string().replace(['\n', '\r'], " ");
        self.entries.push((key.to_string(), v));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self, out: &mut String) {
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k}: {v}");
        }
    }
}

fn db(v: f64) -> f64 {
    20.0 * v.max(1e-15).log10()
}

/// Columns `waveform,snr_db,trials,bit_errors,ber`; SNR is `Es/N0`.
pub fn ber_csv(header: &ReportHeader, curves: &[BerCurve]) -> String {
    let mut s = String::new();
    header.render(&mut s);
    s.push_str("waveform,snr_db,trials,bit_errors,ber\n");
    for c in curves {
        for p in &c.points {
            let _ = writeln!(s, "{},{},{},{},{}", c.waveform, p.snr_db, p.trials, p.bit_errors, p.ber);
        }
    }
    s
}

/// Columns `waveform,axis,value,magnitude_db`; `axis` is `delay` (samples
/// at `f_s`) or `doppler` (Hz).
pub fn ambiguity_csv(header: &ReportHeader, results: &[AmbiguityResult]) -> String {
    let mut s = String::new();
    header.render(&mut s);
    s.push_str("waveform,axis,value,magnitude_db\n");
    for r in results {
        for (axis, cut) in [("delay", &r.zero_doppler), ("doppler", &r.zero_delay)] {
            for (x, m) in cut.axis.iter().zip(&cut.magnitude) {
                let _ = writeln!(s, "{},{axis},{x},{}", r.waveform, db(*m));
            }
        }
    }
    s
}

pub fn papr_csv(header: &ReportHeader, curves: &[(Waveform, Vec<CcdfPoint>)]) -> String {
    let mut s = String::new();
    header.render(&mut s);
    s.push_str("waveform,threshold_db,ccdf\n");
    for (w, pts) in curves {
        for p in pts {
            let _ = writeln!(s, "{w},{},{}", p.threshold_db, p.ccdf);
        }
    }
    s
}

pub fn security_csv(header: &ReportHeader, points: &[SecurityPoint]) -> String {
    let mut s = String::new();
    header.render(&mut s);
    s.push_str("delta_c1,bits,bit_errors,ber\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", p.delta_c1, p.bits, p.bit_errors, p.ber);
    }
    s
}

/// Columns `trial,source,delay,doppler,gain_re,gain_im,range_m,velocity_mps`
/// with `source` either `truth` or `estimate`.
pub fn sensing_csv(header: &ReportHeader, trials: &[SensingTrial]) -> String {
    let mut s = String::new();
    header.render(&mut s);
    s.push_str("trial,source,delay,doppler,gain_re,gain_im,range_m,velocity_mps\n");
    for t in trials {
        for (src, list) in [("truth", &t.truth), ("estimate", &t.estimate)] {
            for e in list {
                let _ = writeln!(
                    s,
                    "{},{src},{},{},{},{},{},{}",
                    t.trial, e.delay, e.doppler, e.gain_re, e.gain_im, e.range_m, e.velocity_mps
                );
            }
        }
    }
    s
}
