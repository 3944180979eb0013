//! Derived parameters of a config, printed without running it.

use std::io::Write;

use afdm::sensing::{guard_span, SensingScale};
use afdm::waveform::{c1_optimal, validate_orthogonality, Waveform};

use crate::config::{orthogonality_message, ExperimentConfig};
use crate::CliError;

/// `c1` as `k/(2N)` when it sits on that grid.
fn fraction(c1: f64, n: usize) -> String {
    let k = c1 * (2 * n) as f64;
    if (k - k.round()).abs() < 1e-9 {
        format!("{}/{} = {c1}", k.round() as i64, 2 * n)
    } else {
        format!("{c1}")
    }
}

/// Prints one `key: value` line per derived quantity. Fails with the same
/// error `run` would, after printing what could be derived.
pub fn describe(cfg: ExperimentConfig, out: &mut impl Write) -> Result<(), CliError> {
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(|e| CliError::Io(e.to_string()));
    let sys = cfg.system.clone();
    let ch = cfg.channel.clone();
    let n = sys.n;
    w(out, format!("experiment: {}", cfg.experiment))?;
    let names: Vec<&str> = cfg.waveforms.iter().map(|w| w.name()).collect();
    w(out, format!("waveforms: {}", names.join(", ")))?;
    w(out, format!("N: {n}"))?;
    w(out, format!("channel: l_max {}, alpha_max {}, P {}, xi {}", ch.l_max, ch.alpha_max, ch.paths, sys.xi))?;
    match c1_optimal(n, ch.alpha_max, sys.xi, Some(ch.l_max)) {
        Ok(c1) => w(out, format!("c1_optimal: {}", fraction(c1, n)))?,
        Err(e) => w(out, format!("c1_optimal: none ({e})"))?,
    }
    if let Some(c1) = sys.c1 {
        w(out, format!("c1: {} (from config)", fraction(c1, n)))?;
    }
    w(out, format!("c2: {}", sys.c2.unwrap_or(1.0 / (2.0 * std::f64::consts::PI * n as f64))))?;
    w(out, format!("prefix_len: {}", ch.l_max))?;
    let g = guard_span(ch.l_max, ch.alpha_max, sys.xi);
    if 2 * g < n {
        w(out, format!("pilot_guard_span: {g} (2g+1 = {} of N = {n}, {} data slots)", 2 * g + 1, n - (2 * g + 1)))?;
    } else {
        w(out, format!("pilot_guard_span: {g} (2g+1 = {} exceeds N = {n})", 2 * g + 1))?;
    }
    if let Ok(scale) = SensingScale::new(n, ch.carrier_hz, ch.bandwidth_hz) {
        w(out, format!("range_resolution_m: {}", scale.range_m(1.0)))?;
        w(out, format!("unambiguous_range_m: {}", scale.unambiguous_range_m()))?;
        w(out, format!("velocity_resolution_mps: {}", scale.velocity_mps(1.0)))?;
        w(out, format!("unambiguous_velocity_mps: +/-{}", scale.unambiguous_velocity_mps()))?;
    }
    if cfg.waveforms.contains(&Waveform::Otfs) || sys.otfs_doppler_bins.is_some() || sys.otfs_delay_bins.is_some() {
        let line = match (sys.otfs_doppler_bins, sys.otfs_delay_bins) {
            (Some(k), Some(l)) => {
                let ok = if k * l == n { "ok" } else { "mismatch" };
                format!("otfs_grid: K*L = {k}*{l} = {} vs N = {n} ({ok})", k * l)
            }
            _ => "otfs_grid: K and L not set".to_string(),
        };
        w(out, line)?;
    }

    let resolved = cfg.resolve();
    if let Ok(r) = &resolved {
        if let Some(afdm) = r.afdm {
            let report = validate_orthogonality(&afdm, ch.l_max, ch.alpha_max);
            let line = if report.orthogonal {
                "orthogonality: ok".to_string()
            } else {
                format!("orthogonality: {}", orthogonality_message(&afdm, &report))
            };
            w(out, line)?;
        }
        w(out, format!("config_sha256: {}", r.fingerprint))?;
    }
    resolved.map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    fn text(cfg: &str) -> (String, Result<(), CliError>) {
        let mut buf = Vec::new();
        let res = describe(parse(cfg).unwrap(), &mut buf);
        (String::from_utf8(buf).unwrap(), res)
    }

    #[test]
    fn identity_profile() {
        let (s, res) = text(
            "experiment = \"ambiguity\"\nseed = 1\nwaveforms = [\"afdm\"]\n[system]\nn = 64\nxi = 0\n\
             [channel]\nl_max = 0\nalpha_max = 0\npaths = 1\n",
        );
        res.unwrap();
        assert!(s.contains("c1_optimal: 1/128 = 0.0078125"), "{s}");
        assert!(s.contains("pilot_guard_span: 0"), "{s}");
    }

    #[test]
    fn fig2_style_profile() {
        for alpha in 0..8usize {
            let (s, res) = text(&format!(
                "experiment = \"ber\"\nseed = 1\n[system]\nn = 64\notfs_doppler_bins = 8\notfs_delay_bins = 8\n\
                 [channel]\nl_max = 3\nalpha_max = {alpha}\npaths = 3\n"
            ));
            let k = 2 * (alpha + 1) + 1;
            if 4 * k <= 64 {
                res.unwrap();
                assert!(s.contains(&format!("c1_optimal: {k}/128 ")), "{s}");
                assert!(s.contains("otfs_grid: K*L = 8*8 = 64 vs N = 64 (ok)"), "{s}");
                assert!(s.contains("orthogonality: ok"), "{s}");
            } else {
                assert!(matches!(res, Err(CliError::Infeasible(_))));
                assert!(s.contains("c1_optimal: none"), "{s}");
            }
        }
    }

    #[test]
    fn otfs_mismatch_is_reported() {
        let (s, res) = text(
            "experiment = \"papr\"\nseed = 1\nwaveforms = [\"otfs\"]\n[system]\nn = 64\notfs_doppler_bins = 4\n\
             otfs_delay_bins = 8\n[channel]\nl_max = 0\nalpha_max = 0\npaths = 1\n",
        );
        assert!(s.contains("(mismatch)"), "{s}");
        assert!(matches!(res, Err(CliError::Config(_))));
    }
}
