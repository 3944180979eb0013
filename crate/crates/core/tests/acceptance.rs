//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use afdm::analysis::{
    ber_csv, diversity_slope, papr_ccdf, papr_csv, papr_samples, run_ber, security_csv, security_experiment,
    waveform_ambiguity, ambiguity_csv, BerConfig, ReportHeader, SecurityConfig,
};
use afdm::channel::{
    analytic_band_mask, apply_channel, effective_matrix, effective_matrix_dense, random_channel,
    support_mask, ChannelProfile, DelayDopplerChannel, Fading, PathTap, DEFAULT_MASK_THRESHOLD,
};
use afdm::detection::{map_bits, EqualizerKind};
use afdm::sensing::{
    estimate_channel, estimate_targets, insert_pilot, matched_filter_map, PilotLayout, SensingScale,
    DEFAULT_TARGET_THRESHOLD,
};
use afdm::signal::{matrix_max_abs, max_abs_diff, ComplexSignal, Domain};
use afdm::transforms::{daft, daft_fast, idaft, idaft_fast, ChirpParams};
use afdm::waveform::{AfdmConfig, Modem, OtfsConfig, SymbolMap, Waveform};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 64;

fn c2() -> f64 {
    1.0 / (2.0 * PI * N as f64)
}

fn qpsk(rng: &mut ChaCha8Rng, count: usize) -> Vec<Complex64> {
    let bits: Vec<u8> = (0..2 * count).map(|_| rng.random_range(0..2)).collect();
    map_bits(&bits, &SymbolMap::qpsk()).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, count: usize) -> Vec<Complex64> {
    (0..count).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Outcome of one criterion: pass flag plus a one-line measurement summary.
type Outcome = (bool, String);

fn transforms() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut round_trip, mut fast_vs_dense) = (0.0f64, 0.0f64);
    for n in [8usize, 16, 64, 256] {
        for _ in 0..100 {
            let p = ChirpParams::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).unwrap();
            let x = ComplexSignal::new(gaussian(&mut rng, n), Domain::Daft).unwrap();
            let s = idaft(&x, &p).unwrap();
            let s_fast = idaft_fast(&x, &p).unwrap();
            fast_vs_dense = fast_vs_dense.max(max_abs_diff(s.samples(), s_fast.samples()));
            round_trip = round_trip.max(max_abs_diff(daft(&s, &p).unwrap().samples(), x.samples()));
            round_trip = round_trip.max(max_abs_diff(daft_fast(&s_fast, &p).unwrap().samples(), x.samples()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        round_trip < 1e-10 && fast_vs_dense < 1e-10 && secs < 10.0,
        format!("round trip {round_trip:.1e}, fast vs dense {fast_vs_dense:.1e}, {secs:.2} s"),
    )
}

fn ofdm_degeneration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let afdm = Modem::afdm(AfdmConfig::new(N, ChirpParams::zero(), 0, 8).unwrap()).unwrap();
    let ofdm = Modem::ofdm(N, 8).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = qpsk(&mut rng, N);
        let a = afdm.modulate(&x).unwrap();
        let o = ofdm.modulate(&x).unwrap();
        worst = worst.max(max_abs_diff(a.tx_time.samples(), o.tx_time.samples()));
    }
    (worst < 1e-12, format!("AFDM(0, 0) vs OFDM max frame error {worst:.1e}"))
}

fn ocdm_degeneration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1.0 / (2.0 * N as f64);
    let afdm = Modem::afdm(AfdmConfig::new(N, ChirpParams::new(h, h).unwrap(), 0, 0).unwrap()).unwrap();
    let ocdm = Modem::ocdm(N, 0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = qpsk(&mut rng, N);
        let a = afdm.modulate_body(&x).unwrap();
        let o = ocdm.modulate_body(&x).unwrap();
        // least-squares global phase
        let inner: Complex64 = o.iter().zip(&a).map(|(o, a)| o.conj() * a).sum();
        let ph = Complex64::from_polar(1.0, inner.arg());
        let fitted: Vec<_> = o.iter().map(|v| v * ph).collect();
        worst = worst.max(max_abs_diff(&a, &fitted));
    }
    (worst < 1e-9, format!("AFDM(1/2N, 1/2N) vs phase-fitted OCDM max error {worst:.1e}"))
}

fn effective_channel_oracle() -> Outcome {
    let mut probe_err = 0.0f64;
    let mut mask_mismatch = 0usize;
    for (n, k, l) in [(16usize, 4usize, 4usize), (N, 8, 8)] {
        let profile = ChannelProfile { l_max: 3, alpha_max: 2, paths: 3, fractional: true, fading: Fading::Normalized };
        let modems = [
            Modem::ofdm(n, 3).unwrap(),
            Modem::ocdm(n, 3).unwrap(),
            Modem::otfs(OtfsConfig::new(k, l).unwrap(), 3).unwrap(),
            Modem::afdm(AfdmConfig::new(n, ChirpParams::new(3.0 / (2.0 * n as f64), c2()).unwrap(), 1, 3).unwrap()).unwrap(),
        ];
        for seed in 0..20 {
            let ch = random_channel(&profile, seed).unwrap();
            for m in &modems {
                let a = effective_matrix(&ch, m).unwrap().matrix;
                let b = effective_matrix_dense(&ch, m).unwrap().matrix;
                probe_err = probe_err.max(matrix_max_abs(&(a - b)));
            }
        }
        if n == N {
            let cfg = AfdmConfig::for_profile(N, 3, 2, 1, c2()).unwrap();
            let modem = Modem::afdm(cfg).unwrap();
            let integer = ChannelProfile { fractional: false, ..profile };
            for seed in 0..20 {
                let ch = random_channel(&integer, 100 + seed).unwrap();
                let eff = effective_matrix(&ch, &modem).unwrap();
                if support_mask(&eff, 1e-6).unwrap() != analytic_band_mask(&ch, &cfg, 0) {
                    mask_mismatch += 1;
                }
            }
        }
    }
    (
        probe_err < 1e-10 && mask_mismatch == 0,
        format!("probe vs composed max error {probe_err:.1e}; band-mask mismatches {mask_mismatch}/20"),
    )
}

fn fractional_leakage() -> Outcome {
    let cfg = AfdmConfig::for_profile(N, 3, 2, 1, c2()).unwrap();
    let modem = Modem::afdm(cfg).unwrap();
    let mask = |nu: f64| {
        let ch = DelayDopplerChannel::new(vec![PathTap::new(Complex64::new(1.0, 0.0), 1, nu)], 3, 2, 50e9, 150e6).unwrap();
        support_mask(&effective_matrix(&ch, &modem).unwrap(), DEFAULT_MASK_THRESHOLD).unwrap()
    };
    let (frac, int) = (mask(1.5), mask(2.0));
    let ok = frac.contains(&int) && frac.count() > int.count();
    (ok, format!("support cells: ν = 1.5 has {}, ν = 2 has {}", frac.count(), int.count()))
}

fn fig2_config() -> BerConfig {
    BerConfig {
        waveforms: Waveform::ALL.to_vec(),
        n: N,
        modulation_order: 4,
        profile: ChannelProfile { l_max: 3, alpha_max: 2, paths: 3, fractional: false, fading: Fading::Rayleigh },
        xi: 1,
        c1: None,
        c2: c2(),
        otfs_doppler_bins: 8,
        otfs_delay_bins: 8,
        equalizer: EqualizerKind::Lmmse,
        snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        max_trials: 20_000,
        target_errors: 500,
        min_bits: 200_000,
        batch: 64,
        seed: 7,
    }
}

fn fig2() -> Outcome {
    let start = Instant::now();
    let cfg = fig2_config();
    let curves = run_ber(&cfg).unwrap();
    let get = |w: Waveform| curves.iter().find(|c| c.waveform == w).unwrap();
    let (afdm, ofdm, otfs) = (get(Waveform::Afdm), get(Waveform::Ofdm), get(Waveform::Otfs));
    for c in &curves {
        let row: Vec<String> = c.points.iter().map(|p| format!("{:.1e}", p.ber)).collect();
        println!("    {:5} BER at Es/N0 {:?} dB: {}", c.waveform.name(), cfg.snr_db, row.join(" "));
    }
    let enough_bits = curves.iter().flat_map(|c| &c.points).all(|p| p.bits >= 200_000);
    let ordering = afdm
        .points
        .iter()
        .zip(&ofdm.points)
        .filter(|(a, _)| a.snr_db >= 15.0)
        .all(|(a, o)| a.ber <= o.ber);
    let (lo, hi) = (15.0, 25.0);
    let slopes = [afdm, ofdm, otfs].map(|c| diversity_slope(c, lo, hi));
    let secs = start.elapsed().as_secs_f64();
    match slopes {
        [Ok(a), Ok(o), Ok(t)] => (
            enough_bits && ordering && a - o >= 0.5 && (a - t).abs() <= 0.5,
            format!(
                "AFDM <= OFDM for SNR >= 15 dB: {ordering}; slopes over [{lo}, {hi}] dB AFDM {a:.2}, OFDM {o:.2}, OTFS {t:.2}; {secs:.0} s"
            ),
        ),
        other => (false, format!("slope estimation failed: {other:?}")),
    }
}

fn fig3() -> Outcome {
    let modems = [
        Modem::ofdm(N, 0).unwrap(),
        Modem::ocdm(N, 0).unwrap(),
        Modem::otfs(OtfsConfig::new(8, 8).unwrap(), 0).unwrap(),
        Modem::afdm(AfdmConfig::for_profile(N, 3, 2, 1, c2()).unwrap()).unwrap(),
    ];
    let unit = vec![Complex64::new(1.0, 0.0); N];
    let results: Vec<_> = modems.iter().map(|m| waveform_ambiguity(m, &unit, 2, 150e6).unwrap()).collect();
    let origin_one = results.iter().all(|r| {
        let d = r.zero_doppler.axis.iter().position(|&t| t == 0.0).unwrap();
        let v = r.zero_delay.axis.iter().position(|&f| f == 0.0).unwrap();
        r.zero_doppler.magnitude[d] == 1.0 && r.zero_delay.magnitude[v] == 1.0
    });
    let by = |w: Waveform| results.iter().find(|r| r.waveform == w).unwrap();
    let (a, o) = (by(Waveform::Afdm), by(Waveform::Ofdm));
    let (a_zd, o_zd) = (a.zero_delay_pslr_db.unwrap_or(f64::INFINITY), o.zero_delay_pslr_db.unwrap_or(f64::INFINITY));
    // sidelobe ceiling relative to the peak is minus the peak-to-sidelobe ratio
    let (a_ceiling, o_ceiling) = (-a.zero_doppler_pslr_db.unwrap(), -o.zero_doppler_pslr_db.unwrap());
    (
        origin_one && a_zd > o_zd && a_ceiling <= o_ceiling + 1.0,
        format!(
            "A(0,0) = 1 for all: {origin_one}; zero-delay PSLR AFDM {a_zd:.1} dB vs OFDM {o_zd:.1} dB; zero-Doppler sidelobe ceiling AFDM {a_ceiling:.1} dB vs OFDM {o_ceiling:.1} dB"
        ),
    )
}

fn sensing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (l_max, alpha_max) = (3, 2);
    let cfg = AfdmConfig::for_profile(N, l_max, alpha_max, 1, c2()).unwrap();
    let modem = Modem::afdm(cfg).unwrap();
    let layout = PilotLayout::for_profile(&cfg, l_max, alpha_max).unwrap();
    let (mut index_misses, mut gain_err) = (0usize, 0.0f64);
    for trial in 0..100 {
        let profile = ChannelProfile { l_max, alpha_max, paths: 1 + trial % 4, fractional: false, fading: Fading::Normalized };
        let ch = random_channel(&profile, 1000 + trial as u64).unwrap();
        let frame = insert_pilot(&qpsk(&mut rng, layout.data_len()), &layout).unwrap();
        let tx = modem.modulate(&frame.symbols).unwrap();
        let rx = modem.demodulate(&apply_channel(&tx.tx_time, l_max, &ch).unwrap().into_samples()).unwrap();
        let est = estimate_channel(&rx, &layout, &cfg, l_max, alpha_max, 1e-6).unwrap();
        if est.taps.len() != ch.paths.len() {
            index_misses += 1;
        }
        for p in &ch.paths {
            gain_err = gain_err.max((est.gain_at(p.delay, p.doppler) - p.gain).norm());
        }
    }

    let n = 32;
    let mf_cfg = AfdmConfig::new(n, ChirpParams::new(3.0 / 64.0, c2()).unwrap(), 0, n - 1).unwrap();
    let mf_modem = Modem::afdm(mf_cfg).unwrap();
    let frame = mf_modem.modulate(&qpsk(&mut rng, n)).unwrap();
    let delays: Vec<usize> = (0..n).collect();
    let dopplers: Vec<f64> = (-(n as i64) / 2..n as i64 / 2).map(|v| v as f64).collect();
    let scale = SensingScale::new(n, 50e9, 150e6).unwrap();
    let mut sweep_misses = 0usize;
    for l in 0..n {
        for &nu in &dopplers {
            let ch = DelayDopplerChannel::new(vec![PathTap::new(Complex64::new(0.9, 0.2), l, nu)], n - 1, n / 2, 50e9, 150e6)
                .unwrap();
            let rx = apply_channel(&frame.tx_time, n - 1, &ch).unwrap().into_samples();
            let map = matched_filter_map(&rx[n - 1..], frame.body(), &delays, &dopplers).unwrap();
            let t = estimate_targets(&map, DEFAULT_TARGET_THRESHOLD, 1, &scale);
            if t.len() != 1 || t[0].delay != l || t[0].doppler != nu {
                sweep_misses += 1;
            }
        }
    }
    (
        index_misses == 0 && gain_err < 1e-9 && sweep_misses == 0,
        format!(
            "pilot estimation: {index_misses}/100 index misses, max gain error {gain_err:.1e}; matched-filter sweep misses {sweep_misses}/{}",
            n * n
        ),
    )
}

fn security_config(offsets: Vec<f64>, trials: usize) -> SecurityConfig {
    SecurityConfig {
        n: N,
        c1: AfdmConfig::for_profile(N, 3, 2, 1, c2()).unwrap().chirp.c1(),
        c2: c2(),
        prefix_len: 3,
        modulation_order: 4,
        offsets,
        snr_db: 30.0,
        trials,
        seed: 9,
    }
}

fn security() -> Outcome {
    let pts = security_experiment(&security_config(vec![0.0, 1.0 / (2.0 * N as f64)], 800)).unwrap();
    let (legit, eve) = (pts[0], pts[1]);
    (
        legit.bits >= 100_000 && legit.ber < 1e-3 && (0.4..=0.6).contains(&eve.ber),
        format!("{} bits: legitimate BER {:.1e}, eavesdropper (Δc1 = 1/2N) BER {:.3}", eve.bits, legit.ber, eve.ber),
    )
}

fn determinism() -> Outcome {
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut ber = fig2_config();
            ber.max_trials = 256;
            ber.snr_db = vec![10.0, 20.0];
            let h = ReportHeader::new("ber", ber.seed, &ber.fingerprint());
            let mut out = ber_csv(&h, &run_ber(&ber).unwrap());
            let sec = security_config(vec![0.0, 0.01], 64);
            out += &security_csv(&ReportHeader::new("security", sec.seed, "x"), &security_experiment(&sec).unwrap());
            let ofdm = Modem::ofdm(N, 0).unwrap();
            let ccdf = papr_ccdf(&papr_samples(&ofdm, &SymbolMap::qpsk(), 500, 4).unwrap(), &[6.0, 8.0, 10.0]);
            out += &papr_csv(&ReportHeader::new("papr", 4, "x"), &[(Waveform::Ofdm, ccdf)]);
            let amb = waveform_ambiguity(&ofdm, &qpsk(&mut ChaCha8Rng::seed_from_u64(4), N), 2, 150e6).unwrap();
            out += &ambiguity_csv(&ReportHeader::new("ambiguity", 4, "x"), &[amb]);
            out
        })
    };
    let (a, b, c) = (render(1), render(4), render(1));
    (a == b && a == c, format!("{} CSV bytes identical across 1/4/1 threads: {}", a.len(), a == b && a == c))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1  transform correctness", transforms),
        ("2a AFDM(0, 0) equals OFDM", ofdm_degeneration),
        ("2b AFDM(1/2N, 1/2N) equals OCDM up to phase", ocdm_degeneration),
        ("3  effective-channel oracle", effective_channel_oracle),
        ("4  fractional-Doppler leakage", fractional_leakage),
        ("5  BER ordering and diversity slopes", fig2),
        ("6  ambiguity-function shape", fig3),
        ("7  pilot estimation and matched filter", sensing),
        ("8  chirp-key security", security),
        ("9  determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => (false, format!("panicked: {:?}", e.downcast_ref::<String>().map(String::as_str).or(e.downcast_ref::<&str>().copied()))),
        };
        println!("{} criterion {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
