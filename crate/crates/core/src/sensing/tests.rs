use super::*;
use crate::channel::{add_awgn_in_place, apply_channel_slice, random_channel_with, ChannelProfile, Fading};
use crate::detection::map_bits;
use crate::waveform::{Modem, SymbolMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const C2: f64 = 1.0 / (2.0 * std::f64::consts::PI * 64.0);

fn qpsk(rng: &mut ChaCha8Rng, count: usize) -> Vec<Complex64> {
    let bits: Vec<u8> = (0..2 * count).map(|_| rng.random_range(0..2)).collect();
    map_bits(&bits, &SymbolMap::qpsk()).unwrap()
}

/// Pilot frame through modulation, channel and matched DAFT.
fn receive(cfg: &AfdmConfig, symbols: &[Complex64], ch: &DelayDopplerChannel) -> Vec<Complex64> {
    let modem = Modem::afdm(*cfg).unwrap();
    let frame = modem.modulate(symbols).unwrap();
    let rx = apply_channel_slice(frame.tx_time.samples(), cfg.prefix_len, ch);
    modem.demodulate(&rx).unwrap()
}

#[test]
fn guard_span_values() {
    assert_eq!(guard_span(3, 2, 1), 27);
    assert_eq!(guard_span(0, 0, 0), 0);
    let cfg = AfdmConfig::for_profile(64, 3, 2, 1, C2).unwrap();
    let layout = PilotLayout::for_profile(&cfg, 3, 2).unwrap();
    assert_eq!(layout.guard, 27);
    assert_eq!(layout.data_len(), 64 - 55);
    check_layout(&layout, &cfg, 3, 2).unwrap();
}

#[test]
fn layout_bounds() {
    assert!(PilotLayout::new(16, 16, 1.0, 2).is_err());
    assert!(PilotLayout::new(16, 0, 0.0, 2).is_err());
    assert!(PilotLayout::new(16, 0, 1.0, 9).is_err());
    // half-width N/2 leaves no data
    let all = PilotLayout::new(16, 3, 1.0, 8).unwrap();
    assert_eq!(all.data_len(), 0);
    let f = insert_pilot(&[], &all).unwrap();
    assert!((f.symbols[3].re - 4.0).abs() < 1e-12);
    assert!((energy(&f.symbols) - 16.0).abs() < 1e-12);
    // N/2 - 1 leaves the single antipodal slot
    assert_eq!(PilotLayout::new(16, 3, 1.0, 7).unwrap().data_indices(), vec![11]);
    let cfg = AfdmConfig::for_profile(32, 3, 2, 1, C2).unwrap();
    assert!(matches!(PilotLayout::for_profile(&cfg, 3, 2), Err(Error::Infeasible(_))));
}

#[test]
fn undersized_guard_is_rejected() {
    let cfg = AfdmConfig::for_profile(64, 3, 2, 1, C2).unwrap();
    let layout = PilotLayout::new(64, 32, 1.0, 20).unwrap();
    assert!(matches!(check_layout(&layout, &cfg, 3, 2), Err(Error::Infeasible(_))));
    let rx = vec![Complex64::new(0.0, 0.0); 64];
    assert!(estimate_channel(&rx, &layout, &cfg, 3, 2, 1e-6).is_err());
}

#[test]
fn pilot_insertion_layout_and_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = AfdmConfig::for_profile(64, 1, 1, 1, C2).unwrap();
    let layout = PilotLayout { amplitude: 2.0, ..PilotLayout::for_profile(&cfg, 1, 1).unwrap() };
    let data = qpsk(&mut rng, layout.data_len());
    let f = insert_pilot(&data, &layout).unwrap();
    assert!((energy(&f.symbols) - 64.0).abs() < 1e-9);
    assert!((f.pilot_boost_db - 6.0206).abs() < 1e-3);
    assert!((f.symbols[32].re - layout.pilot_gain()).abs() < 1e-12);
    for q in 0..64 {
        if layout.is_guard(q) {
            assert_eq!(f.symbols[q], Complex64::new(0.0, 0.0));
        }
    }
    let back = layout.extract_data(&f.symbols).unwrap();
    assert!(crate::signal::max_abs_diff(&back, &data) < 1e-12);
    assert!(insert_pilot(&data[1..], &layout).is_err());
}

#[test]
fn single_unit_tap_is_recovered() {
    let cfg = AfdmConfig::for_profile(32, 1, 1, 0, C2).unwrap();
    let layout = PilotLayout::for_profile(&cfg, 1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = insert_pilot(&qpsk(&mut rng, layout.data_len()), &layout).unwrap();
    let ch = DelayDopplerChannel::identity();
    let rx = receive(&cfg, &f.symbols, &ch);
    let est = estimate_channel(&rx, &layout, &cfg, 1, 1, 1e-6).unwrap();
    assert_eq!(est.taps.len(), 1);
    assert_eq!((est.taps[0].delay, est.taps[0].doppler), (0, 0.0));
    assert!((est.taps[0].gain - Complex64::new(1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn noise_free_integer_channels_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // (N, l_max, α_max, ξ)
    for &(n, l_max, alpha_max, xi) in &[(32usize, 2usize, 1usize, 0usize), (64, 3, 2, 1)] {
        let cfg = AfdmConfig::for_profile(n, l_max, alpha_max, xi, C2).unwrap();
        let layout = PilotLayout::for_profile(&cfg, l_max, alpha_max).unwrap();
        for trial in 0..100 {
            let profile = ChannelProfile { l_max, alpha_max, paths: 1 + trial % 4, fractional: false, fading: Fading::Normalized };
            let ch = random_channel_with(&profile, &mut rng).unwrap();
            let f = insert_pilot(&qpsk(&mut rng, layout.data_len()), &layout).unwrap();
            let rx = receive(&cfg, &f.symbols, &ch);
            let est = estimate_channel(&rx, &layout, &cfg, l_max, alpha_max, 1e-6).unwrap();
            assert_eq!(est.taps.len(), ch.paths.len(), "N={n} trial {trial}");
            for p in &ch.paths {
                let g = est.gain_at(p.delay, p.doppler);
                assert!((g - p.gain).norm() < 1e-9, "N={n} trial {trial}: {g} vs {}", p.gain);
            }
        }
    }
}

#[test]
fn no_data_leaks_into_pilot_response() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (l_max, alpha_max) = (3, 2);
    let cfg = AfdmConfig::for_profile(64, l_max, alpha_max, 1, C2).unwrap();
    let layout = PilotLayout::for_profile(&cfg, l_max, alpha_max).unwrap();
    let profile = ChannelProfile { l_max, alpha_max, paths: 4, fractional: false, fading: Fading::Normalized };
    for _ in 0..20 {
        let ch = random_channel_with(&profile, &mut rng).unwrap();
        let mut f = insert_pilot(&qpsk(&mut rng, layout.data_len()), &layout).unwrap();
        f.symbols[layout.pilot_index] = Complex64::new(0.0, 0.0);
        let rx = receive(&cfg, &f.symbols, &ch);
        let worst = candidate_offsets(&cfg, l_max, alpha_max)
            .unwrap()
            .iter()
            .map(|&(_, _, loc)| rx[(layout.pilot_index + loc) % 64].norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }
}

#[test]
fn noisy_estimation_nmse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (l_max, alpha_max) = (3, 2);
    let cfg = AfdmConfig::for_profile(64, l_max, alpha_max, 1, C2).unwrap();
    let layout = PilotLayout::for_profile(&cfg, l_max, alpha_max).unwrap();
    let profile = ChannelProfile { l_max, alpha_max, paths: 3, fractional: false, fading: Fading::Normalized };
    let var = 1e-3;
    let thr = detection_threshold(var, &layout);
    let mut nmse: Vec<f64> = (0..200)
        .map(|_| {
            let ch = random_channel_with(&profile, &mut rng).unwrap();
            let f = insert_pilot(&qpsk(&mut rng, layout.data_len()), &layout).unwrap();
            let mut rx = receive(&cfg, &f.symbols, &ch);
            add_awgn_in_place(&mut rx, 30.0, &mut rng).unwrap();
            channel_nmse(&estimate_channel(&rx, &layout, &cfg, l_max, alpha_max, thr).unwrap(), &ch)
        })
        .collect();
    nmse.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_db = 10.0 * nmse[100].log10();
    assert!(median_db < -20.0, "{median_db}");
}

#[test]
fn silence_gives_empty_estimate() {
    let cfg = AfdmConfig::for_profile(32, 1, 1, 0, C2).unwrap();
    let layout = PilotLayout::for_profile(&cfg, 1, 1).unwrap();
    let rx = vec![Complex64::new(0.0, 0.0); 32];
    let est = estimate_channel(&rx, &layout, &cfg, 1, 1, 1e-6).unwrap();
    assert!(est.is_empty());
    assert!(est.to_channel(&DelayDopplerChannel::identity()).unwrap().is_none());
}

fn grid(n: usize) -> (Vec<usize>, Vec<f64>) {
    let h = (n / 2) as i64;
    ((0..n).collect(), (-h..h).map(|v| v as f64).collect())
}

fn scale(n: usize) -> SensingScale {
    SensingScale::new(n, 50e9, 150e6).unwrap()
}

#[test]
fn map_of_reference_peaks_at_origin() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let tx = qpsk(&mut rng, 32);
    let (d, v) = grid(32);
    let map = matched_filter_map(&tx, &tx, &d, &v).unwrap();
    let (pd, pv) = map.argmax();
    assert_eq!((map.delays[pd], map.dopplers[pv]), (0, 0.0));
    assert_eq!(map.at(pd, pv), 1.0);
    assert!((map.corr_at(pd, pv) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    assert!(matched_filter_map(&tx, &tx, &[], &v).is_err());
    assert!(matched_filter_map(&tx, &tx, &[32], &v).is_err());
}

#[test]
fn map_is_phase_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tx = qpsk(&mut rng, 32);
    let rx: Vec<_> = tx.iter().enumerate().map(|(i, v)| v * (0.1 * i as f64).cos()).collect();
    let rot: Vec<_> = rx.iter().map(|v| v * Complex64::from_polar(1.0, 2.1)).collect();
    let (d, v) = grid(32);
    let a = matched_filter_map(&rx, &tx, &d, &v).unwrap();
    let b = matched_filter_map(&rot, &tx, &d, &v).unwrap();
    let worst = a.magnitude.iter().zip(&b.magnitude).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12);
}

#[test]
fn exhaustive_single_target_sweep() {
    let n = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = AfdmConfig::new(n, crate::transforms::ChirpParams::new(3.0 / 64.0, C2).unwrap(), 0, n - 1).unwrap();
    let modem = Modem::afdm(cfg).unwrap();
    let frame = modem.modulate(&qpsk(&mut rng, n)).unwrap();
    let (dg, vg) = grid(n);
    let sc = scale(n);
    for l in 0..n {
        for &nu in &vg {
            let gain = Complex64::from_polar(0.8, 0.3 * l as f64 - nu);
            let ch = DelayDopplerChannel::new(vec![PathTap::new(gain, l, nu)], n - 1, n / 2, 50e9, 150e6).unwrap();
            let rx = apply_channel_slice(frame.tx_time.samples(), n - 1, &ch);
            let map = matched_filter_map(&rx[n - 1..], frame.body(), &dg, &vg).unwrap();
            let t = estimate_targets(&map, DEFAULT_TARGET_THRESHOLD, 1, &sc);
            assert_eq!(t.len(), 1);
            assert_eq!((t[0].delay, t[0].doppler), (l, nu), "injected ({l}, {nu})");
            assert!((t[0].gain() - gain).norm() < 1e-9);
        }
    }
}

#[test]
fn two_targets_resolve() {
    let n = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let tx = qpsk(&mut rng, n);
    let paths = vec![
        PathTap::new(Complex64::new(1.0, 0.0), 3, 2.0),
        PathTap::new(Complex64::new(0.0, 0.8), 6, -4.0),
    ];
    let ch = DelayDopplerChannel::new(paths, n - 1, n / 2, 50e9, 150e6).unwrap();
    let mut padded = tx[1..].to_vec();
    padded.extend_from_slice(&tx);
    let rx = apply_channel_slice(&padded, n - 1, &ch);
    let (dg, vg) = grid(n);
    let map = matched_filter_map(&rx[n - 1..], &tx, &dg, &vg).unwrap();
    let mut t = estimate_targets(&map, 0.5, 4, &scale(n));
    t.sort_by_key(|s| s.delay);
    assert_eq!(t.len(), 2);
    assert_eq!((t[0].delay, t[0].doppler), (3, 2.0));
    assert_eq!((t[1].delay, t[1].doppler), (6, -4.0));
}

#[test]
fn quiet_map_gives_no_targets() {
    let map = DelayDopplerMap {
        delays: vec![0, 1],
        dopplers: vec![0.0, 1.0],
        corr: vec![Complex64::new(0.05, 0.0); 4],
        magnitude: vec![0.05; 4],
    };
    assert!(estimate_targets(&map, 0.1, 4, &scale(32)).is_empty());
}

#[test]
fn physical_conversion() {
    let sc = scale(64);
    let v = sc.velocity_mps(1.0);
    assert!((v - 150e6 / 64.0 * SPEED_OF_LIGHT / 50e9).abs() < 1e-9);
    assert!((v - 1.405e4).abs() < 10.0, "{v}");
    assert!((sc.range_m(1.0) - 1.998_616_4).abs() < 1e-6);
    let s = sc.scatterer(2, -1.0, Complex64::new(0.5, -0.5));
    let text = serde_json::to_string(&s).unwrap();
    let back: ScattererEstimate = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
}

#[test]
fn parabolic_refinement_moves_toward_true_doppler() {
    let n = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let tx = qpsk(&mut rng, n);
    let nu = 2.3;
    let rx: Vec<_> = tx.iter().enumerate().map(|(i, v)| v * cis_cycles(nu * i as f64 / n as f64)).collect();
    let vg: Vec<f64> = (-16..16).map(|v| v as f64).collect();
    let map = matched_filter_map(&rx, &tx, &[0], &vg).unwrap();
    let (d, v) = map.argmax();
    assert_eq!(map.dopplers[v], 2.0);
    let r = refine_doppler(&map, d, v).unwrap();
    assert!((r - nu).abs() < (2.0 - nu).abs(), "{r}");
}
