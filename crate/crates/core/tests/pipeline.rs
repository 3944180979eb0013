//! Public-API chains across modules: bits to symbols to frames through a
//! channel and back.

use afdm::analysis::BerConfig;
use afdm::channel::{apply_channel, effective_matrix, random_channel, ChannelProfile, Fading};
use afdm::detection::{demap_symbols, equalize, map_bits, Equalizer, EqualizerKind};
use afdm::waveform::{validate_orthogonality, SymbolMap, Waveform};
use proptest::prelude::*;

fn config(n: usize, l_max: usize, alpha_max: usize) -> BerConfig {
    BerConfig {
        waveforms: Waveform::ALL.to_vec(),
        n,
        modulation_order: 4,
        profile: ChannelProfile { l_max, alpha_max, paths: 3, fractional: false, fading: Fading::Normalized },
        xi: 0,
        c1: None,
        c2: 0.01,
        otfs_doppler_bins: 4,
        otfs_delay_bins: n / 4,
        equalizer: EqualizerKind::ZeroForcing,
        snr_db: vec![30.0],
        max_trials: 1,
        target_errors: 1,
        min_bits: 0,
        batch: 1,
        seed: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noise_free_chain_is_linear_and_invertible(
        seed in any::<u64>(),
        bits in proptest::collection::vec(0u8..2, 64),
    ) {
        let cfg = config(32, 2, 1);
        let afdm = cfg.afdm_config().unwrap();
        prop_assert!(validate_orthogonality(&afdm, 2, 1).orthogonal);
        let ch = random_channel(&cfg.profile, seed).unwrap();
        let map = SymbolMap::new(4).unwrap();
        let x = map_bits(&bits, &map).unwrap();
        for w in Waveform::ALL {
            let modem = cfg.modem(w).unwrap();
            let frame = modem.modulate(&x).unwrap();
            let r = apply_channel(&frame.tx_time, modem.prefix_len(), &ch).unwrap();
            let y = modem.demodulate(r.samples()).unwrap();

            let eff = effective_matrix(&ch, &modem).unwrap();
            let hx = &eff.matrix * nalgebra::DVector::from_column_slice(&x);
            let err = y.iter().zip(hx.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-10, "{}: y != H x by {err}", w.name());

            // the LMMSE estimate at tiny noise variance must decide like ZF
            for eq in [Equalizer::zero_forcing(), Equalizer::lmmse(1e-9).unwrap()] {
                let xh = equalize(&y, &eff, &eq).unwrap();
                prop_assert_eq!(demap_symbols(&xh, &map), bits.clone(), "{}", w.name());
            }
        }
    }
}
