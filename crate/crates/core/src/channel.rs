//! Doubly-dispersive channel: time-variant application, effective-channel
//! construction for every waveform, support masks, random draws and AWGN.
//!
//! Doppler is measured in cycles per `N`-sample frame body (Doppler bins).
//! A path `(h, l, ν)` acts as `r[n] = h e^{j2πνn/N} tx[n - l]`, where `n = 0`
//! is the first body sample and the prefix occupies negative `n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{cis_cycles, ensure_finite, ComplexSignal, Domain};
use crate::waveform::{AfdmConfig, Modem, Waveform};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTap {
    pub gain: Complex64,
    /// Delay in samples.
    pub delay: usize,
    /// Normalized Doppler, cycles per frame body.
    pub doppler: f64,
}

impl PathTap {
    pub fn new(gain: Complex64, delay: usize, doppler: f64) -> Self {
        Self { gain, delay, doppler }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayDopplerChannel {
    pub paths: Vec<PathTap>,
    pub l_max: usize,
    pub alpha_max: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
}

/// Default carrier and bandwidth, 50 GHz and 150 MHz.
pub const DEFAULT_CARRIER_HZ: f64 = 50e9;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 150e6;

impl DelayDopplerChannel {
    pub fn new(
        paths: Vec<PathTap>,
        l_max: usize,
        alpha_max: usize,
        carrier_hz: f64,
        bandwidth_hz: f64,
    ) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("paths", "at least one path is required"));
        }
        for p in &paths {
            if !(p.gain.re.is_finite() && p.gain.im.is_finite() && p.doppler.is_finite()) {
                return Err(Error::NonFinite("path tap"));
            }
            if p.delay > l_max {
                return Err(Error::invalid("delay", format!("{} exceeds l_max = {l_max}", p.delay)));
            }
            if p.doppler.abs() > alpha_max as f64 + 0.5 {
                return Err(Error::invalid(
                    "doppler",
                    format!("|{}| exceeds α_max + 0.5 = {}", p.doppler, alpha_max as f64 + 0.5),
                ));
            }
        }
        if !(carrier_hz > 0.0 && bandwidth_hz > 0.0) {
            return Err(Error::invalid("carrier/bandwidth", "must be positive"));
        }
        Ok(Self { paths, l_max, alpha_max, carrier_hz, bandwidth_hz })
    }

    /// Single unit tap with no delay or Doppler.
    pub fn identity() -> Self {
        Self {
            paths: vec![PathTap::new(Complex64::new(1.0, 0.0), 0, 0.0)],
            l_max: 0,
            alpha_max: 0,
            carrier_hz: DEFAULT_CARRIER_HZ,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
        }
    }

    /// Builds a channel whose declared bounds are the tightest ones covering `paths`.
    pub fn from_paths(paths: Vec<PathTap>) -> Result<Self> {
        let l_max = paths.iter().map(|p| p.delay).max().unwrap_or(0);
        let alpha_max = paths.iter().map(|p| p.doppler.abs().round() as usize).max().unwrap_or(0);
        Self::new(paths, l_max, alpha_max, DEFAULT_CARRIER_HZ, DEFAULT_BANDWIDTH_HZ)
    }

    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.paths.iter_mut().for_each(|p| p.gain *= factor);
        out
    }

    pub fn to_record(&self) -> ChannelRecord {
        ChannelRecord {
            paths: self.paths.len(),
            taps: self
                .paths
                .iter()
                .map(|p| TapRecord { re: p.gain.re, im: p.gain.im, delay: p.delay, doppler: p.doppler })
                .collect(),
            l_max: self.l_max,
            alpha_max: self.alpha_max,
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
        }
    }
}

/// Serializable channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRecord {
    #[serde(rename = "P")]
    pub paths: usize,
    pub taps: Vec<TapRecord>,
    pub l_max: usize,
    pub alpha_max: usize,
    #[serde(rename = "f_c")]
    pub carrier_hz: f64,
    #[serde(rename = "B")]
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapRecord {
    pub re: f64,
    pub im: f64,
    #[serde(rename = "l")]
    pub delay: usize,
    #[serde(rename = "nu")]
    pub doppler: f64,
}

impl TryFrom<ChannelRecord> for DelayDopplerChannel {
    type Error = Error;

    fn try_from(rec: ChannelRecord) -> Result<Self> {
        if rec.paths != rec.taps.len() {
            return Err(Error::invalid("P", format!("P = {} but {} taps listed", rec.paths, rec.taps.len())));
        }
        let paths = rec
            .taps
            .iter()
            .map(|t| PathTap::new(Complex64::new(t.re, t.im), t.delay, t.doppler))
            .collect();
        DelayDopplerChannel::new(paths, rec.l_max, rec.alpha_max, rec.carrier_hz, rec.bandwidth_hz)
    }
}

fn check_prefix(ch: &DelayDopplerChannel, prefix_len: usize) -> Result<()> {
    let d = ch.max_delay();
    if d > prefix_len {
        return Err(Error::Infeasible(format!("channel delay {d} exceeds prefix length {prefix_len}")));
    }
    Ok(())
}

pub(crate) fn apply_channel_slice(tx: &[Complex64], prefix_len: usize, ch: &DelayDopplerChannel) -> Vec<Complex64> {
    let total = tx.len();
    let n = (total - prefix_len) as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); total];
    for p in &ch.paths {
        for (i, o) in out.iter_mut().enumerate().skip(p.delay) {
            let t = i as f64 - prefix_len as f64;
            *o += p.gain * cis_cycles(p.doppler * t / n) * tx[i - p.delay];
        }
    }
    out
}

/// Passes a prefixed time-domain frame through the channel (noise-free).
pub fn apply_channel(tx: &ComplexSignal, prefix_len: usize, ch: &DelayDopplerChannel) -> Result<ComplexSignal> {
    if prefix_len >= tx.len() {
        return Err(Error::invalid("prefix_len", "frame has no body"));
    }
    check_prefix(ch, prefix_len)?;
    ensure_finite(tx.samples(), "transmit frame")?;
    ComplexSignal::new(apply_channel_slice(tx.samples(), prefix_len, ch), Domain::Time)
}

/// Dense `(N + L) x (N + L)` linear time-variant channel matrix.
pub fn ltv_matrix(ch: &DelayDopplerChannel, n: usize, prefix_len: usize) -> DMatrix<Complex64> {
    let total = n + prefix_len;
    let mut m = DMatrix::zeros(total, total);
    for p in &ch.paths {
        for row in p.delay..total {
            let t = row as f64 - prefix_len as f64;
            m[(row, row - p.delay)] += p.gain * cis_cycles(p.doppler * t / n as f64);
        }
    }
    m
}

/// Native-domain effective channel `y = H x` of one waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub matrix: DMatrix<Complex64>,
    pub waveform: Waveform,
}

impl EffectiveChannel {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn identity(n: usize, waveform: Waveform) -> Self {
        Self { matrix: DMatrix::identity(n, n), waveform }
    }
}

/// Effective channel by probing: column `k` is `demod(channel(mod(e_k)))`.
pub fn effective_matrix(ch: &DelayDopplerChannel, modem: &Modem) -> Result<EffectiveChannel> {
    check_prefix(ch, modem.prefix_len())?;
    let n = modem.n();
    let mut matrix = DMatrix::zeros(n, n);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        e.fill(Complex64::new(0.0, 0.0));
        e[k] = Complex64::new(1.0, 0.0);
        let frame = modem.modulate(&e)?;
        let rx = apply_channel_slice(frame.tx_time.samples(), modem.prefix_len(), ch);
        let col = modem.demodulate(&rx)?;
        matrix.column_mut(k).copy_from_slice(&col);
    }
    Ok(EffectiveChannel { matrix, waveform: modem.waveform() })
}

/// Effective channel as the dense product `T_demod · H_ltv · T_mod`.
pub fn effective_matrix_dense(ch: &DelayDopplerChannel, modem: &Modem) -> Result<EffectiveChannel> {
    check_prefix(ch, modem.prefix_len())?;
    let h = ltv_matrix(ch, modem.n(), modem.prefix_len());
    let matrix = modem.demodulation_matrix() * h * modem.modulation_matrix();
    Ok(EffectiveChannel { matrix, waveform: modem.waveform() })
}

/// Closed-form AFDM effective channel.
///
/// Entry `(p, q)` collects, per path,
/// `h/N · e^{j2π(c1 l² + c2(q² - p²) - lq/N)} · Σ_n e^{j2πn(ν - 2N c1 l + q - p)/N}`;
/// for integer `ν` and integer `2N c1 l` the sum is `N` on the diagonal
/// `p - q ≡ ν - 2N c1 l (mod N)` and zero elsewhere.
pub fn effective_matrix_afdm_analytic(ch: &DelayDopplerChannel, cfg: &AfdmConfig) -> Result<EffectiveChannel> {
    check_prefix(ch, cfg.prefix_len)?;
    let n = cfg.n;
    let mut matrix = DMatrix::zeros(n, n);
    for path in &ch.paths {
        for p in 0..n {
            for q in 0..n {
                matrix[(p, q)] += path.gain * afdm_tap_entry(cfg, path.delay, path.doppler, p, q);
            }
        }
    }
    Ok(EffectiveChannel { matrix, waveform: Waveform::Afdm })
}

/// Entry `(p, q)` of the AFDM effective channel of a unit-gain tap.
pub(crate) fn afdm_tap_entry(cfg: &AfdmConfig, delay: usize, doppler: f64, p: usize, q: usize) -> Complex64 {
    let n = cfg.n;
    let nf = n as f64;
    let (c1, c2) = (cfg.chirp.c1(), cfg.chirp.c2());
    let l = delay as f64;
    let (pf, qf) = (p as f64, q as f64);
    let sum = dirichlet(doppler - 2.0 * nf * c1 * l + qf - pf, n);
    if sum.norm() == 0.0 {
        return sum;
    }
    let phase = cis_cycles(c1 * l * l) * cis_cycles(c2 * qf * qf) * cis_cycles(-c2 * pf * pf)
        * cis_cycles(-(((delay * q) % n) as f64) / nf);
    phase * sum / nf
}

/// `Σ_{n<N} e^{j2πθn/N}`.
fn dirichlet(theta: f64, n: usize) -> Complex64 {
    let nf = n as f64;
    let frac = theta / nf - (theta / nf).round();
    if frac.abs() < 1e-13 {
        return Complex64::new(nf, 0.0);
    }
    let r = theta - theta.round();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    (Complex64::new(1.0, 0.0) - cis_cycles(theta)) / (Complex64::new(1.0, 0.0) - cis_cycles(theta / nf))
}

/// Boolean `N x N` occupancy mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask {
    n: usize,
    cells: Vec<bool>,
}

impl SupportMask {
    pub fn empty(n: usize) -> Self {
        Self { n, cells: vec![false; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize) {
        self.cells[row * self.n + col] = true;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Every cell of `other` is also set here.
    pub fn contains(&self, other: &SupportMask) -> bool {
        self.n == other.n && self.cells.iter().zip(&other.cells).all(|(&a, &b)| a || !b)
    }

    /// Occupied columns of each row.
    pub fn row_columns(&self, row: usize) -> Vec<usize> {
        (0..self.n).filter(|&c| self.get(row, c)).collect()
    }

    /// Set of row-minus-column offsets `(p - q) mod N` that are occupied.
    pub fn offsets(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        for r in 0..self.n {
            for c in 0..self.n {
                if self.get(r, c) {
                    seen[(r + self.n - c) % self.n] = true;
                }
            }
        }
        (0..self.n).filter(|&d| seen[d]).collect()
    }
}

/// Entries whose magnitude exceeds `rel_threshold` times the largest magnitude.
pub fn support_mask(eff: &EffectiveChannel, rel_threshold: f64) -> Result<SupportMask> {
    if !(rel_threshold > 0.0) {
        return Err(Error::invalid("threshold", "must be positive"));
    }
    let n = eff.n();
    let peak = eff.matrix.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut mask = SupportMask::empty(n);
    if peak == 0.0 {
        return Ok(mask);
    }
    for r in 0..n {
        for c in 0..n {
            if eff.matrix[(r, c)].norm() > rel_threshold * peak {
                mask.set(r, c);
            }
        }
    }
    Ok(mask)
}

pub const DEFAULT_MASK_THRESHOLD: f64 = 1e-3;

/// Predicted AFDM support: each path occupies the diagonal at its band offset
/// (Doppler rounded to the nearest bin), widened by `widen` on each side.
pub fn analytic_band_mask(ch: &DelayDopplerChannel, cfg: &AfdmConfig, widen: usize) -> SupportMask {
    let n = cfg.n;
    let mut mask = SupportMask::empty(n);
    for path in &ch.paths {
        let centre = cfg.band_offset(path.delay, path.doppler.round()).round() as i64;
        for w in -(widen as i64)..=widen as i64 {
            let off = (centre + w).rem_euclid(n as i64) as usize;
            for q in 0..n {
                mask.set((q + off) % n, q);
            }
        }
    }
    mask
}

/// Adds circularly-symmetric Gaussian noise of per-sample variance
/// `10^(-snr_db/10)`. Returns the noisy signal and the variance used.
pub fn add_awgn(r: &ComplexSignal, snr_db: f64, seed: u64) -> Result<(ComplexSignal, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = r.samples().to_vec();
    let var = add_awgn_in_place(&mut out, snr_db, &mut rng)?;
    Ok((ComplexSignal::new(out, r.domain())?, var))
}

pub fn noise_variance(snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() {
        return Err(Error::NonFinite("snr_db"));
    }
    Ok(10f64.powf(-snr_db / 10.0))
}

pub fn add_awgn_in_place<R: Rng>(x: &mut [Complex64], snr_db: f64, rng: &mut R) -> Result<f64> {
    let var = noise_variance(snr_db)?;
    if var == 0.0 {
        return Ok(0.0);
    }
    let sd = (var / 2.0).sqrt();
    for v in x.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(re, im) * sd;
    }
    Ok(var)
}

/// Bounds and size of a random channel draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub l_max: usize,
    pub alpha_max: usize,
    pub paths: usize,
    pub fractional: bool,
    #[serde(default)]
    pub fading: Fading,
}

/// Law of the random path gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fading {
    /// i.i.d. complex Gaussian rescaled so that `Σ|h|² = 1` exactly.
    #[default]
    Normalized,
    /// i.i.d. `CN(0, 1/P)`, so that `E[Σ|h|²] = 1`.
    Rayleigh,
}

/// Random channel with distinct `(l, round(ν))` taps; gains follow the
/// profile's [`Fading`] law.
pub fn random_channel(profile: &ChannelProfile, seed: u64) -> Result<DelayDopplerChannel> {
    random_channel_with(profile, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_channel_with<R: Rng>(profile: &ChannelProfile, rng: &mut R) -> Result<DelayDopplerChannel> {
    let cells = (profile.l_max + 1) * (2 * profile.alpha_max + 1);
    if profile.paths == 0 || profile.paths > cells {
        return Err(Error::Infeasible(format!(
            "{} distinct taps requested from {cells} delay-Doppler cells",
            profile.paths
        )));
    }
    let a = profile.alpha_max as i64;
    let mut taps: Vec<(usize, f64)> = Vec::with_capacity(profile.paths);
    while taps.len() < profile.paths {
        let l = rng.random_range(0..=profile.l_max);
        let nu = if profile.fractional && a > 0 {
            rng.random_range(-(a as f64)..=a as f64)
        } else {
            rng.random_range(-a..=a) as f64
        };
        if taps.iter().all(|&(l2, nu2)| l2 != l || nu2.round() != nu.round()) {
            taps.push((l, nu));
        }
    }
    let mut gains: Vec<Complex64> = (0..profile.paths)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        })
        .collect();
    let norm = match profile.fading {
        Fading::Normalized => gains.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt(),
        Fading::Rayleigh => (2.0 * profile.paths as f64).sqrt(),
    };
    gains.iter_mut().for_each(|g| *g /= norm);
    let paths = taps
        .into_iter()
        .zip(gains)
        .map(|((l, nu), g)| PathTap::new(g, l, nu))
        .collect();
    DelayDopplerChannel::new(paths, profile.l_max, profile.alpha_max, DEFAULT_CARRIER_HZ, DEFAULT_BANDWIDTH_HZ)
}
