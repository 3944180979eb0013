//! Modulators and demodulators for OFDM, OCDM, AFDM and OTFS.
//!
//! Every modem maps `N` native-domain symbols to an `N`-sample time-domain
//! body through a unitary transform and prepends a prefix of `L` samples.
//! The prefix copies the tail of the body, multiplied by the chirp-periodic
//! phase `exp(-j2π c1 (N² + 2Nn))` for prefix position `n ∈ [-L, -1]`. With
//! `c1 = 0` this is a plain cyclic prefix, which is what OFDM, OCDM and OTFS use.

mod afdm;
mod otfs;
mod symbols;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{cis_cycles, ensure_finite, max_abs_diff, ComplexSignal, Domain};
use crate::transforms::{
    daft_fast_slice, dfnt_matrix, dfnt_slice, dft, idaft_fast_slice, idaft_matrix, idft, ChirpParams,
};

pub use afdm::{
    afdm_precoder, c1_optimal, tap_collisions, validate_orthogonality, AfdmConfig, GridTap,
    OrthogonalityReport,
};
pub use otfs::OtfsConfig;
pub use symbols::SymbolMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    Ofdm,
    Ocdm,
    Afdm,
    Otfs,
}

impl Waveform {
    pub const ALL: [Waveform; 4] = [Waveform::Ofdm, Waveform::Ocdm, Waveform::Otfs, Waveform::Afdm];

    pub fn name(&self) -> &'static str {
        match self {
            Waveform::Ofdm => "ofdm",
            Waveform::Ocdm => "ocdm",
            Waveform::Afdm => "afdm",
            Waveform::Otfs => "otfs",
        }
    }

    fn native_domain(&self) -> Domain {
        match self {
            Waveform::Ofdm | Waveform::Ocdm => Domain::Frequency,
            Waveform::Afdm => Domain::Daft,
            Waveform::Otfs => Domain::DelayDoppler,
        }
    }
}

impl fmt::Display for Waveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Waveform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ofdm" => Ok(Waveform::Ofdm),
            "ocdm" => Ok(Waveform::Ocdm),
            "afdm" => Ok(Waveform::Afdm),
            "otfs" => Ok(Waveform::Otfs),
            other => Err(Error::invalid("waveform", format!("unknown waveform `{other}`"))),
        }
    }
}

/// A modulated frame: the native-domain payload and the prefixed time signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub payload: ComplexSignal,
    pub tx_time: ComplexSignal,
    pub waveform: Waveform,
    pub prefix_len: usize,
    /// Chirp rate used for the prefix phase; zero for plain cyclic prefixes.
    pub prefix_c1: f64,
}

impl Frame {
    pub fn body(&self) -> &[Complex64] {
        &self.tx_time.samples()[self.prefix_len..]
    }

    pub fn prefix(&self) -> &[Complex64] {
        &self.tx_time.samples()[..self.prefix_len]
    }

    /// Largest deviation of the stored prefix from the prefix rule applied to
    /// the stored body.
    pub fn check_prefix(&self) -> f64 {
        let expect = prefix_samples(self.body(), self.prefix_len, self.prefix_c1);
        if expect.is_empty() {
            return 0.0;
        }
        max_abs_diff(&expect, self.prefix())
    }
}

fn prefix_samples(body: &[Complex64], prefix_len: usize, c1: f64) -> Vec<Complex64> {
    let n = body.len() as i64;
    (-(prefix_len as i64)..0)
        .map(|t| {
            let v = body[(n + t) as usize];
            if c1 == 0.0 {
                v
            } else {
                v * cis_cycles(-c1 * (n * n + 2 * n * t) as f64)
            }
        })
        .collect()
}

pub(crate) fn with_prefix(body: &[Complex64], prefix_len: usize, c1: f64) -> Vec<Complex64> {
    let mut out = prefix_samples(body, prefix_len, c1);
    out.extend_from_slice(body);
    out
}

/// Chirp-periodic prefix insertion.
pub fn prepend_cpp(s: &ComplexSignal, cfg: &AfdmConfig) -> Result<ComplexSignal> {
    if s.len() != cfg.n {
        return Err(Error::LengthMismatch { expected: cfg.n, actual: s.len() });
    }
    if cfg.prefix_len >= cfg.n {
        return Err(Error::invalid("prefix_len", format!("{} >= N = {}", cfg.prefix_len, cfg.n)));
    }
    ComplexSignal::new(with_prefix(s.samples(), cfg.prefix_len, cfg.chirp.c1()), Domain::Time)
}

/// A configured transceiver for one waveform.
#[derive(Debug, Clone, PartialEq)]
pub enum Modem {
    Ofdm { n: usize, cp_len: usize },
    Ocdm { n: usize, cp_len: usize },
    Afdm(AfdmConfig),
    Otfs { cfg: OtfsConfig, cp_len: usize },
}

impl Modem {
    pub fn ofdm(n: usize, cp_len: usize) -> Result<Self> {
        check_dims(n, cp_len)?;
        Ok(Modem::Ofdm { n, cp_len })
    }

    pub fn ocdm(n: usize, cp_len: usize) -> Result<Self> {
        check_dims(n, cp_len)?;
        if !n.is_multiple_of(2) {
            return Err(Error::invalid("N", "OCDM needs even N"));
        }
        Ok(Modem::Ocdm { n, cp_len })
    }

    pub fn afdm(cfg: AfdmConfig) -> Result<Self> {
        check_dims(cfg.n, cfg.prefix_len)?;
        Ok(Modem::Afdm(cfg))
    }

    pub fn otfs(cfg: OtfsConfig, cp_len: usize) -> Result<Self> {
        check_dims(cfg.frame_len(), cp_len)?;
        Ok(Modem::Otfs { cfg, cp_len })
    }

    pub fn n(&self) -> usize {
        match self {
            Modem::Ofdm { n, .. } | Modem::Ocdm { n, .. } => *n,
            Modem::Afdm(cfg) => cfg.n,
            Modem::Otfs { cfg, .. } => cfg.frame_len(),
        }
    }

    pub fn prefix_len(&self) -> usize {
        match self {
            Modem::Ofdm { cp_len, .. } | Modem::Ocdm { cp_len, .. } | Modem::Otfs { cp_len, .. } => {
                *cp_len
            }
            Modem::Afdm(cfg) => cfg.prefix_len,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.n() + self.prefix_len()
    }

    pub fn waveform(&self) -> Waveform {
        match self {
            Modem::Ofdm { .. } => Waveform::Ofdm,
            Modem::Ocdm { .. } => Waveform::Ocdm,
            Modem::Afdm(_) => Waveform::Afdm,
            Modem::Otfs { .. } => Waveform::Otfs,
        }
    }

    pub fn prefix_c1(&self) -> f64 {
        match self {
            Modem::Afdm(cfg) => cfg.chirp.c1(),
            _ => 0.0,
        }
    }

    /// Native-domain symbols to time-domain body (no prefix).
    pub fn modulate_body(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len(), self.n())?;
        ensure_finite(x, "symbols")?;
        Ok(match self {
            Modem::Ofdm { .. } => idft(x),
            Modem::Ocdm { .. } => dfnt_slice(x, true)?,
            Modem::Afdm(cfg) => idaft_fast_slice(x, &cfg.chirp),
            Modem::Otfs { cfg, .. } => otfs::zak_inverse(x, cfg),
        })
    }

    /// Time-domain body (no prefix) to native-domain symbols.
    pub fn demodulate_body(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(s.len(), self.n())?;
        ensure_finite(s, "received samples")?;
        Ok(match self {
            Modem::Ofdm { .. } => dft(s),
            Modem::Ocdm { .. } => dfnt_slice(s, false)?,
            Modem::Afdm(cfg) => daft_fast_slice(s, &cfg.chirp),
            Modem::Otfs { cfg, .. } => otfs::zak_forward(s, cfg),
        })
    }

    pub fn modulate(&self, x: &[Complex64]) -> Result<Frame> {
        let body = self.modulate_body(x)?;
        let tx = with_prefix(&body, self.prefix_len(), self.prefix_c1());
        Ok(Frame {
            payload: ComplexSignal::new(x.to_vec(), self.waveform().native_domain())?,
            tx_time: ComplexSignal::new(tx, Domain::Time)?,
            waveform: self.waveform(),
            prefix_len: self.prefix_len(),
            prefix_c1: self.prefix_c1(),
        })
    }

    /// Strips the prefix from a received frame and demodulates the body.
    pub fn demodulate(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(r.len(), self.frame_len())?;
        self.demodulate_body(&r[self.prefix_len()..])
    }

    fn check_len(&self, actual: usize, expected: usize) -> Result<()> {
        if actual != expected {
            return Err(Error::LengthMismatch { expected, actual });
        }
        Ok(())
    }

    /// Dense `N x N` body modulation matrix, built from the transform
    /// definitions rather than the fast paths.
    pub fn body_matrix(&self) -> DMatrix<Complex64> {
        match self {
            Modem::Ofdm { n, .. } => idaft_matrix(*n, &ChirpParams::zero()),
            Modem::Ocdm { n, .. } => dfnt_matrix(*n).expect("even N checked at construction").adjoint(),
            Modem::Afdm(cfg) => idaft_matrix(cfg.n, &cfg.chirp),
            Modem::Otfs { cfg, .. } => otfs::zak_matrix(cfg),
        }
    }

    /// Dense `(N + L) x N` matrix from symbols to the prefixed frame.
    pub fn modulation_matrix(&self) -> DMatrix<Complex64> {
        let body = self.body_matrix();
        let (n, l) = (self.n(), self.prefix_len());
        let c1 = self.prefix_c1();
        let mut m = DMatrix::zeros(n + l, n);
        for row in 0..n + l {
            let t = row as i64 - l as i64;
            let (src, phase) = if t < 0 {
                let ni = n as i64;
                ((ni + t) as usize, cis_cycles(-c1 * (ni * ni + 2 * ni * t) as f64))
            } else {
                (t as usize, Complex64::new(1.0, 0.0))
            };
            for col in 0..n {
                m[(row, col)] = body[(src, col)] * phase;
            }
        }
        m
    }

    /// Dense `N x (N + L)` matrix discarding the prefix and demodulating.
    pub fn demodulation_matrix(&self) -> DMatrix<Complex64> {
        let (n, l) = (self.n(), self.prefix_len());
        let inv = self.body_matrix().adjoint();
        let mut m = DMatrix::zeros(n, n + l);
        m.view_mut((0, l), (n, n)).copy_from(&inv);
        m
    }
}

fn check_dims(n: usize, prefix_len: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("N", "must be at least 2"));
    }
    if prefix_len >= n {
        return Err(Error::invalid("prefix_len", format!("{prefix_len} >= N = {n}")));
    }
    Ok(())
}

pub fn modulate_afdm(x: &[Complex64], cfg: &AfdmConfig) -> Result<Frame> {
    Modem::afdm(*cfg)?.modulate(x)
}

pub fn demodulate_afdm(r: &ComplexSignal, cfg: &AfdmConfig) -> Result<ComplexSignal> {
    let y = Modem::afdm(*cfg)?.demodulate(r.samples())?;
    ComplexSignal::new(y, Domain::Daft)
}

pub fn modulate_ofdm(x: &[Complex64], cp_len: usize) -> Result<Frame> {
    Modem::ofdm(x.len(), cp_len)?.modulate(x)
}

pub fn demodulate_ofdm(r: &[Complex64], n: usize, cp_len: usize) -> Result<Vec<Complex64>> {
    Modem::ofdm(n, cp_len)?.demodulate(r)
}

pub fn modulate_ocdm(x: &[Complex64], cp_len: usize) -> Result<Frame> {
    Modem::ocdm(x.len(), cp_len)?.modulate(x)
}

pub fn demodulate_ocdm(r: &[Complex64], n: usize, cp_len: usize) -> Result<Vec<Complex64>> {
    Modem::ocdm(n, cp_len)?.demodulate(r)
}

pub fn modulate_otfs(x: &[Complex64], cfg: &OtfsConfig, cp_len: usize) -> Result<Frame> {
    cfg.check_frame_len(x.len())?;
    Modem::otfs(*cfg, cp_len)?.modulate(x)
}

pub fn demodulate_otfs(r: &[Complex64], cfg: &OtfsConfig, cp_len: usize) -> Result<Vec<Complex64>> {
    Modem::otfs(*cfg, cp_len)?.demodulate(r)
}

/// AFDM built as OFDM over precoded symbols `P x`, `P = F · A^H`.
///
/// The returned frame carries a plain cyclic prefix; only its body is
/// expected to agree with [`modulate_afdm`].
pub fn afdm_as_precoded_ofdm(x: &[Complex64], cfg: &AfdmConfig) -> Result<Frame> {
    if x.len() != cfg.n {
        return Err(Error::LengthMismatch { expected: cfg.n, actual: x.len() });
    }
    let p = afdm_precoder(cfg);
    let px = p * nalgebra::DVector::from_column_slice(x);
    let mut frame = modulate_ofdm(px.as_slice(), cfg.prefix_len)?;
    frame.payload = ComplexSignal::new(x.to_vec(), Domain::Daft)?;
    Ok(frame)
}

/// Body and prefix discrepancies between two frames of equal shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameComparison {
    pub body_max_err: f64,
    pub prefix_max_err: f64,
}

pub fn compare_frames(a: &Frame, b: &Frame) -> Result<FrameComparison> {
    if a.tx_time.len() != b.tx_time.len() || a.prefix_len != b.prefix_len {
        return Err(Error::LengthMismatch { expected: a.tx_time.len(), actual: b.tx_time.len() });
    }
    let prefix_max_err = if a.prefix_len == 0 { 0.0 } else { max_abs_diff(a.prefix(), b.prefix()) };
    Ok(FrameComparison { body_max_err: max_abs_diff(a.body(), b.body()), prefix_max_err })
}
