//! Unitary discrete transform kernels and affine Fourier parameter algebra.
//!
//! Every kernel here uses the unitary `1/sqrt(N)` normalization in both
//! directions. The discrete affine Fourier transform (DAFT) with chirp rates
//! `c1` (time index) and `c2` (transform index) is
//!
//! ```text
//! A[m, n] = 1/sqrt(N) * exp(-j 2π (c1 n² + c2 m² + n m / N))
//! ```
//!
//! and the inverse (IDAFT, the AFDM modulator) is its conjugate transpose.
//! The dense matrix path is kept next to the FFT path so that either can be
//! used to check the other.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::{cis_cycles, ensure_finite, ComplexSignal, Domain};

/// AFDM chirp rates. `c1` is stored reduced modulo 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpParams {
    c1: f64,
    c2: f64,
}

impl ChirpParams {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !c1.is_finite() {
            return Err(Error::invalid("c1", "must be finite"));
        }
        if !c2.is_finite() {
            return Err(Error::invalid("c2", "must be finite"));
        }
        let mut c1 = c1.rem_euclid(1.0);
        // rem_euclid can round up to exactly 1.0 for tiny negative inputs
        if c1 >= 1.0 {
            c1 = 0.0;
        }
        Ok(Self { c1, c2 })
    }

    /// `c1 = c2 = 0`, i.e. plain DFT.
    pub fn zero() -> Self {
        Self { c1: 0.0, c2: 0.0 }
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn with_c1(&self, c1: f64) -> Result<Self> {
        Self::new(c1, self.c2)
    }
}

/// Affine Fourier transform parameters `(a, b, c, d)` with `ad - bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AftParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub const UNIMODULAR_TOL: f64 = 1e-12;

impl AftParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("aft", "parameters must be finite reals"));
        }
        let p = Self { a, b, c, d };
        if (p.determinant() - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::invalid(
                "aft",
                format!("ad - bc = {} is not 1", p.determinant()),
            ));
        }
        Ok(p)
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }
}

/// Named members of the AFT family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AftKind {
    FourierT,
    /// Fractional Fourier transform with rotation angle in `[0, 2π)`.
    FractionalFT(f64),
    /// Fresnel transform with propagation distance `z`.
    FresnelT(f64),
    Identity,
}

pub fn aft_special_case(kind: AftKind) -> AftParams {
    let (a, b, c, d) = match kind {
        AftKind::FourierT => (0.0, 1.0, -1.0, 0.0),
        AftKind::FractionalFT(alpha) => {
            let (s, c) = alpha.sin_cos();
            // snap the exact quarter turns so FrFT(π/2) coincides with the FT
            let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
            (snap(c), snap(s), -snap(s), snap(c))
        }
        AftKind::FresnelT(z) => (1.0, z, 0.0, 1.0),
        AftKind::Identity => (1.0, 0.0, 0.0, 1.0),
    };
    AftParams { a, b, c, d }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unitary forward DFT, in place: `X[k] = 1/sqrt(N) Σ x[n] e^{-j2πkn/N}`.
pub fn dft_in_place(x: &mut [Complex64]) {
    if x.is_empty() {
        return;
    }
    plan(x.len(), false).process(x);
    let s = 1.0 / (x.len() as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= s);
}

/// Unitary inverse DFT, in place.
pub fn idft_in_place(x: &mut [Complex64]) {
    if x.is_empty() {
        return;
    }
    plan(x.len(), true).process(x);
    let s = 1.0 / (x.len() as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= s);
}

pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut y = x.to_vec();
    dft_in_place(&mut y);
    y
}

pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut y = x.to_vec();
    idft_in_place(&mut y);
    y
}

/// `exp(j 2π c n²)` for `n = 0..len`.
pub fn chirp(rate: f64, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|n| cis_cycles(rate * (n as f64) * (n as f64)))
        .collect()
}

fn check_input(x: &ComplexSignal) -> Result<usize> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("N", "transform length must be at least 2"));
    }
    ensure_finite(x.samples(), "transform input")?;
    Ok(n)
}

/// Dense unitary IDAFT matrix `A^H`, `A^H[n, m] = 1/sqrt(N) e^{j2π(c1 n² + c2 m² + nm/N)}`.
pub fn idaft_matrix(n: usize, p: &ChirpParams) -> DMatrix<Complex64> {
    let scale = 1.0 / (n as f64).sqrt();
    let ch1 = chirp(p.c1, n);
    let ch2 = chirp(p.c2, n);
    DMatrix::from_fn(n, n, |t, m| {
        let lin = cis_cycles(((t * m) % n) as f64 / n as f64);
        ch1[t] * ch2[m] * lin * scale
    })
}

/// Dense unitary DAFT matrix `A`.
pub fn daft_matrix(n: usize, p: &ChirpParams) -> DMatrix<Complex64> {
    idaft_matrix(n, p).adjoint()
}

fn apply_dense(m: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let v = nalgebra::DVector::from_column_slice(x);
    (m * v).as_slice().to_vec()
}

/// IDAFT by dense matrix-vector product. Reference path, O(N²).
pub fn idaft(x: &ComplexSignal, p: &ChirpParams) -> Result<ComplexSignal> {
    let n = check_input(x)?;
    let s = apply_dense(&idaft_matrix(n, p), x.samples());
    ComplexSignal::new(s, Domain::Time)
}

/// DAFT by dense matrix-vector product. Reference path, O(N²).
pub fn daft(s: &ComplexSignal, p: &ChirpParams) -> Result<ComplexSignal> {
    let n = check_input(s)?;
    let x = apply_dense(&daft_matrix(n, p), s.samples());
    ComplexSignal::new(x, Domain::Daft)
}

pub(crate) fn idaft_fast_slice(x: &[Complex64], p: &ChirpParams) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(m, v)| v * cis_cycles(p.c2 * (m as f64) * (m as f64)))
        .collect();
    idft_in_place(&mut buf);
    for (t, v) in buf.iter_mut().enumerate() {
        *v *= cis_cycles(p.c1 * (t as f64) * (t as f64));
    }
    debug_assert_eq!(buf.len(), n);
    buf
}

pub(crate) fn daft_fast_slice(s: &[Complex64], p: &ChirpParams) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = s
        .iter()
        .enumerate()
        .map(|(t, v)| v * cis_cycles(-p.c1 * (t as f64) * (t as f64)))
        .collect();
    dft_in_place(&mut buf);
    for (m, v) in buf.iter_mut().enumerate() {
        *v *= cis_cycles(-p.c2 * (m as f64) * (m as f64));
    }
    buf
}

/// IDAFT as chirp pre-multiplication, unitary IDFT, chirp post-multiplication.
pub fn idaft_fast(x: &ComplexSignal, p: &ChirpParams) -> Result<ComplexSignal> {
    check_input(x)?;
    ComplexSignal::new(idaft_fast_slice(x.samples(), p), Domain::Time)
}

/// DAFT through the FFT path; exact adjoint of [`idaft_fast`].
pub fn daft_fast(s: &ComplexSignal, p: &ChirpParams) -> Result<ComplexSignal> {
    check_input(s)?;
    ComplexSignal::new(daft_fast_slice(s.samples(), p), Domain::Daft)
}

fn fresnel_kernel(n: usize) -> Vec<Complex64> {
    // g[k] = 1/sqrt(N) e^{-jπ/4} e^{jπ k²/N}; circulant for even N
    let scale = Complex64::from_polar(1.0 / (n as f64).sqrt(), -PI / 4.0);
    (0..n)
        .map(|k| scale * cis_cycles(((k * k) % (2 * n)) as f64 / (2 * n) as f64))
        .collect()
}

/// Dense discrete Fresnel transform matrix for even `N`:
/// `Γ[m, n] = 1/sqrt(N) e^{-jπ/4} e^{jπ(m-n)²/N}`.
pub fn dfnt_matrix(n: usize) -> Result<DMatrix<Complex64>> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::invalid("N", "discrete Fresnel transform needs even N"));
    }
    let scale = Complex64::from_polar(1.0 / (n as f64).sqrt(), -PI / 4.0);
    Ok(DMatrix::from_fn(n, n, |m, k| {
        let d = m.abs_diff(k);
        scale * cis_cycles(((d * d) % (2 * n)) as f64 / (2 * n) as f64)
    }))
}

pub(crate) fn dfnt_slice(x: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::invalid("N", "discrete Fresnel transform needs even N"));
    }
    // Γ is circulant, so it is diagonal in the DFT basis.
    let mut g = fresnel_kernel(n);
    if inverse {
        // Γ^H is circulant with kernel conj(g[-k]); g is even in k.
        g.iter_mut().for_each(|v| *v = v.conj());
    }
    let gf = dft(&g);
    let mut xf = dft(x);
    let sqrt_n = (n as f64).sqrt();
    for (a, b) in xf.iter_mut().zip(&gf) {
        *a *= b * sqrt_n;
    }
    idft_in_place(&mut xf);
    Ok(xf)
}

/// Discrete Fresnel transform (`inverse = true` applies `Γ^H`). Even `N` only.
pub fn dfnt(x: &ComplexSignal, inverse: bool) -> Result<ComplexSignal> {
    ensure_finite(x.samples(), "transform input")?;
    let y = dfnt_slice(x.samples(), inverse)?;
    let domain = if inverse { Domain::Time } else { Domain::Frequency };
    ComplexSignal::new(y, domain)
}
