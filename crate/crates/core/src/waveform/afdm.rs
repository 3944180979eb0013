//! AFDM-specific configuration: chirp-rate selection, the delay-Doppler
//! orthogonality check and the precoded-OFDM view.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::transforms::{idaft_matrix, ChirpParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfdmConfig {
    pub n: usize,
    pub chirp: ChirpParams,
    /// Doppler guard width `ξ`, in Doppler bins.
    pub guard: usize,
    pub prefix_len: usize,
}

impl AfdmConfig {
    pub fn new(n: usize, chirp: ChirpParams, guard: usize, prefix_len: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("N", "must be at least 2"));
        }
        if prefix_len >= n {
            return Err(Error::invalid("prefix_len", format!("{prefix_len} >= N = {n}")));
        }
        Ok(Self { n, chirp, guard, prefix_len })
    }

    /// Configuration matched to a channel profile: `c1` from [`c1_optimal`],
    /// prefix length equal to the maximum delay.
    pub fn for_profile(n: usize, l_max: usize, alpha_max: usize, guard: usize, c2: f64) -> Result<Self> {
        let c1 = c1_optimal(n, alpha_max, guard, Some(l_max))?;
        Self::new(n, ChirpParams::new(c1, c2)?, guard, l_max)
    }

    /// `2 N c1`, the DAFT-index shift contributed by one sample of delay.
    pub fn delay_shift(&self) -> f64 {
        2.0 * self.n as f64 * self.chirp.c1()
    }

    /// DAFT-domain band offset of a tap: row minus column of its band in the
    /// effective channel, `(α - 2 N c1 l) mod N`.
    pub fn band_offset(&self, delay: usize, doppler: f64) -> f64 {
        (doppler - self.delay_shift() * delay as f64).rem_euclid(self.n as f64)
    }
}

/// `c1 = (2 (α_max + ξ) + 1) / (2N)`.
///
/// When `l_max` is given, also requires `(l_max + 1)(2(α_max + ξ) + 1) <= N`
/// so that the widened bands of different delays cannot wrap onto each other.
pub fn c1_optimal(n: usize, alpha_max: usize, guard: usize, l_max: Option<usize>) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("N", "must be at least 2"));
    }
    let width = 2 * (alpha_max + guard) + 1;
    if width >= 2 * n {
        return Err(Error::Infeasible(format!(
            "Doppler span 2(α_max + ξ) + 1 = {width} does not fit N = {n}"
        )));
    }
    if let Some(l_max) = l_max {
        let need = (l_max + 1) * width;
        if need > n {
            return Err(Error::Infeasible(format!(
                "(l_max + 1)(2(α_max + ξ) + 1) = {need} exceeds N = {n}; full diversity not guaranteed"
            )));
        }
    }
    Ok(width as f64 / (2 * n) as f64)
}

/// A tap on the integer delay-Doppler grid.
pub type GridTap = (usize, i64);

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityReport {
    pub orthogonal: bool,
    /// `2 N c1` is an integer, so integer-Doppler taps land on exact diagonals.
    pub integer_shift: bool,
    pub collisions: Vec<(GridTap, GridTap)>,
}

fn circular_distance(a: f64, b: f64, n: f64) -> f64 {
    let d = (a - b).rem_euclid(n);
    d.min(n - d)
}

/// Pairwise scan of the effective-channel band offsets of all taps in the
/// profile `[0, l_max] x [-α_max, α_max]`.
///
/// Taps at different delays collide when their `ξ`-widened offsets touch;
/// taps sharing a delay collide only when their offsets coincide.
pub fn validate_orthogonality(cfg: &AfdmConfig, l_max: usize, alpha_max: usize) -> OrthogonalityReport {
    let taps: Vec<GridTap> = (0..=l_max)
        .flat_map(|l| (-(alpha_max as i64)..=alpha_max as i64).map(move |a| (l, a)))
        .collect();
    tap_collisions(cfg, &taps)
}

/// Same scan as [`validate_orthogonality`] over an explicit tap list.
pub fn tap_collisions(cfg: &AfdmConfig, taps: &[GridTap]) -> OrthogonalityReport {
    let n = cfg.n as f64;
    let shift = cfg.delay_shift();
    let integer_shift = (shift - shift.round()).abs() < 1e-9;
    let widened = 2.0 * cfg.guard as f64 + 1.0;
    let mut collisions = Vec::new();
    for (i, &(l1, a1)) in taps.iter().enumerate() {
        let o1 = cfg.band_offset(l1, a1 as f64);
        for &(l2, a2) in &taps[i + 1..] {
            let o2 = cfg.band_offset(l2, a2 as f64);
            let d = circular_distance(o1, o2, n);
            let hit = if l1 == l2 { d < 0.5 } else { d < widened - 1e-9 };
            if hit {
                collisions.push(((l1, a1), (l2, a2)));
            }
        }
    }
    OrthogonalityReport {
        orthogonal: collisions.is_empty() && integer_shift,
        integer_shift,
        collisions,
    }
}

/// Precoder `P = F · A^H` taking DAFT-domain symbols to OFDM subcarriers.
pub fn afdm_precoder(cfg: &AfdmConfig) -> DMatrix<nalgebra::Complex<f64>> {
    let dft = idaft_matrix(cfg.n, &ChirpParams::zero()).adjoint();
    dft * idaft_matrix(cfg.n, &cfg.chirp)
}
