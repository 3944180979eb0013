//! Gray-labelled constellations with unit average energy.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// BPSK (`M = 2`) or square M-QAM, Gray labelled per axis, unit mean energy.
///
/// Bits are taken MSB-first per symbol: the first half drives the in-phase
/// axis, the second half the quadrature axis. Bit 0 maps to the positive
/// outer side of each axis, so QPSK `00` is `(1 + j)/sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMap {
    order: usize,
    bits_per_axis: usize,
    scale: f64,
}

impl SymbolMap {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::invalid("M", format!("{order} is not a power of two >= 2")));
        }
        let bits = order.trailing_zeros() as usize;
        if order == 2 {
            return Ok(Self { order, bits_per_axis: 1, scale: 1.0 });
        }
        if !bits.is_multiple_of(2) {
            return Err(Error::invalid("M", format!("{order}-QAM is not square")));
        }
        let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt().recip();
        Ok(Self { order, bits_per_axis: bits / 2, scale })
    }

    pub fn qpsk() -> Self {
        Self::new(4).expect("QPSK is valid")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    fn is_bpsk(&self) -> bool {
        self.order == 2
    }

    fn axis_level(&self, bits: &[u8]) -> f64 {
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        let index = gray_to_binary(gray);
        let top = (1usize << self.bits_per_axis) - 1;
        (top as f64) - 2.0 * index as f64
    }

    fn axis_bits(&self, value: f64, out: &mut Vec<u8>) {
        let top = (1usize << self.bits_per_axis) - 1;
        let index = ((top as f64 - value / self.scale) / 2.0).round();
        let index = index.clamp(0.0, top as f64) as usize;
        let gray = index ^ (index >> 1);
        for k in (0..self.bits_per_axis).rev() {
            out.push(((gray >> k) & 1) as u8);
        }
    }

    pub fn map_symbol(&self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        if self.is_bpsk() {
            return Complex64::new(self.axis_level(bits), 0.0);
        }
        let (i, q) = bits.split_at(self.bits_per_axis);
        Complex64::new(self.axis_level(i), self.axis_level(q)) * self.scale
    }

    pub fn demap_symbol(&self, y: Complex64, out: &mut Vec<u8>) {
        self.axis_bits(y.re, out);
        if !self.is_bpsk() {
            self.axis_bits(y.im, out);
        }
    }

    /// All constellation points, indexed by their label read as an integer.
    pub fn points(&self) -> Vec<Complex64> {
        let k = self.bits_per_symbol();
        (0..self.order)
            .map(|label| {
                let bits: Vec<u8> = (0..k).rev().map(|b| ((label >> b) & 1) as u8).collect();
                self.map_symbol(&bits)
            })
            .collect()
    }
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_energy() {
        for m in [2usize, 4, 16, 64, 256] {
            let map = SymbolMap::new(m).unwrap();
            let pts = map.points();
            let e = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
            assert!((e - 1.0).abs() < 1e-12, "M={m}");
        }
    }

    #[test]
    fn qpsk_table() {
        let map = SymbolMap::qpsk();
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let want = [(a, a), (a, -a), (-a, a), (-a, -a)];
        for (p, (re, im)) in map.points().into_iter().zip(want) {
            assert!((p - Complex64::new(re, im)).norm() < 1e-15);
        }
    }

    #[test]
    fn gray_adjacency() {
        for m in [4usize, 16] {
            let map = SymbolMap::new(m).unwrap();
            let pts = map.points();
            let dmin = (0..m)
                .flat_map(|a| (0..m).filter(move |&b| b != a).map(move |b| (a, b)))
                .map(|(a, b)| (pts[a] - pts[b]).norm())
                .fold(f64::INFINITY, f64::min);
            for a in 0..m {
                for b in 0..m {
                    if a != b && (pts[a] - pts[b]).norm() < dmin * 1.0001 {
                        assert_eq!((a ^ b).count_ones(), 1, "M={m} labels {a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_orders() {
        for m in [0usize, 1, 3, 8, 32, 12] {
            assert!(SymbolMap::new(m).is_err(), "M={m}");
        }
    }
}
