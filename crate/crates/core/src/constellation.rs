//! Gray-labelled modulation alphabets.
//!
//! Points are stored in label order: `points()[label]` is the symbol whose
//! bit label is `label`, so bit errors between a sent and a detected symbol
//! are `(sent ^ detected).count_ones()`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::Complex64;

#[inline]
fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Nearest point by exhaustive scan. Ties keep the lowest label.
fn nearest_in(points: &[Complex64], z: Complex64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (z - p).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Number of differing bits between two labels.
#[inline]
pub fn bit_errors(a: usize, b: usize) -> u32 {
    (a ^ b).count_ones()
}

/// Square M-QAM with unit average power and rail-wise Gray labelling.
#[derive(Clone, Debug, PartialEq)]
pub struct QamAlphabet {
    order: usize,
    points: Vec<Complex64>,
}

impl QamAlphabet {
    /// `order` must be a power of 4 (4, 16, 64, ...).
    pub fn new(order: usize) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || !order.trailing_zeros().is_multiple_of(2) {
            return Err(Error::Config(format!("QAM order {order} is not a square power of 4")));
        }
        let side = (order as f64).sqrt().round() as usize;
        let rail_bits = side.trailing_zeros();
        let d = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        let level = |label: usize| (2.0 * gray_decode(label) as f64 - (side as f64 - 1.0)) * d;
        let points = (0..order)
            .map(|label| {
                let i_label = label >> rail_bits;
                let q_label = label & (side - 1);
                Complex64::new(level(i_label), level(q_label))
            })
            .collect();
        Ok(Self { order, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    /// Levels per rail, `sqrt(M)`.
    pub fn side(&self) -> usize {
        1 << (self.bits_per_symbol() / 2)
    }

    /// Half the spacing between adjacent rail levels.
    pub fn half_spacing(&self) -> f64 {
        (3.0 / (2.0 * (self.order as f64 - 1.0))).sqrt()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn nearest(&self, z: Complex64) -> usize {
        nearest_in(&self.points, z)
    }

    /// True for QPSK, the only square QAM with a constant modulus.
    pub fn is_constant_modulus(&self) -> bool {
        self.order == 4
    }

    /// Gray label of rail level `p` (0 = most negative).
    pub fn rail_label(&self, p: usize) -> usize {
        p ^ (p >> 1)
    }
}

/// M-PSK on the unit circle, `exp(j2πm/M)` at position `m`, Gray labelled.
#[derive(Clone, Debug, PartialEq)]
pub struct PskAlphabet {
    order: usize,
    points: Vec<Complex64>,
}

impl PskAlphabet {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::Config(format!("PSK order {order} is not a power of 2")));
        }
        let points = (0..order)
            .map(|label| {
                let pos = gray_decode(label);
                // exact values on the axes keep ±1 symbols sign-symmetric
                match (4 * pos) % order {
                    0 => {
                        let quarter = 4 * pos / order;
                        [
                            Complex64::new(1.0, 0.0),
                            Complex64::new(0.0, 1.0),
                            Complex64::new(-1.0, 0.0),
                            Complex64::new(0.0, -1.0),
                        ][quarter]
                    }
                    _ => Complex64::from_polar(1.0, 2.0 * PI * pos as f64 / order as f64),
                }
            })
            .collect();
        Ok(Self { order, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn nearest(&self, z: Complex64) -> usize {
        nearest_in(&self.points, z)
    }

    /// Label of the point equal to `c`, if any.
    pub fn label_of(&self, c: Complex64) -> Option<usize> {
        self.points.iter().position(|p| (p - c).norm() < 1e-12)
    }
}
