//! Closed-form error rates and SNRs for the primary and secondary links.
//!
//! Primary rates are given both as the square-QAM symbol error rate
//! `1 − (1 − 2(1 − 1/√M) Q(√(3γ/(M − 1))))²` and as the exact bit error
//! rate of the rail-wise Gray labelling used by
//! [`QamAlphabet`](crate::constellation::QamAlphabet).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constellation::{bit_errors, PskAlphabet, QamAlphabet};
use crate::error::{Error, Result};
use crate::numerics::{partial_fourier_rows, q_function, CMatrix, CVector, Complex64, RandomStream};
use crate::txchain::SystemConfig;

/// Inverse moments of a unit-power alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstellationMoments {
    /// `E[|1/S|²]`
    pub gamma1: f64,
    /// `E[|1/S|⁴]`
    pub gamma2: f64,
}

pub fn qam_moments(m_s: usize) -> Result<ConstellationMoments> {
    let qam = QamAlphabet::new(m_s)?;
    let m = m_s as f64;
    let (g1, g2) = qam.points().iter().fold((0.0, 0.0), |(a, b), s| {
        let inv = 1.0 / s.norm_sqr();
        (a + inv, b + inv * inv)
    });
    Ok(ConstellationMoments {
        gamma1: g1 / m,
        gamma2: g2 / m,
    })
}

/// Square-QAM symbol error rate at symbol SNR `snr` (linear).
pub fn qam_ser(m_s: usize, snr: f64) -> f64 {
    let m = m_s as f64;
    let p = 2.0 * (1.0 - 1.0 / m.sqrt()) * q_function((3.0 * snr / (m - 1.0)).sqrt());
    1.0 - (1.0 - p) * (1.0 - p)
}

/// Exact bit error rate of rail-wise Gray square QAM over AWGN.
///
/// Each rail is a `√M`-level PAM whose decision regions are bounded at odd
/// multiples of the half spacing `d`, so the rate is a fixed combination
/// `Σ_m w_m Q((2m + 1) d √(2γ))`. The weights are found once per order.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayQamBer {
    m_s: usize,
    half_spacing: f64,
    weights: Vec<f64>,
}

impl GrayQamBer {
    pub fn new(m_s: usize) -> Result<Self> {
        let qam = QamAlphabet::new(m_s)?;
        let side = qam.side();
        let rail_bits = (side.trailing_zeros()) as f64;
        // P(x - x_i > a d) for signed odd a is Q(a d / s) = 1 - Q(-a d / s)
        let mut weights = vec![0.0; side];
        let mut constant = 0.0;
        fn add(weights: &mut [f64], constant: &mut f64, odd: i64, sign: f64) {
            if odd > 0 {
                weights[((odd - 1) / 2) as usize] += sign;
            } else {
                *constant += sign;
                weights[((-odd - 1) / 2) as usize] -= sign;
            }
        }
        for i in 0..side as i64 {
            for j in 0..side as i64 {
                if i == j {
                    continue;
                }
                let bits = bit_errors(qam.rail_label(i as usize), qam.rail_label(j as usize)) as f64;
                let w = bits / (side as f64 * rail_bits);
                // P(j | i) = P(x > lower_j) - P(x > upper_j)
                if j > 0 {
                    add(&mut weights, &mut constant, 2 * (j - i) - 1, w);
                } else {
                    constant += w;
                }
                if j < side as i64 - 1 {
                    add(&mut weights, &mut constant, 2 * (j - i) + 1, -w);
                }
            }
        }
        debug_assert!(constant.abs() < 1e-12, "error rate must vanish at high SNR");
        Ok(Self {
            m_s,
            half_spacing: qam.half_spacing(),
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.m_s
    }

    /// Bit error rate at symbol SNR `snr` (linear).
    pub fn ber(&self, snr: f64) -> f64 {
        if snr.is_infinite() {
            return 0.0;
        }
        let u = self.half_spacing * (2.0 * snr).sqrt();
        let v: f64 = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(m, w)| w * q_function((2 * m + 1) as f64 * u))
            .sum();
        v.clamp(0.0, 1.0)
    }
}

/// `M`-PSK bit error rate approximation `a Q(√(2 sin²(π/M) γ))` with
/// `a = 1` for BPSK and `2 / log2 M` otherwise.
pub fn psk_ber(m_c: usize, snr: f64) -> f64 {
    let pref = if m_c == 2 {
        1.0
    } else {
        2.0 / (m_c.trailing_zeros() as f64)
    };
    let s = (PI / m_c as f64).sin();
    (pref * q_function((2.0 * s * s * snr).sqrt())).min(1.0)
}

/// Noise gain `f_k^H (F_p^H F_p)^{-1} f_k` of the pilot estimator for `l`
/// taps at subcarrier `k`.
pub fn pilot_noise_gain(cfg: &SystemConfig, l: usize, k: usize) -> Result<f64> {
    let f_p = partial_fourier_rows(cfg.n, l, &cfg.pilot_indices);
    let gram = f_p.adjoint() * &f_p;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{l} taps from {} pilots", cfg.n_p())))?;
    let f_k = partial_fourier_rows(cfg.n, l, &[k]).transpose();
    let g: CMatrix = f_k.adjoint() * inv * &f_k;
    Ok(g[(0, 0)].re)
}

/// Symbol SNR of a primary symbol detected with the pilot estimate,
/// `P|H|² / (σ² (g + 1 + g σ² / (P|H|²)))` where `g` is the pilot noise
/// gain (`L / N_p` for an equally spaced comb).
pub fn snr_primary_estimated_gain(h: Complex64, gain: f64, p_t: f64, sigma2: f64) -> f64 {
    let sig = p_t * h.norm_sqr();
    sig / (sigma2 * (gain + 1.0 + gain * sigma2 / sig))
}

/// Estimated-CSI SNR of `S_k` given the secondary symbol `c`.
pub fn snr_primary_estimated(h_d: &CVector, h_b: &CVector, c: Complex64, k: usize, cfg: &SystemConfig) -> Result<f64> {
    let gain = pilot_noise_gain(cfg, cfg.cir_taps(), k)?;
    Ok(snr_primary_estimated_gain(
        h_d[k] + c * h_b[k],
        gain,
        cfg.p_t,
        cfg.sigma2,
    ))
}

/// Per-realization primary error rates for one scenario.
#[derive(Clone, Debug)]
pub struct PrimaryTheory {
    m_s: usize,
    gray: GrayQamBer,
    data: Vec<usize>,
    /// Pilot noise gain on each data subcarrier.
    gains: Vec<f64>,
    secondary: Vec<Complex64>,
}

/// Symbol and bit error rates averaged over data subcarriers.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorRates {
    pub ser: f64,
    pub ber: f64,
}

impl PrimaryTheory {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        let data = cfg.data_indices();
        let l = cfg.cir_taps().min(cfg.n_p());
        let gains = data
            .iter()
            .map(|&k| pilot_noise_gain(cfg, l, k))
            .collect::<Result<_>>()?;
        Ok(Self {
            m_s: cfg.m_s,
            gray: GrayQamBer::new(cfg.m_s)?,
            data,
            gains,
            secondary: PskAlphabet::new(cfg.m_c)?.points().to_vec(),
        })
    }

    /// Rates for one composite CFR `h`, with perfect or pilot-estimated CSI.
    pub fn rates(&self, h: &CVector, p_t: f64, sigma2: f64, estimated: bool) -> ErrorRates {
        let mut acc = ErrorRates::default();
        for (&k, &g) in self.data.iter().zip(&self.gains) {
            let snr = if estimated {
                snr_primary_estimated_gain(h[k], g, p_t, sigma2)
            } else {
                p_t * h[k].norm_sqr() / sigma2
            };
            acc.ser += qam_ser(self.m_s, snr);
            acc.ber += self.gray.ber(snr);
        }
        let d = self.data.len() as f64;
        ErrorRates {
            ser: acc.ser / d,
            ber: acc.ber / d,
        }
    }

    /// Rates averaged uniformly over every secondary symbol `c ∈ A_c`.
    pub fn rates_over_alphabet(
        &self,
        h_d: &CVector,
        h_b: &CVector,
        p_t: f64,
        sigma2: f64,
        estimated: bool,
    ) -> ErrorRates {
        let mut acc = ErrorRates::default();
        for &c in &self.secondary {
            let h = h_d.zip_map(h_b, |d, b| d + c * b);
            let r = self.rates(&h, p_t, sigma2, estimated);
            acc.ser += r.ser;
            acc.ber += r.ber;
        }
        let m = self.secondary.len() as f64;
        ErrorRates {
            ser: acc.ser / m,
            ber: acc.ber / m,
        }
    }
}

/// Perfect-CSI primary symbol error rate averaged over data subcarriers and
/// the secondary alphabet.
pub fn primary_ser_perfect(h_d: &CVector, h_b: &CVector, cfg: &SystemConfig) -> Result<f64> {
    Ok(PrimaryTheory::new(cfg)?
        .rates_over_alphabet(h_d, h_b, cfg.p_t, cfg.sigma2, false)
        .ser)
}

/// Perfect-CSI primary bit error rate (Gray labelling) averaged over data
/// subcarriers and the secondary alphabet.
pub fn ber_primary_perfect(h_d: &CVector, h_b: &CVector, cfg: &SystemConfig) -> Result<f64> {
    Ok(PrimaryTheory::new(cfg)?
        .rates_over_alphabet(h_d, h_b, cfg.p_t, cfg.sigma2, false)
        .ber)
}

/// Pilot-estimated-CSI primary symbol error rate.
pub fn primary_ser_estimated(h_d: &CVector, h_b: &CVector, cfg: &SystemConfig) -> Result<f64> {
    Ok(PrimaryTheory::new(cfg)?
        .rates_over_alphabet(h_d, h_b, cfg.p_t, cfg.sigma2, true)
        .ser)
}

/// Pilot-estimated-CSI primary bit error rate.
pub fn ber_primary_estimated(h_d: &CVector, h_b: &CVector, cfg: &SystemConfig) -> Result<f64> {
    Ok(PrimaryTheory::new(cfg)?
        .rates_over_alphabet(h_d, h_b, cfg.p_t, cfg.sigma2, true)
        .ber)
}

/// Perfect-CSI secondary SNR `P‖H_b‖² / (Γ₁ σ²)`.
pub fn snr_secondary_perfect(hb_energy: f64, p_t: f64, sigma2: f64, moments: ConstellationMoments) -> f64 {
    p_t * hb_energy / (moments.gamma1 * sigma2)
}

/// Secondary BER with perfect CSI (high-SNR approximation).
pub fn ber_secondary_perfect(hb_energy: f64, p_t: f64, sigma2: f64, m_c: usize, moments: ConstellationMoments) -> f64 {
    psk_ber(m_c, snr_secondary_perfect(hb_energy, p_t, sigma2, moments))
}

/// Secondary SNR with per-subcarrier (Method 1) re-estimation.
pub fn snr_secondary_method1(hb_energy: f64, p_t: f64, sigma2: f64, n: usize, moments: ConstellationMoments) -> f64 {
    let sig = p_t * hb_energy;
    let ConstellationMoments { gamma1, gamma2 } = moments;
    sig / (sigma2 * (2.0 * gamma1 + n as f64 * (2.0 * gamma1 * gamma1 + gamma2) * sigma2 / (4.0 * sig)))
}

/// Secondary SNR with `L`-tap (Method 2) re-estimation, unit-modulus
/// primary symbols.
pub fn snr_secondary_method2(hb_energy: f64, p_t: f64, sigma2: f64, l: usize) -> f64 {
    let sig = p_t * hb_energy;
    sig / (sigma2 * (2.0 + 3.0 * l as f64 * sigma2 / (4.0 * sig)))
}

/// Parameters of the average secondary BER over i.i.d. Rayleigh taps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvgSnrParams {
    /// Average SNR per backscatter tap.
    pub gamma_b: f64,
    pub l_b: usize,
}

impl AvgSnrParams {
    pub fn mu(&self) -> f64 {
        (self.gamma_b / (1.0 + self.gamma_b)).sqrt()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Average BPSK secondary BER over `L_b` i.i.d. Rayleigh taps: the exact
/// closed form and its high-SNR approximation `C(2L_b − 1, L_b) / (4γ_b)^L_b`.
pub fn avg_ber_secondary(params: AvgSnrParams) -> (f64, f64) {
    let AvgSnrParams { gamma_b, l_b } = params;
    let mu = params.mu();
    let lo = ((1.0 - mu) / 2.0).powi(l_b as i32);
    let sum: f64 = (0..l_b)
        .map(|l| binomial(l_b - 1 + l, l) * ((1.0 + mu) / 2.0).powi(l as i32))
        .sum();
    let approx = binomial(2 * l_b - 1, l_b) / (4.0 * gamma_b).powi(l_b as i32);
    (lo * sum, approx)
}

/// Least-squares slope of `log10(ber)` against `snr_db / 10`, negated, so a
/// diversity-`D` curve returns about `D`. Points with zero BER are skipped.
pub fn diversity_slope(snr_db: &[f64], ber: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = snr_db
        .iter()
        .zip(ber)
        .filter(|(_, b)| **b > 0.0)
        .map(|(s, b)| (s / 10.0, b.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Diversity order from the two highest-SNR points of a curve.
pub fn diversity_order(snr_db: &[f64], ber: &[f64]) -> Option<f64> {
    let n = snr_db.len().min(ber.len());
    if n < 2 {
        return None;
    }
    diversity_slope(&snr_db[n - 2..n], &ber[n - 2..n])
}

/// Monte Carlo evaluation of the Method-1 secondary BER as an expectation
/// over the preamble estimation errors `(ε_d, ε_b)`, BPSK secondary, for a
/// fixed backscatter CFR. The `Q` argument is the real part of the
/// projected margin.
pub fn method1_expectation_ber(
    h_b: &CVector,
    p_t: f64,
    sigma2: f64,
    qam: &QamAlphabet,
    trials: usize,
    stream: &mut RandomStream,
) -> f64 {
    let n = h_b.len();
    let moments = qam_moments(qam.order()).expect("valid alphabet");
    let hb2 = h_b.norm_squared();
    let sqrt_p = p_t.sqrt();
    let mut acc = 0.0;
    for _ in 0..trials {
        let mut eps = [CVector::zeros(n), CVector::zeros(n)];
        for e in eps.iter_mut() {
            for k in 0..n {
                let s = qam.point(stream.index(qam.order()));
                e[k] = stream.unit_cn() * sigma2.sqrt() / (s * sqrt_p);
            }
        }
        let half = Complex64::new(0.5, 0.0);
        let e_d = (&eps[0] + &eps[1]) * half;
        let e_b = (&eps[0] - &eps[1]) * half;
        let hb_hat = h_b + &e_b;
        let scale = (sigma2 * moments.gamma1 / (2.0 * p_t) * (hb2 + e_b.norm_squared())).sqrt();
        for c in [1.0, -1.0] {
            let c = Complex64::new(c, 0.0);
            let margin = (c.conj() * hb_hat.dotc(&(h_b * c - &e_d))).re;
            acc += q_function(margin / scale);
        }
    }
    acc / (2 * trials) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;
    use proptest::prelude::*;

    #[test]
    fn qam_moment_values() {
        let m4 = qam_moments(4).unwrap();
        assert!((m4.gamma1 - 1.0).abs() < 1e-12 && (m4.gamma2 - 1.0).abs() < 1e-12);
        // rails {±1, ±3}/√10
        let m16 = qam_moments(16).unwrap();
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for a in [-3.0f64, -1.0, 1.0, 3.0] {
            for b in [-3.0f64, -1.0, 1.0, 3.0] {
                let e = (a * a + b * b) / 10.0;
                g1 += 1.0 / e / 16.0;
                g2 += 1.0 / (e * e) / 16.0;
            }
        }
        assert!((m16.gamma1 - 17.0 / 9.0).abs() < 1e-12);
        assert!((m16.gamma1 - g1).abs() < 1e-12);
        assert!((m16.gamma2 - g2).abs() < 1e-12);
        assert!((m16.gamma2 - (25.0 / 4.0 + 0.5 + 25.0 / 324.0)).abs() < 1e-12);
    }

    #[test]
    fn qam64_moments_against_sampling() {
        let m = qam_moments(64).unwrap();
        let qam = QamAlphabet::new(64).unwrap();
        let mut rs = RandomStream::new(1, 0);
        let n = 1_000_000;
        let g1: f64 = (0..n).map(|_| 1.0 / qam.point(rs.index(64)).norm_sqr()).sum::<f64>() / n as f64;
        assert!((g1 / m.gamma1 - 1.0).abs() < 1e-3 * 5.0, "{g1} vs {}", m.gamma1);
        assert!(m.gamma2 >= m.gamma1 * m.gamma1 && m.gamma1 >= 1.0);
    }

    #[test]
    fn gray_ber_against_direct_enumeration() {
        // direct sum over transmitted/decided rail levels
        for m_s in [4usize, 16, 64] {
            let qam = QamAlphabet::new(m_s).unwrap();
            let side = qam.side();
            let d = qam.half_spacing();
            let gray = GrayQamBer::new(m_s).unwrap();
            for snr_db in [0.0, 7.0, 15.0, 25.0] {
                let snr: f64 = 10f64.powf(snr_db / 10.0);
                let s = (1.0 / (2.0 * snr)).sqrt();
                let mut ber = 0.0;
                for i in 0..side {
                    for j in 0..side {
                        let lo = if j == 0 {
                            f64::NEG_INFINITY
                        } else {
                            (2.0 * (j as f64 - i as f64) - 1.0) * d
                        };
                        let hi = if j == side - 1 {
                            f64::INFINITY
                        } else {
                            (2.0 * (j as f64 - i as f64) + 1.0) * d
                        };
                        let p = q_function(lo / s) - q_function(hi / s);
                        ber += p * bit_errors(qam.rail_label(i), qam.rail_label(j)) as f64;
                    }
                }
                ber /= (side * side.trailing_zeros() as usize) as f64;
                assert!(
                    (gray.ber(snr) - ber).abs() < 1e-12 * ber.max(1e-300) + 1e-15,
                    "M={m_s} {snr_db} dB"
                );
            }
        }
        // QPSK Gray BER is Q(√γ)
        let g = GrayQamBer::new(4).unwrap();
        assert!((g.ber(10.0) - q_function(10f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn primary_rates_limits() {
        let mut cfg = SystemConfig::default();
        cfg.p_t = 1.0;
        cfg.sigma2 = 1e-30;
        let mut rs = RandomStream::new(2, 0);
        let hd = rs.draw_cn(64, 1.0);
        let hb = rs.draw_cn(64, 1e-3);
        assert!(primary_ser_perfect(&hd, &hb, &cfg).unwrap() < 1e-300);
        // no backscatter reduces to per-subcarrier QAM over H_d
        cfg.sigma2 = 0.1;
        let zero = CVector::zeros(64);
        let got = primary_ser_perfect(&hd, &zero, &cfg).unwrap();
        let data = cfg.data_indices();
        let want: f64 = data.iter().map(|&k| qam_ser(16, hd[k].norm_sqr() / 0.1)).sum::<f64>() / data.len() as f64;
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn estimated_primary_snr_properties() {
        let mut cfg = SystemConfig::default();
        cfg.channel.l_d = 2;
        cfg.sync_error = 2; // L = max(2, 2 + 1 + 2) = 5
        assert_eq!(cfg.cir_taps(), 5);
        for k in [1usize, 13, 40] {
            assert!((pilot_noise_gain(&cfg, 5, k).unwrap() - 5.0 / 8.0).abs() < 1e-12);
        }
        cfg.p_t = 1.0;
        let h = CVector::from_element(64, Complex64::new(0.8, 0.1));
        let zero = CVector::zeros(64);
        for sigma2 in [1e-9, 1e-3, 1.0] {
            cfg.sigma2 = sigma2;
            let perfect = h[3].norm_sqr() / sigma2;
            let est = snr_primary_estimated(&h, &zero, Complex64::new(1.0, 0.0), 3, &cfg).unwrap();
            assert!(est < perfect);
            assert!(perfect / est >= 13.0 / 8.0 - 1e-12);
        }
        cfg.sigma2 = 1e-12;
        let est = snr_primary_estimated(&h, &zero, Complex64::new(1.0, 0.0), 3, &cfg).unwrap();
        assert!((est / (h[3].norm_sqr() / 1e-12) - 8.0 / 13.0).abs() < 1e-9);
    }

    #[test]
    fn secondary_perfect_examples() {
        let unit = ConstellationMoments {
            gamma1: 1.0,
            gamma2: 1.0,
        };
        let v = ber_secondary_perfect(1.0, 4.0, 1.0, 2, unit);
        assert!((v - q_function(8f64.sqrt())).abs() < 1e-15);
        assert!((v - 2.339e-3).abs() < 1e-6);
        assert!(ber_secondary_perfect(1e12, 1.0, 1.0, 8, unit) < 1e-300);
    }

    #[test]
    fn secondary_snr_asymptotes_and_ordering() {
        let m16 = qam_moments(16).unwrap();
        let unit = ConstellationMoments {
            gamma1: 1.0,
            gamma2: 1.0,
        };
        let s1 = snr_secondary_method1(1.0, 1.0, 1e-9, 64, unit);
        assert!((s1 / snr_secondary_perfect(1.0, 1.0, 1e-9, unit) - 0.5).abs() < 1e-6);
        // the constant-modulus form has a 3N/4 noise term
        let direct = 1.0 / (1e-2 * (2.0 + 3.0 * 64.0 * 1e-2 / 4.0));
        assert!((snr_secondary_method1(1.0, 1.0, 1e-2, 64, unit) / direct - 1.0).abs() < 1e-12);
        for &sigma2 in &[1e-4, 1e-2, 1.0, 10.0] {
            for &(n, l) in &[(64usize, 5usize), (64, 64), (16, 4)] {
                for m in [unit, m16] {
                    assert!(
                        snr_secondary_method2(2.0, 1.0, sigma2, l) >= snr_secondary_method1(2.0, 1.0, sigma2, n, m)
                    );
                }
            }
        }
    }

    #[test]
    fn average_ber_special_cases() {
        for g in [0.5f64, 3.0, 100.0] {
            let p = AvgSnrParams { gamma_b: g, l_b: 1 };
            let (exact, _) = avg_ber_secondary(p);
            assert!((exact - (1.0 - p.mu()) / 2.0).abs() < 1e-15);
        }
        let (exact, approx) = avg_ber_secondary(AvgSnrParams { gamma_b: 100.0, l_b: 2 });
        assert!((approx / exact - 1.0).abs() < 0.1);
        for l_b in [1usize, 2, 4] {
            let db = [30.0, 40.0];
            let ber: Vec<f64> = db
                .iter()
                .map(|d: &f64| {
                    avg_ber_secondary(AvgSnrParams {
                        gamma_b: 10f64.powf(d / 10.0),
                        l_b,
                    })
                    .0
                })
                .collect();
            let slope = diversity_slope(&db, &ber).unwrap();
            assert!((slope / l_b as f64 - 1.0).abs() < 0.05, "L_b={l_b}: {slope}");
        }
    }

    /// `∫ Q(√(2γx)) x^{L−1} e^{−x} / (L−1)! dx` by Simpson's rule in
    /// `u = √x`, which removes the square-root kink at the origin.
    fn quadrature(gamma_b: f64, l_b: usize) -> f64 {
        let fact: f64 = (1..l_b).map(|i| i as f64).product();
        let f = |u: f64| {
            let x = u * u;
            q_function((2.0 * gamma_b * x).sqrt()) * x.powi(l_b as i32 - 1) * (-x).exp() / fact * 2.0 * u
        };
        let (a, b, m) = (0.0, 9.0, 20_000);
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn average_ber_matches_quadrature() {
        for l_b in [1usize, 2, 4] {
            for g in [1.0, 10.0, 100.0] {
                let (exact, _) = avg_ber_secondary(AvgSnrParams { gamma_b: g, l_b });
                assert!((exact - quadrature(g, l_b)).abs() < 1e-6, "L_b={l_b} γ={g}");
            }
        }
    }

    #[test]
    fn expectation_form_tracks_method1_snr_at_high_snr() {
        let mut rs = RandomStream::new(3, 0);
        let qpsk = QamAlphabet::new(4).unwrap();
        let hb = rs.draw_cn(64, 1.0 / 64.0);
        let hb2 = hb.norm_squared();
        let unit = qam_moments(4).unwrap();
        // pick σ² so the Method 1 BER sits near 1e-3
        let sigma2 = hb2 / 20.6;
        let closed = psk_ber(2, snr_secondary_method1(hb2, 1.0, sigma2, 64, unit));
        let mc = method1_expectation_ber(&hb, 1.0, sigma2, &qpsk, 20_000, &mut rs);
        assert!((mc / closed - 1.0).abs() < 0.15, "mc {mc} closed {closed}");
    }

    proptest! {
        #[test]
        fn error_rates_are_probabilities_and_monotone(m_pow in 1u32..4, lo in -10.0f64..30.0) {
            let m_s = 4usize.pow(m_pow);
            let gray = GrayQamBer::new(m_s).unwrap();
            let mut prev = (1.0, 1.0, 1.0, 1.0);
            for i in 0..40 {
                let g = 10f64.powf((lo + i as f64) / 10.0);
                let v = (qam_ser(m_s, g), gray.ber(g), psk_ber(8, g), avg_ber_secondary(AvgSnrParams { gamma_b: g, l_b: 3 }).0);
                for x in [v.0, v.1, v.2, v.3] {
                    prop_assert!((0.0..=1.0).contains(&x));
                }
                prop_assert!(v.0 <= prev.0 + 1e-15 && v.1 <= prev.1 + 1e-15 && v.2 <= prev.2 + 1e-15 && v.3 <= prev.3 + 1e-15);
                prev = v;
            }
        }
    }
}
