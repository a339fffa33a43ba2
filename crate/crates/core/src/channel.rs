//! Frequency-selective link models for the direct (PTx→CRx), forward
//! (PTx→STx) and backward (STx→CRx) hops, plus the CFRs derived from them.
//!
//! The backscatter CIR is the linear convolution `h_b = b ⊛ g`; the
//! receiver sees it after an integer delay of `d_b` samples, so the
//! backscatter CFR `H_b` carries the matching phase ramp.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cir_to_cfr, convolve, CVector, Complex64, RandomStream, ONE, ZERO};

/// Large-scale fading `ref · dist^(-exponent)`.
pub fn pathloss(dist: f64, exponent: f64, reference: f64) -> Result<f64> {
    if !(dist > 0.0) || !dist.is_finite() {
        return Err(Error::OutOfRange {
            what: "distance",
            detail: format!("{dist} m must be positive"),
        });
    }
    Ok(reference * dist.powf(-exponent))
}

/// How the cascaded PTx→STx→CRx link is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BackscatterModel {
    /// Independent Rayleigh hops `b` (`l_1` taps) and `g` (`l_2` taps),
    /// convolved.
    Cascaded,
    /// A single Rayleigh CIR with `taps` i.i.d. equal-power taps and total
    /// power `β_1 β_2`.
    Rayleigh { taps: usize },
    /// One deterministic tap of amplitude `sqrt(β_1 β_2)`.
    Awgn,
    /// No backscatter link at all (baseline without STx).
    Absent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub l_d: usize,
    pub l_1: usize,
    pub l_2: usize,
    pub backscatter: BackscatterModel,
    /// Backscatter propagation delay in samples.
    pub d_b: usize,
    pub dist_direct: f64,
    pub dist_fwd: f64,
    pub dist_bwd: f64,
    pub exp_direct: f64,
    pub exp_fwd: f64,
    pub exp_bwd: f64,
    pub pathloss_ref: f64,
    /// STx sits on the PTx–CRx line, so `dist_fwd + dist_bwd = dist_direct`.
    pub collinear: bool,
    /// Set to false to block the PTx→CRx link entirely.
    pub direct_link: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            l_d: 4,
            l_1: 1,
            l_2: 2,
            backscatter: BackscatterModel::Cascaded,
            d_b: 1,
            dist_direct: 200.0,
            dist_fwd: 3.83,
            dist_bwd: 200.0 - 3.83,
            exp_direct: 2.5,
            exp_fwd: 2.0,
            exp_bwd: 2.0,
            pathloss_ref: 1e-3,
            collinear: true,
            direct_link: true,
        }
    }
}

impl ChannelConfig {
    pub fn beta_direct(&self) -> f64 {
        pathloss(self.dist_direct, self.exp_direct, self.pathloss_ref).unwrap_or(0.0)
    }

    pub fn beta_fwd(&self) -> f64 {
        pathloss(self.dist_fwd, self.exp_fwd, self.pathloss_ref).unwrap_or(0.0)
    }

    pub fn beta_bwd(&self) -> f64 {
        pathloss(self.dist_bwd, self.exp_bwd, self.pathloss_ref).unwrap_or(0.0)
    }

    /// Average power of the cascaded link, `β_1 β_2`.
    pub fn beta_backscatter(&self) -> f64 {
        self.beta_fwd() * self.beta_bwd()
    }

    /// Backscatter-to-direct average SNR ratio `β_1 β_2 / β_d` (linear).
    pub fn snr_ratio(&self) -> f64 {
        self.beta_backscatter() / self.beta_direct()
    }

    /// Tap count of the backscatter CIR `L_b`.
    pub fn l_b(&self) -> usize {
        match self.backscatter {
            BackscatterModel::Cascaded => self.l_1 + self.l_2 - 1,
            BackscatterModel::Rayleigh { taps } => taps,
            BackscatterModel::Awgn | BackscatterModel::Absent => 1,
        }
    }

    /// Composite CIR length `max{L_d, L_b + d_b + ξ}`.
    pub fn composite_taps(&self, xi: usize) -> usize {
        self.l_d.max(self.l_b() + self.d_b + xi)
    }

    /// Moves STx along the PTx–CRx line to `d1` metres from PTx.
    pub fn with_stx_distance(mut self, d1: f64) -> Result<Self> {
        if !(d1 > 0.0 && d1 < self.dist_direct) {
            return Err(Error::OutOfRange {
                what: "STx distance",
                detail: format!("{d1} m not inside (0, {})", self.dist_direct),
            });
        }
        self.dist_fwd = d1;
        self.dist_bwd = self.dist_direct - d1;
        self.collinear = true;
        Ok(self)
    }

    /// Places STx on the PTx side of the line so that the SNR ratio equals
    /// `ratio_db`. Fails when the ratio is not reachable.
    pub fn with_snr_ratio_db(self, ratio_db: f64) -> Result<Self> {
        let target = 10f64.powf(ratio_db / 10.0);
        let ratio_at = |d1: f64| {
            let c = self.clone().with_stx_distance(d1).expect("inside segment");
            c.snr_ratio()
        };
        // the ratio falls monotonically as STx moves from PTx to the midpoint
        let mut lo = 1e-9 * self.dist_direct;
        let mut hi = 0.5 * self.dist_direct;
        if !(ratio_at(lo) >= target && ratio_at(hi) <= target) {
            return Err(Error::OutOfRange {
                what: "SNR ratio",
                detail: format!("{ratio_db} dB not reachable on the PTx-CRx segment"),
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio_at(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.with_stx_distance(0.5 * (lo + hi))
    }

    pub fn validate(&self, n_cp: usize) -> Result<()> {
        if self.l_d == 0 || self.l_1 == 0 || self.l_2 == 0 {
            return Err(Error::Config("tap counts must be positive".into()));
        }
        if let BackscatterModel::Rayleigh { taps: 0 } = self.backscatter {
            return Err(Error::Config("rayleigh backscatter needs at least one tap".into()));
        }
        for (name, d) in [
            ("dist_direct", self.dist_direct),
            ("dist_fwd", self.dist_fwd),
            ("dist_bwd", self.dist_bwd),
        ] {
            if !(d > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {d}")));
            }
        }
        if self.collinear && (self.dist_fwd + self.dist_bwd - self.dist_direct).abs() > 1e-9 * self.dist_direct {
            return Err(Error::Config(format!(
                "collinear placement needs dist_fwd + dist_bwd = dist_direct ({} + {} != {})",
                self.dist_fwd, self.dist_bwd, self.dist_direct
            )));
        }
        if self.l_d > n_cp || self.l_b() - 1 + self.d_b > n_cp {
            return Err(Error::Config(format!(
                "channel memory (L_d = {}, L_b - 1 + d_b = {}) exceeds the CP length {n_cp}",
                self.l_d,
                self.l_b() - 1 + self.d_b
            )));
        }
        Ok(())
    }
}

/// One block-fading draw of all three links and their CFRs.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub h_d: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub g: Vec<Complex64>,
    /// `b ⊛ g`, without the propagation delay.
    pub h_b: Vec<Complex64>,
    pub d_b: usize,
    /// Direct-link CFR.
    pub cfr_direct: CVector,
    /// Backscatter-link CFR including the `d_b` delay.
    pub cfr_backscatter: CVector,
}

impl ChannelRealization {
    /// Builds a realization from explicit taps (used for test doubles and
    /// by [`draw_channel`]).
    pub fn from_taps(h_d: Vec<Complex64>, b: Vec<Complex64>, g: Vec<Complex64>, d_b: usize, n: usize) -> Self {
        let h_b = convolve(&b, &g);
        let cfr_direct = cir_to_cfr(&h_d, n);
        let cfr_backscatter = cir_to_cfr(&delayed(&h_b, d_b), n);
        Self {
            h_d,
            b,
            g,
            h_b,
            d_b,
            cfr_direct,
            cfr_backscatter,
        }
    }

    pub fn n(&self) -> usize {
        self.cfr_direct.len()
    }

    /// Composite CFR `H_d + c H_b`.
    pub fn composite_cfr(&self, c: Complex64) -> CVector {
        composite_cfr(self, c)
    }

    /// Backscatter CFR as seen with an extra `xi`-sample lag on the
    /// backscatter branch.
    pub fn backscatter_cfr_lagged(&self, xi: usize) -> CVector {
        if xi == 0 {
            return self.cfr_backscatter.clone();
        }
        let n = self.n();
        CVector::from_iterator(
            n,
            self.cfr_backscatter.iter().enumerate().map(|(k, &h)| {
                let phase = -2.0 * PI * ((k * xi) % n) as f64 / n as f64;
                h * Complex64::from_polar(1.0, phase)
            }),
        )
    }

    /// Composite CIR `pad(h_d) + c · shift(h_b, d_b + xi)`, of length
    /// `max{L_d, L_b + d_b + xi}`.
    pub fn composite_cir(&self, c: Complex64, xi: usize) -> Vec<Complex64> {
        let shifted = delayed(&self.h_b, self.d_b + xi);
        let len = self.h_d.len().max(shifted.len());
        (0..len)
            .map(|l| self.h_d.get(l).copied().unwrap_or(ZERO) + c * shifted.get(l).copied().unwrap_or(ZERO))
            .collect()
    }

    /// The realization with the direct link removed.
    pub fn without_direct(mut self) -> Self {
        self.h_d.iter_mut().for_each(|t| *t = ZERO);
        self.cfr_direct.fill(ZERO);
        self
    }
}

fn delayed(taps: &[Complex64], delay: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; delay];
    v.extend_from_slice(taps);
    v
}

/// Composite CFR `H_d + c H_b` (`|c| ≤ 1` for passive reflection).
pub fn composite_cfr(real: &ChannelRealization, c: Complex64) -> CVector {
    debug_assert!(c.norm() <= 1.0 + 1e-12, "passive reflection needs |c| <= 1");
    real.cfr_direct.zip_map(&real.cfr_backscatter, |d, b| d + c * b)
}

fn rayleigh_taps(stream: &mut RandomStream, taps: usize, power: f64) -> Vec<Complex64> {
    if power <= 0.0 {
        return vec![ZERO; taps];
    }
    stream.draw_cn(taps, power / taps as f64).iter().copied().collect()
}

/// Draws one realization: every link has i.i.d. `CN(0, β/L)` taps so its
/// total average power is its large-scale gain `β`.
pub fn draw_channel(cfg: &ChannelConfig, n: usize, stream: &mut RandomStream) -> ChannelRealization {
    let h_d = if cfg.direct_link {
        rayleigh_taps(stream, cfg.l_d, cfg.beta_direct())
    } else {
        vec![ZERO; cfg.l_d]
    };
    let (b, g) = match cfg.backscatter {
        BackscatterModel::Cascaded => (
            rayleigh_taps(stream, cfg.l_1, cfg.beta_fwd()),
            rayleigh_taps(stream, cfg.l_2, cfg.beta_bwd()),
        ),
        BackscatterModel::Rayleigh { taps } => (vec![ONE], rayleigh_taps(stream, taps, cfg.beta_backscatter())),
        BackscatterModel::Awgn => (vec![ONE], vec![Complex64::new(cfg.beta_backscatter().sqrt(), 0.0)]),
        BackscatterModel::Absent => (vec![ONE], vec![ZERO]),
    };
    ChannelRealization::from_taps(h_d, b, g, cfg.d_b, n)
}
