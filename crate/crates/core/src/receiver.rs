//! Joint primary/secondary detection at the cooperative receiver.
//!
//! Per OFDM symbol the receiver estimates the composite CIR from the comb
//! pilots, detects the primary data, and re-estimates the composite CFR
//! with all subcarriers now known. The preamble symbols separate the direct
//! and backscatter CFRs, and every later symbol's secondary value is read
//! off by projecting `Ĥ(n) − Ĥ_d` onto `Ĥ_b`.

use serde::{Deserialize, Serialize};

use crate::constellation::{PskAlphabet, QamAlphabet};
use crate::error::{Error, Result};
use crate::numerics::{
    ls_solve, partial_fourier, partial_fourier_rows, pseudo_inverse, CMatrix, CVector, Complex64, FastDft, ZERO,
};
use crate::txchain::{FrameObservation, SystemConfig};

/// Below this magnitude a subcarrier gain is treated as an exact null.
pub const ERASURE_TOL: f64 = 1e-12;

/// Which composite-CFR estimate feeds secondary detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// The pilot estimate `H̃(n)` itself (no re-estimation).
    PilotOnly,
    /// Per-subcarrier division by the detected symbols.
    Method1,
    /// `L`-tap least squares over all subcarriers.
    Method2,
}

/// Where the detector's channel knowledge comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    /// True `H(n)` for the primary, true `H_d`, `H_b` for the secondary.
    Perfect,
    /// Everything estimated from pilots and preamble.
    Estimated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Algorithm1Options {
    pub method: EstimatorKind,
    pub csi: CsiMode,
    /// Feed the true primary symbols to re-estimation.
    pub genie: bool,
}

/// Everything the receiver decided and estimated for one frame.
#[derive(Clone, Debug, Default)]
pub struct DetectionOutput {
    /// QAM labels on the data subcarriers, per symbol.
    pub s_hat: Vec<Vec<usize>>,
    /// PSK labels of the data symbols `n >= T`.
    pub c_hat: Vec<usize>,
    /// Pilot-based composite CFRs `H̃(n)`.
    pub h_tilde: Vec<CVector>,
    /// Re-estimated composite CFRs `Ĥ(n)`.
    pub h_hat: Vec<CVector>,
    pub h_hat_d: CVector,
    pub h_hat_b: CVector,
    /// Data subcarriers decided blind because the channel was a null.
    pub erasures: usize,
    /// Secondary symbols decided blind because `Ĥ_b` vanished.
    pub undetectable: usize,
    /// The pilot estimator had to be truncated to `N_p` taps.
    pub pilot_fallback: bool,
}

/// `G_0 = (√P_T S_p F_p)^+`, the pilot least-squares estimator for `l` taps.
pub fn pilot_lse_matrix(cfg: &SystemConfig, l: usize) -> Result<CMatrix> {
    if l > cfg.n_p() {
        return Err(Error::Singular(format!(
            "{l} channel taps cannot be resolved from {} pilot subcarriers",
            cfg.n_p()
        )));
    }
    let f_p = partial_fourier_rows(cfg.n, l, &cfg.pilot_indices);
    let sqrt_p = cfg.p_t.sqrt();
    let a = CMatrix::from_fn(cfg.n_p(), l, |r, c| f_p[(r, c)] * cfg.pilot_values[r] * sqrt_p);
    pseudo_inverse(&a)
}

/// Single-tap equalization and nearest-point decision on the data
/// subcarriers. Returns the labels and the number of erased subcarriers.
pub fn detect_primary(y: &CVector, h: &CVector, data: &[usize], qam: &QamAlphabet, sqrt_p: f64) -> (Vec<usize>, usize) {
    let mut erasures = 0;
    let labels = data
        .iter()
        .map(|&k| {
            let g = h[k] * sqrt_p;
            if g.norm() < ERASURE_TOL {
                erasures += 1;
                0
            } else {
                qam.nearest(y[k] * g.conj() / g.norm_sqr())
            }
        })
        .collect();
    (labels, erasures)
}

/// `Ĥ_k = Y_k / (√P_T Ŝ_k)`.
pub fn reestimate_method1(y: &CVector, s_hat: &CVector, p_t: f64) -> CVector {
    let sqrt_p = p_t.sqrt();
    y.zip_map(s_hat, |y, s| y / (s * sqrt_p))
}

/// `F_L` times the least-squares `L`-tap CIR fitted to `Y = √P_T Ŝ F_L h`.
pub fn reestimate_method2(y: &CVector, s_hat: &CVector, p_t: f64, l: usize) -> Result<CVector> {
    let n = y.len();
    let f_l = partial_fourier(n, l)?;
    let sqrt_p = p_t.sqrt();
    let a = CMatrix::from_fn(n, l, |r, c| s_hat[r] * sqrt_p * f_l[(r, c)]);
    let h = ls_solve(&a, y)?;
    Ok(f_l * h)
}

/// Unit-modulus form of Method 2, `F_L F_L^H Ŝ^H Y / (N √P_T)`, through
/// two FFTs.
pub fn reestimate_method2_unit(y: &CVector, s_hat: &CVector, p_t: f64, l: usize, dft: &FastDft) -> CVector {
    let n = y.len();
    let mut buf: Vec<Complex64> = y.iter().zip(s_hat.iter()).map(|(y, s)| y * s.conj()).collect();
    dft.inverse(&mut buf);
    let scale = 1.0 / (n as f64 * p_t.sqrt());
    for (i, v) in buf.iter_mut().enumerate() {
        *v = if i < l { *v * scale } else { ZERO };
    }
    dft.forward(&mut buf);
    CVector::from_vec(buf)
}

/// Splits composite estimates over the preamble into `(Ĥ_d, Ĥ_b)` by
/// averaging: `Ĥ_d = mean Ĥ(n)`, `Ĥ_b = mean c*(n) Ĥ(n)`. Exact only for
/// a balanced unit-modulus preamble.
pub fn separate_links(h_hat: &[CVector], preamble: &[Complex64]) -> Result<(CVector, CVector)> {
    if h_hat.len() != preamble.len() || h_hat.is_empty() {
        return Err(Error::Dimension(format!(
            "{} estimates for a {}-symbol preamble",
            h_hat.len(),
            preamble.len()
        )));
    }
    let t = preamble.len() as f64;
    let n = h_hat[0].len();
    let mut hd = CVector::zeros(n);
    let mut hb = CVector::zeros(n);
    for (h, c) in h_hat.iter().zip(preamble) {
        hd += h;
        hb += h * c.conj();
    }
    Ok((hd / Complex64::new(t, 0.0), hb / Complex64::new(t, 0.0)))
}

/// Per-subcarrier least squares `[1 c(n)] [H_d; H_b] ≈ Ĥ(n)`, valid for any
/// preamble containing two distinct symbols.
pub fn separate_links_ls(h_hat: &[CVector], preamble: &[Complex64]) -> Result<(CVector, CVector)> {
    if h_hat.len() != preamble.len() || h_hat.is_empty() {
        return Err(Error::Dimension(format!(
            "{} estimates for a {}-symbol preamble",
            h_hat.len(),
            preamble.len()
        )));
    }
    let t = preamble.len();
    let a = CMatrix::from_fn(t, 2, |r, c| if c == 0 { Complex64::new(1.0, 0.0) } else { preamble[r] });
    let pinv = pseudo_inverse(&a)?;
    let n = h_hat[0].len();
    let mut hd = CVector::zeros(n);
    let mut hb = CVector::zeros(n);
    for (i, h) in h_hat.iter().enumerate() {
        hd += h * pinv[(0, i)];
        hb += h * pinv[(1, i)];
    }
    Ok((hd, hb))
}

fn is_balanced(preamble: &[Complex64]) -> bool {
    preamble.iter().sum::<Complex64>().norm() < 1e-9
}

/// `ĉ = argmin_c |Ĥ_b^H (Ĥ(n) − Ĥ_d) / ‖Ĥ_b‖² − c|`.
pub fn detect_secondary(h_n: &CVector, h_d: &CVector, h_b: &CVector, psk: &PskAlphabet) -> Result<usize> {
    let energy = h_b.norm_squared();
    if !(energy > 0.0) {
        return Err(Error::ZeroBackscatter);
    }
    Ok(psk.nearest(h_b.dotc(&(h_n - h_d)) / energy))
}

/// Precomputed per-scenario receiver state.
#[derive(Clone, Debug)]
pub struct Receiver {
    cfg: SystemConfig,
    qam: QamAlphabet,
    psk: PskAlphabet,
    data: Vec<usize>,
    dft: FastDft,
    /// Composite CIR length assumed by re-estimation.
    l: usize,
    g0: CMatrix,
    pilot_fallback: bool,
}

impl Receiver {
    /// Builds the estimators for `cfg`. When the composite CIR is longer
    /// than the pilot comb can resolve, the pilot estimator is truncated to
    /// `N_p` taps and [`DetectionOutput::pilot_fallback`] is set.
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let l = cfg.cir_taps();
        let (g0, pilot_fallback) = match pilot_lse_matrix(cfg, l) {
            Ok(g) => (g, false),
            Err(Error::Singular(_)) => (pilot_lse_matrix(cfg, cfg.n_p())?, true),
            Err(e) => return Err(e),
        };
        Ok(Self {
            qam: cfg.qam()?,
            psk: cfg.psk()?,
            data: cfg.data_indices(),
            dft: FastDft::new(cfg.n),
            l,
            g0,
            pilot_fallback,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn qam(&self) -> &QamAlphabet {
        &self.qam
    }

    pub fn psk(&self) -> &PskAlphabet {
        &self.psk
    }

    pub fn taps(&self) -> usize {
        self.l
    }

    pub fn pilot_fallback(&self) -> bool {
        self.pilot_fallback
    }

    /// `h̃ = G_0 Y_p`.
    pub fn estimate_pilot_cir(&self, y: &CVector) -> CVector {
        let y_p = CVector::from_iterator(self.cfg.n_p(), self.cfg.pilot_indices.iter().map(|&k| y[k]));
        &self.g0 * y_p
    }

    /// Zero-padded FFT of a CIR, `F_L h`.
    pub fn cfr(&self, h: &CVector) -> CVector {
        let mut buf = vec![ZERO; self.cfg.n];
        buf[..h.len()].copy_from_slice(h.as_slice());
        self.dft.forward(&mut buf);
        CVector::from_vec(buf)
    }

    /// Pilot-based composite CFR `H̃(n)`.
    pub fn pilot_cfr(&self, y: &CVector) -> CVector {
        self.cfr(&self.estimate_pilot_cir(y))
    }

    /// Full symbol vector with known pilots and the given data labels.
    pub fn symbols(&self, labels: &[usize]) -> CVector {
        let mut s = CVector::zeros(self.cfg.n);
        for (&k, &p) in self.cfg.pilot_indices.iter().zip(&self.cfg.pilot_values) {
            s[k] = p;
        }
        for (&k, &l) in self.data.iter().zip(labels) {
            s[k] = self.qam.point(l);
        }
        s
    }

    pub fn detect_primary(&self, y: &CVector, h: &CVector) -> (Vec<usize>, usize) {
        detect_primary(y, h, &self.data, &self.qam, self.cfg.p_t.sqrt())
    }

    /// Re-estimated composite CFR `Ĥ(n)` from known symbols `s`.
    pub fn reestimate(&self, method: EstimatorKind, y: &CVector, s: &CVector, h_tilde: &CVector) -> Result<CVector> {
        match method {
            EstimatorKind::PilotOnly => Ok(h_tilde.clone()),
            EstimatorKind::Method1 => Ok(reestimate_method1(y, s, self.cfg.p_t)),
            EstimatorKind::Method2 if self.qam.is_constant_modulus() && self.unit_pilots() => {
                Ok(reestimate_method2_unit(y, s, self.cfg.p_t, self.l, &self.dft))
            }
            EstimatorKind::Method2 => reestimate_method2(y, s, self.cfg.p_t, self.l),
        }
    }

    fn unit_pilots(&self) -> bool {
        self.cfg.pilot_values.iter().all(|p| (p.norm_sqr() - 1.0).abs() < 1e-12)
    }

    fn separate(&self, h_hat: &[CVector]) -> Result<(CVector, CVector)> {
        if is_balanced(&self.cfg.preamble) {
            separate_links(h_hat, &self.cfg.preamble)
        } else {
            separate_links_ls(h_hat, &self.cfg.preamble)
        }
    }

    /// Algorithm 1 over one frame.
    pub fn run_algorithm1(&self, obs: &FrameObservation, opts: Algorithm1Options) -> Result<DetectionOutput> {
        let t = self.cfg.t();
        let sqrt_p = self.cfg.p_t.sqrt();
        let mut out = DetectionOutput {
            pilot_fallback: self.pilot_fallback,
            ..Default::default()
        };
        for (n, y) in obs.y.iter().enumerate() {
            let h_tilde = self.pilot_cfr(y);
            let (labels, erased) = match opts.csi {
                CsiMode::Perfect => detect_primary(y, &obs.true_cfr(n), &self.data, &self.qam, sqrt_p),
                CsiMode::Estimated => detect_primary(y, &h_tilde, &self.data, &self.qam, sqrt_p),
            };
            out.erasures += erased;
            let s = if opts.genie {
                obs.frame.s[n].clone()
            } else {
                self.symbols(&labels)
            };
            let h_hat = self.reestimate(opts.method, y, &s, &h_tilde)?;
            out.s_hat.push(labels);
            out.h_tilde.push(h_tilde);
            out.h_hat.push(h_hat);
        }
        let (hd, hb) = match opts.csi {
            CsiMode::Perfect => (obs.realization.cfr_direct.clone(), obs.true_backscatter_cfr()),
            CsiMode::Estimated => self.separate(&out.h_hat[..t])?,
        };
        for h in &out.h_hat[t..] {
            match detect_secondary(h, &hd, &hb, &self.psk) {
                Ok(c) => out.c_hat.push(c),
                Err(Error::ZeroBackscatter) => {
                    out.undetectable += 1;
                    out.c_hat.push(0);
                }
                Err(e) => return Err(e),
            }
        }
        out.h_hat_d = hd;
        out.h_hat_b = hb;
        Ok(out)
    }

    /// Two-step ML: for each candidate `c`, per-subcarrier nearest-QAM
    /// against `√P_T (H_d + c H_b)`, then the `c` with the smallest total
    /// metric. With `use_pilots` the pilot subcarriers enter the metric as
    /// known symbols and the preamble fixes `c` for `n < T`; without it
    /// every subcarrier and every symbol is treated as unknown.
    pub fn run_ml_benchmark(
        &self,
        obs: &FrameObservation,
        h_d: &CVector,
        h_b: &CVector,
        use_pilots: bool,
    ) -> DetectionOutput {
        let t = self.cfg.t();
        let sqrt_p = self.cfg.p_t.sqrt();
        let mut out = DetectionOutput {
            h_hat_d: h_d.clone(),
            h_hat_b: h_b.clone(),
            ..Default::default()
        };
        let all: Vec<usize> = (0..self.cfg.n).collect();
        let unknown = if use_pilots { &self.data } else { &all };
        for (n, y) in obs.y.iter().enumerate() {
            let fixed = (use_pilots && n < t).then(|| self.cfg.preamble[n]);
            let candidates: Vec<(usize, Complex64)> = match fixed {
                Some(c) => vec![(0, c)],
                None => self.psk.points().iter().copied().enumerate().collect(),
            };
            let mut best: Option<(f64, usize, Vec<usize>)> = None;
            for (label, c) in candidates {
                let heff = h_d.zip_map(h_b, |d, b| (d + c * b) * sqrt_p);
                let (metric, decisions) = self.ml_metric(y, &heff, unknown, use_pilots);
                if best.as_ref().is_none_or(|(m, _, _)| metric < *m) {
                    best = Some((metric, label, decisions));
                }
            }
            let (_, c_label, decisions) = best.expect("at least one candidate");
            let labels = if use_pilots {
                decisions
            } else {
                self.data.iter().map(|&k| decisions[k]).collect()
            };
            out.s_hat.push(labels);
            if n >= t {
                out.c_hat.push(c_label);
            }
        }
        out
    }

    /// Total metric `Σ_k min_S |Y_k − heff_k S|²` over `unknown`, plus the
    /// known-pilot terms when requested. Returns the metric and the
    /// minimizing labels on `unknown`.
    pub fn ml_metric(&self, y: &CVector, heff: &CVector, unknown: &[usize], with_pilots: bool) -> (f64, Vec<usize>) {
        let mut metric = 0.0;
        let mut labels = Vec::with_capacity(unknown.len());
        for &k in unknown {
            let h = heff[k];
            let label = if h.norm() < ERASURE_TOL {
                0
            } else {
                self.qam.nearest(y[k] / h)
            };
            metric += (y[k] - h * self.qam.point(label)).norm_sqr();
            labels.push(label);
        }
        if with_pilots {
            for (&k, &p) in self.cfg.pilot_indices.iter().zip(&self.cfg.pilot_values) {
                metric += (y[k] - heff[k] * p).norm_sqr();
            }
        }
        (metric, labels)
    }
}
