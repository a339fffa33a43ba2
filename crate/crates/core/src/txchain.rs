//! Transmit chain and receiver front end: primary OFDM frames with comb
//! pilots, secondary PSK symbols with a preamble, and the noisy
//! frequency-domain observation `Y(n) = √P_T S(n) H(n) + U(n)`.
//!
//! Two observation paths are provided. [`frequency_domain_rx`] applies the
//! per-subcarrier model directly. [`sample_level_rx`] runs the whole chain
//! in the time domain (IDFT, CP, convolution, reflection, CP removal, DFT)
//! and is the only path that can model a symbol synchronization error `ξ`.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, ChannelRealization};
use crate::constellation::{PskAlphabet, QamAlphabet};
use crate::error::{Error, Result};
use crate::numerics::{CVector, Complex64, FastDft, RandomStream, ONE, ZERO};

const TAG_CHANNEL: u64 = 1;
const TAG_DATA: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_PRIOR: u64 = 4;

/// Every constant of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Subcarriers `N`.
    pub n: usize,
    pub n_cp: usize,
    pub pilot_indices: Vec<usize>,
    /// Diagonal of `S_p`.
    pub pilot_values: Vec<Complex64>,
    /// Primary square-QAM order.
    pub m_s: usize,
    /// Secondary PSK order.
    pub m_c: usize,
    /// Known secondary symbols at the head of every frame (`T` of them).
    pub preamble: Vec<Complex64>,
    /// OFDM symbols per secondary frame.
    pub n_max: usize,
    /// Transmit power in watts.
    pub p_t: f64,
    /// Noise power per subcarrier in watts.
    pub sigma2: f64,
    pub channel: ChannelConfig,
    /// Symbol synchronization error `ξ` in samples.
    pub sync_error: usize,
    /// Secondary symbol reflected before the frame starts.
    pub prior_c: Complex64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let n = 64;
        let n_p = 8;
        Self {
            n,
            n_cp: 16,
            pilot_indices: (0..n_p).map(|i| i * n / n_p).collect(),
            pilot_values: vec![ONE; n_p],
            m_s: 16,
            m_c: 8,
            preamble: vec![ONE, -ONE],
            n_max: 10,
            p_t: 1.0,
            sigma2: dbm_to_watt(-80.0),
            channel: ChannelConfig::default(),
            sync_error: 0,
            prior_c: ONE,
        }
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Equally spaced comb of `n_p` pilots starting at subcarrier 0.
pub fn comb_pilots(n: usize, n_p: usize) -> Result<Vec<usize>> {
    if n_p == 0 || n_p > n || !n.is_multiple_of(n_p) {
        return Err(Error::Config(format!(
            "{n_p} pilots cannot be equally spaced over {n} subcarriers"
        )));
    }
    Ok((0..n_p).map(|i| i * n / n_p).collect())
}

impl SystemConfig {
    pub fn n_p(&self) -> usize {
        self.pilot_indices.len()
    }

    /// Preamble length `T`.
    pub fn t(&self) -> usize {
        self.preamble.len()
    }

    /// Data subcarriers `D`, in increasing order.
    pub fn data_indices(&self) -> Vec<usize> {
        let mut is_pilot = vec![false; self.n];
        for &p in &self.pilot_indices {
            is_pilot[p] = true;
        }
        (0..self.n).filter(|&k| !is_pilot[k]).collect()
    }

    /// Composite CIR length `L` the receiver assumes.
    pub fn cir_taps(&self) -> usize {
        self.channel.composite_taps(self.sync_error)
    }

    pub fn qam(&self) -> Result<QamAlphabet> {
        QamAlphabet::new(self.m_s)
    }

    pub fn psk(&self) -> Result<PskAlphabet> {
        PskAlphabet::new(self.m_c)
    }

    /// Average direct-link SNR `P_T β_d / σ²` in dB.
    pub fn direct_snr_db(&self) -> f64 {
        10.0 * (self.p_t * self.channel.beta_direct() / self.sigma2).log10()
    }

    /// Average backscatter-link SNR `P_T β_1 β_2 / σ²` in dB.
    pub fn backscatter_snr_db(&self) -> f64 {
        10.0 * (self.p_t * self.channel.beta_backscatter() / self.sigma2).log10()
    }

    /// Sets `P_T` so the direct-link SNR equals `db`.
    pub fn set_direct_snr_db(&mut self, db: f64) {
        self.p_t = db_to_linear(db) * self.sigma2 / self.channel.beta_direct();
    }

    /// Sets `P_T` so the backscatter-link SNR equals `db`.
    pub fn set_backscatter_snr_db(&mut self, db: f64) {
        self.p_t = db_to_linear(db) * self.sigma2 / self.channel.beta_backscatter();
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_cp >= self.n {
            return Err(Error::Config(format!(
                "need 0 <= N_cp < N, got N = {}, N_cp = {}",
                self.n, self.n_cp
            )));
        }
        if self.pilot_indices.is_empty() || self.pilot_indices.len() != self.pilot_values.len() {
            return Err(Error::Config(
                "pilot indices and values must be non-empty and of equal length".into(),
            ));
        }
        if self.pilot_indices.windows(2).any(|w| w[0] >= w[1]) || *self.pilot_indices.last().unwrap() >= self.n {
            return Err(Error::Config(
                "pilot indices must be strictly increasing and below N".into(),
            ));
        }
        if self.pilot_values.iter().any(|p| (p.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::Config("pilot values must have unit modulus".into()));
        }
        self.qam()?;
        self.psk()?;
        if self.t() < 2 {
            return Err(Error::Config("the preamble needs at least two symbols".into()));
        }
        if self.preamble.iter().any(|c| (c.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::Config("preamble symbols must have unit modulus".into()));
        }
        if self.n_max <= self.t() {
            return Err(Error::Config(format!(
                "frame length {} leaves no data after a {}-symbol preamble",
                self.n_max,
                self.t()
            )));
        }
        if !(self.p_t > 0.0) || !(self.sigma2 >= 0.0) {
            return Err(Error::Config("P_T must be positive and sigma2 nonnegative".into()));
        }
        if self.prior_c.norm() > 1.0 + 1e-9 {
            return Err(Error::Config("reflection coefficient must satisfy |c| <= 1".into()));
        }
        if self.sync_error >= self.n + self.n_cp {
            return Err(Error::OutOfRange {
                what: "sync error",
                detail: format!("{} not below N + N_cp = {}", self.sync_error, self.n + self.n_cp),
            });
        }
        self.channel.validate(self.n_cp)
    }

    /// True when the preamble satisfies `Σ c = 0` (unit modulus is checked
    /// by [`SystemConfig::validate`]).
    pub fn preamble_is_balanced(&self) -> bool {
        self.preamble.iter().sum::<Complex64>().norm() < 1e-9
    }
}

/// One secondary frame: `N_max` OFDM symbols and their reflection
/// coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// Full frequency-domain symbols `s(n)` including pilots.
    pub s: Vec<CVector>,
    /// QAM labels on the data subcarriers, per symbol.
    pub data_labels: Vec<Vec<usize>>,
    /// Reflection coefficient per symbol (preamble then data).
    pub c: Vec<Complex64>,
    /// PSK labels of the data symbols `n >= T`.
    pub c_labels: Vec<usize>,
}

/// `s(n)` with pilots at their indices and QAM data elsewhere.
pub fn modulate_primary(labels: &[usize], cfg: &SystemConfig, qam: &QamAlphabet) -> Result<CVector> {
    let data = cfg.data_indices();
    if labels.len() != data.len() {
        return Err(Error::Dimension(format!(
            "{} data labels for {} data subcarriers",
            labels.len(),
            data.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= qam.order()) {
        return Err(Error::OutOfRange {
            what: "QAM label",
            detail: format!("{bad} >= {}", qam.order()),
        });
    }
    let mut s = CVector::zeros(cfg.n);
    for (&k, &p) in cfg.pilot_indices.iter().zip(&cfg.pilot_values) {
        s[k] = p;
    }
    for (&k, &l) in data.iter().zip(labels) {
        s[k] = qam.point(l);
    }
    Ok(s)
}

/// Draws the random content of one frame from `stream`.
pub fn draw_frame(cfg: &SystemConfig, qam: &QamAlphabet, psk: &PskAlphabet, stream: &mut RandomStream) -> Frame {
    let n_data = cfg.n - cfg.n_p();
    let mut s = Vec::with_capacity(cfg.n_max);
    let mut data_labels = Vec::with_capacity(cfg.n_max);
    for _ in 0..cfg.n_max {
        let labels: Vec<usize> = (0..n_data).map(|_| stream.index(qam.order())).collect();
        s.push(modulate_primary(&labels, cfg, qam).expect("labels drawn in range"));
        data_labels.push(labels);
    }
    let c_labels: Vec<usize> = (cfg.t()..cfg.n_max).map(|_| stream.index(psk.order())).collect();
    let c = cfg
        .preamble
        .iter()
        .copied()
        .chain(c_labels.iter().map(|&l| psk.point(l)))
        .collect();
    Frame {
        s,
        data_labels,
        c,
        c_labels,
    }
}

/// Noisy receiver samples for one frame, with the ground truth that
/// produced them.
#[derive(Clone, Debug)]
pub struct FrameObservation {
    /// `Y(n)` per OFDM symbol.
    pub y: Vec<CVector>,
    pub frame: Frame,
    pub realization: ChannelRealization,
    /// Sync error the observation was generated with.
    pub xi: usize,
}

impl FrameObservation {
    /// True composite CFR of symbol `n` (the backscatter part lagged by `ξ`).
    pub fn true_cfr(&self, n: usize) -> CVector {
        let hb = self.true_backscatter_cfr();
        self.realization.cfr_direct.zip_map(&hb, |d, b| d + self.frame.c[n] * b)
    }

    pub fn true_backscatter_cfr(&self) -> CVector {
        self.realization.backscatter_cfr_lagged(self.xi)
    }
}

fn noise_block(cfg: &SystemConfig, stream: &mut RandomStream) -> Vec<CVector> {
    (0..cfg.n_max)
        .map(|_| {
            let unit = stream.draw_cn(cfg.n, 1.0);
            unit * Complex64::new(cfg.sigma2.sqrt(), 0.0)
        })
        .collect()
}

/// `Y(n) = √P_T diag(s(n)) (H_d + c(n) H_b) + U(n)`, assuming perfect
/// symbol synchronization.
pub fn frequency_domain_rx(
    frame: Frame,
    real: ChannelRealization,
    cfg: &SystemConfig,
    noise: &mut RandomStream,
) -> FrameObservation {
    let sqrt_p = Complex64::new(cfg.p_t.sqrt(), 0.0);
    let u = noise_block(cfg, noise);
    let y = frame
        .s
        .iter()
        .zip(&frame.c)
        .zip(u)
        .map(|((s, &c), u)| {
            let h = real.composite_cfr(c);
            s.component_mul(&h) * sqrt_p + u
        })
        .collect();
    FrameObservation {
        y,
        frame,
        realization: real,
        xi: 0,
    }
}

/// Causal FIR filtering of `x` truncated to `x.len()` samples.
fn filter(x: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; x.len()];
    for (t, o) in out.iter_mut().enumerate() {
        for (l, &h) in taps.iter().enumerate().take(t + 1) {
            *o += h * x[t - l];
        }
    }
    out
}

/// Time-domain transmit stream: a prior symbol followed by the frame, each
/// as `√P_T W^H s / √N` with a cyclic prefix.
fn transmit_stream(prior: &CVector, frame: &Frame, cfg: &SystemConfig, dft: &FastDft) -> Vec<Complex64> {
    let scale = (cfg.p_t / cfg.n as f64).sqrt();
    let mut out = Vec::with_capacity((cfg.n_max + 1) * (cfg.n + cfg.n_cp));
    for s in std::iter::once(prior).chain(&frame.s) {
        let mut buf: Vec<Complex64> = s.iter().copied().collect();
        dft.inverse(&mut buf);
        buf.iter_mut().for_each(|v| *v *= scale);
        out.extend_from_slice(&buf[cfg.n - cfg.n_cp..]);
        out.extend_from_slice(&buf);
    }
    out
}

/// Signal leaving STx: the forward-link output reflected with the
/// secondary symbol of its own period, the whole branch lagging the OFDM
/// symbol grid by `ξ` samples. Symbol 0 of the stream is the prior symbol.
pub fn stx_reflection(forward: &[Complex64], c: &[Complex64], symbol_len: usize, xi: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; forward.len()];
    for (t, o) in out.iter_mut().enumerate().skip(xi) {
        let src = t - xi;
        *o = forward[src] * c[src / symbol_len];
    }
    out
}

/// Full time-domain chain with sync error `xi`. At `xi = 0` it reproduces
/// [`frequency_domain_rx`] for the same noise stream.
pub fn sample_level_rx(
    frame: Frame,
    real: ChannelRealization,
    cfg: &SystemConfig,
    xi: usize,
    prior: &mut RandomStream,
    noise: &mut RandomStream,
) -> Result<FrameObservation> {
    let sym_len = cfg.n + cfg.n_cp;
    if xi >= sym_len {
        return Err(Error::OutOfRange {
            what: "sync error",
            detail: format!("{xi} not below N + N_cp = {sym_len}"),
        });
    }
    let qam = cfg.qam()?;
    let dft = FastDft::new(cfg.n);
    let prior_labels: Vec<usize> = (0..cfg.n - cfg.n_p()).map(|_| prior.index(qam.order())).collect();
    let prior_s = modulate_primary(&prior_labels, cfg, &qam)?;
    let x = transmit_stream(&prior_s, &frame, cfg, &dft);

    let mut c_seq = Vec::with_capacity(cfg.n_max + 1);
    c_seq.push(cfg.prior_c);
    c_seq.extend_from_slice(&frame.c);

    let direct = filter(&x, &real.h_d);
    let forward = filter(&x, &real.b);
    let reflected = stx_reflection(&forward, &c_seq, sym_len, xi);
    let mut delayed = vec![ZERO; reflected.len()];
    if real.d_b < reflected.len() {
        delayed[real.d_b..].copy_from_slice(&reflected[..reflected.len() - real.d_b]);
    }
    let backscatter = filter(&delayed, &real.g);

    let u = noise_block(cfg, noise);
    let norm = 1.0 / (cfg.n as f64).sqrt();
    let y = (0..cfg.n_max)
        .zip(u)
        .map(|(n, u)| {
            let start = (n + 1) * sym_len + cfg.n_cp;
            let mut buf: Vec<Complex64> = (start..start + cfg.n).map(|t| direct[t] + backscatter[t]).collect();
            dft.forward(&mut buf);
            CVector::from_iterator(cfg.n, buf.into_iter().map(|v| v * norm)) + u
        })
        .collect();
    Ok(FrameObservation {
        y,
        frame,
        realization: real,
        xi,
    })
}

/// Independent per-purpose streams of one trial.
#[derive(Clone, Debug)]
pub struct TrialStreams {
    pub channel: RandomStream,
    pub data: RandomStream,
    pub noise: RandomStream,
    pub prior: RandomStream,
}

impl TrialStreams {
    pub fn new(master_seed: u64, trial: u64) -> Self {
        let root = RandomStream::new(master_seed, trial);
        Self {
            channel: root.substream(TAG_CHANNEL),
            data: root.substream(TAG_DATA),
            noise: root.substream(TAG_NOISE),
            prior: root.substream(TAG_PRIOR),
        }
    }
}

/// Draws channel and frame for one trial and observes it, through the
/// sample-level chain when `cfg.sync_error > 0`.
pub fn observe_trial(
    cfg: &SystemConfig,
    qam: &QamAlphabet,
    psk: &PskAlphabet,
    streams: &mut TrialStreams,
) -> Result<FrameObservation> {
    let mut real = crate::channel::draw_channel(&cfg.channel, cfg.n, &mut streams.channel);
    if !cfg.channel.direct_link {
        real = real.without_direct();
    }
    let frame = draw_frame(cfg, qam, psk, &mut streams.data);
    if cfg.sync_error == 0 {
        Ok(frequency_domain_rx(frame, real, cfg, &mut streams.noise))
    } else {
        sample_level_rx(frame, real, cfg, cfg.sync_error, &mut streams.prior, &mut streams.noise)
    }
}
