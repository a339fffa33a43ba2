//! Deterministic Monte Carlo BER engine.
//!
//! A trial is one channel realization carrying one secondary frame. Trial
//! `i` always draws from stream `(master_seed, i)`, so every sweep point
//! sees the same channels, data and noise (common random numbers), and the
//! results do not depend on how trials are spread over workers: trials are
//! grouped in fixed-size chunks, each chunk is summed in order, and the
//! chunk totals are summed in order.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::bit_errors;
use crate::error::{Error, Result};
use crate::receiver::{Algorithm1Options, CsiMode, DetectionOutput, EstimatorKind, Receiver};
use crate::theory::{self, ConstellationMoments, PrimaryTheory};
use crate::txchain::{observe_trial, FrameObservation, SystemConfig, TrialStreams};

/// Trials per work item.
pub const CHUNK: u64 = 64;

/// Swept parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// `P_T β_d / σ²` in dB (sets `P_T`).
    DirectSnrDb,
    /// `β_1 β_2 / β_d` in dB (moves STx along the line).
    SnrRatioDb,
    /// PTx–STx distance in metres.
    StxDistanceM,
    /// Symbol synchronization error in samples.
    SyncErrorSamples,
    /// `P_T β_1 β_2 / σ²` in dB (sets `P_T`).
    BackscatterSnrDb,
}

impl Axis {
    pub const ALL: [Axis; 5] = [
        Axis::DirectSnrDb,
        Axis::SnrRatioDb,
        Axis::StxDistanceM,
        Axis::SyncErrorSamples,
        Axis::BackscatterSnrDb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::DirectSnrDb => "direct_snr_db",
            Axis::SnrRatioDb => "snr_ratio_db",
            Axis::StxDistanceM => "stx_distance_m",
            Axis::SyncErrorSamples => "sync_error_samples",
            Axis::BackscatterSnrDb => "backscatter_snr_db",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown axis '{s}'")))
    }
}

/// Receiver variants that can be swept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    ProposedM1,
    ProposedM2,
    /// Secondary detection straight from the pilot estimate.
    PilotOnly,
    /// Method 1 fed the true primary symbols.
    GenieM1,
    /// Method 2 fed the true primary symbols.
    GenieM2,
    /// Two-step ML with the true `H_d`, `H_b`.
    MlPerfect,
    /// Two-step ML with `H_d`, `H_b` from Method 2 and the preamble.
    MlEstimated,
    /// Two-step ML with perfect CSI that ignores pilots and preamble.
    MlNoPilots,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 8] = [
        ReceiverKind::ProposedM1,
        ReceiverKind::ProposedM2,
        ReceiverKind::PilotOnly,
        ReceiverKind::GenieM1,
        ReceiverKind::GenieM2,
        ReceiverKind::MlPerfect,
        ReceiverKind::MlEstimated,
        ReceiverKind::MlNoPilots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::ProposedM1 => "proposed_m1",
            ReceiverKind::ProposedM2 => "proposed_m2",
            ReceiverKind::PilotOnly => "pilot_only",
            ReceiverKind::GenieM1 => "genie_m1",
            ReceiverKind::GenieM2 => "genie_m2",
            ReceiverKind::MlPerfect => "ml_perfect",
            ReceiverKind::MlEstimated => "ml_estimated",
            ReceiverKind::MlNoPilots => "ml_no_pilots",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown receiver '{s}'")))
    }

    /// CSI mode fixed by the receiver itself, if any.
    pub fn fixed_csi(self) -> Option<CsiMode> {
        match self {
            ReceiverKind::MlPerfect | ReceiverKind::MlNoPilots => Some(CsiMode::Perfect),
            ReceiverKind::MlEstimated => Some(CsiMode::Estimated),
            _ => None,
        }
    }

    fn algorithm1(self, csi: CsiMode) -> Option<Algorithm1Options> {
        let (method, genie) = match self {
            ReceiverKind::ProposedM1 => (EstimatorKind::Method1, false),
            ReceiverKind::ProposedM2 => (EstimatorKind::Method2, false),
            ReceiverKind::PilotOnly => (EstimatorKind::PilotOnly, false),
            ReceiverKind::GenieM1 => (EstimatorKind::Method1, true),
            ReceiverKind::GenieM2 => (EstimatorKind::Method2, true),
            _ => return None,
        };
        Some(Algorithm1Options { method, csi, genie })
    }
}

pub fn csi_name(csi: CsiMode) -> &'static str {
    match csi {
        CsiMode::Perfect => "perfect",
        CsiMode::Estimated => "estimated",
    }
}

pub fn parse_csi(s: &str) -> Result<CsiMode> {
    match s {
        "perfect" => Ok(CsiMode::Perfect),
        "estimated" => Ok(CsiMode::Estimated),
        _ => Err(Error::Config(format!("unknown csi mode '{s}'"))),
    }
}

/// One simulated curve: a receiver under one CSI mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CurveKey {
    pub receiver: ReceiverKind,
    pub csi: CsiMode,
}

impl CurveKey {
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.receiver.name(), csi_name(self.csi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub points: Vec<f64>,
    pub trials_per_point: u64,
    pub receivers: Vec<ReceiverKind>,
    /// CSI modes applied to receivers that do not fix their own.
    pub csi_modes: Vec<CsiMode>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            axis: Axis::DirectSnrDb,
            points: parse_points("12:30:3").expect("valid range"),
            trials_per_point: 100_000,
            receivers: vec![ReceiverKind::ProposedM1, ReceiverKind::ProposedM2],
            csi_modes: vec![CsiMode::Estimated],
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Config("sweep has no points".into()));
        }
        if self.points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep points must be strictly increasing".into()));
        }
        if self.trials_per_point == 0 {
            return Err(Error::Config("trials per point must be positive".into()));
        }
        if self.receivers.is_empty() {
            return Err(Error::Config("no receivers selected".into()));
        }
        if self.csi_modes.is_empty() && self.receivers.iter().any(|r| r.fixed_csi().is_none()) {
            return Err(Error::Config("no csi mode selected".into()));
        }
        Ok(())
    }

    /// Curves in `(receiver, csi)` order, without duplicates.
    pub fn curves(&self) -> Vec<CurveKey> {
        let mut out: Vec<CurveKey> = self
            .receivers
            .iter()
            .flat_map(|&r| match r.fixed_csi() {
                Some(csi) => vec![CurveKey { receiver: r, csi }],
                None => self
                    .csi_modes
                    .iter()
                    .map(|&csi| CurveKey { receiver: r, csi })
                    .collect(),
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Parses `start:stop:step` (inclusive of `stop` within half a step) or a
/// comma-separated list.
pub fn parse_points(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("invalid point list '{s}'"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
            return Err(bad());
        }
        let count = ((stop - start) / step + 0.5).floor() as usize + 1;
        Ok((0..count).map(|i| start + i as f64 * step).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

/// Applies one sweep point to a copy of `base`.
pub fn apply_point(base: &SystemConfig, axis: Axis, value: f64) -> Result<SystemConfig> {
    let mut cfg = base.clone();
    match axis {
        Axis::DirectSnrDb => cfg.set_direct_snr_db(value),
        Axis::BackscatterSnrDb => cfg.set_backscatter_snr_db(value),
        Axis::SnrRatioDb => cfg.channel = cfg.channel.clone().with_snr_ratio_db(value)?,
        Axis::StxDistanceM => cfg.channel = cfg.channel.clone().with_stx_distance(value)?,
        Axis::SyncErrorSamples => {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(Error::OutOfRange {
                    what: "sync error",
                    detail: format!("{value} is not a nonnegative integer"),
                });
            }
            cfg.sync_error = value as usize;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Error counts and summed analytic rates for one curve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub primary_bit_errors: u64,
    pub primary_bits: u64,
    pub primary_symbol_errors: u64,
    pub primary_symbols: u64,
    pub secondary_bit_errors: u64,
    pub secondary_bits: u64,
    pub erasures: u64,
    pub undetectable: u64,
    pub trials: u64,
    /// Sum over trials of the per-trial analytic primary BER.
    pub theory_primary_ber: f64,
    /// Sum over trials of the per-trial analytic primary SER.
    pub theory_primary_ser: f64,
    pub theory_primary_trials: u64,
    pub theory_secondary_ber: f64,
    pub theory_secondary_trials: u64,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Self) {
        self.primary_bit_errors += o.primary_bit_errors;
        self.primary_bits += o.primary_bits;
        self.primary_symbol_errors += o.primary_symbol_errors;
        self.primary_symbols += o.primary_symbols;
        self.secondary_bit_errors += o.secondary_bit_errors;
        self.secondary_bits += o.secondary_bits;
        self.erasures += o.erasures;
        self.undetectable += o.undetectable;
        self.trials += o.trials;
        self.theory_primary_ber += o.theory_primary_ber;
        self.theory_primary_ser += o.theory_primary_ser;
        self.theory_primary_trials += o.theory_primary_trials;
        self.theory_secondary_ber += o.theory_secondary_ber;
        self.theory_secondary_trials += o.theory_secondary_trials;
    }
}

/// Precomputed state for one sweep point.
#[derive(Clone, Debug)]
pub struct PointContext {
    pub cfg: SystemConfig,
    pub receiver: Receiver,
    primary: PrimaryTheory,
    moments: ConstellationMoments,
}

impl PointContext {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        Ok(Self {
            receiver: Receiver::new(cfg)?,
            primary: PrimaryTheory::new(cfg)?,
            moments: theory::qam_moments(cfg.m_s)?,
            cfg: cfg.clone(),
        })
    }

    pub fn moments(&self) -> ConstellationMoments {
        self.moments
    }

    /// Analytic primary `(ber, ser)` for this frame's realization and
    /// secondary symbols, averaged over the frame.
    fn primary_theory(&self, obs: &FrameObservation, csi: CsiMode) -> (f64, f64) {
        let (mut ber, mut ser) = (0.0, 0.0);
        for n in 0..obs.y.len() {
            let r = self.primary.rates(
                &obs.true_cfr(n),
                self.cfg.p_t,
                self.cfg.sigma2,
                csi == CsiMode::Estimated,
            );
            ber += r.ber;
            ser += r.ser;
        }
        let n = obs.y.len() as f64;
        (ber / n, ser / n)
    }

    fn secondary_theory(&self, obs: &FrameObservation, key: CurveKey) -> Option<f64> {
        let hb2 = obs.true_backscatter_cfr().norm_squared();
        let (p, s2, m_c) = (self.cfg.p_t, self.cfg.sigma2, self.cfg.m_c);
        let snr = match (key.receiver, key.csi) {
            (ReceiverKind::PilotOnly, _)
            | (ReceiverKind::MlPerfect | ReceiverKind::MlEstimated | ReceiverKind::MlNoPilots, _) => return None,
            (_, CsiMode::Perfect) => theory::snr_secondary_perfect(hb2, p, s2, self.moments),
            (ReceiverKind::ProposedM1 | ReceiverKind::GenieM1, CsiMode::Estimated) => {
                theory::snr_secondary_method1(hb2, p, s2, self.cfg.n, self.moments)
            }
            (_, CsiMode::Estimated) => theory::snr_secondary_method2(hb2, p, s2, self.receiver.taps()),
        };
        Some(theory::psk_ber(m_c, snr))
    }
}

fn tally(obs: &FrameObservation, out: &DetectionOutput, rx: &Receiver) -> Counts {
    let bits_s = rx.qam().bits_per_symbol() as u64;
    let bits_c = rx.psk().bits_per_symbol() as u64;
    let mut c = Counts {
        trials: 1,
        erasures: out.erasures as u64,
        undetectable: out.undetectable as u64,
        ..Default::default()
    };
    for (truth, det) in obs.frame.data_labels.iter().zip(&out.s_hat) {
        for (&a, &b) in truth.iter().zip(det) {
            c.primary_bit_errors += bit_errors(a, b) as u64;
            c.primary_symbol_errors += (a != b) as u64;
        }
        c.primary_bits += truth.len() as u64 * bits_s;
        c.primary_symbols += truth.len() as u64;
    }
    for (&a, &b) in obs.frame.c_labels.iter().zip(&out.c_hat) {
        c.secondary_bit_errors += bit_errors(a, b) as u64;
    }
    c.secondary_bits += obs.frame.c_labels.len() as u64 * bits_c;
    c
}

/// Runs every curve on trial `trial_index`. Identical inputs give
/// identical counts.
pub fn run_trial(ctx: &PointContext, curves: &[CurveKey], trial_index: u64, master_seed: u64) -> Result<Vec<Counts>> {
    let rx = &ctx.receiver;
    let mut streams = TrialStreams::new(master_seed, trial_index);
    let obs = observe_trial(&ctx.cfg, rx.qam(), rx.psk(), &mut streams)?;
    let with_theory = ctx.cfg.sync_error == 0;
    let mut primary_cache: [Option<(f64, f64)>; 2] = [None, None];
    let mut m2_estimated: Option<DetectionOutput> = None;
    let m2_opts = Algorithm1Options {
        method: EstimatorKind::Method2,
        csi: CsiMode::Estimated,
        genie: false,
    };

    let mut result = Vec::with_capacity(curves.len());
    for &key in curves {
        let out = match key.receiver {
            ReceiverKind::MlPerfect => {
                rx.run_ml_benchmark(&obs, &obs.realization.cfr_direct, &obs.true_backscatter_cfr(), true)
            }
            ReceiverKind::MlNoPilots => {
                rx.run_ml_benchmark(&obs, &obs.realization.cfr_direct, &obs.true_backscatter_cfr(), false)
            }
            ReceiverKind::MlEstimated => {
                if m2_estimated.is_none() {
                    m2_estimated = Some(rx.run_algorithm1(&obs, m2_opts)?);
                }
                let est = m2_estimated.as_ref().expect("just filled");
                rx.run_ml_benchmark(&obs, &est.h_hat_d, &est.h_hat_b, true)
            }
            r => {
                let opts = r.algorithm1(key.csi).expect("algorithm 1 receiver");
                let out = rx.run_algorithm1(&obs, opts)?;
                if opts == m2_opts {
                    m2_estimated = Some(out.clone());
                }
                out
            }
        };
        let mut counts = tally(&obs, &out, rx);
        if with_theory {
            if key.receiver.algorithm1(key.csi).is_some() {
                let slot = &mut primary_cache[key.csi as usize];
                let (ber, ser) = *slot.get_or_insert_with(|| ctx.primary_theory(&obs, key.csi));
                counts.theory_primary_ber = ber;
                counts.theory_primary_ser = ser;
                counts.theory_primary_trials = 1;
            }
            if let Some(v) = ctx.secondary_theory(&obs, key) {
                counts.theory_secondary_ber = v;
                counts.theory_secondary_trials = 1;
            }
        }
        result.push(counts);
    }
    Ok(result)
}

fn add_all(acc: &mut [Counts], add: &[Counts]) {
    for (a, b) in acc.iter_mut().zip(add) {
        *a += *b;
    }
}

/// Sums `trials` trials of one point. Deterministic for any worker count.
pub fn run_point(ctx: &PointContext, curves: &[CurveKey], trials: u64, master_seed: u64) -> Result<Vec<Counts>> {
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Vec<Counts>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Counts::default(); curves.len()];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                add_all(&mut acc, &run_trial(ctx, curves, t, master_seed)?);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![Counts::default(); curves.len()];
    for p in &partial {
        add_all(&mut total, p);
    }
    Ok(total)
}

/// One point of a simulated curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub x: f64,
    pub counts: Counts,
}

fn rate(errors: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        errors as f64 / total as f64
    }
}

/// 95% normal-approximation half width `1.96 √(p(1 − p)/n)`.
pub fn ci_half_width(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.96 * (p * (1.0 - p) / n as f64).sqrt()
    }
}

impl BerPoint {
    pub fn ber_primary(&self) -> f64 {
        rate(self.counts.primary_bit_errors, self.counts.primary_bits)
    }

    pub fn ci_primary(&self) -> f64 {
        ci_half_width(self.ber_primary(), self.counts.primary_bits)
    }

    pub fn ser_primary(&self) -> f64 {
        rate(self.counts.primary_symbol_errors, self.counts.primary_symbols)
    }

    pub fn ci_ser_primary(&self) -> f64 {
        ci_half_width(self.ser_primary(), self.counts.primary_symbols)
    }

    pub fn ber_secondary(&self) -> f64 {
        rate(self.counts.secondary_bit_errors, self.counts.secondary_bits)
    }

    pub fn ci_secondary(&self) -> f64 {
        ci_half_width(self.ber_secondary(), self.counts.secondary_bits)
    }

    pub fn theory_primary(&self) -> Option<f64> {
        let c = &self.counts;
        (c.theory_primary_trials > 0).then(|| c.theory_primary_ber / c.theory_primary_trials as f64)
    }

    pub fn theory_primary_ser(&self) -> Option<f64> {
        let c = &self.counts;
        (c.theory_primary_trials > 0).then(|| c.theory_primary_ser / c.theory_primary_trials as f64)
    }

    pub fn theory_secondary(&self) -> Option<f64> {
        let c = &self.counts;
        (c.theory_secondary_trials > 0).then(|| c.theory_secondary_ber / c.theory_secondary_trials as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub key: CurveKey,
    pub axis: Axis,
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ber_primary(&self) -> Vec<f64> {
        self.points.iter().map(BerPoint::ber_primary).collect()
    }

    pub fn ber_secondary(&self) -> Vec<f64> {
        self.points.iter().map(BerPoint::ber_secondary).collect()
    }

    pub const CSV_HEADER: &'static str =
        "point,receiver,csi,ber_primary,ci_primary,ber_secondary,ci_secondary,ber_primary_theory,ber_secondary_theory";

    pub fn to_csv(&self) -> String {
        let f = |v: f64| format!("{v:.8e}");
        let o = |v: Option<f64>| v.map(f).unwrap_or_default();
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                f(p.x),
                self.key.receiver.name(),
                csi_name(self.key.csi),
                f(p.ber_primary()),
                f(p.ci_primary()),
                f(p.ber_secondary()),
                f(p.ci_secondary()),
                o(p.theory_primary()),
                o(p.theory_secondary()),
            );
        }
        s
    }
}

/// Runs a full sweep on the calling thread's rayon pool.
pub fn run_sweep(spec: &SweepSpec, base: &SystemConfig, master_seed: u64) -> Result<Vec<BerCurve>> {
    spec.validate()?;
    let curves = spec.curves();
    let mut out: Vec<BerCurve> = curves
        .iter()
        .map(|&key| BerCurve {
            key,
            axis: spec.axis,
            points: Vec::with_capacity(spec.points.len()),
        })
        .collect();
    for &x in &spec.points {
        let cfg = apply_point(base, spec.axis, x)?;
        let ctx = PointContext::new(&cfg)?;
        let counts = run_point(&ctx, &curves, spec.trials_per_point, master_seed)?;
        for (curve, c) in out.iter_mut().zip(counts) {
            curve.points.push(BerPoint { x, counts: c });
        }
    }
    Ok(out)
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// SNR (dB) at which a decreasing curve crosses `target`, interpolating
/// `log10(ber)` linearly in dB between the bracketing points.
pub fn snr_at_ber(snr_db: &[f64], ber: &[f64], target: f64) -> Option<f64> {
    for i in 1..snr_db.len().min(ber.len()) {
        let (b0, b1) = (ber[i - 1], ber[i]);
        if b0 >= target && b1 <= target && b0 > 0.0 && b1 > 0.0 && b0 != b1 {
            let (l0, l1, lt) = (b0.log10(), b1.log10(), target.log10());
            return Some(snr_db[i - 1] + (lt - l0) / (l1 - l0) * (snr_db[i] - snr_db[i - 1]));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_spec(axis: Axis, points: &str) -> SweepSpec {
        SweepSpec {
            axis,
            points: parse_points(points).unwrap(),
            trials_per_point: 200,
            receivers: vec![ReceiverKind::ProposedM2, ReceiverKind::MlPerfect],
            csi_modes: vec![CsiMode::Estimated],
        }
    }

    #[test]
    fn point_ranges() {
        assert_eq!(parse_points("12:30:3").unwrap().len(), 7);
        assert_eq!(parse_points("0:20:1").unwrap().len(), 21);
        assert_eq!(parse_points("0:1:0.1").unwrap().len(), 11);
        assert_eq!(parse_points("1,2.5,4").unwrap(), vec![1.0, 2.5, 4.0]);
        assert!(parse_points("3:1:1").is_err());
        assert!(parse_points("1:2").is_err());
        assert!(parse_points("a,b").is_err());
    }

    #[test]
    fn spec_validation_and_curves() {
        let mut s = SweepSpec::default();
        s.validate().unwrap();
        s.receivers = vec![
            ReceiverKind::MlEstimated,
            ReceiverKind::PilotOnly,
            ReceiverKind::ProposedM1,
        ];
        s.csi_modes = vec![CsiMode::Perfect, CsiMode::Estimated];
        let names: Vec<String> = s.curves().iter().map(CurveKey::file_stem).collect();
        assert_eq!(
            names,
            [
                "proposed_m1_perfect",
                "proposed_m1_estimated",
                "pilot_only_perfect",
                "pilot_only_estimated",
                "ml_estimated_estimated"
            ]
        );
        s.trials_per_point = 0;
        assert!(s.validate().is_err());
        s.trials_per_point = 1000;
        s.points = vec![1.0, 1.0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn axis_application() {
        let base = SystemConfig::default();
        let c = apply_point(&base, Axis::DirectSnrDb, 25.0).unwrap();
        assert!((c.direct_snr_db() - 25.0).abs() < 1e-9);
        let c = apply_point(&base, Axis::BackscatterSnrDb, 5.0).unwrap();
        assert!((c.backscatter_snr_db() - 5.0).abs() < 1e-9);
        let c = apply_point(&base, Axis::SnrRatioDb, -10.0).unwrap();
        assert!((10.0 * c.channel.snr_ratio().log10() + 10.0).abs() < 1e-9);
        let c = apply_point(&base, Axis::StxDistanceM, 50.0).unwrap();
        assert_eq!(c.channel.dist_bwd, 150.0);
        assert_eq!(apply_point(&base, Axis::SyncErrorSamples, 7.0).unwrap().sync_error, 7);
        assert!(apply_point(&base, Axis::SyncErrorSamples, 1.5).is_err());
        assert!(apply_point(&base, Axis::SyncErrorSamples, 200.0).is_err());
        assert!(apply_point(&base, Axis::StxDistanceM, 300.0).is_err());
    }

    #[test]
    fn noise_free_trials_have_no_errors() {
        let mut cfg = SystemConfig::default();
        cfg.set_direct_snr_db(150.0);
        let ctx = PointContext::new(&cfg).unwrap();
        let curves = SweepSpec {
            receivers: ReceiverKind::ALL.to_vec(),
            csi_modes: vec![CsiMode::Perfect, CsiMode::Estimated],
            ..SweepSpec::default()
        }
        .curves();
        let counts = run_point(&ctx, &curves, 100, 3).unwrap();
        for (k, c) in curves.iter().zip(&counts) {
            // only the pilot-free ML can be fooled, by its sign ambiguity
            if k.receiver == ReceiverKind::MlNoPilots {
                continue;
            }
            assert_eq!(c.primary_bit_errors, 0, "{k:?}");
            assert_eq!(c.secondary_bit_errors, 0, "{k:?}");
            assert_eq!(c.secondary_bits, 100 * 8 * 3);
            assert_eq!(c.primary_bits, 100 * 10 * 56 * 4);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut cfg = SystemConfig::default();
        cfg.set_direct_snr_db(20.0);
        let spec = small_spec(Axis::DirectSnrDb, "15:25:10");
        let a = with_workers(1, || run_sweep(&spec, &cfg, 9)).unwrap().unwrap();
        let b = with_workers(3, || run_sweep(&spec, &cfg, 9)).unwrap().unwrap();
        assert_eq!(a, b);
        let csv_a: Vec<String> = a.iter().map(BerCurve::to_csv).collect();
        let csv_b: Vec<String> = b.iter().map(BerCurve::to_csv).collect();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn csv_layout() {
        let cfg = SystemConfig::default();
        let spec = small_spec(Axis::DirectSnrDb, "20");
        let curves = run_sweep(&spec, &cfg, 1).unwrap();
        let ml = curves
            .iter()
            .find(|c| c.key.receiver == ReceiverKind::MlPerfect)
            .unwrap();
        let text = ml.to_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], BerCurve::CSV_HEADER);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[0], "2.00000000e1");
        assert_eq!(fields[1], "ml_perfect");
        assert_eq!(fields[7], "");
        assert_eq!(fields[8], "");
        let m2 = curves
            .iter()
            .find(|c| c.key.receiver == ReceiverKind::ProposedM2)
            .unwrap();
        let row = m2.to_csv();
        let fields: Vec<&str> = row.lines().nth(1).unwrap().split(',').collect();
        assert!(!fields[7].is_empty() && !fields[8].is_empty());
    }

    #[test]
    fn ber_crossing_interpolation() {
        let snr = [0.0, 10.0, 20.0];
        let ber = [1e-1, 1e-2, 1e-4];
        assert!((snr_at_ber(&snr, &ber, 1e-2).unwrap() - 10.0).abs() < 1e-12);
        assert!((snr_at_ber(&snr, &ber, 1e-3).unwrap() - 15.0).abs() < 1e-12);
        assert!(snr_at_ber(&snr, &ber, 1e-6).is_none());
    }

    proptest! {
        #[test]
        fn ci_is_consistent(errors in 0u64..1000, extra in 1u64..100_000) {
            let bits = errors + extra;
            let p = BerPoint { x: 0.0, counts: Counts { primary_bit_errors: errors, primary_bits: bits, ..Default::default() } };
            prop_assert_eq!(p.ber_primary(), errors as f64 / bits as f64);
            let hw = 1.96 * (p.ber_primary() * (1.0 - p.ber_primary()) / bits as f64).sqrt();
            prop_assert_eq!(p.ci_primary(), hw);
        }

        #[test]
        fn trials_are_reproducible(seed in any::<u64>(), trial in 0u64..10_000) {
            let mut cfg = SystemConfig::default();
            cfg.set_direct_snr_db(18.0);
            let ctx = PointContext::new(&cfg).unwrap();
            let curves = small_spec(Axis::DirectSnrDb, "18").curves();
            prop_assert_eq!(run_trial(&ctx, &curves, trial, seed).unwrap(), run_trial(&ctx, &curves, trial, seed).unwrap());
        }
    }
}
