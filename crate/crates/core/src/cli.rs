//! Command-line front end: `sweep`, `theory` and `single`.
//!
//! Every command writes plain files (CSV plus a JSON manifest) so results
//! can be plotted elsewhere. A manifest holds the fully resolved scenario,
//! and `--from-manifest` re-runs it exactly.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::channel::{draw_channel, BackscatterModel};
use crate::error::{Error, Result};
use crate::harness::{apply_point, parse_csi, parse_points, run_sweep, with_workers, Axis, ReceiverKind};
use crate::numerics::CVector;
use crate::receiver::{Algorithm1Options, CsiMode, EstimatorKind, Receiver};
use crate::scenario::Scenario;
use crate::theory::{self, AvgSnrParams, ConstellationMoments, PrimaryTheory};
use crate::txchain::{observe_trial, SystemConfig, TrialStreams};

/// Channel draws averaged by the `theory` command.
pub const THEORY_DRAWS: u64 = 500;

/// Backscatter tap counts of the diversity curves.
pub const DIVERSITY_TAPS: [usize; 3] = [1, 2, 4];

#[derive(Debug, Parser)]
#[command(
    name = "sr-ofdm",
    version,
    about = "Symbiotic radio over OFDM: BER sweeps and analytic curves"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo BER sweep; one CSV per receiver curve plus a manifest.
    Sweep(SweepArgs),
    /// Closed-form curves on the sweep grid, no simulation.
    Theory(TheoryArgs),
    /// Dump a single trial in detail.
    Single(SingleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario file; the bundled default when omitted.
    #[arg(long, conflicts_with = "from_manifest")]
    pub scenario: Option<PathBuf>,
    /// Re-run the scenario recorded in a manifest.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[arg(long)]
    pub axis: Option<String>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub points: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, env = "SR_OFDM_SEED")]
    pub seed: Option<u64>,
    /// Comma-separated receiver names.
    #[arg(long)]
    pub receivers: Option<String>,
    /// Comma-separated CSI modes (`perfect`, `estimated`).
    #[arg(long)]
    pub csi: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; all available cores when omitted.
    #[arg(long, env = "SR_OFDM_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Trial index.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    /// Sweep point to apply; the first grid point when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<f64>,
}

/// Structured record written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub scenario: Scenario,
    pub moments: ConstellationMoments,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Parse { .. } | Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Resolves the scenario and applies command-line overrides.
pub fn resolve(args: &ScenarioArgs) -> Result<Scenario> {
    let mut sc = match (&args.scenario, &args.from_manifest) {
        (Some(p), _) => Scenario::load(p).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("{}: {io}", p.display())),
            other => other,
        })?,
        (None, Some(p)) => {
            Manifest::load(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                .scenario
        }
        (None, None) => Scenario::paper_default(),
    };
    if let Some(a) = &args.axis {
        sc.sweep.axis = Axis::parse(a)?;
    }
    if let Some(p) = &args.points {
        sc.sweep.points = parse_points(p)?;
    }
    if let Some(t) = args.trials {
        sc.sweep.trials_per_point = t;
    }
    if let Some(s) = args.seed {
        sc.seed = s;
    }
    if let Some(r) = &args.receivers {
        sc.sweep.receivers = r
            .split(',')
            .map(|t| ReceiverKind::parse(t.trim()))
            .collect::<Result<_>>()?;
    }
    if let Some(c) = &args.csi {
        sc.sweep.csi_modes = c.split(',').map(|t| parse_csi(t.trim())).collect::<Result<_>>()?;
    }
    sc.system.validate().map_err(config_err)?;
    sc.sweep.validate()?;
    for &x in &sc.sweep.points {
        apply_point(&sc.system, sc.sweep.axis, x).map_err(config_err)?;
    }
    Ok(sc)
}

fn write_manifest(dir: &Path, command: &str, sc: &Scenario, files: Vec<String>) -> Result<()> {
    let m = Manifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: sc.clone(),
        moments: theory::qam_moments(sc.system.m_s)?,
        files,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, log: &mut dyn Write) -> Result<()> {
    let sc = resolve(&args.scenario)?;
    std::fs::create_dir_all(&args.out)?;
    let run = || run_sweep(&sc.sweep, &sc.system, sc.seed);
    let curves = match args.workers {
        Some(w) => with_workers(w, run)??,
        None => run()?,
    };
    let mut files = Vec::new();
    for c in &curves {
        let name = format!("{}.csv", c.key.file_stem());
        std::fs::write(args.out.join(&name), c.to_csv())?;
        let _ = writeln!(log, "wrote {}", args.out.join(&name).display());
        files.push(name);
    }
    write_manifest(&args.out, "sweep", &sc, files)
}

/// Header of the `theory` CSV.
pub fn theory_header() -> String {
    let mut h = String::from(
        "point,ber_primary_perfect,ber_primary_estimated,ser_primary_perfect,ser_primary_estimated,\
         ber_secondary_perfect,ber_secondary_method1,ber_secondary_method2",
    );
    for l in DIVERSITY_TAPS {
        let _ = write!(h, ",ber_rayleigh_l{l},ber_rayleigh_l{l}_asymptote");
    }
    h
}

/// One row of closed-form values at one configuration, averaged over
/// `draws` channel realizations. `None` where no closed form applies.
pub fn theory_row(cfg: &SystemConfig, draws: u64, seed: u64) -> Result<Vec<Option<f64>>> {
    let width = 7 + 2 * DIVERSITY_TAPS.len();
    if cfg.sync_error > 0 {
        return Ok(vec![None; width]);
    }
    let moments = theory::qam_moments(cfg.m_s)?;
    let primary = PrimaryTheory::new(cfg)?;
    let l = cfg.cir_taps().min(cfg.n_p());
    let (p, s2) = (cfg.p_t, cfg.sigma2);
    let mut acc = [0.0; 7];
    for i in 0..draws {
        let mut stream = TrialStreams::new(seed, i).channel;
        let mut real = draw_channel(&cfg.channel, cfg.n, &mut stream);
        if !cfg.channel.direct_link {
            real = real.without_direct();
        }
        let pf = primary.rates_over_alphabet(&real.cfr_direct, &real.cfr_backscatter, p, s2, false);
        let pe = primary.rates_over_alphabet(&real.cfr_direct, &real.cfr_backscatter, p, s2, true);
        let hb2 = real.cfr_backscatter.norm_squared();
        let row = [
            pf.ber,
            pe.ber,
            pf.ser,
            pe.ser,
            theory::psk_ber(cfg.m_c, theory::snr_secondary_perfect(hb2, p, s2, moments)),
            theory::psk_ber(cfg.m_c, theory::snr_secondary_method1(hb2, p, s2, cfg.n, moments)),
            theory::psk_ber(cfg.m_c, theory::snr_secondary_method2(hb2, p, s2, l)),
        ];
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let mut out: Vec<Option<f64>> = acc.iter().map(|a| Some(a / draws as f64)).collect();
    let absent = cfg.channel.backscatter == BackscatterModel::Absent;
    if absent {
        out[4..7].iter_mut().for_each(|v| *v = None);
    }
    for l_b in DIVERSITY_TAPS {
        if absent {
            out.extend([None, None]);
            continue;
        }
        let gamma_b = diversity_tap_snr(cfg, l_b, moments);
        let (exact, approx) = theory::avg_ber_secondary(AvgSnrParams { gamma_b, l_b });
        out.extend([Some(exact), Some(approx)]);
    }
    Ok(out)
}

/// Average per-tap secondary SNR when the backscatter power `β_1 β_2` is
/// split evenly over `l_b` Rayleigh taps: `P N β_b / (l_b Γ₁ σ²)`.
pub fn diversity_tap_snr(cfg: &SystemConfig, l_b: usize, moments: ConstellationMoments) -> f64 {
    cfg.p_t * cfg.n as f64 * cfg.channel.beta_backscatter() / (l_b as f64 * moments.gamma1 * cfg.sigma2)
}

pub fn cmd_theory(args: &TheoryArgs, log: &mut dyn Write) -> Result<()> {
    let sc = resolve(&args.scenario)?;
    std::fs::create_dir_all(&args.out)?;
    let mut csv = theory_header();
    csv.push('\n');
    for &x in &sc.sweep.points {
        let cfg = apply_point(&sc.system, sc.sweep.axis, x)?;
        let row = theory_row(&cfg, THEORY_DRAWS, sc.seed)?;
        let _ = write!(csv, "{x:.8e}");
        for v in row {
            let _ = write!(csv, ",{}", v.map(|v| format!("{v:.8e}")).unwrap_or_default());
        }
        csv.push('\n');
    }
    std::fs::write(args.out.join("theory.csv"), csv)?;
    let _ = writeln!(log, "wrote {}", args.out.join("theory.csv").display());
    write_manifest(&args.out, "theory", &sc, vec!["theory.csv".into()])
}

fn fmt_cvec(v: &CVector) -> String {
    let parts: Vec<String> = v.iter().map(|z| format!("{:+.4e}{:+.4e}j", z.re, z.im)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn cmd_single(args: &SingleArgs, out: &mut dyn Write) -> Result<()> {
    let sc = resolve(&args.scenario)?;
    let x = args.point.unwrap_or(sc.sweep.points[0]);
    let cfg = apply_point(&sc.system, sc.sweep.axis, x)?;
    let rx = Receiver::new(&cfg)?;
    let mut streams = TrialStreams::new(sc.seed, args.trial);
    let obs = observe_trial(&cfg, rx.qam(), rx.psk(), &mut streams)?;
    let real = &obs.realization;

    writeln!(
        out,
        "seed {} trial {} {} = {x}",
        sc.seed,
        args.trial,
        sc.sweep.axis.name()
    )?;
    writeln!(
        out,
        "P_T = {:.4e} W, sigma2 = {:.4e} W, direct SNR {:.2} dB, backscatter SNR {:.2} dB",
        cfg.p_t,
        cfg.sigma2,
        cfg.direct_snr_db(),
        cfg.backscatter_snr_db()
    )?;
    writeln!(
        out,
        "estimator taps {} (pilot fallback: {})",
        rx.taps(),
        rx.pilot_fallback()
    )?;
    writeln!(out, "h_d = {}", fmt_cvec(&CVector::from_column_slice(&real.h_d)))?;
    writeln!(out, "h_b = {}", fmt_cvec(&CVector::from_column_slice(&real.h_b)))?;
    writeln!(
        out,
        "|H_d|^2 = {:.4e}, |H_b|^2 = {:.4e}",
        real.cfr_direct.norm_squared(),
        real.cfr_backscatter.norm_squared()
    )?;
    let c_labels: Vec<String> = obs.frame.c_labels.iter().map(usize::to_string).collect();
    writeln!(out, "secondary labels  {}", c_labels.join(" "))?;

    for key in sc.sweep.curves() {
        let algorithm1 = |method, csi, genie| rx.run_algorithm1(&obs, Algorithm1Options { method, csi, genie });
        let det = match key.receiver {
            ReceiverKind::ProposedM1 => algorithm1(EstimatorKind::Method1, key.csi, false)?,
            ReceiverKind::ProposedM2 => algorithm1(EstimatorKind::Method2, key.csi, false)?,
            ReceiverKind::PilotOnly => algorithm1(EstimatorKind::PilotOnly, key.csi, false)?,
            ReceiverKind::GenieM1 => algorithm1(EstimatorKind::Method1, key.csi, true)?,
            ReceiverKind::GenieM2 => algorithm1(EstimatorKind::Method2, key.csi, true)?,
            ReceiverKind::MlPerfect => rx.run_ml_benchmark(&obs, &real.cfr_direct, &obs.true_backscatter_cfr(), true),
            ReceiverKind::MlNoPilots => rx.run_ml_benchmark(&obs, &real.cfr_direct, &obs.true_backscatter_cfr(), false),
            ReceiverKind::MlEstimated => {
                let est = algorithm1(EstimatorKind::Method2, CsiMode::Estimated, false)?;
                rx.run_ml_benchmark(&obs, &est.h_hat_d, &est.h_hat_b, true)
            }
        };
        report(out, &key.file_stem(), &obs, &det)?;
    }
    Ok(())
}

fn report(
    out: &mut dyn Write,
    name: &str,
    obs: &crate::txchain::FrameObservation,
    det: &crate::receiver::DetectionOutput,
) -> Result<()> {
    let primary: u32 = obs
        .frame
        .data_labels
        .iter()
        .zip(&det.s_hat)
        .flat_map(|(a, b)| a.iter().zip(b))
        .map(|(&a, &b)| crate::constellation::bit_errors(a, b))
        .sum();
    let secondary: u32 = obs
        .frame
        .c_labels
        .iter()
        .zip(&det.c_hat)
        .map(|(&a, &b)| crate::constellation::bit_errors(a, b))
        .sum();
    let c_hat: Vec<String> = det.c_hat.iter().map(usize::to_string).collect();
    writeln!(
        out,
        "{name:<24} primary bit errors {primary:>4}  secondary bit errors {secondary:>3}  erasures {}  detected {}",
        det.erasures,
        c_hat.join(" ")
    )?;
    Ok(())
}

/// Exit status for an error: 1 for bad input, 2 for failures at run time.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Config(_) | Error::OutOfRange { .. } => 1,
        _ => 2,
    }
}

/// Parses `argv` and runs the command. Returns the process exit status.
pub fn main_with_args<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    let result = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a, err),
        Command::Theory(a) => cmd_theory(a, err),
        Command::Single(a) => cmd_single(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Names of the curves a sweep over `sc` will write.
pub fn curve_files(sc: &Scenario) -> Vec<String> {
    sc.sweep
        .curves()
        .iter()
        .map(|k| format!("{}.csv", k.file_stem()))
        .collect()
}
