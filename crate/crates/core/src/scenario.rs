//! Flat `key = value` scenario files.
//!
//! ```text
//! # comment
//! m_s = 16
//! backscatter = rayleigh:4
//! preamble = 1, -1
//! axis = direct_snr_db
//! points = 12:30:3
//! ```
//!
//! Unknown or repeated keys are rejected with the offending line number.
//! Powers given in dBm are converted once, here.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::BackscatterModel;
use crate::error::{Error, Result};
use crate::harness::{parse_csi, parse_points, Axis, ReceiverKind, SweepSpec};
use crate::numerics::{Complex64, ONE};
use crate::txchain::{comb_pilots, dbm_to_watt, SystemConfig};

/// The bundled default scenario.
pub const PAPER_DEFAULT: &str = include_str!("../scenarios/paper_default.scn");

/// Default master seed.
pub const DEFAULT_SEED: u64 = 1;

/// A fully resolved scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemConfig,
    pub sweep: SweepSpec,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            sweep: SweepSpec::default(),
            seed: DEFAULT_SEED,
        }
    }
}

const KEYS: &[&str] = &[
    "n",
    "n_cp",
    "n_p",
    "m_s",
    "m_c",
    "preamble",
    "n_max",
    "p_t_dbm",
    "sigma2_dbm",
    "direct_snr_db",
    "backscatter_snr_db",
    "l_d",
    "l_1",
    "l_2",
    "backscatter",
    "d_b",
    "dist_direct",
    "dist_fwd",
    "dist_bwd",
    "exp_direct",
    "exp_fwd",
    "exp_bwd",
    "pathloss_ref",
    "collinear",
    "direct_link",
    "sync_error",
    "prior_c",
    "axis",
    "points",
    "trials",
    "receivers",
    "csi",
    "seed",
];

/// Names of all accepted keys.
pub fn keys() -> &'static [&'static str] {
    KEYS
}

/// Parses `1`, `-j`, `0.6-0.8j`, `2.5e-1+1e0i` and similar.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return None;
    }
    let Some(body) = t.strip_suffix(['j', 'i']) else {
        return t.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    // split at the last sign that is not leading and not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |x: &str| -> Option<f64> {
        match x {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => x.parse().ok(),
        }
    };
    match split {
        Some(k) => Some(Complex64::new(body[..k].parse().ok()?, imag(&body[k..])?)),
        None => Some(Complex64::new(0.0, imag(body)?)),
    }
}

fn format_complex(c: Complex64) -> String {
    let (re, im) = (c.re, c.im);
    if im == 0.0 {
        format!("{re}")
    } else if re == 0.0 {
        format!("{im}j")
    } else if im < 0.0 {
        format!("{re}{im}j")
    } else {
        format!("{re}+{im}j")
    }
}

fn parse_backscatter(v: &str) -> Option<BackscatterModel> {
    match v {
        "cascaded" => Some(BackscatterModel::Cascaded),
        "awgn" => Some(BackscatterModel::Awgn),
        "absent" => Some(BackscatterModel::Absent),
        _ => {
            let taps = v.strip_prefix("rayleigh:")?.parse().ok()?;
            Some(BackscatterModel::Rayleigh { taps })
        }
    }
}

fn format_backscatter(b: BackscatterModel) -> String {
    match b {
        BackscatterModel::Cascaded => "cascaded".into(),
        BackscatterModel::Awgn => "awgn".into(),
        BackscatterModel::Absent => "absent".into(),
        BackscatterModel::Rayleigh { taps } => format!("rayleigh:{taps}"),
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|t| !t.is_empty())
}

/// Key/value pairs with their line numbers, after comment stripping and
/// duplicate detection.
fn tokenize(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(Error::Parse {
                line,
                msg: format!("expected 'key = value', got '{content}'"),
            });
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key '{k}'"),
            });
        }
        if let Some((first, ..)) = out.iter().find(|(_, key, _)| *key == k) {
            return Err(Error::Parse {
                line,
                msg: format!("key '{k}' already set on line {first}"),
            });
        }
        out.push((line, k, v));
    }
    Ok(out)
}

impl Scenario {
    pub fn paper_default() -> Self {
        Self::parse(PAPER_DEFAULT).expect("bundled scenario parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses and validates a scenario. Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sc = Scenario::default();
        let sys = &mut sc.system;
        let mut p_t_dbm = None;
        let mut direct_snr = None;
        let mut backscatter_snr = None;
        let mut n_p = None;
        let mut dist_bwd = None;
        let mut last_line = 0;

        for (line, key, v) in tokenize(text)? {
            last_line = line;
            let bad = || Error::Parse {
                line,
                msg: format!("invalid value '{v}' for '{key}'"),
            };
            let uint = || v.parse::<usize>().map_err(|_| bad());
            let real = || v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
            match key.as_str() {
                "n" => sys.n = uint()?,
                "n_cp" => sys.n_cp = uint()?,
                "n_p" => n_p = Some((line, uint()?)),
                "m_s" => sys.m_s = uint()?,
                "m_c" => sys.m_c = uint()?,
                "preamble" => {
                    sys.preamble = list(&v).map(parse_complex).collect::<Option<_>>().ok_or_else(bad)?;
                }
                "n_max" => sys.n_max = uint()?,
                "p_t_dbm" => p_t_dbm = Some(real()?),
                "sigma2_dbm" => sys.sigma2 = dbm_to_watt(real()?),
                "direct_snr_db" => direct_snr = Some(real()?),
                "backscatter_snr_db" => backscatter_snr = Some(real()?),
                "l_d" => sys.channel.l_d = uint()?,
                "l_1" => sys.channel.l_1 = uint()?,
                "l_2" => sys.channel.l_2 = uint()?,
                "backscatter" => sys.channel.backscatter = parse_backscatter(&v).ok_or_else(bad)?,
                "d_b" => sys.channel.d_b = uint()?,
                "dist_direct" => sys.channel.dist_direct = real()?,
                "dist_fwd" => sys.channel.dist_fwd = real()?,
                "dist_bwd" => dist_bwd = Some(real()?),
                "exp_direct" => sys.channel.exp_direct = real()?,
                "exp_fwd" => sys.channel.exp_fwd = real()?,
                "exp_bwd" => sys.channel.exp_bwd = real()?,
                "pathloss_ref" => sys.channel.pathloss_ref = real()?,
                "collinear" => sys.channel.collinear = parse_bool(&v).ok_or_else(bad)?,
                "direct_link" => sys.channel.direct_link = parse_bool(&v).ok_or_else(bad)?,
                "sync_error" => sys.sync_error = uint()?,
                "prior_c" => sys.prior_c = parse_complex(&v).ok_or_else(bad)?,
                "axis" => sc.sweep.axis = Axis::parse(&v).map_err(|_| bad())?,
                "points" => sc.sweep.points = parse_points(&v).map_err(|_| bad())?,
                "trials" => sc.sweep.trials_per_point = v.parse().map_err(|_| bad())?,
                "receivers" => {
                    sc.sweep.receivers = list(&v)
                        .map(ReceiverKind::parse)
                        .collect::<Result<_>>()
                        .map_err(|_| bad())?;
                }
                "csi" => sc.sweep.csi_modes = list(&v).map(parse_csi).collect::<Result<_>>().map_err(|_| bad())?,
                "seed" => sc.seed = v.parse().map_err(|_| bad())?,
                _ => unreachable!("key list and match arms agree"),
            }
        }

        let at_end = |msg: String| Error::Parse {
            line: last_line.max(1),
            msg,
        };
        if let Some((line, n_p)) = n_p {
            sys.pilot_indices = comb_pilots(sys.n, n_p).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            sys.pilot_values = vec![ONE; n_p];
        } else if sys.pilot_indices.last().is_some_and(|&k| k >= sys.n) {
            let n_p = sys.pilot_indices.len();
            sys.pilot_indices = comb_pilots(sys.n, n_p).map_err(|e| at_end(e.to_string()))?;
        }
        match (sys.channel.collinear, dist_bwd) {
            (true, Some(_)) => return Err(at_end("dist_bwd is derived when collinear = true".into())),
            (true, None) => sys.channel.dist_bwd = sys.channel.dist_direct - sys.channel.dist_fwd,
            (false, Some(d)) => sys.channel.dist_bwd = d,
            (false, None) => {}
        }
        if let Some(dbm) = p_t_dbm {
            sys.p_t = dbm_to_watt(dbm);
        }
        match (direct_snr, backscatter_snr, p_t_dbm) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
                return Err(at_end(
                    "set at most one of p_t_dbm, direct_snr_db, backscatter_snr_db".into(),
                ));
            }
            (Some(db), None, None) => sys.set_direct_snr_db(db),
            (None, Some(db), None) => sys.set_backscatter_snr_db(db),
            _ => {}
        }
        sys.validate().map_err(|e| at_end(e.to_string()))?;
        sc.sweep.validate().map_err(|e| at_end(e.to_string()))?;
        Ok(sc)
    }

    /// Writes the scenario back in the flat format. Parsing the result
    /// gives the same scenario up to floating-point rounding of `P_T`.
    pub fn to_text(&self) -> String {
        let s = &self.system;
        let c = &s.channel;
        let join = |v: Vec<String>| v.join(", ");
        let mut lines = vec![
            format!("n = {}", s.n),
            format!("n_cp = {}", s.n_cp),
            format!("n_p = {}", s.n_p()),
            format!("m_s = {}", s.m_s),
            format!("m_c = {}", s.m_c),
            format!(
                "preamble = {}",
                join(s.preamble.iter().map(|&p| format_complex(p)).collect())
            ),
            format!("n_max = {}", s.n_max),
            format!("p_t_dbm = {}", 10.0 * (s.p_t * 1e3).log10()),
            format!("sigma2_dbm = {}", 10.0 * (s.sigma2 * 1e3).log10()),
            format!("l_d = {}", c.l_d),
            format!("l_1 = {}", c.l_1),
            format!("l_2 = {}", c.l_2),
            format!("backscatter = {}", format_backscatter(c.backscatter)),
            format!("d_b = {}", c.d_b),
            format!("dist_direct = {}", c.dist_direct),
            format!("dist_fwd = {}", c.dist_fwd),
        ];
        if !c.collinear {
            lines.push(format!("dist_bwd = {}", c.dist_bwd));
        }
        lines.extend([
            format!("exp_direct = {}", c.exp_direct),
            format!("exp_fwd = {}", c.exp_fwd),
            format!("exp_bwd = {}", c.exp_bwd),
            format!("pathloss_ref = {}", c.pathloss_ref),
            format!("collinear = {}", c.collinear),
            format!("direct_link = {}", c.direct_link),
            format!("sync_error = {}", s.sync_error),
            format!("prior_c = {}", format_complex(s.prior_c)),
            format!("axis = {}", self.sweep.axis.name()),
            format!(
                "points = {}",
                join(self.sweep.points.iter().map(|p| p.to_string()).collect())
            ),
            format!("trials = {}", self.sweep.trials_per_point),
            format!(
                "receivers = {}",
                join(self.sweep.receivers.iter().map(|r| r.name().to_string()).collect())
            ),
            format!(
                "csi = {}",
                join(
                    self.sweep
                        .csi_modes
                        .iter()
                        .map(|&m| crate::harness::csi_name(m).to_string())
                        .collect()
                )
            ),
            format!("seed = {}", self.seed),
        ]);
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receiver::CsiMode;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_tokens() {
        assert_eq!(parse_complex("1"), Some(c(1.0, 0.0)));
        assert_eq!(parse_complex("-1"), Some(c(-1.0, 0.0)));
        assert_eq!(parse_complex("j"), Some(c(0.0, 1.0)));
        assert_eq!(parse_complex("-j"), Some(c(0.0, -1.0)));
        assert_eq!(parse_complex("0.6-0.8j"), Some(c(0.6, -0.8)));
        assert_eq!(parse_complex("1e-1+2.5e0i"), Some(c(0.1, 2.5)));
        assert_eq!(parse_complex(" -0.5 + j "), Some(c(-0.5, 1.0)));
        assert_eq!(parse_complex("x"), None);
        assert_eq!(parse_complex(""), None);
    }

    #[test]
    fn bundled_default_matches_code_default() {
        let sc = Scenario::paper_default();
        let d = SystemConfig::default();
        assert_eq!(sc.system.pilot_indices, d.pilot_indices);
        assert_eq!(sc.system.channel, d.channel);
        assert_eq!(sc.system.preamble, d.preamble);
        assert_eq!((sc.system.m_s, sc.system.m_c, sc.system.n_max), (16, 8, 10));
        assert!((sc.system.sigma2 / d.sigma2 - 1.0).abs() < 1e-12);
        assert_eq!(sc.sweep.axis, Axis::DirectSnrDb);
        assert_eq!(sc.sweep.points.len(), 7);
    }

    #[test]
    fn overrides_and_derived_fields() {
        let sc = Scenario::parse(
            "m_s = 4\nm_c = 2\nn_p = 16\ndist_fwd = 50\nbackscatter = rayleigh:4\npreamble = 1, j, -1, -j\ndirect_snr_db = 20\ncsi = perfect, estimated\n",
        )
        .unwrap();
        assert_eq!(sc.system.n_p(), 16);
        assert_eq!(sc.system.pilot_indices[1], 4);
        assert_eq!(sc.system.channel.dist_bwd, 150.0);
        assert_eq!(sc.system.channel.backscatter, BackscatterModel::Rayleigh { taps: 4 });
        assert_eq!(sc.system.t(), 4);
        assert!((sc.system.direct_snr_db() - 20.0).abs() < 1e-9);
        assert_eq!(sc.sweep.csi_modes, vec![CsiMode::Perfect, CsiMode::Estimated]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match Scenario::parse(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(line_of("n = 64\n\n# c\nbogus = 3\n"), 4);
        assert_eq!(line_of("m_s = 16\nm_s = 4\n"), 2);
        assert_eq!(line_of("m_s = sixteen\n"), 1);
        assert_eq!(line_of("n = 64\nno equals sign\n"), 2);
        assert_eq!(line_of("m_s = 16\nm_c = 3\n"), 2);
        assert_eq!(line_of("n_p = 7\n"), 1);
        assert_eq!(line_of("dist_bwd = 10\n"), 1);
    }

    #[test]
    fn text_round_trip() {
        let sc = Scenario::parse("m_s = 4\ncollinear = false\ndist_bwd = 190\nprior_c = 0.6-0.8j\n").unwrap();
        let back = Scenario::parse(&sc.to_text()).unwrap();
        assert_eq!(back.system.channel, sc.system.channel);
        assert_eq!(back.system.prior_c, sc.system.prior_c);
        assert!((back.system.p_t / sc.system.p_t - 1.0).abs() < 1e-12);
        assert_eq!(back.sweep, sc.sweep);
    }

    proptest! {
        #[test]
        fn complex_format_parses_back(re in -4.0f64..4.0, im in -4.0f64..4.0) {
            let z = c(re, im);
            prop_assert_eq!(parse_complex(&format_complex(z)), Some(z));
        }
    }
}
