//! Secondary diversity over a frequency-selective backscatter link: with
//! `L_b` Rayleigh taps the BER falls about `L_b` decades per 10 dB.

use sr_ofdm::channel::BackscatterModel;
use sr_ofdm::cli::diversity_tap_snr;
use sr_ofdm::harness::{run_sweep, Axis, ReceiverKind, SweepSpec};
use sr_ofdm::receiver::CsiMode;
use sr_ofdm::theory::{avg_ber_secondary, diversity_slope, qam_moments, AvgSnrParams};
use sr_ofdm::txchain::SystemConfig;

fn main() -> sr_ofdm::Result<()> {
    for l_b in [1, 2, 4] {
        let mut cfg = SystemConfig {
            m_s: 4,
            m_c: 2,
            ..SystemConfig::default()
        };
        cfg.channel.backscatter = BackscatterModel::Rayleigh { taps: l_b };
        let points: Vec<f64> = match l_b {
            1 => vec![-4.0, 0.0, 4.0, 8.0],
            2 => vec![-8.0, -6.0, -4.0, -2.0],
            _ => vec![-12.0, -11.0, -10.0, -9.0],
        };
        let spec = SweepSpec {
            axis: Axis::BackscatterSnrDb,
            points: points.clone(),
            trials_per_point: 2000,
            receivers: vec![ReceiverKind::GenieM2],
            csi_modes: vec![CsiMode::Estimated],
        };
        let curve = &run_sweep(&spec, &cfg, 21)?[0];
        let sim = curve.ber_secondary();
        let moments = qam_moments(cfg.m_s)?;
        let closed: Vec<f64> = points
            .iter()
            .map(|&x| {
                let mut c = cfg.clone();
                c.set_backscatter_snr_db(x);
                avg_ber_secondary(AvgSnrParams {
                    gamma_b: diversity_tap_snr(&c, l_b, moments),
                    l_b,
                })
                .0
            })
            .collect();
        println!(
            "L_b = {l_b}: simulated slope {:.2}, closed-form slope {:.2}",
            diversity_slope(&points, &sim).unwrap_or(f64::NAN),
            diversity_slope(&points, &closed).unwrap_or(f64::NAN)
        );
        for ((x, s), c) in points.iter().zip(&sim).zip(&closed) {
            println!("   {x:>5.1} dB  sim {s:.3e}  closed form {c:.3e}");
        }
    }
    Ok(())
}
