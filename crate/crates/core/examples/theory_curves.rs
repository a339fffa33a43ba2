//! Closed-form error rates: perfect and pilot-estimated primary BER, the
//! secondary SNR under each re-estimation method, and the Rayleigh
//! diversity curves.

use sr_ofdm::channel::draw_channel;
use sr_ofdm::cli::diversity_tap_snr;
use sr_ofdm::numerics::RandomStream;
use sr_ofdm::theory::{self, avg_ber_secondary, diversity_slope, qam_moments, AvgSnrParams, PrimaryTheory};
use sr_ofdm::txchain::SystemConfig;

fn main() -> sr_ofdm::Result<()> {
    let mut cfg = SystemConfig::default();
    let moments = qam_moments(cfg.m_s)?;
    let real = draw_channel(&cfg.channel, cfg.n, &mut RandomStream::new(7, 0));
    let hb2 = real.cfr_backscatter.norm_squared();

    println!("one channel draw, ‖H_b‖² = {hb2:.3e}");
    println!("SNR   primary(perfect) primary(est.)  sec(perfect)  sec(M1)     sec(M2)");
    for snr in (10..=40).step_by(5) {
        cfg.set_direct_snr_db(snr as f64);
        let pt = PrimaryTheory::new(&cfg)?;
        let (p, s2) = (cfg.p_t, cfg.sigma2);
        let perfect = pt.rates_over_alphabet(&real.cfr_direct, &real.cfr_backscatter, p, s2, false);
        let est = pt.rates_over_alphabet(&real.cfr_direct, &real.cfr_backscatter, p, s2, true);
        let sec = |snr: f64| theory::psk_ber(cfg.m_c, snr);
        println!(
            "{snr:>3}   {:.3e}        {:.3e}      {:.3e}     {:.3e}   {:.3e}",
            perfect.ber,
            est.ber,
            sec(theory::snr_secondary_perfect(hb2, p, s2, moments)),
            sec(theory::snr_secondary_method1(hb2, p, s2, cfg.n, moments)),
            sec(theory::snr_secondary_method2(hb2, p, s2, cfg.cir_taps()))
        );
    }

    println!("\nBPSK secondary over L_b Rayleigh taps (exact, asymptote):");
    let grid: Vec<f64> = (0..=8).map(|i| -10.0 + 2.5 * i as f64).collect();
    for l_b in [1, 2, 4] {
        let mut exact = Vec::new();
        for &x in &grid {
            cfg.set_backscatter_snr_db(x);
            let gamma_b = diversity_tap_snr(&cfg, l_b, moments);
            let (e, a) = avg_ber_secondary(AvgSnrParams { gamma_b, l_b });
            exact.push(e);
            if x == grid[grid.len() - 1] {
                println!("  L_b = {l_b}: at {x} dB exact {e:.3e}, asymptote {a:.3e}");
            }
        }
        let n = grid.len();
        println!(
            "  high-SNR slope {:.2}",
            diversity_slope(&grid[n - 3..], &exact[n - 3..]).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
