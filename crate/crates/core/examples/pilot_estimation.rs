//! Comb-pilot least-squares estimation of the composite channel, and the
//! MSE it achieves against `L σ² / (N_p P_T)`.

use sr_ofdm::receiver::Receiver;
use sr_ofdm::txchain::{observe_trial, SystemConfig, TrialStreams};

fn main() -> sr_ofdm::Result<()> {
    let mut cfg = SystemConfig::default();
    println!(
        "pilots at {:?}, composite taps L = {}",
        cfg.pilot_indices,
        cfg.cir_taps()
    );
    println!("direct SNR   measured MSE   L σ²/(N_p P_T)");
    for snr in [10.0, 20.0, 30.0] {
        cfg.set_direct_snr_db(snr);
        let rx = Receiver::new(&cfg)?;
        let (mut mse, mut count) = (0.0, 0usize);
        for trial in 0..300 {
            let obs = observe_trial(&cfg, rx.qam(), rx.psk(), &mut TrialStreams::new(5, trial))?;
            for (n, y) in obs.y.iter().enumerate() {
                let est = rx.pilot_cfr(y);
                mse += (est - obs.true_cfr(n)).norm_squared() / cfg.n as f64;
                count += 1;
            }
        }
        let bound = cfg.cir_taps() as f64 * cfg.sigma2 / (cfg.n_p() as f64 * cfg.p_t);
        println!("{snr:>7.0} dB   {:.4e}     {bound:.4e}", mse / count as f64);
    }

    // a sync error that stretches the CIR past N_p taps forces a truncated estimator
    cfg.sync_error = 8;
    let rx = Receiver::new(&cfg)?;
    println!(
        "ξ = 8: composite taps {}, pilot fallback {}",
        cfg.cir_taps(),
        rx.pilot_fallback()
    );
    Ok(())
}
