//! Decode one frame end to end: pilot estimate, primary detection,
//! re-estimation with Method 1 or Method 2, link separation over the
//! preamble and secondary detection.

use sr_ofdm::constellation::bit_errors;
use sr_ofdm::receiver::{Algorithm1Options, CsiMode, EstimatorKind, Receiver};
use sr_ofdm::txchain::{observe_trial, SystemConfig, TrialStreams};

fn main() -> sr_ofdm::Result<()> {
    let mut cfg = SystemConfig::default();
    cfg.set_direct_snr_db(30.0);
    let rx = Receiver::new(&cfg)?;
    println!(
        "direct SNR {:.1} dB, backscatter SNR {:.1} dB, {} data subcarriers, preamble {:?}",
        cfg.direct_snr_db(),
        cfg.backscatter_snr_db(),
        cfg.data_indices().len(),
        cfg.preamble
    );

    let obs = observe_trial(&cfg, rx.qam(), rx.psk(), &mut TrialStreams::new(42, 0))?;
    println!("sent c labels        {:?}", obs.frame.c_labels);
    for method in [EstimatorKind::PilotOnly, EstimatorKind::Method1, EstimatorKind::Method2] {
        for csi in [CsiMode::Estimated, CsiMode::Perfect] {
            let out = rx.run_algorithm1(
                &obs,
                Algorithm1Options {
                    method,
                    csi,
                    genie: false,
                },
            )?;
            let s_err: u32 = obs
                .frame
                .data_labels
                .iter()
                .zip(&out.s_hat)
                .flat_map(|(a, b)| a.iter().zip(b))
                .map(|(&a, &b)| bit_errors(a, b))
                .sum();
            println!("{method:?}/{csi:?}: c {:?}  primary bit errors {s_err}", out.c_hat);
        }
    }

    // the separated direct-link estimate against the truth
    let out = rx.run_algorithm1(
        &obs,
        Algorithm1Options {
            method: EstimatorKind::Method2,
            csi: CsiMode::Estimated,
            genie: false,
        },
    )?;
    let rel =
        |est: &sr_ofdm::numerics::CVector, truth: &sr_ofdm::numerics::CVector| (est - truth).norm() / truth.norm();
    println!(
        "relative error: Ĥ_d {:.3e}, Ĥ_b {:.3e}",
        rel(&out.h_hat_d, &obs.realization.cfr_direct),
        rel(&out.h_hat_b, &obs.true_backscatter_cfr())
    );
    Ok(())
}
