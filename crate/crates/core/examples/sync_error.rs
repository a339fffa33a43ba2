//! Symbol synchronization error at the STx. Up to `N_cp − (L − 1)` samples
//! the lag only stretches the composite CIR; past the pilot resolution the
//! estimator truncates; past the cyclic prefix even perfect CSI fails.

use sr_ofdm::harness::{run_sweep, Axis, ReceiverKind, SweepSpec};
use sr_ofdm::receiver::CsiMode;
use sr_ofdm::txchain::SystemConfig;

fn main() -> sr_ofdm::Result<()> {
    let mut cfg = SystemConfig::default();
    cfg.set_direct_snr_db(55.0);
    let spec = SweepSpec {
        axis: Axis::SyncErrorSamples,
        points: vec![0.0, 3.0, 5.0, 6.0, 10.0, 14.0, 16.0, 20.0],
        trials_per_point: 100,
        receivers: vec![ReceiverKind::ProposedM2],
        csi_modes: vec![CsiMode::Estimated, CsiMode::Perfect],
    };
    let curves = run_sweep(&spec, &cfg, 4)?;
    let curve = |csi| curves.iter().find(|c| c.key.csi == csi).expect("curve present");
    let (est, perfect) = (curve(CsiMode::Estimated), curve(CsiMode::Perfect));
    println!("ξ    composite taps  est. CSI primary BER  perfect CSI primary BER");
    for (i, &xi) in spec.points.iter().enumerate() {
        let mut c = cfg.clone();
        c.sync_error = xi as usize;
        println!(
            "{xi:>2}   {:>5}           {:.3e}             {:.3e}",
            c.cir_taps(),
            est.points[i].ber_primary(),
            perfect.points[i].ber_primary()
        );
    }
    Ok(())
}
