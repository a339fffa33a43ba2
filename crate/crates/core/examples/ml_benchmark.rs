//! The two-step ML benchmark next to the proposed receiver, and the
//! sign ambiguity that appears when neither the direct link nor the pilot
//! structure is available.

use sr_ofdm::harness::{run_sweep, Axis, ReceiverKind, SweepSpec};
use sr_ofdm::numerics::Complex64;
use sr_ofdm::receiver::{CsiMode, Receiver};
use sr_ofdm::txchain::{observe_trial, SystemConfig, TrialStreams};

fn main() -> sr_ofdm::Result<()> {
    let mut cfg = SystemConfig {
        m_s: 4,
        m_c: 2,
        ..SystemConfig::default()
    };
    let spec = SweepSpec {
        axis: Axis::DirectSnrDb,
        points: vec![5.0, 10.0, 15.0, 20.0],
        trials_per_point: 400,
        receivers: vec![
            ReceiverKind::ProposedM2,
            ReceiverKind::MlPerfect,
            ReceiverKind::MlEstimated,
        ],
        csi_modes: vec![CsiMode::Perfect],
    };
    println!("QPSK primary, BPSK secondary");
    for curve in run_sweep(&spec, &cfg, 3)? {
        let p: Vec<String> = curve.ber_primary().iter().map(|b| format!("{b:.2e}")).collect();
        let s: Vec<String> = curve.ber_secondary().iter().map(|b| format!("{b:.2e}")).collect();
        println!(
            "{:<28} primary {:?}\n{:<28} secondary {:?}",
            curve.key.file_stem(),
            p,
            "",
            s
        );
    }

    // without the direct link, (c, S) and (-c, -S) explain Y equally well
    cfg.channel.direct_link = false;
    cfg.set_backscatter_snr_db(20.0);
    let rx = Receiver::new(&cfg)?;
    let obs = observe_trial(&cfg, rx.qam(), rx.psk(), &mut TrialStreams::new(8, 0))?;
    let all: Vec<usize> = (0..cfg.n).collect();
    let hb = obs.true_backscatter_cfr() * Complex64::new(cfg.p_t.sqrt(), 0.0);
    let y = &obs.y[cfg.t()];
    let (m_plus, s_plus) = rx.ml_metric(y, &hb, &all, false);
    let (m_minus, s_minus) = rx.ml_metric(y, &(-hb.clone()), &all, false);
    let flipped = s_plus
        .iter()
        .zip(&s_minus)
        .all(|(&a, &b)| rx.qam().point(a) == -rx.qam().point(b));
    println!("\nno direct link, no pilots: metric(c=+1) = {m_plus:.6e}, metric(c=-1) = {m_minus:.6e}, decisions negated: {flipped}");
    Ok(())
}
