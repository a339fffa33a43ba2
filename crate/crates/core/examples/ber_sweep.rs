//! A deterministic Monte Carlo BER sweep written out as CSV. The same seed
//! gives the same bytes on any number of worker threads.

use sr_ofdm::harness::{run_sweep, with_workers, Axis, BerCurve, ReceiverKind, SweepSpec};
use sr_ofdm::receiver::CsiMode;
use sr_ofdm::txchain::SystemConfig;

fn main() -> sr_ofdm::Result<()> {
    let cfg = SystemConfig::default();
    let spec = SweepSpec {
        axis: Axis::DirectSnrDb,
        points: vec![15.0, 20.0, 25.0, 30.0],
        trials_per_point: 500,
        receivers: vec![ReceiverKind::ProposedM1, ReceiverKind::ProposedM2],
        csi_modes: vec![CsiMode::Estimated],
    };
    let one = with_workers(1, || run_sweep(&spec, &cfg, 17))??;
    let two = with_workers(2, || run_sweep(&spec, &cfg, 17))??;
    for (a, b) in one.iter().zip(&two) {
        assert_eq!(a.to_csv(), b.to_csv());
        print!("{}", a.to_csv());
    }
    println!("1 and 2 workers agree byte for byte; header: {}", BerCurve::CSV_HEADER);
    Ok(())
}
