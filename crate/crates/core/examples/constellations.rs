//! Gray-labelled QAM and PSK alphabets, and the constellation moments that
//! drive the secondary-link SNR.

use sr_ofdm::constellation::{bit_errors, PskAlphabet, QamAlphabet};
use sr_ofdm::theory::qam_moments;

fn main() -> sr_ofdm::Result<()> {
    for m in [4, 16, 64] {
        let qam = QamAlphabet::new(m)?;
        let mom = qam_moments(m)?;
        println!(
            "{m:>3}-QAM  side {}  d_min/2 {:.4}  Γ1 = E[1/|S|²] = {:.6}  Γ2 = {:.6}",
            qam.side(),
            qam.half_spacing(),
            mom.gamma1,
            mom.gamma2
        );
    }

    // neighbours on the 16-QAM grid differ in exactly one bit
    let qam = QamAlphabet::new(16)?;
    let d = 2.0 * qam.half_spacing();
    let mut worst = 0;
    for a in 0..16 {
        for b in 0..16 {
            if ((qam.point(a) - qam.point(b)).norm() - d).abs() < 1e-9 {
                worst = worst.max(bit_errors(a, b));
            }
        }
    }
    println!("16-QAM: max bit distance between nearest neighbours = {worst}");

    let psk = PskAlphabet::new(8)?;
    for (label, p) in psk.points().iter().enumerate() {
        println!("8-PSK label {label:03b} -> {:+.3}{:+.3}j", p.re, p.im);
    }
    let z = psk.point(5) * 0.9;
    println!("nearest to 0.9·c5: label {}", psk.nearest(z));
    Ok(())
}
