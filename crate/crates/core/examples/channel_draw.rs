//! Link geometry, path loss and one channel realization.

use sr_ofdm::channel::{draw_channel, BackscatterModel, ChannelConfig};
use sr_ofdm::numerics::RandomStream;

fn main() -> sr_ofdm::Result<()> {
    let base = ChannelConfig::default();
    println!("STx distance   β_d        β_1β_2      Δγ (dB)");
    for d1 in [1.0, 3.83, 10.0, 50.0, 100.0] {
        let c = base.clone().with_stx_distance(d1)?;
        println!(
            "{d1:>8.2} m   {:.3e}  {:.3e}  {:>7.2}",
            c.beta_direct(),
            c.beta_backscatter(),
            10.0 * c.snr_ratio().log10()
        );
    }
    let zero_db = base.clone().with_snr_ratio_db(0.0)?;
    println!("Δγ = 0 dB puts the STx {:.3} m from the PTx", zero_db.dist_fwd);

    let mut stream = RandomStream::new(2024, 0);
    let real = draw_channel(&base, 64, &mut stream);
    println!("\nh_d ({} taps): {:?}", real.h_d.len(), real.h_d);
    println!(
        "h_b = b ⊛ g ({} taps, delayed {}): {:?}",
        real.h_b.len(),
        real.d_b,
        real.h_b
    );
    println!(
        "‖H_d‖² = {:.3e} (≈ N β_d = {:.3e}),  ‖H_b‖² = {:.3e}",
        real.cfr_direct.norm_squared(),
        64.0 * base.beta_direct(),
        real.cfr_backscatter.norm_squared()
    );
    println!("composite CIR length with ξ = 0: {}", base.composite_taps(0));

    let rich = ChannelConfig {
        backscatter: BackscatterModel::Rayleigh { taps: 4 },
        ..base
    };
    let real = draw_channel(&rich, 64, &mut stream);
    println!("Rayleigh backscatter with 4 taps: h_b has {} taps", real.h_b.len());
    Ok(())
}
