//! Scenario files: parse, override, validate and write back. Errors point
//! at the offending line.

use sr_ofdm::scenario::Scenario;

fn main() {
    let text = "\
# QPSK primary, four-symbol preamble, STx 20 m from the PTx
m_s = 4
m_c = 2
preamble = 1, j, -1, -j
n_max = 12
dist_fwd = 20
direct_snr_db = 25
axis = snr_ratio_db
points = -20:0:5
receivers = proposed_m2, ml_estimated
";
    let sc = Scenario::parse(text).expect("valid scenario");
    println!(
        "parsed: {} subcarriers, {}-QAM / {}-PSK, T = {}, Δγ = {:.2} dB, P_T = {:.3e} W",
        sc.system.n,
        sc.system.m_s,
        sc.system.m_c,
        sc.system.t(),
        10.0 * sc.system.channel.snr_ratio().log10(),
        sc.system.p_t
    );
    println!(
        "curves: {:?}",
        sc.sweep.curves().iter().map(|k| k.file_stem()).collect::<Vec<_>>()
    );
    println!("--- resolved ---\n{}", sc.to_text());

    for bad in ["m_s = 16\nbogus_key = 1\n", "m_s = 16\nm_c = 3\n", "l_d = 4\nl_d = 5\n"] {
        println!("rejected: {}", Scenario::parse(bad).unwrap_err());
    }
}
