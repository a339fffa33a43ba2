//! Partial Fourier matrices, least-squares CIR recovery and the FFT
//! conventions used throughout (`W x` forward, `W^H x` inverse, unnormalized).

use sr_ofdm::numerics::{
    cir_to_cfr, ls_solve, partial_fourier, partial_fourier_rows, CVector, Complex64, FastDft, RandomStream,
};

fn main() -> sr_ofdm::Result<()> {
    let n = 64;
    let l = 4;
    let mut rng = RandomStream::new(11, 0);
    let h: Vec<Complex64> = (0..l).map(|_| rng.unit_cn()).collect();

    // CFR via the L-column partial Fourier matrix and via the FFT
    let f_l = partial_fourier(n, l)?;
    let cfr = &f_l * CVector::from_column_slice(&h);
    let direct = cir_to_cfr(&h, n);
    let mut buf: Vec<Complex64> = h
        .iter()
        .copied()
        .chain(std::iter::repeat_n(Complex64::new(0.0, 0.0), n - l))
        .collect();
    FastDft::new(n).forward(&mut buf);
    let fft_err = cfr.iter().zip(&buf).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!(
        "max |F_L h - FFT(h)| = {fft_err:.2e}, max |F_L h - direct| = {:.2e}",
        (&cfr - &direct).camax()
    );

    // recover the taps from 8 comb pilots in noise
    let pilots: Vec<usize> = (0..8).map(|i| 8 * i).collect();
    let a = partial_fourier_rows(n, l, &pilots);
    let clean = CVector::from_iterator(pilots.len(), pilots.iter().map(|&k| cfr[k]));
    let exact = ls_solve(&a, &clean)?;
    println!(
        "noise-free tap error {:.2e}",
        (exact - CVector::from_column_slice(&h)).norm()
    );
    let draws = 2000;
    for sigma2 in [1e-4, 1e-2] {
        let mut err = 0.0;
        for _ in 0..draws {
            let est = ls_solve(&a, &(&clean + rng.draw_cn(pilots.len(), sigma2)))?;
            err += est.iter().zip(&h).map(|(e, t)| (e - t).norm_sqr()).sum::<f64>();
        }
        println!(
            "sigma2 = {sigma2:.0e}: per-tap MSE {:.3e} (σ²/N_p = {:.3e})",
            err / (draws * l) as f64,
            sigma2 / 8.0
        );
    }

    // more taps than pilots cannot be resolved
    let wide = partial_fourier_rows(n, 9, &pilots);
    println!(
        "9 taps from 8 pilots: {}",
        ls_solve(&wide, &clean)
            .map(|_| "solved".to_string())
            .unwrap_or_else(|e| e.to_string())
    );
    Ok(())
}
