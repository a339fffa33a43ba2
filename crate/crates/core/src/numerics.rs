//! Complex-vector and small-matrix kernels shared by every other module.
//!
//! Matrices and vectors are `nalgebra` dynamic types over `Complex64`. All
//! least-squares work goes through [`ls_solve`], which factorizes with a
//! Householder QR rather than forming normal equations.
//!
//! Random draws come from [`RandomStream`], a ChaCha8 generator addressed by
//! `(master_seed, stream_id)`. ChaCha is counter based, so a trial's draws
//! depend only on its own address and never on scheduling.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub use num_complex::Complex64;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative threshold on `|R_ii| / max |R_jj|` below which a QR factor is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `exp(-j 2π p q / n)`, with the exponent reduced modulo `n` first.
#[inline]
fn twiddle(p: usize, q: usize, n: usize) -> Complex64 {
    let k = (p as u128 * q as u128 % n as u128) as f64;
    Complex64::from_polar(1.0, -2.0 * PI * k / n as f64)
}

/// The `n`-point DFT matrix `W` with entries `exp(-j2π pq/n)` (0-based).
pub fn dft_matrix(n: usize) -> CMatrix {
    assert!(n >= 1, "DFT size must be positive");
    CMatrix::from_fn(n, n, |p, q| twiddle(p, q, n))
}

/// The first `l` columns of the `n`-point DFT matrix.
pub fn partial_fourier(n: usize, l: usize) -> Result<CMatrix> {
    if l == 0 || n == 0 {
        return Err(Error::Dimension(format!("partial_fourier({n}, {l})")));
    }
    if l > n {
        return Err(Error::Dimension(format!("cannot take {l} columns of a {n}-point DFT")));
    }
    Ok(CMatrix::from_fn(n, l, |p, q| twiddle(p, q, n)))
}

/// Selected rows of the partial Fourier matrix (the pilot-subcarrier rows).
pub fn partial_fourier_rows(n: usize, l: usize, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), l, |r, q| twiddle(rows[r], q, n))
}

/// Least-squares solution of `a x ≈ b` through a Householder QR.
///
/// Fails with [`Error::Singular`] when `a` has fewer rows than columns or is
/// numerically rank deficient.
pub fn ls_solve(a: &CMatrix, b: &CVector) -> Result<CVector> {
    let (rows, cols) = a.shape();
    if b.len() != rows {
        return Err(Error::Dimension(format!(
            "rhs has {} entries, matrix has {rows} rows",
            b.len()
        )));
    }
    if cols == 0 {
        return Err(Error::Dimension("matrix has no columns".into()));
    }
    if rows < cols {
        return Err(Error::Singular(format!("{rows}x{cols} system is underdetermined")));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let max_diag = r.diagonal().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max_diag == 0.0 || !max_diag.is_finite() {
        return Err(Error::Singular("zero matrix".into()));
    }
    if let Some(i) = (0..cols).find(|&i| r[(i, i)].norm() <= RANK_TOL * max_diag) {
        return Err(Error::Singular(format!(
            "column {i} of {rows}x{cols} system is linearly dependent"
        )));
    }
    let qtb = qr.q().adjoint() * b;
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))
}

/// Left pseudo-inverse `(A^H A)^{-1} A^H`, built column by column with
/// [`ls_solve`] so it inherits the same rank checks.
pub fn pseudo_inverse(a: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = a.shape();
    let mut out = CMatrix::zeros(cols, rows);
    let mut e = CVector::zeros(rows);
    for j in 0..rows {
        e.fill(ZERO);
        e[j] = ONE;
        let x = ls_solve(a, &e)?;
        out.set_column(j, &x);
    }
    Ok(out)
}

/// Gaussian tail probability `Q(z) = P(N(0,1) > z)`.
pub fn q_function(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / SQRT_2)
}

/// `F_L h`: the `n`-point frequency response of an `L`-tap impulse response
/// (equivalently the DFT of `h` zero-padded to `n`).
pub fn cir_to_cfr(h: &[Complex64], n: usize) -> CVector {
    assert!(h.len() <= n, "{} taps exceed {n} subcarriers", h.len());
    CVector::from_iterator(
        n,
        (0..n).map(|k| h.iter().enumerate().map(|(l, &t)| t * twiddle(k, l, n)).sum()),
    )
}

/// Linear convolution of two tap vectors.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Fast `n`-point transform pair matching `W x` and `W^H x` (both
/// unnormalized), backed by `rustfft`.
#[derive(Clone)]
pub struct FastDft {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FastDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FastDft").field("n", &self.n).finish()
    }
}

impl FastDft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In place `buf <- W buf`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        self.fwd.process(buf);
    }

    /// In place `buf <- W^H buf`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        self.inv.process(buf);
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reproducible random stream addressed by `(master_seed, stream_id)`.
///
/// Two streams built from the same address produce the same draws. Workers
/// must each own their stream; clone to replay.
#[derive(Clone, Debug)]
pub struct RandomStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh, independent stream for a named purpose (channel, data,
    /// noise, ...) within the same trial.
    pub fn substream(&self, tag: u64) -> RandomStream {
        RandomStream::new(splitmix64(self.master_seed ^ splitmix64(tag)), self.stream_id)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// One `CN(0, 1)` sample.
    pub fn unit_cn(&mut self) -> Complex64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    }

    /// `count` i.i.d. `CN(0, variance)` samples. Draws are made at unit
    /// variance and scaled, so streams with different variances differ only
    /// by a constant factor.
    pub fn draw_cn(&mut self, count: usize, variance: f64) -> CVector {
        assert!(variance > 0.0, "variance must be positive");
        let scale = variance.sqrt();
        CVector::from_iterator(count, (0..count).map(|_| self.unit_cn() * scale))
    }

    /// Uniform index in `0..m`.
    pub fn index(&mut self, m: usize) -> usize {
        self.rng.random_range(0..m)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn small_dft_matrices() {
        let w1 = dft_matrix(1);
        assert_eq!(w1.shape(), (1, 1));
        assert_eq!(w1[(0, 0)], ONE);

        let w2 = dft_matrix(2);
        let expect = [[1.0, 1.0], [1.0, -1.0]];
        for p in 0..2 {
            for q in 0..2 {
                assert!((w2[(p, q)] - Complex64::new(expect[p][q], 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn dft_64_is_scaled_unitary() {
        let w = dft_matrix(64);
        let g = w.adjoint() * &w - CMatrix::identity(64, 64) * Complex64::new(64.0, 0.0);
        assert!(max_abs(&g) <= 1e-10, "{}", max_abs(&g));
    }

    #[test]
    fn partial_fourier_columns() {
        let f = partial_fourier(4, 1).unwrap();
        assert!(f.iter().all(|v| (*v - ONE).norm() < 1e-15));

        let f = partial_fourier(64, 5).unwrap();
        let g = f.adjoint() * &f - CMatrix::identity(5, 5) * Complex64::new(64.0, 0.0);
        assert!(max_abs(&g) <= 1e-10);

        let w = dft_matrix(8);
        let f = partial_fourier(8, 3).unwrap();
        for p in 0..8 {
            for q in 0..3 {
                assert_eq!(f[(p, q)], w[(p, q)]);
            }
        }
        assert!(partial_fourier(4, 5).is_err());
    }

    #[test]
    fn ls_solve_trivial_systems() {
        let b = CVector::from_vec(vec![
            Complex64::new(1.0, 2.0),
            Complex64::new(-3.0, 0.5),
            Complex64::new(0.0, -1.0),
        ]);
        let x = ls_solve(&CMatrix::identity(3, 3), &b).unwrap();
        assert!((x - &b).norm() < 1e-14);

        let a = CMatrix::from_element(2, 1, ONE);
        let b = CVector::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(4.0, 0.0)]);
        let x = ls_solve(&a, &b).unwrap();
        assert!((x[0] - Complex64::new(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn ls_solve_recovers_constructed_solution() {
        let mut rs = RandomStream::new(11, 0);
        let a = CMatrix::from_iterator(8, 3, rs.draw_cn(24, 1.0).iter().copied());
        let x0 = rs.draw_cn(3, 1.0);
        let b = &a * &x0;
        let x = ls_solve(&a, &b).unwrap();
        assert!((x - &x0).norm() <= 1e-8 * x0.norm());
    }

    #[test]
    fn ls_solve_residual_is_orthogonal() {
        let mut rs = RandomStream::new(12, 0);
        let a = CMatrix::from_iterator(10, 4, rs.draw_cn(40, 1.0).iter().copied());
        let b = rs.draw_cn(10, 1.0);
        let x = ls_solve(&a, &b).unwrap();
        let r = &a * &x - &b;
        assert!((a.adjoint() * r).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn ls_solve_rejects_rank_deficiency() {
        let mut a = CMatrix::zeros(4, 2);
        for i in 0..4 {
            a[(i, 0)] = Complex64::new(i as f64 + 1.0, 0.0);
            a[(i, 1)] = Complex64::new(2.0 * (i as f64 + 1.0), 0.0);
        }
        let b = CVector::from_element(4, ONE);
        assert!(matches!(ls_solve(&a, &b), Err(Error::Singular(_))));

        let wide = CMatrix::from_element(2, 3, ONE);
        assert!(matches!(
            ls_solve(&wide, &CVector::from_element(2, ONE)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn q_function_basics() {
        assert_eq!(q_function(0.0), 0.5);
        assert!(q_function(40.0) < 1e-300);
        assert!((q_function(1.2816) - 0.1).abs() < 1e-4);
        assert!((q_function(-1.3) - (1.0 - q_function(1.3))).abs() < 1e-15);
    }

    #[test]
    fn convolution_lengths_and_values() {
        let a = [ONE, Complex64::new(2.0, 0.0)];
        let b = [ONE, ONE, ONE];
        let c = convolve(&a, &b);
        let expect = [1.0, 3.0, 3.0, 2.0];
        assert_eq!(c.len(), 4);
        for (v, e) in c.iter().zip(expect) {
            assert!((v.re - e).abs() < 1e-15 && v.im == 0.0);
        }
    }

    #[test]
    fn draw_cn_is_deterministic_and_scaled() {
        let a = RandomStream::new(5, 9).draw_cn(64, 1.0);
        let b = RandomStream::new(5, 9).draw_cn(64, 1.0);
        assert_eq!(a, b);
        let c = RandomStream::new(5, 10).draw_cn(64, 1.0);
        assert_ne!(a, c);
        let two = RandomStream::new(5, 9).draw_cn(64, 2.0);
        let scaled = a * Complex64::new(2f64.sqrt(), 0.0);
        assert_eq!(two, scaled);
    }

    #[test]
    fn draw_cn_moments() {
        let mut rs = RandomStream::new(1, 1);
        let n = 1_000_000;
        let v = rs.draw_cn(n, 1.0);
        let mean: Complex64 = v.iter().sum::<Complex64>() / n as f64;
        let var = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        let var_re = v.iter().map(|z| z.re * z.re).sum::<f64>() / n as f64;
        assert!(mean.norm() <= 0.005);
        assert!((0.99..=1.01).contains(&var), "{var}");
        assert!((var_re - 0.5).abs() < 0.01);
    }

    #[test]
    fn substreams_are_distinct_and_stable() {
        let base = RandomStream::new(3, 4);
        let mut a = base.substream(1);
        let mut b = base.substream(2);
        let mut a2 = RandomStream::new(3, 4).substream(1);
        let x = a.unit_cn();
        assert_ne!(x, b.unit_cn());
        assert_eq!(x, a2.unit_cn());
    }

    #[test]
    fn fast_dft_matches_direct_matrix() {
        let mut rs = RandomStream::new(2, 2);
        for n in [1usize, 2, 4, 8, 16, 64, 128] {
            let w = dft_matrix(n);
            let x = rs.draw_cn(n, 1.0);
            let direct = &w * &x;
            let mut fast = x.clone();
            let t = FastDft::new(n);
            t.forward(fast.as_mut_slice());
            assert!((fast - &direct).camax() <= 1e-9 * x.norm());

            let direct_inv = w.adjoint() * &x;
            let mut fast_inv = x.clone();
            t.inverse(fast_inv.as_mut_slice());
            assert!((fast_inv - &direct_inv).camax() <= 1e-9 * x.norm());
        }
    }

    #[test]
    fn cfr_of_impulses_and_zero_padding() {
        let n = 16;
        let e0 = [ONE];
        assert!(cir_to_cfr(&e0, n).iter().all(|v| (*v - ONE).norm() < 1e-15));
        let e1 = [ZERO, ONE];
        let w = dft_matrix(n);
        let h = cir_to_cfr(&e1, n);
        for k in 0..n {
            assert!((h[k] - w[(k, 1)]).norm() < 1e-14);
        }
        let mut rs = RandomStream::new(8, 8);
        let taps = rs.draw_cn(5, 1.0);
        let mut padded = CVector::zeros(n);
        padded.rows_mut(0, 5).copy_from(&taps);
        let oracle = &w * padded;
        assert!((cir_to_cfr(taps.as_slice(), n) - oracle).camax() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_of_tall_matrix() {
        let f = partial_fourier(16, 3).unwrap();
        let p = pseudo_inverse(&f).unwrap();
        let eye = &p * &f - CMatrix::identity(3, 3);
        assert!(max_abs(&eye) < 1e-12);
    }
}
