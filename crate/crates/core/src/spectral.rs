//! Spectral grid and field layer.
//!
//! The domain is the torus [-L, L) sampled at n equispaced points
//! x_j = -L + j * dx with dx = 2L/n. Frequencies follow the standard FFT
//! layout xi_k = pi * k / L for k = 0, 1, ..., n/2-1, -n/2, ..., -1.
//!
//! Transforms use the unitary normalization
//!
//!   coeff_k = (dx / sqrt(2L)) * sum_j f_j exp(-i xi_k x_j)
//!   f_j     = (1 / sqrt(2L))  * sum_k coeff_k exp(+i xi_k x_j)
//!
//! so Parseval holds with no extra factors: sum_k |coeff_k|^2 equals the
//! discrete L^2 norm dx * sum_j f_j^2. Since x_0 = -L, the phase relative to a
//! 0-based DFT is exp(i pi k) = (-1)^k, i.e. (-1)^i per output slot (n even).

use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::sync::Arc;

/// Periodic grid with cached FFT plans. Construct once, share via `Arc`.
pub struct Grid {
    n: usize,
    half_length: f64,
    freqs: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("half_length", &self.half_length).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

impl Grid {
    /// n must be even and at least 4; half_length positive and finite.
    pub fn new(n: usize, half_length: f64) -> Result<Arc<Grid>> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::Param {
                name: "n_points".into(),
                message: format!("must be even and >= 4, got {n}"),
            });
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Param {
                name: "half_length".into(),
                message: format!("must be positive and finite, got {half_length}"),
            });
        }
        let freqs = (0..n)
            .map(|i| {
                let k = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
                std::f64::consts::PI * k as f64 / half_length
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            n,
            half_length,
            freqs,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Frequencies in FFT layout.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// Largest frequency magnitude on the grid, pi*n/(2L).
    pub fn max_freq(&self) -> f64 {
        std::f64::consts::PI * (self.n as f64 / 2.0) / self.half_length
    }

    /// Sample points x_j = -L + j dx.
    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|j| -self.half_length + j as f64 * dx).collect()
    }

    /// Largest kept integer index K of the 2/3-rule mask. 3K < n strictly, so
    /// aliased images of a product of two masked fields land outside the mask.
    pub fn dealias_cut(&self) -> usize {
        (self.n - 1) / 3
    }

    /// Signed integer index of FFT slot i.
    pub fn k_of(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// FFT slot of signed integer index k (caller keeps |k| <= n/2).
    pub fn slot_of(&self, k: i64) -> usize {
        if k >= 0 {
            k as usize
        } else {
            (k + self.n as i64) as usize
        }
    }

    /// Forward transform of real samples into unitary coefficients.
    pub fn forward(&self, samples: &[f64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.n, "sample count must match grid");
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        self.fwd.process(&mut buf);
        let scale = self.dx() / (2.0 * self.half_length).sqrt();
        for (i, c) in buf.iter_mut().enumerate() {
            let sign = if i % 2 == 0 { scale } else { -scale };
            *c *= sign;
        }
        buf
    }

    /// Inverse transform back to real samples (real part taken; imaginary
    /// round-off for Hermitian inputs is at machine level).
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n, "coefficient count must match grid");
        let scale = (2.0 * self.half_length).sqrt() / self.dx();
        let mut buf: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if i % 2 == 0 { c * scale } else { -c * scale })
            .collect();
        self.inv.process(&mut buf);
        let norm = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Authority {
    Samples,
    Coeffs,
    Synced,
}

/// Real periodic field carrying both physical samples and unitary Fourier
/// coefficients, synchronized lazily.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid>,
    samples: Vec<f64>,
    coeffs: Vec<Complex64>,
    authority: Authority,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralField {
            grid: Arc::clone(grid),
            samples: vec![0.0; grid.n()],
            coeffs: vec![Complex64::ZERO; grid.n()],
            authority: Authority::Synced,
        }
    }

    pub fn from_samples(grid: &Arc<Grid>, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} samples for grid of {} points",
                samples.len(),
                grid.n()
            )));
        }
        Ok(SpectralField {
            grid: Arc::clone(grid),
            coeffs: vec![Complex64::ZERO; samples.len()],
            samples,
            authority: Authority::Samples,
        })
    }

    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for grid of {} points",
                coeffs.len(),
                grid.n()
            )));
        }
        Ok(SpectralField {
            grid: Arc::clone(grid),
            samples: vec![0.0; coeffs.len()],
            coeffs,
            authority: Authority::Coeffs,
        })
    }

    /// Field from a pointwise closure of x.
    pub fn from_profile(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let samples = grid.points().into_iter().map(f).collect();
        SpectralField::from_samples(grid, samples).expect("profile matches grid by construction")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn samples(&mut self) -> &[f64] {
        if self.authority == Authority::Coeffs {
            self.samples = self.grid.inverse(&self.coeffs);
            self.authority = Authority::Synced;
        }
        &self.samples
    }

    pub fn coeffs(&mut self) -> &[Complex64] {
        if self.authority == Authority::Samples {
            self.coeffs = self.grid.forward(&self.samples);
            self.authority = Authority::Synced;
        }
        &self.coeffs
    }

    /// Replace coefficients in place via (xi_k, coeff_k) -> coeff_k.
    pub fn map_coeffs(&mut self, f: impl Fn(f64, Complex64) -> Complex64) {
        self.coeffs();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c = f(self.grid.freqs[i], *c);
        }
        self.authority = Authority::Coeffs;
    }

    /// Replace samples in place via (x_j, f_j) -> f_j.
    pub fn map_samples(&mut self, f: impl Fn(f64, f64) -> f64) {
        self.samples();
        let dx = self.grid.dx();
        let half = self.grid.half_length();
        for (j, s) in self.samples.iter_mut().enumerate() {
            *s = f(-half + j as f64 * dx, *s);
        }
        self.authority = Authority::Samples;
    }

    /// Zero all modes with |k| beyond the 2/3-rule cut.
    pub fn dealias(&mut self) {
        let cut = self.grid.dealias_cut() as i64;
        self.coeffs();
        for i in 0..self.coeffs.len() {
            if self.grid.k_of(i).abs() > cut {
                self.coeffs[i] = Complex64::ZERO;
            }
        }
        self.authority = Authority::Coeffs;
    }

    pub fn l2_norm(&mut self) -> f64 {
        self.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn l2_distance(&mut self, other: &mut SpectralField) -> Result<f64> {
        if self.grid.as_ref() != other.grid.as_ref() {
            return Err(Error::GridMismatch("l2_distance between different grids".into()));
        }
        let b = other.coeffs().to_vec();
        let a = self.coeffs();
        Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt())
    }

    /// Fraction of spectral energy beyond the 2/3-rule cut. Zero field -> 0.
    pub fn tail_fraction(&mut self) -> f64 {
        let cut = self.grid.dealias_cut() as i64;
        let grid = Arc::clone(&self.grid);
        let mut tail = 0.0;
        let mut total = 0.0;
        for (i, c) in self.coeffs().iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            if grid.k_of(i).abs() > cut {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    pub fn max_abs(&mut self) -> f64 {
        self.samples().iter().fold(0.0, |m, &s| m.max(s.abs()))
    }

    pub fn is_finite(&mut self) -> bool {
        match self.authority {
            Authority::Samples => self.samples.iter().all(|s| s.is_finite()),
            _ => self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()),
        }
    }
}

/// Pointwise product of two fields with 2/3-rule dealiasing: both factors are
/// masked, multiplied on the grid, and the result is masked again, so aliased
/// images never enter the kept band.
pub fn dealiased_product(f: &mut SpectralField, g: &mut SpectralField) -> Result<SpectralField> {
    if f.grid().as_ref() != g.grid().as_ref() {
        return Err(Error::GridMismatch("product of fields on different grids".into()));
    }
    let grid = Arc::clone(f.grid());
    let mut fm = f.clone();
    let mut gm = g.clone();
    fm.dealias();
    gm.dealias();
    let gs = gm.samples().to_vec();
    let prod: Vec<f64> = fm.samples().iter().zip(gs.iter()).map(|(a, b)| a * b).collect();
    let mut out = SpectralField::from_samples(&grid, prod)?;
    out.dealias();
    Ok(out)
}

/// Random real field with Gaussian spectral envelope exp(-(xi/cutoff)^2),
/// Hermitian by construction, zero mean, scaled to the requested L^2 norm.
/// Deterministic for a fixed RNG seed.
pub fn random_smooth_field(
    grid: &Arc<Grid>,
    l2_target: f64,
    cutoff: f64,
    rng: &mut impl Rng,
) -> Result<SpectralField> {
    if !(l2_target > 0.0 && cutoff > 0.0) {
        return Err(Error::Param {
            name: "random_smooth_field".into(),
            message: "l2_target and cutoff must be positive".into(),
        });
    }
    let n = grid.n();
    let mut coeffs = vec![Complex64::ZERO; n];
    for k in 1..(n as i64) / 2 {
        let xi = grid.freqs()[k as usize];
        let env = (-(xi / cutoff).powi(2)).exp();
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = rng.random_range(-1.0..1.0);
        let c = Complex64::new(re, im) * env;
        coeffs[grid.slot_of(k)] = c;
        coeffs[grid.slot_of(-k)] = c.conj();
    }
    let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateField("random field drew all zeros".into()));
    }
    let scale = l2_target / norm;
    for c in &mut coeffs {
        *c *= scale;
    }
    SpectralField::from_coeffs(grid, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EXACT: f64 = 1e-12;

    /// Independent O(n^2) realization of the documented transform, straight
    /// from the definition with x_j = -L + j dx. Oracle for the FFT path.
    fn dft_direct(grid: &Grid, samples: &[f64]) -> Vec<Complex64> {
        let n = grid.n();
        let dx = grid.dx();
        let scale = dx / (2.0 * grid.half_length()).sqrt();
        (0..n)
            .map(|i| {
                let xi = grid.freqs()[i];
                let mut acc = Complex64::ZERO;
                for (j, &s) in samples.iter().enumerate() {
                    let x = -grid.half_length() + j as f64 * dx;
                    acc += Complex64::new(0.0, -xi * x).exp() * s;
                }
                acc * scale
            })
            .collect()
    }

    fn random_samples(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn freq_layout_small_grid() {
        let g = Grid::new(8, std::f64::consts::PI).unwrap();
        let expect = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (a, b) in g.freqs().iter().zip(expect.iter()) {
            assert!((a - b).abs() < EXACT, "freq {a} vs {b}");
        }
    }

    #[test]
    fn freq_layout_spacing_and_max() {
        let g = Grid::new(16, 2.0 * std::f64::consts::PI).unwrap();
        assert!((g.freqs()[1] - 0.5).abs() < EXACT);
        let max = g.freqs().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        assert!((max - 4.0).abs() < EXACT);
        assert!((g.max_freq() - 4.0).abs() < EXACT);

        let g = Grid::new(256, 32.0 * std::f64::consts::PI).unwrap();
        assert!((g.dx() - std::f64::consts::PI / 4.0).abs() < EXACT);
        assert!((g.freqs()[1] - 1.0 / 32.0).abs() < EXACT);
    }

    #[test]
    fn odd_n_rejected() {
        let err = Grid::new(9, 1.0).unwrap_err();
        match err {
            Error::Param { name, .. } => assert_eq!(name, "n_points"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn fft_matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[8usize, 16, 32, 64, 128] {
            let g = Grid::new(n, 3.0).unwrap();
            let samples = random_samples(n, &mut rng);
            let fast = g.forward(&samples);
            let slow = dft_direct(&g, &samples);
            for (a, b) in fast.iter().zip(slow.iter()) {
                assert!((a - b).norm() < EXACT, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for &n in &[8usize, 64, 256] {
            let g = Grid::new(n, 5.5).unwrap();
            let samples = random_samples(n, &mut rng);
            let back = g.inverse(&g.forward(&samples));
            for (a, b) in samples.iter().zip(back.iter()) {
                assert!((a - b).abs() < EXACT);
            }
        }
    }

    #[test]
    fn parseval_without_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = Grid::new(128, 7.0).unwrap();
        let samples = random_samples(128, &mut rng);
        let spatial: f64 = g.dx() * samples.iter().map(|s| s * s).sum::<f64>();
        let spectral: f64 = g.forward(&samples).iter().map(|c| c.norm_sqr()).sum();
        assert!((spatial - spectral).abs() < EXACT * spatial.max(1.0));
    }

    #[test]
    fn hermitian_symmetry_for_real_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let g = Grid::new(64, 2.0).unwrap();
        let coeffs = g.forward(&random_samples(64, &mut rng));
        assert!(coeffs[0].im.abs() < EXACT);
        assert!(coeffs[32].im.abs() < EXACT, "unpaired mode must stay real");
        for k in 1..32i64 {
            let a = coeffs[g.slot_of(k)];
            let b = coeffs[g.slot_of(-k)];
            assert!((a - b.conj()).norm() < EXACT);
        }
    }

    #[test]
    fn single_mode_lands_on_its_slot() {
        let g = Grid::new(32, std::f64::consts::PI).unwrap();
        let mut f = SpectralField::from_profile(&g, |x| (3.0 * x).cos());
        let coeffs = f.coeffs().to_vec();
        for (i, c) in coeffs.iter().enumerate() {
            let k = g.k_of(i);
            if k.abs() == 3 {
                // cos(3x) on [-pi, pi): each of the two slots carries half the
                // L^2 mass pi/2, so |coeff| = sqrt(pi/2).
                assert!((c.norm() - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-10);
                assert!(c.im.abs() < EXACT);
            } else {
                assert!(c.norm() < EXACT, "leakage at k={k}");
            }
        }
    }

    #[test]
    fn dealiased_product_is_alias_free() {
        // Fields supported in |k| <= K have products supported in |k| <= 2K;
        // the masked product must match the exact polynomial product there.
        let g = Grid::new(48, std::f64::consts::PI).unwrap();
        let mut f = SpectralField::from_profile(&g, |x| (5.0 * x).cos());
        let mut h = SpectralField::from_profile(&g, |x| (7.0 * x).cos());
        let mut p = dealiased_product(&mut f, &mut h).unwrap();
        // cos5x cos7x = (cos12x + cos2x)/2; K = 15 keeps both.
        let coeffs = p.coeffs().to_vec();
        for (i, c) in coeffs.iter().enumerate() {
            let k = g.k_of(i).abs();
            if k == 12 || k == 2 {
                assert!((c.norm() - 0.5 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-10);
            } else {
                assert!(c.norm() < EXACT, "alias residue at k={k}");
            }
        }
    }

    #[test]
    fn dealias_cut_is_strict() {
        for &n in &[8usize, 9, 48, 256, 258] {
            let cut = (n - 1) / 3;
            assert!(3 * cut < n, "n={n}");
        }
    }

    #[test]
    fn random_smooth_field_is_real_zero_mean_normalized() {
        let g = Grid::new(128, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut f = random_smooth_field(&g, 2.5, 2.0, &mut rng).unwrap();
        assert!((f.l2_norm() - 2.5).abs() < 1e-12);
        let mean: f64 = f.samples().iter().sum::<f64>() / 128.0;
        assert!(mean.abs() < 1e-12);
        let imag_leak = f.coeffs()[0].im.abs();
        assert!(imag_leak < 1e-14);
    }

    #[test]
    fn tail_fraction_tracks_mask() {
        let g = Grid::new(48, std::f64::consts::PI).unwrap();
        let mut low = SpectralField::from_profile(&g, |x| (2.0 * x).sin());
        assert!(low.tail_fraction() < 1e-28);
        let mut high = SpectralField::from_profile(&g, |x| (20.0 * x).sin());
        assert!(high.tail_fraction() > 0.999);
    }
}
