//! Fourier multipliers and semigroup kernels.
//!
//! The dispersive symbol is m(xi) = sqrt((1 + xi^2) tanh(xi)/xi) with
//! m(0) = 1 and m(xi) ~ |xi|^{1/2} for large |xi|. The dissipative symbol of
//! (-Lap)^{1/2} M is |xi| m(xi); the hyperviscous generator (-Lap)(Id - Lap)
//! has symbol xi^2 (1 + xi^2), which factors as xi^2 + xi^4, so its semigroup
//! is the product of a heat factor exp(-tau xi^2) and a quartic factor
//! exp(-tau xi^4).

use crate::spectral::{Grid, SpectralField};
use crate::{Error, Result};
use num_complex::Complex64;
use std::sync::Arc;

/// Crossover below which tanh(xi)/xi switches to its Taylor series. At the
/// crossover the two branches agree to better than 1e-16.
const TANHC_SERIES_CUT: f64 = 1e-4;

/// tanh(x)/x, continuous through x = 0.
pub fn tanhc(x: f64) -> f64 {
    let a = x.abs();
    if a < TANHC_SERIES_CUT {
        let x2 = x * x;
        1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        a.tanh() / a
    }
}

/// Dispersive symbol m(xi). Even in xi; evaluated through |xi| so the grid's
/// exact +/- frequency pairs give bitwise equal values.
pub fn whitham_m(xi: f64) -> f64 {
    ((1.0 + xi * xi) * tanhc(xi)).sqrt()
}

/// Named Fourier multipliers used across the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Symbol {
    /// m(xi)
    WhithamM,
    /// |xi| m(xi), the dissipation-norm weight
    DissipationA,
    /// xi^2 (1 + xi^2), hyperviscous generator
    HyperviscousL,
    /// xi^2, heat generator
    HeatSq,
    /// xi^4, quartic generator
    Quartic,
    /// |xi|^{2s}, generator of (-Lap)^s
    FracLaplacian(f64),
}

impl Symbol {
    pub fn eval(&self, xi: f64) -> f64 {
        match self {
            Symbol::WhithamM => whitham_m(xi),
            Symbol::DissipationA => xi.abs() * whitham_m(xi),
            Symbol::HyperviscousL => xi * xi * (1.0 + xi * xi),
            Symbol::HeatSq => xi * xi,
            Symbol::Quartic => xi * xi * xi * xi,
            Symbol::FracLaplacian(s) => xi.abs().powf(2.0 * s),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Symbol::WhithamM => "whitham_m".into(),
            Symbol::DissipationA => "dissipation_a".into(),
            Symbol::HyperviscousL => "hyperviscous_ell".into(),
            Symbol::HeatSq => "heat_sq".into(),
            Symbol::Quartic => "quartic".into(),
            Symbol::FracLaplacian(s) => format!("frac_laplacian_{s}"),
        }
    }
}

/// Multiply the field's coefficients by sym(xi).
pub fn apply_multiplier(field: &mut SpectralField, sym: Symbol) {
    field.map_coeffs(|xi, c| c * sym.eval(xi));
}

/// Apply exp(-tau * gen(xi)) to the field. tau must be nonnegative.
pub fn apply_semigroup(field: &mut SpectralField, gen: Symbol, tau: f64) -> Result<()> {
    if !(tau >= 0.0) {
        return Err(Error::Param {
            name: "tau".into(),
            message: format!("semigroup time must be >= 0, got {tau}"),
        });
    }
    field.map_coeffs(|xi, c| c * (-tau * gen.eval(xi)).exp());
    Ok(())
}

/// d/dx: multiply by i xi, zeroing the unpaired highest mode so real fields
/// stay real.
pub fn apply_derivative(field: &mut SpectralField) {
    let max = field.grid().max_freq();
    field.map_coeffs(
        |xi, c| {
            if xi.abs() >= max {
                Complex64::ZERO
            } else {
                c * Complex64::new(0.0, xi)
            }
        },
    );
}

/// Least-squares line through (ln x, ln y). Returns (slope, intercept).
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit");
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in lx.iter().zip(ly.iter()) {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    let slope = cov / var;
    (slope, my - slope * mx)
}

#[derive(Clone, Copy, Debug)]
pub struct KernelStudyRow {
    /// Diffusion time tau (the product eps*t of the run it models).
    pub tau: f64,
    /// L^2(torus) norm of |d/dx|^order applied to the kernel.
    pub l2: f64,
    /// L^1(torus) norm of the same weighted kernel, by trapezoid on the grid.
    pub l1: f64,
}

#[derive(Clone, Debug)]
pub struct KernelStudy {
    pub gen: Symbol,
    pub derivative_order: f64,
    pub rows: Vec<KernelStudyRow>,
    /// Fitted slope of ln L^2 vs ln tau.
    pub slope_l2: f64,
    /// exp(intercept) of the same fit.
    pub const_l2: f64,
    pub max_l1: f64,
}

/// Norms of the periodic kernel of exp(-tau gen) weighted by |xi|^order, for
/// each tau in `taus`, with a log-log decay fit. The kernel must be resolved:
/// if the weighted multiplier at the Nyquist frequency exceeds 1e-8 of its
/// peak the study errors out rather than report truncated norms.
pub fn kernel_norm_study(
    grid: &Arc<Grid>,
    gen: Symbol,
    derivative_order: f64,
    taus: &[f64],
) -> Result<KernelStudy> {
    if derivative_order < 0.0 {
        return Err(Error::Param {
            name: "derivative_order".into(),
            message: "must be >= 0".into(),
        });
    }
    if taus.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Param {
            name: "taus".into(),
            message: "diffusion times must be positive".into(),
        });
    }
    let two_l = 2.0 * grid.half_length();
    let nyquist = grid.max_freq();
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut peak = 0.0f64;
        let mut l2_sq = 0.0;
        let mut mult = vec![Complex64::ZERO; grid.n()];
        for (i, &xi) in grid.freqs().iter().enumerate() {
            let w = xi.abs().powf(derivative_order) * (-tau * gen.eval(xi)).exp();
            peak = peak.max(w);
            l2_sq += w * w / two_l;
            mult[i] = Complex64::new(w / two_l.sqrt(), 0.0);
        }
        let w_nyq = nyquist.powf(derivative_order) * (-tau * gen.eval(nyquist)).exp();
        if w_nyq > 1e-8 * peak {
            return Err(Error::KernelUnresolved { tau, tail: w_nyq / peak });
        }
        let mut kernel = SpectralField::from_coeffs(grid, mult)?;
        let l1 = grid.dx() * kernel.samples().iter().map(|s| s.abs()).sum::<f64>();
        rows.push(KernelStudyRow { tau, l2: l2_sq.sqrt(), l1 });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.l2).collect();
    let (slope_l2, intercept) = fit_loglog(&xs, &ys);
    let max_l1 = rows.iter().fold(0.0f64, |m, r| m.max(r.l1));
    Ok(KernelStudy { gen, derivative_order, rows, slope_l2, const_l2: intercept.exp(), max_l1 })
}

/// Symbol value at xi = 1: sqrt(2 tanh 1), frozen from a 40-digit evaluation.
pub const M_AT_1: f64 = 1.234175154470195;

/// Closed-form per-mode value of the squared space-time dissipation response:
/// integral over s in [0, inf) of exp(-2 eps s l(xi)) (|xi| m(xi))^2 ds,
/// which is m(xi)^2 / (2 eps (1 + xi^2)) for xi != 0 and 0 at xi = 0.
pub fn duality_mode_value(xi: f64, eps: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    let m = whitham_m(xi);
    m * m / (2.0 * eps * (1.0 + xi * xi))
}

#[derive(Clone, Debug)]
pub struct DualityStudy {
    /// (eps, space-time norm) rows.
    pub rows: Vec<(f64, f64)>,
    /// Fitted slope of ln norm vs ln eps; the analytic value is -1/2.
    pub slope: f64,
    /// Largest norm * sqrt(eps) over the rows; bounded by ||psi|| / sqrt(2)
    /// since m(xi)^2 / (1 + xi^2) = tanh(xi)/xi <= 1.
    pub const_factor: f64,
}

/// Space-time L^2 norm of the dissipative response to a fixed datum psi under
/// the hyperviscous semigroup, per mode in closed form, for each eps.
pub fn duality_bound_study(psi: &mut SpectralField, eps_list: &[f64]) -> Result<DualityStudy> {
    if eps_list.len() < 2 {
        return Err(Error::Param {
            name: "eps_list".into(),
            message: "need at least two eps values".into(),
        });
    }
    if eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Param {
            name: "eps_list".into(),
            message: "eps values must be positive".into(),
        });
    }
    let freqs = psi.grid().freqs().to_vec();
    let coeffs = psi.coeffs().to_vec();
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let total: f64 = coeffs
            .iter()
            .zip(freqs.iter())
            .map(|(c, &xi)| c.norm_sqr() * duality_mode_value(xi, eps))
            .sum();
        rows.push((eps, total.sqrt()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (slope, _) = fit_loglog(&xs, &ys);
    let const_factor = rows.iter().fold(0.0f64, |m, &(e, v)| m.max(v * e.sqrt()));
    Ok(DualityStudy { rows, slope, const_factor })
}

/// Grid-measured constant of the space-time dissipation bound: the largest
/// per-mode factor sqrt(m(xi)^2 / (2 (1 + xi^2))) over nonzero frequencies.
pub fn duality_constant(grid: &Grid) -> f64 {
    grid.freqs()
        .iter()
        .filter(|&&xi| xi != 0.0)
        .map(|&xi| (whitham_m(xi).powi(2) / (2.0 * (1.0 + xi * xi))).sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // High-precision reference values (mpmath, 40 digits).
    const TANH_1: f64 = 0.7615941559557649;
    const M50_OVER_SQRT50: f64 = 1.000199980003999;

    #[test]
    fn symbol_reference_values() {
        assert_eq!(whitham_m(0.0), 1.0);
        assert!((whitham_m(1.0) - M_AT_1).abs() < 1e-14);
        assert!((whitham_m(-1.0) - M_AT_1).abs() < 1e-14);
        assert!((whitham_m(100.0) / 10.0 - 1.0000499987500625).abs() < 1e-12);
        assert!((whitham_m(50.0) / 50.0f64.sqrt() - M50_OVER_SQRT50).abs() < 1e-12);
    }

    #[test]
    fn tanhc_series_crossover_agrees() {
        let x = TANHC_SERIES_CUT;
        let series = 1.0 - x * x / 3.0 + 2.0 * x.powi(4) / 15.0;
        let direct = x.tanh() / x;
        assert!((series - direct).abs() <= 5e-16, "gap {}", series - direct);
        // Just above and below the cut the evaluation is continuous.
        let lo = tanhc(x * (1.0 - 1e-9));
        let hi = tanhc(x * (1.0 + 1e-9));
        assert!((lo - hi).abs() < 1e-15);
    }

    #[test]
    fn symbol_lower_bound_and_growth() {
        let grid = Grid::new(4096, 32.0 * std::f64::consts::PI).unwrap();
        for &xi in grid.freqs() {
            let m = whitham_m(xi);
            assert!(m >= 1.0, "m({xi}) = {m} dips below 1");
            // (1 + xi^2) tanh|xi| >= xi^2, i.e. m(xi)^2 >= |xi|.
            assert!(m * m >= xi.abs(), "m^2({xi}) = {} below |xi|", m * m);
            if xi.abs() >= 50.0 {
                let ratio = m / xi.abs().sqrt();
                assert!((1.0..=1.001).contains(&ratio), "ratio {ratio} at {xi}");
            }
        }
    }

    #[test]
    fn multiplier_symbols_evaluate() {
        assert_eq!(Symbol::HeatSq.eval(3.0), 9.0);
        assert_eq!(Symbol::Quartic.eval(2.0), 16.0);
        assert_eq!(Symbol::HyperviscousL.eval(2.0), 4.0 * 5.0);
        assert!((Symbol::FracLaplacian(0.5).eval(-3.0) - 3.0).abs() < 1e-15);
        assert!((Symbol::DissipationA.eval(-1.0) - M_AT_1).abs() < 1e-14);
        // Frequency-zero values used by the energy identity.
        assert_eq!(Symbol::DissipationA.eval(0.0), 0.0);
        assert_eq!(Symbol::HyperviscousL.eval(0.0), 0.0);
    }

    #[test]
    fn semigroup_rejects_negative_time() {
        let grid = Grid::new(16, 1.0).unwrap();
        let mut f = SpectralField::zeros(&grid);
        assert!(apply_semigroup(&mut f, Symbol::HeatSq, -0.1).is_err());
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let grid = Grid::new(64, std::f64::consts::PI).unwrap();
        let mut f = SpectralField::from_profile(&grid, |x| (2.0 * x).sin());
        apply_derivative(&mut f);
        let pts = grid.points();
        for (j, &s) in f.samples().iter().enumerate() {
            assert!((s - 2.0 * (2.0 * pts[j]).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_decay_slopes_match_scaling() {
        // Quartic factor: L^2 norms of |d/dx|^a exp(-tau xi^4) kernels scale
        // like tau^{-(2a+1)/8}: -3/8, -1/2, -5/8 for a = 1, 3/2, 2.
        let grid = Grid::new(4096, 32.0 * std::f64::consts::PI).unwrap();
        let taus: Vec<f64> = (0..13).map(|i| 1e-4 * 10f64.powf(i as f64 * 3.0 / 12.0)).collect();
        for (a, expect) in [(1.0, -0.375), (1.5, -0.5), (2.0, -0.625)] {
            let study = kernel_norm_study(&grid, Symbol::Quartic, a, &taus).unwrap();
            assert!(
                (study.slope_l2 - expect).abs() < 1e-3,
                "order {a}: slope {} vs {expect}",
                study.slope_l2
            );
        }
    }

    #[test]
    fn kernel_study_flags_unresolved_grid() {
        // Nyquist at 8 with tau = 1e-4: exp(-0.4) tail, far above 1e-8.
        let grid = Grid::new(512, 32.0 * std::f64::consts::PI).unwrap();
        let err = kernel_norm_study(&grid, Symbol::Quartic, 1.0, &[1e-4, 1e-3]).unwrap_err();
        match err {
            Error::KernelUnresolved { .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn heat_kernel_mass_is_one() {
        // Nyquist 64: exp(-0.01 * 64^2) clears the 1e-8 resolution gate.
        let grid = Grid::new(4096, 32.0 * std::f64::consts::PI).unwrap();
        let study = kernel_norm_study(&grid, Symbol::HeatSq, 0.0, &[0.01, 0.1, 1.0]).unwrap();
        for row in &study.rows {
            assert!((row.l1 - 1.0).abs() < 1e-8, "heat L1 at tau {} is {}", row.tau, row.l1);
        }
    }

    /// Simpson quadrature oracle for the per-mode time integral, with the
    /// integrand cut where the exponential tail is below 1e-18.
    fn duality_mode_quadrature(xi: f64, eps: f64) -> f64 {
        let a = Symbol::DissipationA.eval(xi);
        let l = Symbol::HyperviscousL.eval(xi);
        if a == 0.0 {
            return 0.0;
        }
        let t_cut = 42.0 / (2.0 * eps * l);
        let n = 100_000;
        let h = t_cut / n as f64;
        let f = |s: f64| (-2.0 * eps * s * l).exp() * a * a;
        let mut acc = f(0.0) + f(t_cut);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn duality_mode_closed_form_vs_quadrature() {
        for &(xi, eps) in &[(1.0, 1.0), (0.5, 0.25), (4.0, 1e-2), (12.0, 2.0)] {
            let cf = duality_mode_value(xi, eps);
            let q = duality_mode_quadrature(xi, eps);
            assert!((cf - q).abs() < 1e-10 * cf.max(1.0), "xi={xi} eps={eps}: {cf} vs {q}");
        }
        // Unit mode at xi = 1, eps = 1: the squared value is tanh(1)/2.
        assert!((duality_mode_value(1.0, 1.0) - TANH_1 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn duality_slope_is_minus_half() {
        let grid = Grid::new(256, 16.0 * std::f64::consts::PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut psi = crate::spectral::random_smooth_field(&grid, 1.0, 2.0, &mut rng).unwrap();
        let eps_list: Vec<f64> = (0..10).map(|i| 10f64.powf(-3.0 + i as f64 / 3.0)).collect();
        let study = duality_bound_study(&mut psi, &eps_list).unwrap();
        assert!((study.slope + 0.5).abs() < 1e-12, "slope {}", study.slope);
        assert!(study.const_factor <= 1.0 / 2f64.sqrt() + 1e-12);
    }

    #[test]
    fn duality_constant_is_below_sqrt_half() {
        let grid = Grid::new(512, 32.0 * std::f64::consts::PI).unwrap();
        let c = duality_constant(&grid);
        assert!(c < 1.0 / 2f64.sqrt());
        assert!(c > 0.7, "constant {c} unexpectedly small");
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let xs: Vec<f64> = (1..8).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.625)).collect();
        let (slope, intercept) = fit_loglog(&xs, &ys);
        assert!((slope + 0.625).abs() < 1e-12);
        assert!((intercept.exp() - 3.0).abs() < 1e-12);
    }
}
