//! Property tests for the invariants that hold on every input, not just the
//! curated corpora: transform identities, inequality directions, and the
//! cancellation that the energy budget leans on.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use whitham_lab::norms::{check_endpoint_34, check_interpolation_s};
use whitham_lab::operators::{apply_derivative, whitham_m};
use whitham_lab::picard::mollify;
use whitham_lab::spectral::{dealiased_product, random_smooth_field, Grid};

fn grid_strategy() -> impl Strategy<Value = (usize, f64)> {
    (prop::sample::select(vec![16usize, 32, 64, 128]), 1.0f64..50.0)
}

fn samples_strategy() -> impl Strategy<Value = (usize, f64, Vec<f64>)> {
    grid_strategy().prop_flat_map(|(n, half)| {
        prop::collection::vec(-1.0f64..1.0, n).prop_map(move |s| (n, half, s))
    })
}

proptest! {
    #[test]
    fn fft_roundtrip_recovers_samples((n, half, samples) in samples_strategy()) {
        let grid = Grid::new(n, half).unwrap();
        let coeffs = grid.forward(&samples);
        let back = grid.inverse(&coeffs);
        for (a, b) in samples.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12, "roundtrip gap {}", a - b);
        }
    }

    #[test]
    fn parseval_holds((n, half, samples) in samples_strategy()) {
        let grid = Grid::new(n, half).unwrap();
        let coeffs = grid.forward(&samples);
        let coeff_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let sample_sq: f64 = samples.iter().map(|s| s * s).sum::<f64>() * grid.dx();
        let scale = sample_sq.max(1e-12);
        prop_assert!((coeff_sq - sample_sq).abs() / scale < 1e-12);
    }

    #[test]
    fn real_fields_have_hermitian_spectra((n, half, samples) in samples_strategy()) {
        let grid = Grid::new(n, half).unwrap();
        let coeffs = grid.forward(&samples);
        for k in 1..(n as i64) / 2 {
            let plus = coeffs[grid.slot_of(k)];
            let minus = coeffs[grid.slot_of(-k)];
            prop_assert!((plus - minus.conj()).norm() < 1e-12);
        }
        prop_assert!(coeffs[grid.slot_of(0)].im.abs() < 1e-12);
    }

    #[test]
    fn interpolation_ratio_at_most_one(
        seed in any::<u64>(),
        s in 0.05f64..0.45,
        cutoff in 1.0f64..8.0,
        target in 0.1f64..5.0,
    ) {
        let grid = Grid::new(256, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = random_smooth_field(&grid, target, cutoff, &mut rng).unwrap();
        let ratio = check_interpolation_s(&mut f, s).unwrap();
        prop_assert!(ratio <= 1.0 + 1e-12, "ratio {ratio}");
    }

    #[test]
    fn endpoint_residual_is_nonnegative(
        seed in any::<u64>(),
        cutoff in 1.0f64..8.0,
        target in 0.1f64..5.0,
    ) {
        let grid = Grid::new(256, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = random_smooth_field(&grid, target, cutoff, &mut rng).unwrap();
        let report = check_endpoint_34(&mut f);
        prop_assert!(report.residual >= -1e-12 * report.h34_sq.max(1.0));
    }

    #[test]
    fn dealiased_flux_is_orthogonal_to_the_field(
        seed in any::<u64>(),
        cutoff in 1.0f64..6.0,
        target in 0.1f64..2.0,
    ) {
        let grid = Grid::new(128, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = random_smooth_field(&grid, target, cutoff, &mut rng).unwrap();
        let mut v = u.clone();
        let mut flux = dealiased_product(&mut u, &mut v).unwrap();
        flux.map_coeffs(|_, c| 0.5 * c);
        apply_derivative(&mut flux);
        let ip: f64 = flux
            .coeffs()
            .iter()
            .zip(u.coeffs())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        let scale = (u.l2_norm() * flux.l2_norm()).max(1e-30);
        prop_assert!(ip.abs() / scale < 1e-10, "normalized pairing {}", ip / scale);
    }

    #[test]
    fn mollifier_never_expands(
        seed in any::<u64>(),
        eps in 0.0f64..3.0,
        cutoff in 1.0f64..8.0,
    ) {
        let grid = Grid::new(128, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = random_smooth_field(&grid, 1.0, cutoff, &mut rng).unwrap();
        let before = u.l2_norm();
        let mut smoothed = mollify(&u, eps).unwrap();
        prop_assert!(smoothed.l2_norm() <= before * (1.0 + 1e-12));
    }

    #[test]
    fn symbol_bounds_hold_pointwise(xi in -1e4f64..1e4) {
        let m = whitham_m(xi);
        prop_assert!(m >= 1.0, "m({xi}) = {m}");
        prop_assert!(m * m >= xi.abs(), "m^2({xi}) = {}", m * m);
    }
}
