//! Norm layer: L^2, homogeneous and inhomogeneous Sobolev norms, the
//! dissipation norm ||f||_N^2 = sum |xi| m(xi) |f^(xi)|^2, and the
//! interpolation / endpoint / product-law checks built on them.

use crate::operators::whitham_m;
use crate::spectral::{dealiased_product, SpectralField};
use crate::{Error, Result};
use serde::Serialize;

/// Point-in-time norm report. `hs` pairs exponents with values, ascending.
#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub l2: f64,
    pub n_norm: f64,
    pub linf: f64,
    pub hs: Vec<(f64, f64)>,
}

/// Homogeneous Sobolev norm of exponent sigma >= 0. powf gives 0^0 = 1, so
/// sigma = 0 reduces to the plain L^2 norm including the mean mode.
pub fn hs_norm(field: &mut SpectralField, sigma: f64) -> f64 {
    let freqs = field.grid().freqs().to_vec();
    field
        .coeffs()
        .iter()
        .zip(freqs.iter())
        .map(|(c, &xi)| xi.abs().powf(2.0 * sigma) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Inhomogeneous Sobolev norm with weight (1 + xi^2)^s.
pub fn hs_inhomogeneous(field: &mut SpectralField, s: f64) -> f64 {
    let freqs = field.grid().freqs().to_vec();
    field
        .coeffs()
        .iter()
        .zip(freqs.iter())
        .map(|(c, &xi)| (1.0 + xi * xi).powf(s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Dissipation norm: weight |xi| m(xi) on the power spectrum.
pub fn n_norm(field: &mut SpectralField) -> f64 {
    let freqs = field.grid().freqs().to_vec();
    field
        .coeffs()
        .iter()
        .zip(freqs.iter())
        .map(|(c, &xi)| xi.abs() * whitham_m(xi) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn compute_norms(field: &mut SpectralField, hs_exponents: &[f64]) -> NormReport {
    let mut hs: Vec<(f64, f64)> = hs_exponents.iter().map(|&s| (s, hs_norm(field, s))).collect();
    hs.sort_by(|a, b| a.0.total_cmp(&b.0));
    NormReport { l2: field.l2_norm(), n_norm: n_norm(field), linf: field.max_abs(), hs }
}

/// Interpolation ratio ||f||_{Hdot^s} / (||f||_{L^2}^{1-2s} ||f||_N^{2s}) for
/// s in (0, 1/2]. Since m >= 1, Hoelder on the power spectrum bounds it by 1.
/// A field with no dissipation-norm mass (constants) is degenerate here.
pub fn check_interpolation_s(field: &mut SpectralField, s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 0.5) {
        return Err(Error::Param {
            name: "s".into(),
            message: format!("interpolation exponent must lie in (0, 1/2], got {s}"),
        });
    }
    let l2 = field.l2_norm();
    if l2 == 0.0 {
        return Err(Error::DegenerateField("zero field has no interpolation ratio".into()));
    }
    let nn = n_norm(field);
    if nn == 0.0 {
        return Err(Error::DegenerateField(
            "field with zero dissipation norm (constant) has no interpolation ratio".into(),
        ));
    }
    Ok(hs_norm(field, s) / (l2.powf(1.0 - 2.0 * s) * nn.powf(2.0 * s)))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EndpointReport {
    pub h34_sq: f64,
    pub l2_sq: f64,
    pub n_sq: f64,
    /// l2_sq + n_sq - h34_sq; nonnegative since |xi|^{3/2} <= 1 + |xi| m(xi)
    /// pointwise (indeed |xi| m(xi) >= |xi|^{3/2} alone).
    pub residual: f64,
}

/// Endpoint comparison ||f||_{Hdot^{3/4}}^2 <= ||f||_{L^2}^2 + ||f||_N^2.
pub fn check_endpoint_34(field: &mut SpectralField) -> EndpointReport {
    let h34 = hs_norm(field, 0.75);
    let l2 = field.l2_norm();
    let nn = n_norm(field);
    let (h34_sq, l2_sq, n_sq) = (h34 * h34, l2 * l2, nn * nn);
    EndpointReport { h34_sq, l2_sq, n_sq, residual: l2_sq + n_sq - h34_sq }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProductLawReport {
    /// ||fg||_{Hdot^{sigma+delta-1/2}} over the symmetric Sobolev bound.
    pub sobolev_ratio: f64,
    /// ||(-Lap)^{sigma/2}(fg)||_{L^2} over the Leibniz-type bound.
    pub kato_ponce_ratio: f64,
    pub product_hs: f64,
    pub product_l2_weighted: f64,
}

/// Ratio-form checks of two product estimates, with the product dealiased.
/// sigma and delta must be positive with sigma + delta >= 1/2.
pub fn check_product_laws(
    f: &mut SpectralField,
    g: &mut SpectralField,
    sigma: f64,
    delta: f64,
) -> Result<ProductLawReport> {
    if !(sigma > 0.0 && delta > 0.0) {
        return Err(Error::Param {
            name: "sigma/delta".into(),
            message: "product-law exponents must be positive".into(),
        });
    }
    if sigma + delta < 0.5 {
        return Err(Error::Param {
            name: "sigma/delta".into(),
            message: format!("need sigma + delta >= 1/2, got {}", sigma + delta),
        });
    }
    let mut prod = dealiased_product(f, g)?;

    let product_hs = hs_norm(&mut prod, sigma + delta - 0.5);
    let rhs_sobolev = hs_norm(f, sigma) * hs_norm(g, delta) + hs_norm(g, sigma) * hs_norm(f, delta);
    if rhs_sobolev == 0.0 {
        return Err(Error::DegenerateField("product law needs nonzero factors".into()));
    }

    // (-Lap)^{sigma/2} has symbol |xi|^sigma.
    let kp_lhs = hs_norm(&mut prod, sigma);
    let rhs_kp = hs_norm(f, sigma) * g.max_abs() + hs_norm(g, sigma) * f.max_abs();
    if rhs_kp == 0.0 {
        return Err(Error::DegenerateField("product law needs nonzero factors".into()));
    }

    Ok(ProductLawReport {
        sobolev_ratio: product_hs / rhs_sobolev,
        kato_ponce_ratio: kp_lhs / rhs_kp,
        product_hs,
        product_l2_weighted: kp_lhs,
    })
}
