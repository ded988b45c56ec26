//! Post-run audits: the energy budget, the regularity ladder, twin-run
//! stability against perturbed data, and the sup-norm criterion.

use crate::config::{SolverConfig, Variant};
use crate::evolve::{run, run_with_initial, RunRecord};
use crate::norms::hs_inhomogeneous;
use crate::operators::whitham_m;
use crate::spectral::{random_smooth_field, SpectralField};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Slack allowed on the energy inequality; covers round-off accumulation
/// over long runs, nothing more.
pub const ENERGY_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyRow {
    pub t: f64,
    pub kinetic: f64,
    pub diss_n: f64,
    pub diss_eps: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub variant: String,
    pub rows: Vec<EnergyRow>,
    /// Max |residual| / initial kinetic energy over the run.
    pub max_rel_residual: f64,
    /// ||u||^2 + 2 int ||u||_N^2 <= ||u0||^2 (1 + slack) at every step
    /// (plain L^2 non-increase for the classic variant).
    pub inequality_ok: bool,
    /// Stage-accumulated dissipation integrals at the final time.
    pub accumulated_diss_n: f64,
    pub accumulated_diss_eps: f64,
    /// The same integrals re-done by trapezoid over the stored snapshots,
    /// an independent path through samples and FFT.
    pub trapezoid_diss_n: f64,
    pub trapezoid_diss_eps: f64,
    pub cross_check_rel: f64,
}

/// Weighted spectral energies of one snapshot: (||u||_N^2, eps ||L^{1/2}u||^2).
fn snapshot_weights(record: &RunRecord, samples: &[f64]) -> Result<(f64, f64)> {
    let grid = record.grid()?;
    let coeffs = grid.forward(samples);
    let eps = record.config.eps;
    let mut wn = 0.0;
    let mut we = 0.0;
    for (i, c) in coeffs.iter().enumerate() {
        let xi = grid.freqs()[i];
        let e = c.norm_sqr();
        wn += xi.abs() * whitham_m(xi) * e;
        we += eps * (xi * xi + xi * xi * xi * xi) * e;
    }
    Ok((wn, we))
}

/// Audit the budget record of a finished run: residual of the energy
/// identity at every step, the dissipation inequality, and a trapezoid
/// cross-check of the accumulated integrals.
pub fn energy_audit(record: &RunRecord) -> Result<EnergyReport> {
    let first = record
        .budget
        .first()
        .ok_or_else(|| Error::DegenerateField("run record has no budget".into()))?;
    let k0 = first.kinetic;
    if k0 <= 0.0 {
        return Err(Error::DegenerateField("initial kinetic energy is zero".into()));
    }
    let classic = record.config.variant == Variant::WhithamClassic;
    let mut rows = Vec::with_capacity(record.budget.len());
    let mut max_rel = 0.0f64;
    let mut inequality_ok = true;
    for b in &record.budget {
        let residual =
            if classic { b.kinetic - k0 } else { b.kinetic + b.diss_n + b.diss_eps - k0 };
        max_rel = max_rel.max(residual.abs() / k0);
        let lhs = 2.0 * (b.kinetic + if classic { 0.0 } else { b.diss_n });
        if lhs > 2.0 * k0 * (1.0 + ENERGY_SLACK) {
            inequality_ok = false;
        }
        rows.push(EnergyRow {
            t: b.t,
            kinetic: b.kinetic,
            diss_n: b.diss_n,
            diss_eps: b.diss_eps,
            residual,
        });
    }

    let mut trap_n = 0.0;
    let mut trap_e = 0.0;
    let mut prev: Option<(f64, f64, f64)> = None;
    for s in &record.snapshots {
        let (wn, we) = snapshot_weights(record, &s.samples)?;
        if let Some((tp, wnp, wep)) = prev {
            let h = s.t - tp;
            trap_n += 0.5 * h * (wnp + wn);
            trap_e += 0.5 * h * (wep + we);
        }
        prev = Some((s.t, wn, we));
    }
    let last = record.budget.last().expect("budget nonempty");
    let acc = last.diss_n + last.diss_eps;
    let cross =
        if acc > 0.0 { ((trap_n + trap_e) - acc).abs() / acc } else { (trap_n + trap_e).abs() };
    Ok(EnergyReport {
        variant: record.config.variant.name().to_string(),
        rows,
        max_rel_residual: max_rel,
        inequality_ok,
        accumulated_diss_n: last.diss_n,
        accumulated_diss_eps: last.diss_eps,
        trapezoid_diss_n: trap_n,
        trapezoid_diss_eps: trap_e,
        cross_check_rel: cross,
    })
}

/// Max relative budget residual for each dt, plus the observed orders under
/// halving. The residual is pure time-discretization error, so it contracts
/// at the stepper's order.
pub fn budget_residual_orders(base: &SolverConfig, dts: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if dts.len() < 2 || dts.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-12) {
        return Err(Error::Param {
            name: "dts".into(),
            message: "need at least two dt values, each half the previous".into(),
        });
    }
    let mut residuals = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut cfg = base.clone();
        cfg.dt = dt;
        let record = run(&cfg)?;
        residuals.push(energy_audit(&record)?.max_rel_residual);
    }
    let orders = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok((residuals, orders))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LadderRung {
    pub sigma: f64,
    pub hs_norm: f64,
    /// Fraction of the H^sigma mass beyond the 2/3 cut.
    pub tail_indicator: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderReport {
    pub gain: f64,
    pub rho_target: f64,
    pub rungs: Vec<LadderRung>,
    pub reached: f64,
}

/// Tail threshold above which a rung no longer measures the continuum norm.
pub const LADDER_TAIL_LIMIT: f64 = 1e-6;

/// Climb the regularity ladder sigma_0 = gain - 1/4,
/// sigma_{i+1} = sigma_i + gain - 1/4 until rho_target is reached, recording
/// the H^sigma norm at each rung. Fails when the spectral tail carries more
/// than LADDER_TAIL_LIMIT of the weighted mass at some rung, since every
/// higher rung would then be a grid artifact.
pub fn ladder_monitor(
    field: &mut SpectralField,
    gain: f64,
    rho_target: f64,
) -> Result<LadderReport> {
    if !(gain > 0.25) {
        return Err(Error::Param {
            name: "gain".into(),
            message: "ladder gain must exceed 1/4".into(),
        });
    }
    if !(rho_target > 0.0) {
        return Err(Error::Param { name: "rho_target".into(), message: "must be positive".into() });
    }
    let grid = std::sync::Arc::clone(field.grid());
    let cut = grid.dealias_cut() as i64;
    let coeffs = field.coeffs().to_vec();
    let mut rungs = Vec::new();
    let mut sigma = gain - 0.25;
    loop {
        let mut total = 0.0;
        let mut tail = 0.0;
        for (i, c) in coeffs.iter().enumerate() {
            let xi = grid.freqs()[i];
            let w = (1.0 + xi * xi).powf(sigma) * c.norm_sqr();
            total += w;
            if grid.k_of(i).abs() > cut {
                tail += w;
            }
        }
        if total == 0.0 {
            return Err(Error::DegenerateField("ladder on the zero field".into()));
        }
        let tail_indicator = tail / total;
        if tail_indicator > LADDER_TAIL_LIMIT {
            return Err(Error::LadderUnresolvable(format!(
                "rung sigma = {sigma:.3} holds {tail_indicator:.3e} of its mass beyond the cut"
            )));
        }
        rungs.push(LadderRung { sigma, hs_norm: hs_inhomogeneous(field, sigma), tail_indicator });
        if sigma >= rho_target {
            break;
        }
        sigma += gain - 0.25;
    }
    Ok(LadderReport { gain, rho_target, rungs, reached: sigma })
}

#[derive(Clone, Debug, Serialize)]
pub struct TwinReport {
    pub scales: Vec<f64>,
    /// Max sup-t distance between two identical runs; determinism check.
    pub zero_distance: f64,
    /// K = 2 c sup_t (||du||_inf + ||dv||_inf) with bookkeeping c = 1/4.
    pub growth_constant: f64,
    /// Max over scales and times of ||w(t)||^2 / (||w(0)||^2 e^{K t}).
    pub max_envelope_ratio: f64,
    /// Final-time distance divided by the scale, one entry per scale.
    pub response: Vec<f64>,
    /// Max pairwise relative spread of the response entries.
    pub response_spread: f64,
}

fn derivative_sup(record: &RunRecord) -> Result<f64> {
    let grid = record.grid()?;
    let mut sup = 0.0f64;
    for s in &record.snapshots {
        let mut coeffs = grid.forward(&s.samples);
        let max_xi = grid.max_freq();
        for (i, c) in coeffs.iter_mut().enumerate() {
            let xi = grid.freqs()[i];
            *c *= if xi.abs() >= max_xi { Complex64::ZERO } else { Complex64::new(0.0, xi) };
        }
        let d = grid.inverse(&coeffs);
        sup = sup.max(d.iter().fold(0.0f64, |m, &v| m.max(v.abs())));
    }
    Ok(sup)
}

fn snapshot_l2_distances(a: &RunRecord, b: &RunRecord) -> Result<Vec<(f64, f64)>> {
    if a.snapshots.len() != b.snapshots.len() {
        return Err(Error::GridMismatch("twin runs with different snapshot cadence".into()));
    }
    let dx = 2.0 * a.config.half_length() / a.config.n_points as f64;
    a.snapshots
        .iter()
        .zip(b.snapshots.iter())
        .map(|(sa, sb)| {
            let d2: f64 = sa
                .samples
                .iter()
                .zip(sb.samples.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                * dx;
            Ok((sa.t, d2.sqrt()))
        })
        .collect()
}

/// Grid slack on the Gronwall envelope; the bound itself is strict for the
/// semi-discrete flow, the slack absorbs time-stepping error.
pub const TWIN_ENVELOPE_SLACK: f64 = 1e-6;

/// Rerun the configured problem with the initial datum nudged by a fixed
/// random smooth direction at several scales and compare the separation
/// against the two-solution energy envelope.
pub fn twin_run_stability(cfg: &SolverConfig, scales: &[f64], seed: u64) -> Result<TwinReport> {
    if scales.is_empty() || scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Param {
            name: "scales".into(),
            message: "need positive perturbation scales".into(),
        });
    }
    let grid = cfg.grid()?;
    let base = run(cfg)?;
    let twin = run(cfg)?;
    let zero_distance =
        snapshot_l2_distances(&base, &twin)?.iter().map(|&(_, d)| d).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut direction = random_smooth_field(&grid, 1.0, 1.5, &mut rng)?;
    let dir_samples = direction.samples().to_vec();
    let mut u0 = cfg.initial.build(&grid)?;
    let base_samples = u0.samples().to_vec();

    let sup_base = derivative_sup(&base)?;
    let mut max_ratio = 0.0f64;
    let mut response = Vec::with_capacity(scales.len());
    for &scale in scales {
        let perturbed: Vec<f64> =
            base_samples.iter().zip(dir_samples.iter()).map(|(u, d)| u + scale * d).collect();
        let mut v0 = SpectralField::from_samples(&grid, perturbed)?;
        let record = run_with_initial(cfg, &mut v0)?;
        let sup_pert = derivative_sup(&record)?;
        let k = 2.0 * 0.25 * (sup_base + sup_pert);
        let dists = snapshot_l2_distances(&base, &record)?;
        let w0 = dists.first().expect("runs observe t = 0").1;
        if w0 == 0.0 {
            return Err(Error::DegenerateField("perturbation vanished on the grid".into()));
        }
        for &(t, d) in &dists {
            let envelope = w0 * w0 * (k * t).exp();
            max_ratio = max_ratio.max(d * d / envelope);
        }
        response.push(dists.last().expect("nonempty").1 / scale);
    }
    let growth_constant = 2.0 * 0.25 * (sup_base + sup_base);
    let spread = {
        let mut worst = 0.0f64;
        for i in 0..response.len() {
            for j in i + 1..response.len() {
                let r = (response[i] - response[j]).abs() / response[i].max(response[j]);
                worst = worst.max(r);
            }
        }
        worst
    };
    Ok(TwinReport {
        scales: scales.to_vec(),
        zero_distance,
        growth_constant,
        max_envelope_ratio: max_ratio,
        response,
        response_spread: spread,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LinfReport {
    pub eps_prime: f64,
    /// A = (int ||u||_{H^{3/4+eps'}}^4 dt)^{1/4} by trapezoid over snapshots.
    pub time_integral: f64,
    pub sup_linf: f64,
    /// sup_t ||u||_inf / (||u0||_inf + A^2).
    pub c_star: f64,
    /// Riemann sums of |xi|^{-1/2-2eps'} / m(xi) over nonzero modes.
    pub kernel_small: f64,
    pub kernel_large: f64,
}

/// Sup-norm criterion: the time-integrated H^{3/4+eps'} norm controls
/// sup_t ||u||_inf through a frequency kernel that is summable on both sides
/// of |xi| = 1. Reports the measured constant; asserts nothing about it.
pub fn linf_criterion_check(record: &RunRecord, eps_prime: f64) -> Result<LinfReport> {
    if !(eps_prime > 0.0 && eps_prime < 0.25) {
        return Err(Error::Param {
            name: "eps_prime".into(),
            message: "need 0 < eps' < 1/4".into(),
        });
    }
    if record.snapshots.len() < 2 {
        return Err(Error::DegenerateField("need at least two snapshots".into()));
    }
    let grid = record.grid()?;
    let s = 0.75 + eps_prime;
    let mut sup_linf = 0.0f64;
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for snap in &record.snapshots {
        let mut field = SpectralField::from_samples(&grid, snap.samples.clone())?;
        sup_linf = sup_linf.max(field.max_abs());
        let h4 = hs_inhomogeneous(&mut field, s).powi(4);
        if let Some((tp, hp)) = prev {
            integral += 0.5 * (snap.t - tp) * (hp + h4);
        }
        prev = Some((snap.t, h4));
    }
    let a = integral.powf(0.25);
    let u0_inf = {
        let mut f = SpectralField::from_samples(&grid, record.snapshots[0].samples.clone())?;
        f.max_abs()
    };
    let denom = u0_inf + a * a;
    if denom == 0.0 {
        return Err(Error::DegenerateField("zero initial datum".into()));
    }
    let dxi = std::f64::consts::PI / grid.half_length();
    let mut small = 0.0;
    let mut large = 0.0;
    for &xi in grid.freqs() {
        if xi == 0.0 {
            continue;
        }
        let v = dxi * xi.abs().powf(-0.5 - 2.0 * eps_prime) / whitham_m(xi);
        if xi.abs() < 1.0 {
            small += v;
        } else {
            large += v;
        }
    }
    if !(small.is_finite() && large.is_finite()) {
        return Err(Error::DegenerateField("kernel sum overflowed".into()));
    }
    Ok(LinfReport {
        eps_prime,
        time_integral: a,
        sup_linf,
        c_star: sup_linf / denom,
        kernel_small: small,
        kernel_large: large,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitialData, Scheme};

    fn base_config() -> SolverConfig {
        SolverConfig {
            n_points: 256,
            half_length_pi: 16.0,
            variant: Variant::Modified,
            eps: 1e-2,
            nonlinearity: true,
            scheme: Scheme::IntegratingFactorRk4,
            dt: 0.02,
            t_end: 0.6,
            dealias: true,
            snapshot_stride: 5,
            cfl_limit: 0.5,
            tail_threshold: 1e-6,
            hs_exponents: vec![0.5, 0.75],
            rho_target: None,
            linf_eps_prime: None,
            initial: InitialData::Gaussian { amplitude: 0.2, width: 2.0 },
        }
    }

    #[test]
    fn audit_passes_on_a_dissipative_run() {
        let record = run(&base_config()).unwrap();
        let report = energy_audit(&record).unwrap();
        assert!(report.inequality_ok);
        assert!(report.max_rel_residual < 1e-9, "{}", report.max_rel_residual);
        assert!(report.cross_check_rel < 1e-2, "{}", report.cross_check_rel);
        assert!(report.accumulated_diss_n > 0.0);
        assert!(report.accumulated_diss_eps > 0.0);
    }

    #[test]
    fn audit_classic_variant_checks_plain_conservation() {
        let mut cfg = base_config();
        cfg.variant = Variant::WhithamClassic;
        cfg.eps = 0.0;
        let record = run(&cfg).unwrap();
        let report = energy_audit(&record).unwrap();
        assert!(report.inequality_ok);
        assert!(report.max_rel_residual < 1e-12, "{}", report.max_rel_residual);
    }

    #[test]
    fn budget_residual_contracts_at_fourth_order() {
        let mut cfg = base_config();
        cfg.t_end = 0.4;
        let (residuals, orders) = budget_residual_orders(&cfg, &[0.1, 0.05, 0.025]).unwrap();
        assert_eq!(residuals.len(), 3);
        for o in &orders {
            assert!(*o >= 3.5, "budget order {o} from {residuals:?}");
        }
    }

    #[test]
    fn ladder_climbs_a_smooth_field() {
        let grid = base_config().grid().unwrap();
        let mut f = SpectralField::from_profile(&grid, |x| 0.3 * (-0.5 * x * x).exp());
        let report = ladder_monitor(&mut f, 0.7, 2.0).unwrap();
        let sigmas: Vec<f64> = report.rungs.iter().map(|r| r.sigma).collect();
        assert!((sigmas[0] - 0.45).abs() < 1e-12);
        assert!((sigmas[1] - 0.9).abs() < 1e-12);
        assert!(report.reached >= 2.0);
        for r in &report.rungs {
            assert!(r.tail_indicator <= LADDER_TAIL_LIMIT);
            assert!(r.hs_norm.is_finite() && r.hs_norm > 0.0);
        }
    }

    #[test]
    fn ladder_rejects_rough_fields() {
        let grid = base_config().grid().unwrap();
        // A saw-touched profile: spectrum decays too slowly for high rungs.
        let mut f = SpectralField::from_profile(&grid, |x| {
            0.1 * (x / (16.0 * std::f64::consts::PI) * 2.0).fract()
        });
        match ladder_monitor(&mut f, 0.7, 6.0) {
            Err(Error::LadderUnresolvable(_)) => {}
            other => panic!("expected unresolvable ladder, got {other:?}"),
        }
    }

    #[test]
    fn twin_runs_stay_under_the_envelope() {
        let mut cfg = base_config();
        cfg.t_end = 0.4;
        let report = twin_run_stability(&cfg, &[1e-4, 1e-6, 1e-8], 42).unwrap();
        assert!(report.zero_distance < 1e-12, "{}", report.zero_distance);
        assert!(
            report.max_envelope_ratio <= 1.0 + TWIN_ENVELOPE_SLACK,
            "{}",
            report.max_envelope_ratio
        );
        assert!(report.response_spread < 0.05, "{}", report.response_spread);
    }

    #[test]
    fn linf_criterion_reports_finite_constants() {
        let record = run(&base_config()).unwrap();
        let report = linf_criterion_check(&record, 0.05).unwrap();
        assert!(report.c_star.is_finite() && report.c_star > 0.0);
        assert!(report.kernel_small.is_finite() && report.kernel_small > 0.0);
        assert!(report.kernel_large.is_finite() && report.kernel_large > 0.0);
        assert!(report.time_integral > 0.0);
        assert!(linf_criterion_check(&record, 0.3).is_err());
    }
}
