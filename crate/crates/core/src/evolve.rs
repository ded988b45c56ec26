//! Time integration. Per mode the equation reads
//!
//!   d/dt u^(xi) = -lambda(xi) u^(xi) + F^(u)(xi)
//!
//! with lambda = eps xi^2(1+xi^2) + |xi| m(xi) for the dissipative variant and
//! lambda = i xi m(xi) for the classic transport variant, and the quadratic
//! flux F(u) = d/dx(u^2/2) computed pseudospectrally with the 2/3 mask. With
//! the mask on, the flux is exactly L^2-orthogonal to the state, so the
//! semi-discrete energy identity holds to round-off and any budget drift is
//! pure time-discretization error.
//!
//! Steppers: an integrating-factor RK4 (nominal order 4) and an exponential
//! two-stage scheme (nominal order 2) as a cross-check. Both treat the linear
//! factor exactly, so linear single-mode runs follow the closed form to
//! round-off. The energy budget integrals are accumulated inside each step
//! from the stage values with the stepper's own quadrature weights, keeping
//! the budget residual at the stepper's order.

use crate::config::{Scheme, SolverConfig, Variant};
use crate::io::Checkpoint;
use crate::norms::{compute_norms, NormReport};
use crate::operators::{whitham_m, Symbol};
use crate::spectral::{Grid, SpectralField};
use crate::{Error, Result};
use num_complex::Complex64;
use std::sync::Arc;

/// Precomputed per-run stepping tables.
pub struct StepContext {
    grid: Arc<Grid>,
    scheme: Scheme,
    dt: f64,
    dealias: bool,
    nonlinearity: bool,
    cfl_limit: f64,
    e_half: Vec<Complex64>,
    e_full: Vec<Complex64>,
    phi1: Vec<Complex64>,
    phi2: Vec<Complex64>,
    /// i xi with the unpaired top mode zeroed.
    deriv: Vec<Complex64>,
    mask: Vec<bool>,
    /// |xi| m(xi): integrand weight of the dissipation-norm budget.
    w_n: Vec<f64>,
    /// eps xi^2 (1 + xi^2): integrand weight of the hyperviscous budget.
    w_eps: Vec<f64>,
}

fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        let mut acc = Complex64::new(1.0 / 120.0, 0.0);
        for c in [1.0 / 24.0, 1.0 / 6.0, 0.5, 1.0] {
            acc = acc * z + c;
        }
        acc
    } else {
        (z.exp() - 1.0) / z
    }
}

fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        let mut acc = Complex64::new(1.0 / 720.0, 0.0);
        for c in [1.0 / 120.0, 1.0 / 24.0, 1.0 / 6.0, 0.5] {
            acc = acc * z + c;
        }
        acc
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

/// Per-step report: stage-1 sup norm (for the CFL check) and the budget
/// increments accumulated across the stages.
pub struct StepStats {
    pub max_abs_u: f64,
    pub diss_n_increment: f64,
    pub diss_eps_increment: f64,
}

impl StepContext {
    pub fn new(cfg: &SolverConfig, grid: &Arc<Grid>) -> Result<StepContext> {
        cfg.validate()?;
        if grid.n() != cfg.n_points || grid.half_length() != cfg.half_length() {
            return Err(Error::GridMismatch("step context grid differs from config".into()));
        }
        let n = grid.n();
        let cut = grid.dealias_cut() as i64;
        let max_xi = grid.max_freq();
        let mut lambda = vec![Complex64::ZERO; n];
        let mut deriv = vec![Complex64::ZERO; n];
        let mut mask = vec![false; n];
        let mut w_n = vec![0.0; n];
        let mut w_eps = vec![0.0; n];
        for i in 0..n {
            let xi = grid.freqs()[i];
            let m = whitham_m(xi);
            lambda[i] = match cfg.variant {
                Variant::Modified => {
                    Complex64::new(cfg.eps * Symbol::HyperviscousL.eval(xi) + xi.abs() * m, 0.0)
                }
                Variant::WhithamClassic => Complex64::new(0.0, xi * m),
            };
            deriv[i] = if xi.abs() >= max_xi { Complex64::ZERO } else { Complex64::new(0.0, xi) };
            mask[i] = grid.k_of(i).abs() <= cut;
            w_n[i] = xi.abs() * m;
            w_eps[i] = cfg.eps * Symbol::HyperviscousL.eval(xi);
        }
        let h = cfg.dt;
        let e_half: Vec<Complex64> = lambda.iter().map(|&l| (-l * (h / 2.0)).exp()).collect();
        let e_full: Vec<Complex64> = lambda.iter().map(|&l| (-l * h).exp()).collect();
        let phi1v: Vec<Complex64> = lambda.iter().map(|&l| phi1(-l * h)).collect();
        let phi2v: Vec<Complex64> = lambda.iter().map(|&l| phi2(-l * h)).collect();
        Ok(StepContext {
            grid: Arc::clone(grid),
            scheme: cfg.scheme,
            dt: h,
            dealias: cfg.dealias,
            nonlinearity: cfg.nonlinearity,
            cfl_limit: cfg.cfl_limit,
            e_half,
            e_full,
            phi1: phi1v,
            phi2: phi2v,
            deriv,
            mask,
            w_n,
            w_eps,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Spectral coefficients of d/dx(u^2/2) with the 2/3 mask applied to the
    /// input and the product, plus the sup norm of the (masked) state.
    pub fn nonlinear(&self, coeffs: &[Complex64]) -> (Vec<Complex64>, f64) {
        let masked: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if !self.dealias || self.mask[i] { c } else { Complex64::ZERO })
            .collect();
        let samples = self.grid.inverse(&masked);
        let max_abs = samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
        if !self.nonlinearity {
            return (vec![Complex64::ZERO; coeffs.len()], max_abs);
        }
        let sq: Vec<f64> = samples.iter().map(|s| 0.5 * s * s).collect();
        let mut out = self.grid.forward(&sq);
        for (i, c) in out.iter_mut().enumerate() {
            *c *= self.deriv[i];
            if self.dealias && !self.mask[i] {
                *c = Complex64::ZERO;
            }
        }
        (out, max_abs)
    }

    fn weighted_sum(&self, coeffs: &[Complex64], w: &[f64]) -> f64 {
        coeffs.iter().zip(w.iter()).map(|(c, &w)| w * c.norm_sqr()).sum()
    }

    fn check_cfl(&self, max_abs_u: f64, t: f64) -> Result<()> {
        let value = self.dt * max_abs_u * self.grid.max_freq();
        if value > self.cfl_limit {
            return Err(Error::CflViolation { t, value, limit: self.cfl_limit });
        }
        Ok(())
    }

    /// Advance one step of size dt from time t. The state is replaced by the
    /// new coefficients.
    pub fn step(&self, state: &mut [Complex64], t: f64) -> Result<StepStats> {
        match self.scheme {
            Scheme::IntegratingFactorRk4 => self.step_ifrk4(state, t),
            Scheme::EtdRk2 => self.step_etdrk2(state, t),
        }
    }

    fn step_ifrk4(&self, state: &mut [Complex64], t: f64) -> Result<StepStats> {
        let n = state.len();
        let h = self.dt;
        let u = state.to_vec();
        let (a1, max_abs_u) = self.nonlinear(&u);
        self.check_cfl(max_abs_u, t)?;

        let mut s2 = vec![Complex64::ZERO; n];
        for i in 0..n {
            s2[i] = self.e_half[i] * (u[i] + a1[i] * (h / 2.0));
        }
        let (a2, _) = self.nonlinear(&s2);

        let mut s3 = vec![Complex64::ZERO; n];
        for i in 0..n {
            s3[i] = self.e_half[i] * u[i] + a2[i] * (h / 2.0);
        }
        let (a3, _) = self.nonlinear(&s3);

        let mut s4 = vec![Complex64::ZERO; n];
        for i in 0..n {
            s4[i] = self.e_full[i] * u[i] + self.e_half[i] * a3[i] * h;
        }
        let (a4, _) = self.nonlinear(&s4);

        for i in 0..n {
            state[i] = self.e_full[i] * u[i]
                + (self.e_full[i] * a1[i] + (self.e_half[i] * (a2[i] + a3[i])) * 2.0 + a4[i])
                    * (h / 6.0);
        }

        // Classical RK4 weights on the stage states integrate the budget at
        // the scheme's own order.
        let gn = self.weighted_sum(&u, &self.w_n)
            + 2.0 * self.weighted_sum(&s2, &self.w_n)
            + 2.0 * self.weighted_sum(&s3, &self.w_n)
            + self.weighted_sum(&s4, &self.w_n);
        let ge = self.weighted_sum(&u, &self.w_eps)
            + 2.0 * self.weighted_sum(&s2, &self.w_eps)
            + 2.0 * self.weighted_sum(&s3, &self.w_eps)
            + self.weighted_sum(&s4, &self.w_eps);
        Ok(StepStats {
            max_abs_u,
            diss_n_increment: gn * h / 6.0,
            diss_eps_increment: ge * h / 6.0,
        })
    }

    fn step_etdrk2(&self, state: &mut [Complex64], t: f64) -> Result<StepStats> {
        let n = state.len();
        let h = self.dt;
        let u = state.to_vec();
        let (a1, max_abs_u) = self.nonlinear(&u);
        self.check_cfl(max_abs_u, t)?;

        let mut mid = vec![Complex64::ZERO; n];
        for i in 0..n {
            mid[i] = self.e_full[i] * u[i] + self.phi1[i] * a1[i] * h;
        }
        let (a2, _) = self.nonlinear(&mid);
        for i in 0..n {
            state[i] = mid[i] + self.phi2[i] * (a2[i] - a1[i]) * h;
        }

        let gn = self.weighted_sum(&u, &self.w_n) + self.weighted_sum(&mid, &self.w_n);
        let ge = self.weighted_sum(&u, &self.w_eps) + self.weighted_sum(&mid, &self.w_eps);
        Ok(StepStats {
            max_abs_u,
            diss_n_increment: gn * h / 2.0,
            diss_eps_increment: ge * h / 2.0,
        })
    }

    /// Relative size of <d/dx(u^2/2), u> against ||u||^2 max|xi|; exact zero
    /// in real arithmetic when the mask is on.
    pub fn nonlinear_cancellation(&self, coeffs: &[Complex64]) -> f64 {
        let (flux, _) = self.nonlinear(coeffs);
        let ip: f64 = flux.iter().zip(coeffs.iter()).map(|(f, c)| (f * c.conj()).re).sum();
        let l2_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if l2_sq == 0.0 {
            0.0
        } else {
            ip.abs() / (l2_sq * self.grid.max_freq())
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeriesPoint {
    pub t: f64,
    pub norms: NormReport,
}

#[derive(Clone, Copy, Debug)]
pub struct BudgetPoint {
    pub t: f64,
    /// 0.5 ||u||^2.
    pub kinetic: f64,
    /// Integral of ||u||_N^2 up to t, stage-accumulated.
    pub diss_n: f64,
    /// Integral of eps ||L^{1/2} u||^2 up to t, stage-accumulated.
    pub diss_eps: f64,
}

#[derive(Clone, Debug)]
pub struct SnapshotPoint {
    pub t: f64,
    pub samples: Vec<f64>,
}

/// Everything a finished run exposes to diagnostics and persistence.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: SolverConfig,
    pub series: Vec<SeriesPoint>,
    /// One point per step, including t = 0.
    pub budget: Vec<BudgetPoint>,
    /// Field dumps every snapshot_stride steps, plus the final step.
    pub snapshots: Vec<SnapshotPoint>,
    pub nonlin_residual_max: f64,
    pub tail_fraction_max: f64,
    pub final_time: f64,
    pub steps: usize,
}

impl RunRecord {
    pub fn grid(&self) -> Result<Arc<Grid>> {
        self.config.grid()
    }

    pub fn final_field(&self) -> Result<SpectralField> {
        let grid = self.grid()?;
        let last = self
            .snapshots
            .last()
            .ok_or_else(|| Error::DegenerateField("run record has no snapshots".into()))?;
        SpectralField::from_samples(&grid, last.samples.clone())
    }

    /// Checkpoint at the final step.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let last = self
            .snapshots
            .last()
            .ok_or_else(|| Error::DegenerateField("run record has no snapshots".into()))?;
        let budget = self
            .budget
            .last()
            .ok_or_else(|| Error::DegenerateField("run record has no budget".into()))?;
        Ok(Checkpoint {
            snapshot: crate::io::Snapshot {
                n: self.config.n_points,
                half_length: self.config.half_length(),
                t: self.final_time,
                variant: self.config.variant,
                eps: self.config.eps,
                samples: last.samples.clone(),
            },
            step_index: self.steps as u64,
            dt: self.config.dt,
            diss_n: budget.diss_n,
            diss_eps: budget.diss_eps,
        })
    }
}

/// Integrate the configured problem from its initial datum.
pub fn run(cfg: &SolverConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut u0 = cfg.initial.build(&grid)?;
    run_from_state(cfg, u0.coeffs().to_vec(), 0.0, 0, 0.0, 0.0)
}

/// Integrate from an explicit initial field, ignoring the config's
/// initial-data section. Used by perturbation studies.
pub fn run_with_initial(cfg: &SolverConfig, u0: &mut SpectralField) -> Result<RunRecord> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    if u0.grid().as_ref() != grid.as_ref() {
        return Err(Error::GridMismatch("initial field grid differs from config".into()));
    }
    run_from_state(cfg, u0.coeffs().to_vec(), 0.0, 0, 0.0, 0.0)
}

/// Resume from a checkpoint; the tail of the run matches an uninterrupted one.
pub fn run_restored(cfg: &SolverConfig, ckpt: &Checkpoint) -> Result<RunRecord> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    if ckpt.snapshot.n != grid.n() || ckpt.snapshot.half_length != grid.half_length() {
        return Err(Error::GridMismatch("checkpoint grid differs from config".into()));
    }
    if ckpt.dt != cfg.dt {
        return Err(Error::Config {
            field: "stepper.dt".into(),
            message: format!("checkpoint dt {} differs from config dt {}", ckpt.dt, cfg.dt),
        });
    }
    let mut f = SpectralField::from_samples(&grid, ckpt.snapshot.samples.clone())?;
    run_from_state(
        cfg,
        f.coeffs().to_vec(),
        ckpt.snapshot.t,
        ckpt.step_index as usize,
        ckpt.diss_n,
        ckpt.diss_eps,
    )
}

fn run_from_state(
    cfg: &SolverConfig,
    mut state: Vec<Complex64>,
    t0: f64,
    step0: usize,
    diss_n0: f64,
    diss_eps0: f64,
) -> Result<RunRecord> {
    let grid = cfg.grid()?;
    let ctx = StepContext::new(cfg, &grid)?;
    let n_steps = cfg.n_steps()?;
    if step0 > n_steps {
        return Err(Error::Config {
            field: "stepper.t_end".into(),
            message: format!("restore point at step {step0} is beyond the {n_steps}-step run"),
        });
    }

    if cfg.variant == Variant::WhithamClassic {
        // The unpaired top mode cannot carry a real-valued skew rotation.
        let max_xi = grid.max_freq();
        for (i, c) in state.iter_mut().enumerate() {
            if grid.freqs()[i].abs() >= max_xi {
                *c = Complex64::ZERO;
            }
        }
    }

    let mut record = RunRecord {
        config: cfg.clone(),
        series: Vec::new(),
        budget: Vec::new(),
        snapshots: Vec::new(),
        nonlin_residual_max: 0.0,
        tail_fraction_max: 0.0,
        final_time: t0,
        steps: step0,
    };
    let mut diss_n = diss_n0;
    let mut diss_eps = diss_eps0;

    let observe = |record: &mut RunRecord,
                   state: &[Complex64],
                   t: f64,
                   step: usize,
                   diss_n: f64,
                   diss_eps: f64|
     -> Result<()> {
        let kinetic = 0.5 * state.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if !kinetic.is_finite() {
            return Err(Error::Blowup { t });
        }
        record.budget.push(BudgetPoint { t, kinetic, diss_n, diss_eps });
        let at_snapshot = step.is_multiple_of(cfg.snapshot_stride) || step == n_steps;
        if at_snapshot {
            let mut field = SpectralField::from_coeffs(&grid, state.to_vec())?;
            let tail = field.tail_fraction();
            record.tail_fraction_max = record.tail_fraction_max.max(tail);
            if tail > cfg.tail_threshold {
                return Err(Error::ResolutionLost {
                    t,
                    fraction: tail,
                    threshold: cfg.tail_threshold,
                });
            }
            let cancel = ctx.nonlinear_cancellation(state);
            record.nonlin_residual_max = record.nonlin_residual_max.max(cancel);
            record
                .series
                .push(SeriesPoint { t, norms: compute_norms(&mut field, &cfg.hs_exponents) });
            record.snapshots.push(SnapshotPoint { t, samples: field.samples().to_vec() });
        }
        Ok(())
    };

    observe(&mut record, &state, t0, step0, diss_n, diss_eps)?;
    for step in step0..n_steps {
        let t = step as f64 * cfg.dt;
        let stats = ctx.step(&mut state, t)?;
        diss_n += stats.diss_n_increment;
        diss_eps += stats.diss_eps_increment;
        let t_next = (step + 1) as f64 * cfg.dt;
        observe(&mut record, &state, t_next, step + 1, diss_n, diss_eps)?;
        record.final_time = t_next;
        record.steps = step + 1;
    }
    Ok(record)
}

/// Sup-in-time L^2 distance between two records over their shared snapshot
/// times. Both runs must use the same grid and snapshot cadence.
pub fn sup_l2_distance(a: &RunRecord, b: &RunRecord) -> Result<f64> {
    if a.config.n_points != b.config.n_points || a.config.half_length_pi != b.config.half_length_pi
    {
        return Err(Error::GridMismatch("records on different grids".into()));
    }
    if a.snapshots.len() != b.snapshots.len() {
        return Err(Error::GridMismatch("records with different snapshot cadence".into()));
    }
    let dx = 2.0 * a.config.half_length() / a.config.n_points as f64;
    let mut sup = 0.0f64;
    for (sa, sb) in a.snapshots.iter().zip(b.snapshots.iter()) {
        if (sa.t - sb.t).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!(
                "snapshot times differ: {} vs {}",
                sa.t, sb.t
            )));
        }
        let d: f64 =
            sa.samples.iter().zip(sb.samples.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
                * dx;
        sup = sup.max(d.sqrt());
    }
    Ok(sup)
}

#[derive(Clone, Debug)]
pub struct FamilyStudy {
    /// Member eps values in run order (the decreasing input grid plus 0).
    pub epsilons: Vec<f64>,
    /// Sup-in-time L^2 distances between consecutive members.
    pub distances: Vec<f64>,
    pub monotone: bool,
    /// Geometric tail estimate from the last two Cauchy gaps.
    pub envelope: Option<f64>,
    /// Distance from the smallest positive eps member to the eps = 0 member.
    pub limit_distance: f64,
}

/// Run the config across a decreasing eps grid plus eps = 0 and compare
/// consecutive members. No convergence rate is asserted here; the study
/// reports observed distances and the geometric envelope they imply.
pub fn epsilon_family_study(base: &SolverConfig, epsilons: &[f64]) -> Result<FamilyStudy> {
    if epsilons.len() < 2 {
        return Err(Error::Param {
            name: "epsilons".into(),
            message: "need at least two positive eps values".into(),
        });
    }
    if epsilons.windows(2).any(|w| w[0] <= w[1]) || epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Param {
            name: "epsilons".into(),
            message: "eps grid must be positive and strictly decreasing".into(),
        });
    }
    let mut members: Vec<f64> = epsilons.to_vec();
    members.push(0.0);
    let mut records = Vec::with_capacity(members.len());
    for &eps in &members {
        let mut cfg = base.clone();
        cfg.eps = eps;
        records.push(run(&cfg)?);
    }
    let mut distances = Vec::with_capacity(members.len() - 1);
    for pair in records.windows(2) {
        distances.push(sup_l2_distance(&pair[0], &pair[1])?);
    }
    let monotone = distances.windows(2).all(|w| w[1] < w[0]);
    let limit_distance = *distances.last().expect("at least one pair");
    // Cauchy gaps exclude the final pair (which reaches the limit itself).
    let gaps = &distances[..distances.len() - 1];
    let envelope = if gaps.len() >= 2 && gaps[gaps.len() - 2] > 0.0 {
        let d_last = gaps[gaps.len() - 1];
        let r = d_last / gaps[gaps.len() - 2];
        if r < 1.0 {
            Some(d_last * r / (1.0 - r))
        } else {
            None
        }
    } else {
        None
    };
    Ok(FamilyStudy { epsilons: members, distances, monotone, envelope, limit_distance })
}

/// Final-time self-convergence orders under dt halving, against a reference
/// run at one quarter of the finest dt.
pub fn self_convergence_orders(base: &SolverConfig, dts: &[f64]) -> Result<Vec<f64>> {
    if dts.len() < 3 || dts.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-12) {
        return Err(Error::Param {
            name: "dts".into(),
            message: "need at least three dt values, each half the previous".into(),
        });
    }
    let mut ref_cfg = base.clone();
    ref_cfg.dt = dts[dts.len() - 1] / 4.0;
    let mut reference = run(&ref_cfg)?.final_field()?;
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut cfg = base.clone();
        cfg.dt = dt;
        let mut f = run(&cfg)?.final_field()?;
        errors.push(f.l2_distance(&mut reference)?);
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InitialData;

    fn base_config() -> SolverConfig {
        SolverConfig {
            n_points: 256,
            half_length_pi: 16.0,
            variant: Variant::Modified,
            eps: 0.0,
            nonlinearity: true,
            scheme: Scheme::IntegratingFactorRk4,
            dt: 0.02,
            t_end: 1.0,
            dealias: true,
            snapshot_stride: 10,
            cfl_limit: 0.5,
            tail_threshold: 1e-6,
            hs_exponents: vec![0.5, 0.75],
            rho_target: None,
            linf_eps_prime: None,
            initial: InitialData::Gaussian { amplitude: 0.2, width: 2.0 },
        }
    }

    #[test]
    fn linear_single_mode_follows_closed_form() {
        for scheme in [Scheme::IntegratingFactorRk4, Scheme::EtdRk2] {
            let mut cfg = base_config();
            cfg.scheme = scheme;
            cfg.nonlinearity = false;
            cfg.initial = InitialData::Sine { amplitude: 1.0, mode: 16 };
            // mode 16 on L = 16 pi sits at xi = 1.
            let record = run(&cfg).unwrap();
            let mut f = record.final_field().unwrap();
            let expect = (-(cfg.t_end) * whitham_m(1.0)).exp();
            let l2_0 = (16.0 * std::f64::consts::PI).sqrt();
            let got = f.l2_norm() / l2_0;
            assert!((got - expect).abs() < 1e-12, "{:?}: decay {got} vs {expect}", scheme);
        }
    }

    #[test]
    fn classic_linear_preserves_l2() {
        let mut cfg = base_config();
        cfg.variant = Variant::WhithamClassic;
        cfg.nonlinearity = false;
        cfg.initial = InitialData::Gaussian { amplitude: 0.3, width: 1.5 };
        let record = run(&cfg).unwrap();
        let first = record.series.first().unwrap().norms.l2;
        let last = record.series.last().unwrap().norms.l2;
        assert!((first - last).abs() < 1e-12 * first, "drift {}", (first - last).abs());
    }

    #[test]
    fn modified_run_dissipates_l2() {
        let record = run(&base_config()).unwrap();
        let l2s: Vec<f64> = record.series.iter().map(|p| p.norms.l2).collect();
        for w in l2s.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn nonlinear_cancellation_is_roundoff_with_mask() {
        let record = run(&base_config()).unwrap();
        assert!(record.nonlin_residual_max < 1e-12, "{}", record.nonlin_residual_max);
    }

    #[test]
    fn budget_residual_is_tiny_for_rk4() {
        let mut cfg = base_config();
        cfg.eps = 1e-2;
        let record = run(&cfg).unwrap();
        let k0 = record.budget.first().unwrap().kinetic;
        for b in &record.budget {
            let residual = b.kinetic + b.diss_n + b.diss_eps - k0;
            assert!(residual.abs() < 1e-9 * k0, "t={} residual {residual}", b.t);
        }
    }

    #[test]
    fn cfl_violation_detected() {
        let mut cfg = base_config();
        cfg.dt = 0.5;
        cfg.t_end = 5.0;
        cfg.initial = InitialData::Gaussian { amplitude: 2.0, width: 2.0 };
        match run(&cfg) {
            Err(Error::CflViolation { .. }) => {}
            other => panic!("expected CFL violation, got {other:?}"),
        }
    }

    #[test]
    fn resolution_loss_detected() {
        let mut cfg = base_config();
        cfg.n_points = 64;
        // Narrow spike on a coarse grid: spectral tail above the monitor cut.
        cfg.initial = InitialData::Gaussian { amplitude: 0.1, width: 0.05 };
        match run(&cfg) {
            Err(Error::ResolutionLost { .. }) => {}
            other => panic!("expected resolution loss, got {other:?}"),
        }
    }

    #[test]
    fn two_grids_agree_on_shared_points() {
        let coarse = run(&base_config()).unwrap();
        let mut fine_cfg = base_config();
        fine_cfg.n_points *= 2;
        let fine = run(&fine_cfg).unwrap();
        let a = &coarse.snapshots.last().unwrap().samples;
        let b = &fine.snapshots.last().unwrap().samples;
        let mut worst = 0.0f64;
        for j in 0..a.len() {
            worst = worst.max((a[j] - b[2 * j]).abs());
        }
        assert!(worst < 1e-8, "grid doubling mismatch {worst}");
    }

    #[test]
    fn etd2_and_ifrk4_agree_to_stepper_order() {
        let rk4 = run(&base_config()).unwrap();
        let mut cfg = base_config();
        cfg.scheme = Scheme::EtdRk2;
        let etd = run(&cfg).unwrap();
        let mut a = rk4.final_field().unwrap();
        let mut b = etd.final_field().unwrap();
        let d = a.l2_distance(&mut b).unwrap();
        assert!(d < 1e-4, "cross-scheme distance {d}");
        assert!(d > 0.0, "schemes should not coincide exactly");
    }

    #[test]
    fn self_convergence_at_nominal_order() {
        let mut cfg = base_config();
        cfg.t_end = 0.4;
        let orders = self_convergence_orders(&cfg, &[0.1, 0.05, 0.025]).unwrap();
        for o in &orders {
            assert!(*o > 3.5 && *o < 4.6, "IFRK4 order {o}");
        }
        cfg.scheme = Scheme::EtdRk2;
        let orders = self_convergence_orders(&cfg, &[0.1, 0.05, 0.025]).unwrap();
        for o in &orders {
            assert!(*o > 1.7 && *o < 2.6, "ETD2 order {o}");
        }
    }

    #[test]
    fn checkpoint_restore_matches_uninterrupted() {
        let mut cfg = base_config();
        cfg.t_end = 0.6;
        let full = run(&cfg).unwrap();

        let mut head_cfg = cfg.clone();
        head_cfg.t_end = 0.3;
        let head = run(&head_cfg).unwrap();
        let ckpt = head.checkpoint().unwrap();
        let tail = run_restored(&cfg, &ckpt).unwrap();

        let a = &full.snapshots.last().unwrap().samples;
        let b = &tail.snapshots.last().unwrap().samples;
        let mut worst = 0.0f64;
        for (x, y) in a.iter().zip(b.iter()) {
            worst = worst.max((x - y).abs());
        }
        assert!(worst < 1e-12, "restore mismatch {worst}");
        let bf = full.budget.last().unwrap();
        let bt = tail.budget.last().unwrap();
        assert!((bf.diss_n - bt.diss_n).abs() < 1e-12);
    }

    #[test]
    fn epsilon_family_distances_shrink() {
        let mut cfg = base_config();
        cfg.t_end = 0.5;
        cfg.initial = InitialData::Gaussian { amplitude: 0.25, width: 2.0 };
        let study = epsilon_family_study(&cfg, &[1e-1, 1e-2, 1e-3]).unwrap();
        assert_eq!(study.epsilons.len(), 4);
        assert!(study.monotone, "distances {:?}", study.distances);
        let env = study.envelope.expect("geometric gaps");
        assert!(
            study.limit_distance <= 1.5 * env,
            "limit {} vs envelope {}",
            study.limit_distance,
            env
        );
    }

    #[test]
    fn epsilon_family_rejects_unordered_grid() {
        let cfg = base_config();
        assert!(epsilon_family_study(&cfg, &[1e-3, 1e-2]).is_err());
        assert!(epsilon_family_study(&cfg, &[1e-2]).is_err());
    }
}
