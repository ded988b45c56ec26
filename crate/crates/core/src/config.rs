//! Run configuration: the `SolverConfig` struct and its TOML file form with
//! sections [grid], [equation], [stepper], [output], [initial_data], and an
//! optional [sweep] section for parameter sweeps. Unknown keys anywhere are
//! field-level errors, as are out-of-range values.

use crate::spectral::{Grid, SpectralField};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// du/dt = -eps L u - (-Lap)^{1/2} M u + d/dx(u^2/2), dissipative.
    Modified,
    /// du/dt = -d/dx(M u - u^2/2), skew linear part, no decay.
    WhithamClassic,
}

impl Variant {
    pub fn tag(&self) -> u8 {
        match self {
            Variant::Modified => 0,
            Variant::WhithamClassic => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Variant> {
        match tag {
            0 => Ok(Variant::Modified),
            1 => Ok(Variant::WhithamClassic),
            other => Err(Error::SnapshotFormat(format!("unknown variant tag {other}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Modified => "modified",
            Variant::WhithamClassic => "whitham_classic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    IntegratingFactorRk4,
    EtdRk2,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::IntegratingFactorRk4 => "integrating_factor_rk4",
            Scheme::EtdRk2 => "etd_rk2",
        }
    }

    /// Nominal convergence order under dt refinement.
    pub fn nominal_order(&self) -> f64 {
        match self {
            Scheme::IntegratingFactorRk4 => 4.0,
            Scheme::EtdRk2 => 2.0,
        }
    }
}

/// Initial-data descriptor. Profiles are evaluated on the run grid; `file`
/// loads a snapshot whose grid must match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Gaussian { amplitude: f64, width: f64 },
    Sech2 { amplitude: f64, width: f64 },
    Sine { amplitude: f64, mode: i64 },
    File { path: String },
}

impl InitialData {
    pub fn build(&self, grid: &Arc<Grid>) -> Result<SpectralField> {
        match self {
            InitialData::Gaussian { amplitude, width } => {
                check_positive("initial_data.width", *width)?;
                let (a, w) = (*amplitude, *width);
                Ok(SpectralField::from_profile(grid, |x| a * (-x * x / (2.0 * w * w)).exp()))
            }
            InitialData::Sech2 { amplitude, width } => {
                check_positive("initial_data.width", *width)?;
                let (a, w) = (*amplitude, *width);
                Ok(SpectralField::from_profile(grid, |x| {
                    let c = (x / w).cosh();
                    a / (c * c)
                }))
            }
            InitialData::Sine { amplitude, mode } => {
                let m = *mode;
                if m == 0 || m.unsigned_abs() as usize >= grid.n() / 2 {
                    return Err(Error::Config {
                        field: "initial_data.mode".into(),
                        message: format!("mode {m} not representable on {} points", grid.n()),
                    });
                }
                let a = *amplitude;
                let xi = std::f64::consts::PI * m as f64 / grid.half_length();
                Ok(SpectralField::from_profile(grid, |x| a * (xi * x).sin()))
            }
            InitialData::File { path } => {
                let snap = crate::io::read_snapshot(std::path::Path::new(path))?;
                if snap.n != grid.n() || snap.half_length != grid.half_length() {
                    return Err(Error::GridMismatch(format!(
                        "snapshot {} has n={}, L={}, run grid has n={}, L={}",
                        path,
                        snap.n,
                        snap.half_length,
                        grid.n(),
                        grid.half_length()
                    )));
                }
                SpectralField::from_samples(grid, snap.samples)
            }
        }
    }
}

/// Fully validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_points: usize,
    /// Domain half-length in units of pi; the torus is [-L, L), L = value*pi.
    pub half_length_pi: f64,
    pub variant: Variant,
    pub eps: f64,
    /// When false the quadratic flux is dropped; linear evolution only.
    pub nonlinearity: bool,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub snapshot_stride: usize,
    pub cfl_limit: f64,
    pub tail_threshold: f64,
    pub hs_exponents: Vec<f64>,
    /// Highest regularity-ladder rung a run should certify; absent skips the
    /// ladder report.
    pub rho_target: Option<f64>,
    /// Exponent margin for the sup-norm criterion report; absent skips it.
    pub linf_eps_prime: Option<f64>,
    pub initial: InitialData,
}

impl SolverConfig {
    pub fn half_length(&self) -> f64 {
        self.half_length_pi * std::f64::consts::PI
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.n_points, self.half_length())
    }

    /// Number of steps; t_end must be an integer multiple of dt so runs with
    /// shared dt land on shared times.
    pub fn n_steps(&self) -> Result<usize> {
        let ratio = self.t_end / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-8 {
            return Err(Error::Config {
                field: "t_end".into(),
                message: format!(
                    "t_end = {} is not an integer multiple of dt = {}",
                    self.t_end, self.dt
                ),
            });
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 4 || !self.n_points.is_multiple_of(2) {
            return Err(Error::Config {
                field: "grid.n_points".into(),
                message: format!("must be even and >= 4, got {}", self.n_points),
            });
        }
        check_cfg_positive("grid.half_length_pi", self.half_length_pi)?;
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config {
                field: "equation.eps".into(),
                message: format!("must be >= 0 and finite, got {}", self.eps),
            });
        }
        check_cfg_positive("stepper.dt", self.dt)?;
        check_cfg_positive("stepper.t_end", self.t_end)?;
        check_cfg_positive("stepper.cfl_limit", self.cfl_limit)?;
        check_cfg_positive("output.tail_threshold", self.tail_threshold)?;
        if self.snapshot_stride == 0 {
            return Err(Error::Config {
                field: "output.snapshot_stride".into(),
                message: "must be >= 1".into(),
            });
        }
        if self.hs_exponents.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config {
                field: "output.hs_exponents".into(),
                message: "exponents must be finite and >= 0".into(),
            });
        }
        if let Some(r) = self.rho_target {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config {
                    field: "output.rho_target".into(),
                    message: format!("must be positive, got {r}"),
                });
            }
        }
        if let Some(e) = self.linf_eps_prime {
            if !(e > 0.0 && e < 0.25) {
                return Err(Error::Config {
                    field: "output.linf_eps_prime".into(),
                    message: format!("need 0 < value < 1/4, got {e}"),
                });
            }
        }
        self.n_steps()?;
        self.grid()?;
        Ok(())
    }

    /// Parse the sectioned TOML form, validating every field.
    pub fn from_toml(text: &str) -> Result<SolverConfig> {
        let file: ConfigFile = parse_config_file(text)?;
        file.solver_config()
    }

    /// Canonical TOML serialization of the validated config; input for the
    /// content-hash run id, so field order is fixed by the struct layout.
    pub fn canonical_toml(&self) -> String {
        let file = ConfigFile::from_config(self);
        toml::to_string(&file).expect("config serializes")
    }
}

/// Sweep request carried by the optional [sweep] section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Members run the base config at each eps, plus eps = 0 appended.
    EpsilonFamily { epsilons: Vec<f64> },
    /// Members perturb the initial datum at each scale and compare to base.
    TwinPerturbation { scales: Vec<f64>, seed: u64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n_points: usize,
    half_length_pi: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquationSection {
    variant: Variant,
    eps: f64,
    nonlinearity: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepperSection {
    scheme: Scheme,
    dt: f64,
    t_end: f64,
    dealias: Option<bool>,
    cfl_limit: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    snapshot_stride: Option<usize>,
    tail_threshold: Option<f64>,
    hs_exponents: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    linf_eps_prime: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    grid: GridSection,
    equation: EquationSection,
    stepper: StepperSection,
    output: OutputSection,
    initial_data: InitialData,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepSpec>,
}

impl ConfigFile {
    fn solver_config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            n_points: self.grid.n_points,
            half_length_pi: self.grid.half_length_pi,
            variant: self.equation.variant,
            eps: self.equation.eps,
            nonlinearity: self.equation.nonlinearity.unwrap_or(true),
            scheme: self.stepper.scheme,
            dt: self.stepper.dt,
            t_end: self.stepper.t_end,
            dealias: self.stepper.dealias.unwrap_or(true),
            snapshot_stride: self.output.snapshot_stride.unwrap_or(10),
            cfl_limit: self.stepper.cfl_limit.unwrap_or(0.5),
            tail_threshold: self.output.tail_threshold.unwrap_or(1e-6),
            hs_exponents: self.output.hs_exponents.clone().unwrap_or_else(|| vec![0.5, 0.75]),
            rho_target: self.output.rho_target,
            linf_eps_prime: self.output.linf_eps_prime,
            initial: self.initial_data.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_config(cfg: &SolverConfig) -> ConfigFile {
        ConfigFile {
            grid: GridSection { n_points: cfg.n_points, half_length_pi: cfg.half_length_pi },
            equation: EquationSection {
                variant: cfg.variant,
                eps: cfg.eps,
                nonlinearity: Some(cfg.nonlinearity),
            },
            stepper: StepperSection {
                scheme: cfg.scheme,
                dt: cfg.dt,
                t_end: cfg.t_end,
                dealias: Some(cfg.dealias),
                cfl_limit: Some(cfg.cfl_limit),
            },
            output: OutputSection {
                snapshot_stride: Some(cfg.snapshot_stride),
                tail_threshold: Some(cfg.tail_threshold),
                hs_exponents: Some(cfg.hs_exponents.clone()),
                rho_target: cfg.rho_target,
                linf_eps_prime: cfg.linf_eps_prime,
            },
            initial_data: cfg.initial.clone(),
            sweep: None,
        }
    }
}

fn parse_config_file(text: &str) -> Result<ConfigFile> {
    toml::from_str(text)
        .map_err(|e| Error::Config { field: "config".into(), message: e.to_string() })
}

/// Parse config text and also return any sweep request it carries.
pub fn parse_with_sweep(text: &str) -> Result<(SolverConfig, Option<SweepSpec>)> {
    let file = parse_config_file(text)?;
    let cfg = file.solver_config()?;
    Ok((cfg, file.sweep))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config { field: name.into(), message: format!("must be positive, got {v}") })
    }
}

fn check_cfg_positive(name: &str, v: f64) -> Result<()> {
    check_positive(name, v)
}
