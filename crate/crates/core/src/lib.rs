//! Pseudospectral solver and verification lab for the dissipative nonlocal wave equation
//!
//!   du/dt = -(-Lap)^{1/2} M(u) + d/dx (u^2/2)
//!
//! on the torus [-L, L), where M is the Fourier multiplier with symbol
//! m(xi) = sqrt((1 + xi^2) tanh(xi)/xi), optionally regularized by a hyperviscous
//! term -eps (-Lap)(Id - Lap) u and compared against the classic transport form
//! du/dt = -d/dx (M(u) - u^2/2).
//!
//! The crate provides the spectral grid and transforms, the multiplier and
//! semigroup operators with kernel-decay studies, the norm layer (including the
//! dissipation norm and interpolation checks), a mild-solution fixed-point
//! solver with admissible-horizon bookkeeping, time steppers with energy
//! accounting, and run diagnostics. The `whitham-lab` binary exposes these as
//! `run`, `verify`, `sweep`, `kernel-study`, and `compare` subcommands.

// Validation guards are written as `!(v > 0.0)` on purpose: the negated form
// rejects NaN along with out-of-range values, which `v <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod evolve;
pub mod io;
pub mod norms;
pub mod operators;
pub mod picard;
pub mod spectral;

pub use config::{InitialData, SolverConfig, Variant};
pub use spectral::{Grid, SpectralField};

/// Crate-wide error type. Variants carry enough context to act on: config
/// errors name the offending field, run-time failures carry the time reached.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{name}`: {message}")]
    Param { name: String, message: String },

    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("blow-up detected at t = {t:.6}: non-finite field values")]
    Blowup { t: f64 },

    #[error("resolution lost at t = {t:.6}: spectral tail fraction {fraction:.3e} exceeds {threshold:.1e}")]
    ResolutionLost { t: f64, fraction: f64, threshold: f64 },

    #[error(
        "CFL violation at t = {t:.6}: max|u| * max|xi| * dt = {value:.3e} exceeds limit {limit}"
    )]
    CflViolation { t: f64, value: f64, limit: f64 },

    #[error(
        "kernel under-resolved at tau = {tau:.3e}: relative Nyquist tail {tail:.3e} exceeds 1e-8"
    )]
    KernelUnresolved { tau: f64, tail: f64 },

    #[error("fixed-point constants not admissible: {0}")]
    Inadmissible(String),

    #[error("fixed-point iteration failed to contract: {0}")]
    NotContracting(String),

    #[error("smoothness ladder unresolvable: {0}")]
    LadderUnresolvable(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot format: {0}")]
    SnapshotFormat(String),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
