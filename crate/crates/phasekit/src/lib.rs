//! # phasekit
//!
//! Simulation and verification toolkit for continuum Gibbs point processes
//! with saturated interactions.
//!
//! The library is organised around a tile coarse-graining of `R^d`:
//!
//! * [`geometry`] — marked points, configurations, the δ-tiling of `Z^d`,
//!   occupancy spin fields, and Poisson sampling.
//! * [`energy`] — per-tile energies `E_0` with saturation data, the three
//!   concrete continuum models (K-NN Strauss, area interaction, diluted
//!   pairwise) plus a factorizing lattice surrogate, and randomized
//!   assumption checks.
//! * [`contours`] — extraction of contours from spin fields, labels, types,
//!   interiors, classes, dominoes, and enumeration of compatible contour
//!   collections on small volumes.
//! * [`peierls`] — numerical Peierls-condition diagnostics: per-contour
//!   energy gaps, sector geometry, the analytic condition for the diluted
//!   pairwise interaction, and critical-activity windows.
//! * [`sampler`] — birth/death/translation Metropolis–Hastings chains for
//!   the finite-volume measures under free and wired boundary conditions.
//! * [`polymer`] — exact finite-volume engine on the factorizing surrogate:
//!   partition functions, the polymer development identity, truncated
//!   pressures, and bracketing of the critical activity.
//! * [`config`] — plain-text run configuration and CSV/JSON interchange.

pub mod config;
pub mod contours;
pub mod energy;
pub mod geometry;
pub mod peierls;
pub mod polymer;
pub mod quad;
pub mod rng;
pub mod sampler;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value failed validation.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A numerical guarantee the implementation asserts at runtime failed.
    #[error("numerical assertion failed: {0}")]
    Numerical(String),
    /// An enumeration guard (cap) was exceeded.
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),
    /// I/O or parse failure on external files.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
