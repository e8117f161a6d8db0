//! Phaseless inverse scattering for the one-dimensional Schrodinger equation
//! `-psi'' + v(x) psi = k^2 psi` with a real potential supported in `x >= 0`.
//!
//! The crate covers the whole chain: forward simulation of the scattering
//! solution, synthesis of intensity-only measurements taken to the left of the
//! potential, explicit recovery of the complex reflection coefficient from
//! those measurements, and reconstruction of the potential from the recovered
//! coefficient through the Marchenko integral equation.

pub mod error;
pub mod forward;
pub mod grid;
pub mod inversion;
pub mod io;
pub mod ode;
pub mod phaseless;
pub mod pipeline;
pub mod potential;
mod quad;
pub mod recovery;
pub mod selftest;

pub use error::{Error, Result};
pub use forward::{ForwardOptions, ForwardSolver, ScatteringCoefficients, Wavenumber};
pub use grid::{KGrid, XGrid};
pub use inversion::{InversionOptions, ReconstructedPotential, ReflectionTable, Taper};
pub use phaseless::{DerivativeMode, Method, NoiseModel, PhaselessDataset};
pub use potential::{PotentialKind, PotentialSpec, Segment};
pub use recovery::{RecoveryOptions, RecoveryResult};
