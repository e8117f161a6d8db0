use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("wavenumber must be positive and finite, got {0}")]
    InvalidWavenumber(f64),

    #[error("position x = {0} is outside the measurement region x < 0")]
    OutsideMeasurementRegion(f64),

    #[error("{0}")]
    InvalidConfig(String),

    /// The recovery linear system is singular or nearly so.
    #[error("degenerate configuration: {condition} (|value| = {value:.3e} <= eps_det = {threshold:.1e})")]
    DegenerateConfiguration {
        condition: &'static str,
        value: f64,
        threshold: f64,
    },

    /// Intensity data inconsistent with any reflection coefficient of modulus < 1.
    #[error("non-physical intensity data: radicand {radicand:.3e} is negative")]
    NonPhysicalIntensity { radicand: f64 },

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("Fourier kernel truncation: {0}")]
    Truncation(String),

    #[error("ill-conditioned Marchenko system at x = {x}: {reason}")]
    IllConditioned { x: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
