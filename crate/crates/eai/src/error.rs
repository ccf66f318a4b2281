use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum EaiError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("dipoles {first} and {second} coincide (separation {distance:e} mm)")]
    CoincidentDipoles {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("probe {probe} coincides with dipole {dipole}")]
    ProbeOnDipole { probe: usize, dipole: usize },

    #[error("Green's dyadic is singular at zero separation")]
    ZeroSeparation,

    #[error("Clausius-Mossotti denominator vanishes (|1 + n(eps_r - 1)| = {magnitude:e})")]
    SingularShape { magnitude: f64 },

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("matrix dimensions do not conform: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("phase grid is not uniform over [0, 2pi): {0}")]
    NonUniformPhaseGrid(String),

    #[error("visibility undefined: H[{n},{n}] + H[{m},{m}] = {sum:e} is not positive")]
    DegenerateVisibility { n: usize, m: usize, sum: f64 },

    #[error("index {index} out of range for {len} probes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, EaiError>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> EaiError {
    EaiError::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}
