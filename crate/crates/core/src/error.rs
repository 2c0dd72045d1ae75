//! Error type shared across the library.

/// Everything that can go wrong while building geometry or running scenarios.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The fundamental tensor is numerically singular at a sampled point.
    #[error("degenerate fundamental tensor: |det g| = {det:.3e} at x = {x:?}, y = {y:?}")]
    DegenerateMetric { det: f64, x: Vec<f64>, y: Vec<f64> },

    /// The supporting fiber direction is too close to the null section.
    #[error("fiber direction too close to the null section: |y|^2 = {norm_sq:.3e}")]
    NullSection { norm_sq: f64 },

    /// Immersion differential loses rank at a sampled parameter point.
    #[error("immersion differential is rank-deficient at u = {u:?} (gram det {det:.3e})")]
    RankDeficient { det: f64, u: Vec<f64> },

    /// Mismatched dimensions between user-supplied objects.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A scenario file could not be parsed or is self-inconsistent.
    #[error("scenario: {0}")]
    Scenario(String),

    /// Filesystem trouble while reading scenarios or writing reports.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
