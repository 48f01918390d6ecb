use thiserror::Error;

/// Errors produced by grid construction, parameter validation and solvers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("n must be power of two (or another even 2-3-smooth size) >= 8, got {0}")]
    BadGridSize(usize),
    #[error("box half-width must be positive, got {0}")]
    BadBoxSize(f64),
    #[error("Lq norm needs q >= 1, got {0}")]
    BadNormExponent(f64),
    #[error("grid mismatch between fields")]
    GridMismatch,
    #[error("direct Poisson sum restricted to n <= {max}, got {n}")]
    GridTooLargeForDirect { n: usize, max: usize },
    #[error("charge density parameters invalid: {0}")]
    BadChargeDensity(String),
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("k below admissible threshold -2(p-2)/(p-1) = {threshold} for p = {p}, got k = {k}")]
    InadmissibleK { k: f64, p: f64, threshold: f64 },
    #[error("Nehari projection not well-posed in this regime (p = {0} <= 3)")]
    NehariIllPosed(f64),
    #[error("seed has trivial positive part")]
    TrivialSeed,
    #[error("scaling factor {t} shrinks the support below {min_cells} cells")]
    DegenerateRescale { t: f64, min_cells: usize },
    #[error("shooting bracket not found for u(0) in ({lo}, {hi})")]
    ShootingBracket { lo: f64, hi: f64 },
    #[error("decay fit shell contains nonpositive values")]
    EmptyDecayShell,
    #[error("sweep needs at least {min} records, got {got}")]
    SweepTooShort { min: usize, got: usize },
    #[error("eps_list needs at least {min} values <= {max_eps}, got {got}")]
    BadEpsList { min: usize, max_eps: f64, got: usize },
    #[error("denominator 2(p-2)+k(p-1) = {0} is not positive")]
    BadTripleDenominator(f64),
}

pub type Result<T> = std::result::Result<T, CoreError>;
