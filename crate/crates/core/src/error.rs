use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient strikes: {found} distinct strike(s) after filtering, need at least {required}")]
    InsufficientStrikes { found: usize, required: usize },

    #[error("rate gap: no rate observation covers {0}")]
    RateGap(NaiveDate),

    #[error("maturity too short: {days} calendar day(s) to expiry, need more than {min}")]
    MaturityTooShort { days: i64, min: i64 },

    #[error("missing spot price for {0}")]
    MissingSpot(NaiveDate),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("infeasible heights: implied tail height {0:e} is negative")]
    InfeasibleHeights(f64),

    #[error("solver stalled after {iterations} iterations (kkt residual {kkt_residual:e}, objective {objective:e})")]
    SolverStalled {
        iterations: usize,
        kkt_residual: f64,
        objective: f64,
    },

    #[error("zero-price weight: WLS weighting needs a positive market price (strike {strike})")]
    ZeroPriceWeight { strike: f64 },

    #[error("no test options")]
    NoTestOptions,

    #[error("zero-price metric: relative error needs a positive market price")]
    ZeroPriceMetric,

    #[error("bootstrap unstable: {failed} of {total} resample fits failed")]
    BootstrapUnstable { failed: usize, total: usize },

    #[error("extrapolation refused: day {requested} lies beyond the last pillar ({last})")]
    ExtrapolationRefused { requested: f64, last: f64 },

    #[error("moment inversion: negative variance {variance:e} at pillar day {day}")]
    MomentInversion { day: f64, variance: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
