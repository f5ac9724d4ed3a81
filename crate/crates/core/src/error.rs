use thiserror::Error;

/// Errors raised anywhere in the repair pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("insufficient data at maturity {maturity}: need at least 2 strikes with call and put mids, got {found}")]
    InsufficientData { maturity: f64, found: usize },

    #[error("degenerate put-call parity at maturity {maturity}: fitted discount {discount}")]
    DegenerateParity { maturity: f64, discount: f64 },

    #[error("no forward/discount available for maturity {0}")]
    MissingCurve(f64),

    #[error("invalid price {price} at maturity {maturity}, strike {strike}")]
    InvalidPrice { maturity: f64, strike: f64, price: f64 },

    #[error("price {price} outside the open no-arbitrage band ({lower}, {upper}) at moneyness {k}")]
    OutOfBand { k: f64, price: f64, lower: f64, upper: f64 },

    #[error("implied volatility at maturity index {maturity}, node {node}: {source}")]
    NodeVol {
        maturity: usize,
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid k_max {kmax}: must exceed the largest quoted strike {max_strike}")]
    InvalidKmax { kmax: f64, max_strike: f64 },

    #[error("degenerate calibration: no negative difference quotient in the calibration sub-grid")]
    DegenerateCalibration,

    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("duplicate calibration constraint at maturity {maturity}, strike {strike}")]
    DuplicateConstraint { maturity: usize, strike: f64 },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("duplicate strikes in augmented smile at {0}")]
    DuplicateStrike(f64),

    #[error("positivity shift must be > 0, got {0}")]
    InvalidShift(f64),

    #[error("rank-deficient system: {0}")]
    Rank(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("LP too large: {vars} variables exceeds the cap of {cap}; use the entropic solver")]
    LpTooLarge { vars: usize, cap: usize },

    #[error("LP infeasible: {0}")]
    Infeasible(String),

    #[error("LP unbounded")]
    Unbounded,

    #[error("martingale set empty on this grid: k_max too small")]
    KmaxTooSmall,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical instability in constraint {row}: {message}; try a larger epsilon")]
    Instability { row: usize, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
