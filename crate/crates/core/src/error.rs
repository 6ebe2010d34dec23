use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too coarse: finite-difference ∇f deviates from the analytic value by {deviation:.3e} (tolerance {tolerance:.1e})")]
    GridTooCoarse { deviation: f64, tolerance: f64 },

    #[error("unstable grid: spacing² · max|V| = {value:.3e} exceeds {threshold:.1e}")]
    UnstableGrid { value: f64, threshold: f64 },

    #[error("no radius r ≥ 1 on the grid satisfies λ − q₁ + r^ε > 1 (λ = {lambda})")]
    NotSatisfiable { lambda: f64 },

    #[error("singular shift: pivot {pivot:.3e} at row {row} (z too close to a truncated-domain eigenvalue)")]
    SingularShift { row: usize, pivot: f64 },

    #[error("branch cut: z − q₁ + r^ε = {value} on (−∞, 0] at x = {x} where η_λ > 0")]
    BranchCut { x: f64, value: String },

    #[error("no admissible constants: best minimal Rayleigh quotient {best_min_rayleigh:.3e} below −{tolerance:.1e}")]
    NoAdmissibleConstants {
        best_min_rayleigh: f64,
        tolerance: f64,
    },

    #[error("Γ-extrapolation did not converge: successive differences {differences:?}")]
    NonConvergent { differences: Vec<f64> },

    #[error("radiation boundary rows are ill-conditioned (condition estimate {estimate:.3e})")]
    IllConditioned { estimate: f64 },

    #[error("classically forbidden region at r = {r}: λ − q₁ + r^ε = {value:.3e} ≤ 0")]
    StiffRegion { r: f64, value: f64 },

    #[error("orbit passes within {distance:.3e} of the origin at t = {t}")]
    OriginPassage { t: f64, distance: f64 },

    #[error("growth class undecided: R² exponential {r2_exp:.5}, power {r2_pow:.5}")]
    Undecided { r2_exp: f64, r2_pow: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
