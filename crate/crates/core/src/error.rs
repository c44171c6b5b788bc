use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("profile construction failed: {condition} violated at x3 = {at}")]
    Construction { condition: &'static str, at: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("Lambda^-s norm undefined for kappa = 0")]
    UndefinedNorm,
    #[error("rho' changes sign (min {min}, max {max}); strict evaluation refuses the profile")]
    Sign { min: f64, max: f64 },
    #[error("profile violates the stabilizing condition inf |rho'| > 0 (|rho'| = {min_abs_slope} at x3 = {at})")]
    CoercivityDomain { min_abs_slope: f64, at: f64 },
    #[error(
        "threshold undefined: {reason}; degenerate profiles with rho' ~ |x3 - x3_0|^(2+tau) give \
         eps_c = infinity (see the degenerate-profile remark in the README)"
    )]
    ThresholdUndefined { reason: &'static str },
    #[error("energy is not coercive: E(r) = {energy} < 0 along the certified direction")]
    NonCoercive { energy: f64, direction: alloc::vec::Vec<f64> },
    #[error("degenerate quotient: zero denominator")]
    DegenerateQuotient,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no sign change of max Re sigma in bracket [{lo}, {hi}] (values {f_lo}, {f_hi})")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no amplitude to fit")]
    NoAmplitude,
}
