use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TodaError {
    #[error("grid size {0} invalid: need an even power of two >= 32")]
    InvalidGrid(usize),
    #[error("fields live on different grids ({0} vs {1})")]
    GridMismatch(usize, usize),
    #[error("non-finite value in input field")]
    NonFinite,
    #[error("points too close: separation {0:.3e}")]
    NearCoincident(f64),
    #[error("prescribed function has no positive node")]
    EmptyPositiveSet,
    #[error("infeasible state: I1 = {0:.6e}, I2 = {1:.6e}")]
    InfeasibleState(f64, f64),
    #[error("state not on constraint: I1 = {0:.12e}, I2 = {1:.12e}")]
    NotOnConstraint(f64, f64),
    #[error("no constant shift makes the initial state feasible")]
    InitInfeasible,
    #[error("balls of radius {0} overlap")]
    BallOverlap(f64),
    #[error("h at the peak is {0:.3e} <= 0")]
    NegativeHeightDensity(f64),
    #[error("test function infeasible for component {0}: integral {1:.3e}")]
    InfeasibleTestFunction(usize, f64),
    #[error("expansion fit ill-conditioned (condition number {0:.3e})")]
    IllConditionedFit(f64),
    #[error("blow-up tails inconclusive: {0}")]
    Inconclusive(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, TodaError>;
