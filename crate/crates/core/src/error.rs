use thiserror::Error;

/// Errors surfaced by mechanism validation, quadrature and simulation.
#[derive(Debug, Clone, Error)]
pub enum CbmError {
    /// A mechanism failed its admissibility invariants at construction.
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    /// The pair violates the standing non-degeneracy assumption
    /// (one of the driving processes has a.s. nondecreasing paths).
    #[error("degenerate mechanism pair: {0}")]
    Degenerate(String),

    /// `psi_inverse` could not bracket the last up-crossing.
    #[error("inverse bracket failure: {0}")]
    BracketFailure(String),

    /// The hypotheses of the first-passage/explosion theorems do not hold;
    /// no formula is available in this parameter regime.
    #[error("theorem condition violated: {0}")]
    ConditionViolated(String),

    /// The branching mechanism is not explosive (or explosivity is required
    /// and fails), so the explosion-time formulas do not apply.
    #[error("explosivity condition fails: {0}")]
    NotExplosive(String),

    /// Adaptive quadrature stopped before reaching the requested tolerance.
    #[error("quadrature did not converge: achieved absolute error bound {achieved:e}")]
    QuadratureAccuracy { achieved: f64 },

    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The classification corollaries do not cover this input; the answer is
    /// not decided by any shipped formula.
    #[error("undecided by available criteria: {0}")]
    Undecided(String),
}

pub type Result<T> = std::result::Result<T, CbmError>;
