//! Discrepancy of torus sequences, exponent search into target boxes, and
//! character witnesses for number-field elements.

mod discrepancy;
mod search;
mod witness;

pub use discrepancy::{
    default_c_d, default_resolution, discrepancy, etk_bound, exact_1d, exact_2d, grid_lower_bound,
    Discrepancy, Scalar, TorusSequence,
};
pub use search::{
    exponent_search, integer_relation, verify_hit, Arc, ExponentHit, ExponentOutcome, ExponentQuery,
    TorusBox, DEFAULT_H_CHECK,
};
pub use witness::{check_irreducible, verify_record, witness_search, WitnessRecord, WitnessRun};

use crate::formulas::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EquidistError {
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {index} has a coordinate outside [0, 1)")]
    OutOfRange { index: usize },
    #[error("residue {residue} is not in 1..={modulus}")]
    InvalidResidue { modulus: u64, residue: u64 },
    #[error("angles satisfy the integer relation {alpha:?}")]
    IndependencePrecheckFailed { alpha: Vec<i64> },
    #[error("no witness prime in [{lo}, {hi}]")]
    NoPrimesFound { lo: u64, hi: u64 },
    #[error("minimal polynomial must be monic of positive degree")]
    NotMonic,
    #[error("minimal polynomial has the factor {0}")]
    Reducible(String),
    #[error("minimal polynomial degree {0} exceeds 4")]
    DegreeTooLarge(usize),
}

/// `χ(λ(β)) = e(target)` exactly, together with `r ≡ f (mod R)` for the
/// exponent `r` of `χ`; requires `R | p − 1` and `1 ≤ f ≤ R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnityConstraint {
    pub r: u64,
    pub f: u64,
    pub lambda: Vec<Rational>,
    pub target: Rational,
}

/// Inputs of a witness search. Polynomials in `β` are coefficient lists,
/// lowest degree first; target angles are reduced mod 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessSpec {
    /// Monic, integer coefficients.
    pub min_poly: Vec<i128>,
    pub chi_targets: Vec<(Vec<Rational>, Rational)>,
    pub psi_targets: Vec<(Vec<Rational>, Rational)>,
    pub tolerance: Rational,
    pub unity: Option<UnityConstraint>,
    pub min_order: u64,
    pub primes: Option<(u64, u64)>,
}
