use alloc::string::String;

/// Errors raised by exact computations in this crate.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("{0} is not an odd prime")]
    InvalidPrime(u64),
    #[error("tower depth must be at least 1, got {0}")]
    InvalidDepth(u32),
    #[error("tower too shallow: need p-power depth {needed}, tower has {available}")]
    TowerTooShallow { needed: u32, available: u32 },
    #[error("towers over different primes ({0} and {1})")]
    PrimeMismatch(u32, u32),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{value} is not a unit modulo {modulus}")]
    NotAUnit { value: String, modulus: u64 },
    #[error("twist parameter must be non-zero")]
    ZeroTwist,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not symplectic")]
    NotSymplectic,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid cell (j = {j}, k = {k}): need j <= k")]
    InvalidCell { j: i64, k: i64 },
    #[error("cell with {entries} entries exceeds the limit of {limit}")]
    CellOverflow { entries: u128, limit: u128 },
    #[error("cell of width {width} needs Galois level {width}, only {available} available")]
    CellTooWide { width: i64, available: u32 },
    #[error("modular precision exceeded (p^{exponent} does not fit in 62 bits)")]
    PrecisionOverflow { exponent: u32 },
    #[error("integration bound not stable: {0}")]
    BoundNotStable(String),
    #[error("projective multiplier inconsistent across probes")]
    InconsistentMultiplier,
    #[error("every probe is annihilated")]
    AllProbesAnnihilated,
    #[error("Galois element with exponent {exponent} is not in {group}")]
    NotInSubgroup { exponent: u64, group: String },
    #[error("norm equation search exhausted (exponent bound {bound}, {classes} norm classes)")]
    NormSearchExhausted { bound: u32, classes: usize },
    #[error("averaged operator is singular on orbit type {0} for every seed candidate")]
    NoSplittingSeed(u32),
    #[error("averaged operator is singular on cells of width {0}")]
    SingularSplitting(u32),
    #[error("operator has no formal inverse: {0}")]
    NoFormalInverse(String),
    #[error("unknown subfield tag '{0}'")]
    UnknownSubfield(String),
}

pub type Result<T> = core::result::Result<T, Error>;
