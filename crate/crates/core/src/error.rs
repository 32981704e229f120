use thiserror::Error;

/// Errors raised by code construction, encoding, decoding and the simulation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("extension degree m={0} outside 1..=8")]
    InvalidDegree(u32),
    #[error("polynomial {poly:#x} is not a primitive polynomial of degree {m}")]
    NotPrimitive { m: u32, poly: u32 },
    #[error("field element {value} out of range for q={q}")]
    ElementOutOfRange { value: u32, q: usize },
    #[error("division by zero in GF(q)")]
    DivisionByZero,
    #[error("scalar permutation by zero is not a bijection")]
    ZeroScalar,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("probability vector vanished (numerical underflow)")]
    Underflow,
    #[error("tail-biting recursion is singular: product of feedback coefficients equals 1")]
    SingularTailBiting,
    #[error("mapping is not a permutation of 0..{0}")]
    NotPermutation(usize),
    #[error("relative-prime interleaver needs gcd(p, K) = 1 (p={p}, K={k})")]
    NotCoprime { p: usize, k: usize },
    #[error("column {col} has weight {weight}, cycle graphs need weight 2")]
    ColumnWeight { col: usize, weight: usize },
    #[error("invalid code spec: {0}")]
    InvalidSpec(String),
    #[error("rate {num}/{den} is not reachable: {reason}")]
    UnreachableRate { num: u32, den: u32, reason: String },
    #[error("coefficient selection failed after {0} attempts")]
    CoefficientSelection(usize),
    #[error("matrix entry ({row}, {col}) is duplicated or zero")]
    BadEntry { row: usize, col: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
