//! Junta approximation, learning and testing for submodular, XOS and
//! self-bounding set functions on the Boolean hypercube.
//!
//! The crate is organized around an evaluatable [`setfn::SetFunction`]
//! oracle. On top of it sit:
//!
//! - [`boolfour`] — exact Walsh/Fourier analysis for small dimensions:
//!   spectra, influences, projections, distances and Friedgut-style
//!   coordinate sets.
//! - [`estim`] — seeded randomized primitives: point sampling under
//!   product distributions, biased subset sampling and Monte-Carlo
//!   estimation of means, Fourier coefficients and the multilinear
//!   extension.
//! - [`junta`] — the variable-selection procedures (additive,
//!   multiplicative and product-distribution criteria) plus the
//!   iteration drivers returning [`junta::JuntaModel`]s.
//! - [`detect`] — influential-variable detection from random examples
//!   via degree-1/2 coefficient thresholding.
//! - [`lpcore`] — linear programs for l1 minimization (proper learning
//!   over a subcube, spectral-l1-constrained regression) and a dense
//!   simplex solver with Bland's rule.
//! - [`learn`] — end-to-end learners: proper PAC, recursive PMAC,
//!   low-influence regression and agnostic l1 learning.
//! - [`verify`] — property suites for the provable inequalities, the
//!   lower-bound experiments and the two submodularity testers.
//! - [`corpus`] — the built-in instance corpus the suites run on.
//!
//! All exhaustive routines are capped per operation; randomized ones
//! take an explicit [`estim::RngStream`] so every run replays
//! bit-identically from a seed.

pub mod boolfour;
pub mod corpus;
pub mod detect;
pub mod estim;
pub mod junta;
pub mod learn;
pub mod lpcore;
pub mod setfn;
pub mod verify;

/// Absolute tolerance for floating comparisons. All built-in families
/// produce dyadic-rational values, so exact checks are robust at this
/// tolerance.
pub const TOL: f64 = 1e-9;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension {n} exceeds cap {cap} for {op}")]
    DimensionTooLarge { op: &'static str, n: usize, cap: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("variable index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("malformed family parameters: {0}")]
    BadFamilyParams(String),
    #[error("operation requires a function flagged {0}")]
    FlagRequired(&'static str),
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("insufficient samples: need {required}, got {got}")]
    InsufficientSamples { required: usize, got: usize },
    #[error("selection cap {cap} exceeded while scanning variables")]
    SelectionCapExceeded { cap: usize },
    #[error("function values are not on the 1/{k} grid at point {mask:#b}")]
    ValuesOffGrid { k: usize, mask: u64 },
    #[error("linear program error: {0}")]
    Lp(String),
    #[error("family is not down-monotone (witness mask {0:#b})")]
    NotDownMonotone(u64),
    #[error("configuration cap exceeded: {0}")]
    ConfigCap(String),
    #[error("example filtering exhausted {attempts} attempts")]
    FilterExhausted { attempts: usize },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
