//! Lower-dimensional KAM tori: Fourier-Taylor algebra, homological solves,
//! the KAM step and iteration, small-divisor sets and numerical verification.

pub mod divisors;
pub mod engine;
pub mod error;
pub mod homological;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod scenarios;
pub mod series;
pub mod verifier;

pub use error::{KamError, ModelError, SeriesError, SolveError, VerifyError};
pub use series::{Dims, FtSeries, MultiIndex, NormWeights, Var};
