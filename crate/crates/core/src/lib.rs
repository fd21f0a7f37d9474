//! Counting integral points on affine complete intersections.
//!
//! The crate is organised bottom-up:
//!
//! - [`poly`]: exact sparse multivariate polynomials over ℤ and their
//!   reductions modulo an integer.
//! - [`ff`]: prime and small extension fields, additive characters and
//!   affine/projective point enumeration.
//! - [`variety`]: point counts, Jacobian-criterion singular loci, dimension
//!   estimation and the searches for good hyperplanes and good primes.
//! - [`counting`]: box counts `N(X, B)`, `N(X, B, m)`, the Hooley–Deligne
//!   residual and the smooth-weight counts.
//! - [`expsum`]: the exponential sums `S₁`, `S₂`, `Σ_q` and the exact Fourier
//!   identities built from them.
//! - [`vdc`]: the mod-`pq` differencing argument as a self-checking audit,
//!   prime selection and the strata census.
//! - [`harness`]: experiment configs, instance generation, exponent fits,
//!   reports and the CLI driver.

pub mod counting;
pub mod error;
pub mod expsum;
pub mod ff;
pub mod harness;
pub mod poly;
pub mod util;
pub mod variety;
pub mod vdc;

pub use error::{Error, Result};

/// Default cap on the number of points any single enumeration may visit.
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;
