//! Exact arithmetic for the circle method applied to quadratic forms over
//! `F_q[t]`, for an odd prime `q`.
//!
//! The crate is layered bottom up:
//!
//! * [`basefield`]: the prime field, its characters and exact cyclotomic values.
//! * [`polyring`]: polynomials over `F_q`, residue rings, factorization.
//! * [`laurent`]: truncated Laurent series in `1/t` (the completion `K_∞`).
//! * [`quadform`]: quadratic forms, diagonalization and anisotropic cones.
//! * [`tintegral`]: exact integrals of locally constant functions on `K_∞^d`.
//! * [`expsums`]: the complete exponential sums `S_{g,r}(c)`.
//! * [`densities`]: local densities and the singular series.
//! * [`circle`]: the weighted count, the delta-method assembly and the solver.
//! * [`morgenstern`]: quaternion Cayley graphs and their diameters.

pub mod basefield;
pub mod circle;
pub mod densities;
pub mod error;
pub mod expsums;
pub mod laurent;
pub mod morgenstern;
pub mod polyring;
pub mod quadform;
pub mod tintegral;

pub use basefield::{Fq, ScaledCyclotomic, ZetaSum};
pub use error::{Error, Result};
pub use laurent::TruncLaurent;
pub use polyring::{Poly, ResidueRing};
pub use quadform::QuadForm;

/// Largest number of residue points an enumeration may visit before it is
/// refused with a cost estimate.
pub const DEFAULT_FEASIBILITY_CAP: u128 = 100_000_000;
