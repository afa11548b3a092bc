//! Real symmetric banded Wigner ensembles.
//!
//! The crate samples `N x N` symmetric matrices whose entries are i.i.d. with
//! moments `(0, 1, 0, 3)` inside the band `|i - j| < b` and zero outside, and
//! measures how their spectra and eigenvectors depend on the bandwidth `b`:
//!
//! * [`ensemble`] draws banded matrices, strictly lower-triangular coupling
//!   blocks and the block-diagonal "ball and chain" composite.
//! * [`exact`] evaluates the closed-form second and fourth trace moments,
//!   the normalized fourth moment `m4(N, b)` and the critical bandwidths where
//!   its `b`-derivative vanishes.
//! * [`spectral`] holds the linear-algebra kernels: banded products, even
//!   trace powers, a dense symmetric eigensolver and the normalized moment
//!   estimator.
//! * [`eigenstats`] computes inverse participation ratios, the `Y(Q)`
//!   boundary statistic and eigenvalue perturbation checks.
//! * [`montecarlo`] runs seeded trials in parallel with results that do not
//!   depend on the worker count.

pub mod eigenstats;
pub mod ensemble;
pub mod error;
pub mod exact;
pub mod matrix;
pub mod montecarlo;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
