//! Numerical laboratory for the fractional conductivity equation
//! `div_s(Θ_γ ∇^s u) = 0` posed with exterior data.
//!
//! The crate discretises the nonlocal forms on a periodic box, solves the
//! exterior value problems for the conductivity and the Liouville-transformed
//! Schrödinger equation, assembles exterior Dirichlet-to-Neumann matrices,
//! and runs experiments probing stability and instability of the inverse
//! problem.
//!
//! Module map:
//!
//! - [`nonlocal`]: fractional Laplacian (spectral and corrected quadrature),
//!   the bilinear form `B_γ`, `H^s` Gram matrices.
//! - [`conductivity`]: conductivities, background deviation, Liouville
//!   potential, admissibility checks, grid files.
//! - [`mandache`]: lattice-bump families of ε-separated conductivities.
//! - [`solver`]: Galerkin solves of the exterior problems.
//! - [`dn`]: exterior bases, DN matrices, dual operator norms, caching.
//! - [`experiments`]: identity residuals and the four stability suites.
//! - [`harness`]: configuration, orchestration, reports and plots.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```text
//! cargo run --release -p fracstab --example operator_oracles
//! cargo run --release -p fracstab --example liouville_reduction
//! cargo run --release -p fracstab --example forward_solve
//! cargo run --release -p fracstab --example dn_maps
//! cargo run --release -p fracstab --example exterior_stability
//! cargo run --release -p fracstab --example log_modulus
//! cargo run --release -p fracstab --example reduction_check
//! cargo run --release -p fracstab --example instability
//! cargo run --release -p fracstab --example run_config
//! ```

pub mod conductivity;
pub mod dn;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod geometry;
pub mod harness;
pub mod mandache;
pub mod nonlocal;
pub mod rng;
pub mod solver;
pub mod special;
pub mod stats;

pub use conductivity::{Conductivity, Potential};
pub use dn::{DnMatrix, ExteriorBasis};
pub use error::{Error, Result};
pub use geometry::{GeometryConfig, Grid, GridField};
pub use nonlocal::{FracOperator, Mode, Stencil};
