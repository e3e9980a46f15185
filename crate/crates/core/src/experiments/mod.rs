//! Experiment suites probing the stability and instability statements at
//! desk scale, plus the identity residuals that validate the discretisation.
//!
//! Every suite works against a [`Lab`]: a validated geometry, its stencil
//! and one exterior basis in which all DN matrices and norms are taken.

pub mod exterior;
pub mod identities;
pub mod instability;
pub mod modulus;
pub mod operator;
pub mod presets;
pub mod reduction;

use crate::conductivity::{AdmissibilityThresholds, Conductivity, Potential};
use std::path::PathBuf;

use crate::dn::{
    assemble_dn, build_exterior_basis, cache_dn, dn_cache_key, dn_operator_norm, load_dn, BasisKind, DnMatrix,
    ExteriorBasis,
};
use crate::error::Result;
use crate::geometry::GeometryConfig;
use crate::nonlocal::{FracOperator, Stencil};
use crate::solver::CoefficientRef;

/// Relative tolerance of the forward solves used by the suites.
pub const SOLVE_TOL: f64 = 1e-8;

static TMP_COUNTER: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);

pub struct Lab {
    pub geometry: GeometryConfig,
    pub stencil: Stencil,
    pub basis: ExteriorBasis,
    pub tol: f64,
    /// Stand-ins for the a priori constants in admissibility checks.
    pub thresholds: AdmissibilityThresholds,
    /// Directory of content-addressed DN blobs, if caching is on.
    pub cache: Option<PathBuf>,
}

impl Lab {
    pub fn new(geometry: GeometryConfig, op: FracOperator, kind: BasisKind, size: usize, region: &str) -> Result<Lab> {
        geometry.validate()?;
        let stencil = Stencil::new(geometry.grid(), op);
        let basis = build_exterior_basis(&geometry, region, size, kind)?;
        Ok(Lab { geometry, stencil, basis, tol: SOLVE_TOL, thresholds: AdmissibilityThresholds::default(), cache: None })
    }

    /// Same geometry and stencil with another basis.
    pub fn with_basis(&self, basis: ExteriorBasis) -> Lab {
        Lab {
            geometry: self.geometry.clone(),
            stencil: self.stencil.clone(),
            basis,
            tol: self.tol,
            thresholds: self.thresholds,
            cache: self.cache.clone(),
        }
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Lab {
        self.cache = Some(dir.into());
        self
    }

    /// Assembles a DN matrix, reading and filling the cache when one is set.
    /// An unreadable or stale blob is recomputed and overwritten.
    pub fn dn(&self, coefficient: CoefficientRef<'_>) -> Result<DnMatrix> {
        let Some(dir) = &self.cache else {
            return assemble_dn(&self.geometry, &self.stencil, coefficient, &self.basis, self.tol);
        };
        let key = dn_cache_key(&self.geometry, &self.stencil, coefficient, &self.basis, self.tol);
        let path = dir.join(format!("{key}.dn"));
        if let Ok(m) = load_dn(&path, &self.geometry.hash()) {
            return Ok(m);
        }
        let m = assemble_dn(&self.geometry, &self.stencil, coefficient, &self.basis, self.tol)?;
        std::fs::create_dir_all(dir)?;
        // write-then-rename so parallel workers never read a partial blob
        let n = TMP_COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let tmp = dir.join(format!("{key}.{}-{n}.tmp", std::process::id()));
        cache_dn(&tmp, &m)?;
        std::fs::rename(&tmp, &path)?;
        Ok(m)
    }

    pub fn dn_conductivity(&self, gamma: &Conductivity) -> Result<DnMatrix> {
        self.dn(CoefficientRef::Conductivity(gamma))
    }

    pub fn dn_potential(&self, q: &Potential) -> Result<DnMatrix> {
        self.dn(CoefficientRef::Potential(q))
    }

    pub fn norm(&self, m: &DnMatrix) -> Result<f64> {
        dn_operator_norm(m, &self.basis)
    }

    /// `‖M_a - M_b‖_*`.
    pub fn gap(&self, a: &DnMatrix, b: &DnMatrix) -> Result<f64> {
        self.norm(&a.difference(b)?)
    }
}
