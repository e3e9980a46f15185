//! Galerkin solution of the exterior value problems
//!
//! ```text
//! div_s(Θ_γ ∇^s u) = 0 in Ω,   u = f in Ω_e
//! (-Δ)^s v + q v = 0   in Ω,   v = g in Ω_e
//! ```
//!
//! The trial space is the span of nodal indicators at grid points strictly
//! inside Ω. Writing `u = f̄ + w` with `f̄` the zero extension of the datum,
//! the interior unknowns solve `L_II w = -(L f̄)_I` where `L` is the full
//! discrete operator of the form. Both forms are symmetric and coercive on
//! the interior space, so the interior matrix is factored by Cholesky.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rayon::prelude::*;

use crate::conductivity::{Conductivity, Potential};
use crate::error::{input, Error, Result};
use crate::geometry::{GeometryConfig, GridField};
use crate::nonlocal::Stencil;

const REFINEMENT_STEPS: usize = 2;

/// Exterior Dirichlet datum: vanishes at every grid point of the closure of Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorDatum {
    field: GridField,
}

impl ExteriorDatum {
    pub fn new(field: GridField, geometry: &GeometryConfig) -> Result<Self> {
        field.grid.ensure_same(&geometry.grid())?;
        let grid = field.grid;
        for (i, v) in field.values.iter().enumerate() {
            if !v.is_finite() {
                return input(format!("non-finite datum sample at index {i}"));
            }
            if *v != 0.0 && geometry.omega.closure_contains(grid.point(i)) {
                return input(format!("exterior datum is nonzero at index {i} inside the closed domain"));
            }
        }
        Ok(ExteriorDatum { field })
    }

    /// Samples `f` and zeroes the closure of Ω.
    pub fn sample(geometry: &GeometryConfig, f: impl Fn([f64; 2]) -> f64) -> Self {
        let grid = geometry.grid();
        let field = grid.sample(|p| if geometry.omega.closure_contains(p) { 0.0 } else { f(p) });
        ExteriorDatum { field }
    }

    pub fn field(&self) -> &GridField {
        &self.field
    }

    pub fn into_field(self) -> GridField {
        self.field
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: GridField,
    /// Normwise backward error `‖(L u)_I‖ / (‖L_II‖_∞ ‖u_I‖ + ‖(L f̄)_I‖)`.
    pub residual: f64,
    /// `B(u, u)`.
    pub energy: f64,
}

#[derive(Debug, Clone)]
enum Coefficient {
    Root(Vec<f64>),
    Potential(Vec<f64>),
}

/// Discrete operator of one exterior problem with its factored interior
/// block.
#[derive(Debug, Clone)]
pub struct ForwardProblem<'a> {
    stencil: &'a Stencil,
    coefficient: Coefficient,
    /// `W * γ^{1/2}` for the conductivity form.
    smoothed: Vec<f64>,
    interior: Vec<usize>,
    interior_mask: Vec<bool>,
    matrix: DMatrix<f64>,
    matrix_norm: f64,
    factor: Cholesky<f64, Dyn>,
}

impl<'a> ForwardProblem<'a> {
    pub fn conductivity(geometry: &GeometryConfig, stencil: &'a Stencil, gamma: &Conductivity) -> Result<Self> {
        gamma.grid().ensure_same(stencil.grid())?;
        let root = gamma.root().to_vec();
        let smoothed = stencil.convolve(&root);
        Self::build(geometry, stencil, Coefficient::Root(root), smoothed)
    }

    pub fn schrodinger(geometry: &GeometryConfig, stencil: &'a Stencil, q: &Potential) -> Result<Self> {
        q.field.grid.ensure_same(stencil.grid())?;
        if q.values().iter().any(|v| !v.is_finite()) {
            return input("non-finite potential");
        }
        Self::build(geometry, stencil, Coefficient::Potential(q.values().to_vec()), Vec::new())
    }

    fn build(
        geometry: &GeometryConfig,
        stencil: &'a Stencil,
        coefficient: Coefficient,
        smoothed: Vec<f64>,
    ) -> Result<Self> {
        stencil.grid().ensure_same(&geometry.grid())?;
        let interior = geometry.interior_indices();
        let interior_mask = geometry.interior_mask();
        let k = interior.len();
        let diag = stencil.diagonal();
        let rows: Vec<Vec<f64>> = interior
            .par_iter()
            .map(|&a| {
                interior
                    .iter()
                    .map(|&b| {
                        let off = if a == b { 0.0 } else { -stencil.weight_between(a, b) };
                        match &coefficient {
                            Coefficient::Root(g) => {
                                let d = if a == b { g[a] * smoothed[a] } else { 0.0 };
                                d + g[a] * off * g[b]
                            }
                            Coefficient::Potential(q) => {
                                let d = if a == b { diag + q[a] } else { 0.0 };
                                d + off
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        let matrix = DMatrix::from_fn(k, k, |i, j| rows[i][j]);
        let matrix_norm = rows.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let factor = Cholesky::new(matrix.clone()).ok_or_else(|| {
            Error::Solver("interior matrix is not positive definite (coefficient is not coercive)".into())
        })?;
        Ok(ForwardProblem { stencil, coefficient, smoothed, interior, interior_mask, matrix, matrix_norm, factor })
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Interior block `L_II` (unscaled by the cell volume).
    pub fn interior_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Full operator `L v` on the periodic grid.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.coefficient {
            Coefficient::Root(g) => {
                let gv: Vec<f64> = g.iter().zip(v).map(|(a, b)| a * b).collect();
                let wgv = self.stencil.convolve(&gv);
                (0..v.len()).map(|i| g[i] * (self.smoothed[i] * v[i] - wgv[i])).collect()
            }
            Coefficient::Potential(q) => {
                let mut out = self.stencil.apply(v);
                for i in 0..out.len() {
                    out[i] += q[i] * v[i];
                }
                out
            }
        }
    }

    /// `B(u, v) = h^n vᵀ L u`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        let lu = self.apply(u);
        lu.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * self.stencil.grid().cell_volume()
    }

    pub fn solve(&self, datum: &ExteriorDatum, tol: f64) -> Result<Solution> {
        datum.field.grid.ensure_same(self.stencil.grid())?;
        let f = &datum.field.values;
        let lf = self.apply(f);
        let b = DVector::from_iterator(self.interior.len(), self.interior.iter().map(|&i| -lf[i]));
        let w = self.factor.solve(&b);
        let mut u = f.clone();
        for (k, &i) in self.interior.iter().enumerate() {
            u[i] = w[k];
        }
        let mut lu = self.apply(&u);
        let mut r: f64 = self.interior.iter().map(|&i| lu[i] * lu[i]).sum::<f64>().sqrt();
        // iterative refinement against the convolution form of the operator
        for _ in 0..REFINEMENT_STEPS {
            let rv = DVector::from_iterator(self.interior.len(), self.interior.iter().map(|&i| -lu[i]));
            let dw = self.factor.solve(&rv);
            let mut trial = u.clone();
            for (k, &i) in self.interior.iter().enumerate() {
                trial[i] += dw[k];
            }
            let lt = self.apply(&trial);
            let rt: f64 = self.interior.iter().map(|&i| lt[i] * lt[i]).sum::<f64>().sqrt();
            if !(rt < r) {
                break;
            }
            (u, lu, r) = (trial, lt, rt);
        }
        let un: f64 = self.interior.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt();
        let scale = self.matrix_norm * un + b.norm();
        let residual = if scale > 0.0 { r / scale } else { r };
        if !(residual <= tol) {
            return Err(Error::Solver(format!("backward error {residual:e} exceeds tolerance {tol:e}")));
        }
        let energy = lu.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() * self.stencil.grid().cell_volume();
        Ok(Solution { u: GridField { grid: datum.field.grid, values: u }, residual, energy })
    }

    /// Solves for every datum; columns run in parallel, results keep input order.
    pub fn solve_many(&self, data: &[ExteriorDatum], tol: f64) -> Result<Vec<Solution>> {
        data.par_iter()
            .enumerate()
            .map(|(column, d)| self.solve(d, tol).map_err(|e| Error::Column { column, source: Box::new(e) }))
            .collect()
    }

    /// Smallest eigenvalue of `L_II`, a discrete proxy for the first
    /// Dirichlet eigenvalue of the form on Ω.
    pub fn smallest_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.interior_mask[idx]
    }
}

pub fn solve_conductivity(
    geometry: &GeometryConfig,
    stencil: &Stencil,
    gamma: &Conductivity,
    f: &ExteriorDatum,
    tol: f64,
) -> Result<Solution> {
    ForwardProblem::conductivity(geometry, stencil, gamma)?.solve(f, tol)
}

pub fn solve_schrodinger(
    geometry: &GeometryConfig,
    stencil: &Stencil,
    q: &Potential,
    f: &ExteriorDatum,
    tol: f64,
) -> Result<Solution> {
    ForwardProblem::schrodinger(geometry, stencil, q)?.solve(f, tol)
}

/// Which equation a coercivity or DN computation refers to.
#[derive(Debug, Clone, Copy)]
pub enum CoefficientRef<'c> {
    Conductivity(&'c Conductivity),
    Potential(&'c Potential),
}

/// Smallest eigenvalue of the interior Galerkin matrix. A non-coercive
/// potential yields a nonpositive value rather than an error.
pub fn coercivity_check(geometry: &GeometryConfig, stencil: &Stencil, coefficient: CoefficientRef<'_>) -> Result<f64> {
    let problem = match coefficient {
        CoefficientRef::Conductivity(g) => ForwardProblem::conductivity(geometry, stencil, g),
        CoefficientRef::Potential(q) => ForwardProblem::schrodinger(geometry, stencil, q),
    };
    match problem {
        Ok(p) => Ok(p.smallest_eigenvalue()),
        Err(Error::Solver(_)) => {
            // Assemble without factoring to report the offending eigenvalue.
            let CoefficientRef::Potential(q) = coefficient else {
                return Err(Error::Solver("conductivity form is not coercive".into()));
            };
            let interior = geometry.interior_indices();
            let diag = stencil.diagonal();
            let k = interior.len();
            let m = DMatrix::from_fn(k, k, |i, j| {
                let (a, b) = (interior[i], interior[j]);
                if a == b {
                    diag + q.values()[a]
                } else {
                    -stencil.weight_between(a, b)
                }
            });
            Ok(SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
        }
        Err(e) => Err(e),
    }
}
