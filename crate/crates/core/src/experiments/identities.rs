//! Residuals of the Liouville substitution and of the equation satisfied by
//! `m̃ = (m₁ - m₂)/γ₁^{1/2}`.
//!
//! Left-hand sides use the stencil's quadrature form; right-hand sides use
//! the spectral multiplier and pointwise products, so the residuals compare
//! independent code paths.

use serde::{Deserialize, Serialize};

use crate::conductivity::{background_deviation, Conductivity};
use crate::error::Result;
use crate::geometry::{Grid, GridField};
use crate::nonlocal::{bilinear_form, half_laplacian, FracOperator, Stencil};

fn relative(l: f64, r: f64) -> f64 {
    (l - r).abs() / (l.abs() + r.abs() + 1e-300)
}

/// `q = -(-Δ)^s m / γ^{1/2}` through the spectral multiplier.
fn spectral_q(gamma: &Conductivity, s: f64) -> Result<Vec<f64>> {
    let st = Stencil::new(gamma.grid(), FracOperator::spectral(s)?);
    let m = background_deviation(gamma);
    let lm = st.apply(&m.values);
    Ok(lm.iter().zip(gamma.root()).map(|(l, g)| -l / g).collect())
}

/// `|LHS - RHS| / (|LHS| + |RHS|)` for
/// `B_γ(u, φ) = ⟨(-Δ)^{s/2}(γ^{1/2}u), (-Δ)^{s/2}(γ^{1/2}φ)⟩ + ⟨q (γ^{1/2}u), γ^{1/2}φ⟩`.
pub fn liouville_identity_residual(gamma: &Conductivity, u: &GridField, phi: &GridField, stencil: &Stencil) -> Result<f64> {
    let s = stencil.op().s;
    let lhs = bilinear_form(u, phi, gamma.field(), stencil)?;
    let g = gamma.root();
    let gu = GridField::new(u.grid, u.values.iter().zip(g).map(|(a, b)| a * b).collect())?;
    let gphi = GridField::new(phi.grid, phi.values.iter().zip(g).map(|(a, b)| a * b).collect())?;
    let hu = half_laplacian(&gu, s);
    let hphi = half_laplacian(&gphi, s);
    let q = spectral_q(gamma, s)?;
    let vol = u.grid.cell_volume();
    let mut rhs = 0.0;
    for i in 0..q.len() {
        rhs += hu.values[i] * hphi.values[i] + q[i] * gu.values[i] * gphi.values[i];
    }
    Ok(relative(lhs, rhs * vol))
}

/// Ten smooth test fields: Gaussians and modulated Gaussians with centres
/// spread over `[-2.5, 2.5]`.
pub fn test_battery(grid: Grid) -> Vec<GridField> {
    let dim = grid.dim();
    (0..10)
        .map(|k| {
            let c = -2.5 + 5.0 * k as f64 / 9.0;
            let w = 0.4 + 0.1 * (k % 4) as f64;
            let freq = (k % 3) as f64;
            grid.sample(move |p| {
                let d2 = (p[0] - c).powi(2) + if dim == 2 { (p[1] + 0.3 * c).powi(2) } else { 0.0 };
                (-d2 / (w * w)).exp() * (freq * p[0]).cos()
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MtildeResidual {
    pub residual: f64,
    /// `(B_{γ₁}(m̃, φ), ⟨γ₁^{1/2}γ₂^{1/2}(q₂ - q₁), φ⟩)` per test field.
    pub sides: Vec<(f64, f64)>,
}

/// Weak-form residual of `div_s(Θ_{γ₁}∇^s m̃) = γ₁^{1/2}γ₂^{1/2}(q₂ - q₁)`,
/// maximised over [`test_battery`] and normalised by the largest side.
pub fn mtilde_equation_residual(g1: &Conductivity, g2: &Conductivity, stencil: &Stencil) -> Result<MtildeResidual> {
    g1.grid().ensure_same(&g2.grid())?;
    let grid = g1.grid();
    let s = stencil.op().s;
    let r1 = g1.root();
    let r2 = g2.root();
    let mt = GridField::new(grid, r1.iter().zip(r2).map(|(a, b)| (a - b) / a).collect())?;
    let q1 = spectral_q(g1, s)?;
    let q2 = spectral_q(g2, s)?;
    let source: Vec<f64> = (0..grid.len()).map(|i| r1[i] * r2[i] * (q2[i] - q1[i])).collect();
    let vol = grid.cell_volume();
    let mut sides = Vec::with_capacity(10);
    for phi in test_battery(grid) {
        let l = bilinear_form(&mt, &phi, g1.field(), stencil)?;
        let r = source.iter().zip(&phi.values).map(|(a, b)| a * b).sum::<f64>() * vol;
        sides.push((l, r));
    }
    let diff = sides.iter().fold(0.0f64, |m, (l, r)| m.max((l - r).abs()));
    let scale = sides.iter().fold(0.0f64, |m, (l, r)| m.max(l.abs() + r.abs()));
    Ok(MtildeResidual { residual: if scale > 0.0 { diff / scale } else { 0.0 }, sides })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::unit_bump;

    fn setup(n: usize) -> (Grid, Stencil) {
        let grid = Grid::new(1, 8.0, n).unwrap();
        (grid, Stencil::new(grid, FracOperator::quadrature(0.4).unwrap()))
    }

    fn bump_gamma(grid: Grid) -> Conductivity {
        Conductivity::new(grid.sample(|p| 1.0 + 0.5 * unit_bump((p[0] - 0.1) / 0.7)), 0.5).unwrap()
    }

    #[test]
    fn unit_and_constant_conductivities() {
        let (grid, st) = setup(1024);
        let u = grid.sample(|p| (-(p[0] - 0.3).powi(2)).exp());
        let phi = grid.sample(|p| (-(p[0] + 0.2).powi(2) / 0.8).exp());
        let one = Conductivity::unit(grid);
        assert!(liouville_identity_residual(&one, &u, &phi, &st).unwrap() <= 1e-8);
        let c = Conductivity::new(grid.constant(2.5), 0.3).unwrap();
        assert!(liouville_identity_residual(&c, &u, &phi, &st).unwrap() <= 1e-8);
    }

    #[test]
    fn bump_conductivity_converges() {
        let mut prev = f64::INFINITY;
        for n in [512, 1024] {
            let (grid, st) = setup(n);
            let u = grid.sample(|p| (-(p[0] - 0.3).powi(2) / 0.5).exp());
            let phi = grid.sample(|p| (-(p[0] + 0.2).powi(2) / 0.8).exp());
            let r = liouville_identity_residual(&bump_gamma(grid), &u, &phi, &st).unwrap();
            assert!(r <= 1e-6 && r < prev, "{n}: {r}");
            prev = r;
        }
    }

    #[test]
    fn mtilde_residuals() {
        let (grid, st) = setup(1024);
        let g1 = bump_gamma(grid);
        let same = mtilde_equation_residual(&g1, &g1, &st).unwrap();
        assert_eq!(same.residual, 0.0);
        let one = Conductivity::unit(grid);
        let r = mtilde_equation_residual(&g1, &one, &st).unwrap();
        assert!(r.residual <= 1e-5, "{}", r.residual);
        let swapped = mtilde_equation_residual(&one, &g1, &st).unwrap();
        assert!(swapped.residual <= 1e-5, "{}", swapped.residual);
    }
}
