//! Operator-level oracles: spectral cosines, the closed form for the
//! fractional Laplacian of `(1 - |x|²)_+^s`, and the energy identity
//! `B_1(u, u) = ‖(-Δ)^{s/2} u‖²`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{input, Result};
use crate::geometry::Grid;
use crate::nonlocal::{bilinear_form, frac_laplacian, half_laplacian_energy, FracOperator, Stencil};
use crate::rng::stream;

/// `(-Δ)^s (1 - |x|²)_+^s = 2^{2s} Γ(1+s) Γ(n/2+s) / Γ(n/2)` on the unit ball.
pub fn getoor_constant(n: usize, s: f64) -> f64 {
    let h = n as f64 / 2.0;
    4f64.powf(s) * gamma(1.0 + s) * gamma(h + s) / gamma(h)
}

/// Largest relative error of the spectral operator on `cos(ξ_k x₁)` over
/// the listed wave numbers.
pub fn spectral_cosine_error(grid: Grid, s: f64, wave_numbers: &[usize]) -> Result<f64> {
    let st = Stencil::new(grid, FracOperator::spectral(s)?);
    let pi_l = std::f64::consts::PI / grid.half_width();
    let mut worst: f64 = 0.0;
    for &k in wave_numbers {
        if k == 0 || k >= grid.points() / 2 {
            return input(format!("wave number {k} outside 1..N/2"));
        }
        let xi = pi_l * k as f64;
        let u = grid.sample(|p| (xi * p[0]).cos());
        let lu = frac_laplacian(&u, &st)?;
        let lam = xi.powf(2.0 * s);
        let err = lu.values.iter().zip(&u.values).fold(0.0f64, |m, (a, b)| m.max((a - lam * b).abs()));
        worst = worst.max(err / lam);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GetoorLevel {
    pub points: usize,
    pub values: Vec<f64>,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GetoorCheck {
    pub n: usize,
    pub s: f64,
    pub half_width: f64,
    pub exact: f64,
    pub probe_points: Vec<f64>,
    pub levels: Vec<GetoorLevel>,
    /// Errors nonincreasing along the refinement sequence.
    pub improving: bool,
}

/// Quadrature operator applied to `(1 - x²)_+^s` on `[-L, L)` for each grid
/// size, compared with the closed form at the probe points (grid nodes).
pub fn getoor_check(s: f64, half_width: f64, sizes: &[usize], probes: &[f64]) -> Result<GetoorCheck> {
    let exact = getoor_constant(1, s);
    let mut levels = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let grid = Grid::new(1, half_width, n)?;
        let st = Stencil::new(grid, FracOperator::quadrature(s)?);
        let u = grid.sample(|p| (1.0 - p[0] * p[0]).max(0.0).powf(s));
        let lu = frac_laplacian(&u, &st)?;
        let h = grid.spacing();
        let mut values = Vec::with_capacity(probes.len());
        for &x in probes {
            let idx = ((x + half_width) / h).round() as usize;
            if (grid.point(idx)[0] - x).abs() > 1e-12 || x.abs() >= 1.0 {
                return input(format!("probe {x} is not a grid node inside the unit ball"));
            }
            values.push(lu.values[idx]);
        }
        let max_relative_error = values.iter().fold(0.0f64, |m, v| m.max((v - exact).abs() / exact));
        levels.push(GetoorLevel { points: n, values, max_relative_error });
    }
    let improving = levels.windows(2).all(|w| w[1].max_relative_error <= w[0].max_relative_error);
    Ok(GetoorCheck { n: 1, s, half_width, exact, probe_points: probes.to_vec(), levels, improving })
}

/// Smooth random field: a sum of three Gaussians with random centres,
/// widths and signs inside `|x| < 3`.
pub fn random_smooth_field(grid: Grid, seed: u64, index: u64) -> crate::geometry::GridField {
    let mut rng = stream(seed, index);
    let terms: Vec<([f64; 2], f64, f64)> = (0..3)
        .map(|_| {
            let c = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let w = rng.random_range(0.3..1.0);
            let a = rng.random_range(-1.0..1.0);
            (c, w, a)
        })
        .collect();
    let dim = grid.dim();
    grid.sample(|p| {
        terms
            .iter()
            .map(|(c, w, a)| {
                let d2 = (p[0] - c[0]).powi(2) + if dim == 2 { (p[1] - c[1]).powi(2) } else { 0.0 };
                a * (-d2 / (w * w)).exp()
            })
            .sum()
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnergyCheck {
    /// `(B_1(u,u), ‖(-Δ)^{s/2}u‖²)` per field.
    pub pairs: Vec<(f64, f64)>,
    pub max_relative_error: f64,
}

/// Quadrature form with `γ ≡ 1` against the spectral energy for `count`
/// random smooth fields.
pub fn energy_identity_check(grid: Grid, op: FracOperator, count: usize, seed: u64) -> Result<EnergyCheck> {
    let st = Stencil::new(grid, op);
    let one = grid.constant(1.0);
    let mut pairs = Vec::with_capacity(count);
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let u = random_smooth_field(grid, seed, k as u64);
        let b = bilinear_form(&u, &u, &one, &st)?;
        let e = half_laplacian_energy(&u, op.s);
        worst = worst.max((b - e).abs() / e);
        pairs.push((b, e));
    }
    Ok(EnergyCheck { pairs, max_relative_error: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert!((getoor_constant(1, 0.5) - 1.0).abs() < 1e-14);
        assert!((getoor_constant(2, 0.5) - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        // s → 0 limit of the constant is 1
        assert!((getoor_constant(1, 1e-9) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn closed_form_matches_direct_quadrature() {
        // principal value of ∫ (u(x) - u(y)) / |x - y|^2 dy / π at x = 0 for
        // u = sqrt(1 - y²): split the singular neighbourhood by symmetry
        let m = 2_000_000;
        let mut acc = 0.0;
        for k in 0..m {
            let y = (k as f64 + 0.5) / m as f64;
            acc += 2.0 * (1.0 - (1.0 - y * y).sqrt()) / (y * y) / m as f64;
        }
        acc += 2.0; // ∫_{|y|>1} 1/y² dy
        assert!((acc / std::f64::consts::PI - getoor_constant(1, 0.5)).abs() < 1e-6);
    }

    #[test]
    fn cosines_are_eigenfunctions() {
        let grid = Grid::new(1, 8.0, 256).unwrap();
        assert!(spectral_cosine_error(grid, 0.3, &[1, 5, 40]).unwrap() < 1e-10);
        assert!(spectral_cosine_error(grid, 0.3, &[128]).is_err());
    }

    #[test]
    fn energy_identity_small_grid() {
        let grid = Grid::new(1, 8.0, 512).unwrap();
        let c = energy_identity_check(grid, FracOperator::quadrature(0.4).unwrap(), 4, 1).unwrap();
        assert!(c.max_relative_error < 1e-6, "{}", c.max_relative_error);
    }
}
