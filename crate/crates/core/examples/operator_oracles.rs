//! Checks the two discretisations of `(-Δ)^s` against closed forms: grid
//! cosines for the spectral multiplier, and the Getoor-type value of
//! `(-Δ)^s (1 - |x|²)_+^s` for the corrected quadrature.

use fracstab::experiments::operator::{energy_identity_check, getoor_check, getoor_constant, spectral_cosine_error};
use fracstab::{FracOperator, GeometryConfig, Grid};

pub fn run() -> fracstab::Result<()> {
    let grid = Grid::new(1, 8.0, 1024)?;
    let err = spectral_cosine_error(grid, 0.4, &[1, 3, 17, 100, 511])?;
    println!("spectral multiplier on cosines: max relative error {err:.2e}");

    for (n, s) in [(1, 0.5), (1, 0.4), (2, 0.5)] {
        println!("closed form n={n} s={s}: {:.12}", getoor_constant(n, s));
    }
    let check = getoor_check(0.5, 32.0, &[1024, 2048, 4096], &[0.0, 0.25, 0.5, -0.5])?;
    for level in &check.levels {
        println!("quadrature N={:5}: max relative error {:.3e}", level.points, level.max_relative_error);
    }
    println!("improving under refinement: {}", check.improving);

    let g = GeometryConfig::default_1d();
    let energy = energy_identity_check(g.grid(), FracOperator::quadrature(g.s)?, 10, 2024)?;
    println!("B_1(u,u) vs spectral energy: max relative error {:.2e}", energy.max_relative_error);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fracstab::Result<()> {
    run()
}
