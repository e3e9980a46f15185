//! Compares `‖Λ_{q₁} - Λ_{q₂}‖_*` with `x = ‖Λ_{γ₁} - Λ_{γ₂}‖_*` over a
//! shrinking interior family, against the shape `x + x^{1/2} + x^{(1-θ₀)/2}`.

use fracstab::dn::BasisKind;
use fracstab::experiments::presets::reduction_ladder;
use fracstab::experiments::reduction::reduction_scan;
use fracstab::experiments::Lab;
use fracstab::{FracOperator, GeometryConfig};

pub fn run() -> fracstab::Result<()> {
    let geom = GeometryConfig::default_1d();
    let lab = Lab::new(geom.clone(), FracOperator::quadrature(geom.s)?, BasisKind::Harmonic, 16, "annulus")?;
    let fam = reduction_ladder(&geom, 0)?;
    let scan = reduction_scan(&lab, &fam.pairs, &fam.labels, 0.9)?;
    for (a, c) in scan.labels.iter().zip(&scan.checks) {
        println!("a = {a:.4}: x = {:.4e}, lhs = {:.4e}, lhs/shape = {:.4e}", c.x, c.lhs, c.fitted_constant);
    }
    println!("band {:.2} (bounded within 5: {})", scan.band, scan.band_ok);
    println!("lhs/x: {:?}", scan.linear_ratios);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fracstab::Result<()> {
    run()
}
