//! Interior amplitude ladder: DN gaps against coefficient gaps, fitted to
//! `y = C |log x|^{-σ}` above the discretisation floor.

use fracstab::dn::BasisKind;
use fracstab::experiments::modulus::log_stability_fit;
use fracstab::experiments::presets::interior_amplitude_ladder;
use fracstab::experiments::Lab;
use fracstab::{FracOperator, GeometryConfig};

pub fn run() -> fracstab::Result<()> {
    let geom = GeometryConfig::default_1d();
    let lab = Lab::new(geom.clone(), FracOperator::quadrature(geom.s)?, BasisKind::Harmonic, 16, "annulus")?;
    let fam = interior_amplitude_ladder(&geom, 7)?;
    let fit = log_stability_fit(&lab, &fam.pairs, &fam.labels, 2.0, 0.85)?;
    println!("gate {:.3e}, floor {:.3e}", fit.gate, fit.floor);
    for p in &fit.data_points {
        println!("a = {:.3e}: x = {:.4e}, y = {:.4e}, retained {}", p.label, p.x, p.y, p.retained);
    }
    println!("C = {:.4e}, sigma = {:.3}, r2 = {:.5}, monotone {}", fit.amplitude, fit.sigma, fit.r_squared, fit.monotone);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fracstab::Result<()> {
    run()
}
