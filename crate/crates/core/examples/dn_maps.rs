//! Exterior DN matrices in the harmonic basis: symmetry, the dual operator
//! norm, partial-data blocks, and the versioned cache format.

use fracstab::dn::{build_exterior_basis, cache_dn, load_dn, restrict_dn, BasisKind};
use fracstab::experiments::presets::liouville_bumps;
use fracstab::experiments::Lab;
use fracstab::{Conductivity, ExteriorBasis, FracOperator, GeometryConfig};

pub fn run() -> fracstab::Result<()> {
    let geom = GeometryConfig::default_1d();
    let lab = Lab::new(geom.clone(), FracOperator::quadrature(geom.s)?, BasisKind::Harmonic, 16, "annulus")?;
    println!("basis {}: smallest Gram eigenvalue {:.3e}", lab.basis.descriptor(), lab.basis.min_gram_eigenvalue());

    let one = Conductivity::unit(geom.grid());
    let gamma = liouville_bumps(&geom, 0)?.remove(0);
    let m0 = lab.dn_conductivity(&one)?;
    let m = lab.dn_conductivity(&gamma)?;
    println!("||Lambda_1||_* = {:.6}, asymmetry {:.2e}", lab.norm(&m0)?, m0.asymmetry());
    println!("||Lambda_gamma - Lambda_1||_* = {:.4e}", lab.gap(&m, &m0)?);

    let left = build_exterior_basis(&geom, "left", 8, BasisKind::Bumps)?;
    let right = build_exterior_basis(&geom, "right", 8, BasisKind::Bumps)?;
    let split = lab.with_basis(ExteriorBasis::concat(&geom, &[left, right])?);
    let full = split.dn_conductivity(&gamma)?.difference(&split.dn_conductivity(&one)?)?;
    let block = restrict_dn(&full, &split.basis, "left", "right")?;
    println!("left-to-right block {}x{}, max entry {:.3e}", block.rows.len(), block.cols.len(), block.max_abs());
    println!("full block max entry {:.3e}", full.max_abs());

    let dir = std::env::temp_dir().join(format!("fracstab-dn-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("gamma.dn");
    cache_dn(&path, &m)?;
    let back = load_dn(&path, &geom.hash())?;
    let exact = back.entries.iter().zip(&m.entries).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("cache round trip bitwise exact: {exact}");
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> fracstab::Result<()> {
    run()
}
