//! Conductivities that differ only outside Ω: the DN gap scales linearly
//! with the exterior perturbation, and the exterior value is read off from
//! concentrating probe bumps.

use fracstab::dn::BasisKind;
use fracstab::experiments::exterior::{exterior_recovery, exterior_stability_scan, Probe};
use fracstab::experiments::presets::{exterior_bump_scan, exterior_centre, exterior_recovery_target};
use fracstab::experiments::Lab;
use fracstab::{FracOperator, GeometryConfig};

pub fn run() -> fracstab::Result<()> {
    let geom = GeometryConfig::default_1d();
    let lab = Lab::new(geom.clone(), FracOperator::quadrature(geom.s)?, BasisKind::Harmonic, 16, "annulus")?;
    let fam = exterior_bump_scan(&geom, 0)?;
    let scan = exterior_stability_scan(&lab, &fam.pairs, &fam.labels)?;
    for p in &scan.points {
        println!("amplitude {:.2}: gamma gap {:.4}, DN gap {:.4e}, ratio {:?}", p.label, p.gamma_gap, p.dn_gap, p.ratio);
    }
    println!("fitted constant {:.4}, spread {:.4}", scan.fitted_constant, scan.spread);

    let target = exterior_recovery_target(&geom, 0)?;
    let probe = Probe { point: exterior_centre(&geom, 0), widths: vec![0.4, 0.2, 0.1, 0.05] };
    let rec = &exterior_recovery(&lab, &target, &[probe])?[0];
    for (w, r) in rec.widths.iter().zip(&rec.ratios) {
        println!("width {w:.3}: quadratic-form ratio {r:.5}");
    }
    println!("extrapolated {:.5} vs true {:.5}", rec.estimate, rec.sampled);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fracstab::Result<()> {
    run()
}
