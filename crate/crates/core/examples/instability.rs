//! A Mandache family of signed lattice bumps: ε-separated conductivities
//! whose partial-data DN maps nearly coincide, and the decay of the DN
//! coefficients in the harmonic order.

use fracstab::dn::BasisKind;
use fracstab::experiments::instability::instability_search;
use fracstab::experiments::Lab;
use fracstab::mandache::MandacheParams;
use fracstab::{FracOperator, GeometryConfig};

pub fn run() -> fracstab::Result<()> {
    let geom = GeometryConfig::default_1d();
    let lab = Lab::new(geom.clone(), FracOperator::quadrature(geom.s)?, BasisKind::Harmonic, 16, "annulus")?;
    let params = MandacheParams::default();
    let rec = instability_search(&lab, &params, 32)?;
    println!("{} lattice sites, measured C^ell norm {:.1}", rec.lattice_sites, rec.cl_norm);
    println!("min pairwise gap {:.4}", rec.separation);
    println!(
        "witness {:?}: gamma gap {:.4}, DN gap {:.3e}, ratio {:.3e}",
        rec.pair, rec.gamma_gap, rec.dn_gap, rec.ratio
    );
    let f = &rec.decay_fit;
    println!("decay |a| <= {:.3e} exp(-{:.3} order), r2 {:.4}, spearman {:.3}", f.amplitude, f.rate, f.r_squared, f.spearman);
    println!("theory: delta target {:.4}, log cardinality exponent {:.2}", rec.delta_target, rec.net_size_bound);
    println!("measured: log(#patterns) = {:.2}", rec.log_patterns);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fracstab::Result<()> {
    run()
}
