//! One exterior value problem: a bump datum outside Ω, a conductivity bump
//! inside, the dense Galerkin solve and its diagnostics.

use fracstab::experiments::presets::liouville_bumps;
use fracstab::solver::{coercivity_check, CoefficientRef, ExteriorDatum, ForwardProblem};
use fracstab::special::unit_bump;
use fracstab::{FracOperator, GeometryConfig, Potential, Stencil};

pub fn run() -> fracstab::Result<()> {
    let geom = GeometryConfig::default_1d();
    let st = Stencil::new(geom.grid(), FracOperator::quadrature(geom.s)?);
    let gamma = liouville_bumps(&geom, 0)?.remove(0);
    let datum = ExteriorDatum::sample(&geom, |p| unit_bump((p[0] - 2.5) / 0.4));

    let problem = ForwardProblem::conductivity(&geom, &st, &gamma)?;
    println!("interior unknowns: {}", problem.interior().len());
    println!("smallest eigenvalue of the interior block: {:.4e}", problem.smallest_eigenvalue());
    let sol = problem.solve(&datum, 1e-10)?;
    let centre = geom.grid().points() / 2;
    println!("backward error {:.2e}, energy B(u,u) = {:.6e}, u(0) = {:.6e}", sol.residual, sol.energy, sol.u.values[centre]);

    // a potential that is too negative destroys coercivity and is reported
    let q = Potential { field: geom.grid().sample(|p| if geom.omega.contains(p) { -50.0 } else { 0.0 }) };
    let lambda = coercivity_check(&geom, &st, CoefficientRef::Potential(&q))?;
    println!("q = -50 on the domain: smallest eigenvalue {lambda:.3} (not coercive)");
    println!("schrodinger solve refused: {}", ForwardProblem::schrodinger(&geom, &st, &q).is_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> fracstab::Result<()> {
    run()
}
