//! Comparison of Schrödinger and conductivity DN differences:
//! `‖Λ_{q₁} - Λ_{q₂}‖_*` against `x + x^{1/2} + x^{(1-θ₀)/2}` with
//! `x = ‖Λ_{γ₁} - Λ_{γ₂}‖_*`.

use serde::{Deserialize, Serialize};

use crate::conductivity::{check_theta0, liouville_potential, validate_admissibility, Conductivity};
use crate::error::{Error, Result};

use super::Lab;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ReductionCheck {
    pub theta0: f64,
    pub lhs: f64,
    pub x: f64,
    pub rhs_shape: f64,
    /// `lhs / rhs_shape`; zero when `x = 0`.
    pub fitted_constant: f64,
}

/// `x + x^{1/2} + x^{(1-θ₀)/2}`.
pub fn rhs_shape(x: f64, theta0: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    x + x.sqrt() + x.powf(0.5 * (1.0 - theta0))
}

pub fn reduction_check(lab: &Lab, g1: &Conductivity, g2: &Conductivity, theta0: f64) -> Result<ReductionCheck> {
    check_theta0(lab.geometry.n, lab.geometry.s, theta0)?;
    let adm = validate_admissibility(
        g1,
        g2,
        theta0,
        &lab.geometry,
        &lab.stencil,
        &lab.thresholds,
        None,
    )?;
    if !adm.all_ok {
        return Err(Error::Invariant(format!("pair fails admissibility: {adm:?}")));
    }
    let q1 = liouville_potential(g1, &lab.stencil)?;
    let q2 = liouville_potential(g2, &lab.stencil)?;
    let lhs = lab.gap(&lab.dn_potential(&q1)?, &lab.dn_potential(&q2)?)?;
    let x = lab.gap(&lab.dn_conductivity(g1)?, &lab.dn_conductivity(g2)?)?;
    let shape = rhs_shape(x, theta0);
    let fitted_constant = if shape > 0.0 { lhs / shape } else { 0.0 };
    Ok(ReductionCheck { theta0, lhs, x, rhs_shape: shape, fitted_constant })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReductionScan {
    pub labels: Vec<f64>,
    pub checks: Vec<ReductionCheck>,
    /// max / min fitted constant over pairs with `x > 0`.
    #[serde(deserialize_with = "crate::stats::nullable_f64")]
    pub band: f64,
    pub band_ok: bool,
    /// `lhs / x^{(1-θ₀)/2}` per pair.
    pub dominant_ratios: Vec<f64>,
    /// `lhs / x` per pair.
    pub linear_ratios: Vec<f64>,
    /// `lhs / x^{(1-θ₀)/2}` stays within the band limit as `x` shrinks.
    pub dominant_bounded: bool,
    /// `lhs / x` grows by more than the band limit as `x` shrinks.
    pub linear_unbounded: bool,
    pub passed: bool,
}

/// Band limit for bounded ratios over a family.
pub const BAND_LIMIT: f64 = 5.0;

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(0.0, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if v.is_empty() || min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Runs [`reduction_check`] over a family ordered by decreasing perturbation.
pub fn reduction_scan(lab: &Lab, pairs: &[(Conductivity, Conductivity)], labels: &[f64], theta0: f64) -> Result<ReductionScan> {
    let mut checks = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        checks.push(reduction_check(lab, a, b, theta0)?);
    }
    let live: Vec<&ReductionCheck> = checks.iter().filter(|c| c.x > 0.0).collect();
    let fitted: Vec<f64> = live.iter().map(|c| c.fitted_constant).collect();
    let band = if live.is_empty() { 1.0 } else { spread(&fitted) };
    let a = 0.5 * (1.0 - theta0);
    let dominant_ratios: Vec<f64> = live.iter().map(|c| c.lhs / c.x.powf(a)).collect();
    let linear_ratios: Vec<f64> = live.iter().map(|c| c.lhs / c.x).collect();
    // smallest x last
    let mut order: Vec<usize> = (0..live.len()).collect();
    order.sort_by(|&i, &j| live[j].x.total_cmp(&live[i].x));
    let growth = |v: &[f64]| -> f64 {
        let first = v[order[0]];
        order.iter().map(|&i| v[i] / first).fold(0.0, f64::max)
    };
    let (dominant_bounded, linear_unbounded) = if live.len() < 2 {
        (true, false)
    } else {
        (growth(&dominant_ratios) <= BAND_LIMIT, growth(&linear_ratios) > BAND_LIMIT)
    };
    let band_ok = band <= BAND_LIMIT;
    Ok(ReductionScan {
        labels: labels.to_vec(),
        checks,
        band,
        band_ok,
        dominant_ratios,
        linear_ratios,
        dominant_bounded,
        linear_unbounded,
        passed: band_ok && dominant_bounded && linear_unbounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dn::BasisKind;
    use crate::geometry::GeometryConfig;
    use crate::nonlocal::FracOperator;

    #[test]
    fn shape_arithmetic() {
        let v = rhs_shape(0.01, 0.9);
        assert!((v - (0.01 + 0.1 + 0.01f64.powf(0.05))).abs() < 1e-15);
        assert!((0.01f64.powf(0.05) - 0.7943).abs() < 1e-4);
        assert_eq!(rhs_shape(0.0, 0.9), 0.0);
    }

    #[test]
    fn identical_pair_is_vacuous() {
        let g = GeometryConfig::default_1d().with_points(512);
        let op = FracOperator::quadrature(g.s).unwrap();
        let lab = Lab::new(g, op, BasisKind::Harmonic, 6, "annulus").unwrap();
        let one = Conductivity::unit(lab.geometry.grid());
        let c = reduction_check(&lab, &one, &one, 0.9).unwrap();
        assert_eq!((c.lhs, c.x, c.fitted_constant), (0.0, 0.0, 0.0));
        assert!(matches!(reduction_check(&lab, &one, &one, 0.75), Err(Error::Config(_))));
    }
}
