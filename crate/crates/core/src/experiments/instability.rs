//! Instability probe: an `ε`-separated Mandache family whose DN maps on the
//! annulus nearly coincide, and the decay of the harmonic coefficients
//! `a_ij` of `Γ(q) = Λ_q - Λ_0` in the maximal order of the pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conductivity::{liouville_potential, Potential};
use crate::dn::DnMatrix;
use crate::error::{input, Result};
use crate::geometry::Grid;
use crate::mandache::{mandache_family, sup_gap, MandacheFamily, MandacheParams};
use crate::stats::{fit_line, spearman};

use super::Lab;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecayFit {
    pub amplitude: f64,
    /// `c` in `|a_ij| ≤ A e^{-c·maxorder}`.
    pub rate: f64,
    pub r_squared: f64,
    /// `(order, max |a_ij|)` over pairs of that maximal order.
    pub envelope: Vec<(usize, f64)>,
    /// `(order, mean log|a_ij|)`, entries at round-off level excluded.
    pub mean_log: Vec<(usize, f64)>,
    /// Rank correlation of `mean_log` with the order.
    #[serde(deserialize_with = "crate::stats::nullable_f64")]
    pub spearman: f64,
}

/// Fits the max-modulus envelope of `gamma_q` against the maximal order of
/// the basis labels.
pub fn coefficient_decay(gamma_q: &DnMatrix, orders: &[usize]) -> Result<DecayFit> {
    let k = gamma_q.rows.len();
    if gamma_q.cols.len() != k || orders.len() < k {
        return input("decay fit needs a square block with one order per basis function");
    }
    let ord = |i: usize, j: usize| orders[gamma_q.rows[i]].max(orders[gamma_q.cols[j]]);
    let top = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| ord(i, j)).max().unwrap_or(0);
    let floor = 1e-13 * gamma_q.max_abs();
    let mut envelope = Vec::new();
    let mut mean_log = Vec::new();
    for o in 0..=top {
        let vals: Vec<f64> = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|&(i, j)| ord(i, j) == o)
            .map(|(i, j)| gamma_q.get(i, j).abs())
            .collect();
        if vals.is_empty() {
            continue;
        }
        envelope.push((o, vals.iter().copied().fold(0.0, f64::max)));
        let live: Vec<f64> = vals.iter().filter(|v| **v > floor).map(|v| v.ln()).collect();
        if !live.is_empty() {
            mean_log.push((o, live.iter().sum::<f64>() / live.len() as f64));
        }
    }
    // the top order is reached only by mixed pairs in the last radial shell
    let fitted: Vec<&(usize, f64)> = envelope.iter().filter(|(o, v)| *o < top && *v > floor).collect();
    let x: Vec<f64> = fitted.iter().map(|(o, _)| *o as f64).collect();
    let y: Vec<f64> = fitted.iter().map(|(_, v)| v.ln()).collect();
    let line = fit_line(&x, &y).ok_or_else(|| crate::error::Error::Input("too few orders for a decay fit".into()))?;
    let mo: Vec<f64> = mean_log.iter().map(|(o, _)| *o as f64).collect();
    let ml: Vec<f64> = mean_log.iter().map(|(_, v)| *v).collect();
    Ok(DecayFit {
        amplitude: line.intercept.exp(),
        rate: -line.slope,
        r_squared: line.r_squared,
        envelope,
        mean_log,
        spearman: spearman(&mo, &ml).unwrap_or(f64::NAN),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstabilityRecord {
    pub params: MandacheParams,
    pub family_size: usize,
    pub lattice_sites: usize,
    /// Measured smallest pairwise `L^∞(B₁)` distance.
    pub separation: f64,
    /// Measured largest `C^ℓ` estimate over the family.
    pub cl_norm: f64,
    pub pair: (usize, usize),
    pub gamma_gap: f64,
    /// Partial-data norm of the DN difference on the annulus.
    pub dn_gap: f64,
    pub ratio: f64,
    /// Member used for the coefficient decay (largest `‖q‖`).
    pub decay_member: usize,
    pub decay_fit: DecayFit,
    /// Theory: `δ = exp(-ε^{-n/((2n+3)ℓ)})`.
    pub delta_target: f64,
    /// Theory: the family can be taken of size `exp(C (β/ε)^{n/ℓ})`; this is
    /// the exponent with `C = 1`.
    pub net_size_bound: f64,
    /// Measured: `log` of the number of available sign patterns.
    pub log_patterns: f64,
}

fn l2(q: &Potential) -> f64 {
    q.field.l2_norm()
}

fn ball_mask(grid: Grid) -> Vec<bool> {
    (0..grid.len()).map(|i| grid.radius(i) < 1.0).collect()
}

/// Builds the family, its annulus DN maps, the witness pair minimising
/// `dn_gap / gamma_gap` among pairs with `gamma_gap ≥ ε`, and the decay fit
/// of `Γ(q)` for the member with the largest potential. The potential is
/// restricted to `Ω`, which makes `Λ_q` the DN map of a compactly supported
/// perturbation of `(-Δ)^s`.
pub fn instability_search(lab: &Lab, params: &MandacheParams, count: usize) -> Result<InstabilityRecord> {
    if count < 2 {
        return input(format!(
            "a family of {count} member(s) has no pair to compare; counting bound exponent (beta/eps)^(n/ell) = {:.3}",
            params.log_cardinality_bound(lab.geometry.n)
        ));
    }
    let fam: MandacheFamily = mandache_family(&lab.geometry, params, count)?;
    let maps: Vec<DnMatrix> = fam
        .members
        .par_iter()
        .map(|g| lab.dn_conductivity(g))
        .collect::<Result<_>>()?;
    let ball = ball_mask(lab.geometry.grid());
    let pairs: Vec<(usize, usize)> = (0..count).flat_map(|i| (i + 1..count).map(move |j| (i, j))).collect();
    let gaps: Vec<(usize, usize, f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let gg = sup_gap(&fam.members[i], &fam.members[j], &ball);
            let dg = lab.gap(&maps[i], &maps[j])?;
            Ok((i, j, gg, dg))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for &(i, j, gg, dg) in &gaps {
        if gg >= params.eps * (1.0 - 1e-12) {
            let better = best.is_none_or(|(_, _, bg, bd)| dg / gg < bd / bg);
            if better {
                best = Some((i, j, gg, dg));
            }
        }
    }
    let (i, j, gamma_gap, dn_gap) = best.ok_or_else(|| crate::error::Error::Invariant("no pair reaches gamma_gap >= eps".into()))?;

    let interior = lab.geometry.interior_mask();
    let potentials: Vec<Potential> = fam
        .members
        .iter()
        .map(|g| liouville_potential(g, &lab.stencil).map(|q| q.restricted(&interior)))
        .collect::<Result<_>>()?;
    let decay_member = (0..count).max_by(|&a, &b| l2(&potentials[a]).total_cmp(&l2(&potentials[b]))).unwrap_or(0);
    let m0 = lab.dn_potential(&Potential::zero(lab.geometry.grid()))?;
    let gq = lab.dn_potential(&potentials[decay_member])?.difference(&m0)?;
    let orders: Vec<usize> = lab.basis.labels().iter().map(|l| l.order()).collect();
    let decay_fit = coefficient_decay(&gq, &orders)?;

    Ok(InstabilityRecord {
        params: *params,
        family_size: count,
        lattice_sites: fam.sites.len(),
        separation: fam.separation,
        cl_norm: fam.cl_norm,
        pair: (i, j),
        gamma_gap,
        dn_gap,
        ratio: dn_gap / gamma_gap,
        decay_member,
        decay_fit,
        delta_target: params.delta_target(lab.geometry.n),
        net_size_bound: params.log_cardinality_bound(lab.geometry.n),
        log_patterns: fam.sites.len() as f64 * std::f64::consts::LN_2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dn::Equation;

    fn synthetic(k: usize, rate: f64) -> (DnMatrix, Vec<usize>) {
        let orders: Vec<usize> = (0..k).map(|i| i / 2 + i % 2).collect();
        let mut entries = Vec::new();
        for i in 0..k {
            for j in 0..k {
                entries.push(3.0 * (-rate * orders[i].max(orders[j]) as f64).exp() * if (i + j) % 3 == 0 { 1.0 } else { 0.5 });
            }
        }
        let m = DnMatrix {
            equation: Equation::Difference,
            basis: "synthetic".into(),
            geometry_hash: String::new(),
            rows: (0..k).collect(),
            cols: (0..k).collect(),
            entries,
            extension_defect: 0.0,
            solve_residual: 0.0,
        };
        (m, orders)
    }

    #[test]
    fn decay_fit_recovers_rate() {
        let (m, orders) = synthetic(12, 1.3);
        let fit = coefficient_decay(&m, &orders).unwrap();
        assert!((fit.rate - 1.3).abs() < 1e-12);
        assert!((fit.amplitude - 3.0).abs() < 1e-10);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert!(fit.spearman < -0.99);
    }

    #[test]
    fn too_small_family_reports_bound() {
        use crate::dn::BasisKind;
        use crate::geometry::GeometryConfig;
        use crate::nonlocal::FracOperator;
        let g = GeometryConfig::default_1d().with_points(512);
        let op = FracOperator::quadrature(g.s).unwrap();
        let lab = Lab::new(g, op, BasisKind::Harmonic, 4, "annulus").unwrap();
        let err = instability_search(&lab, &MandacheParams::default(), 1).unwrap_err();
        assert!(err.to_string().contains("counting bound"));
    }
}
