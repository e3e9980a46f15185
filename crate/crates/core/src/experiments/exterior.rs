//! Exterior determination: pointwise recovery of γ in `Ω_e` from DN data
//! and the Lipschitz scan `‖γ₁ - γ₂‖_{L^∞(Ω_e)} ≲ ‖Λ_{γ₁} - Λ_{γ₂}‖_*`.
//!
//! Recovery uses the ratio `⟨Λ_γ φ_w, φ_w⟩ / ⟨Λ_1 φ_w, φ_w⟩` for bumps `φ_w`
//! of width `w` centred at the probe. Far-field coupling perturbs the ratio
//! at relative order `w^{2s}`, so the two finest widths are combined by
//! Richardson extrapolation in `w^{2s}`.

use serde::{Deserialize, Serialize};

use crate::conductivity::Conductivity;
use crate::dn::{DnMatrix, ExteriorBasis};
use crate::error::{input, Error, Result};
use crate::special::unit_bump;

use super::Lab;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Probe {
    pub point: [f64; 2],
    /// Strictly decreasing bump radii.
    pub widths: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Recovery {
    pub point: [f64; 2],
    pub widths: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Ratio at the finest width.
    pub finest: f64,
    /// Richardson value from the two finest widths.
    pub estimate: f64,
    /// Successive ratio changes shrink along the width sequence.
    pub converging: bool,
    /// γ sampled at the probe, for comparison.
    pub sampled: f64,
}

/// Diagonal quotients `M_kk / M0_kk`.
pub fn recovery_ratios(m: &DnMatrix, m0: &DnMatrix) -> Result<Vec<f64>> {
    if m.rows != m0.rows || m.rows != m.cols || m.basis != m0.basis {
        return input("recovery needs square DN blocks on the same probe basis");
    }
    (0..m.rows.len())
        .map(|k| {
            let d = m0.get(k, k);
            if d > 0.0 {
                Ok(m.get(k, k) / d)
            } else {
                Err(Error::Invariant(format!("nonpositive reference energy {d} for probe {k}")))
            }
        })
        .collect()
}

/// Extrapolates `r(w) = r₀ + c w^p` from two widths.
pub fn richardson(coarse: (f64, f64), fine: (f64, f64), p: f64) -> f64 {
    let rho = (coarse.0 / fine.0).powf(p);
    (rho * fine.1 - coarse.1) / (rho - 1.0)
}

fn region_of(lab: &Lab, point: [f64; 2], radius: f64) -> Result<String> {
    let omega = &lab.geometry.omega;
    if omega.closure_contains(point) {
        return input(format!("probe {point:?} is not in the exterior"));
    }
    for set in &lab.geometry.measurement_sets {
        let inside = (0..64).all(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
            let dy = if lab.geometry.n == 2 { radius * th.sin() } else { 0.0 };
            let dx = if lab.geometry.n == 2 { radius * th.cos() } else { radius * th.cos().signum() };
            set.region.contains([point[0] + 0.999 * dx, point[1] + 0.999 * dy])
        }) && set.region.contains(point);
        if inside {
            return Ok(set.name.clone());
        }
    }
    input(format!("probe bump at {point:?} with width {radius} escapes every measurement set"))
}

/// Probe bumps of all widths as one basis on the probe's measurement set.
pub fn probe_basis(lab: &Lab, probe: &Probe) -> Result<ExteriorBasis> {
    if probe.widths.len() < 2 || probe.widths.windows(2).any(|w| w[1] >= w[0]) {
        return input("probe widths must be a strictly decreasing sequence of length at least 2");
    }
    let region = region_of(lab, probe.point, probe.widths[0])?;
    let grid = lab.geometry.grid();
    let c = probe.point;
    let fields = probe
        .widths
        .iter()
        .map(|&w| grid.sample(|p| unit_bump((p[0] - c[0]).hypot(p[1] - c[1]) / w)))
        .collect();
    ExteriorBasis::from_functions(&lab.geometry, &region, format!("probe:{:?}:{}", c, probe.widths.len()), fields)
}

pub fn exterior_recovery(lab: &Lab, gamma: &Conductivity, probes: &[Probe]) -> Result<Vec<Recovery>> {
    let one = Conductivity::unit(lab.geometry.grid());
    let p = 2.0 * lab.geometry.s;
    let grid = lab.geometry.grid();
    probes
        .iter()
        .map(|probe| {
            let pl = lab.with_basis(probe_basis(lab, probe)?);
            let ratios = recovery_ratios(&pl.dn_conductivity(gamma)?, &pl.dn_conductivity(&one)?)?;
            let k = ratios.len();
            let w = &probe.widths;
            let estimate = richardson((w[k - 2], ratios[k - 2]), (w[k - 1], ratios[k - 1]), p);
            let steps: Vec<f64> = ratios.windows(2).map(|r| (r[1] - r[0]).abs()).collect();
            let converging = steps.windows(2).all(|d| d[1] <= d[0]);
            let h = grid.spacing();
            let half = grid.half_width();
            let idx = |x: f64| (((x + half) / h).round() as usize).min(grid.points() - 1);
            let node = if grid.dim() == 1 {
                idx(probe.point[0])
            } else {
                idx(probe.point[1]) * grid.points() + idx(probe.point[0])
            };
            Ok(Recovery {
                point: probe.point,
                widths: w.clone(),
                finest: ratios[k - 1],
                ratios,
                estimate,
                converging,
                sampled: gamma.values()[node],
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScanPoint {
    pub label: f64,
    pub gamma_gap: f64,
    pub dn_gap: f64,
    /// `gamma_gap / dn_gap`; absent for identical pairs.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExteriorScan {
    pub points: Vec<ScanPoint>,
    pub excluded: usize,
    /// `Ĉ = max gamma_gap / dn_gap`.
    #[serde(deserialize_with = "crate::stats::nullable_f64")]
    pub fitted_constant: f64,
    /// Largest over smallest ratio.
    #[serde(deserialize_with = "crate::stats::nullable_f64")]
    pub spread: f64,
    pub stable: bool,
}

/// Pairs must agree on `Ω`. `labels` tag the points (e.g. amplitudes).
pub fn exterior_stability_scan(lab: &Lab, pairs: &[(Conductivity, Conductivity)], labels: &[f64]) -> Result<ExteriorScan> {
    if labels.len() != pairs.len() {
        return input("one label per pair required");
    }
    let interior = lab.geometry.interior_mask();
    let exterior = lab.geometry.exterior_mask();
    let mut points = Vec::with_capacity(pairs.len());
    let mut excluded = 0;
    for ((a, b), &label) in pairs.iter().zip(labels) {
        let differs_inside = a.values().iter().zip(b.values()).zip(&interior).any(|((x, y), &m)| m && x != y);
        if differs_inside {
            return input("exterior scan pairs must coincide on the domain");
        }
        let gamma_gap = crate::mandache::sup_gap(a, b, &exterior);
        let dn_gap = lab.gap(&lab.dn_conductivity(a)?, &lab.dn_conductivity(b)?)?;
        let ratio = if dn_gap > 0.0 && gamma_gap > 0.0 {
            Some(gamma_gap / dn_gap)
        } else {
            excluded += 1;
            None
        };
        points.push(ScanPoint { label, gamma_gap, dn_gap, ratio });
    }
    let ratios: Vec<f64> = points.iter().filter_map(|p| p.ratio).collect();
    let fitted_constant = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if ratios.is_empty() { 1.0 } else { fitted_constant / min };
    Ok(ExteriorScan { points, excluded, fitted_constant, spread, stable: spread <= 2.0 })
}
