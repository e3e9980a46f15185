//! Logarithmic modulus fit: `y ≈ C |log x|^{-σ}` with
//! `x = ‖Λ_{γ₁} - Λ_{γ₂}‖_*` and `y = ‖γ₁^{1/2} - γ₂^{1/2}‖_{L^q(Ω)}`.
//!
//! Pairs failing the smallness gate or lying below the discretisation floor
//! are kept in the data but left out of the fit.

use serde::{Deserialize, Serialize};

use crate::conductivity::{smallness_threshold, validate_admissibility, Conductivity};
use crate::error::{config, input, Error, Result};
use crate::stats::fit_line;

use super::Lab;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ModulusPoint {
    pub label: f64,
    pub x: f64,
    pub y: f64,
    pub gate_ok: bool,
    pub above_floor: bool,
    pub retained: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModulusFit {
    /// Amplitude `C`.
    pub amplitude: f64,
    pub sigma: f64,
    pub q_norm_index: f64,
    pub r_squared: f64,
    pub theta0: f64,
    /// Smallness gate `3^{-1/δ}` applied to `x`.
    pub gate: f64,
    /// `x` below which DN differences are dominated by solver error.
    pub floor: f64,
    /// Retained `y` strictly increasing in `x`.
    pub monotone: bool,
    pub data_points: Vec<ModulusPoint>,
}

/// Largest admissible `L^q` index, `2n/(n - 2s)` (unbounded when `n ≤ 2s`).
pub fn max_q_index(n: usize, s: f64) -> f64 {
    let n = n as f64;
    if n > 2.0 * s {
        2.0 * n / (n - 2.0 * s)
    } else {
        f64::INFINITY
    }
}

pub fn check_q_index(n: usize, s: f64, q: f64) -> Result<()> {
    let max = max_q_index(n, s);
    if !(q >= 1.0 && q <= max * (1.0 + 1e-12)) {
        return config(format!("q_index {q} outside [1, {max}]"));
    }
    Ok(())
}

/// Least-squares fit of `log y` on `log|log x|` over the retained points.
pub fn fit_modulus(points: &[ModulusPoint]) -> Option<(f64, f64, f64)> {
    let kept: Vec<&ModulusPoint> = points.iter().filter(|p| p.retained).collect();
    let lx: Vec<f64> = kept.iter().map(|p| p.x.ln().abs().ln()).collect();
    let ly: Vec<f64> = kept.iter().map(|p| p.y.ln()).collect();
    fit_line(&lx, &ly).map(|f| (f.intercept.exp(), -f.slope, f.r_squared))
}

pub fn log_stability_fit(
    lab: &Lab,
    pairs: &[(Conductivity, Conductivity)],
    labels: &[f64],
    q_index: f64,
    theta0: f64,
) -> Result<ModulusFit> {
    let n = lab.geometry.n;
    check_q_index(n, lab.geometry.s, q_index)?;
    if labels.len() != pairs.len() {
        return input("one label per pair required");
    }
    let interior = lab.geometry.interior_mask();
    let gate = smallness_threshold(theta0);
    let mut raw = Vec::with_capacity(pairs.len());
    let mut floor: f64 = 0.0;
    for ((a, b), &label) in pairs.iter().zip(labels) {
        let ma = lab.dn_conductivity(a)?;
        let mb = lab.dn_conductivity(b)?;
        let d = ma.difference(&mb)?;
        let x = lab.norm(&d)?;
        let adm = validate_admissibility(
            a,
            b,
            theta0,
            &lab.geometry,
            &lab.stencil,
            &lab.thresholds,
            Some(x),
        )?;
        if !(adm.ellipticity_ok && adm.support_ok && adm.smoothness.iter().chain(&adm.exterior_l1).all(|c| c.ok)) {
            return Err(Error::Invariant(format!("pair {label} fails admissibility")));
        }
        let reference = lab.norm(&ma)?.max(lab.norm(&mb)?);
        floor = floor.max((d.solve_residual + 64.0 * f64::EPSILON) * reference);
        let diff = a.field().zip_with(b.field(), |u, v| u.sqrt() - v.sqrt())?;
        let y = diff.lp_norm_on(q_index, &interior);
        raw.push((label, x, y, adm.gate.is_none_or(|c| c.ok)));
    }
    let data_points: Vec<ModulusPoint> = raw
        .into_iter()
        .map(|(label, x, y, gate_ok)| {
            let above_floor = x > floor;
            ModulusPoint { label, x, y, gate_ok, above_floor, retained: gate_ok && above_floor && x > 0.0 && x <= 1.0 && y > 0.0 }
        })
        .collect();
    let usable = data_points.iter().filter(|p| p.retained).count();
    if usable < 4 {
        return input(format!("only {usable} usable pairs; the fit needs at least 4"));
    }
    let (amplitude, sigma, r_squared) = fit_modulus(&data_points).ok_or_else(|| Error::Input("degenerate fit data".into()))?;
    let mut kept: Vec<&ModulusPoint> = data_points.iter().filter(|p| p.retained).collect();
    kept.sort_by(|a, b| a.x.total_cmp(&b.x));
    let monotone = kept.windows(2).all(|w| w[1].y > w[0].y && w[1].x > w[0].x);
    Ok(ModulusFit { amplitude, sigma, q_norm_index: q_index, r_squared, theta0, gate, floor, monotone, data_points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_index_range() {
        assert!((max_q_index(1, 0.4) - 10.0).abs() < 1e-12);
        assert!(check_q_index(1, 0.4, 10.0).is_ok());
        assert!(check_q_index(1, 0.4, 11.0).is_err());
        assert!(check_q_index(1, 0.4, 0.5).is_err());
        assert!(check_q_index(1, 0.5, 1e6).is_ok());
    }

    #[test]
    fn fit_recovers_exact_modulus() {
        let pts: Vec<ModulusPoint> = [1e-3, 1e-5, 1e-8, 1e-12, 1e-20]
            .iter()
            .enumerate()
            .map(|(i, &x): (usize, &f64)| ModulusPoint {
                label: i as f64,
                x,
                y: 2.0 * x.ln().abs().powf(-1.5),
                gate_ok: true,
                above_floor: true,
                retained: true,
            })
            .collect();
        let (c, sigma, r2) = fit_modulus(&pts).unwrap();
        assert!((c - 2.0).abs() < 1e-10 && (sigma - 1.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn points_round_trip() {
        let p = ModulusPoint { label: 0.5, x: 1.234e-7, y: 3.2e-5, gate_ok: true, above_floor: false, retained: false };
        let back: ModulusPoint = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(p, back);
    }
}
