//! Families of conductivities `1 + f` with `f` a signed sum of smooth bumps
//! on a lattice inside the unit ball. Distinct sign patterns differ by `ε`
//! at some lattice site, so the family is `ε`-discrete in `L^∞(B₁)` while
//! every member stays within a `C^ℓ` budget `β`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conductivity::Conductivity;
use crate::error::{config, Error, Result};
use crate::geometry::{GeometryConfig, Grid, GridField};
use crate::rng::stream;
use crate::special::unit_bump;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MandacheParams {
    pub ell: f64,
    pub eps: f64,
    pub beta: f64,
    pub lattice_spacing: f64,
    pub seed: u64,
}

impl Default for MandacheParams {
    fn default() -> Self {
        MandacheParams { ell: 2.5, eps: 0.1, beta: 1.0e3, lattice_spacing: 0.28125, seed: 0 }
    }
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9
}

impl MandacheParams {
    pub fn validate(&self, s: f64) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return config(format!("eps must lie in (0, 1] so that 1 <= gamma <= 2, got {}", self.eps));
        }
        if !(self.beta > 0.0) {
            return config(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.ell > 0.0) || is_integer(self.ell) {
            return config(format!("ell must be a positive non-integer, got {}", self.ell));
        }
        let gap = self.ell - 2.0 * s;
        if !(gap > 0.0) || is_integer(gap) {
            return config(format!("ell - 2s = {gap} must be a positive non-integer"));
        }
        if !(self.lattice_spacing > 0.0 && self.lattice_spacing < 1.0) {
            return config(format!("lattice spacing must lie in (0, 1), got {}", self.lattice_spacing));
        }
        Ok(())
    }

    /// `δ = exp(-ε^{-n/((2n+3)ℓ)})`, the modulus scale of the instability
    /// statement.
    pub fn delta_target(&self, n: usize) -> f64 {
        let n = n as f64;
        (-self.eps.powf(-n / ((2.0 * n + 3.0) * self.ell))).exp()
    }

    /// `(β/ε)^{n/ℓ}`, the exponent of the cardinality bound
    /// `exp(C (β/ε)^{n/ℓ})` of an `ε`-discrete subset (constant `C` unknown).
    pub fn log_cardinality_bound(&self, n: usize) -> f64 {
        (self.beta / self.eps).powf(n as f64 / self.ell)
    }
}

#[derive(Debug, Clone)]
pub struct MandacheFamily {
    pub params: MandacheParams,
    pub members: Vec<Conductivity>,
    /// `±1` per lattice site and member.
    pub patterns: Vec<Vec<i8>>,
    pub sites: Vec<[f64; 2]>,
    pub bump_radius: f64,
    /// Smallest pairwise `L^∞(B₁)` distance, measured.
    pub separation: f64,
    /// Largest finite-difference `C^ℓ` estimate over members.
    pub cl_norm: f64,
}

/// Lattice sites `spacing · k`, snapped to grid nodes, whose bumps of radius
/// `0.475 · spacing` fit strictly inside `B₁`.
pub fn lattice_sites(grid: &Grid, spacing: f64) -> (Vec<[f64; 2]>, f64) {
    let r = 0.475 * spacing;
    let h = grid.spacing();
    let kmax = (1.0 / spacing).ceil() as i64;
    let snap = |v: f64| (v / h).round() * h;
    let mut sites = Vec::new();
    let range: Vec<i64> = (-kmax..=kmax).collect();
    let fits = |c: [f64; 2]| c[0].hypot(c[1]) + r < 1.0;
    if grid.dim() == 1 {
        for &k in &range {
            let c = [snap(k as f64 * spacing), 0.0];
            if fits(c) {
                sites.push(c);
            }
        }
    } else {
        for &j in &range {
            for &k in &range {
                let c = [snap(k as f64 * spacing), snap(j as f64 * spacing)];
                if fits(c) {
                    sites.push(c);
                }
            }
        }
    }
    (sites, r)
}

fn central_diff(v: &[f64], axis_len: usize, stride: usize, h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let pos = (i / stride) % axis_len;
        let up = if pos + 1 < axis_len { i + stride } else { i + stride - axis_len * stride };
        let dn = if pos > 0 { i - stride } else { i + (axis_len - 1) * stride };
        *o = (v[up] - v[dn]) / (2.0 * h);
    }
    out
}

/// `Σ_{j≤⌊ℓ⌋} ‖∂^j f‖_∞ + [∂^{⌊ℓ⌋} f]_{ℓ-⌊ℓ⌋}` along each axis, derivatives
/// by central differences and the Hölder quotient over offsets up to
/// `window` nodes.
pub fn cl_norm_estimate(f: &GridField, ell: f64) -> f64 {
    let grid = f.grid;
    let n = grid.points();
    let h = grid.spacing();
    let k = ell.floor() as usize;
    let alpha = ell - k as f64;
    let window = (n / 8).clamp(1, 64);
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut best: f64 = 0.0;
    for axis in 0..grid.dim() {
        let stride = if axis == 0 { 1 } else { n };
        let mut d = f.values.clone();
        let mut total = max_abs(&d);
        for _ in 0..k {
            d = central_diff(&d, n, stride, h);
            total += max_abs(&d);
        }
        let mut holder: f64 = 0.0;
        for i in 0..d.len() {
            let pos = (i / stride) % n;
            for off in 1..=window {
                if pos + off >= n {
                    break;
                }
                let q = (d[i + off * stride] - d[i]).abs() / (off as f64 * h).powf(alpha);
                holder = holder.max(q);
            }
        }
        best = best.max(total + holder);
    }
    best
}

/// `count` members `1 + Σ_k (ε/2)(1 + σ_k) φ_k` with distinct sign patterns
/// `σ`, drawn from per-member random streams (duplicates are redrawn).
pub fn mandache_family(geometry: &GeometryConfig, params: &MandacheParams, count: usize) -> Result<MandacheFamily> {
    params.validate(geometry.s)?;
    if count == 0 {
        return config("family size must be at least 1");
    }
    let grid = geometry.grid();
    let (sites, radius) = lattice_sites(&grid, params.spacing_checked(&grid)?);
    let k = sites.len();
    if k == 0 {
        return config("lattice spacing leaves no site inside the unit ball");
    }
    let capacity = if k >= 63 { u64::MAX } else { 1u64 << k };
    if count as u64 > capacity {
        return config(format!(
            "infeasible: {count} members requested but {k} lattice sites give only {capacity} patterns; \
             an eps-discrete set in the C^ell budget has at most exp(C (beta/eps)^(n/ell)) members, \
             (beta/eps)^(n/ell) = {:.3}",
            params.log_cardinality_bound(geometry.n)
        ));
    }
    let mut patterns: Vec<Vec<i8>> = Vec::with_capacity(count);
    let mut seen = std::collections::HashSet::new();
    let mut member = 0u64;
    let mut draw = 0u64;
    while patterns.len() < count {
        let mut rng = stream(params.seed, member << 20 | draw);
        let p: Vec<i8> = (0..k).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        if seen.insert(p.clone()) {
            patterns.push(p);
            member += 1;
            draw = 0;
        } else {
            draw += 1;
        }
    }
    let bumps: Vec<GridField> = sites
        .iter()
        .map(|c| grid.sample(|p| unit_bump((p[0] - c[0]).hypot(p[1] - c[1]) / radius)))
        .collect();
    let interior = geometry.interior_mask();
    let built: Vec<Result<(Conductivity, f64)>> = patterns
        .par_iter()
        .map(|p| {
            let mut f = grid.zeros();
            for (sg, b) in p.iter().zip(&bumps) {
                let height = 0.5 * params.eps * (1.0 + *sg as f64);
                for (v, w) in f.values.iter_mut().zip(&b.values) {
                    *v += height * w;
                }
            }
            if f.values.iter().zip(&interior).any(|(v, m)| *v != 0.0 && !m) {
                return config("bump support leaves the domain; use a smaller lattice spacing");
            }
            let cl = cl_norm_estimate(&f, params.ell);
            Ok((Conductivity::new(f.map(|v| 1.0 + v), 0.5)?, cl))
        })
        .collect();
    let mut members = Vec::with_capacity(count);
    let mut cl_norm: f64 = 0.0;
    for b in built {
        let (g, cl) = b?;
        cl_norm = cl_norm.max(cl);
        members.push(g);
    }
    if cl_norm > params.beta {
        return config(format!(
            "infeasible: C^ell estimate {cl_norm:.3e} exceeds beta = {:.3e}; \
             raise beta or widen the lattice (cardinality exponent (beta/eps)^(n/ell) = {:.3})",
            params.beta,
            params.log_cardinality_bound(geometry.n)
        ));
    }
    let ball: Vec<bool> = (0..grid.len()).map(|i| grid.radius(i) < 1.0).collect();
    let separation = min_pairwise_gap(&members, &ball);
    if count > 1 && separation < 0.5 * params.eps {
        return Err(Error::Invariant(format!(
            "family separation {separation} below eps/2 = {}",
            0.5 * params.eps
        )));
    }
    Ok(MandacheFamily { params: *params, members, patterns, sites, bump_radius: radius, separation, cl_norm })
}

impl MandacheParams {
    fn spacing_checked(&self, grid: &Grid) -> Result<f64> {
        if 0.475 * self.lattice_spacing < 2.0 * grid.spacing() {
            return config(format!(
                "lattice spacing {} under-resolved on a grid with spacing {}",
                self.lattice_spacing,
                grid.spacing()
            ));
        }
        Ok(self.lattice_spacing)
    }
}

/// `‖γ_i - γ_j‖_{L^∞}` over `mask`.
pub fn sup_gap(a: &Conductivity, b: &Conductivity, mask: &[bool]) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold(0.0, |acc, ((x, y), _)| acc.max((x - y).abs()))
}

fn min_pairwise_gap(members: &[Conductivity], mask: &[bool]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            best = best.min(sup_gap(&members[i], &members[j], mask));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> GeometryConfig {
        GeometryConfig::default_1d()
    }

    #[test]
    fn parameter_validation() {
        let p = MandacheParams::default();
        assert!(p.validate(0.4).is_ok());
        let bad = MandacheParams { ell: 2.8, ..p };
        assert!(matches!(bad.validate(0.4), Err(Error::Config(_))));
        let int = MandacheParams { ell: 3.0, ..p };
        assert!(int.validate(0.4).is_err());
        let wide = MandacheParams { eps: 1.5, ..p };
        assert!(wide.validate(0.4).is_err());
    }

    #[test]
    fn delta_target_value() {
        let p = MandacheParams::default();
        let expected = (-(10f64.powf(1.0 / 12.5))).exp();
        assert!((p.delta_target(1) - expected).abs() < 1e-15);
        assert!((p.delta_target(1) - 0.3005).abs() < 1e-3);
    }

    #[test]
    fn single_member_is_admissible() {
        let fam = mandache_family(&geom(), &MandacheParams::default(), 1).unwrap();
        let (lo, hi) = fam.members[0].min_max();
        assert!(lo >= 1.0 && hi <= 2.0);
    }

    #[test]
    fn family_is_separated_and_supported_in_ball() {
        let g = geom();
        let p = MandacheParams::default();
        let fam = mandache_family(&g, &p, 64).unwrap();
        let grid = g.grid();
        let ball: Vec<bool> = (0..grid.len()).map(|i| grid.radius(i) < 1.0).collect();
        for (i, a) in fam.members.iter().enumerate() {
            let (lo, hi) = a.min_max();
            assert!(lo >= 1.0 && hi <= 1.0 + p.eps + 1e-15);
            for (v, inside) in a.values().iter().zip(&ball) {
                if !inside {
                    assert_eq!(*v, 1.0);
                }
            }
            for b in &fam.members[i + 1..] {
                assert!(sup_gap(a, b, &ball) >= fam.separation);
            }
        }
        assert!(fam.separation >= 0.5 * p.eps);
        assert!((fam.separation - p.eps).abs() < 1e-12);
        assert!(fam.cl_norm <= p.beta);
    }

    #[test]
    fn family_is_reproducible() {
        let p = MandacheParams { seed: 11, ..MandacheParams::default() };
        let a = mandache_family(&geom(), &p, 16).unwrap();
        let b = mandache_family(&geom(), &p, 16).unwrap();
        assert_eq!(a.patterns, b.patterns);
        let c = mandache_family(&geom(), &MandacheParams { seed: 12, ..p }, 16).unwrap();
        assert_ne!(a.patterns, c.patterns);
    }

    #[test]
    fn infeasible_requests_are_reported() {
        let p = MandacheParams::default();
        let err = mandache_family(&geom(), &p, 1 << 12).unwrap_err();
        assert!(err.to_string().contains("(beta/eps)^(n/ell)"), "{err}");
        let tight = MandacheParams { beta: 1.0, ..p };
        let err = mandache_family(&geom(), &tight, 4).unwrap_err();
        assert!(err.to_string().contains("C^ell"), "{err}");
    }

    #[test]
    fn cl_estimate_scales_with_height_and_width() {
        let grid = Grid::new(1, 8.0, 4096).unwrap();
        let narrow = grid.sample(|p| unit_bump(p[0] / 0.25));
        let wide = grid.sample(|p| unit_bump(p[0] / 0.5));
        let a = cl_norm_estimate(&narrow, 2.5);
        assert!((cl_norm_estimate(&narrow.scaled(3.0), 2.5) / a - 3.0).abs() < 1e-12);
        // leading term ∝ r^{-ℓ}
        let ratio = a / cl_norm_estimate(&wide, 2.5);
        assert!(ratio > 3.0 && ratio < 2f64.powf(2.5) * 1.2, "{ratio}");
    }

    #[test]
    fn two_dimensional_family() {
        let g = GeometryConfig::default_2d().with_points(256);
        let p = MandacheParams { lattice_spacing: 0.5, ..MandacheParams::default() };
        let fam = mandache_family(&g, &p, 8).unwrap();
        assert_eq!(fam.sites.len(), 9);
        assert!(fam.separation >= 0.5 * p.eps);
    }
}
