//! Conductivities, the background deviation `m = γ^{1/2} - 1`, the Liouville
//! potential and admissibility checks.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, input, Error, Result};
use crate::geometry::{GeometryConfig, Grid, GridField};
use crate::nonlocal::{frac_laplacian, Stencil};

/// Scalar conductivity sampled on the grid, with ellipticity constant γ₀:
/// `γ₀ ≤ γ ≤ 1/γ₀` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Conductivity {
    field: GridField,
    root: Vec<f64>,
    gamma0: f64,
}

impl Conductivity {
    pub fn new(field: GridField, gamma0: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0 <= 1.0) {
            return input(format!("ellipticity constant must lie in (0, 1], got {gamma0}"));
        }
        let (lo, hi) = (gamma0, 1.0 / gamma0);
        for (i, &g) in field.values.iter().enumerate() {
            if !(g.is_finite() && g > 0.0) {
                return input(format!("nonpositive or non-finite conductivity sample {g} at index {i}"));
            }
            if g < lo * (1.0 - 1e-12) || g > hi * (1.0 + 1e-12) {
                return input(format!("conductivity {g} at index {i} violates bounds [{lo}, {hi}]"));
            }
        }
        let root = field.values.iter().map(|g| g.sqrt()).collect();
        Ok(Conductivity { field, root, gamma0 })
    }

    /// `γ ≡ 1`.
    pub fn unit(grid: Grid) -> Self {
        Conductivity::new(grid.constant(1.0), 1.0).expect("unit conductivity is admissible")
    }

    /// `γ = (1 + m)²` for a given background deviation.
    pub fn from_deviation(m: &GridField, gamma0: f64) -> Result<Self> {
        Conductivity::new(m.map(|v| (1.0 + v) * (1.0 + v)), gamma0)
    }

    pub fn field(&self) -> &GridField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    pub fn grid(&self) -> Grid {
        self.field.grid
    }

    /// `γ^{1/2}` samples.
    pub fn root(&self) -> &[f64] {
        &self.root
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.field
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    }

    /// `cγ` for a constant `c > 0`, with γ₀ adjusted to keep the bounds.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let field = self.field.scaled(c);
        let (lo, hi) = self.min_max();
        let g0 = (c * lo).min(1.0 / (c * hi)).min(self.gamma0).min(1.0);
        Conductivity::new(field, g0)
    }
}

/// `m = γ^{1/2} - 1`.
pub fn background_deviation(gamma: &Conductivity) -> GridField {
    GridField { grid: gamma.grid(), values: gamma.root.iter().map(|g| g - 1.0).collect() }
}

/// Liouville potential on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub field: GridField,
}

impl Potential {
    pub fn zero(grid: Grid) -> Self {
        Potential { field: grid.zeros() }
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    /// The same potential set to zero off `mask`.
    pub fn restricted(&self, mask: &[bool]) -> Potential {
        let values = self.field.values.iter().zip(mask).map(|(&q, &m)| if m { q } else { 0.0 }).collect();
        Potential { field: GridField { grid: self.field.grid, values } }
    }
}

/// `q_γ = -(-Δ)^s m / γ^{1/2}`.
///
/// With this sign the substitution `v = γ^{1/2} u` satisfies
/// `B_γ(u, φ) = ⟨(-Δ)^{s/2}(γ^{1/2}u), (-Δ)^{s/2}(γ^{1/2}φ)⟩ + ⟨q (γ^{1/2}u), γ^{1/2}φ⟩`
/// exactly for the discrete operators; testing with `u ≡ 1` fixes the sign.
pub fn liouville_potential(gamma: &Conductivity, stencil: &Stencil) -> Result<Potential> {
    let m = background_deviation(gamma);
    let lm = frac_laplacian(&m, stencil)?;
    let values = lm.values.iter().zip(&gamma.root).map(|(l, g)| -l / g).collect();
    Ok(Potential { field: GridField { grid: gamma.grid(), values } })
}

/// Open interval `(max(1/2, 2s/n), 1)` of admissible θ₀.
pub fn theta0_interval(n: usize, s: f64) -> (f64, f64) {
    (0.5f64.max(2.0 * s / n as f64), 1.0)
}

pub fn check_theta0(n: usize, s: f64, theta0: f64) -> Result<()> {
    let (lo, hi) = theta0_interval(n, s);
    if theta0 > lo && theta0 < hi {
        Ok(())
    } else {
        config(format!("theta0 = {theta0} outside ({lo}, {hi})"))
    }
}

/// Largest admissible data size for the smallness hypothesis: the gate
/// `x ≤ 3^{-1/δ}` for some `δ < (1-θ₀)/2` holds iff `x < 3^{-2/(1-θ₀)}`.
pub fn smallness_threshold(theta0: f64) -> f64 {
    3f64.powf(-2.0 / (1.0 - theta0))
}

/// User thresholds standing in for the a priori constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibilityThresholds {
    /// Bound on the Bessel-norm surrogate of each `m_i`.
    pub c1: f64,
    /// Bound on `‖(-Δ)^s m_i‖_{L¹(Ω_e)}`.
    pub c2: f64,
    /// Regularity margin ε in the order `4s + 2ε`.
    pub regularity_margin: f64,
}

impl Default for AdmissibilityThresholds {
    fn default() -> Self {
        AdmissibilityThresholds { c1: 1e3, c2: 1e3, regularity_margin: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ok: bool,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub ellipticity_ok: bool,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Bessel-norm surrogates of `m_1`, `m_2` against `c1`.
    pub smoothness: [Check; 2],
    /// `‖(-Δ)^s m_i‖_{L¹(Ω_e)}` against `c2`.
    pub exterior_l1: [Check; 2],
    /// `m_i` vanish near the edge of the truncation box.
    pub support_ok: bool,
    pub theta0: f64,
    pub theta0_ok: bool,
    /// Smallness gate on `‖ΔΛ‖_*`, when a DN difference was supplied.
    pub gate: Option<Check>,
    pub all_ok: bool,
}

/// `‖J^t m‖_{L^p}` with `J^t` the Bessel potential `(1 + |ξ|²)^{t/2}`,
/// `t = 4s + 2ε`, `p = n/(2s)`.
pub fn smoothness_surrogate(m: &GridField, s: f64, margin: f64) -> f64 {
    let grid = m.grid;
    let t = 4.0 * s + 2.0 * margin;
    let p = grid.dim() as f64 / (2.0 * s);
    let symbol: Vec<f64> = grid.frequency_magnitudes().iter().map(|x| (1.0 + x * x).powf(t / 2.0)).collect();
    let tr = crate::fft::Transform::new(grid.dim(), grid.points());
    let jm = GridField { grid, values: tr.apply_symbol(&m.values, &symbol) };
    jm.lp_norm_on(p, &vec![true; grid.len()])
}

/// Ratio of the smoothness surrogate at `4N` to that at `N` for a
/// conductivity profile. Smooth profiles give ratios near 1; a jump gives a
/// ratio near `4^{t - 1/p}`.
pub fn refinement_growth(
    geometry: &GeometryConfig,
    margin: f64,
    profile: impl Fn([f64; 2]) -> f64,
) -> Result<f64> {
    let coarse = geometry.grid();
    let fine = Grid::new(coarse.dim(), coarse.half_width(), coarse.points() * 4)?;
    let m = |g: Grid| g.sample(|p| profile(p).sqrt() - 1.0);
    let a = smoothness_surrogate(&m(coarse), geometry.s, margin);
    let b = smoothness_surrogate(&m(fine), geometry.s, margin);
    Ok(if a > 0.0 { b / a } else { 1.0 })
}

/// Growth factor above which [`refinement_growth`] flags a profile.
pub const GROWTH_LIMIT: f64 = 2.0;

fn support_ok(m: &GridField) -> bool {
    let grid = m.grid;
    let edge = 0.9 * grid.half_width();
    (0..grid.len()).all(|i| {
        let p = grid.point(i);
        p[0].abs().max(p[1].abs()) < edge || m.values[i].abs() <= 1e-12
    })
}

/// Checks the hypotheses of the interior stability estimate for a pair.
/// A θ₀ outside its interval is an error.
pub fn validate_admissibility(
    g1: &Conductivity,
    g2: &Conductivity,
    theta0: f64,
    geometry: &GeometryConfig,
    stencil: &Stencil,
    thresholds: &AdmissibilityThresholds,
    dn_difference: Option<f64>,
) -> Result<AdmissibilityReport> {
    g1.grid().ensure_same(&g2.grid())?;
    g1.grid().ensure_same(&geometry.grid())?;
    check_theta0(geometry.n, geometry.s, theta0)?;

    let (min1, max1) = g1.min_max();
    let (min2, max2) = g2.min_max();
    let gamma_min = min1.min(min2);
    let gamma_max = max1.max(max2);
    let ellipticity_ok = [g1, g2].iter().all(|g| {
        let (lo, hi) = g.min_max();
        lo >= g.gamma0 * (1.0 - 1e-12) && hi <= (1.0 + 1e-12) / g.gamma0
    });

    let exterior = geometry.exterior_mask();
    let mut smoothness = [Check { ok: true, value: 0.0, limit: thresholds.c1 }; 2];
    let mut exterior_l1 = [Check { ok: true, value: 0.0, limit: thresholds.c2 }; 2];
    let mut support = true;
    for (k, g) in [g1, g2].into_iter().enumerate() {
        let m = background_deviation(g);
        let sm = smoothness_surrogate(&m, geometry.s, thresholds.regularity_margin);
        smoothness[k] = Check { ok: sm <= thresholds.c1, value: sm, limit: thresholds.c1 };
        let lm = frac_laplacian(&m, stencil)?;
        let l1 = lm.lp_norm_on(1.0, &exterior);
        exterior_l1[k] = Check { ok: l1 <= thresholds.c2, value: l1, limit: thresholds.c2 };
        support &= support_ok(&m);
    }
    let gate = dn_difference.map(|x| {
        let limit = smallness_threshold(theta0);
        Check { ok: x < limit, value: x, limit }
    });
    let all_ok = ellipticity_ok
        && smoothness.iter().all(|c| c.ok)
        && exterior_l1.iter().all(|c| c.ok)
        && support
        && gate.is_none_or(|c| c.ok);
    Ok(AdmissibilityReport {
        ellipticity_ok,
        gamma_min,
        gamma_max,
        smoothness,
        exterior_l1,
        support_ok: support,
        theta0,
        theta0_ok: true,
        gate,
        all_ok,
    })
}

/// Header of a binary grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct GridHeader {
    pub n: usize,
    pub s: f64,
    pub box_halfwidth: f64,
    pub grid_points: usize,
    pub gamma0: f64,
    pub seed: u64,
}

pub const GRID_FORMAT: &str = "fracstab-grid";
pub const GRID_VERSION: u32 = 1;

/// Writes a text header terminated by `end` followed by little-endian f64
/// samples.
pub fn write_grid_file(path: &Path, header: &GridHeader, field: &GridField) -> Result<()> {
    if field.grid.dim() != header.n || field.grid.points() != header.grid_points {
        return Err(Error::GeometryMismatch("header does not describe the field's grid".into()));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{GRID_FORMAT} v{GRID_VERSION}")?;
    writeln!(out, "n={}", header.n)?;
    writeln!(out, "s={:?}", header.s)?;
    writeln!(out, "L={:?}", header.box_halfwidth)?;
    writeln!(out, "N={}", header.grid_points)?;
    writeln!(out, "gamma0={:?}", header.gamma0)?;
    writeln!(out, "seed={}", header.seed)?;
    writeln!(out, "end")?;
    for v in &field.values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_grid_file(path: &Path) -> Result<(GridHeader, GridField)> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let magic = line.trim_end();
    let version = magic
        .strip_prefix(GRID_FORMAT)
        .and_then(|r| r.trim().strip_prefix('v'))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| Error::Cache(format!("not a grid file: '{magic}'")))?;
    if version != GRID_VERSION {
        return Err(Error::Version {
            found: version,
            expected: GRID_VERSION,
            hint: "regenerate the file with this build".into(),
        });
    }
    let mut kv = std::collections::BTreeMap::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Cache("grid header not terminated".into()));
        }
        let l = line.trim_end();
        if l == "end" {
            break;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| Error::Cache(format!("bad header line '{l}'")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| kv.get(k).cloned().ok_or_else(|| Error::Cache(format!("missing header key '{k}'")));
    let bad = |k: &str| Error::Cache(format!("bad value for '{k}'"));
    let header = GridHeader {
        n: get("n")?.parse().map_err(|_| bad("n"))?,
        s: get("s")?.parse().map_err(|_| bad("s"))?,
        box_halfwidth: get("L")?.parse().map_err(|_| bad("L"))?,
        grid_points: get("N")?.parse().map_err(|_| bad("N"))?,
        gamma0: get("gamma0")?.parse().map_err(|_| bad("gamma0"))?,
        seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
    };
    let grid = Grid::new(header.n, header.box_halfwidth, header.grid_points)?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::Cache(format!("expected {} payload bytes, found {}", grid.len() * 8, bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, GridField { grid, values }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlocal::FracOperator;
    use crate::special::unit_bump;
    use proptest::prelude::*;

    fn geom() -> GeometryConfig {
        GeometryConfig::default_1d().with_points(256)
    }

    #[test]
    fn deviation_examples() {
        let grid = geom().grid();
        assert!(background_deviation(&Conductivity::unit(grid)).max_abs() == 0.0);
        let four = Conductivity::new(grid.constant(4.0), 0.25).unwrap();
        assert!(background_deviation(&four).values.iter().all(|&m| (m - 1.0).abs() < 1e-15));
        let bump = Conductivity::new(grid.sample(|p| 1.0 + 3.0 * unit_bump(p[0] / 0.5)), 0.25).unwrap();
        let m = background_deviation(&bump);
        let mid = grid.points() / 2;
        assert!((m.values[mid] - 1.0).abs() < 1e-15);
        assert!(m.values.iter().all(|&v| (-1e-15..=1.0 + 1e-15).contains(&v)));
    }

    #[test]
    fn rejects_nonpositive_and_out_of_bounds() {
        let grid = geom().grid();
        let mut v = vec![1.0; grid.len()];
        v[3] = 0.0;
        assert!(Conductivity::new(GridField { grid, values: v.clone() }, 0.5).is_err());
        v[3] = 3.0;
        assert!(Conductivity::new(GridField { grid, values: v }, 0.5).is_err());
    }

    #[test]
    fn potential_vanishes_for_constants() {
        let grid = geom().grid();
        let st = Stencil::new(grid, FracOperator::quadrature(0.4).unwrap());
        for c in [1.0, 2.5] {
            let g = Conductivity::new(grid.constant(c), 0.3).unwrap();
            let q = liouville_potential(&g, &st).unwrap();
            assert!(q.field.max_abs() < 1e-9);
        }
    }

    #[test]
    fn potential_is_first_order_in_the_deviation() {
        // γ^{1/2} = 1 + t f  ⇒  q = -t (-Δ)^s f + O(t²)
        let grid = geom().grid();
        let st = Stencil::new(grid, FracOperator::quadrature(0.4).unwrap());
        let f = grid.sample(|p| unit_bump(p[0] / 0.7));
        let lf = frac_laplacian(&f, &st).unwrap();
        let mut prev = f64::INFINITY;
        for t in [1e-2, 1e-3] {
            let g = Conductivity::from_deviation(&f.scaled(t), 0.5).unwrap();
            let q = liouville_potential(&g, &st).unwrap();
            let diff = q.field.zip_with(&lf, |a, b| a + t * b).unwrap();
            let ratio = diff.l2_norm() / t;
            assert!(ratio < prev);
            prev = ratio;
        }
        assert!(prev < 1e-2 * lf.l2_norm());
    }

    #[test]
    fn theta0_interval_examples() {
        assert!(check_theta0(1, 0.4, 0.75).is_err());
        assert!(check_theta0(1, 0.4, 0.85).is_ok());
        assert!(check_theta0(1, 0.4, 1.0).is_err());
        let (lo, _) = theta0_interval(2, 0.3);
        assert_eq!(lo, 0.5);
    }

    #[test]
    fn unit_pair_is_admissible_with_zero_norms() {
        let g = geom();
        let grid = g.grid();
        let st = Stencil::new(grid, FracOperator::quadrature(g.s).unwrap());
        let one = Conductivity::unit(grid);
        let r = validate_admissibility(&one, &one, 0.85, &g, &st, &AdmissibilityThresholds::default(), Some(0.0))
            .unwrap();
        assert!(r.all_ok);
        assert_eq!(r.smoothness[0].value, 0.0);
        assert!(r.exterior_l1[1].value < 1e-12);
        let err = validate_admissibility(&one, &one, 0.75, &g, &st, &AdmissibilityThresholds::default(), None);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn jump_is_flagged_by_refinement() {
        let g = geom();
        let smooth = refinement_growth(&g, 0.05, |p| 1.0 + 0.5 * unit_bump(p[0] / 0.8)).unwrap();
        let jump = refinement_growth(&g, 0.05, |p| if p[0].abs() < 0.5 { 1.5 } else { 1.0 }).unwrap();
        assert!(smooth < 1.1, "smooth growth {smooth}");
        assert!(jump > GROWTH_LIMIT, "jump growth {jump}");
    }

    #[test]
    fn smallness_threshold_matches_formula() {
        assert!((smallness_threshold(0.9) / 3f64.powi(-20) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_file_roundtrip_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let grid = geom().grid();
        let f = grid.sample(|p| 1.0 + 0.1 * p[0].sin());
        let h = GridHeader { n: 1, s: 0.4, box_halfwidth: 8.0, grid_points: 256, gamma0: 0.5, seed: 9 };
        let path = dir.path().join("g.bin");
        write_grid_file(&path, &h, &f).unwrap();
        let (h2, f2) = read_grid_file(&path).unwrap();
        assert_eq!(h, h2);
        assert_eq!(f, f2);
        let text = std::fs::read(&path).unwrap();
        let mut bumped = b"fracstab-grid v2".to_vec();
        bumped.extend_from_slice(&text[b"fracstab-grid v1".len()..]);
        std::fs::write(&path, bumped).unwrap();
        assert!(matches!(read_grid_file(&path), Err(Error::Version { .. })));
    }

    proptest! {
        #[test]
        fn deviation_roundtrip(vals in proptest::collection::vec(-0.29f64..0.4, 64)) {
            let grid = Grid::new(1, 4.0, 64).unwrap();
            let m = GridField::new(grid, vals).unwrap();
            let g = Conductivity::from_deviation(&m, 0.5).unwrap();
            let back = background_deviation(&g);
            for (a, b) in m.values.iter().zip(&back.values) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
