//! Truncation box, uniform grid, the domain Ω and named exterior
//! measurement sets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, input, Error, Result};

/// Uniform periodic grid on `[-L, L)^n` with `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return config(format!("dimension must be 1 or 2, got {dim}"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return config(format!("box half-width must be positive, got {half_width}"));
        }
        if !points.is_power_of_two() || points < 8 {
            return config(format!("grid points per axis must be a power of two >= 8, got {points}"));
        }
        Ok(Grid { dim, half_width, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// `h^n`, the weight of one grid point in sums approximating integrals.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| -self.half_width + h * i as f64).collect()
    }

    /// Coordinates of the point with flat index `idx`; the second entry is 0
    /// in 1D.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        if self.dim == 1 {
            [-self.half_width + h * idx as f64, 0.0]
        } else {
            let (i, j) = (idx / self.points, idx % self.points);
            [-self.half_width + h * i as f64, -self.half_width + h * j as f64]
        }
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let [x, y] = self.point(idx);
        x.hypot(y)
    }

    /// Angular frequencies `πk/L` in FFT order.
    pub fn axis_frequencies(&self) -> Vec<f64> {
        let n = self.points as i64;
        let base = std::f64::consts::PI / self.half_width;
        (0..n).map(|k| base * if k < n / 2 { k } else { k - n } as f64).collect()
    }

    /// `|ξ|` for every entry of the (flattened) spectrum.
    pub fn frequency_magnitudes(&self) -> Vec<f64> {
        let f = self.axis_frequencies();
        if self.dim == 1 {
            f.iter().map(|x| x.abs()).collect()
        } else {
            let mut out = Vec::with_capacity(self.len());
            for a in &f {
                for b in &f {
                    out.push(a.hypot(*b));
                }
            }
            out
        }
    }

    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> GridField {
        let values = (0..self.len()).map(|i| f(self.point(i))).collect();
        GridField { grid: *self, values }
    }

    pub fn zeros(&self) -> GridField {
        GridField { grid: *self, values: vec![0.0; self.len()] }
    }

    pub fn constant(&self, c: f64) -> GridField {
        GridField { grid: *self, values: vec![c; self.len()] }
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Real samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return input(format!("field has {} samples, grid needs {}", values.len(), grid.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return input(format!("non-finite sample at index {i}"));
        }
        Ok(GridField { grid, values })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(GridField { grid: self.grid, values })
    }

    pub fn scaled(&self, c: f64) -> GridField {
        self.map(|v| c * v)
    }

    /// Discrete `∫ u v`.
    pub fn dot(&self, other: &GridField) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete `L^p` norm over the points selected by `mask`.
    pub fn lp_norm_on(&self, p: f64, mask: &[bool]) -> f64 {
        let vol = self.grid.cell_volume();
        if p.is_infinite() {
            return self
                .values
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .fold(0.0, |acc, (v, _)| acc.max(v.abs()));
        }
        let s: f64 = self
            .values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v.abs().powf(p))
            .sum();
        (s * vol).powf(1.0 / p)
    }
}

/// The bounded domain Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    /// Ball of the given radius centred at the origin (an interval in 1D).
    Ball { radius: f64 },
    /// 1D interval `(a, b)`.
    Interval { a: f64, b: f64 },
}

impl Domain {
    /// Strictly inside Ω.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Domain::Ball { radius } => p[0].hypot(p[1]) < radius - 1e-12,
            Domain::Interval { a, b } => p[0] > a + 1e-12 && p[0] < b - 1e-12,
        }
    }

    /// Inside the closure of Ω.
    pub fn closure_contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Domain::Ball { radius } => p[0].hypot(p[1]) <= radius + 1e-12,
            Domain::Interval { a, b } => p[0] >= a - 1e-12 && p[0] <= b + 1e-12,
        }
    }

    /// Radius of the smallest origin-centred ball containing Ω.
    pub fn extent(&self) -> f64 {
        match *self {
            Domain::Ball { radius } => radius,
            Domain::Interval { a, b } => a.abs().max(b.abs()),
        }
    }
}

/// Exterior measurement region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    /// `inner < |x| < outer`; in 1D this is `(-outer,-inner) ∪ (inner,outer)`.
    Annulus { inner: f64, outer: f64 },
    /// 1D interval `(a, b)`.
    Interval { a: f64, b: f64 },
    /// 2D rectangle `(x0, x1) × (y0, y1)`.
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Region {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Region::Annulus { inner, outer } => {
                let r = p[0].hypot(p[1]);
                r > inner && r < outer
            }
            Region::Interval { a, b } => p[0] > a && p[0] < b,
            Region::Rect { x0, x1, y0, y1 } => p[0] > x0 && p[0] < x1 && p[1] > y0 && p[1] < y1,
        }
    }

    /// Radius of the smallest origin-centred ball containing the region.
    pub fn extent(&self) -> f64 {
        match *self {
            Region::Annulus { outer, .. } => outer,
            Region::Interval { a, b } => a.abs().max(b.abs()),
            Region::Rect { x0, x1, y0, y1 } => x0.abs().max(x1.abs()).hypot(y0.abs().max(y1.abs())),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match *self {
            Region::Annulus { inner, outer } if !(inner >= 0.0 && outer > inner) => {
                config(format!("annulus needs 0 <= inner < outer, got ({inner}, {outer})"))
            }
            Region::Interval { a, b } if dim != 1 || a >= b => {
                config(format!("interval ({a}, {b}) needs n = 1 and a < b"))
            }
            Region::Rect { x0, x1, y0, y1 } if dim != 2 || x0 >= x1 || y0 >= y1 => {
                config("rectangle needs n = 2 and positive side lengths")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSet {
    pub name: String,
    pub region: Region,
}

/// Problem geometry: dimension, fractional order, truncation box, Ω and the
/// exterior measurement sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n: usize,
    pub s: f64,
    pub box_halfwidth: f64,
    pub grid_points: usize,
    pub omega: Domain,
    pub measurement_sets: Vec<MeasurementSet>,
}

impl GeometryConfig {
    /// Default 1D layout: Ω = (-1, 1), measurements on `1 < |x| < 3` split
    /// as the annulus `(-3,-2) ∪ (2,3)` plus its two halves.
    pub fn default_1d() -> Self {
        GeometryConfig {
            n: 1,
            s: 0.4,
            box_halfwidth: 8.0,
            grid_points: 1024,
            omega: Domain::Ball { radius: 1.0 },
            measurement_sets: vec![
                MeasurementSet { name: "annulus".into(), region: Region::Annulus { inner: 2.0, outer: 3.0 } },
                MeasurementSet { name: "left".into(), region: Region::Interval { a: -3.0, b: -2.0 } },
                MeasurementSet { name: "right".into(), region: Region::Interval { a: 2.0, b: 3.0 } },
            ],
        }
    }

    pub fn default_2d() -> Self {
        GeometryConfig {
            n: 2,
            s: 0.5,
            box_halfwidth: 8.0,
            grid_points: 128,
            omega: Domain::Ball { radius: 1.0 },
            measurement_sets: vec![MeasurementSet {
                name: "annulus".into(),
                region: Region::Annulus { inner: 2.0, outer: 3.0 },
            }],
        }
    }

    pub fn with_points(mut self, n: usize) -> Self {
        self.grid_points = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let grid = Grid::new(self.n, self.box_halfwidth, self.grid_points)?;
        let s_max = (self.n as f64 / 2.0).min(1.0);
        if !(self.s > 0.0 && self.s < s_max) {
            return config(format!("order s = {} outside (0, {s_max})", self.s));
        }
        if self.grid_points < 64 {
            return config(format!("grid_points must be >= 64, got {}", self.grid_points));
        }
        if let Domain::Interval { a, b } = self.omega {
            if self.n != 1 || a >= b {
                return config("interval domain needs n = 1 and a < b");
            }
        }
        if let Domain::Ball { radius } = self.omega {
            if radius <= 0.0 {
                return config("domain radius must be positive");
            }
        }
        let h = grid.spacing();
        if self.omega.extent() >= self.box_halfwidth - 2.0 * h {
            return config("domain must lie strictly inside the truncation box");
        }
        if !(0..grid.len()).any(|i| self.omega.contains(grid.point(i))) {
            return config("domain contains no grid points");
        }
        let mut names = std::collections::BTreeSet::new();
        for set in &self.measurement_sets {
            set.region.check(self.n)?;
            if !names.insert(set.name.as_str()) {
                return config(format!("duplicate measurement set '{}'", set.name));
            }
            if set.region.extent() >= self.box_halfwidth - 2.0 * h {
                return config(format!("measurement set '{}' leaves the truncation box", set.name));
            }
            let mut any = false;
            for i in 0..grid.len() {
                let p = grid.point(i);
                if set.region.contains(p) {
                    any = true;
                    if self.omega.closure_contains(p) {
                        return config(format!("measurement set '{}' meets the closure of the domain", set.name));
                    }
                }
            }
            if !any {
                return config(format!("measurement set '{}' contains no grid points", set.name));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid { dim: self.n, half_width: self.box_halfwidth, points: self.grid_points }
    }

    pub fn region(&self, name: &str) -> Result<&Region> {
        self.measurement_sets
            .iter()
            .find(|m| m.name == name)
            .map(|m| &m.region)
            .ok_or_else(|| Error::Config(format!("unknown measurement set '{name}'")))
    }

    /// Flat indices of grid points strictly inside Ω, in increasing order.
    pub fn interior_indices(&self) -> Vec<usize> {
        let grid = self.grid();
        (0..grid.len()).filter(|&i| self.omega.contains(grid.point(i))).collect()
    }

    pub fn interior_mask(&self) -> Vec<bool> {
        let grid = self.grid();
        (0..grid.len()).map(|i| self.omega.contains(grid.point(i))).collect()
    }

    /// Points outside the closure of Ω.
    pub fn exterior_mask(&self) -> Vec<bool> {
        let grid = self.grid();
        (0..grid.len()).map(|i| !self.omega.closure_contains(grid.point(i))).collect()
    }

    pub fn region_mask(&self, name: &str) -> Result<Vec<bool>> {
        let region = *self.region(name)?;
        let grid = self.grid();
        Ok((0..grid.len()).map(|i| region.contains(grid.point(i))).collect())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("geometry serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        GeometryConfig::default_1d().validate().unwrap();
        GeometryConfig::default_2d().validate().unwrap();
    }

    #[test]
    fn rejects_bad_order() {
        let mut g = GeometryConfig::default_1d();
        g.s = 0.5;
        assert!(g.validate().is_err());
        let mut g = GeometryConfig::default_2d();
        g.s = 0.7;
        g.validate().unwrap();
        g.s = 1.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn rejects_small_or_odd_grid() {
        assert!(GeometryConfig::default_1d().with_points(32).validate().is_err());
        assert!(GeometryConfig::default_1d().with_points(1000).validate().is_err());
    }

    #[test]
    fn rejects_measurement_touching_domain() {
        let mut g = GeometryConfig::default_1d();
        g.measurement_sets.push(MeasurementSet {
            name: "bad".into(),
            region: Region::Interval { a: 0.5, b: 2.0 },
        });
        assert!(g.validate().is_err());
    }

    #[test]
    fn rejects_set_outside_box() {
        let mut g = GeometryConfig::default_1d();
        g.measurement_sets[0].region = Region::Annulus { inner: 2.0, outer: 9.0 };
        assert!(g.validate().is_err());
    }

    #[test]
    fn default_nodes_hit_region_edges() {
        // With L = 8 and N a power of two the points ±1, ±2, ±3 are nodes.
        let g = GeometryConfig::default_1d();
        let grid = g.grid();
        let axis = grid.axis();
        for x in [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0] {
            assert!(axis.iter().any(|&a| (a - x).abs() < 1e-12));
        }
        let interior = g.interior_indices();
        assert_eq!(interior.len(), 2 * 64 - 1);
    }

    #[test]
    fn frequencies_in_fft_order() {
        let grid = Grid::new(1, std::f64::consts::PI, 8).unwrap();
        let f = grid.axis_frequencies();
        assert_eq!(f, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn hash_tracks_content() {
        let a = GeometryConfig::default_1d();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.s = 0.3;
        assert_ne!(a.hash(), b.hash());
    }
}
