//! Exterior bases, discrete Dirichlet-to-Neumann matrices and the dual
//! operator norm `‖·‖_*`.
//!
//! For a basis `f_1..f_k` of exterior data the DN matrix is
//! `M_ij = ⟨Λ f_i, f_j⟩ = B(u_{f_i}, f̄_j)` with `f̄_j` the zero extension.
//! The operator norm over the basis span is the largest singular value of
//! `G^{-1/2} M G^{-1/2}` with `G` the `H^s` Gram matrix; it is a lower bound
//! for the norm over all of `H^s(Ω_e)`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, input, Error, Result};
use crate::geometry::{GeometryConfig, GridField, Region};
use crate::nonlocal::{hs_gram, Stencil};
use crate::solver::{CoefficientRef, ExteriorDatum, ForwardProblem};
use crate::special::{jacobi, unit_bump};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Bumps,
    Harmonic,
}

/// Exponent `p` of the radial window `(1 - t²)^p` and of the Jacobi family
/// `P_h^{(p,p)}` orthogonal under it.
pub const RADIAL_WINDOW: i32 = 4;

/// Angular modes of the 2D harmonic basis, `(k, is_sine)`.
pub const ANGULAR_MODES: [(usize, bool); 8] = [
    (0, false),
    (1, false),
    (1, true),
    (2, false),
    (2, true),
    (3, false),
    (3, true),
    (4, false),
];

/// Identification of one basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisLabel {
    /// Radial (or lattice) index.
    pub radial: usize,
    /// Angular order; parity in 1D.
    pub angular: usize,
    /// Sine rather than cosine (2D harmonic only).
    pub sine: bool,
}

impl BasisLabel {
    /// Harmonic order `h + k`.
    pub fn order(&self) -> usize {
        self.radial + self.angular
    }
}

#[derive(Debug, Clone)]
pub struct ExteriorBasis {
    geometry_hash: String,
    descriptor: String,
    functions: Vec<ExteriorDatum>,
    regions: Vec<String>,
    labels: Vec<BasisLabel>,
    gram: Vec<Vec<f64>>,
    min_gram_eigenvalue: f64,
}

impl ExteriorBasis {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[ExteriorDatum] {
        &self.functions
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn gram(&self) -> &[Vec<f64>] {
        &self.gram
    }

    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.min_gram_eigenvalue
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn geometry_hash(&self) -> &str {
        &self.geometry_hash
    }

    /// Builds a basis from explicit exterior functions attributed to `region`.
    pub fn from_functions(
        geometry: &GeometryConfig,
        region: &str,
        descriptor: impl Into<String>,
        functions: Vec<GridField>,
    ) -> Result<Self> {
        let mask = geometry.region_mask(region)?;
        let mut data = Vec::with_capacity(functions.len());
        for (i, f) in functions.into_iter().enumerate() {
            if f.values.iter().zip(&mask).any(|(v, m)| *v != 0.0 && !m) {
                return input(format!("basis function {i} escapes measurement set '{region}'"));
            }
            data.push(ExteriorDatum::new(f, geometry)?);
        }
        let labels = (0..data.len()).map(|i| BasisLabel { radial: i, angular: 0, sine: false }).collect();
        let regions = vec![region.to_string(); data.len()];
        Self::assemble(geometry, descriptor.into(), data, regions, labels)
    }

    fn assemble(
        geometry: &GeometryConfig,
        descriptor: String,
        functions: Vec<ExteriorDatum>,
        regions: Vec<String>,
        labels: Vec<BasisLabel>,
    ) -> Result<Self> {
        if functions.is_empty() {
            return input("empty basis");
        }
        let fields: Vec<GridField> = functions.iter().map(|f| f.field().clone()).collect();
        let gram = hs_gram(&fields, geometry.s)?;
        let eig = SymmetricEigen::new(to_matrix(&gram)).eigenvalues;
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.iter().copied().fold(0.0, f64::max);
        if !(min > 1e-12 * max) {
            return input(format!(
                "basis is rank deficient on its region (Gram eigenvalues {min:e} .. {max:e}); request fewer functions or a finer grid"
            ));
        }
        Ok(ExteriorBasis {
            geometry_hash: geometry.hash(),
            descriptor,
            functions,
            regions,
            labels,
            gram,
            min_gram_eigenvalue: min,
        })
    }

    /// Union of bases on the same geometry, in order.
    pub fn concat(geometry: &GeometryConfig, parts: &[ExteriorBasis]) -> Result<Self> {
        let mut functions = Vec::new();
        let mut regions = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.geometry_hash != geometry.hash() {
                return Err(Error::GeometryMismatch("basis built on another geometry".into()));
            }
            functions.extend(p.functions.iter().cloned());
            regions.extend(p.regions.iter().cloned());
            labels.extend(p.labels.iter().copied());
        }
        let descriptor = parts.iter().map(|p| p.descriptor.as_str()).collect::<Vec<_>>().join("+");
        Self::assemble(geometry, descriptor, functions, regions, labels)
    }

    /// Indices of functions attributed to `region`.
    pub fn indices_in(&self, region: &str) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.regions[i] == region).collect()
    }

    /// Least-squares coefficients of `target` in the basis (`L²` on the
    /// grid) and the relative residual of the projection.
    pub fn project(&self, target: &GridField) -> Result<(Vec<f64>, f64)> {
        let k = self.len();
        let grid = target.grid;
        let a = DMatrix::from_fn(grid.len(), k, |r, c| self.functions[c].field().values[r]);
        let b = nalgebra::DVector::from_column_slice(&target.values);
        let svd = a.clone().svd(true, true);
        let x = svd.solve(&b, 1e-12).map_err(|e| Error::Input(e.to_string()))?;
        let r = &a * &x - &b;
        let tn = b.norm();
        Ok((x.iter().copied().collect(), if tn > 0.0 { r.norm() / tn } else { 0.0 }))
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let k = rows.len();
    DMatrix::from_fn(k, k, |i, j| rows[i][j])
}

/// Radial window-Jacobi factor on `(inner, outer)`.
fn radial_factor(h: usize, r: f64, inner: f64, outer: f64) -> f64 {
    if r <= inner || r >= outer {
        return 0.0;
    }
    let t = (2.0 * r - inner - outer) / (outer - inner);
    let p = RADIAL_WINDOW as f64;
    (1.0 - t * t).powi(RADIAL_WINDOW) * jacobi(h, p, p, t)
}

fn harmonic_functions(geometry: &GeometryConfig, region: &Region, size: usize) -> Result<Vec<(BasisLabel, GridField)>> {
    let grid = geometry.grid();
    let mut out = Vec::with_capacity(size);
    match (*region, geometry.n) {
        (Region::Annulus { inner, outer }, 1) => {
            for i in 0..size {
                let (h, k) = (i / 2, i % 2);
                let f = grid.sample(|p| {
                    let sign = if k == 1 { p[0].signum() } else { 1.0 };
                    radial_factor(h, p[0].abs(), inner, outer) * sign
                });
                out.push((BasisLabel { radial: h, angular: k, sine: false }, f));
            }
        }
        (Region::Interval { a, b }, 1) => {
            for h in 0..size {
                let f = grid.sample(|p| radial_factor(h, p[0], a, b));
                out.push((BasisLabel { radial: h, angular: 0, sine: false }, f));
            }
        }
        (Region::Annulus { inner, outer }, 2) => {
            let m = ANGULAR_MODES.len();
            for i in 0..size {
                let h = i / m;
                let (k, sine) = ANGULAR_MODES[i % m];
                let f = grid.sample(|p| {
                    let r = p[0].hypot(p[1]);
                    let th = p[1].atan2(p[0]);
                    let ang = if sine { (k as f64 * th).sin() } else { (k as f64 * th).cos() };
                    radial_factor(h, r, inner, outer) * ang
                });
                out.push((BasisLabel { radial: h, angular: k, sine }, f));
            }
        }
        _ => return config("harmonic basis needs an annulus (or a 1D interval)"),
    }
    Ok(out)
}

fn bump_functions(geometry: &GeometryConfig, region: &Region, size: usize) -> Result<Vec<(BasisLabel, GridField)>> {
    let grid = geometry.grid();
    let mut centres: Vec<([f64; 2], f64)> = Vec::with_capacity(size);
    match (*region, geometry.n) {
        (Region::Interval { a, b }, 1) => {
            let sp = (b - a) / size as f64;
            for i in 0..size {
                centres.push(([a + sp * (i as f64 + 0.5), 0.0], 0.475 * sp));
            }
        }
        (Region::Annulus { inner, outer }, 1) => {
            let per_side = size.div_ceil(2);
            let sp = (outer - inner) / per_side as f64;
            for i in 0..size {
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                let x = inner + sp * ((i / 2) as f64 + 0.5);
                centres.push(([side * x, 0.0], 0.475 * sp));
            }
        }
        (Region::Annulus { inner, outer }, 2) => {
            let mid = 0.5 * (inner + outer);
            let arc = 2.0 * std::f64::consts::PI * mid / size as f64;
            let r = 0.475 * arc.min(outer - inner);
            for i in 0..size {
                let th = 2.0 * std::f64::consts::PI * i as f64 / size as f64;
                centres.push(([mid * th.cos(), mid * th.sin()], r));
            }
        }
        (Region::Rect { x0, x1, y0, y1 }, 2) => {
            let nx = (size as f64).sqrt().ceil() as usize;
            let ny = size.div_ceil(nx);
            let (sx, sy) = ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64);
            for i in 0..size {
                let c = [x0 + sx * ((i % nx) as f64 + 0.5), y0 + sy * ((i / nx) as f64 + 0.5)];
                centres.push((c, 0.475 * sx.min(sy)));
            }
        }
        _ => return config("bump basis does not support this region in this dimension"),
    }
    Ok(centres
        .into_iter()
        .enumerate()
        .map(|(i, (c, r))| {
            let f = grid.sample(|p| unit_bump((p[0] - c[0]).hypot(p[1] - c[1]) / r));
            (BasisLabel { radial: i, angular: 0, sine: false }, f)
        })
        .collect())
}

/// `size` exterior functions on the named measurement set, each normalised
/// to unit `H^s` norm.
pub fn build_exterior_basis(
    geometry: &GeometryConfig,
    region_name: &str,
    size: usize,
    kind: BasisKind,
) -> Result<ExteriorBasis> {
    if size == 0 {
        return input("basis size must be at least 1");
    }
    let region = *geometry.region(region_name)?;
    let raw = match kind {
        BasisKind::Harmonic => harmonic_functions(geometry, &region, size)?,
        BasisKind::Bumps => bump_functions(geometry, &region, size)?,
    };
    let mut functions = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    for (i, (label, f)) in raw.into_iter().enumerate() {
        let norm = crate::nonlocal::hs_norm(&f, geometry.s);
        if !(norm > 0.0) {
            return input(format!(
                "basis function {i} has no grid support in '{region_name}'; the region is too small for size {size}"
            ));
        }
        functions.push(ExteriorDatum::new(f.scaled(1.0 / norm), geometry)?);
        labels.push(label);
    }
    let kind_name = match kind {
        BasisKind::Bumps => "bumps",
        BasisKind::Harmonic => "harmonic",
    };
    let regions = vec![region_name.to_string(); functions.len()];
    ExteriorBasis::assemble(geometry, format!("{kind_name}:{region_name}:{size}"), functions, regions, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Conductivity,
    Schrodinger,
    Difference,
}

impl Equation {
    fn as_str(&self) -> &'static str {
        match self {
            Equation::Conductivity => "conductivity",
            Equation::Schrodinger => "schrodinger",
            Equation::Difference => "difference",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "conductivity" => Ok(Equation::Conductivity),
            "schrodinger" => Ok(Equation::Schrodinger),
            "difference" => Ok(Equation::Difference),
            _ => Err(Error::Cache(format!("unknown equation tag '{s}'"))),
        }
    }
}

/// DN matrix block. `rows` and `cols` index into the basis it was built on.
#[derive(Debug, Clone, PartialEq)]
pub struct DnMatrix {
    pub equation: Equation,
    pub basis: String,
    pub geometry_hash: String,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Row-major `rows.len() × cols.len()` entries.
    pub entries: Vec<f64>,
    /// `max |B(u_i, u_j) - B(u_i, f̄_j)| / max |M|`: dependence of the
    /// pairing on the extension of the test datum.
    pub extension_defect: f64,
    /// Largest relative residual of the forward solves behind the entries.
    pub solve_residual: f64,
}

impl DnMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols.len() + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `|M - Mᵀ|_max / |M|_max` for square blocks on identical index sets.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::NAN;
        }
        let k = self.rows.len();
        let mut d: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                d = d.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        let m = self.max_abs();
        if m > 0.0 {
            d / m
        } else {
            0.0
        }
    }

    /// `self - other` on the same basis block.
    pub fn difference(&self, other: &DnMatrix) -> Result<DnMatrix> {
        if self.basis != other.basis || self.rows != other.rows || self.cols != other.cols {
            return input("DN matrices live on different basis blocks");
        }
        if self.geometry_hash != other.geometry_hash {
            return Err(Error::GeometryMismatch("DN matrices from different geometries".into()));
        }
        Ok(DnMatrix {
            equation: Equation::Difference,
            basis: self.basis.clone(),
            geometry_hash: self.geometry_hash.clone(),
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
            extension_defect: self.extension_defect.max(other.extension_defect),
            solve_residual: self.solve_residual.max(other.solve_residual),
        })
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows.len(), self.cols.len(), &self.entries)
    }
}

/// Assembles `M_ij = B(u_{f_i}, f̄_j)` for the conductivity or Schrödinger
/// equation.
pub fn assemble_dn(
    geometry: &GeometryConfig,
    stencil: &Stencil,
    coefficient: CoefficientRef<'_>,
    basis: &ExteriorBasis,
    tol: f64,
) -> Result<DnMatrix> {
    if basis.geometry_hash != geometry.hash() {
        return Err(Error::GeometryMismatch("basis built on another geometry".into()));
    }
    let (problem, equation) = match coefficient {
        CoefficientRef::Conductivity(g) => (ForwardProblem::conductivity(geometry, stencil, g)?, Equation::Conductivity),
        CoefficientRef::Potential(q) => (ForwardProblem::schrodinger(geometry, stencil, q)?, Equation::Schrodinger),
    };
    let sols = problem.solve_many(basis.functions(), tol)?;
    let residual = sols.iter().fold(0.0f64, |m, s| m.max(s.residual));
    let mut m = dn_from_solutions(&problem, equation, basis, &sols.into_iter().map(|s| s.u).collect::<Vec<_>>())?;
    m.solve_residual = residual;
    Ok(m)
}

fn dn_from_solutions(
    problem: &ForwardProblem<'_>,
    equation: Equation,
    basis: &ExteriorBasis,
    sols: &[GridField],
) -> Result<DnMatrix> {
    use rayon::prelude::*;
    let k = basis.len();
    let vol = sols[0].grid.cell_volume();
    let applied: Vec<Vec<f64>> = sols.par_iter().map(|u| problem.apply(&u.values)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * vol;
    let mut entries = vec![0.0; k * k];
    let mut defect: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let m = dot(&applied[i], &basis.functions[j].field().values);
            let full = dot(&applied[i], &sols[j].values);
            entries[i * k + j] = m;
            defect = defect.max((m - full).abs());
        }
    }
    let mx = entries.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(DnMatrix {
        equation,
        basis: basis.descriptor.clone(),
        geometry_hash: basis.geometry_hash.clone(),
        rows: (0..k).collect(),
        cols: (0..k).collect(),
        entries,
        extension_defect: if mx > 0.0 { defect / mx } else { 0.0 },
        solve_residual: 0.0,
    })
}

fn inverse_sqrt(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-14 * max)) {
        return input("singular Gram matrix (rank-deficient basis)");
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Largest singular value of `G_r^{-1/2} ΔM G_c^{-1/2}` with the Gram
/// blocks of the rows and columns of `delta`.
pub fn dn_operator_norm(delta: &DnMatrix, basis: &ExteriorBasis) -> Result<f64> {
    if delta.basis != basis.descriptor {
        return input("DN block and basis do not match");
    }
    let block = |idx: &[usize]| DMatrix::from_fn(idx.len(), idx.len(), |a, b| basis.gram[idx[a]][idx[b]]);
    let gr = inverse_sqrt(&block(&delta.rows))?;
    let gc = inverse_sqrt(&block(&delta.cols))?;
    let m = gr * delta.to_matrix() * gc;
    if m.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    Ok(m.singular_values().iter().copied().fold(0.0, f64::max))
}

/// Block of `m` with rows on `rows_region` and columns on `cols_region`,
/// the pairing `⟨Λ f, g⟩` with `f` supported in one set and `g` in the other.
pub fn restrict_dn(m: &DnMatrix, basis: &ExteriorBasis, rows_region: &str, cols_region: &str) -> Result<DnMatrix> {
    let pick = |region: &str, idx: &[usize]| -> Result<Vec<usize>> {
        let sel: Vec<usize> = (0..idx.len()).filter(|&a| basis.regions[idx[a]] == region).collect();
        if sel.is_empty() {
            return input(format!("no basis functions attributed to '{region}'"));
        }
        Ok(sel)
    };
    let r = pick(rows_region, &m.rows)?;
    let c = pick(cols_region, &m.cols)?;
    let mut entries = Vec::with_capacity(r.len() * c.len());
    for &a in &r {
        for &b in &c {
            entries.push(m.get(a, b));
        }
    }
    Ok(DnMatrix {
        equation: m.equation,
        basis: m.basis.clone(),
        geometry_hash: m.geometry_hash.clone(),
        rows: r.iter().map(|&a| m.rows[a]).collect(),
        cols: c.iter().map(|&b| m.cols[b]).collect(),
        entries,
        extension_defect: m.extension_defect,
        solve_residual: m.solve_residual,
    })
}

pub const DN_FORMAT: &str = "fracstab-dn";
pub const DN_VERSION: u32 = 1;

fn join(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

fn header_lines(m: &DnMatrix, payload_hash: &str) -> Vec<String> {
    vec![
        format!("equation={}", m.equation.as_str()),
        format!("basis={}", m.basis),
        format!("geometry_hash={}", m.geometry_hash),
        format!("rows={}", join(&m.rows)),
        format!("cols={}", join(&m.cols)),
        format!("extension_defect={:?}", m.extension_defect),
        format!("solve_residual={:?}", m.solve_residual),
        format!("payload_sha256={payload_hash}"),
    ]
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content key of a DN assembly: geometry, operator, equation and
/// coefficient samples, every basis function and the solve tolerance.
pub fn dn_cache_key(
    geometry: &GeometryConfig,
    stencil: &Stencil,
    coefficient: CoefficientRef<'_>,
    basis: &ExteriorBasis,
    tol: f64,
) -> String {
    let mut h = Sha256::new();
    h.update(geometry.hash().as_bytes());
    h.update(serde_json::to_string(stencil.op()).expect("operator serialises").as_bytes());
    let (tag, values) = match coefficient {
        CoefficientRef::Conductivity(g) => ("conductivity", g.values()),
        CoefficientRef::Potential(q) => ("schrodinger", q.values()),
    };
    h.update(tag.as_bytes());
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.update(basis.descriptor().as_bytes());
    for f in basis.functions() {
        for v in &f.field().values {
            h.update(v.to_le_bytes());
        }
    }
    h.update(tol.to_le_bytes());
    hex::encode(h.finalize())
}

/// Writes a versioned DN blob: text header, then little-endian f64 entries.
pub fn cache_dn(path: &Path, m: &DnMatrix) -> Result<()> {
    let payload: Vec<u8> = m.entries.iter().flat_map(|v| v.to_le_bytes()).collect();
    let lines = header_lines(m, &sha_hex(&payload));
    let header_hash = sha_hex(lines.join("\n").as_bytes());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{DN_FORMAT} v{DN_VERSION}")?;
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    writeln!(out, "header_sha256={header_hash}")?;
    writeln!(out, "end")?;
    out.write_all(&payload)?;
    out.flush()?;
    Ok(())
}

/// Reads a DN blob and checks its version, header and payload hashes and
/// that it was built on the geometry with hash `expected_geometry`.
pub fn load_dn(path: &Path, expected_geometry: &str) -> Result<DnMatrix> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let magic = line.trim_end().to_string();
    let version = magic
        .strip_prefix(DN_FORMAT)
        .and_then(|r| r.trim().strip_prefix('v'))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| Error::Cache(format!("not a DN cache file: '{magic}'")))?;
    if version != DN_VERSION {
        return Err(Error::Version {
            found: version,
            expected: DN_VERSION,
            hint: "delete the cache entry; it is rebuilt on the next run".into(),
        });
    }
    let mut lines = Vec::new();
    let mut stored_header_hash = None;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Cache("DN header not terminated".into()));
        }
        let l = line.trim_end().to_string();
        if l == "end" {
            break;
        }
        if let Some(h) = l.strip_prefix("header_sha256=") {
            stored_header_hash = Some(h.to_string());
        } else {
            lines.push(l);
        }
    }
    let stored = stored_header_hash.ok_or_else(|| Error::Cache("missing header hash".into()))?;
    let found = sha_hex(lines.join("\n").as_bytes());
    if stored != found {
        return Err(Error::HashMismatch { expected: stored, found });
    }
    let mut kv = std::collections::BTreeMap::new();
    for l in &lines {
        let (k, v) = l.split_once('=').ok_or_else(|| Error::Cache(format!("bad header line '{l}'")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| kv.get(k).cloned().ok_or_else(|| Error::Cache(format!("missing header key '{k}'")));
    let geometry_hash = get("geometry_hash")?;
    if geometry_hash != expected_geometry {
        return Err(Error::HashMismatch { expected: expected_geometry.to_string(), found: geometry_hash });
    }
    let parse_idx = |s: String| -> Result<Vec<usize>> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|t| t.parse().map_err(|_| Error::Cache(format!("bad index '{t}'")))).collect()
    };
    let rows = parse_idx(get("rows")?)?;
    let cols = parse_idx(get("cols")?)?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != rows.len() * cols.len() * 8 {
        return Err(Error::Cache("payload length does not match the header".into()));
    }
    let payload_hash = get("payload_sha256")?;
    let found = sha_hex(&payload);
    if payload_hash != found {
        return Err(Error::HashMismatch { expected: payload_hash, found });
    }
    Ok(DnMatrix {
        equation: Equation::parse(&get("equation")?)?,
        basis: get("basis")?,
        geometry_hash,
        rows,
        cols,
        entries: payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        extension_defect: get("extension_defect")?
            .parse()
            .map_err(|_| Error::Cache("bad extension_defect".into()))?,
        solve_residual: get("solve_residual")?
            .parse()
            .map_err(|_| Error::Cache("bad solve_residual".into()))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductivity::{liouville_potential, Conductivity, Potential};
    use crate::nonlocal::FracOperator;

    fn setup() -> (GeometryConfig, Stencil) {
        let g = GeometryConfig::default_1d().with_points(512);
        let st = Stencil::new(g.grid(), FracOperator::quadrature(g.s).unwrap());
        (g, st)
    }

    #[test]
    fn single_bump_has_unit_gram() {
        let (g, _) = setup();
        let b = build_exterior_basis(&g, "right", 1, BasisKind::Bumps).unwrap();
        assert!((b.gram()[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parity_pairs_are_orthogonal_in_1d() {
        let (g, _) = setup();
        let b = build_exterior_basis(&g, "annulus", 8, BasisKind::Harmonic).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if b.labels()[i].angular != b.labels()[j].angular {
                    let f = b.functions()[i].field();
                    assert!(f.dot(b.functions()[j].field()).abs() < 1e-14);
                    assert!(b.gram()[i][j].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_oversized_basis() {
        let g = GeometryConfig::default_1d().with_points(64);
        assert!(build_exterior_basis(&g, "right", 64, BasisKind::Bumps).is_err());
        assert!(build_exterior_basis(&g, "nowhere", 4, BasisKind::Bumps).is_err());
        assert!(build_exterior_basis(&g, "right", 0, BasisKind::Bumps).is_err());
    }

    #[test]
    fn unit_conductivity_equals_zero_potential() {
        let (g, st) = setup();
        let b = build_exterior_basis(&g, "annulus", 8, BasisKind::Harmonic).unwrap();
        let one = Conductivity::unit(g.grid());
        let a = assemble_dn(&g, &st, CoefficientRef::Conductivity(&one), &b, 1e-10).unwrap();
        let z = Potential::zero(g.grid());
        let c = assemble_dn(&g, &st, CoefficientRef::Potential(&z), &b, 1e-10).unwrap();
        let d = a.difference(&c).unwrap();
        assert!(d.max_abs() <= 1e-10 * a.max_abs());
        assert!(a.asymmetry() < 1e-10);
        assert!(a.extension_defect < 1e-10);
        let same = a.difference(&a).unwrap();
        assert_eq!(same.max_abs(), 0.0);
        assert_eq!(dn_operator_norm(&same, &b).unwrap(), 0.0);
    }

    #[test]
    fn interior_conductivity_matches_its_potential() {
        let (g, st) = setup();
        let b = build_exterior_basis(&g, "annulus", 8, BasisKind::Harmonic).unwrap();
        let gamma = Conductivity::new(
            g.grid().sample(|p| 1.0 + 0.6 * crate::special::unit_bump(p[0] / 0.9)),
            0.5,
        )
        .unwrap();
        let q = liouville_potential(&gamma, &st).unwrap();
        let mg = assemble_dn(&g, &st, CoefficientRef::Conductivity(&gamma), &b, 1e-10).unwrap();
        let mq = assemble_dn(&g, &st, CoefficientRef::Potential(&q), &b, 1e-10).unwrap();
        let rel = dn_operator_norm(&mg.difference(&mq).unwrap(), &b).unwrap()
            / dn_operator_norm(&mg, &b).unwrap();
        assert!(rel < 1e-5, "{rel}");
    }

    #[test]
    fn gram_itself_has_unit_norm() {
        let (g, _) = setup();
        let b = build_exterior_basis(&g, "annulus", 6, BasisKind::Harmonic).unwrap();
        let m = DnMatrix {
            equation: Equation::Difference,
            basis: b.descriptor().to_string(),
            geometry_hash: b.geometry_hash().to_string(),
            rows: (0..6).collect(),
            cols: (0..6).collect(),
            entries: b.gram().iter().flatten().copied().collect(),
            extension_defect: 0.0,
            solve_residual: 0.0,
        };
        assert!((dn_operator_norm(&m, &b).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn scaling_conductivity_scales_dn() {
        let (g, st) = setup();
        let b = build_exterior_basis(&g, "annulus", 6, BasisKind::Harmonic).unwrap();
        let gamma = Conductivity::new(
            g.grid().sample(|p| 1.0 + 0.5 * crate::special::unit_bump(p[0] / 0.9)),
            0.5,
        )
        .unwrap();
        let m1 = assemble_dn(&g, &st, CoefficientRef::Conductivity(&gamma), &b, 1e-10).unwrap();
        let scaled = gamma.scaled(2.0).unwrap();
        let m2 = assemble_dn(&g, &st, CoefficientRef::Conductivity(&scaled), &b, 1e-10).unwrap();
        for (a, c) in m1.entries.iter().zip(&m2.entries) {
            assert!((2.0 * a - c).abs() < 1e-10 * m1.max_abs());
        }
        let n1 = dn_operator_norm(&m1, &b).unwrap();
        let n2 = dn_operator_norm(&m2, &b).unwrap();
        assert!((n2 - 2.0 * n1).abs() < 1e-10 * n2);
    }

    #[test]
    fn restriction_examples() {
        let (g, st) = setup();
        let left = build_exterior_basis(&g, "left", 3, BasisKind::Bumps).unwrap();
        let right = build_exterior_basis(&g, "right", 3, BasisKind::Bumps).unwrap();
        let b = ExteriorBasis::concat(&g, &[left, right]).unwrap();
        let one = Conductivity::unit(g.grid());
        let m = assemble_dn(&g, &st, CoefficientRef::Conductivity(&one), &b, 1e-10).unwrap();
        let full = restrict_dn(&m, &b, "left", "left").unwrap();
        assert_eq!(full.rows, vec![0, 1, 2]);
        let off = restrict_dn(&m, &b, "left", "right").unwrap();
        assert_eq!(off.rows, vec![0, 1, 2]);
        assert_eq!(off.cols, vec![3, 4, 5]);
        assert_eq!(off.get(1, 2), m.get(1, 5));
        assert!(restrict_dn(&m, &b, "annulus", "left").is_err());
    }

    #[test]
    fn cache_roundtrip_and_tampering() {
        let (g, st) = setup();
        let b = build_exterior_basis(&g, "annulus", 4, BasisKind::Harmonic).unwrap();
        let one = Conductivity::unit(g.grid());
        let m = assemble_dn(&g, &st, CoefficientRef::Conductivity(&one), &b, 1e-10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dn");
        cache_dn(&path, &m).unwrap();
        let back = load_dn(&path, &g.hash()).unwrap();
        assert_eq!(back, m);
        assert!(back.entries.iter().zip(&m.entries).all(|(a, b)| a.to_bits() == b.to_bits()));

        assert!(matches!(load_dn(&path, "other"), Err(Error::HashMismatch { .. })));

        let text = std::fs::read(&path).unwrap();
        let s = String::from_utf8_lossy(&text).into_owned();
        let tampered = s.replacen("equation=conductivity", "equation=schrodinger", 1);
        std::fs::write(&path, tampered.as_bytes()).unwrap();
        // lossy text rewrite also corrupts the payload; the header check fires first
        assert!(matches!(load_dn(&path, &g.hash()), Err(Error::HashMismatch { .. })));

        let mut bumped = b"fracstab-dn v2".to_vec();
        bumped.extend_from_slice(&text[b"fracstab-dn v1".len()..]);
        std::fs::write(&path, bumped).unwrap();
        match load_dn(&path, &g.hash()) {
            Err(Error::Version { found: 2, expected: 1, hint }) => assert!(hint.contains("rebuilt")),
            other => panic!("expected version refusal, got {other:?}"),
        }
    }

    #[test]
    fn norm_bounds_sampled_ratios() {
        use rand::Rng;
        let (g, st) = setup();
        let b = build_exterior_basis(&g, "annulus", 6, BasisKind::Harmonic).unwrap();
        let gamma = Conductivity::new(
            g.grid().sample(|p| 1.0 + 0.8 * crate::special::unit_bump((p[0] - 0.3) / 0.6)),
            0.5,
        )
        .unwrap();
        let one = Conductivity::unit(g.grid());
        let m1 = assemble_dn(&g, &st, CoefficientRef::Conductivity(&gamma), &b, 1e-10).unwrap();
        let m0 = assemble_dn(&g, &st, CoefficientRef::Conductivity(&one), &b, 1e-10).unwrap();
        let d = m1.difference(&m0).unwrap();
        let norm = dn_operator_norm(&d, &b).unwrap();
        let gm = to_matrix(b.gram());
        let dm = d.to_matrix();
        let gnorm = |v: &nalgebra::DVector<f64>| (v.transpose() * &gm * v)[(0, 0)].sqrt();
        let mut rng = crate::rng::seeded(3);
        let mut best: f64 = 0.0;
        for _ in 0..20_000 {
            let x = nalgebra::DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let y = nalgebra::DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let r = (x.transpose() * &dm * &y)[(0, 0)].abs() / (gnorm(&x) * gnorm(&y));
            assert!(r <= norm * (1.0 + 1e-12));
            best = best.max(r);
        }
        assert!(best > 0.5 * norm, "{best} vs {norm}");
    }

    #[test]
    fn norm_grows_with_nested_bases() {
        let (g, st) = setup();
        let gamma = Conductivity::new(
            g.grid().sample(|p| 1.0 + 0.8 * crate::special::unit_bump((p[0] - 0.3) / 0.6)),
            0.5,
        )
        .unwrap();
        let one = Conductivity::unit(g.grid());
        let mut prev = 0.0;
        for k in [2, 4, 8, 12] {
            let b = build_exterior_basis(&g, "annulus", k, BasisKind::Harmonic).unwrap();
            let m1 = assemble_dn(&g, &st, CoefficientRef::Conductivity(&gamma), &b, 1e-10).unwrap();
            let m0 = assemble_dn(&g, &st, CoefficientRef::Conductivity(&one), &b, 1e-10).unwrap();
            let n = dn_operator_norm(&m1.difference(&m0).unwrap(), &b).unwrap();
            assert!(n >= prev * (1.0 - 1e-10), "{k}: {n} < {prev}");
            prev = n;
        }
    }
}
