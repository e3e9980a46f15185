//! Named, seeded families of conductivities. A `(preset, seed)` pair fully
//! determines the family; the seed jitters bump centres by at most 0.05
//! (snapped to grid nodes).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conductivity::Conductivity;
use crate::error::Result;
use crate::geometry::{GeometryConfig, Grid};
use crate::rng::stream;
use crate::special::unit_bump;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `γ ≡ 1`.
    Unit,
    /// Five bump conductivities inside `Ω`.
    LiouvilleBumps,
    /// `1 + a φ` with `φ` a bump in the exterior, `a ∈ {0.05, 0.1, 0.2}`.
    ExteriorBumpScan,
    /// `1 + a_k φ` inside `Ω` against `γ ≡ 1`, `a_k = a₀ 2^{-k}`, `k = 1..8`.
    InteriorAmplitudeLadder,
    /// Six pairs `(γ₂ + a_k ψ, γ₂)` inside `Ω`, `a_k = 0.2 · 2^{-k}`.
    ReductionLadder,
    /// Signed bumps on a lattice in `B₁`.
    MandacheLattice,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Unit => "unit",
            Preset::LiouvilleBumps => "liouville-bumps",
            Preset::ExteriorBumpScan => "exterior-bump-scan",
            Preset::InteriorAmplitudeLadder => "interior-amplitude-ladder",
            Preset::ReductionLadder => "reduction-ladder",
            Preset::MandacheLattice => "mandache-lattice",
        }
    }
}

/// Pairs with one numeric label each (an amplitude unless noted).
#[derive(Debug, Clone)]
pub struct PairFamily {
    pub pairs: Vec<(Conductivity, Conductivity)>,
    pub labels: Vec<f64>,
}

/// Amplitude of the first rung of the interior ladder.
pub const LADDER_BASE: f64 = 5e-5;

/// Exterior bump centre on the positive first axis.
pub const EXTERIOR_CENTRE: f64 = 2.5;

fn jitter(grid: &Grid, seed: u64, slot: u64) -> f64 {
    let mut rng = stream(seed, 1000 + slot);
    let v: f64 = rng.random_range(-0.05..0.05);
    (v / grid.spacing()).round() * grid.spacing()
}

fn bump_field(grid: &Grid, centre: [f64; 2], radius: f64, height: f64) -> crate::geometry::GridField {
    grid.sample(|p| 1.0 + height * unit_bump((p[0] - centre[0]).hypot(p[1] - centre[1]) / radius))
}

fn gamma(grid: &Grid, centre: [f64; 2], radius: f64, height: f64) -> Result<Conductivity> {
    Conductivity::new(bump_field(grid, centre, radius, height), 0.5)
}

/// Centre of the exterior bump for a seed.
pub fn exterior_centre(geometry: &GeometryConfig, seed: u64) -> [f64; 2] {
    [EXTERIOR_CENTRE + jitter(&geometry.grid(), seed, 0), 0.0]
}

/// Conductivities of the Liouville-bump preset.
pub fn liouville_bumps(geometry: &GeometryConfig, seed: u64) -> Result<Vec<Conductivity>> {
    let grid = geometry.grid();
    let specs = [(0.0, 0.7, 0.5), (0.2, 0.5, 0.8), (-0.3, 0.6, -0.3), (0.35, 0.4, 0.4), (-0.1, 0.8, 0.9)];
    specs
        .iter()
        .enumerate()
        .map(|(k, &(c, r, a))| gamma(&grid, [c + jitter(&grid, seed, k as u64), 0.0], r, a))
        .collect()
}

/// Exterior scan pairs `(1 + a φ, 1)` with `φ` of radius 0.3 at
/// [`exterior_centre`].
pub fn exterior_bump_scan(geometry: &GeometryConfig, seed: u64) -> Result<PairFamily> {
    let grid = geometry.grid();
    let c = exterior_centre(geometry, seed);
    let amps = [0.05, 0.1, 0.2];
    let one = Conductivity::unit(grid);
    let pairs = amps.iter().map(|&a| Ok((gamma(&grid, c, 0.3, a)?, one.clone()))).collect::<Result<_>>()?;
    Ok(PairFamily { pairs, labels: amps.to_vec() })
}

/// Exterior conductivity `1 + 0.5 φ` with `φ` of radius 0.4 for recovery.
pub fn exterior_recovery_target(geometry: &GeometryConfig, seed: u64) -> Result<Conductivity> {
    gamma(&geometry.grid(), exterior_centre(geometry, seed), 0.4, 0.5)
}

pub fn interior_amplitude_ladder(geometry: &GeometryConfig, seed: u64) -> Result<PairFamily> {
    let grid = geometry.grid();
    let c = [0.1 + jitter(&grid, seed, 0), 0.0];
    let one = Conductivity::unit(grid);
    let labels: Vec<f64> = (1..=8).map(|k| LADDER_BASE * 0.5f64.powi(k)).collect();
    let pairs = labels.iter().map(|&a| Ok((gamma(&grid, c, 0.6, a)?, one.clone()))).collect::<Result<_>>()?;
    Ok(PairFamily { pairs, labels })
}

pub fn reduction_ladder(geometry: &GeometryConfig, seed: u64) -> Result<PairFamily> {
    let grid = geometry.grid();
    let base = bump_field(&grid, [jitter(&grid, seed, 0), 0.0], 0.8, 0.2);
    let c = [0.15 + jitter(&grid, seed, 1), 0.0];
    let labels: Vec<f64> = (0..6).map(|k| 0.2 * 0.5f64.powi(k)).collect();
    let g2 = Conductivity::new(base.clone(), 0.5)?;
    let pairs = labels
        .iter()
        .map(|&a| {
            let bump = bump_field(&grid, c, 0.5, a);
            let g1 = Conductivity::new(base.zip_with(&bump, |u, v| u + v - 1.0)?, 0.5)?;
            Ok((g1, g2.clone()))
        })
        .collect::<Result<_>>()?;
    Ok(PairFamily { pairs, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_seed_reproducible() {
        let g = GeometryConfig::default_1d();
        let a = interior_amplitude_ladder(&g, 7).unwrap();
        let b = interior_amplitude_ladder(&g, 7).unwrap();
        assert_eq!(a.labels, b.labels);
        for (x, y) in a.pairs.iter().zip(&b.pairs) {
            assert_eq!(x.0, y.0);
        }
        assert_eq!(a.pairs.len(), 8);
        assert_eq!(reduction_ladder(&g, 1).unwrap().pairs.len(), 6);
    }

    #[test]
    fn exterior_presets_stay_outside() {
        let g = GeometryConfig::default_1d();
        let interior = g.interior_mask();
        for seed in 0..5 {
            for (a, _) in exterior_bump_scan(&g, seed).unwrap().pairs {
                for (v, m) in a.values().iter().zip(&interior) {
                    if *m {
                        assert_eq!(*v, 1.0);
                    }
                }
            }
            let c = exterior_centre(&g, seed);
            assert!(c[0] - 0.4 > 2.0 && c[0] + 0.4 < 3.0);
        }
    }

    #[test]
    fn interior_presets_stay_inside() {
        let g = GeometryConfig::default_1d();
        let interior = g.interior_mask();
        let mut all = liouville_bumps(&g, 3).unwrap();
        for (a, b) in reduction_ladder(&g, 3).unwrap().pairs {
            all.push(a);
            all.push(b);
        }
        for c in all {
            for (v, m) in c.values().iter().zip(&interior) {
                if !m {
                    assert_eq!(*v, 1.0);
                }
            }
        }
    }
}
