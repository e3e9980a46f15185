//! Special functions used by the singular-kernel stencils and the harmonic
//! exterior basis.
//!
//! The Hurwitz zeta function is evaluated by Euler–Maclaurin summation, which
//! stays valid for real orders below one through analytic continuation. The
//! stencil corrections need it at negative orders.

use statrs::function::gamma::gamma;

/// B_2, B_4, ..., B_20.
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

const SHIFT: usize = 16;

/// Hurwitz zeta `ζ(a, x) = Σ_{k≥0} (x + k)^{-a}` for real `a ≠ 1`, `x > 0`.
pub fn hurwitz_zeta(a: f64, x: f64) -> f64 {
    assert!(x > 0.0, "hurwitz_zeta needs x > 0, got {x}");
    assert!((a - 1.0).abs() > 1e-12, "hurwitz_zeta has a pole at a = 1");
    let mut head = 0.0;
    for k in 0..SHIFT {
        head += (x + k as f64).powf(-a);
    }
    let y = x + SHIFT as f64;
    let mut sum = head + y.powf(1.0 - a) / (a - 1.0) + 0.5 * y.powf(-a);
    // rising factorial a (a+1) ... (a+2j-2) / (2j)!
    let mut coeff = a;
    let mut fact = 2.0;
    let mut power = y.powf(-a - 1.0);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * coeff * power;
        sum += term;
        let m = (2 * j + 2) as f64;
        coeff *= (a + m - 1.0) * (a + m);
        fact *= (m + 1.0) * (m + 2.0);
        power /= y * y;
    }
    sum
}

/// Riemann zeta on the real line away from the pole.
pub fn riemann_zeta(a: f64) -> f64 {
    hurwitz_zeta(a, 1.0)
}

/// Dirichlet beta `Σ_{k≥0} (-1)^k (2k+1)^{-a}`.
pub fn dirichlet_beta(a: f64) -> f64 {
    4f64.powf(-a) * (hurwitz_zeta(a, 0.25) - hurwitz_zeta(a, 0.75))
}

/// Lattice sum `Σ_{d ∈ ℤ²∖0} |d|^{-2t}`, continued analytically in `t`.
pub fn square_lattice_zeta(t: f64) -> f64 {
    4.0 * riemann_zeta(t) * dirichlet_beta(t)
}

/// Normalisation `C_{n,s} = 4^s Γ(n/2 + s) / (π^{n/2} |Γ(-s)|)` of the
/// singular-integral form of the fractional Laplacian.
pub fn frac_laplacian_constant(n: usize, s: f64) -> f64 {
    let half_n = n as f64 / 2.0;
    4f64.powf(s) * gamma(half_n + s) / (std::f64::consts::PI.powf(half_n) * gamma(-s).abs())
}

/// Jacobi polynomial `P_k^{(α,β)}(t)` by the three-term recurrence.
pub fn jacobi(k: usize, alpha: f64, beta: f64, t: f64) -> f64 {
    let mut p0 = 1.0;
    if k == 0 {
        return p0;
    }
    let mut p1 = (alpha + 1.0) + (alpha + beta + 2.0) * (t - 1.0) / 2.0;
    for n in 2..=k {
        let n = n as f64;
        let c = 2.0 * n + alpha + beta;
        let a1 = 2.0 * n * (n + alpha + beta) * (c - 2.0);
        let a2 = (c - 1.0) * (c * (c - 2.0) * t + alpha * alpha - beta * beta);
        let a3 = 2.0 * (n + alpha - 1.0) * (n + beta - 1.0) * c;
        let p2 = (a2 * p1 - a3 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Smooth bump `exp(1 - 1/(1 - t²))` on `|t| < 1`, peak value 1 at `t = 0`.
pub fn unit_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeta_known_values() {
        assert!((riemann_zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((riemann_zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-14);
        assert!((riemann_zeta(0.0) + 0.5).abs() < 1e-14);
        assert!((riemann_zeta(-1.0) + 1.0 / 12.0).abs() < 1e-14);
        assert!(riemann_zeta(-2.0).abs() < 1e-13);
        assert!((riemann_zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-13);
    }

    #[test]
    fn hurwitz_reference_values() {
        // arbitrary-precision reference values
        assert!((hurwitz_zeta(2.8, 0.013) / 190_968.334_617_182 - 1.0).abs() < 1e-14);
        assert!((hurwitz_zeta(1.8, 0.37) / 7.300_366_965_692_2 - 1.0).abs() < 1e-12);
        assert!((hurwitz_zeta(2.0, 0.5) - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn beta_known_values() {
        assert!((dirichlet_beta(2.0) - 0.915_965_594_177_219).abs() < 1e-13);
        assert!((dirichlet_beta(3.0) - PI.powi(3) / 32.0).abs() < 1e-13);
        assert!((dirichlet_beta(0.0) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn lattice_zeta_matches_partial_sum() {
        let t = 2.5;
        let r = 400i64;
        let mut sum = 0.0;
        for i in -r..=r {
            for j in -r..=r {
                if i != 0 || j != 0 {
                    sum += ((i * i + j * j) as f64).powf(-t);
                }
            }
        }
        // remaining tail ~ 2π ∫_R^∞ ρ^{1-2t} dρ
        sum += 2.0 * PI * (r as f64 + 0.5).powf(2.0 - 2.0 * t) / (2.0 * t - 2.0);
        assert!((square_lattice_zeta(t) - sum).abs() < 1e-6);
    }

    #[test]
    fn constant_reference_value() {
        assert!((frac_laplacian_constant(1, 0.4) - 0.282_0).abs() < 1e-4);
        // C_{1,1/2} = 1/π
        assert!((frac_laplacian_constant(1, 0.5) - 1.0 / PI).abs() < 1e-12);
        // C_{2,1/2} = 1/(2π)
        assert!((frac_laplacian_constant(2, 0.5) - 0.5 / PI).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reduces_to_legendre() {
        for &t in &[-0.9, -0.3, 0.0, 0.4, 0.77] {
            let p2 = 0.5 * (3.0 * t * t - 1.0);
            let p3 = 0.5 * (5.0 * t * t * t - 3.0 * t);
            assert!((jacobi(2, 0.0, 0.0, t) - p2).abs() < 1e-14);
            assert!((jacobi(3, 0.0, 0.0, t) - p3).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_orthogonal_under_weight() {
        // Gauss–Legendre would be tidier; a fine midpoint rule is enough here.
        let p = 4.0;
        let m = 20_000;
        let ip = |i: usize, j: usize| -> f64 {
            (0..m)
                .map(|k| {
                    let t = -1.0 + (k as f64 + 0.5) * 2.0 / m as f64;
                    (1.0 - t * t).powf(p) * jacobi(i, p, p, t) * jacobi(j, p, p, t) * 2.0 / m as f64
                })
                .sum()
        };
        let d = ip(3, 3);
        assert!(ip(1, 3).abs() / d < 1e-8);
        assert!(ip(2, 5).abs() / d < 1e-8);
    }

    #[test]
    fn bump_shape() {
        assert_eq!(unit_bump(0.0), 1.0);
        assert_eq!(unit_bump(1.0), 0.0);
        assert!(unit_bump(0.5) > 0.0 && unit_bump(0.5) < 1.0);
    }
}
