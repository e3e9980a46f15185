//! Suite-level behaviour: plot sidecars agree with the report, scaling of
//! DN gaps, exterior recovery away from the perturbation, and coefficient
//! decay for a single interior bump.

use proptest::prelude::*;

use fracstab::conductivity::{liouville_potential, Potential};
use fracstab::dn::BasisKind;
use fracstab::experiments::exterior::{exterior_recovery, Probe};
use fracstab::experiments::instability::coefficient_decay;
use fracstab::experiments::modulus::{ModulusFit, ModulusPoint};
use fracstab::experiments::{presets, Lab};
use fracstab::special::unit_bump;
use fracstab::harness::plots::read_table;
use fracstab::harness::{emit_plots, run_config, ExperimentConfig, Payload, Suite};
use fracstab::{Conductivity, FracOperator, GeometryConfig};

fn default_lab() -> Lab {
    let g = GeometryConfig::default_1d();
    let op = FracOperator::quadrature(g.s).unwrap();
    Lab::new(g, op, BasisKind::Harmonic, 16, "annulus").unwrap()
}

fn interior_bump(lab: &Lab, centre: f64, radius: f64, height: f64) -> Conductivity {
    let field = lab.geometry.grid().sample(|p| 1.0 + height * unit_bump((p[0] - centre).abs() / radius));
    Conductivity::new(field, 0.5).unwrap()
}

#[test]
fn decay_sidecar_has_the_fitted_slope() {
    let report = run_config(&ExperimentConfig::new(Suite::Instability)).unwrap();
    let Payload::Instability(p) = &report.payload else { panic!("wrong payload") };
    let dir = tempfile::tempdir().unwrap();
    let out = emit_plots(&report, dir.path()).unwrap();
    assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    assert!(dir.path().join("decay.svg").exists());

    let rows = read_table(&dir.path().join("decay_fit.dat")).unwrap();
    assert_eq!(rows.len(), p.record.decay_fit.envelope.len());
    let c = p.record.decay_fit.rate;
    for w in rows.windows(2) {
        let slope = (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
        assert!((slope + c).abs() <= 1e-12 * c.abs().max(1.0), "slope {slope} vs -{c}");
    }
    let env = read_table(&dir.path().join("decay.dat")).unwrap();
    for (r, (o, v)) in env.iter().zip(&p.record.decay_fit.envelope) {
        assert_eq!(r[0], *o as f64);
        assert_eq!(r[1].to_bits(), v.to_bits());
    }
}

#[test]
fn scatter_sidecar_holds_exactly_the_retained_points() {
    let mut cfg = ExperimentConfig::new(Suite::Logmodulus);
    cfg.seed = 7;
    let report = run_config(&cfg).unwrap();
    let Payload::Logmodulus(p) = &report.payload else { panic!("wrong payload") };
    let dir = tempfile::tempdir().unwrap();
    emit_plots(&report, dir.path()).unwrap();
    let rows = read_table(&dir.path().join("modulus_scatter.dat")).unwrap();
    let kept: Vec<&ModulusPoint> = p.fit.data_points.iter().filter(|d| d.retained).collect();
    assert_eq!(rows.len(), kept.len());
    for (r, d) in rows.iter().zip(kept) {
        assert_eq!((r[0].to_bits(), r[1].to_bits()), (d.x.to_bits(), d.y.to_bits()));
    }
    assert_eq!(read_table(&dir.path().join("modulus_points.dat")).unwrap().len(), p.fit.data_points.len());
}

#[test]
fn empty_scatter_gives_headers_and_a_warning() {
    let mut cfg = ExperimentConfig::new(Suite::Logmodulus);
    cfg.seed = 7;
    let mut report = run_config(&cfg).unwrap();
    let Payload::Logmodulus(p) = &mut report.payload else { panic!("wrong payload") };
    for d in &mut p.fit.data_points {
        d.retained = false;
    }
    let dir = tempfile::tempdir().unwrap();
    let out = emit_plots(&report, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("modulus_scatter.dat")).unwrap();
    assert!(text.lines().all(|l| l.starts_with('#')), "{text}");
    assert!(read_table(&dir.path().join("modulus_scatter.dat")).unwrap().is_empty());
    assert!(!out.warnings.is_empty());
    assert!(!dir.path().join("modulus.svg").exists());
}

#[test]
fn halving_the_amplitude_halves_the_dn_gap() {
    let lab = default_lab();
    let fam = presets::interior_amplitude_ladder(&lab.geometry, 0).unwrap();
    let gaps: Vec<f64> = fam
        .pairs
        .iter()
        .take(4)
        .map(|(g1, g2)| lab.gap(&lab.dn_conductivity(g1).unwrap(), &lab.dn_conductivity(g2).unwrap()).unwrap())
        .collect();
    for w in gaps.windows(2) {
        let r = w[1] / w[0];
        assert!((0.3..=0.7).contains(&r), "gap ratio {r}");
    }
}

#[test]
fn exterior_recovery_of_an_interior_perturbation_is_one() {
    let lab = default_lab();
    let gamma = interior_bump(&lab, 0.0, 0.7, 0.8);
    let probe = Probe { point: [2.5, 0.0], widths: vec![0.4, 0.2, 0.1] };
    let rec = exterior_recovery(&lab, &gamma, &[probe]).unwrap();
    assert_eq!(rec[0].sampled, 1.0);
    assert!((rec[0].estimate - 1.0).abs() < 0.05, "estimate {}", rec[0].estimate);
    let dev: Vec<f64> = rec[0].ratios.iter().map(|r| (r - 1.0).abs()).collect();
    assert!(dev.windows(2).all(|d| d[1] <= d[0] * 1.01), "ratios {:?}", rec[0].ratios);
}

#[test]
fn single_bump_potential_has_decaying_coefficients() {
    let lab = default_lab();
    let gamma = interior_bump(&lab, 0.1, 0.6, 0.5);
    let q = liouville_potential(&gamma, &lab.stencil).unwrap().restricted(&lab.geometry.interior_mask());
    let m0 = lab.dn_potential(&Potential::zero(lab.geometry.grid())).unwrap();
    let gq = lab.dn_potential(&q).unwrap().difference(&m0).unwrap();
    let orders: Vec<usize> = lab.basis.labels().iter().map(|l| l.order()).collect();
    let fit = coefficient_decay(&gq, &orders).unwrap();
    assert!(fit.rate > 0.0 && fit.r_squared >= 0.9, "rate {} r2 {}", fit.rate, fit.r_squared);
}

prop_compose! {
    fn point()(x in 1e-12f64..1.0, y in 1e-6f64..10.0, flags in 0u8..8, label in 0.0f64..1.0) -> ModulusPoint {
        ModulusPoint {
            label,
            x,
            y,
            gate_ok: flags & 1 != 0,
            above_floor: flags & 2 != 0,
            retained: flags & 4 != 0,
        }
    }
}

proptest! {
    #[test]
    fn modulus_fit_serialises_exactly(
        amplitude in 0.0f64..1e6,
        sigma in -10.0f64..100.0,
        r_squared in 0.0f64..1.0,
        theta0 in 0.5f64..1.0,
        floor in 0.0f64..1e-6,
        monotone in any::<bool>(),
        data_points in prop::collection::vec(point(), 0..12),
    ) {
        let fit = ModulusFit {
            amplitude,
            sigma,
            q_norm_index: 2.0,
            r_squared,
            theta0,
            gate: 3f64.powf(-2.0 / (1.0 - theta0)),
            floor,
            monotone,
            data_points,
        };
        let text = serde_json::to_string(&fit).unwrap();
        let back: ModulusFit = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &fit);
        prop_assert_eq!(back.sigma.to_bits(), fit.sigma.to_bits());
    }
}
