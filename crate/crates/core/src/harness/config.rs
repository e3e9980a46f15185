//! Experiment configuration, read from TOML. Every section except the
//! suite selector and preset has defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conductivity::{check_theta0, AdmissibilityThresholds};
use crate::dn::BasisKind;
use crate::error::{config, Error, Result};
use crate::experiments::modulus::check_q_index;
use crate::experiments::presets::Preset;
use crate::experiments::Lab;
use crate::geometry::GeometryConfig;
use crate::mandache::MandacheParams;
use crate::nonlocal::{FracOperator, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Exterior,
    Reduction,
    Logmodulus,
    Instability,
    Residuals,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Exterior => "exterior",
            Suite::Reduction => "reduction",
            Suite::Logmodulus => "logmodulus",
            Suite::Instability => "instability",
            Suite::Residuals => "residuals",
        }
    }

    /// Presets the suite accepts.
    pub fn presets(&self) -> &'static [Preset] {
        match self {
            Suite::Exterior => &[Preset::ExteriorBumpScan],
            Suite::Reduction => &[Preset::ReductionLadder],
            Suite::Logmodulus => &[Preset::InteriorAmplitudeLadder, Preset::ReductionLadder],
            Suite::Instability => &[Preset::MandacheLattice],
            Suite::Residuals => &[Preset::Unit, Preset::LiouvilleBumps],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub mode: Mode,
    pub correction_order: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig { mode: Mode::Quadrature, correction_order: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub kind: BasisKind,
    pub size: usize,
    /// Measurement set carrying the basis.
    pub region: String,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig { kind: BasisKind::Harmonic, size: 16, region: "annulus".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteParams {
    /// Defaults to 0.9 for the reduction suite and 0.85 otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    pub q_index: f64,
    /// Widths of the exterior recovery probe at the bump centre.
    pub probe_widths: Vec<f64>,
    /// Largest acceptable `dn_gap / gamma_gap` of the instability witness.
    pub ratio_limit: f64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams { theta0: None, q_index: 2.0, probe_widths: vec![0.4, 0.2, 0.1, 0.05], ratio_limit: 1e-3 }
    }
}

/// Mandache family parameters; the family seed is the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MandacheConfig {
    pub ell: f64,
    pub eps: f64,
    pub beta: f64,
    pub lattice_spacing: f64,
    pub count: usize,
}

impl Default for MandacheConfig {
    fn default() -> Self {
        let p = MandacheParams::default();
        MandacheConfig { ell: p.ell, eps: p.eps, beta: p.beta, lattice_spacing: p.lattice_spacing, count: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Backward error accepted from each forward solve.
    pub solve: f64,
    /// Liouville and energy identity residuals.
    pub identity: f64,
    pub mtilde: f64,
    /// Relative gap between `Λ_γ` and `Λ_{q_γ}`.
    pub dn_equivalence: f64,
    /// Relative error of the recovered exterior value.
    pub recovery: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { solve: 1e-8, identity: 1e-6, mtilde: 1e-5, dn_equivalence: 1e-4, recovery: 0.05 }
    }
}

fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub preset: Preset,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default = "GeometryConfig::default_1d")]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub params: SuiteParams,
    #[serde(default)]
    pub mandache: MandacheConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub admissibility: AdmissibilityThresholds,
}

impl ExperimentConfig {
    /// Default configuration of a suite with its first preset.
    pub fn new(suite: Suite) -> Self {
        ExperimentConfig {
            suite,
            preset: suite.presets()[0],
            seed: 0,
            threads: 1,
            output_dir: None,
            geometry: GeometryConfig::default_1d(),
            operator: OperatorConfig::default(),
            basis: BasisConfig::default(),
            params: SuiteParams::default(),
            mandache: MandacheConfig::default(),
            tolerances: Tolerances::default(),
            admissibility: AdmissibilityThresholds::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Hex SHA-256 of [`to_toml`](Self::to_toml).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn theta0(&self) -> f64 {
        self.params.theta0.unwrap_or(if self.suite == Suite::Reduction { 0.9 } else { 0.85 })
    }

    pub fn mandache_params(&self) -> MandacheParams {
        let m = &self.mandache;
        MandacheParams { ell: m.ell, eps: m.eps, beta: m.beta, lattice_spacing: m.lattice_spacing, seed: self.seed }
    }

    pub fn operator(&self) -> Result<FracOperator> {
        FracOperator::new(self.geometry.s, self.operator.mode)?.with_correction_order(self.operator.correction_order)
    }

    /// Dry-run checks of every field; no solves are performed.
    pub fn validate(&self) -> Result<()> {
        as_config(self.validate_inner())
    }

    fn validate_inner(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.threads == 0 {
            return config("threads must be at least 1");
        }
        if !self.suite.presets().contains(&self.preset) {
            let allowed: Vec<&str> = self.suite.presets().iter().map(|p| p.name()).collect();
            return config(format!(
                "preset '{}' does not apply to suite '{}' (expected one of {})",
                self.preset.name(),
                self.suite.name(),
                allowed.join(", ")
            ));
        }
        self.operator()?;
        self.geometry.region(&self.basis.region)?;
        if self.basis.size == 0 {
            return config("basis size must be positive");
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("solve", t.solve),
            ("identity", t.identity),
            ("mtilde", t.mtilde),
            ("dn_equivalence", t.dn_equivalence),
            ("recovery", t.recovery),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return config(format!("tolerance {name} must be positive and finite, got {v}"));
            }
        }
        let a = &self.admissibility;
        if !(a.c1 > 0.0 && a.c2 > 0.0 && a.regularity_margin > 0.0) {
            return config("admissibility thresholds must be positive");
        }
        match self.suite {
            Suite::Reduction => check_theta0(self.geometry.n, self.geometry.s, self.theta0())?,
            Suite::Logmodulus => {
                check_theta0(self.geometry.n, self.geometry.s, self.theta0())?;
                check_q_index(self.geometry.n, self.geometry.s, self.params.q_index)?;
            }
            Suite::Exterior => {
                let w = &self.params.probe_widths;
                if w.len() < 2 || w.iter().any(|v| !(*v > 0.0)) || w.windows(2).any(|p| p[1] >= p[0]) {
                    return config("probe_widths must be positive, strictly decreasing, at least two");
                }
            }
            Suite::Instability => {
                let p = self.mandache_params();
                p.validate(self.geometry.s)?;
                if self.mandache.count < 2 {
                    return config(format!(
                        "a family of {} member(s) has no pair to compare; counting bound exponent (beta/eps)^(n/ell) = {:.3}",
                        self.mandache.count,
                        p.log_cardinality_bound(self.geometry.n)
                    ));
                }
                if !(self.params.ratio_limit > 0.0) {
                    return config("ratio_limit must be positive");
                }
            }
            Suite::Residuals => {}
        }
        Ok(())
    }

    /// Geometry, stencil and basis of the run.
    pub fn lab(&self) -> Result<Lab> {
        let mut lab = Lab::new(
            self.geometry.clone(),
            self.operator()?,
            self.basis.kind,
            self.basis.size,
            &self.basis.region,
        )?;
        lab.tol = self.tolerances.solve;
        lab.thresholds = self.admissibility;
        Ok(lab)
    }
}

/// Input errors raised while validating are configuration errors.
fn as_config<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Input(m) => Error::Config(m),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::from_toml_str("suite = \"logmodulus\"\npreset = \"interior-amplitude-ladder\"\n").unwrap();
        assert_eq!(c.geometry, GeometryConfig::default_1d());
        assert_eq!(c.threads, 1);
        assert_eq!(c.theta0(), 0.85);
        c.validate().unwrap();
    }

    #[test]
    fn echo_round_trips() {
        let mut c = ExperimentConfig::new(Suite::Instability);
        c.seed = 11;
        c.params.theta0 = Some(0.8);
        c.output_dir = Some("out".into());
        let back = ExperimentConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::from_toml_str("suite = \"residuals\"\npreset = \"unit\"\ncolour = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = ExperimentConfig::from_toml_str("suite = \"residuals\"\npreset = \"unit\"\n[basis]\nsise = 3\n");
        assert!(e.is_err());
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut c = ExperimentConfig::new(Suite::Instability);
        c.mandache.ell = 2.8; // ell - 2s = 2
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::new(Suite::Reduction);
        c.params.theta0 = Some(0.7);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::new(Suite::Logmodulus);
        c.params.q_index = 11.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::new(Suite::Exterior);
        c.preset = Preset::Unit;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::new(Suite::Residuals);
        c.basis.region = "nowhere".into();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::new(Suite::Instability);
        c.mandache.count = 1;
        assert!(c.validate().unwrap_err().to_string().contains("(beta/eps)^(n/ell)"));
        let mut c = ExperimentConfig::new(Suite::Exterior);
        c.params.probe_widths = vec![0.1, 0.2];
        assert!(c.validate().is_err());
    }
}
