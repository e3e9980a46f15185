//! Experiment reports: one JSON document per run with the configuration
//! echo, provenance, named pass/fail checks and the suite payload.
//!
//! Wall time is kept out of the report so that reruns are byte-identical;
//! the runner writes it to a `timing.txt` sidecar.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::exterior::{ExteriorScan, Recovery};
use crate::experiments::instability::InstabilityRecord;
use crate::experiments::modulus::ModulusFit;
use crate::experiments::operator::EnergyCheck;
use crate::experiments::reduction::ReductionScan;

use super::config::{ExperimentConfig, Suite};

pub const REPORT_FORMAT: &str = "fracstab-report v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFlag {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

impl CheckFlag {
    pub fn new(name: &str, ok: bool, detail: String) -> Self {
        CheckFlag { name: name.into(), ok, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorPayload {
    pub scan: ExteriorScan,
    /// Probe at the bump centre with the configured widths.
    pub recovery: Recovery,
    pub recovery_error: f64,
    /// Probes across the bump, widths shrunk to fit the measurement set.
    pub profile: Vec<Recovery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionPayload {
    pub theta0: f64,
    pub scan: ReductionScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusPayload {
    pub fit: ModulusFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityPayload {
    pub record: InstabilityRecord,
    pub ratio_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub member: usize,
    pub liouville: f64,
    /// `m̃` equation residual against `γ ≡ 1`.
    pub mtilde: f64,
    /// `‖Λ_γ - Λ_{q_γ}‖_* / ‖Λ_γ‖_*`.
    pub dn_equivalence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualsPayload {
    pub energy: EnergyCheck,
    pub members: Vec<ResidualRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "lowercase")]
pub enum Payload {
    Exterior(ExteriorPayload),
    Reduction(ReductionPayload),
    Logmodulus(ModulusPayload),
    Instability(InstabilityPayload),
    Residuals(ResidualsPayload),
}

impl Payload {
    pub fn suite(&self) -> Suite {
        match self {
            Payload::Exterior(_) => Suite::Exterior,
            Payload::Reduction(_) => Suite::Reduction,
            Payload::Logmodulus(_) => Suite::Logmodulus,
            Payload::Instability(_) => Suite::Instability,
            Payload::Residuals(_) => Suite::Residuals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub provenance: Provenance,
    pub passed: bool,
    pub checks: Vec<CheckFlag>,
    pub payload: Payload,
    /// Hex SHA-256 of the JSON encoding of `payload`.
    pub payload_hash: String,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig, checks: Vec<CheckFlag>, payload: Payload) -> Self {
        let payload_hash = hex::encode(Sha256::digest(serde_json::to_vec(&payload).expect("payload serialises")));
        ExperimentReport {
            format: REPORT_FORMAT.into(),
            config_hash: config.hash(),
            config: config.clone(),
            provenance: Provenance { version: env!("CARGO_PKG_VERSION").into(), seed: config.seed, threads: config.threads },
            passed: checks.iter().all(|c| c.ok),
            checks,
            payload,
            payload_hash,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of [`to_json`](Self::to_json).
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ExperimentReport = serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed report: {e}")))?;
        if r.format != REPORT_FORMAT {
            return Err(Error::Input(format!("unsupported report format '{}'", r.format)));
        }
        if r.payload.suite() != r.config.suite {
            return Err(Error::Input("report payload does not match its configured suite".into()));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::reduction::ReductionCheck;

    fn reduction_report(band: f64) -> ExperimentReport {
        let cfg = ExperimentConfig::new(Suite::Reduction);
        let c = ReductionCheck { theta0: 0.9, lhs: 1e-3, x: 1e-3, rhs_shape: 0.8, fitted_constant: 1.25e-3 };
        let scan = ReductionScan {
            labels: vec![0.2],
            checks: vec![c],
            band,
            band_ok: band <= 5.0,
            dominant_ratios: vec![0.5],
            linear_ratios: vec![1.0],
            dominant_bounded: true,
            linear_unbounded: false,
            passed: false,
        };
        ExperimentReport::new(&cfg, vec![CheckFlag::new("band", band <= 5.0, String::new())], Payload::Reduction(ReductionPayload { theta0: 0.9, scan }))
    }

    #[test]
    fn report_round_trips() {
        let r = reduction_report(1.5);
        let back = ExperimentReport::from_json(&r.to_json()).unwrap();
        assert_eq!(r, back);
        assert_eq!(back.to_json(), r.to_json());
        assert!(r.passed);
    }

    #[test]
    fn non_finite_band_reads_back_as_nan() {
        let r = reduction_report(f64::INFINITY);
        let back = ExperimentReport::from_json(&r.to_json()).unwrap();
        let Payload::Reduction(p) = back.payload else { panic!() };
        assert!(p.scan.band.is_nan());
        assert!(!back.passed);
    }

    #[test]
    fn mismatched_payload_rejected() {
        let mut r = reduction_report(1.0);
        r.config.suite = Suite::Exterior;
        assert!(ExperimentReport::from_json(&r.to_json()).is_err());
        let text = r.to_json().replace(REPORT_FORMAT, "fracstab-report v0");
        assert!(ExperimentReport::from_json(&text).is_err());
    }
}
