//! Orchestration: validate, run the selected suite inside a rayon pool of
//! the configured size, and persist the report.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::conductivity::{liouville_potential, Conductivity};
use crate::error::{Error, Result};
use crate::experiments::exterior::{exterior_recovery, exterior_stability_scan, probe_basis, Probe};
use crate::experiments::identities::{liouville_identity_residual, mtilde_equation_residual};
use crate::experiments::instability::instability_search;
use crate::experiments::modulus::log_stability_fit;
use crate::experiments::operator::{energy_identity_check, random_smooth_field};
use crate::experiments::presets::{self, Preset};
use crate::experiments::reduction::reduction_scan;
use crate::experiments::Lab;

use super::config::{ExperimentConfig, Suite};
use super::report::{
    CheckFlag, ExperimentReport, ExteriorPayload, InstabilityPayload, ModulusPayload, Payload, ReductionPayload,
    ResidualRow, ResidualsPayload,
};

/// Environment variable overriding the DN cache directory.
pub const CACHE_ENV: &str = "FRACSTAB_CACHE_DIR";

/// `$FRACSTAB_CACHE_DIR` if set and non-empty, else `<out>/cache`.
pub fn cache_dir(out: &Path) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => out.join("cache"),
    }
}

/// Runs a configuration without a DN cache.
pub fn run_config(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_with_cache(config, None)
}

pub fn run_with_cache(config: &ExperimentConfig, cache: Option<&Path>) -> Result<ExperimentReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", config.threads)))?;
    pool.install(|| {
        let mut lab = config.lab()?;
        if let Some(dir) = cache {
            lab = lab.with_cache(dir);
        }
        let (checks, payload) = match config.suite {
            Suite::Exterior => exterior(config, &lab)?,
            Suite::Reduction => reduction(config, &lab)?,
            Suite::Logmodulus => logmodulus(config, &lab)?,
            Suite::Instability => instability(config, &lab)?,
            Suite::Residuals => residuals(config, &lab)?,
        };
        Ok(ExperimentReport::new(config, checks, payload))
    })
}

type SuiteOutput = (Vec<CheckFlag>, Payload);

fn exterior(config: &ExperimentConfig, lab: &Lab) -> Result<SuiteOutput> {
    let geometry = &lab.geometry;
    let fam = presets::exterior_bump_scan(geometry, config.seed)?;
    let scan = exterior_stability_scan(lab, &fam.pairs, &fam.labels)?;
    let target = presets::exterior_recovery_target(geometry, config.seed)?;
    let centre = presets::exterior_centre(geometry, config.seed);
    let widths = config.params.probe_widths.clone();
    let recovery = exterior_recovery(lab, &target, &[Probe { point: centre, widths: widths.clone() }])?.remove(0);
    let recovery_error = (recovery.estimate - recovery.sampled).abs() / recovery.sampled;

    let mut probes = Vec::new();
    for k in -3..=3 {
        let point = [centre[0] + 0.1 * k as f64, centre[1]];
        let mut scale = 1.0;
        for _ in 0..24 {
            let p = Probe { point, widths: widths.iter().map(|w| w * scale).collect() };
            if probe_basis(lab, &p).is_ok() {
                probes.push(p);
                break;
            }
            scale *= 0.8;
        }
    }
    let profile = exterior_recovery(lab, &target, &probes)?;

    let checks = vec![
        CheckFlag::new(
            "lipschitz_spread",
            scan.spread <= 2.0,
            format!("fitted constant {:.4e}, spread {:.4} (limit 2)", scan.fitted_constant, scan.spread),
        ),
        CheckFlag::new(
            "exterior_recovery",
            recovery_error <= config.tolerances.recovery,
            format!("estimate {:.5} vs sampled {:.5}", recovery.estimate, recovery.sampled),
        ),
    ];
    Ok((checks, Payload::Exterior(ExteriorPayload { scan, recovery, recovery_error, profile })))
}

fn reduction(config: &ExperimentConfig, lab: &Lab) -> Result<SuiteOutput> {
    let fam = presets::reduction_ladder(&lab.geometry, config.seed)?;
    let theta0 = config.theta0();
    let scan = reduction_scan(lab, &fam.pairs, &fam.labels, theta0)?;
    let checks = vec![
        CheckFlag::new("fitted_constant_band", scan.band_ok, format!("band {:.4} (limit 5)", scan.band)),
        CheckFlag::new("dominant_term_bounded", scan.dominant_bounded, format!("{:?}", scan.dominant_ratios)),
        CheckFlag::new("linear_ratio_unbounded", scan.linear_unbounded, format!("{:?}", scan.linear_ratios)),
    ];
    Ok((checks, Payload::Reduction(ReductionPayload { theta0, scan })))
}

fn logmodulus(config: &ExperimentConfig, lab: &Lab) -> Result<SuiteOutput> {
    let fam = match config.preset {
        Preset::ReductionLadder => presets::reduction_ladder(&lab.geometry, config.seed)?,
        _ => presets::interior_amplitude_ladder(&lab.geometry, config.seed)?,
    };
    let fit = log_stability_fit(lab, &fam.pairs, &fam.labels, config.params.q_index, config.theta0())?;
    let above = fit.data_points.iter().filter(|p| p.above_floor).count();
    let checks = vec![
        CheckFlag::new("sigma_positive", fit.sigma > 0.0, format!("sigma {:.4}", fit.sigma)),
        CheckFlag::new("fit_quality", fit.r_squared >= 0.8, format!("r2 {:.5}", fit.r_squared)),
        CheckFlag::new("monotone", fit.monotone, String::new()),
        CheckFlag::new(
            "above_floor",
            above == fit.data_points.len(),
            format!("{above}/{} above floor {:.3e}", fit.data_points.len(), fit.floor),
        ),
    ];
    Ok((checks, Payload::Logmodulus(ModulusPayload { fit })))
}

fn instability(config: &ExperimentConfig, lab: &Lab) -> Result<SuiteOutput> {
    let params = config.mandache_params();
    let record = instability_search(lab, &params, config.mandache.count)?;
    let f = &record.decay_fit;
    let limit = config.params.ratio_limit;
    let checks = vec![
        CheckFlag::new(
            "separation",
            record.separation >= 0.5 * params.eps,
            format!("min pairwise gap {:.5}", record.separation),
        ),
        CheckFlag::new("decay_fit", f.rate > 0.0 && f.r_squared >= 0.9, format!("rate {:.4}, r2 {:.5}", f.rate, f.r_squared)),
        CheckFlag::new("decay_rank", f.spearman <= -0.8, format!("spearman {:.4}", f.spearman)),
        CheckFlag::new(
            "witness",
            record.gamma_gap >= params.eps * (1.0 - 1e-12) && record.ratio <= limit,
            format!("gamma gap {:.4}, ratio {:.3e} (limit {limit:e})", record.gamma_gap, record.ratio),
        ),
    ];
    Ok((checks, Payload::Instability(InstabilityPayload { record, ratio_limit: limit })))
}

fn residuals(config: &ExperimentConfig, lab: &Lab) -> Result<SuiteOutput> {
    let grid = lab.geometry.grid();
    let members = match config.preset {
        Preset::LiouvilleBumps => presets::liouville_bumps(&lab.geometry, config.seed)?,
        _ => vec![Conductivity::unit(grid)],
    };
    let one = Conductivity::unit(grid);
    let mut rows = Vec::with_capacity(members.len());
    for (k, gamma) in members.iter().enumerate() {
        let u = random_smooth_field(grid, config.seed, 2 * k as u64);
        let phi = random_smooth_field(grid, config.seed, 2 * k as u64 + 1);
        let liouville = liouville_identity_residual(gamma, &u, &phi, &lab.stencil)?;
        let mtilde = mtilde_equation_residual(gamma, &one, &lab.stencil)?.residual;
        let q = liouville_potential(gamma, &lab.stencil)?;
        let mg = lab.dn_conductivity(gamma)?;
        let dn_equivalence = lab.gap(&mg, &lab.dn_potential(&q)?)? / lab.norm(&mg)?;
        rows.push(ResidualRow { member: k, liouville, mtilde, dn_equivalence });
    }
    let energy = energy_identity_check(grid, *lab.stencil.op(), 10, config.seed)?;
    let t = &config.tolerances;
    let worst = |f: fn(&ResidualRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let (wl, wm, wd) = (worst(|r| r.liouville), worst(|r| r.mtilde), worst(|r| r.dn_equivalence));
    let checks = vec![
        CheckFlag::new("energy_identity", energy.max_relative_error <= t.identity, format!("{:.3e}", energy.max_relative_error)),
        CheckFlag::new("liouville_identity", wl <= t.identity, format!("{wl:.3e}")),
        CheckFlag::new("mtilde_equation", wm <= t.mtilde, format!("{wm:.3e}")),
        CheckFlag::new("dn_equivalence", wd <= t.dn_equivalence, format!("{wd:.3e}")),
    ];
    Ok((checks, Payload::Residuals(ResidualsPayload { energy, members: rows })))
}

/// Files written by [`execute`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub report_path: PathBuf,
    pub elapsed: Duration,
}

pub const REPORT_FILE: &str = "report.json";
pub const FAILURE_FILE: &str = "FAILED";

/// Runs `config` and writes `report.json`, the config echo and a
/// `timing.txt` sidecar into `out`. On error a `FAILED` marker with the
/// message and exit code is written instead and the error is returned.
pub fn execute(config: &ExperimentConfig, out: &Path, cache: Option<&Path>) -> Result<RunOutcome> {
    std::fs::create_dir_all(out)?;
    let _ = std::fs::remove_file(out.join(FAILURE_FILE));
    let start = Instant::now();
    let result = run_with_cache(config, cache);
    let elapsed = start.elapsed();
    match result {
        Ok(report) => {
            let report_path = out.join(REPORT_FILE);
            std::fs::write(&report_path, report.to_json())?;
            std::fs::write(out.join("config.toml"), config.to_toml())?;
            std::fs::write(
                out.join("timing.txt"),
                format!("wall_seconds {:.3}\nthreads {}\nreport_sha256 {}\n", elapsed.as_secs_f64(), config.threads, report.content_hash()),
            )?;
            Ok(RunOutcome { report, report_path, elapsed })
        }
        Err(e) => {
            let marker = format!("status failed\nexit_code {}\nerror {e}\nconfig_sha256 {}\n", e.exit_code(), config.hash());
            std::fs::write(out.join(FAILURE_FILE), marker)?;
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(suite: Suite) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(suite);
        c.geometry = c.geometry.with_points(512);
        c.basis.size = 8;
        c
    }

    #[test]
    fn unit_residuals_pass_tightly() {
        let mut c = ExperimentConfig::new(Suite::Residuals);
        c.basis.size = 8;
        c.tolerances.identity = 1e-8;
        c.tolerances.mtilde = 1e-8;
        c.tolerances.dn_equivalence = 1e-8;
        let r = run_config(&c).unwrap();
        assert!(r.passed, "{:?}", r.checks);
    }

    #[test]
    fn invalid_config_never_computes() {
        let mut c = small(Suite::Instability);
        c.mandache.ell = 2.8;
        assert_eq!(run_config(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn failure_marker_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(Suite::Reduction);
        c.threads = 0;
        let e = execute(&c, dir.path(), None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let marker = std::fs::read_to_string(dir.path().join(FAILURE_FILE)).unwrap();
        assert!(marker.contains("exit_code 2"));
        assert!(!dir.path().join(REPORT_FILE).exists());
    }
}
