//! The harness as a library: build a configuration, run it with a DN cache,
//! write the report and the plot sidecars.

use fracstab::harness::{emit_plots, execute, ExperimentConfig, Suite};

pub fn run() -> fracstab::Result<()> {
    let mut cfg = ExperimentConfig::new(Suite::Logmodulus);
    cfg.seed = 7;
    println!("{}", cfg.to_toml());
    cfg.validate()?;

    let out = std::env::temp_dir().join(format!("fracstab-run-example-{}", std::process::id()));
    let cache = out.join("cache");
    let first = execute(&cfg, &out, Some(&cache))?;
    let again = execute(&cfg, &out, Some(&cache))?;
    println!("passed {}, report sha256 {}", first.report.passed, first.report.content_hash());
    println!("rerun from cache identical: {}", first.report.to_json() == again.report.to_json());
    println!("first run {:.2}s, cached rerun {:.2}s", first.elapsed.as_secs_f64(), again.elapsed.as_secs_f64());

    let plots = emit_plots(&first.report, &out.join("plots"))?;
    for f in &plots.files {
        println!("wrote {}", f.display());
    }
    std::fs::remove_dir_all(&out)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> fracstab::Result<()> {
    run()
}
