//! Every example runs to completion.

#[path = "../examples/dn_maps.rs"]
mod dn_maps;
#[path = "../examples/exterior_stability.rs"]
mod exterior_stability;
#[path = "../examples/forward_solve.rs"]
mod forward_solve;
#[path = "../examples/instability.rs"]
mod instability;
#[path = "../examples/liouville_reduction.rs"]
mod liouville_reduction;
#[path = "../examples/log_modulus.rs"]
mod log_modulus;
#[path = "../examples/operator_oracles.rs"]
mod operator_oracles;
#[path = "../examples/reduction_check.rs"]
mod reduction_check;
#[path = "../examples/run_config.rs"]
mod run_config;

#[test]
fn dn_maps_runs() {
    dn_maps::run().unwrap();
}

#[test]
fn exterior_stability_runs() {
    exterior_stability::run().unwrap();
}

#[test]
fn forward_solve_runs() {
    forward_solve::run().unwrap();
}

#[test]
fn instability_runs() {
    instability::run().unwrap();
}

#[test]
fn liouville_reduction_runs() {
    liouville_reduction::run().unwrap();
}

#[test]
fn log_modulus_runs() {
    log_modulus::run().unwrap();
}

#[test]
fn operator_oracles_runs() {
    operator_oracles::run().unwrap();
}

#[test]
fn reduction_check_runs() {
    reduction_check::run().unwrap();
}

#[test]
fn run_config_runs() {
    run_config::run().unwrap();
}
