//! Every example runs to completion.

#[path = "../examples/beanie_stages.rs"]
mod beanie_stages;
#[path = "../examples/charged_particle.rs"]
mod charged_particle;
#[path = "../examples/compat_transform.rs"]
mod compat_transform;
#[path = "../examples/lemma_verification.rs"]
mod lemma_verification;
#[path = "../examples/lie_groups.rs"]
mod lie_groups;
#[path = "../examples/rotor_routh.rs"]
mod rotor_routh;
#[path = "../examples/run_config.rs"]
mod run_config;

#[test]
fn lie_groups_runs() {
    lie_groups::main().unwrap();
}

#[test]
fn charged_particle_runs() {
    charged_particle::main().unwrap();
}

#[test]
fn rotor_routh_runs() {
    rotor_routh::main().unwrap();
}

#[test]
fn beanie_stages_runs() {
    beanie_stages::main().unwrap();
}

#[test]
fn compat_transform_runs() {
    compat_transform::main().unwrap();
}

#[test]
fn lemma_verification_runs() {
    lemma_verification::main().unwrap();
}

#[test]
fn run_config_runs() {
    run_config::main().unwrap();
}
