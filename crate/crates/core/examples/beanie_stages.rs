//! Reduction of the beanie model by stages: the full-group Routhian on the
//! coadjoint orbit against the abelian Routhian followed by a compatible
//! transformation.

use magreduce::lie::CoVector;
use magreduce::models::{self, BeanieParams};
use magreduce::numerics::StepperChoice;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = BeanieParams::default();
    let (mu, a) = (1.0, CoVector::from_slice(&[1.0, 0.3]));
    let eq = models::beanie_stage_equivalence(&params, mu, &a)?;
    let s0 = models::beanie_reduced_state(0.5, 0.3, 0.0, mu, &a)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = eq.report(&mut rng, 40, 5, &s0, 5.0, StepperChoice::Rk4 { h: 1e-3 })?;
    println!("Routhian identity   {:.2e}", r.routhian_identity_residual);
    println!("form identity       {:.2e}", r.form_identity_residual);
    println!("trajectory gap      {:.2e}", r.trajectory_deviation);
    println!("Casimir drift       {:.2e}", r.casimir_drift);
    println!("nu drift            {:.2e}", r.nu_drift);
    println!("psi form residual   {:.2e}", r.symplectic.max_residual_form);
    println!("psi energy residual {:.2e}", r.symplectic.max_residual_energy);

    let full = models::beanie_state_from_momentum(&params, 0.5, 0.3, &[0.0, 0.0, 0.0], mu, &a)?;
    let sys = models::beanie_reduced_system(&params, mu, &a)?;
    println!(
        "energy: full {:.12}, reduced {:.12}",
        models::beanie_full_energy(&params, &full),
        sys.energy(&s0)?
    );
    Ok(())
}
