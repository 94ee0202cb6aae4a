//! A planar particle in a uniform magnetic field traces a circle of radius |v|/c.

use magreduce::maglag::{self, ChargedParticle, MagLagState};
use magreduce::numerics::StepperChoice;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = ChargedParticle { c: 2.0 };
    let s0 = MagLagState::from_slices(&[0.0, 0.0], &[1.0, 0.0], &[]);
    let period = std::f64::consts::TAU / sys.c;
    let traj = maglag::integrate(&sys, &s0, period, StepperChoice::Rk4 { h: 1e-3 })?;

    // guiding centre for v = (1, 0) and B = c dq1^dq2
    let centre = [0.0, -1.0 / sys.c];
    let radius_err = traj
        .states
        .iter()
        .map(|s| ((s.q[0] - centre[0]).hypot(s.q[1] - centre[1]) - 1.0 / sys.c).abs())
        .fold(0.0, f64::max);
    let last = traj.states.last().unwrap();
    println!("steps: {}", traj.len());
    println!("max radius error: {radius_err:.2e}");
    println!("return gap after one period: {:.2e}", (&last.q - &s0.q).amax());
    println!("energy drift: {:.2e}", maglag::energy_drift(&sys, &traj)?);
    println!("Hamiltonian residual at start: {:.2e}", maglag::hamiltonian_residual(&sys, &s0)?);
    Ok(())
}
