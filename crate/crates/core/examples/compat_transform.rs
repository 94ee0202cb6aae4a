//! A compatible transformation in its simplest form: a free particle in
//! polar coordinates with the cyclic angle traded for its momentum.

use std::sync::Arc;

use magreduce::compat::{BetaMap, ConnectionOnF, PulledBackSystem, TransformationPair};
use magreduce::maglag::{self, ClosureSystem, MagLagState};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    // q = (r, phi)
    let polar = ClosureSystem::ordinary(2, |q, v| 0.5 * (v[0] * v[0] + q[0] * q[0] * v[1] * v[1]));
    let pair = TransformationPair::new(1, 1, 0, 1);
    let sys = PulledBackSystem::new(pair, Arc::new(polar), BetaMap::new(|w| DVector::from_element(1, w[w.len() - 1])), ConnectionOnF::zero(pair))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<MagLagState> = (0..20)
        .map(|_| {
            // fibre coordinates: the angle, then its momentum
            let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)];
            MagLagState::from_slices(&[rng.gen_range(0.5..2.0)], &[rng.gen_range(-1.0..1.0)], &p)
        })
        .collect();
    let report = sys.verify(&samples, 5, &mut rng)?;
    println!("samples {}", report.samples);
    println!("form residual     {:.2e}", report.max_residual_form);
    println!("energy residual   {:.2e}", report.max_residual_energy);
    println!("momentum residual {:.2e}", report.max_residual_momentum);

    let s = &samples[0];
    let image = sys.psi(s)?;
    println!(
        "(r, r', p_phi) = ({:.4}, {:.4}, {:.4}) -> phi' = {:.6}, p_phi / r^2 = {:.6}",
        s.q[0],
        s.v[0],
        s.p[1],
        image.v[1],
        s.p[1] / (s.q[0] * s.q[0])
    );
    println!("energy: {:.12}", maglag::energy(&sys, s)?);
    Ok(())
}
