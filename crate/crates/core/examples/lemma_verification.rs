//! On a coadjoint orbit of SE(2) the KKS form equals the exterior derivative
//! of the canonical one-form, checked in two charts.

use std::f64::consts::TAU;

use magreduce::lie::{CoVector, LieGroup};
use magreduce::semidirect::{self, DualOrbitChart, OrbitChart, Se2CylinderChart, CHART_FD_STEP};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let group = LieGroup::se2();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for a in [[1.0, 0.0], [0.3, -2.0]] {
        let a = CoVector::from_slice(&a);
        semidirect::check_onto(&group, &a)?;
        let cylinder = Se2CylinderChart::new(&a)?;
        let angle = DualOrbitChart::new(&group, &a)?;
        let samples: Vec<DVector<f64>> = (0..25)
            .map(|_| DVector::from_column_slice(&[rng.gen_range(0.0..TAU), rng.gen_range(-2.0..2.0)]))
            .collect();
        let charts: [(&str, &dyn OrbitChart); 2] = [("cylinder", &cylinder), ("angle", &angle)];
        for (name, chart) in charts {
            let r = semidirect::verify_lemma_b_equals_dtheta(&group, chart, &samples, 5, CHART_FD_STEP, &mut rng)?;
            println!("a = {:?}, {name:>8} chart: max residual {r:.2e}", a.as_slice());
        }
    }
    let zero = CoVector::zeros(2);
    match semidirect::check_onto(&group, &zero) {
        Err(e) => println!("a = 0 rejected: {e}"),
        Ok(()) => println!("a = 0 unexpectedly accepted"),
    }
    Ok(())
}
