//! Group operations on SO(3) and SE(2).

use magreduce::lie::{pair, CoVector, GroupElement, LieGroup};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let so3 = LieGroup::so3();
    let xi = so3.sample_algebra(&mut rng, 1.0);
    let eta = so3.sample_algebra(&mut rng, 1.0);
    let g = so3.exp(&xi, 0.7)?;
    let round_trip = so3.compose(&g, &so3.inverse(&g)?)?;
    println!("so3: |g g^-1 - e| = {:.2e}", so3.distance(&round_trip, &so3.identity()));

    // Ad_g is a Lie algebra automorphism
    let lhs = so3.adjoint(&g, &so3.bracket(&xi, &eta)?)?;
    let rhs = so3.bracket(&so3.adjoint(&g, &xi)?, &so3.adjoint(&g, &eta)?)?;
    println!("so3: |Ad[x,y] - [Ad x, Ad y]| = {:.2e}", (lhs.0 - rhs.0).amax());

    let nu = so3.sample_dual(&mut rng, 1.0);
    let moved = so3.coadjoint(&g, &nu)?;
    println!(
        "so3: Casimir before {:.12}, after coadjoint {:.12}",
        so3.casimir(&nu).unwrap(),
        so3.casimir(&moved).unwrap()
    );
    println!("so3: <Ad*_g nu, xi> = {:.12}, <nu, Ad_g xi> = {:.12}", pair(&moved, &xi), pair(&nu, &so3.adjoint(&g, &xi)?));

    let se2 = LieGroup::se2();
    let a = CoVector::from_slice(&[1.0, 0.5]);
    for theta in [0.0, 1.0, 3.0] {
        let b = se2.dual_action(&GroupElement::circle(theta), &a)?;
        println!("se2: theta = {theta:.1}, b = ({:+.6}, {:+.6}), |b| = {:.6}", b.0[0], b.0[1], b.0.norm());
    }
    let h = se2.sample_element(&mut rng, 1.0);
    let mu = CoVector::from_slice(&[0.3, 1.0, -0.4]);
    println!(
        "se2: Casimir {:.12} -> {:.12}",
        se2.casimir(&mu).unwrap(),
        se2.casimir(&se2.coadjoint(&h, &mu)?).unwrap()
    );
    Ok(())
}
