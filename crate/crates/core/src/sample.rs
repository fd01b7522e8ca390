//! Seeded random states for tests, benchmarks and the `--seed` CLI flag.

use nalgebra::DMatrix;
use rand::Rng;

use crate::jet::{Jet2Element, S12Tensor};
use crate::kernel::Kernel;
use crate::phase::{JetOrder, ParticleState, SystemState};

/// A 2-jet near the identity: `g = I + U(-0.4, 0.4)`, `s ~ U(-1, 1)`.
pub fn random_jet2(rng: &mut impl Rng, dim: usize) -> Jet2Element {
    loop {
        let g = DMatrix::from_fn(dim, dim, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) + rng.random_range(-0.4..0.4)
        });
        let s = S12Tensor::from_fn(dim, |_, _, _| rng.random_range(-1.0..1.0));
        if let Ok(e) = Jet2Element::new(g, s) {
            return e;
        }
    }
}

/// Random momenta of magnitude up to `scale` for a particle shaped like `p`.
pub fn randomize_momenta(rng: &mut impl Rng, p: &ParticleState, scale: f64) -> ParticleState {
    let d = p.dim();
    let mut draw = || rng.random_range(-scale..=scale);
    let pi_q: Vec<f64> = (0..d).map(|_| draw()).collect();
    match p.order() {
        JetOrder::Zero => ParticleState::order0(p.q().to_vec(), pi_q),
        JetOrder::One => {
            let pi_g = DMatrix::from_fn(d, d, |_, _| draw());
            ParticleState::order1(p.q().to_vec(), p.g().unwrap().clone(), pi_q, pi_g)
        }
        JetOrder::Two => {
            let pi_g = DMatrix::from_fn(d, d, |_, _| draw());
            let pi_s = S12Tensor::from_fn(d, |_, _, _| draw());
            ParticleState::order2(
                p.q().to_vec(),
                p.g().unwrap().clone(),
                p.s().unwrap().clone(),
                pi_q,
                pi_g,
                pi_s,
            )
        }
    }
    .expect("shapes copied from a valid particle")
}

/// `n` particles with positions in `[-1, 1]^d`, near-identity jets and
/// momenta in `[-scale, scale]`, gaussian kernel with unit scale.
pub fn random_system(rng: &mut impl Rng, dim: usize, order: JetOrder, n: usize, scale: f64) -> SystemState {
    let kernel = Kernel::gaussian(1.0, dim).expect("valid kernel");
    let particles = (0..n)
        .map(|_| {
            let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rest = ParticleState::at_rest(order, q.clone());
            let shaped = match order {
                JetOrder::Zero => rest,
                JetOrder::One => {
                    let h = random_jet2(rng, dim);
                    ParticleState::order1(q, h.linear().clone(), vec![0.0; dim], DMatrix::zeros(dim, dim))
                        .expect("near-identity jet")
                }
                JetOrder::Two => {
                    let h = random_jet2(rng, dim);
                    let s = h.quadratic().scale(0.3);
                    ParticleState::order2(
                        q,
                        h.linear().clone(),
                        s,
                        vec![0.0; dim],
                        DMatrix::zeros(dim, dim),
                        S12Tensor::zeros(dim),
                    )
                    .expect("near-identity jet")
                }
            };
            randomize_momenta(rng, &shaped, scale)
        })
        .collect();
    SystemState::new(kernel, particles).expect("random positions are distinct")
}
