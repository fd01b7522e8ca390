#![allow(dead_code)]

use jetflow::phase::JetOrder;
use jetflow::sample::random_system;
use jetflow::{velocity_jet, ParticleState, S12Tensor, SystemState};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ORDERS: [JetOrder; 3] = [JetOrder::Zero, JetOrder::One, JetOrder::Two];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn seeded_system(seed: u64, dim: usize, order: JetOrder, n: usize) -> SystemState {
    random_system(&mut rng(seed), dim, order, n, 0.5)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Central difference of `f` along every coordinate of `x`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `|H(t) - H(0)| / max(1, |H(0)|)` maximized over the trajectory.
pub fn energy_drift(traj: &jetflow::Trajectory) -> f64 {
    let h0 = jetflow::hamiltonian(traj.initial());
    traj.states
        .iter()
        .map(|s| (jetflow::hamiltonian(s) - h0).abs() / h0.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Isserlis moments of the unit gaussian: derivatives of `K` at the origin.
pub fn gaussian_derivative_at_origin(idx: &[usize]) -> f64 {
    match idx.len() {
        0 => 1.0,
        n if n % 2 == 1 => 0.0,
        _ => {
            let mut total = 0.0;
            for partner in 1..idx.len() {
                if idx[0] == idx[partner] {
                    let rest: Vec<usize> = idx[1..]
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k + 1 != partner)
                        .map(|(_, &v)| v)
                        .collect();
                    total += gaussian_derivative_at_origin(&rest);
                }
            }
            -total
        }
    }
}

/// `1/2 sum (-1)^|alpha| c_alpha c_beta d_{alpha+beta} K(0)` over all index tuples.
pub fn double_sum(d: usize, a: &[f64], b: &DMatrix<f64>, c: &S12Tensor) -> f64 {
    let mut blocks: Vec<(Vec<usize>, usize, f64)> = Vec::new();
    for i in 0..d {
        blocks.push((vec![], i, a[i]));
        for j in 0..d {
            blocks.push((vec![j], i, b[(i, j)]));
            for k in 0..d {
                blocks.push((vec![j, k], i, c.get(i, j, k)));
            }
        }
    }
    let mut h = 0.0;
    for (alpha, i, x) in &blocks {
        for (beta, l, y) in &blocks {
            if i != l {
                continue;
            }
            let joint: Vec<usize> = alpha.iter().chain(beta).copied().collect();
            let sign = if alpha.len() % 2 == 1 { -1.0 } else { 1.0 };
            h += sign * x * y * gaussian_derivative_at_origin(&joint);
        }
    }
    0.5 * h
}

/// `(v, Dv g, sym(D^2v[g, g] + Dv s))` assembled from the field jet.
pub fn reconstruction_oracle(state: &SystemState, p: &ParticleState) -> Vec<f64> {
    let d = state.dim();
    let jet = velocity_jet(state, p.q(), 2).unwrap();
    let v = jet.value().as_slice();
    let dv = jet.derivative(1);
    let d2v = jet.derivative(2);
    let mut out = v.to_vec();
    if let Some(g) = p.g() {
        for i in 0..d {
            for j in 0..d {
                out.push((0..d).map(|l| dv.get(&[i, l]) * g[(l, j)]).sum());
            }
        }
    }
    if let (Some(g), Some(s)) = (p.g(), p.s()) {
        let raw = |i: usize, j: usize, k: usize| -> f64 {
            let mut x = 0.0;
            for l in 0..d {
                x += dv.get(&[i, l]) * s.get(l, j, k);
                for m in 0..d {
                    x += d2v.get(&[i, l, m]) * g[(l, j)] * g[(m, k)];
                }
            }
            x
        };
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    out.push(0.5 * (raw(i, j, k) + raw(i, k, j)));
                }
            }
        }
    }
    out
}
