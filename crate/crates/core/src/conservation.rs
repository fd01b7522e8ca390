//! Noether momenta of the internal jet symmetry and drift audits.
//!
//! The right action of `(I + e xi, e eta)` moves a particle by
//! `dg = g xi`, `ds^i_{jk} = s^i_{lm}(xi^l_j delta^m_k + delta^l_j xi^m_k) + g^i_l eta^l_{jk}`.
//! Pairing the canonical momenta with these generators gives the momentum
//! map blocks computed here. The Hamiltonian depends on `(g, s, pi)` only
//! through the spatial momenta, which the action preserves, so the blocks
//! are constants of motion. Translations give the total linear momentum.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{hamiltonian, Trajectory};
use crate::error::{Error, Result};
use crate::jet::S12Tensor;
use crate::phase::{push_row_major, JetOrder, ParticleState, SystemState};

/// `J_gl^l_j = g^i_l pi_g^i_j + pi_s^i_{jk} s^i_{lk} + pi_s^i_{kj} s^i_{kl}`.
pub fn noether_gl(p: &ParticleState) -> Result<DMatrix<f64>> {
    let (Some(g), Some(pi_g)) = (p.g(), p.pi_g()) else {
        return Err(Error::UnsupportedOrder {
            operation: "noether_gl",
            order: p.order().as_usize(),
        });
    };
    let d = p.dim();
    let mut j = g.transpose() * pi_g;
    if let (Some(s), Some(pi_s)) = (p.s(), p.pi_s()) {
        for l in 0..d {
            for jj in 0..d {
                let mut acc = 0.0;
                for i in 0..d {
                    for k in 0..d {
                        acc += pi_s.get(i, jj, k) * s.get(i, l, k) + pi_s.get(i, k, jj) * s.get(i, k, l);
                    }
                }
                j[(l, jj)] += acc;
            }
        }
    }
    Ok(j)
}

/// `J_s^l_{jk} = g^i_l pi_s^i_{jk}`.
pub fn noether_s12(p: &ParticleState) -> Result<S12Tensor> {
    let (Some(g), Some(pi_s)) = (p.g(), p.pi_s()) else {
        return Err(Error::UnsupportedOrder {
            operation: "noether_s12",
            order: p.order().as_usize(),
        });
    };
    let d = p.dim();
    Ok(S12Tensor::from_fn(d, |l, j, k| {
        (0..d).map(|i| g[(i, l)] * pi_s.get(i, j, k)).sum()
    }))
}

pub const SERIES_HAMILTONIAN: &str = "hamiltonian";
pub const SERIES_LINEAR_MOMENTUM: &str = "linear_momentum";

pub fn series_noether_gl(particle: usize) -> String {
    format!("noether_gl[{particle}]")
}

pub fn series_noether_s12(particle: usize) -> String {
    format!("noether_s12[{particle}]")
}

/// Every audited invariant of a state, by series name.
pub fn invariant_values(state: &SystemState) -> Vec<(String, Vec<f64>)> {
    let mut out = vec![
        (SERIES_HAMILTONIAN.to_string(), vec![hamiltonian(state)]),
        (SERIES_LINEAR_MOMENTUM.to_string(), state.linear_momentum()),
    ];
    for (n, p) in state.particles().iter().enumerate() {
        if p.order() >= JetOrder::One {
            let mut flat = Vec::new();
            push_row_major(&mut flat, &noether_gl(p).expect("order >= 1"));
            out.push((series_noether_gl(n), flat));
        }
        if p.order() == JetOrder::Two {
            let js = noether_s12(p).expect("order 2");
            out.push((series_noether_s12(n), js.as_slice().to_vec()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantDrift {
    pub name: String,
    pub initial: Vec<f64>,
    /// Largest `max_i |x_i(t) - x_i(0)|` over the trajectory.
    pub max_abs_drift: f64,
    /// `max_abs_drift / max(1, max_i |x_i(0)|)`.
    pub max_rel_drift: f64,
    pub time_of_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub invariants: Vec<InvariantDrift>,
}

impl InvariantReport {
    pub fn get(&self, name: &str) -> Option<&InvariantDrift> {
        self.invariants.iter().find(|d| d.name == name)
    }

    pub fn worst_relative_drift(&self) -> f64 {
        self.invariants.iter().fold(0.0, |m, d| m.max(d.max_rel_drift))
    }
}

pub fn audit(traj: &Trajectory) -> Result<InvariantReport> {
    if traj.len() < 2 {
        return Err(Error::ShortTrajectory(traj.len()));
    }
    let mut invariants = Vec::with_capacity(traj.series.len());
    // Report order: energy, linear momentum, then per-particle blocks.
    let mut names: Vec<&String> = traj.series.keys().collect();
    names.sort_by_key(|n| match n.as_str() {
        SERIES_HAMILTONIAN => (0, (*n).clone()),
        SERIES_LINEAR_MOMENTUM => (1, (*n).clone()),
        _ => (2, (*n).clone()),
    });
    for name in names {
        let values = &traj.series[name];
        let initial = values[0].clone();
        let scale = initial.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut max_abs_drift = 0.0;
        let mut time_of_max = traj.times[0];
        for (t, v) in traj.times.iter().zip(values) {
            let drift = v.iter().zip(&initial).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if drift > max_abs_drift {
                max_abs_drift = drift;
                time_of_max = *t;
            }
        }
        invariants.push(InvariantDrift {
            name: name.clone(),
            initial,
            max_abs_drift,
            max_rel_drift: max_abs_drift / scale,
            time_of_max,
        });
    }
    Ok(InvariantReport { invariants })
}
