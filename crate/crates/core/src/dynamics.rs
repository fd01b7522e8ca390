//! Kernel Hamiltonian on `T*Q^(k)` and its canonical flow.
//!
//! Spatial momenta `C_A = (a, b, c)_A` generate the velocity field
//!
//! ```text
//! v(x) = sum_A a_A K(x - q_A) + b_A^i_j d_j K(x - q_A) + c_A^i_{jk} d_j d_k K(x - q_A)
//! ```
//!
//! and `H = 1/2 sum_A <C_A, jet of v at q_A>`, which expands to the double
//! sum `1/2 sum_{A,B} sum_{alpha,beta} (-1)^|alpha| C_alpha,A C_beta,B
//! d_{alpha+beta} K(q_A - q_B)`. Because that quadratic form is symmetric,
//! `dH/dC_A` is the jet of `v` at `q_A` and all gradients reduce to
//! contractions of `v`'s derivatives up to order three (kernel order five).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conservation::invariant_values;
use crate::error::{check_dim, Error, Result};
use crate::jet::Jet2Element;
use crate::kernel::Kernel;
use crate::phase::{push_row_major, reconstruction, FieldJet, JetOrder, ParticleState, SpatialMomentum, SystemState};
use crate::tensor::Tensor;

/// Highest field derivative [`velocity_jet`] returns.
pub const MAX_FIELD_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Rk4,
}

fn field_jet(kernel: &Kernel, sources: &[(&[f64], &SpatialMomentum)], x: &[f64], m: usize) -> FieldJet {
    let d = kernel.dim();
    let mut out: Vec<Vec<f64>> = (0..=m).map(|n| vec![0.0; d.pow(n as u32 + 1)]).collect();
    let mut r = vec![0.0; d];
    for &(q, mom) in sources {
        for (ri, (xi, qi)) in r.iter_mut().zip(x.iter().zip(q)) {
            *ri = xi - qi;
        }
        let extra = if mom.c.is_some() {
            2
        } else if mom.b.is_some() {
            1
        } else {
            0
        };
        let kt = kernel.deriv_tensors_unchecked(&r, m + extra);
        for (n, slot) in out.iter_mut().enumerate() {
            let stride = d.pow(n as u32);
            for i in 0..d {
                let row = &mut slot[i * stride..(i + 1) * stride];
                let ai = mom.a[i];
                if ai != 0.0 {
                    for (o, t) in row.iter_mut().zip(kt[n].as_slice()) {
                        *o += ai * t;
                    }
                }
                if let Some(b) = &mom.b {
                    for j in 0..d {
                        let bij = b[(i, j)];
                        if bij == 0.0 {
                            continue;
                        }
                        let t = &kt[n + 1].as_slice()[j * stride..(j + 1) * stride];
                        for (o, t) in row.iter_mut().zip(t) {
                            *o += bij * t;
                        }
                    }
                }
                if let Some(c) = &mom.c {
                    for jk in 0..d * d {
                        let cijk = c.as_slice()[i * d * d + jk];
                        if cijk == 0.0 {
                            continue;
                        }
                        let t = &kt[n + 2].as_slice()[jk * stride..(jk + 1) * stride];
                        for (o, t) in row.iter_mut().zip(t) {
                            *o += cijk * t;
                        }
                    }
                }
            }
        }
    }
    FieldJet::from_tensors(
        out.into_iter()
            .enumerate()
            .map(|(n, v)| Tensor::from_vec(d, n + 1, v))
            .collect(),
    )
}

struct FieldSources<'a> {
    kernel: &'a Kernel,
    positions: Vec<&'a [f64]>,
    momenta: Vec<SpatialMomentum>,
}

impl<'a> FieldSources<'a> {
    fn new(state: &'a SystemState) -> Self {
        FieldSources {
            kernel: state.kernel(),
            positions: state.particles().iter().map(ParticleState::q).collect(),
            momenta: state.spatial_momenta(),
        }
    }

    fn jet_at(&self, x: &[f64], m: usize) -> FieldJet {
        let sources: Vec<(&[f64], &SpatialMomentum)> =
            self.positions.iter().copied().zip(self.momenta.iter()).collect();
        field_jet(self.kernel, &sources, x, m)
    }
}

/// The velocity field and its first `m` spatial derivatives at `x`.
pub fn velocity_jet(state: &SystemState, x: &[f64], m: usize) -> Result<FieldJet> {
    check_dim("evaluation point", state.dim(), x.len())?;
    if m > MAX_FIELD_ORDER {
        return Err(Error::InvalidInput(format!(
            "velocity jets are available up to order {MAX_FIELD_ORDER}, requested {m}"
        )));
    }
    Ok(FieldSources::new(state).jet_at(x, m))
}

pub fn hamiltonian(state: &SystemState) -> f64 {
    let sources = FieldSources::new(state);
    let m = state.order().as_usize();
    0.5 * sources
        .positions
        .iter()
        .zip(&sources.momenta)
        .map(|(q, mom)| mom.pair(&sources.jet_at(q, m)))
        .sum::<f64>()
}

/// Partial derivatives of `H` for one particle. Blocks that the particle's
/// order does not carry are `None`; tensor blocks are row-major `d^3`
/// arrays over raw (unsymmetrized) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleGradient {
    pub q: Vec<f64>,
    pub g: Option<DMatrix<f64>>,
    pub s: Option<Vec<f64>>,
    pub pi_q: Vec<f64>,
    pub pi_g: Option<DMatrix<f64>>,
    pub pi_s: Option<Vec<f64>>,
}

impl ParticleGradient {
    fn pack_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.q);
        if let Some(g) = &self.g {
            push_row_major(out, g);
        }
        if let Some(s) = &self.s {
            out.extend_from_slice(s);
        }
        out.extend_from_slice(&self.pi_q);
        if let Some(p) = &self.pi_g {
            push_row_major(out, p);
        }
        if let Some(p) = &self.pi_s {
            out.extend_from_slice(p);
        }
    }

    /// Hamilton's equations for this particle, packed like the state.
    fn pack_vector_field(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.pi_q);
        if let Some(p) = &self.pi_g {
            push_row_major(out, p);
        }
        if let Some(p) = &self.pi_s {
            out.extend_from_slice(p);
        }
        out.extend(self.q.iter().map(|x| -x));
        if let Some(g) = &self.g {
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    out.push(-g[(i, j)]);
                }
            }
        }
        if let Some(s) = &self.s {
            out.extend(s.iter().map(|x| -x));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianGradient {
    pub particles: Vec<ParticleGradient>,
}

impl HamiltonianGradient {
    /// Flat gradient in the layout of [`SystemState::coordinates`].
    pub fn to_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in &self.particles {
            p.pack_into(&mut out);
        }
        out
    }
}

fn particle_gradient(p: &ParticleState, mom: &SpatialMomentum, jet: &FieldJet) -> ParticleGradient {
    let d = p.dim();
    let (pi_q_dot, pi_g_dot, pi_s_dot) = reconstruction(p, jet);
    let dv = jet.derivative(1).as_slice();
    // Present only for order >= 1 particles, which are the only readers.
    let d2v = jet.tensors().get(2).map_or(&[][..], Tensor::as_slice);

    // dH/dq^p = <C, d_p v>: pair the momenta with the gradient of the field.
    let mut dq = vec![0.0; d];
    for (pp, slot) in dq.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..d {
            acc += mom.a[i] * dv[i * d + pp];
        }
        if let Some(b) = &mom.b {
            for i in 0..d {
                for l in 0..d {
                    acc -= b[(i, l)] * d2v[(i * d + l) * d + pp];
                }
            }
        }
        if let Some(c) = &mom.c {
            let d3v = jet.derivative(3).as_slice();
            for i in 0..d {
                for l in 0..d {
                    for m in 0..d {
                        acc += c.get(i, l, m) * d3v[((i * d + l) * d + m) * d + pp];
                    }
                }
            }
        }
        *slot = acc;
    }

    let dg = p.g().map(|g| {
        let pi_g = p.pi_g().expect("order >= 1");
        let dv_m = DMatrix::from_row_slice(d, d, dv);
        let mut out = dv_m.transpose() * pi_g;
        if let Some(pi_s) = p.pi_s() {
            for l in 0..d {
                for j in 0..d {
                    let mut acc = 0.0;
                    for i in 0..d {
                        for m in 0..d {
                            let w = d2v[(i * d + l) * d + m];
                            if w == 0.0 {
                                continue;
                            }
                            for k in 0..d {
                                acc += w * (pi_s.get(i, j, k) + pi_s.get(i, k, j)) * g[(m, k)];
                            }
                        }
                    }
                    out[(l, j)] += acc;
                }
            }
        }
        out
    });

    let ds = p.pi_s().map(|pi_s| {
        let mut out = vec![0.0; d * d * d];
        for l in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut acc = 0.0;
                    for i in 0..d {
                        acc += pi_s.get(i, j, k) * dv[i * d + l];
                    }
                    out[(l * d + j) * d + k] = acc;
                }
            }
        }
        out
    });

    ParticleGradient {
        q: dq,
        g: dg,
        s: ds,
        pi_q: pi_q_dot,
        pi_g: pi_g_dot,
        pi_s: pi_s_dot.map(|t| t.as_slice().to_vec()),
    }
}

/// Analytic gradient of [`hamiltonian`]. The momentum blocks are the
/// reconstruction velocities `(v(q), Dv g, D^2v[g,g] + Dv s)`.
pub fn grad_hamiltonian(state: &SystemState) -> HamiltonianGradient {
    let sources = FieldSources::new(state);
    let m = state.order().as_usize() + 1;
    HamiltonianGradient {
        particles: state
            .particles()
            .iter()
            .zip(&sources.momenta)
            .map(|(p, mom)| particle_gradient(p, mom, &sources.jet_at(p.q(), m)))
            .collect(),
    }
}

/// Time derivative of [`SystemState::coordinates`] under Hamilton's equations.
pub fn hamiltonian_vector_field(state: &SystemState) -> Vec<f64> {
    let grad = grad_hamiltonian(state);
    let mut out = Vec::with_capacity(state.coordinate_len());
    for p in &grad.particles {
        p.pack_vector_field(&mut out);
    }
    out
}

/// Snapshots of an integrated system plus per-step invariant series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    /// Invariant name to per-step values (row-major for tensors).
    pub series: BTreeMap<String, Vec<Vec<f64>>>,
}

impl Trajectory {
    fn start(state: &SystemState) -> Self {
        let mut t = Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            series: BTreeMap::new(),
        };
        t.record(0.0, state.clone());
        t
    }

    fn record(&mut self, time: f64, state: SystemState) {
        let state = state.symmetrized();
        for (name, value) in invariant_values(&state) {
            self.series.entry(name).or_default().push(value);
        }
        self.times.push(time);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> &SystemState {
        &self.states[0]
    }

    pub fn last(&self) -> &SystemState {
        self.states
            .last()
            .expect("trajectories hold at least the initial state")
    }

    /// The 2-jet `(g, s)` of the flow at a particle's initial point, read
    /// from the final snapshot (`s = 0` for order-1 particles).
    pub fn jet_of_flow(&self, particle: usize) -> Result<Jet2Element> {
        let last = self.last();
        let p = last.particle(particle)?;
        if p.order() == JetOrder::Zero {
            return Err(Error::UnsupportedOrder {
                operation: "jet_of_flow",
                order: 0,
            });
        }
        p.jet()
    }
}

/// Uniform step count no coarser than `dt`.
fn step_plan(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "final time must be non-negative, got {t_final}"
        )));
    }
    if t_final == 0.0 {
        return Ok((0, dt));
    }
    if dt > t_final {
        return Err(Error::InvalidInput(format!(
            "time step {dt} exceeds the final time {t_final}"
        )));
    }
    let ratio = t_final / dt;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio {
        ratio.round()
    } else {
        ratio.ceil()
    } as usize;
    Ok((steps, t_final / steps as f64))
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn rk4_step(y: &[f64], h: f64, f: &impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * h, &k1));
    let k3 = f(&axpy(y, 0.5 * h, &k2));
    let k4 = f(&axpy(y, h, &k3));
    y.iter()
        .enumerate()
        .map(|(i, yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn all_finite(y: &[f64]) -> bool {
    y.iter().all(|x| x.is_finite())
}

/// Fixed-step integration of Hamilton's equations with a snapshot at every
/// step. If `dt` does not divide `t_final` the step is shortened so that it
/// does.
pub fn integrate(state: &SystemState, t_final: f64, dt: f64, scheme: Scheme) -> Result<Trajectory> {
    let Scheme::Rk4 = scheme;
    let (steps, h) = step_plan(t_final, dt)?;
    let mut traj = Trajectory::start(state);
    let f = |y: &[f64]| hamiltonian_vector_field(&state.with_coordinates(y).expect("fixed layout"));
    let mut y = state.coordinates();
    for step in 1..=steps {
        y = rk4_step(&y, h, &f);
        if !all_finite(&y) {
            return Err(Error::Divergence { step });
        }
        let time = if step == steps { t_final } else { step as f64 * h };
        traj.record(time, state.with_coordinates(&y)?);
    }
    Ok(traj)
}

/// Final state only, for callers that shoot many times.
pub fn shoot(state: &SystemState, t_final: f64, dt: f64) -> Result<SystemState> {
    let (steps, h) = step_plan(t_final, dt)?;
    let f = |y: &[f64]| hamiltonian_vector_field(&state.with_coordinates(y).expect("fixed layout"));
    let mut y = state.coordinates();
    for step in 1..=steps {
        y = rk4_step(&y, h, &f);
        if !all_finite(&y) {
            return Err(Error::Divergence { step });
        }
    }
    state.with_coordinates(&y)
}

/// Particle trajectory together with advected passive points;
/// `paths[point][step]` is the point's position at `trajectory.times[step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub trajectory: Trajectory,
    pub paths: Vec<Vec<Vec<f64>>>,
}

/// Advects `points` by `x' = v(x, t)` alongside the particle system, using the
/// same RK4 stages. `threads > 1` evaluates the field at the points in a
/// dedicated pool; each point's velocity is computed independently, so the
/// result does not depend on the thread count.
pub fn flow_points(
    state: &SystemState,
    points: &[Vec<f64>],
    t_final: f64,
    dt: f64,
    threads: usize,
) -> Result<FlowResult> {
    let d = state.dim();
    for p in points {
        check_dim("passive point", d, p.len())?;
    }
    let (steps, h) = step_plan(t_final, dt)?;
    let pool = if threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?,
        )
    } else {
        None
    };
    let n_state = state.coordinate_len();
    let f = |y: &[f64]| -> Vec<f64> {
        let current = state.with_coordinates(&y[..n_state]).expect("fixed layout");
        let mut out = hamiltonian_vector_field(&current);
        let sources = FieldSources::new(&current);
        let eval = |x: &[f64]| sources.jet_at(x, 0).value().as_slice().to_vec();
        let velocities: Vec<Vec<f64>> = match &pool {
            Some(pool) => pool.install(|| y[n_state..].par_chunks(d).map(eval).collect()),
            None => y[n_state..].chunks(d).map(eval).collect(),
        };
        out.extend(velocities.into_iter().flatten());
        out
    };

    let mut y = state.coordinates();
    y.extend(points.iter().flatten());
    let mut traj = Trajectory::start(state);
    let mut paths: Vec<Vec<Vec<f64>>> = points.iter().map(|p| vec![p.clone()]).collect();
    for step in 1..=steps {
        y = rk4_step(&y, h, &f);
        if !all_finite(&y) {
            return Err(Error::Divergence { step });
        }
        let time = if step == steps { t_final } else { step as f64 * h };
        traj.record(time, state.with_coordinates(&y[..n_state])?);
        for (path, x) in paths.iter_mut().zip(y[n_state..].chunks(d)) {
            path.push(x.to_vec());
        }
    }
    Ok(FlowResult {
        trajectory: traj,
        paths,
    })
}
