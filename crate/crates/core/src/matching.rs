//! Registration of particle configurations by geodesic shooting.
//!
//! The unknown is the initial canonical momentum of every particle. For a
//! candidate it is integrated to `t = 1` and scored by
//!
//! ```text
//! E = H(z0) + lambda sum_A ( |q_A(1) - y_A|^2 + w_g |g_A(1) - g*_A|^2 + w_s |s_A(1) - s*_A|^2 )
//! ```
//!
//! where `H` is the (conserved) geodesic energy and jet terms appear only
//! for particles that have jet targets. `E` is minimized by gradient
//! descent with central-difference gradients and Armijo backtracking.
//!
//! Shooting runs in coordinates relative to the source centroid. `H` and the
//! mismatch only see differences of positions, so this changes nothing
//! mathematically, but it makes a rigidly translated problem bitwise
//! identical to the original instead of merely equal up to roundoff that
//! the finite differences would amplify.

use nalgebra::DMatrix;

use crate::dynamics::{hamiltonian, integrate, shoot, Scheme, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::jet::S12Tensor;
use crate::phase::{JetOrder, ParticleState, SystemState};

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub y: Vec<f64>,
    pub g: Option<DMatrix<f64>>,
    pub s: Option<S12Tensor>,
}

impl Target {
    pub fn position(y: Vec<f64>) -> Self {
        Target { y, g: None, s: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub grad_tolerance: f64,
    pub fd_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iters: 200,
            grad_tolerance: 1e-6,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationProblem {
    /// Centered source (positions minus `origin`).
    source: SystemState,
    /// Targets with `y` centered.
    targets: Vec<Target>,
    origin: Vec<f64>,
    lambda: f64,
    w_g: f64,
    w_s: f64,
    optimizer: OptimizerSettings,
    dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Source configuration carrying the optimal initial momenta.
    pub initial: SystemState,
    pub momenta: Vec<f64>,
    pub trajectory: Trajectory,
    pub history: Vec<f64>,
    /// Per particle `|q - y|^2 + w_g |g - g*|^2 + w_s |s - s*|^2` at `t = 1`.
    pub mismatch: Vec<f64>,
    /// Per particle `|q(1) - y|`.
    pub position_error: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl RegistrationProblem {
    /// `source` must hold identity jets; its momenta are ignored.
    pub fn new(
        source: &SystemState,
        targets: Vec<Target>,
        lambda: f64,
        w_g: f64,
        w_s: f64,
        optimizer: OptimizerSettings,
        dt: f64,
    ) -> Result<Self> {
        check_dim("registration targets", source.len(), targets.len())?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::validation("match.lambda", "must be positive"));
        }
        if !(w_g.is_finite() && w_g >= 0.0 && w_s.is_finite() && w_s >= 0.0) {
            return Err(Error::validation("match.weights", "must be non-negative"));
        }
        if !(optimizer.fd_step.is_finite() && optimizer.fd_step > 0.0) {
            return Err(Error::validation("match.optimizer.fd_step", "must be positive"));
        }
        if !(optimizer.grad_tolerance.is_finite() && optimizer.grad_tolerance >= 0.0) {
            return Err(Error::validation(
                "match.optimizer.grad_tolerance",
                "must be non-negative",
            ));
        }
        if !(dt.is_finite() && dt > 0.0 && dt <= 1.0) {
            return Err(Error::validation(
                "integrator.dt",
                "must lie in (0, 1] for shooting to t = 1",
            ));
        }
        let d = source.dim();
        for (n, (p, t)) in source.particles().iter().zip(&targets).enumerate() {
            if let Some(g) = p.g() {
                if (g - DMatrix::identity(d, d)).amax() != 0.0 {
                    return Err(Error::validation(
                        format!("particles[{n}].g"),
                        "registration sources start at the identity jet",
                    ));
                }
            }
            if p.s().is_some_and(|s| !s.is_zero()) {
                return Err(Error::validation(
                    format!("particles[{n}].s"),
                    "registration sources start at the identity jet",
                ));
            }
            if t.y.len() != d {
                return Err(Error::validation(
                    format!("match.targets[{n}].y"),
                    format!("expected {d} entries"),
                ));
            }
            if t.g.is_some() && p.order() < JetOrder::One {
                return Err(Error::validation(
                    format!("match.targets[{n}].g"),
                    "order-0 particles carry no jet",
                ));
            }
            if let Some(g) = &t.g {
                if g.nrows() != d || g.ncols() != d {
                    return Err(Error::validation(
                        format!("match.targets[{n}].g"),
                        format!("expected a {d}x{d} matrix"),
                    ));
                }
            }
            if let Some(s) = &t.s {
                if p.order() < JetOrder::Two {
                    return Err(Error::validation(
                        format!("match.targets[{n}].s"),
                        "only order-2 particles carry s",
                    ));
                }
                check_dim("target s", d, s.dim())?;
            }
        }
        let mut origin = vec![0.0; d];
        for p in source.particles() {
            for (o, x) in origin.iter_mut().zip(p.q()) {
                *o += x;
            }
        }
        origin.iter_mut().for_each(|o| *o /= source.len() as f64);
        let rest = source
            .particles()
            .iter()
            .map(|p| ParticleState::at_rest(p.order(), sub(p.q(), &origin)))
            .collect();
        let targets = targets
            .into_iter()
            .map(|t| Target {
                y: sub(&t.y, &origin),
                ..t
            })
            .collect();
        Ok(RegistrationProblem {
            source: SystemState::new(*source.kernel(), rest)?,
            targets,
            origin,
            lambda,
            w_g,
            w_s,
            optimizer,
            dt,
        })
    }

    /// Source configuration in the caller's coordinates.
    pub fn source(&self) -> SystemState {
        self.shifted(&self.source)
    }

    fn shifted(&self, state: &SystemState) -> SystemState {
        let mut coords = state.coordinates();
        let block = state.coordinate_len() / state.len();
        for chunk in coords.chunks_mut(block) {
            for (x, o) in chunk.iter_mut().zip(&self.origin) {
                *x += o;
            }
        }
        state.with_coordinates(&coords).expect("same layout")
    }

    pub fn optimizer(&self) -> &OptimizerSettings {
        &self.optimizer
    }

    /// Entries per particle: `pi_q`, then `pi_g` and `pi_s` row-major as
    /// the order requires.
    pub fn momentum_len(&self) -> usize {
        self.source.coordinate_len() / 2
    }

    /// The centered source configuration carrying momenta `pi0`.
    pub fn initial_state(&self, pi0: &[f64]) -> Result<SystemState> {
        check_dim("momentum vector", self.momentum_len(), pi0.len())?;
        let d = self.source.dim();
        let mut at = 0;
        let mut take = |n: usize| {
            let s = pi0[at..at + n].to_vec();
            at += n;
            s
        };
        let particles = self
            .source
            .particles()
            .iter()
            .map(|p| {
                let q = p.q().to_vec();
                let pi_q = take(d);
                match p.order() {
                    JetOrder::Zero => ParticleState::order0(q, pi_q),
                    JetOrder::One => {
                        let pi_g = DMatrix::from_row_slice(d, d, &take(d * d));
                        ParticleState::order1(q, p.g().unwrap().clone(), pi_q, pi_g)
                    }
                    JetOrder::Two => {
                        let pi_g = DMatrix::from_row_slice(d, d, &take(d * d));
                        let pi_s = S12Tensor::new(d, take(d * d * d))?;
                        ParticleState::order2(q, p.g().unwrap().clone(), p.s().unwrap().clone(), pi_q, pi_g, pi_s)
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        SystemState::new(*self.source.kernel(), particles)
    }

    fn mismatch(&self, end: &SystemState) -> Vec<f64> {
        end.particles()
            .iter()
            .zip(&self.targets)
            .map(|(p, t)| {
                let mut m = sq_dist(p.q(), &t.y);
                if let (Some(g), Some(tg)) = (p.g(), &t.g) {
                    m += self.w_g * (g - tg).norm_squared();
                }
                if let (Some(s), Some(ts)) = (p.s(), &t.s) {
                    m += self.w_s * sq_dist(s.as_slice(), ts.as_slice());
                }
                m
            })
            .collect()
    }

    pub fn objective(&self, pi0: &[f64]) -> Result<f64> {
        let start = self.initial_state(pi0)?;
        let end = shoot(&start, 1.0, self.dt)?;
        Ok(hamiltonian(&start) + self.lambda * self.mismatch(&end).iter().sum::<f64>())
    }

    /// Central differences with step `fd_step (1 + max |pi0|)`.
    pub fn fd_gradient(&self, pi0: &[f64]) -> Result<Vec<f64>> {
        check_dim("momentum vector", self.momentum_len(), pi0.len())?;
        let scale = 1.0 + pi0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let h = self.optimizer.fd_step * scale;
        let mut probe = pi0.to_vec();
        let mut grad = Vec::with_capacity(pi0.len());
        for i in 0..pi0.len() {
            let eval = |x: &[f64]| {
                self.objective(x).map_err(|e| match e {
                    Error::Divergence { step } => Error::ProbeDivergence { probe: i, step },
                    other => other,
                })
            };
            probe[i] = pi0[i] + h;
            let plus = eval(&probe)?;
            probe[i] = pi0[i] - h;
            let minus = eval(&probe)?;
            probe[i] = pi0[i];
            grad.push((plus - minus) / (2.0 * h));
        }
        Ok(grad)
    }

    /// Gradient descent from zero momenta with Armijo backtracking. The first
    /// trial step is 1, later ones the Barzilai-Borwein step `s.s / s.y` of
    /// the previous iteration.
    pub fn solve(&self) -> Result<RegistrationResult> {
        let n = self.momentum_len();
        let mut x = vec![0.0; n];
        let mut energy = self.objective(&x)?;
        if !energy.is_finite() {
            return Err(Error::InvalidInput(
                "objective is not finite at the initial guess".into(),
            ));
        }
        let mut history = vec![energy];
        let mut step = 1.0;
        let mut iterations = 0;
        let mut converged = false;
        let mut grad_norm;
        let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
        loop {
            let grad = self.fd_gradient(&x)?;
            grad_norm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if grad_norm <= self.optimizer.grad_tolerance {
                converged = true;
                break;
            }
            if iterations >= self.optimizer.max_iters {
                break;
            }
            let g2: f64 = grad.iter().map(|v| v * v).sum();
            if let Some((px, pg)) = &previous {
                let (mut ss, mut sy) = (0.0, 0.0);
                for i in 0..n {
                    let (si, yi) = (x[i] - px[i], grad[i] - pg[i]);
                    ss += si * si;
                    sy += si * yi;
                }
                let bb = ss / sy;
                step = if sy > 0.0 && bb.is_finite() { bb } else { step };
            }
            let mut accepted = None;
            let mut trial = step;
            for _ in 0..MAX_BACKTRACKS {
                let candidate: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - trial * g).collect();
                match self.objective(&candidate) {
                    Ok(e) if e.is_finite() && e <= energy - ARMIJO_C * trial * g2 => {
                        accepted = Some((candidate, e));
                        break;
                    }
                    Ok(_) | Err(Error::Divergence { .. }) => trial *= 0.5,
                    Err(other) => return Err(other),
                }
            }
            let Some((candidate, e)) = accepted else {
                break;
            };
            debug_assert!(e <= energy);
            previous = Some((std::mem::replace(&mut x, candidate), grad));
            energy = e;
            history.push(e);
            iterations += 1;
            step = (2.0 * trial).min(1.0);
        }

        let centered = self.initial_state(&x)?;
        let end = integrate(&centered, 1.0, self.dt, Scheme::Rk4)?.last().clone();
        let mismatch = self.mismatch(&end);
        let position_error = end
            .particles()
            .iter()
            .zip(&self.targets)
            .map(|(p, t)| sq_dist(p.q(), &t.y).sqrt())
            .collect();
        let initial = self.shifted(&centered);
        let trajectory = integrate(&initial, 1.0, self.dt, Scheme::Rk4)?;
        Ok(RegistrationResult {
            initial,
            momenta: x,
            trajectory,
            history,
            mismatch,
            position_error,
            iterations,
            grad_norm,
            converged,
        })
    }
}
