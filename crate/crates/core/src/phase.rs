//! Phase space of jet particles.
//!
//! A particle of order `k` lives on `T*Q^(k)` with configuration
//! `(q, g, s)` in `R^d x GL(d) x S12` (truncated to the order) and canonical
//! momenta `(pi_q, pi_g, pi_s)`. The momenta define a distribution acting on
//! test fields through their jet at `q`:
//!
//! ```text
//! <pi, (u(q), Du g, D^2u[g,g] + Du s)> = a.u(q) - b^i_l d_l u^i(q) + c^i_{lm} d_l d_m u^i(q)
//! ```
//!
//! which fixes the spatial momenta `(a, b, c)` returned by
//! [`SystemState::spatial_momenta`].

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::jet::{contract_left, contract_right, Jet2Element, S12Tensor, MIN_ABS_DET};
use crate::kernel::Kernel;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JetOrder {
    Zero = 0,
    One = 1,
    Two = 2,
}

impl JetOrder {
    pub fn from_usize(k: usize) -> Result<Self> {
        match k {
            0 => Ok(JetOrder::Zero),
            1 => Ok(JetOrder::One),
            2 => Ok(JetOrder::Two),
            _ => Err(Error::InvalidInput(format!("jet order must be 0, 1 or 2, got {k}"))),
        }
    }

    pub fn as_usize(self) -> usize {
        self as usize
    }

    /// Number of packed coordinates (configuration or momentum, not both)
    /// for one particle.
    pub fn block_len(self, dim: usize) -> usize {
        match self {
            JetOrder::Zero => dim,
            JetOrder::One => dim + dim * dim,
            JetOrder::Two => dim + dim * dim + dim * dim * dim,
        }
    }
}

/// One particle on `T*Q^(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    order: JetOrder,
    q: Vec<f64>,
    g: Option<DMatrix<f64>>,
    s: Option<S12Tensor>,
    pi_q: Vec<f64>,
    pi_g: Option<DMatrix<f64>>,
    pi_s: Option<S12Tensor>,
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} has non-finite entries")))
    }
}

fn check_square(context: &'static str, m: &DMatrix<f64>, dim: usize) -> Result<()> {
    check_dim(context, dim, m.nrows())?;
    check_dim(context, dim, m.ncols())
}

impl ParticleState {
    pub fn order0(q: Vec<f64>, pi_q: Vec<f64>) -> Result<Self> {
        check_dim("pi_q", q.len(), pi_q.len())?;
        check_finite("q", &q)?;
        check_finite("pi_q", &pi_q)?;
        Ok(ParticleState {
            order: JetOrder::Zero,
            q,
            g: None,
            s: None,
            pi_q,
            pi_g: None,
            pi_s: None,
        })
    }

    pub fn order1(q: Vec<f64>, g: DMatrix<f64>, pi_q: Vec<f64>, pi_g: DMatrix<f64>) -> Result<Self> {
        let d = q.len();
        check_dim("pi_q", d, pi_q.len())?;
        check_square("g", &g, d)?;
        check_square("pi_g", &pi_g, d)?;
        check_finite("q", &q)?;
        check_finite("pi_q", &pi_q)?;
        check_finite("g", g.as_slice())?;
        check_finite("pi_g", pi_g.as_slice())?;
        let det = g.determinant();
        if det.abs() < MIN_ABS_DET {
            return Err(Error::SingularJet { det });
        }
        Ok(ParticleState {
            order: JetOrder::One,
            q,
            g: Some(g),
            s: None,
            pi_q,
            pi_g: Some(pi_g),
            pi_s: None,
        })
    }

    pub fn order2(
        q: Vec<f64>,
        g: DMatrix<f64>,
        s: S12Tensor,
        pi_q: Vec<f64>,
        pi_g: DMatrix<f64>,
        pi_s: S12Tensor,
    ) -> Result<Self> {
        let d = q.len();
        check_dim("s", d, s.dim())?;
        check_dim("pi_s", d, pi_s.dim())?;
        let mut p = Self::order1(q, g, pi_q, pi_g)?;
        p.order = JetOrder::Two;
        p.s = Some(s);
        p.pi_s = Some(pi_s);
        Ok(p)
    }

    /// Particle at `q` with identity jet and zero momenta.
    pub fn at_rest(order: JetOrder, q: Vec<f64>) -> Self {
        let d = q.len();
        let zero = vec![0.0; d];
        let eye = || DMatrix::identity(d, d);
        let zeros = || DMatrix::zeros(d, d);
        match order {
            JetOrder::Zero => Self::order0(q, zero),
            JetOrder::One => Self::order1(q, eye(), zero, zeros()),
            JetOrder::Two => Self::order2(q, eye(), S12Tensor::zeros(d), zero, zeros(), S12Tensor::zeros(d)),
        }
        .expect("identity jet with zero momenta is valid")
    }

    pub fn order(&self) -> JetOrder {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn g(&self) -> Option<&DMatrix<f64>> {
        self.g.as_ref()
    }

    pub fn s(&self) -> Option<&S12Tensor> {
        self.s.as_ref()
    }

    pub fn pi_q(&self) -> &[f64] {
        &self.pi_q
    }

    pub fn pi_g(&self) -> Option<&DMatrix<f64>> {
        self.pi_g.as_ref()
    }

    pub fn pi_s(&self) -> Option<&S12Tensor> {
        self.pi_s.as_ref()
    }

    /// Copy with every momentum set to zero.
    pub fn without_momenta(&self) -> Self {
        let mut p = self.clone();
        p.pi_q.iter_mut().for_each(|x| *x = 0.0);
        if let Some(m) = p.pi_g.as_mut() {
            m.fill(0.0);
        }
        if let Some(t) = p.pi_s.as_mut() {
            *t = S12Tensor::zeros(t.dim());
        }
        p
    }

    /// The configuration `(g, s)` as a 2-jet; `s = 0` at order 1.
    pub fn jet(&self) -> Result<Jet2Element> {
        let g = self.g.clone().ok_or(Error::UnsupportedOrder {
            operation: "jet",
            order: 0,
        })?;
        let s = self.s.clone().unwrap_or_else(|| S12Tensor::zeros(self.dim()));
        Jet2Element::new(g, s)
    }

    /// Spatial momenta `(a, b, c)` of this particle.
    pub fn spatial_momentum(&self) -> SpatialMomentum {
        let d = self.dim();
        let a = self.pi_q.clone();
        let b = self.g.as_ref().map(|g| {
            let pi_g = self.pi_g.as_ref().expect("order >= 1 carries pi_g");
            let mut b = -(pi_g * g.transpose());
            if let (Some(s), Some(pi_s)) = (&self.s, &self.pi_s) {
                for i in 0..d {
                    for l in 0..d {
                        let mut acc = 0.0;
                        for j in 0..d {
                            for k in 0..d {
                                acc += pi_s.get(i, j, k) * s.get(l, j, k);
                            }
                        }
                        b[(i, l)] -= acc;
                    }
                }
            }
            b
        });
        let c = match (&self.g, &self.pi_s) {
            (Some(g), Some(pi_s)) => {
                let raw = contract_right(pi_s, &g.transpose());
                Some(S12Tensor::from_fn(d, |i, j, k| raw.get(i, j, k)))
            }
            _ => None,
        };
        SpatialMomentum { a, b, c }
    }

    pub(crate) fn pack_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.q);
        if let Some(g) = &self.g {
            push_row_major(out, g);
        }
        if let Some(s) = &self.s {
            out.extend_from_slice(s.as_slice());
        }
        out.extend_from_slice(&self.pi_q);
        if let Some(p) = &self.pi_g {
            push_row_major(out, p);
        }
        if let Some(p) = &self.pi_s {
            out.extend_from_slice(p.as_slice());
        }
    }

    /// Rebuilds a particle of the same shape from packed coordinates,
    /// without validation.
    pub(crate) fn unpack_like(&self, coords: &[f64]) -> (ParticleState, usize) {
        let d = self.dim();
        let mut at = 0;
        let mut take = |n: usize| {
            let s = &coords[at..at + n];
            at += n;
            s
        };
        let q = take(d).to_vec();
        let g = self.g.as_ref().map(|_| DMatrix::from_row_slice(d, d, take(d * d)));
        let s = self
            .s
            .as_ref()
            .map(|_| S12Tensor::from_raw(d, take(d * d * d).to_vec()));
        let pi_q = take(d).to_vec();
        let pi_g = self.pi_g.as_ref().map(|_| DMatrix::from_row_slice(d, d, take(d * d)));
        let pi_s = self
            .pi_s
            .as_ref()
            .map(|_| S12Tensor::from_raw(d, take(d * d * d).to_vec()));
        (
            ParticleState {
                order: self.order,
                q,
                g,
                s,
                pi_q,
                pi_g,
                pi_s,
            },
            at,
        )
    }
}

pub(crate) fn push_row_major(out: &mut Vec<f64>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
}

/// Coefficients of the velocity field generated by one particle,
/// `v = a K + b^i_j d_j K + c^i_{jk} d_j d_k K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMomentum {
    pub a: Vec<f64>,
    pub b: Option<DMatrix<f64>>,
    pub c: Option<S12Tensor>,
}

impl SpatialMomentum {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `a.u - b:Du + c:D^2u` for a field jet given at the particle.
    pub fn pair(&self, jet: &FieldJet) -> f64 {
        let d = self.dim();
        let mut total: f64 = self.a.iter().zip(jet.value().as_slice()).map(|(x, y)| x * y).sum();
        if let Some(b) = &self.b {
            let du = jet.derivative(1);
            for i in 0..d {
                for l in 0..d {
                    total -= b[(i, l)] * du[i * d + l];
                }
            }
        }
        if let Some(c) = &self.c {
            let d2u = jet.derivative(2);
            total += c.as_slice().iter().zip(d2u.as_slice()).map(|(x, y)| x * y).sum::<f64>();
        }
        total
    }

    pub fn max_abs_diff(&self, other: &SpatialMomentum) -> f64 {
        let mut worst = self
            .a
            .iter()
            .zip(&other.a)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        if let (Some(x), Some(y)) = (&self.b, &other.b) {
            worst = worst.max((x - y).amax());
        }
        if let (Some(x), Some(y)) = (&self.c, &other.c) {
            worst = worst.max(x.max_abs_diff(y));
        }
        worst
    }
}

/// Spatial momenta of every particle of a system.
pub type SpatialMomenta = Vec<SpatialMomentum>;

/// A vector field's jet at a point: `derivs[n]` is the rank `n + 1` tensor
/// `d_{l1} ... d_{ln} u^i` with the component index first.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldJet {
    derivs: Vec<Tensor>,
}

impl FieldJet {
    pub fn new(derivs: Vec<Tensor>) -> Result<Self> {
        let Some(first) = derivs.first() else {
            return Err(Error::InvalidInput("field jet needs at least the value".into()));
        };
        let d = first.dim();
        for (n, t) in derivs.iter().enumerate() {
            check_dim("field jet rank", n + 1, t.rank())?;
            check_dim("field jet dimension", d, t.dim())?;
        }
        Ok(FieldJet { derivs })
    }

    pub(crate) fn from_tensors(derivs: Vec<Tensor>) -> Self {
        FieldJet { derivs }
    }

    /// Jet of the polynomial field `u(x) = u0 + A (x - x0) + 1/2 B[x - x0, x - x0]`
    /// evaluated at `x`.
    pub fn quadratic(x0: &[f64], u0: &[f64], lin: &Tensor, quad: &Tensor, x: &[f64]) -> Self {
        let d = x0.len();
        let dx: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        let mut value = vec![0.0; d];
        let mut first = vec![0.0; d * d];
        for i in 0..d {
            value[i] = u0[i];
            for l in 0..d {
                value[i] += lin[i * d + l] * dx[l];
                first[i * d + l] = lin[i * d + l];
                for m in 0..d {
                    let q = quad[(i * d + l) * d + m];
                    value[i] += 0.5 * q * dx[l] * dx[m];
                    first[i * d + l] += q * dx[m];
                }
            }
        }
        FieldJet {
            derivs: vec![
                Tensor::from_vec(d, 1, value),
                Tensor::from_vec(d, 2, first),
                quad.clone(),
            ],
        }
    }

    pub fn order(&self) -> usize {
        self.derivs.len() - 1
    }

    pub fn value(&self) -> &Tensor {
        &self.derivs[0]
    }

    /// Panics if the jet was built with fewer derivatives.
    pub fn derivative(&self, n: usize) -> &Tensor {
        &self.derivs[n]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.derivs
    }
}

/// Velocities `(u(q), Du g, D^2u[g,g] + Du s)` induced on a particle's
/// configuration by a field with jet `jet` at `q`.
pub(crate) fn reconstruction(p: &ParticleState, jet: &FieldJet) -> (Vec<f64>, Option<DMatrix<f64>>, Option<S12Tensor>) {
    let d = p.dim();
    let value = jet.value().as_slice().to_vec();
    let du = |n: usize| DMatrix::from_row_slice(d, d, jet.derivative(n).as_slice());
    let g_dot = p.g.as_ref().map(|g| du(1) * g);
    let s_dot = match (&p.g, &p.s) {
        (Some(g), Some(s)) => {
            let d2 = S12Tensor::from_raw(d, jet.derivative(2).as_slice().to_vec());
            Some(contract_right(&d2, g).add(&contract_left(&du(1), s)))
        }
        _ => None,
    };
    (value, g_dot, s_dot)
}

/// The full system: `N` particles of one order sharing a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    dim: usize,
    order: JetOrder,
    kernel: Kernel,
    particles: Vec<ParticleState>,
}

impl SystemState {
    /// Validates shapes, uniform order, and pairwise distinct positions.
    pub fn new(kernel: Kernel, particles: Vec<ParticleState>) -> Result<Self> {
        let dim = kernel.dim();
        let Some(first) = particles.first() else {
            return Err(Error::InvalidInput("a system needs at least one particle".into()));
        };
        let order = first.order;
        for (n, p) in particles.iter().enumerate() {
            if p.order != order {
                return Err(Error::InvalidInput(format!(
                    "particle {n} has order {} but particle 0 has order {}",
                    p.order.as_usize(),
                    order.as_usize()
                )));
            }
            check_dim("particle position", dim, p.dim())?;
        }
        for a in 0..particles.len() {
            for b in a + 1..particles.len() {
                if particles[a].q == particles[b].q {
                    return Err(Error::InvalidInput(format!(
                        "particles {a} and {b} share the same initial position"
                    )));
                }
            }
        }
        Ok(SystemState {
            dim,
            order,
            kernel,
            particles,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> JetOrder {
        self.order
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn particles(&self) -> &[ParticleState] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particle(&self, index: usize) -> Result<&ParticleState> {
        self.particles.get(index).ok_or(Error::IndexOutOfRange {
            index,
            count: self.particles.len(),
        })
    }

    pub fn spatial_momenta(&self) -> SpatialMomenta {
        self.particles.iter().map(ParticleState::spatial_momentum).collect()
    }

    /// `sum_A [a.u(q_A) - b:Du(q_A) + c:D^2u(q_A)]` for test-field jets given
    /// at each particle position.
    pub fn pairing(&self, jets: &[FieldJet]) -> Result<f64> {
        check_dim("test jets", self.len(), jets.len())?;
        let need = self.order.as_usize();
        let mut total = 0.0;
        for (p, jet) in self.particles.iter().zip(jets) {
            if jet.order() < need {
                return Err(Error::InvalidInput(format!(
                    "test jet of order {} cannot pair with order-{need} particles",
                    jet.order()
                )));
            }
            check_dim("test jet dimension", self.dim, jet.value().dim())?;
            total += p.spatial_momentum().pair(jet);
        }
        Ok(total)
    }

    /// Total linear momentum `sum_A pi_q,A`.
    pub fn linear_momentum(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.dim];
        for p in &self.particles {
            for (t, x) in total.iter_mut().zip(&p.pi_q) {
                *t += x;
            }
        }
        total
    }

    /// Right action of the internal jet group, one element per particle.
    ///
    /// The configuration moves by the jet group law and the momenta by the
    /// inverse transpose of the induced map on velocities, so that the
    /// pairing, and with it every spatial momentum, is unchanged. Order-1
    /// particles use only the linear part of each element; order-0
    /// particles have a trivial internal group.
    pub fn act_right(&self, h: &[Jet2Element]) -> Result<SystemState> {
        check_dim("jet group elements", self.len(), h.len())?;
        let d = self.dim;
        let mut out = self.clone();
        if self.order == JetOrder::Zero {
            return Ok(out);
        }
        for (p, h) in out.particles.iter_mut().zip(h) {
            check_dim("jet group element", d, h.dim())?;
            let hg = h.linear();
            let hinv = hg
                .clone()
                .try_inverse()
                .ok_or(Error::SingularJet { det: hg.determinant() })?;
            let hinv_t = hinv.transpose();
            let g = p.g.as_ref().expect("order >= 1");
            let pi_g = p.pi_g.as_ref().expect("order >= 1");
            let mut new_pi_g = pi_g * &hinv_t;
            if let (Some(s), Some(pi_s)) = (&p.s, &p.pi_s) {
                let new_pi_s = contract_right(pi_s, &hinv_t);
                // The s-velocity picks up (g_dot h^{-1}) . h_s, which moves
                // a correction into the g-momentum.
                let shift = contract_left(&hinv, h.quadratic());
                for i in 0..d {
                    for l in 0..d {
                        let mut acc = 0.0;
                        for j in 0..d {
                            for k in 0..d {
                                acc += new_pi_s.get(i, j, k) * shift.get(l, j, k);
                            }
                        }
                        new_pi_g[(i, l)] -= acc;
                    }
                }
                p.s = Some(contract_right(s, hg).add(&contract_left(g, h.quadratic())));
                p.pi_s = Some(new_pi_s);
            }
            p.g = Some(g * hg);
            p.pi_g = Some(new_pi_g);
        }
        Ok(out)
    }

    /// Flat coordinate vector: per particle `[q, g, s, pi_q, pi_g, pi_s]`
    /// with matrices row-major, restricted to the blocks the order carries.
    pub fn coordinates(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.coordinate_len());
        for p in &self.particles {
            p.pack_into(&mut out);
        }
        out
    }

    pub fn coordinate_len(&self) -> usize {
        2 * self.len() * self.order.block_len(self.dim)
    }

    /// Same-shaped state from a coordinate vector laid out as in
    /// [`coordinates`](Self::coordinates). Entries are taken verbatim
    /// (no symmetrization or invertibility check).
    pub fn with_coordinates(&self, coords: &[f64]) -> Result<SystemState> {
        check_dim("state coordinates", self.coordinate_len(), coords.len())?;
        let mut at = 0;
        let particles = self
            .particles
            .iter()
            .map(|p| {
                let (next, used) = p.unpack_like(&coords[at..]);
                at += used;
                next
            })
            .collect();
        Ok(SystemState {
            dim: self.dim,
            order: self.order,
            kernel: self.kernel,
            particles,
        })
    }

    /// Projects `s` and `pi_s` onto their lower-symmetric part. Integrator
    /// stages keep symmetry only up to roundoff; snapshots are projected so
    /// that re-loading them is exact.
    pub(crate) fn symmetrized(mut self) -> Self {
        for p in &mut self.particles {
            for t in [&mut p.s, &mut p.pi_s].into_iter().flatten() {
                *t = S12Tensor::from_fn(t.dim(), |i, j, k| t.get(i, j, k));
            }
        }
        self
    }
}
