//! Radial reproducing kernels with exact partial derivatives.
//!
//! The gaussian `K(r) = exp(-|r|^2 / (2 sigma^2))` is normalized so that
//! `K(0) = 1`. Its derivative tensors follow from differentiating
//! `dK/dr_j = -r_j K / sigma^2` with the Leibniz rule:
//!
//! ```text
//! d_j d_J K = -(r_j d_J K + sum_{p} delta(j, J_p) d_{J \ p} K) / sigma^2
//! ```
//!
//! so every order is built from the previous two without any numerical
//! differentiation.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::tensor::Tensor;

/// Highest derivative order the kernel provides. Position gradients of the
/// order-2 Hamiltonian need five.
pub const MAX_DERIV_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    sigma: f64,
    dim: usize,
}

impl Kernel {
    pub fn new(family: KernelFamily, sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kernel scale must be positive and finite, got {sigma}"
            )));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "spatial dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        Ok(Kernel { family, sigma, dim })
    }

    pub fn gaussian(sigma: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma, dim)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, r: &[f64]) -> Result<f64> {
        check_dim("kernel displacement", self.dim, r.len())?;
        Ok(self.eval_unchecked(r))
    }

    fn eval_unchecked(&self, r: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = r.iter().map(|x| x * x).sum();
                (-0.5 * sq / (self.sigma * self.sigma)).exp()
            }
        }
    }

    /// The order-`m` derivative tensor `d_{j1} ... d_{jm} K (r)`.
    pub fn deriv_tensor(&self, r: &[f64], m: usize) -> Result<Tensor> {
        if m > MAX_DERIV_ORDER {
            return Err(Error::InvalidInput(format!(
                "derivative order {m} exceeds the supported maximum {MAX_DERIV_ORDER}"
            )));
        }
        let mut all = self.deriv_tensors(r, m)?;
        Ok(all.pop().expect("at least the order-0 tensor"))
    }

    /// All derivative tensors of orders `0..=max_order`.
    pub fn deriv_tensors(&self, r: &[f64], max_order: usize) -> Result<Vec<Tensor>> {
        check_dim("kernel displacement", self.dim, r.len())?;
        if max_order > MAX_DERIV_ORDER {
            return Err(Error::InvalidInput(format!(
                "derivative order {max_order} exceeds the supported maximum {MAX_DERIV_ORDER}"
            )));
        }
        Ok(self.deriv_tensors_unchecked(r, max_order))
    }

    pub(crate) fn deriv_tensors_unchecked(&self, r: &[f64], max_order: usize) -> Vec<Tensor> {
        match self.family {
            KernelFamily::Gaussian => self.gaussian_hermite(r, max_order),
        }
    }

    fn gaussian_hermite(&self, r: &[f64], max_order: usize) -> Vec<Tensor> {
        let d = self.dim;
        let inv_var = 1.0 / (self.sigma * self.sigma);
        let mut out: Vec<Tensor> = Vec::with_capacity(max_order + 1);
        out.push(Tensor::from_vec(d, 0, vec![self.eval_unchecked(r)]));

        let mut digits = [0usize; MAX_DERIV_ORDER];
        for m in 0..max_order {
            // Build order m + 1 from orders m and m - 1.
            let stride = d.pow(m as u32);
            let mut next = vec![0.0; d * stride];
            let prev = &out[m];
            for j in 0..d {
                for flat in 0..stride {
                    // Decode the trailing multi-index J of length m.
                    let mut rest = flat;
                    for slot in digits[..m].iter_mut().rev() {
                        *slot = rest % d;
                        rest /= d;
                    }
                    let mut acc = r[j] * prev[flat];
                    if m > 0 {
                        let lower = &out[m - 1];
                        for p in 0..m {
                            if digits[p] == j {
                                let reduced = digits[..m]
                                    .iter()
                                    .enumerate()
                                    .filter(|&(q, _)| q != p)
                                    .fold(0, |a, (_, &x)| a * d + x);
                                acc += lower[reduced];
                            }
                        }
                    }
                    next[j * stride + flat] = -inv_var * acc;
                }
            }
            out.push(Tensor::from_vec(d, m + 1, next));
        }
        out
    }
}
