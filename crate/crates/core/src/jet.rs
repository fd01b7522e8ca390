//! Jet groups of diffeomorphisms fixing a point.
//!
//! A 1-jet is an invertible matrix `g^i_j = d psi^i / d x^j`. A 2-jet adds the
//! second derivatives `s^i_{jk}`, a rank-(1,2) tensor symmetric in its lower
//! indices. Composition of 2-jets is the chain rule,
//!
//! ```text
//! (b, c) . (b~, c~) = (b b~, b.c~ + c.b~)
//! (b.c)^i_{jk} = b^i_l c^l_{jk}          (left action)
//! (c.b)^i_{jk} = c^i_{lm} b^l_j b^m_k    (right action)
//! ```
//!
//! Matrices are `nalgebra::DMatrix` with the row index as the upper index.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};

/// Smallest `|det g|` accepted for a group element.
pub const MIN_ABS_DET: f64 = 1e-12;

/// Rank-(1,2) tensor `c^i_{jk}` with `c^i_{jk} = c^i_{kj}`.
#[derive(Debug, Clone, PartialEq)]
pub struct S12Tensor {
    dim: usize,
    data: Vec<f64>,
}

impl S12Tensor {
    pub fn zeros(dim: usize) -> Self {
        S12Tensor {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    /// Builds a tensor from row-major `[i][j][k]` entries, symmetrizing the
    /// lower pair.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("S12 tensor entries", dim * dim * dim, data.len())?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("S12 tensor has non-finite entries".into()));
        }
        let mut t = S12Tensor { dim, data };
        t.symmetrize();
        Ok(t)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = S12Tensor::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    t.data[(i * dim + j) * dim + k] = f(i, j, k);
                }
            }
        }
        t.symmetrize();
        t
    }

    /// Wraps raw entries without symmetrizing. Used for intermediate
    /// integrator stages where symmetry holds up to roundoff.
    pub(crate) fn from_raw(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim * dim);
        S12Tensor { dim, data }
    }

    fn symmetrize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                for k in j + 1..d {
                    let a = (i * d + j) * d + k;
                    let b = (i * d + k) * d + j;
                    let mean = 0.5 * (self.data[a] + self.data[b]);
                    self.data[a] = mean;
                    self.data[b] = mean;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn lower_symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &S12Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn add(&self, other: &S12Tensor) -> S12Tensor {
        S12Tensor {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> S12Tensor {
        S12Tensor {
            dim: self.dim,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }
}

/// `(m . c)^i_{jk} = m^i_l c^l_{jk}` for any square `m`.
pub(crate) fn contract_left(m: &DMatrix<f64>, c: &S12Tensor) -> S12Tensor {
    let d = c.dim;
    let mut out = vec![0.0; d * d * d];
    for i in 0..d {
        for l in 0..d {
            let mil = m[(i, l)];
            if mil == 0.0 {
                continue;
            }
            for jk in 0..d * d {
                out[i * d * d + jk] += mil * c.data[l * d * d + jk];
            }
        }
    }
    S12Tensor::from_raw(d, out)
}

/// `(c . m)^i_{jk} = c^i_{lm} m^l_j m^m_k` for any square `m`.
pub(crate) fn contract_right(c: &S12Tensor, m: &DMatrix<f64>) -> S12Tensor {
    let d = c.dim;
    let mut out = vec![0.0; d * d * d];
    for i in 0..d {
        for l in 0..d {
            for n in 0..d {
                let cv = c.get(i, l, n);
                if cv == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let a = cv * m[(l, j)];
                    for k in 0..d {
                        out[(i * d + j) * d + k] += a * m[(n, k)];
                    }
                }
            }
        }
    }
    S12Tensor::from_raw(d, out)
}

fn check_invertible(g: &DMatrix<f64>) -> Result<()> {
    if !g.is_square() {
        return Err(Error::InvalidInput(format!(
            "jet matrix must be square, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("jet matrix has non-finite entries".into()));
    }
    let det = g.determinant();
    if det.abs() < MIN_ABS_DET {
        return Err(Error::SingularJet { det });
    }
    Ok(())
}

/// Element of GL(d).
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1Element {
    g: DMatrix<f64>,
}

impl Jet1Element {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        check_invertible(&g)?;
        Ok(Jet1Element { g })
    }

    pub fn identity(dim: usize) -> Self {
        Jet1Element {
            g: DMatrix::identity(dim, dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn compose(&self, rhs: &Jet1Element) -> Result<Jet1Element> {
        check_dim("jet composition", self.dim(), rhs.dim())?;
        Ok(Jet1Element { g: &self.g * &rhs.g })
    }

    pub fn invert(&self) -> Result<Jet1Element> {
        let inv = self.g.clone().try_inverse().ok_or(Error::SingularJet {
            det: self.g.determinant(),
        })?;
        Ok(Jet1Element { g: inv })
    }
}

pub fn act_left(b: &Jet1Element, c: &S12Tensor) -> Result<S12Tensor> {
    check_dim("left action", b.dim(), c.dim())?;
    Ok(contract_left(&b.g, c))
}

pub fn act_right(c: &S12Tensor, b: &Jet1Element) -> Result<S12Tensor> {
    check_dim("right action", b.dim(), c.dim())?;
    Ok(contract_right(c, &b.g))
}

/// Element `(g, s)` of the group of 2-jets, GL(d) semi-direct S12.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2Element {
    g: DMatrix<f64>,
    s: S12Tensor,
}

impl Jet2Element {
    pub fn new(g: DMatrix<f64>, s: S12Tensor) -> Result<Self> {
        check_invertible(&g)?;
        check_dim("2-jet", g.nrows(), s.dim())?;
        Ok(Jet2Element { g, s })
    }

    pub fn identity(dim: usize) -> Self {
        Jet2Element {
            g: DMatrix::identity(dim, dim),
            s: S12Tensor::zeros(dim),
        }
    }

    pub fn from_jet1(b: &Jet1Element) -> Self {
        Jet2Element {
            g: b.g.clone(),
            s: S12Tensor::zeros(b.dim()),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn quadratic(&self) -> &S12Tensor {
        &self.s
    }

    pub fn compose(&self, rhs: &Jet2Element) -> Result<Jet2Element> {
        check_dim("jet composition", self.dim(), rhs.dim())?;
        let g = &self.g * &rhs.g;
        let s = contract_left(&self.g, &rhs.s).add(&contract_right(&self.s, &rhs.g));
        Ok(Jet2Element { g, s })
    }

    /// `(b, c)^{-1} = (b^{-1}, -b^{-1} . (c . b^{-1}))`.
    pub fn invert(&self) -> Result<Jet2Element> {
        check_invertible(&self.g)?;
        let inv = self.g.clone().try_inverse().ok_or(Error::SingularJet {
            det: self.g.determinant(),
        })?;
        let s = contract_left(&inv, &contract_right(&self.s, &inv)).scale(-1.0);
        Ok(Jet2Element { g: inv, s })
    }

    pub fn max_abs_diff(&self, other: &Jet2Element) -> f64 {
        let dg = (&self.g - &other.g).amax();
        dg.max(self.s.max_abs_diff(&other.s))
    }
}
