//! Dense tensors over R^d with row-major storage.
//!
//! Dimensions are tiny (d <= 3, rank <= 6) so everything is a flat `Vec<f64>`
//! indexed by the multi-index read as a base-`d` number, first index most
//! significant.

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dim: usize,
    rank: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        Tensor {
            dim,
            rank,
            data: vec![0.0; dim.pow(rank as u32)],
        }
    }

    pub(crate) fn from_vec(dim: usize, rank: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim.pow(rank as u32));
        Tensor { dim, rank, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.rank, "tensor index has wrong rank");
        index.iter().fold(0, |acc, &i| {
            assert!(i < self.dim, "tensor index out of range");
            acc * self.dim + i
        })
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.flat_index(index)]
    }

    /// Decodes a flat offset back into its multi-index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.rank];
        for slot in index.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
        index
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest deviation between an entry and any permutation of its
    /// indices among positions `from..rank`.
    pub fn symmetry_defect(&self, from: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for flat in 0..self.data.len() {
            let mut idx = self.multi_index(flat);
            let value = self.data[flat];
            for p in from..self.rank {
                for q in p + 1..self.rank {
                    idx.swap(p, q);
                    worst = worst.max((value - self.data[self.flat_index(&idx)]).abs());
                    idx.swap(p, q);
                }
            }
        }
        worst
    }
}

impl std::ops::Index<usize> for Tensor {
    type Output = f64;

    fn index(&self, flat: usize) -> &f64 {
        &self.data[flat]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_index_round_trips() {
        let t = Tensor::zeros(3, 4);
        for flat in 0..t.len() {
            assert_eq!(t.flat_index(&t.multi_index(flat)), flat);
        }
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let mut t = Tensor::zeros(2, 2);
        t.as_mut_slice()[1] = 1.0;
        assert_eq!(t.symmetry_defect(0), 1.0);
        t.as_mut_slice()[2] = 1.0;
        assert_eq!(t.symmetry_defect(0), 0.0);
    }
}
