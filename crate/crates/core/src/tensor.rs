//! Symmetric tensors stored once per sorted multi-index.
//!
//! An order-`k` tensor over `dim` indices keeps one value per non-decreasing
//! multi-index `j_1 ≤ … ≤ j_k`; each value is a vector of `width` components
//! (`width = 1` for scalar tensors). Multi-indices are ranked in colex order
//! through the combinatorial number system.

use crate::error::{Error, Result};

/// Largest number of stored multi-indices accepted by [`SymmetricTensor::zeros`].
pub const MAX_ENTRIES: usize = 1 << 27;

/// Binomial coefficient, `None` on overflow.
pub fn binomial(n: usize, r: usize) -> Option<usize> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: usize = 1;
    for i in 0..r {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of sorted multi-indices of length `order` over `dim` values.
pub fn sorted_count(order: usize, dim: usize) -> Option<usize> {
    if dim == 0 {
        return Some(usize::from(order == 0));
    }
    binomial(dim + order - 1, order)
}

/// Number of distinct orderings of a sorted multi-index (`k! / Π m!`).
pub fn permutation_count(sorted: &[usize]) -> f64 {
    let mut count = 1.0;
    let mut run = 0usize;
    for i in 0..sorted.len() {
        run = if i > 0 && sorted[i] == sorted[i - 1] { run + 1 } else { 1 };
        count *= (i + 1) as f64 / run as f64;
    }
    count
}

/// Iterator over sorted multi-indices in storage order.
#[derive(Debug, Clone)]
pub struct MultiIndices {
    dim: usize,
    current: Option<Vec<usize>>,
}

impl MultiIndices {
    pub fn new(order: usize, dim: usize) -> MultiIndices {
        let current = if dim == 0 && order > 0 { None } else { Some(vec![0; order]) };
        MultiIndices { dim, current }
    }
}

impl Iterator for MultiIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let j = self.current.as_mut().expect("checked");
        let k = j.len();
        let mut advanced = false;
        for i in 0..k {
            let room = if i + 1 < k { j[i] < j[i + 1] } else { j[i] + 1 < self.dim };
            if room {
                j[i] += 1;
                for x in j.iter_mut().take(i) {
                    *x = 0;
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            self.current = None;
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    order: usize,
    dim: usize,
    width: usize,
    data: Vec<f64>,
}

impl SymmetricTensor {
    /// Zero tensor. Panics if the storage would exceed [`MAX_ENTRIES`].
    pub fn zeros(order: usize, dim: usize, width: usize) -> SymmetricTensor {
        let n = sorted_count(order, dim)
            .filter(|&n| n <= MAX_ENTRIES)
            .unwrap_or_else(|| panic!("symmetric tensor of order {order} over {dim} indices is too large"));
        SymmetricTensor {
            order,
            dim,
            width,
            data: vec![0.0; n * width],
        }
    }

    /// Tensor whose value at each sorted multi-index is `f(index)`.
    pub fn from_fn(order: usize, dim: usize, width: usize, mut f: impl FnMut(&[usize]) -> Vec<f64>) -> SymmetricTensor {
        let mut t = SymmetricTensor::zeros(order, dim, width);
        for (slot, idx) in MultiIndices::new(order, dim).enumerate() {
            let v = f(&idx);
            assert_eq!(v.len(), width, "value width mismatch");
            t.data[slot * width..(slot + 1) * width].copy_from_slice(&v);
        }
        t
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of stored multi-indices.
    pub fn len(&self) -> usize {
        self.data.len() / self.width.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Storage slot of a sorted multi-index.
    pub fn rank(&self, sorted: &[usize]) -> usize {
        debug_assert_eq!(sorted.len(), self.order);
        sorted
            .iter()
            .enumerate()
            .map(|(i, &j)| binomial(j + i, i + 1).expect("rank fits"))
            .sum()
    }

    fn slot(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.order, "multi-index length");
        assert!(idx.iter().all(|&j| j < self.dim), "index out of range");
        let mut s = idx.to_vec();
        s.sort_unstable();
        self.rank(&s)
    }

    /// Value at any ordering of a multi-index.
    pub fn get(&self, idx: &[usize]) -> &[f64] {
        let r = self.slot(idx);
        &self.data[r * self.width..(r + 1) * self.width]
    }

    pub fn set(&mut self, idx: &[usize], value: &[f64]) {
        let r = self.slot(idx);
        self.data[r * self.width..(r + 1) * self.width].copy_from_slice(value);
    }

    pub fn add_at(&mut self, idx: &[usize], value: &[f64], scale: f64) {
        let r = self.slot(idx);
        for (d, v) in self.data[r * self.width..(r + 1) * self.width].iter_mut().zip(value) {
            *d += scale * v;
        }
    }

    /// `(sorted multi-index, value)` pairs in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, &[f64])> + '_ {
        MultiIndices::new(self.order, self.dim)
            .zip(self.data.chunks(self.width.max(1)))
    }

    /// Contract one slot with `v`, giving an order `k-1` tensor.
    pub fn contract_one(&self, v: &[f64]) -> Result<SymmetricTensor> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        if self.order == 0 {
            return Err(Error::InvalidArgument("cannot contract an order-0 tensor".into()));
        }
        let w = self.width;
        let mut out = SymmetricTensor::zeros(self.order - 1, self.dim, w);
        let mut full = vec![0; self.order];
        for (slot, j) in MultiIndices::new(self.order - 1, self.dim).enumerate() {
            let acc = &mut out.data[slot * w..(slot + 1) * w];
            for (i, &vi) in v.iter().enumerate() {
                if vi == 0.0 {
                    continue;
                }
                // insert i into the sorted j
                let pos = j.partition_point(|&x| x <= i);
                full[..pos].copy_from_slice(&j[..pos]);
                full[pos] = i;
                full[pos + 1..].copy_from_slice(&j[pos..]);
                let r = self.rank(&full);
                for (a, t) in acc.iter_mut().zip(&self.data[r * w..(r + 1) * w]) {
                    *a += vi * t;
                }
            }
        }
        Ok(out)
    }

    /// Contract the last `vs.len()` slots.
    pub fn partial_contract(&self, vs: &[&[f64]]) -> Result<SymmetricTensor> {
        if vs.len() > self.order {
            return Err(Error::OrderExceeded {
                requested: vs.len(),
                available: self.order,
            });
        }
        let mut t = self.clone();
        for v in vs.iter().rev() {
            t = t.contract_one(v)?;
        }
        Ok(t)
    }

    /// Full contraction with one vector per slot.
    pub fn contract(&self, vs: &[&[f64]]) -> Result<Vec<f64>> {
        if vs.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                found: vs.len(),
            });
        }
        Ok(self.partial_contract(vs)?.data)
    }

    /// `T · v^{⊗k}`.
    pub fn contract_power(&self, v: &[f64]) -> Result<Vec<f64>> {
        let vs = vec![v; self.order];
        self.contract(&vs)
    }

    /// Scalar tensor `Σ_r w_r T_r`.
    pub fn weighted(&self, w: &[f64]) -> Result<SymmetricTensor> {
        if w.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                found: w.len(),
            });
        }
        let data = self
            .data
            .chunks(self.width.max(1))
            .map(|c| c.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect();
        Ok(SymmetricTensor {
            order: self.order,
            dim: self.dim,
            width: 1,
            data,
        })
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn add_assign(&mut self, other: &SymmetricTensor, s: f64) {
        assert_eq!(
            (self.order, self.dim, self.width),
            (other.order, other.dim, other.width),
            "tensor shape mismatch"
        );
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &SymmetricTensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "tensor shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Order-2 scalar tensor as a dense symmetric matrix.
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        assert!(self.order == 2 && self.width == 1, "order-2 scalar tensor expected");
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(&[i, j])[0])
    }

    /// Dense copy over all `dim^k` ordered tuples, row-major, `width` values each.
    pub fn to_dense(&self) -> Vec<f64> {
        let total = self.dim.pow(self.order as u32);
        let mut out = Vec::with_capacity(total * self.width);
        let mut idx = vec![0; self.order];
        for _ in 0..total {
            out.extend_from_slice(self.get(&idx));
            for p in (0..self.order).rev() {
                idx[p] += 1;
                if idx[p] < self.dim {
                    break;
                }
                idx[p] = 0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_order_matches_rank() {
        let t = SymmetricTensor::zeros(3, 4, 1);
        for (slot, idx) in MultiIndices::new(3, 4).enumerate() {
            assert_eq!(t.rank(&idx), slot);
        }
        assert_eq!(MultiIndices::new(3, 4).count(), 20);
    }

    #[test]
    fn order_one_is_matrix_vector() {
        let t = SymmetricTensor::from_fn(1, 3, 2, |j| vec![j[0] as f64, 1.0]);
        let out = t.contract(&[&[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(out, vec![8.0, 6.0]);
    }

    #[test]
    fn permutation_counts() {
        assert_eq!(permutation_count(&[0, 0, 1]), 3.0);
        assert_eq!(permutation_count(&[0, 1, 2]), 6.0);
        assert_eq!(permutation_count(&[2, 2, 2, 2]), 1.0);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let t = SymmetricTensor::zeros(2, 3, 1);
        assert!(matches!(t.contract(&[&[1.0, 2.0], &[1.0, 2.0]]), Err(Error::DimensionMismatch { .. })));
    }
}
