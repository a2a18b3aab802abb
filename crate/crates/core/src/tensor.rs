//! Dense storage for (symmetric) tensors over `R^d`.

use std::fmt;

use serde::Serialize;

/// A dense order-`k` tensor over `R^d`, stored row-major with `d^k` entries.
///
/// Derivative tensors of a smooth function are symmetric; the type does not
/// enforce it, but [`SymTensor::symmetrized`] and [`SymTensor::asymmetry`]
/// are available for checks.
#[derive(Clone, PartialEq, Serialize)]
pub struct SymTensor {
    dim: usize,
    order: usize,
    data: Vec<f64>,
}

impl SymTensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Self {
            dim,
            order,
            data: vec![0.0; dim.pow(order as u32)],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            dim: 1,
            order: 0,
            data: vec![value],
        }
    }

    pub fn from_fn(dim: usize, order: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(dim, order);
        let mut idx = vec![0usize; order];
        for flat in 0..t.data.len() {
            t.unflatten(flat, &mut idx);
            t.data[flat] = f(&idx);
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    fn unflatten(&self, mut flat: usize, idx: &mut [usize]) {
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let f = self.flat_index(idx);
        self.data[f] = value;
    }

    /// Writes `value` into every permutation of `idx`.
    pub fn set_symmetric(&mut self, idx: &[usize], value: f64) {
        let mut perm = idx.to_vec();
        perm.sort_unstable();
        loop {
            self.set(&perm, value);
            if !next_permutation(&mut perm) {
                break;
            }
        }
    }

    pub fn scale(mut self, factor: f64) -> Self {
        self.data.iter_mut().for_each(|v| *v *= factor);
        self
    }

    /// Average over all index permutations.
    pub fn symmetrized(&self) -> Self {
        if self.order < 2 {
            return self.clone();
        }
        let mut out = Self::zeros(self.dim, self.order);
        let mut idx = vec![0usize; self.order];
        for flat in 0..self.data.len() {
            self.unflatten(flat, &mut idx);
            let mut perm = idx.clone();
            perm.sort_unstable();
            let mut sum = 0.0;
            let mut count = 0usize;
            loop {
                sum += self.get(&perm);
                count += 1;
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            out.data[flat] = sum / count as f64;
        }
        out
    }

    /// Largest deviation from full permutation symmetry.
    pub fn asymmetry(&self) -> f64 {
        let sym = self.symmetrized();
        self.max_abs_diff(&sym)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// All sorted index tuples (multisets); one representative per symmetry class.
    pub fn multisets(dim: usize, order: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(order);
        fn rec(dim: usize, order: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == order {
                out.push(cur.clone());
                return;
            }
            for i in start..dim {
                cur.push(i);
                rec(dim, order, i, cur, out);
                cur.pop();
            }
        }
        rec(dim, order, 0, &mut cur, &mut out);
        out
    }
}

impl fmt::Debug for SymTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymTensor")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("data", &self.data)
            .finish()
    }
}

/// Lexicographic next permutation; returns false when wrapped around.
pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
