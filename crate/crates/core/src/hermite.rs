//! Multivariate Hermite tensors and degree-`k` Hermite coefficients.
//!
//! Component `(i_1, …, i_k)` of `H^(k)(x)` equals `Π_j He_{m_j}(x_j)`, where
//! `m_j` counts how often `j` appears among the indices. This product form
//! agrees with the δ-contraction formulas (`x⊗x − I`, …) and is what every
//! closed form in the crate factorizes over.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::hermite_he;

/// Highest supported tensor degree.
pub const MAX_K: usize = 4;

/// A dense symmetric `k`-tensor over `R^n`, stored row-major with all `n^k`
/// logical entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HermiteMoment<T> {
    pub n: usize,
    pub k: usize,
    pub values: Vec<T>,
}

/// Index multiplicities of flat entry `flat` of an `n^k` tensor.
pub fn multiplicities(n: usize, k: usize, mut flat: usize) -> Vec<u32> {
    let mut m = vec![0u32; n];
    for _ in 0..k {
        m[flat % n] += 1;
        flat /= n;
    }
    m
}

/// Multi-index of flat entry `flat` (most significant index first).
pub fn unflatten(n: usize, k: usize, mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0usize; k];
    for slot in idx.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
    idx
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if k > MAX_K {
        return Err(Error::Unsupported(format!("Hermite tensors of degree {k} (max {MAX_K})")));
    }
    Ok(())
}

impl<T: Real> HermiteMoment<T> {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self { n, k, values: vec![T::zero(); n.pow(k as u32)] }
    }

    /// Fills every entry from its index multiplicities.
    pub fn from_multiplicities(n: usize, k: usize, mut entry: impl FnMut(&[u32]) -> T) -> Self {
        let len = n.pow(k as u32);
        let values = (0..len).map(|flat| entry(&multiplicities(n, k, flat))).collect();
        Self { n, k, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> T {
        debug_assert_eq!(idx.len(), self.k);
        let flat = idx.iter().fold(0usize, |acc, &i| acc * self.n + i);
        self.values[flat]
    }

    /// Hilbert–Schmidt inner product (full contraction).
    pub fn inner(&self, other: &Self) -> Result<T> {
        if self.n != other.n || self.k != other.k {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        Ok(self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|&a| a * a).sum()
    }

    pub fn scaled(mut self, c: T) -> Self {
        for v in &mut self.values {
            *v = *v * c;
        }
        self
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values.iter().zip(&other.values).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max)
    }

    /// Largest deviation from symmetry under any index transposition.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for flat in 0..self.len() {
            let idx = unflatten(self.n, self.k, flat);
            for a in 1..self.k {
                let mut swapped = idx.clone();
                swapped.swap(0, a);
                worst = worst.max((self.values[flat] - self.get(&swapped)).abs());
            }
        }
        worst
    }

    /// Contracts the last index with `v`, giving a `(k−1)`-tensor.
    pub fn contract_last(&self, v: &[T]) -> Result<Self> {
        if self.k == 0 || v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        let out_len = self.n.pow(self.k as u32 - 1);
        let values = (0..out_len)
            .map(|o| (0..self.n).map(|j| self.values[o * self.n + j] * v[j]).sum())
            .collect();
        Ok(Self { n: self.n, k: self.k - 1, values })
    }
}

/// `H^(k)(x)` for `k ≤ 4`.
pub fn hermite_tensor<T: Real>(k: usize, x: &[T]) -> Result<HermiteMoment<T>> {
    check_k(k)?;
    let n = x.len();
    Ok(HermiteMoment::from_multiplicities(n, k, |m| {
        m.iter().zip(x).map(|(&mi, &xi)| hermite_he(mi as i32, xi)).fold(T::one(), |a, b| a * b)
    }))
}

/// All tensors `H^(0..=kmax)(x)` at once, sharing the univariate evaluations.
pub fn hermite_tensors<T: Real>(kmax: usize, x: &[T]) -> Result<Vec<HermiteMoment<T>>> {
    check_k(kmax)?;
    let he: Vec<Vec<T>> = x.iter().map(|&xi| (0..=kmax as i32).map(|m| hermite_he(m, xi)).collect()).collect();
    Ok((0..=kmax)
        .map(|k| {
            HermiteMoment::from_multiplicities(x.len(), k, |m| {
                m.iter().enumerate().fold(T::one(), |acc, (i, &mi)| acc * he[i][mi as usize])
            })
        })
        .collect())
}
