//! Nonnegative vector fields `R^n → R_+^k` that are constant on the cells of
//! an axis-aligned grid; all Gaussian integrals are exact cell sums.

use serde::{Deserialize, Serialize};

use super::density::interval_moments;
use crate::error::{Error, Result};

/// Largest `n` and `k` for fields.
pub const MAX_FIELD_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxField {
    /// Interior cut points per axis.
    pub breakpoints: Vec<Vec<f64>>,
    /// Field value per cell (axis 0 varying slowest), each of length `k`.
    pub values: Vec<Vec<f64>>,
}

impl BoxField {
    pub fn new(mut breakpoints: Vec<Vec<f64>>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = breakpoints.len();
        if n == 0 || n > MAX_FIELD_DIM {
            return Err(Error::TooLarge { what: "field dimension", n, limit: MAX_FIELD_DIM });
        }
        for b in &mut breakpoints {
            b.sort_by(f64::total_cmp);
        }
        let cells: usize = breakpoints.iter().map(|b| b.len() + 1).product();
        if values.len() != cells {
            return Err(Error::field("values", format!("expected {cells} cells, got {}", values.len())));
        }
        let k = values.first().map_or(0, Vec::len);
        if k == 0 || k > MAX_FIELD_DIM || values.iter().any(|v| v.len() != k) {
            return Err(Error::field("values", format!("every cell needs the same 1..={MAX_FIELD_DIM} components")));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn n(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn k(&self) -> usize {
        self.values[0].len()
    }

    /// Errors naming `name` when any component is negative.
    pub fn check_nonnegative(&self, name: &str) -> Result<()> {
        if self.values.iter().flatten().any(|&v| !(v >= 0.0)) {
            return Err(Error::field(name, "field has a negative or NaN component"));
        }
        Ok(())
    }

    /// `Σ_cell value · Π_a ∫_cell x_a^{e_a} dγ` for every cell, via `visit(cell, weight)`.
    fn cell_integrals(&self, e: &[usize], mut visit: impl FnMut(usize, f64)) {
        let per_axis: Vec<Vec<[f64; 3]>> = self.breakpoints.iter().map(|b| interval_moments(b)).collect();
        for cell in 0..self.values.len() {
            let mut rem = cell;
            let mut w = 1.0;
            for a in (0..self.n()).rev() {
                let len = self.breakpoints[a].len() + 1;
                w *= per_axis[a][rem % len][e[a]];
                rem /= len;
            }
            visit(cell, w);
        }
    }

    /// `∫u dγ`.
    pub fn means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        self.cell_integrals(&vec![0; self.n()], |c, w| {
            for (o, v) in out.iter_mut().zip(&self.values[c]) {
                *o += w * v;
            }
        });
        out
    }

    /// `∫|u|² dγ`.
    pub fn norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        self.cell_integrals(&vec![0; self.n()], |c, w| acc += w * self.values[c].iter().map(|v| v * v).sum::<f64>());
        acc
    }

    /// `∫u_i (xxᵀ − I) dγ` for each component `i`.
    pub fn second_tensors(&self) -> Vec<Vec<Vec<f64>>> {
        let (n, k) = (self.n(), self.k());
        let means = self.means();
        let mut out = vec![vec![vec![0.0; n]; n]; k];
        for a in 0..n {
            for b in a..n {
                let mut e = vec![0; n];
                e[a] += 1;
                e[b] += 1;
                self.cell_integrals(&e, |c, w| {
                    for i in 0..k {
                        out[i][a][b] += w * self.values[c][i];
                    }
                });
                for (i, m) in means.iter().enumerate() {
                    if a == b {
                        out[i][a][a] -= m;
                    } else {
                        out[i][b][a] = out[i][a][b];
                    }
                }
            }
        }
        out
    }

    /// Value at `x` (cut points belong to the upper cell).
    pub fn eval(&self, x: &[f64]) -> &[f64] {
        let mut cell = 0;
        for (a, b) in self.breakpoints.iter().enumerate() {
            cell = cell * (b.len() + 1) + b.partition_point(|&p| p <= x[a]);
        }
        &self.values[cell]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{piecewise_gaussian, TensorRule};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_integrals_match_quadrature() {
        let f = BoxField::new(
            vec![vec![-0.3], vec![0.2, 1.1]],
            vec![vec![1.0, 0.0], vec![0.5, 2.0], vec![0.0, 0.3], vec![1.5, 1.0], vec![0.2, 0.0], vec![0.7, 0.9]],
        )
        .unwrap();
        let rule = TensorRule::new(vec![piecewise_gaussian::<f64>(&[-0.3], 1.0, 20, 12.0), piecewise_gaussian(&[0.2, 1.1], 1.0, 20, 12.0)]);
        let m = f.means();
        let s = f.second_tensors();
        for i in 0..2 {
            assert_abs_diff_eq!(m[i], rule.integrate(|x| f.eval(x)[i]), epsilon = 1e-12);
            for a in 0..2 {
                for b in 0..2 {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    let q = rule.integrate(|x| f.eval(x)[i] * (x[a] * x[b] - delta));
                    assert_abs_diff_eq!(s[i][a][b], q, epsilon = 1e-12);
                }
            }
        }
        assert_abs_diff_eq!(f.norm_sq(), rule.integrate(|x| f.eval(x).iter().map(|v| v * v).sum()), epsilon = 1e-12);
    }
}
