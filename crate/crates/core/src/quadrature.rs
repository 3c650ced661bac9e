//! Gaussian quadrature against the standard normal measure.
//!
//! Rules are built in `f64` by Golub–Welsch (eigen-decomposition of the
//! Jacobi matrix) and converted to the working scalar. Weights always sum to
//! the mass of the measure they integrate against, so `∫1 dγ = 1`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::normal_pdf;

/// Dimension limit for tensorized grids.
pub const MAX_GRID_N: usize = 4;
/// Per-axis order limit for tensorized grids.
pub const MAX_GRID_ORDER: usize = 40;
/// Default per-axis order.
pub const DEFAULT_ORDER: usize = 20;

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> Rule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    fn from_f64(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        Self { nodes: nodes.into_iter().map(T::lit).collect(), weights: weights.into_iter().map(T::lit).collect() }
    }
}

/// Golub–Welsch for a monic family with zero diagonal recurrence and
/// off-diagonal `sqrt(b_k)`; weights scaled to total mass `mass`.
fn golub_welsch(order: usize, b: impl Fn(usize) -> f64, mass: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let off = b(k).sqrt();
        jac[(k, k - 1)] = off;
        jac[(k - 1, k)] = off;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mass * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetric measures: enforce exact node/weight symmetry
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if order % 2 == 1 {
        pairs[order / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Gauss–Hermite rule for the standard normal measure; exact for
/// polynomials of degree `≤ 2·order − 1`.
pub fn gauss_hermite<T: Real>(order: usize) -> Rule<T> {
    assert!(order > 0, "quadrature order must be positive");
    let (x, w) = golub_welsch(order, |k| k as f64, 1.0);
    Rule::from_f64(x, w)
}

/// Gauss–Legendre rule on `[-1, 1]` (weights sum to 2).
pub fn gauss_legendre<T: Real>(order: usize) -> Rule<T> {
    assert!(order > 0, "quadrature order must be positive");
    let (x, w) = golub_welsch(order, |k| (k * k) as f64 / (4.0 * (k * k) as f64 - 1.0), 2.0);
    Rule::from_f64(x, w)
}

/// Composite Gauss–Legendre rule with density `φ` folded into the weights,
/// split at `breakpoints` and truncated to `[-cutoff, cutoff]`.
///
/// Meant for integrands with jumps at known places: every breakpoint is a
/// panel edge, so piecewise-smooth integrands converge spectrally.
pub fn piecewise_gaussian<T: Real>(breakpoints: &[f64], panel_width: f64, order: usize, cutoff: f64) -> Rule<T> {
    let gl = gauss_legendre::<f64>(order);
    let mut edges: Vec<f64> = breakpoints.iter().copied().filter(|b| b.abs() < cutoff).collect();
    edges.push(-cutoff);
    edges.push(cutoff);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let (mut nodes, mut weights) = (Vec::new(), Vec::new());
    for seg in edges.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let panels = ((hi - lo) / panel_width).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                let t = mid + 0.5 * h * x;
                nodes.push(t);
                weights.push(0.5 * h * w * normal_pdf(t));
            }
        }
    }
    Rule::from_f64(nodes, weights)
}

/// Default piecewise rule: unit panels, 20 points each, cutoff 12.
pub fn piecewise_default<T: Real>(breakpoints: &[f64]) -> Rule<T> {
    piecewise_gaussian(breakpoints, 1.0, 20, 12.0)
}

/// Tensor product of one-dimensional Gaussian rules, optionally in a
/// rotated orthonormal frame: the integrand is evaluated at `R·y` where `y`
/// runs over the product grid and `R`'s columns are the frame vectors.
#[derive(Debug, Clone)]
pub struct TensorRule<T> {
    pub axes: Vec<Rule<T>>,
    pub frame: Option<Vec<Vec<T>>>,
}

impl<T: Real> TensorRule<T> {
    pub fn new(axes: Vec<Rule<T>>) -> Self {
        Self { axes, frame: None }
    }

    pub fn with_frame(mut self, frame: Vec<Vec<T>>) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Rule::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `visit(x, w)` for every node in lexicographic order.
    pub fn for_each(&self, mut visit: impl FnMut(&[T], T)) {
        let n = self.dim();
        if n == 0 {
            visit(&[], T::one());
            return;
        }
        let mut idx = vec![0usize; n];
        let mut y = vec![T::zero(); n];
        let mut x = vec![T::zero(); n];
        loop {
            let mut w = T::one();
            for a in 0..n {
                y[a] = self.axes[a].nodes[idx[a]];
                w = w * self.axes[a].weights[idx[a]];
            }
            match &self.frame {
                None => visit(&y, w),
                Some(frame) => {
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi = (0..n).map(|a| frame[a][i] * y[a]).sum();
                    }
                    visit(&x, w);
                }
            }
            let mut a = n;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < self.axes[a].len() {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    pub fn integrate(&self, mut f: impl FnMut(&[T]) -> T) -> T {
        let mut acc = T::zero();
        self.for_each(|x, w| acc = acc + w * f(x));
        acc
    }

    /// Integrates a vector-valued integrand of length `len`.
    pub fn integrate_vec(&self, len: usize, mut f: impl FnMut(&[T], &mut [T])) -> Vec<T> {
        let mut acc = vec![T::zero(); len];
        let mut buf = vec![T::zero(); len];
        self.for_each(|x, w| {
            f(x, &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a = *a + w * *b;
            }
        });
        acc
    }
}

/// Tensorized Gauss–Hermite grid on `R^n`.
pub fn gh_grid<T: Real>(n: usize, order: usize) -> Result<TensorRule<T>> {
    if n > MAX_GRID_N {
        return Err(Error::TooLarge { what: "tensor quadrature grid", n, limit: MAX_GRID_N });
    }
    if order == 0 || order > MAX_GRID_ORDER {
        return Err(Error::InvalidArgument(format!("quadrature order must be in 1..={MAX_GRID_ORDER}, got {order}")));
    }
    Ok(TensorRule::new(vec![gauss_hermite(order); n]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{gaussian_abs_moment, gaussian_moment, hermite_he};
    use approx::assert_abs_diff_eq;

    #[test]
    fn gh_moments() {
        for order in [2usize, 5, 20, 40] {
            let r = gauss_hermite::<f64>(order);
            assert_abs_diff_eq!(r.integrate(|_| 1.0), 1.0, epsilon = 1e-13);
            for k in 0..(2 * order as u32).min(16) {
                let m = r.integrate(|x| x.powi(k as i32));
                assert!((m - gaussian_moment(k)).abs() <= 1e-12 * gaussian_abs_moment(k).max(1.0), "order {order}, k {k}: {m}");
            }
        }
    }

    #[test]
    fn grid_examples() {
        let g = gh_grid::<f64>(2, 20).unwrap();
        assert_abs_diff_eq!(g.integrate(|x| x[0] * x[0]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.integrate(|x| x[1].powi(4)), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.integrate(|x| x[0] * x[0] - 1.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.integrate(|x| x[0] * x[1]), 0.0, epsilon = 1e-12);
        assert!(gh_grid::<f64>(5, 10).is_err());
        assert!(gh_grid::<f64>(2, 41).is_err());
    }

    #[test]
    fn legendre_exactness() {
        let r = gauss_legendre::<f64>(8);
        assert_abs_diff_eq!(r.integrate(|x| x.powi(14)), 2.0 / 15.0, epsilon = 1e-14);
    }

    #[test]
    fn piecewise_half_line_hermite() {
        // ∫_a^∞ He_k dγ = He_{k-1}(a)·φ(a)
        for a in [-1.0, 0.0, 0.5, 2.0] {
            let r = piecewise_default::<f64>(&[a]);
            for k in 1..6 {
                let num = r.integrate(|x| if x > a { hermite_he(k, x) } else { 0.0 });
                let exact = hermite_he(k - 1, a) * normal_pdf(a);
                assert_abs_diff_eq!(num, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn rotated_frame_integrates_halfspace() {
        let s = 0.5_f64.sqrt();
        let frame = vec![vec![s, s], vec![-s, s]];
        let rule = TensorRule::new(vec![piecewise_default(&[0.3]), gauss_hermite(10)]).with_frame(frame);
        let p = rule.integrate(|x| if s * x[0] + s * x[1] > 0.3 { 1.0 } else { 0.0 });
        assert_abs_diff_eq!(p, crate::special::normal_sf(0.3), epsilon = 1e-13);
    }

    #[test]
    fn f32_rule() {
        let r = gauss_hermite::<f32>(10);
        assert!((r.integrate(|x| x * x) - 1.0).abs() < 1e-5);
    }
}
