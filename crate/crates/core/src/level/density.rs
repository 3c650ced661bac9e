//! Absolutely continuous laws on `R^d` (`d ≤ 3`) with their second
//! moments, relative entropy to `γ` and, for `d = 1`, quantiles.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, piecewise_gaussian, TensorRule};
use crate::special::{normal_cdf, normal_pdf, normal_sf};

/// Largest dimension of a density.
pub const MAX_DENSITY_D: usize = 3;
const MASS_TOL: f64 = 1e-9;

/// A law on `R^d` given by its density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum DensitySpec {
    /// `Σ_c w_c N(μ_c, Σ_c)`.
    Mixture { weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<Vec<f64>>> },
    /// `ρ dγ` with `ρ` constant on the cells of an axis-aligned grid.
    /// `breakpoints[a]` are the interior cut points along axis `a`; `levels`
    /// lists the cell values with axis 0 varying slowest, normalized so
    /// `∫ρ dγ = 1`.
    Reweighted { breakpoints: Vec<Vec<f64>>, levels: Vec<f64> },
}

/// Factorized Gaussian component, ready for evaluation.
#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    prec: DMatrix<f64>,
    log_norm: f64,
}

impl DensitySpec {
    /// `N(μ, Σ)`.
    pub fn gaussian(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        Self::mixture(vec![1.0], vec![mean], vec![covariance])
    }

    /// `N(μ, σ²)` on the line.
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::gaussian(vec![mu], vec![vec![sigma * sigma]])
    }

    /// The standard Gaussian itself.
    pub fn standard(d: usize) -> Result<Self> {
        Self::gaussian(vec![0.0; d], (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect())
    }

    pub fn mixture(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let spec = DensitySpec::Mixture { weights, means, covariances };
        spec.validate()?;
        Ok(spec)
    }

    /// Normalizes `levels` against `γ`; every level must be nonnegative.
    pub fn reweighted(mut breakpoints: Vec<Vec<f64>>, levels: Vec<f64>) -> Result<Self> {
        for b in &mut breakpoints {
            b.sort_by(f64::total_cmp);
        }
        let cells: usize = breakpoints.iter().map(|b| b.len() + 1).product();
        if levels.len() != cells {
            return Err(Error::field("levels", format!("expected {cells} cell levels, got {}", levels.len())));
        }
        if levels.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::field("levels", "levels must be finite and nonnegative"));
        }
        let raw = DensitySpec::Reweighted { breakpoints, levels };
        let mass = raw.reweighted_integral([0; MAX_DENSITY_D])?;
        if !(mass > 0.0) {
            return Err(Error::field("levels", "density has zero mass"));
        }
        let DensitySpec::Reweighted { breakpoints, levels } = raw else { unreachable!() };
        let spec = DensitySpec::Reweighted { breakpoints, levels: levels.into_iter().map(|c| c / mass).collect() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Mixture { means, .. } => means.first().map_or(0, Vec::len),
            DensitySpec::Reweighted { breakpoints, .. } => breakpoints.len(),
        }
    }

    /// Checks shapes, positivity and unit mass.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || d > MAX_DENSITY_D {
            return Err(Error::TooLarge { what: "density dimension", n: d, limit: MAX_DENSITY_D });
        }
        match self {
            DensitySpec::Mixture { weights, means, covariances } => {
                if weights.is_empty() || means.len() != weights.len() || covariances.len() != weights.len() {
                    return Err(Error::field("weights", "weights, means and covariances must have equal lengths"));
                }
                if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > MASS_TOL {
                    return Err(Error::field("weights", "weights must be nonnegative and sum to 1"));
                }
                if means.iter().any(|m| m.len() != d) {
                    return Err(Error::field("means", format!("every mean must have length {d}")));
                }
                for c in covariances {
                    if c.len() != d || c.iter().any(|r| r.len() != d) {
                        return Err(Error::field("covariances", format!("every covariance must be {d}×{d}")));
                    }
                    for i in 0..d {
                        for j in 0..i {
                            if (c[i][j] - c[j][i]).abs() > 1e-12 {
                                return Err(Error::field("covariances", "covariance must be symmetric"));
                            }
                        }
                    }
                }
                self.components().map(|_| ())
            }
            DensitySpec::Reweighted { .. } => {
                let mass = self.reweighted_integral([0; MAX_DENSITY_D])?;
                if (mass - 1.0).abs() > MASS_TOL {
                    return Err(Error::field("levels", format!("total mass {mass} is not 1")));
                }
                Ok(())
            }
        }
    }

    fn components(&self) -> Result<Vec<Component>> {
        let DensitySpec::Mixture { weights, means, covariances } = self else {
            return Ok(Vec::new());
        };
        let d = self.dim();
        weights
            .iter()
            .zip(means)
            .zip(covariances)
            .map(|((&w, m), c)| {
                let cov = DMatrix::from_fn(d, d, |i, j| c[i][j]);
                let chol = cov
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::field("covariances", "covariance is not positive definite"))?;
                let l = chol.l();
                let log_det: f64 = 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
                Ok(Component {
                    weight: w,
                    mean: DVector::from_column_slice(m),
                    prec: chol.inverse(),
                    chol: l,
                    log_norm: -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
                })
            })
            .collect()
    }

    /// `Σ_cell ρ_cell Π_a I_a(cell)` where `I_a` integrates `x_a^{e_a}` over
    /// the cell's interval against the 1-D Gaussian.
    fn reweighted_integral(&self, e: [usize; MAX_DENSITY_D]) -> Result<f64> {
        let DensitySpec::Reweighted { breakpoints, levels } = self else {
            return Err(Error::Unsupported("not a reweighted density".into()));
        };
        let d = breakpoints.len();
        let per_axis: Vec<Vec<[f64; 3]>> = breakpoints.iter().map(|b| interval_moments(b)).collect();
        let mut total = 0.0;
        for (cell, &c) in levels.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut rem = cell;
            let mut prod = c;
            for a in (0..d).rev() {
                let len = breakpoints[a].len() + 1;
                let idx = rem % len;
                rem /= len;
                prod *= per_axis[a][idx][e[a]];
            }
            total += prod;
        }
        Ok(total)
    }

    /// `E[X_i X_j]`.
    pub fn second_moments(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        match self {
            DensitySpec::Mixture { weights, means, covariances } => (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| (0..weights.len()).map(|c| weights[c] * (covariances[c][i][j] + means[c][i] * means[c][j])).sum())
                        .collect()
                })
                .collect(),
            DensitySpec::Reweighted { .. } => (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let mut e = [0; MAX_DENSITY_D];
                            e[i] += 1;
                            e[j] += 1;
                            self.reweighted_integral(e).expect("reweighted")
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        match self {
            DensitySpec::Mixture { weights, means, .. } => {
                (0..d).map(|i| weights.iter().zip(means).map(|(w, m)| w * m[i]).sum()).collect()
            }
            DensitySpec::Reweighted { .. } => (0..d)
                .map(|i| {
                    let mut e = [0; MAX_DENSITY_D];
                    e[i] = 1;
                    self.reweighted_integral(e).expect("reweighted")
                })
                .collect(),
        }
    }

    /// `log p(x)` for a mixture.
    fn mixture_log_density(comps: &[Component], x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = comps
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| {
                let r = x - &c.mean;
                c.weight.ln() + c.log_norm - 0.5 * r.dot(&(&c.prec * &r))
            })
            .collect();
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    }

    /// `ρ(x) = dX/dγ`.
    pub fn density_ratio(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        match self {
            DensitySpec::Mixture { .. } => {
                let comps = self.components().expect("validated");
                let v = DVector::from_column_slice(x);
                let log_phi = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + v.dot(&v));
                (Self::mixture_log_density(&comps, &v) - log_phi).exp()
            }
            DensitySpec::Reweighted { breakpoints, levels } => {
                let mut cell = 0;
                for (a, b) in breakpoints.iter().enumerate() {
                    cell = cell * (b.len() + 1) + b.partition_point(|&p| p < x[a]);
                }
                levels[cell]
            }
        }
    }

    /// `D_KL(X ‖ γ) = ∫ρ log ρ dγ`: closed form for a single Gaussian and for
    /// reweighted laws, quadrature otherwise.
    pub fn kl(&self) -> f64 {
        match self {
            DensitySpec::Mixture { weights, means, covariances } if weights.len() == 1 => {
                gaussian_kl(&means[0], &covariances[0])
            }
            DensitySpec::Mixture { .. } => self.kl_quadrature(),
            DensitySpec::Reweighted { breakpoints, levels } => {
                let per_axis: Vec<Vec<[f64; 3]>> = breakpoints.iter().map(|b| interval_moments(b)).collect();
                let d = breakpoints.len();
                let mut kl = 0.0;
                for (cell, &c) in levels.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let mut rem = cell;
                    let mut mass = 1.0;
                    for a in (0..d).rev() {
                        let len = breakpoints[a].len() + 1;
                        mass *= per_axis[a][rem % len][0];
                        rem /= len;
                    }
                    kl += c * mass * c.ln();
                }
                kl
            }
        }
    }

    /// KL by quadrature: Gauss–Hermite per mixture component, or a tensor
    /// rule split at the cell boundaries for reweighted laws.
    pub fn kl_quadrature(&self) -> f64 {
        let d = self.dim();
        match self {
            DensitySpec::Mixture { .. } => {
                let comps = self.components().expect("validated");
                let order = match d {
                    1 => 48,
                    2 => 24,
                    _ => 14,
                };
                let rule = TensorRule::new(vec![gauss_hermite::<f64>(order); d]);
                let ln2pi = (2.0 * std::f64::consts::PI).ln();
                comps
                    .iter()
                    .filter(|c| c.weight > 0.0)
                    .map(|c| {
                        c.weight
                            * rule.integrate(|y| {
                                let x = &c.mean + &c.chol * DVector::from_column_slice(y);
                                let log_phi = -0.5 * (d as f64 * ln2pi + x.dot(&x));
                                Self::mixture_log_density(&comps, &x) - log_phi
                            })
                    })
                    .sum()
            }
            DensitySpec::Reweighted { breakpoints, .. } => {
                let rule = TensorRule::new(breakpoints.iter().map(|b| piecewise_gaussian::<f64>(b, 1.0, 20, 12.0)).collect());
                rule.integrate(|x| {
                    // nodes never sit on a cut, so the cell lookup is unambiguous
                    let r = self.density_ratio(x);
                    if r > 0.0 {
                        r * r.ln()
                    } else {
                        0.0
                    }
                })
            }
        }
    }

    /// `(P(X ≤ x), density)` or `(P(X > x), density)` on the line.
    fn tail(&self, x: f64, upper: bool) -> (f64, f64) {
        match self {
            DensitySpec::Mixture { weights, means, covariances } => {
                let mut t = 0.0;
                let mut p = 0.0;
                for ((&w, m), c) in weights.iter().zip(means).zip(covariances) {
                    let s = c[0][0].sqrt();
                    let u = (x - m[0]) / s;
                    t += w * if upper { normal_sf(u) } else { normal_cdf(u) };
                    p += w * normal_pdf(u) / s;
                }
                (t, p)
            }
            DensitySpec::Reweighted { breakpoints, levels } => {
                let b = &breakpoints[0];
                let k = b.partition_point(|&p| p < x);
                let edge = |i: usize| if i == 0 { f64::NEG_INFINITY } else { b[i - 1] };
                let edge_hi = |i: usize| if i == b.len() { f64::INFINITY } else { b[i] };
                let mass = |lo: f64, hi: f64| {
                    if hi <= 0.0 {
                        normal_cdf(hi) - normal_cdf(lo)
                    } else {
                        normal_sf(lo) - normal_sf(hi)
                    }
                };
                let t = if upper {
                    levels[k] * mass(x, edge_hi(k)) + (k + 1..=b.len()).map(|i| levels[i] * mass(edge(i), edge_hi(i))).sum::<f64>()
                } else {
                    levels[k] * mass(edge(k), x) + (0..k).map(|i| levels[i] * mass(edge(i), edge_hi(i))).sum::<f64>()
                };
                (t, levels[k] * normal_pdf(x))
            }
        }
    }

    /// `Q_X(Φ(s))`, the 1-D quantile at the standard normal level `s`;
    /// uses the upper tail for `s > 0` so both tails keep full precision.
    pub fn quantile_at_normal(&self, s: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::Unsupported("quantiles are one-dimensional".into()));
        }
        let upper = s > 0.0;
        let target = if upper { normal_sf(s).ln() } else { normal_cdf(s).ln() };
        let guess = {
            let m = self.mean()[0];
            let v = self.second_moments()[0][0] - m * m;
            m + v.max(1e-12).sqrt() * s
        };
        solve_increasing(
            |x| {
                let (t, p) = self.tail(x, upper);
                let h = if upper { target - t.ln() } else { t.ln() - target };
                (h, p / t)
            },
            guess,
        )
    }

    /// Cut points of `s ↦ Q_X(Φ(s))` where it is not smooth.
    fn quantile_kinks(&self) -> Vec<f64> {
        match self {
            DensitySpec::Mixture { .. } => Vec::new(),
            DensitySpec::Reweighted { breakpoints, .. } => breakpoints[0]
                .iter()
                .filter_map(|&b| {
                    let (lo, _) = self.tail(b, false);
                    let (hi, _) = self.tail(b, true);
                    if lo <= hi {
                        standard_quantile(lo.ln(), false).ok()
                    } else {
                        standard_quantile(hi.ln(), true).ok()
                    }
                })
                .collect(),
        }
    }
}

/// `[γ([l,r]), ∫_l^r x dγ, ∫_l^r x² dγ]` for every interval cut by `b`.
pub(crate) fn interval_moments(b: &[f64]) -> Vec<[f64; 3]> {
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend_from_slice(b);
    edges.push(f64::INFINITY);
    edges
        .windows(2)
        .map(|w| {
            let (l, r) = (w[0], w[1]);
            let mass = if r <= 0.0 { normal_cdf(r) - normal_cdf(l) } else { normal_sf(l) - normal_sf(r) };
            let xphi = |x: f64| if x.is_finite() { x * normal_pdf(x) } else { 0.0 };
            let phi = |x: f64| if x.is_finite() { normal_pdf(x) } else { 0.0 };
            [mass, phi(l) - phi(r), mass - (xphi(r) - xphi(l))]
        })
        .collect()
}

/// `½(tr Σ + |μ|² − d − ln det Σ)`.
pub fn gaussian_kl(mean: &[f64], cov: &[Vec<f64>]) -> f64 {
    let d = mean.len();
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let log_det = m.determinant().ln();
    0.5 * (m.trace() + mean.iter().map(|x| x * x).sum::<f64>() - d as f64 - log_det)
}

/// Root of an increasing `h` given `(h(x), h'(x))`: Newton steps kept
/// inside a shrinking bracket, bisection when a step leaves it.
fn solve_increasing(h: impl Fn(f64) -> (f64, f64), guess: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-80.0_f64, 80.0_f64);
    let mut x = guess.clamp(lo + 1.0, hi - 1.0);
    for _ in 0..300 {
        let (v, dv) = h(x);
        if v == 0.0 {
            return Ok(x);
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - v / dv;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numerical(format!("quantile inversion did not converge near {x}")))
}

/// `Φ^{-1}` from the log of the lower (or upper) tail probability.
fn standard_quantile(log_p: f64, upper: bool) -> Result<f64> {
    solve_increasing(
        |x| {
            let (t, p) = if upper { (normal_sf(x), normal_pdf(x)) } else { (normal_cdf(x), normal_pdf(x)) };
            let h = if upper { log_p - t.ln() } else { t.ln() - log_p };
            (h, p / t)
        },
        0.0,
    )
}

/// `W₂(X, Y)²` on the line, `∫₀¹ (Q_X(u) − Q_Y(u))² du`, written as a
/// Gaussian integral over `u = Φ(s)` and split where either quantile kinks.
pub fn w2_squared_1d(x: &DensitySpec, y: &DensitySpec) -> Result<f64> {
    if x.dim() != 1 || y.dim() != 1 {
        return Err(Error::Unsupported("W2 is computed for one-dimensional laws only".into()));
    }
    let mut kinks = x.quantile_kinks();
    kinks.extend(y.quantile_kinks());
    let rule = piecewise_gaussian::<f64>(&kinks, 0.5, 20, 9.0);
    let mut acc = 0.0;
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let d = x.quantile_at_normal(s)? - y.quantile_at_normal(s)?;
        acc += w * d * d;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_moments_and_kl() {
        let x = DensitySpec::normal(0.7, 1.0).unwrap();
        assert_abs_diff_eq!(x.second_moments()[0][0] - 1.0, 0.49, epsilon = 1e-15);
        assert_abs_diff_eq!(x.kl(), 0.245, epsilon = 1e-15);
        assert_abs_diff_eq!(x.kl_quadrature(), 0.245, epsilon = 1e-10);
        let y = DensitySpec::gaussian(vec![0.3, -0.2], vec![vec![1.5, 0.3], vec![0.3, 0.6]]).unwrap();
        assert_abs_diff_eq!(y.kl(), y.kl_quadrature(), epsilon = 1e-8);
        let g = DensitySpec::standard(3).unwrap();
        assert_eq!(g.kl(), 0.0);
        assert!(g.kl_quadrature().abs() < 1e-10);
    }

    #[test]
    fn reweighted_exact_vs_quadrature() {
        let r = DensitySpec::reweighted(vec![vec![-0.5, 0.8], vec![0.1]], vec![1.0, 0.2, 3.0, 0.0, 2.0, 0.5]).unwrap();
        assert_abs_diff_eq!(r.kl(), r.kl_quadrature(), epsilon = 1e-9);
        let rule = TensorRule::new(vec![piecewise_gaussian::<f64>(&[-0.5, 0.8], 1.0, 20, 12.0), piecewise_gaussian(&[0.1], 1.0, 20, 12.0)]);
        let m = r.second_moments();
        assert_abs_diff_eq!(m[0][1], rule.integrate(|x| r.density_ratio(x) * x[0] * x[1]), epsilon = 1e-10);
        assert_abs_diff_eq!(m[1][1], rule.integrate(|x| r.density_ratio(x) * x[1] * x[1]), epsilon = 1e-10);
        assert_abs_diff_eq!(rule.integrate(|x| r.density_ratio(x)), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn validation_names_fields() {
        let e = DensitySpec::mixture(vec![0.5, 0.4], vec![vec![0.0], vec![1.0]], vec![vec![vec![1.0]], vec![vec![1.0]]]).unwrap_err();
        assert!(e.to_string().contains("weights"));
        let e = DensitySpec::gaussian(vec![0.0], vec![vec![-1.0]]).unwrap_err();
        assert!(e.to_string().contains("covariances"));
        assert!(DensitySpec::reweighted(vec![vec![0.0]], vec![1.0]).is_err());
        assert!(DensitySpec::standard(4).is_err());
    }

    #[test]
    fn quantiles() {
        let x = DensitySpec::normal(0.4, 0.8).unwrap();
        for s in [-8.0, -1.0, 0.0, 2.5, 8.0] {
            assert_abs_diff_eq!(x.quantile_at_normal(s).unwrap(), 0.4 + 0.8 * s, epsilon = 1e-12);
        }
        let r = DensitySpec::reweighted(vec![vec![0.0]], vec![0.5, 1.5]).unwrap();
        // P(X ≤ 0) = 0.25
        let q = r.quantile_at_normal(standard_quantile(0.25_f64.ln(), false).unwrap()).unwrap();
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn w2_closed_forms() {
        let g = DensitySpec::standard(1).unwrap();
        assert!(w2_squared_1d(&g, &g).unwrap() < 1e-20);
        let shift = DensitySpec::normal(0.6, 1.0).unwrap();
        assert_abs_diff_eq!(w2_squared_1d(&shift, &g).unwrap(), 0.36, epsilon = 1e-10);
        let scale = DensitySpec::normal(0.0, 0.8).unwrap();
        assert_abs_diff_eq!(w2_squared_1d(&scale, &g).unwrap(), 0.04, epsilon = 1e-10);
    }
}
