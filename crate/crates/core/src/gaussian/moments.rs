//! Hermite coefficients `Q^(k)(F) = ∫ F·H^(k) dγ` in closed form and by
//! quadrature, Gaussian correlations, and the Gaussian-space bounds.

use serde::{Deserialize, Serialize};

use super::{apply_range, GaussianFunctional, Range};
use crate::bounds::formulas;
use crate::error::{Error, Result};
use crate::hermite::{check_k, hermite_tensors, HermiteMoment};
use crate::quadrature::{gauss_hermite, gh_grid, piecewise_default, Rule, TensorRule, DEFAULT_ORDER};
use crate::scalar::Real;
use crate::special::{hermite_he, normal_pdf, normal_sf};

/// `E[sign(X)·He_m(X)] = 2·He_{m−1}(0)·φ(0)` for odd `m`, zero otherwise.
fn sign_hermite_factor<T: Real>(m: u32) -> T {
    if m % 2 == 0 {
        return T::zero();
    }
    T::lit(2.0) * hermite_he(m as i32 - 1, T::zero()) * normal_pdf(T::zero())
}

fn factorial<T: Real>(m: u32) -> T {
    (1..=m).fold(T::one(), |acc, j| acc * T::lit(j as f64))
}

/// Closed-form `Q^(k)(F)`, `k ≤ 4`.
///
/// Sign-composed functions factorize over coordinates through their
/// Walsh–Fourier expansion; half-spaces reduce to the one-dimensional
/// identity `∫_a^∞ He_k dγ = He_{k−1}(a)φ(a)`; Hermite series use
/// orthogonality; `P_t` multiplies degree `k` by `e^{−kt/2}`.
pub fn moment<T: Real>(f: &GaussianFunctional<T>, k: usize) -> Result<HermiteMoment<T>> {
    check_k(k)?;
    let n = f.n();
    Ok(match f {
        GaussianFunctional::SignComposed { f, range } => {
            let spectrum = f.walsh_fourier();
            let size = T::lit((1u64 << n) as f64);
            HermiteMoment::from_multiplicities(n, k, |m| {
                let mut set = 0usize;
                let mut prod = T::one();
                for (i, &mi) in m.iter().enumerate() {
                    if mi > 0 {
                        set |= 1 << i;
                        prod = prod * sign_hermite_factor(mi);
                    }
                }
                let unit = T::lit(spectrum.numerators()[set] as f64) / size * prod;
                match range {
                    Range::Unit => unit,
                    Range::Signed if k == 0 => T::lit(2.0) * unit - T::one(),
                    Range::Signed => T::lit(2.0) * unit,
                }
            })
        }
        GaussianFunctional::HalfSpace { theta, a } => {
            let scale = if k == 0 { normal_sf(*a) } else { hermite_he(k as i32 - 1, *a) * normal_pdf(*a) };
            HermiteMoment::from_multiplicities(n, k, |m| {
                m.iter().zip(theta).fold(scale, |acc, (&mi, &th)| acc * th.powi(mi as i32))
            })
        }
        GaussianFunctional::HermiteSeries { coeffs, .. } => HermiteMoment::from_multiplicities(n, k, |m| {
            coeffs.get(m).map_or(T::zero(), |&c| m.iter().fold(c, |acc, &mi| acc * factorial(mi)))
        }),
        GaussianFunctional::Smoothed { base, t } => {
            let decay = (-T::lit(k as f64) * *t / T::lit(2.0)).exp();
            moment(base, k)?.scaled(decay)
        }
    })
}

/// Orthonormal frame whose first vector is `theta`.
pub(crate) fn frame_from<T: Real>(theta: &[T]) -> Vec<Vec<T>> {
    let n = theta.len();
    let mut frame = vec![theta.to_vec()];
    for e in 0..n {
        if frame.len() == n {
            break;
        }
        let mut v: Vec<T> = (0..n).map(|i| if i == e { T::one() } else { T::zero() }).collect();
        for u in &frame {
            let d = super::dot(u, &v);
            for (vi, &ui) in v.iter_mut().zip(u) {
                *vi = *vi - d * ui;
            }
        }
        let norm = v.iter().map(|&c| c * c).sum::<T>().sqrt();
        if norm > T::lit(1e-6) {
            frame.push(v.into_iter().map(|c| c / norm).collect());
        }
    }
    frame
}

/// Per-side sums `Σ w·He_m(x)` over nodes with `x > 0` (index 1) and
/// `x ≤ 0` (index 0), for `m ≤ kmax`.
fn half_line_sums<T: Real>(rule: &Rule<T>, kmax: usize) -> [Vec<T>; 2] {
    let mut sums = [vec![T::zero(); kmax + 1], vec![T::zero(); kmax + 1]];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let side = usize::from(x > T::zero());
        for (m, s) in sums[side].iter_mut().enumerate() {
            *s = *s + w * hermite_he(m as i32, x);
        }
    }
    sums
}

/// `Q^(k)(F)` by quadrature.
///
/// Sign-composed functions use a one-dimensional rule split at 0 and sum
/// orthant by orthant; half-spaces integrate in a rotated frame whose first
/// axis is `θ`, split at `a`; smooth representations use tensor
/// Gauss–Hermite of the given per-axis order.
pub fn moment_quadrature<T: Real>(f: &GaussianFunctional<T>, k: usize, order: usize) -> Result<HermiteMoment<T>> {
    check_k(k)?;
    let n = f.n();
    match f {
        GaussianFunctional::SignComposed { f: b, range } => {
            let sums = half_line_sums(&piecewise_default::<T>(&[0.0]), k);
            Ok(HermiteMoment::from_multiplicities(n, k, |m| {
                let mut acc = T::zero();
                for o in 0..b.len() {
                    let val = apply_range(*range, if b.get(o) { T::one() } else { T::zero() });
                    let w = m.iter().enumerate().fold(T::one(), |p, (i, &mi)| p * sums[o >> i & 1][mi as usize]);
                    acc = acc + val * w;
                }
                acc
            }))
        }
        GaussianFunctional::HalfSpace { theta, a } => {
            let mut axes = vec![piecewise_default::<T>(&[a.to_f64_lossy()])];
            axes.extend((1..n).map(|_| gauss_hermite::<T>(order)));
            let rule = TensorRule::new(axes).with_frame(frame_from(theta));
            Ok(integrate_moment(f, k, &rule))
        }
        GaussianFunctional::HermiteSeries { .. } | GaussianFunctional::Smoothed { .. } => {
            Ok(integrate_moment(f, k, &gh_grid::<T>(n, order)?))
        }
    }
}

fn integrate_moment<T: Real>(f: &GaussianFunctional<T>, k: usize, rule: &TensorRule<T>) -> HermiteMoment<T> {
    let n = f.n();
    let values = rule.integrate_vec(n.pow(k as u32), |x, out| {
        let fx = f.eval(x);
        let h = hermite_tensors(k, x).expect("k checked");
        for (o, &hv) in out.iter_mut().zip(&h[k].values) {
            *o = fx * hv;
        }
    });
    HermiteMoment { n, k, values }
}

fn check_same_n<T: Real>(f: &GaussianFunctional<T>, g: &GaussianFunctional<T>) -> Result<()> {
    if f.n() != g.n() {
        return Err(Error::DimensionMismatch { expected: f.n(), got: g.n() });
    }
    Ok(())
}

fn is_smooth<T: Real>(f: &GaussianFunctional<T>) -> bool {
    match f {
        GaussianFunctional::HermiteSeries { .. } => true,
        GaussianFunctional::Smoothed { t, .. } => *t > T::zero(),
        _ => false,
    }
}

/// `Cor_γ(F, G) = E[FG] − E[F]E[G]`.
///
/// Exact for sign-composed pairs (orthant sums); half-space pairs reduce to a
/// one-dimensional smooth integral; pairs of smooth functions use tensor
/// Gauss–Hermite. Other combinations are unsupported.
pub fn gaussian_correlation<T: Real>(f: &GaussianFunctional<T>, g: &GaussianFunctional<T>) -> Result<T> {
    check_same_n(f, g)?;
    use GaussianFunctional as G;
    let efg = match (f, g) {
        (G::SignComposed { f: a, range: ra }, G::SignComposed { f: b, range: rb }) => {
            let size = T::lit(a.len() as f64);
            (0..a.len())
                .map(|o| {
                    let va = apply_range(*ra, if a.get(o) { T::one() } else { T::zero() });
                    let vb = apply_range(*rb, if b.get(o) { T::one() } else { T::zero() });
                    va * vb
                })
                .sum::<T>()
                / size
        }
        (G::HalfSpace { theta, a }, G::HalfSpace { theta: eta, a: b }) => halfspace_joint(theta, *a, eta, *b),
        _ if is_smooth(f) && is_smooth(g) => gh_grid::<T>(f.n(), DEFAULT_ORDER)?.integrate(|x| f.eval(x) * g.eval(x)),
        _ => return Err(Error::Unsupported("Gaussian correlation for this pair of representations".into())),
    };
    let ef = moment(f, 0)?.values[0];
    let eg = moment(g, 0)?.values[0];
    Ok(efg - ef * eg)
}

/// `Pr[⟨θ,X⟩ > a, ⟨η,X⟩ > b]` as `∫_{y>a} Pr[⟨η,X⟩ > b | ⟨θ,X⟩ = y] φ(y) dy`.
fn halfspace_joint<T: Real>(theta: &[T], a: T, eta: &[T], b: T) -> T {
    let rho = super::dot(theta, eta).min(T::one());
    let resid = (T::one() - rho * rho).max(T::zero()).sqrt();
    if resid < T::lit(1e-12) {
        return normal_sf(a.max(b));
    }
    let rule = piecewise_default::<T>(&[a.to_f64_lossy()]);
    rule.integrate(|y| if y > a { normal_sf((b - rho * y) / resid) } else { T::zero() })
}

/// Quadrature-only `Cor_γ` for sign-composed pairs (orthant masses from the
/// split rule instead of `2^{−n}`).
pub fn gaussian_correlation_quadrature<T: Real>(f: &GaussianFunctional<T>, g: &GaussianFunctional<T>) -> Result<T> {
    check_same_n(f, g)?;
    let (GaussianFunctional::SignComposed { f: a, range: ra }, GaussianFunctional::SignComposed { f: b, range: rb }) = (f, g)
    else {
        return gaussian_correlation(f, g);
    };
    let sums = half_line_sums(&piecewise_default::<T>(&[0.0]), 0);
    let n = a.n();
    let (mut efg, mut ef, mut eg) = (T::zero(), T::zero(), T::zero());
    for o in 0..a.len() {
        let w = (0..n).fold(T::one(), |p, i| p * sums[o >> i & 1][0]);
        let va = apply_range(*ra, if a.get(o) { T::one() } else { T::zero() });
        let vb = apply_range(*rb, if b.get(o) { T::one() } else { T::zero() });
        efg = efg + w * va * vb;
        ef = ef + w * va;
        eg = eg + w * vb;
    }
    Ok(efg - ef * eg)
}

/// Gaussian counterparts of the main pair bounds (constant 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBoundReport {
    pub cor: f64,
    /// `⟨M₁(F), M₁(G)⟩`.
    pub m1: f64,
    /// `⟨M₂(F), M₂(G)⟩_HS`.
    pub m2: f64,
    pub rhs_main: Option<f64>,
    pub rhs_coord: Option<f64>,
    pub ratio_main: Option<f64>,
    pub ratio_coord: Option<f64>,
    pub monotone: Option<bool>,
}

pub fn gaussian_bounds(f: &GaussianFunctional<f64>, g: &GaussianFunctional<f64>) -> Result<GaussianBoundReport> {
    check_same_n(f, g)?;
    let n = f.n();
    let (m1f, m1g) = (moment(f, 1)?, moment(g, 1)?);
    let (m2f, m2g) = (moment(f, 2)?, moment(g, 2)?);
    let m1 = m1f.inner(&m1g)?;
    let m2 = m2f.inner(&m2g)?;
    let cor = gaussian_correlation(f, g)?;
    let rhs_main = formulas::main_tal(m1, m2);
    let mut rhs_coord = Some(0.0);
    for i in 0..n {
        let p = m1f.values[i] * m1g.values[i];
        let v: f64 = (0..n).map(|j| m2f.values[i * n + j] * m2g.values[i * n + j]).sum();
        rhs_coord = rhs_coord.zip(formulas::main_coord_term(p, v)).map(|(a, b)| a + b);
    }
    let ratio = |r: Option<f64>| r.filter(|&r| r > 0.0).map(|r| cor / r);
    let monotone = f.is_monotone().zip(g.is_monotone()).map(|(a, b)| a && b);
    Ok(GaussianBoundReport {
        cor,
        m1,
        m2,
        rhs_main,
        rhs_coord,
        ratio_main: ratio(rhs_main),
        ratio_coord: ratio(rhs_coord),
        monotone,
    })
}
