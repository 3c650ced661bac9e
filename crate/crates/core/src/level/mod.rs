//! Numerical checks of the level inequalities: the trace/entropy lower
//! bound `Tr(H_X H_Y) ≥ −20(KL_X + KL_Y)`, one-dimensional entropy
//! transport `W₂² ≤ 2KL`, the vectorial degree-2 inequality for
//! nonnegative fields, and the level 1:3 inequality for monotone functions.
//!
//! Every check reports `margin = lhs − rhs` and the scale
//! `max(|lhs|, |rhs|, 1e−3)`; a violation is `margin < −tol·scale`.

pub mod density;
pub mod field;
pub mod suite;

use serde::{Deserialize, Serialize};

pub use density::{gaussian_kl, w2_squared_1d, DensitySpec, MAX_DENSITY_D};
pub use field::BoxField;
pub use suite::{run_suite, LevelSuite, LevelSuiteReport};

use crate::error::{Error, Result};
use crate::gaussian::{moment, GaussianFunctional, Range};
use crate::special::normal_sf;

/// Constant of the trace/entropy inequality.
pub const LVL21_CONSTANT: f64 = 20.0;
/// Constant of the vectorial inequality.
pub const GEOM_CONSTANT: f64 = 20.0;
/// Relative violation tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Pairs with `⟨Q¹F, Q¹G⟩` below this are degenerate for the level 1:3 check.
pub const LEVEL13_DEGENERATE: f64 = 1e-10;

/// `e⁸`, the level 1:3 constant.
pub fn level13_constant() -> f64 {
    8.0_f64.exp()
}

/// Both sides of an inequality `lhs ≥ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub scale: f64,
}

impl Margin {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, margin: lhs - rhs, scale: lhs.abs().max(rhs.abs()).max(1e-3) }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.margin >= -tol * self.scale
    }

    pub fn relative(&self) -> f64 {
        self.margin / self.scale
    }
}

/// `H_X = E[X Xᵀ] − I`.
pub fn h_matrix(d: &DensitySpec) -> Vec<Vec<f64>> {
    let mut m = d.second_moments();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    m
}

/// `Tr(A B)` for square matrices.
pub fn trace_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    (0..a.len()).map(|i| (0..a.len()).map(|j| a[i][j] * b[j][i]).sum::<f64>()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lvl21Check {
    pub trace: f64,
    pub kl_x: f64,
    pub kl_y: f64,
    pub margin: Margin,
}

pub fn check_lvl21(x: &DensitySpec, y: &DensitySpec) -> Result<Lvl21Check> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    let trace = trace_product(&h_matrix(x), &h_matrix(y));
    let (kl_x, kl_y) = (x.kl(), y.kl());
    Ok(Lvl21Check { trace, kl_x, kl_y, margin: Margin::new(trace, -LVL21_CONSTANT * (kl_x + kl_y)) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportCheck {
    pub w2_sq: f64,
    pub kl: f64,
    /// `2·KL − W₂²`, written as `lhs = 2KL`, `rhs = W₂²`.
    pub margin: Margin,
}

/// `W₂(X, Γ)² ≤ 2·KL(X‖γ)` on the line.
pub fn check_transport_1d(x: &DensitySpec) -> Result<TransportCheck> {
    let w2_sq = w2_squared_1d(x, &DensitySpec::standard(1)?)?;
    let kl = x.kl();
    Ok(TransportCheck { w2_sq, kl, margin: Margin::new(2.0 * kl, w2_sq) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomCheck {
    /// `⟨∫v dγ, ∫u dγ⟩`.
    pub epsilon: f64,
    pub v_sq: f64,
    pub u_sq: f64,
    pub margin: Margin,
}

/// `⟨∫v ⊗ (xxᵀ − I) dγ, ∫u ⊗ (xxᵀ − I) dγ⟩ ≥ −20ε·log(∫|v|²∫|u|²/ε²)`
/// with `ε = ⟨∫v, ∫u⟩`; the right side is taken as 0 when `ε = 0`.
pub fn check_geomineq(v: &BoxField, u: &BoxField) -> Result<GeomCheck> {
    if v.n() != u.n() || v.k() != u.k() {
        return Err(Error::DimensionMismatch { expected: v.k(), got: u.k() });
    }
    v.check_nonnegative("v")?;
    u.check_nonnegative("u")?;
    let (mv, mu) = (v.means(), u.means());
    let epsilon: f64 = mv.iter().zip(&mu).map(|(a, b)| a * b).sum();
    let (sv, su) = (v.second_tensors(), u.second_tensors());
    let lhs: f64 = sv.iter().zip(&su).map(|(a, b)| trace_product(a, b)).sum();
    let (v_sq, u_sq) = (v.norm_sq(), u.norm_sq());
    let rhs = if epsilon > 0.0 { -GEOM_CONSTANT * epsilon * (v_sq * u_sq / (epsilon * epsilon)).ln() } else { 0.0 };
    Ok(GeomCheck { epsilon, v_sq, u_sq, margin: Margin::new(lhs, rhs) })
}

/// `Var[F]` for sign-composed and half-space functions.
pub fn variance(f: &GaussianFunctional<f64>) -> Result<f64> {
    match f {
        GaussianFunctional::SignComposed { range: Range::Signed, .. } => {
            let m = moment(f, 0)?.values[0];
            Ok(1.0 - m * m)
        }
        GaussianFunctional::SignComposed { range: Range::Unit, .. } => {
            let m = moment(f, 0)?.values[0];
            Ok(m * (1.0 - m))
        }
        GaussianFunctional::HalfSpace { a, .. } => {
            let p = normal_sf(*a);
            Ok(p * (1.0 - p))
        }
        _ => Err(Error::Unsupported("variance needs a sign-composed or half-space function".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level13Check {
    /// `⟨Q¹F, Q¹G⟩`.
    pub q1: f64,
    pub var_f: f64,
    pub var_g: f64,
    /// `None` when `q1 ≤ 1e−10`; then only `lhs` is meaningful.
    pub margin: Option<Margin>,
    pub lhs: f64,
}

/// `⟨Q³F, Q³G⟩ ≥ −e⁸·q·log(e·√(Var F·Var G)/q)` with `q = ⟨Q¹F, Q¹G⟩`,
/// from closed-form Hermite coefficients.
pub fn check_level2(f: &GaussianFunctional<f64>, g: &GaussianFunctional<f64>) -> Result<Level13Check> {
    for h in [f, g] {
        if h.is_monotone() != Some(true) {
            return Err(Error::NotMonotone);
        }
    }
    if f.n() != g.n() {
        return Err(Error::DimensionMismatch { expected: f.n(), got: g.n() });
    }
    let q1 = moment(f, 1)?.inner(&moment(g, 1)?)?;
    let lhs = moment(f, 3)?.inner(&moment(g, 3)?)?;
    let (var_f, var_g) = (variance(f)?, variance(g)?);
    let margin = (q1 > LEVEL13_DEGENERATE).then(|| {
        let rhs = -level13_constant() * q1 * (std::f64::consts::E * (var_f * var_g).sqrt() / q1).ln();
        Margin::new(lhs, rhs)
    });
    Ok(Level13Check { q1, var_f, var_g, margin, lhs })
}
