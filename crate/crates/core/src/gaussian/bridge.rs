//! Boolean ↔ Gaussian bridge: `f̃(x) = 2f(sign x) − 1` carries the cube
//! correlation, influences and degree-2 Fourier weights to Gaussian space
//! up to fixed constants. Everything Gaussian here is computed by
//! quadrature, so the constants are measured rather than assumed.

use serde::{Deserialize, Serialize};

use super::moments::{gaussian_correlation_quadrature, moment_quadrature};
use super::GaussianFunctional;
use crate::boolean::{correlation, spectral_summary, BooleanFunction};
use crate::error::{Error, Result};
use crate::quadrature::DEFAULT_ORDER;
use crate::scalar::rational_to_f64;

/// Largest `n` for the bridge.
pub const MAX_BRIDGE_N: usize = 4;

/// `Cor_μ / Cor_γ`.
pub const COR_CONSTANT: f64 = 0.25;
/// `M₁(f̃)_i / inf_std_i(f)`, i.e. `√(2/π)`.
pub const M1_CONSTANT: f64 = 0.797_884_560_802_865_4;
/// `M₂(f̃)_{ij} / f̂({i,j})`, i.e. `4/π`.
pub const M2_CONSTANT: f64 = 1.273_239_544_735_162_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub n: usize,
    pub f_hex: String,
    pub g_hex: String,
    /// Identities are only claimed for monotone pairs.
    pub monotone: bool,
    pub cor_mu: f64,
    pub cor_gamma: f64,
    /// `M₁(f̃)` and `inf_std(f)`.
    pub m1: Vec<f64>,
    pub inf_std: Vec<f64>,
    /// Off-diagonal `M₂(f̃)_{ij}` and `f̂({i,j})`, row-major, zero diagonal.
    pub m2: Vec<f64>,
    pub fourier_pairs: Vec<f64>,
    /// Largest `|M₂(f̃)_{ii}|`; zero in exact arithmetic.
    pub m2_diag_max: f64,
}

/// Computes the bridge quantities for `(f, g)`; the per-function fields
/// refer to `f`.
pub fn bridge(f: &BooleanFunction, g: &BooleanFunction) -> Result<BridgeReport> {
    let n = f.n();
    if n != g.n() {
        return Err(Error::DimensionMismatch { expected: n, got: g.n() });
    }
    if n > MAX_BRIDGE_N {
        return Err(Error::TooLarge { what: "Boolean-Gaussian bridge", n, limit: MAX_BRIDGE_N });
    }
    let ft = GaussianFunctional::<f64>::sign(f.clone())?;
    let gt = GaussianFunctional::<f64>::sign(g.clone())?;
    let sf = spectral_summary(f)?;
    let m1 = moment_quadrature(&ft, 1, DEFAULT_ORDER)?.values;
    let m2q = moment_quadrature(&ft, 2, DEFAULT_ORDER)?;
    let mut m2 = vec![0.0; n * n];
    let mut fourier_pairs = vec![0.0; n * n];
    let mut m2_diag_max: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                m2_diag_max = m2_diag_max.max(m2q.get(&[i, i]).abs());
            } else {
                m2[i * n + j] = m2q.get(&[i, j]);
                fourier_pairs[i * n + j] = rational_to_f64(&sf.v_fourier(i, j));
            }
        }
    }
    Ok(BridgeReport {
        n,
        f_hex: f.to_hex(),
        g_hex: g.to_hex(),
        monotone: f.is_monotone() && g.is_monotone(),
        cor_mu: rational_to_f64(&correlation(f, g)?),
        cor_gamma: gaussian_correlation_quadrature(&ft, &gt)?,
        m1,
        inf_std: sf.inf_std.iter().map(rational_to_f64).collect(),
        m2,
        fourier_pairs,
        m2_diag_max,
    })
}

/// Observed spread of `lhs / rhs` over entries with `|rhs| > 1e-12`, plus
/// the worst `|lhs − c·rhs|` over all entries for the nominal constant `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSpread {
    pub nominal: f64,
    pub min: f64,
    pub max: f64,
    pub count: u64,
    pub max_residual: f64,
}

impl ConstantSpread {
    fn new(nominal: f64) -> Self {
        Self { nominal, min: f64::INFINITY, max: f64::NEG_INFINITY, count: 0, max_residual: 0.0 }
    }

    fn push(&mut self, lhs: f64, rhs: f64) {
        if rhs.abs() > 1e-12 {
            let r = lhs / rhs;
            self.min = self.min.min(r);
            self.max = self.max.max(r);
            self.count += 1;
        }
        self.max_residual = self.max_residual.max((lhs - self.nominal * rhs).abs());
    }

    /// One constant fits every entry to `tol`.
    pub fn uniform_within(&self, tol: f64) -> bool {
        self.count > 0 && self.max_residual <= tol && (self.max - self.min) <= tol.max(1e-15) * 1e3
    }
}

/// Aggregated constants over a family of bridge reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConstants {
    /// `Cor_μ = c·Cor_γ`.
    pub cor: ConstantSpread,
    /// `M₁(f̃)_i = c·inf_std_i`.
    pub m1: ConstantSpread,
    /// `M₂(f̃)_{ij} = c·f̂({i,j})`.
    pub m2: ConstantSpread,
    pub m2_diag_max: f64,
    pub reports: u64,
}

pub fn bridge_constants(reports: &[BridgeReport]) -> BridgeConstants {
    let mut out = BridgeConstants {
        cor: ConstantSpread::new(COR_CONSTANT),
        m1: ConstantSpread::new(M1_CONSTANT),
        m2: ConstantSpread::new(M2_CONSTANT),
        m2_diag_max: 0.0,
        reports: reports.len() as u64,
    };
    for r in reports {
        out.cor.push(r.cor_mu, r.cor_gamma);
        for (&lhs, &rhs) in r.m1.iter().zip(&r.inf_std) {
            out.m1.push(lhs, rhs);
        }
        for (&lhs, &rhs) in r.m2.iter().zip(&r.fourier_pairs) {
            out.m2.push(lhs, rhs);
        }
        out.m2_diag_max = out.m2_diag_max.max(r.m2_diag_max);
    }
    out
}
