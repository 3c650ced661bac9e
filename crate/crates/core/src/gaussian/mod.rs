//! Functions on Gaussian space: three evaluable representations, their
//! Hermite coefficients, the Ornstein–Uhlenbeck semigroup, and the bridge
//! from Boolean functions via `x ↦ f(sign(x))`.

pub mod bridge;
pub mod moments;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boolean::{BooleanFunction, FunctionFile};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, TensorRule};
use crate::scalar::Real;
use crate::special::{hermite_he, normal_cdf};

pub use bridge::{bridge, bridge_constants, BridgeConstants, BridgeReport, ConstantSpread};
pub use moments::{
    gaussian_bounds, gaussian_correlation, gaussian_correlation_quadrature, moment, moment_quadrature,
    GaussianBoundReport,
};

/// Largest total degree of a Hermite series.
pub const MAX_SERIES_DEGREE: u32 = 6;
/// Largest dimension for Gaussian functionals.
pub const MAX_GAUSSIAN_N: usize = 4;

const UNIT_NORM_TOL: f64 = 1e-9;

/// Value range of a sign-composed function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Range {
    /// `x ↦ f(sign x) ∈ {0, 1}`.
    Unit,
    /// `x ↦ 2f(sign x) − 1 ∈ {−1, 1}`.
    #[default]
    Signed,
}

/// An evaluable function on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub enum GaussianFunctional<T> {
    SignComposed { f: BooleanFunction, range: Range },
    /// `1{⟨θ, x⟩ > a}` with `θ` a nonnegative unit vector.
    HalfSpace { theta: Vec<T>, a: T },
    /// `Σ_α c_α Π_i He_{α_i}(x_i)`; not range-checked.
    HermiteSeries { n: usize, coeffs: BTreeMap<Vec<u32>, T> },
    /// `P_t` applied to `base`.
    Smoothed { base: Box<GaussianFunctional<T>>, t: T },
}

impl<T: Real> GaussianFunctional<T> {
    /// `2f(sign x) − 1`.
    pub fn sign(f: BooleanFunction) -> Result<Self> {
        Self::sign_with_range(f, Range::Signed)
    }

    pub fn sign_with_range(f: BooleanFunction, range: Range) -> Result<Self> {
        if f.n() > MAX_GAUSSIAN_N {
            return Err(Error::TooLarge { what: "Gaussian functional", n: f.n(), limit: MAX_GAUSSIAN_N });
        }
        Ok(Self::SignComposed { f, range })
    }

    pub fn halfspace(theta: Vec<T>, a: T) -> Result<Self> {
        if theta.is_empty() || theta.len() > MAX_GAUSSIAN_N {
            return Err(Error::field("theta", format!("dimension must be in 1..={MAX_GAUSSIAN_N}")));
        }
        if theta.iter().any(|&c| c < T::zero() || !c.is_finite()) {
            return Err(Error::field("theta", "entries must be finite and nonnegative"));
        }
        let norm = theta.iter().map(|&c| c * c).sum::<T>().sqrt();
        if (norm - T::one()).abs().to_f64_lossy() > UNIT_NORM_TOL {
            return Err(Error::field("theta", format!("must have unit norm, got {norm}")));
        }
        if !a.is_finite() {
            return Err(Error::field("a", "threshold must be finite"));
        }
        Ok(Self::HalfSpace { theta, a })
    }

    pub fn hermite_series(n: usize, coeffs: BTreeMap<Vec<u32>, T>) -> Result<Self> {
        if n == 0 || n > MAX_GAUSSIAN_N {
            return Err(Error::field("n", format!("must be in 1..={MAX_GAUSSIAN_N}")));
        }
        for alpha in coeffs.keys() {
            if alpha.len() != n {
                return Err(Error::field("coeffs", format!("multi-index {alpha:?} has length {} ≠ n = {n}", alpha.len())));
            }
            if alpha.iter().sum::<u32>() > MAX_SERIES_DEGREE {
                return Err(Error::field("coeffs", format!("total degree of {alpha:?} exceeds {MAX_SERIES_DEGREE}")));
            }
        }
        Ok(Self::HermiteSeries { n, coeffs })
    }

    pub fn n(&self) -> usize {
        match self {
            Self::SignComposed { f, .. } => f.n(),
            Self::HalfSpace { theta, .. } => theta.len(),
            Self::HermiteSeries { n, .. } => *n,
            Self::Smoothed { base, .. } => base.n(),
        }
    }

    /// `Some(true)` for monotone representations, `None` when not decidable.
    pub fn is_monotone(&self) -> Option<bool> {
        match self {
            Self::SignComposed { f, .. } => Some(f.is_monotone()),
            Self::HalfSpace { .. } => Some(true),
            Self::HermiteSeries { .. } => None,
            Self::Smoothed { base, .. } => base.is_monotone(),
        }
    }

    /// Declared range `(lo, hi)`, when the representation guarantees one.
    pub fn range(&self) -> Option<(T, T)> {
        match self {
            Self::SignComposed { range: Range::Signed, .. } => Some((-T::one(), T::one())),
            Self::SignComposed { range: Range::Unit, .. } | Self::HalfSpace { .. } => Some((T::zero(), T::one())),
            Self::HermiteSeries { .. } => None,
            Self::Smoothed { base, .. } => base.range(),
        }
    }

    pub fn eval(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.n());
        match self {
            Self::SignComposed { f, range } => {
                let idx = x.iter().enumerate().fold(0usize, |acc, (i, &xi)| if xi > T::zero() { acc | 1 << i } else { acc });
                apply_range(*range, if f.get(idx) { T::one() } else { T::zero() })
            }
            Self::HalfSpace { theta, a } => {
                if dot(theta, x) > *a {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::HermiteSeries { coeffs, .. } => coeffs.iter().map(|(alpha, &c)| c * hermite_product(alpha, x)).sum(),
            Self::Smoothed { base, t } => ou_eval(base, *t, x),
        }
    }
}

pub(crate) fn apply_range<T: Real>(range: Range, unit_value: T) -> T {
    match range {
        Range::Unit => unit_value,
        Range::Signed => T::lit(2.0) * unit_value - T::one(),
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn hermite_product<T: Real>(alpha: &[u32], x: &[T]) -> T {
    alpha.iter().zip(x).fold(T::one(), |acc, (&m, &xi)| acc * hermite_he(m as i32, xi))
}

/// Multilinear extension of `f` at per-coordinate probabilities `p_i = Pr[x_i = +1]`.
pub(crate) fn multilinear<T: Real>(f: &BooleanFunction, p: &[T]) -> T {
    let n = f.n();
    let mut acc = T::zero();
    for idx in 0..f.len() {
        if !f.get(idx) {
            continue;
        }
        let mut w = T::one();
        for (i, &pi) in p.iter().enumerate().take(n) {
            w = w * if idx >> i & 1 == 1 { pi } else { T::one() - pi };
        }
        acc = acc + w;
    }
    acc
}

/// `P_t[F](x) = ∫ F(e^{−t/2}x + √(1−e^{−t})·y) dγ(y)`.
fn ou_eval<T: Real>(base: &GaussianFunctional<T>, t: T, x: &[T]) -> T {
    if t == T::zero() {
        return base.eval(x);
    }
    let decay = (-t / T::lit(2.0)).exp();
    let spread = (T::one() - (-t).exp()).sqrt();
    match base {
        GaussianFunctional::SignComposed { f, range } => {
            let p: Vec<T> = x.iter().map(|&xi| normal_cdf(decay * xi / spread)).collect();
            apply_range(*range, multilinear(f, &p))
        }
        GaussianFunctional::HalfSpace { theta, a } => normal_cdf((decay * dot(theta, x) - *a) / spread),
        GaussianFunctional::HermiteSeries { coeffs, .. } => coeffs
            .iter()
            .map(|(alpha, &c)| {
                let deg = alpha.iter().sum::<u32>();
                c * (-(T::lit(deg as f64)) * t / T::lit(2.0)).exp() * hermite_product(alpha, x)
            })
            .sum(),
        GaussianFunctional::Smoothed { .. } => {
            // smooth inner function: plain tensor Gauss–Hermite in y
            let rule = TensorRule::new(vec![gauss_hermite::<T>(SMOOTH_ORDER); x.len()]);
            let mut z = vec![T::zero(); x.len()];
            rule.integrate(|y| {
                for i in 0..x.len() {
                    z[i] = decay * x[i] + spread * y[i];
                }
                base.eval(&z)
            })
        }
    }
}

const SMOOTH_ORDER: usize = 24;

/// `P_t[F]`; `t ≥ 0`.
pub fn ou_apply<T: Real>(f: &GaussianFunctional<T>, t: T) -> Result<GaussianFunctional<T>> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("OU time must be finite and nonnegative, got {t}")));
    }
    Ok(GaussianFunctional::Smoothed { base: Box::new(f.clone()), t })
}

/// On-disk form of a functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", deny_unknown_fields)]
pub enum FunctionalFile {
    Halfspace {
        theta: Vec<f64>,
        a: f64,
    },
    Sign {
        boolean: FunctionFile,
        #[serde(default)]
        range: Range,
    },
    Hermite {
        n: usize,
        /// Keys are comma-separated multi-indices, e.g. `"1,0,2"`.
        coeffs: BTreeMap<String, f64>,
    },
    Ou {
        base: Box<FunctionalFile>,
        t: f64,
    },
}

impl FunctionalFile {
    pub fn to_functional(&self) -> Result<GaussianFunctional<f64>> {
        match self {
            Self::Halfspace { theta, a } => GaussianFunctional::halfspace(theta.clone(), *a),
            Self::Sign { boolean, range } => GaussianFunctional::sign_with_range(boolean.to_function()?, *range),
            Self::Hermite { n, coeffs } => {
                let mut parsed = BTreeMap::new();
                for (key, &c) in coeffs {
                    let alpha = key
                        .split(',')
                        .map(|s| s.trim().parse::<u32>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::field("coeffs", format!("bad multi-index `{key}`")))?;
                    parsed.insert(alpha, c);
                }
                GaussianFunctional::hermite_series(*n, parsed)
            }
            Self::Ou { base, t } => {
                let base = base.to_functional()?;
                ou_apply(&base, *t).map_err(|e| Error::field("t", e.to_string()))
            }
        }
    }

    pub fn from_functional(f: &GaussianFunctional<f64>) -> Self {
        match f {
            GaussianFunctional::SignComposed { f, range } => Self::Sign { boolean: f.to_file(), range: *range },
            GaussianFunctional::HalfSpace { theta, a } => Self::Halfspace { theta: theta.clone(), a: *a },
            GaussianFunctional::HermiteSeries { n, coeffs } => Self::Hermite {
                n: *n,
                coeffs: coeffs
                    .iter()
                    .map(|(alpha, &c)| (alpha.iter().map(u32::to_string).collect::<Vec<_>>().join(","), c))
                    .collect(),
            },
            GaussianFunctional::Smoothed { base, t } => Self::Ou { base: Box::new(Self::from_functional(base)), t: *t },
        }
    }
}

pub fn functional_from_json(s: &str) -> Result<GaussianFunctional<f64>> {
    let file: FunctionalFile = crate::error::parse_json(s, "functional").map_err(|e| {
        serde_json::from_str::<serde_json::Value>(s).ok().and_then(|v| diagnose(&v)).unwrap_or(e)
    })?;
    file.to_functional()
}

/// The internally tagged layout hides field paths from serde; re-checks the
/// fields of the named variant one by one to report the offending one.
fn diagnose(v: &serde_json::Value) -> Option<Error> {
    use serde::de::DeserializeOwned;
    fn check<T: DeserializeOwned>(v: &serde_json::Value, key: &str, prefix: &str) -> Option<Error> {
        let name = format!("{prefix}{key}");
        match v.get(key) {
            None => Some(Error::field(name, "missing")),
            Some(x) => serde_path_to_error::deserialize::<_, T>(x).err().map(|e| {
                let p = e.path().to_string();
                let field = if p == "." { name } else { format!("{name}{}", if p.starts_with('[') { p } else { format!(".{p}") }) };
                Error::field(field, e.into_inner().to_string())
            }),
        }
    }
    fn walk(v: &serde_json::Value, prefix: &str) -> Option<Error> {
        match v.get("variant").and_then(|t| t.as_str()) {
            None => Some(Error::field(format!("{prefix}variant"), "missing or not a string")),
            Some("halfspace") => check::<Vec<f64>>(v, "theta", prefix).or_else(|| check::<f64>(v, "a", prefix)),
            Some("sign") => check::<FunctionFile>(v, "boolean", prefix),
            Some("hermite") => {
                check::<usize>(v, "n", prefix).or_else(|| check::<BTreeMap<String, f64>>(v, "coeffs", prefix))
            }
            Some("ou") => check::<f64>(v, "t", prefix).or_else(|| match v.get("base") {
                Some(b) => walk(b, &format!("{prefix}base.")),
                None => Some(Error::field(format!("{prefix}base"), "missing")),
            }),
            Some(other) => Some(Error::field(
                format!("{prefix}variant"),
                format!("unknown variant `{other}` (halfspace, sign, hermite, ou)"),
            )),
        }
    }
    walk(v, "")
}

pub fn functional_to_json(f: &GaussianFunctional<f64>) -> String {
    serde_json::to_string(&FunctionalFile::from_functional(f)).expect("serializable")
}

/// Loads `path`; a `sign:` prefix reads a plain Boolean function file and
/// wraps it as a signed sign-composed functional.
pub fn load_functional(spec: &str) -> Result<GaussianFunctional<f64>> {
    if let Some(path) = spec.strip_prefix("sign:") {
        return GaussianFunctional::sign(BooleanFunction::load(Path::new(path))?);
    }
    functional_from_json(&std::fs::read_to_string(spec)?)
}
