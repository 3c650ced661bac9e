//! Correlation lower bounds on monotone Boolean pairs: exact moment
//! quantities, right-hand sides with constant 1, the antipodal conjecture
//! check, and empirical worst-case constants.

pub mod anneal;
pub mod formulas;
pub mod scan;

use serde::{Deserialize, Serialize};

use crate::boolean::{correlation, spectral_summary, BooleanFunction, Normalization, SpectralSummary};
use crate::error::{Error, Result};
use crate::scalar::{rational_to_f64, Rational};

pub use anneal::{anneal_search, AnnealSchedule};
pub use scan::{dump_pairs_csv, scan_pairs, ScanMode, ScanParams, WorstCaseReport};

/// The inequalities tracked by reports and searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    Talagrand,
    Kms,
    MainTal,
    MainCoord,
    Symm,
    Chvatal,
}

impl Inequality {
    pub const MONOTONE_PAIR: [Inequality; 4] =
        [Inequality::Talagrand, Inequality::Kms, Inequality::MainTal, Inequality::MainCoord];

    pub fn name(self) -> &'static str {
        match self {
            Inequality::Talagrand => "talagrand",
            Inequality::Kms => "kms",
            Inequality::MainTal => "main_tal",
            Inequality::MainCoord => "main_coord",
            Inequality::Symm => "symm",
            Inequality::Chvatal => "chvatal",
        }
    }

    /// Whether `g` must be antipodal for the bound to apply.
    pub fn needs_antipodal(self) -> bool {
        matches!(self, Inequality::Symm | Inequality::Chvatal)
    }
}

impl std::str::FromStr for Inequality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim_end_matches("-ratio");
        Ok(match key {
            "talagrand" | "tal1" => Inequality::Talagrand,
            "kms" => Inequality::Kms,
            "main_tal" | "thm1.2" => Inequality::MainTal,
            "main_coord" | "thm1.4" => Inequality::MainCoord,
            "symm" | "thm1.1" => Inequality::Symm,
            "chvatal" => Inequality::Chvatal,
            other => return Err(Error::field("objective", format!("unknown inequality `{other}`"))),
        })
    }
}

/// `Σ_i I_i(f)·I_i(g)`.
pub fn m1(sf: &SpectralSummary, sg: &SpectralSummary, norm: Normalization) -> Rational {
    sf.influences(norm).iter().zip(sg.influences(norm)).map(|(a, b)| a * b).sum()
}

/// `⟨V(f), V(g)⟩_HS`.
pub fn m2(sf: &SpectralSummary, sg: &SpectralSummary) -> Rational {
    sf.v.iter().zip(&sg.v).map(|(a, b)| a * b).sum()
}

/// Per coordinate: `(I_i(f)·I_i(g), ⟨V_i(f), V_i(g)⟩)`.
pub fn per_coord(sf: &SpectralSummary, sg: &SpectralSummary, norm: Normalization) -> Vec<(Rational, Rational)> {
    let (a, b) = (sf.influences(norm), sg.influences(norm));
    (0..sf.n)
        .map(|i| {
            let v: Rational = sf.v_row(i).iter().zip(sg.v_row(i)).map(|(x, y)| x * y).sum();
            (a[i] * b[i], v)
        })
        .collect()
}

fn check_dims(sf: &SpectralSummary, sg: &SpectralSummary) -> Result<()> {
    if sf.n != sg.n {
        return Err(Error::DimensionMismatch { expected: sf.n, got: sg.n });
    }
    Ok(())
}

pub fn rhs_talagrand(sf: &SpectralSummary, sg: &SpectralSummary, norm: Normalization) -> Result<Option<f64>> {
    check_dims(sf, sg)?;
    Ok(formulas::talagrand(rational_to_f64(&m1(sf, sg, norm))))
}

pub fn rhs_kms(sf: &SpectralSummary, sg: &SpectralSummary, norm: Normalization) -> Result<Option<f64>> {
    check_dims(sf, sg)?;
    let (a, b) = (sf.influences(norm), sg.influences(norm));
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| formulas::kms_term(rational_to_f64(x), rational_to_f64(y)))
        .sum())
}

pub fn rhs_main_tal(sf: &SpectralSummary, sg: &SpectralSummary, norm: Normalization) -> Result<Option<f64>> {
    check_dims(sf, sg)?;
    let m1 = m1(sf, sg, norm);
    let m2 = m2(sf, sg);
    let zero = Rational::from_integer(0);
    if m1 == zero || m2 == zero {
        return Ok(formulas::main_tal(rational_to_f64(&m1), 0.0));
    }
    // second branch from the exact square
    let second = rational_to_f64(&(m1 * m1)) / rational_to_f64(&m2).abs();
    Ok(formulas::main_tal(rational_to_f64(&m1), 0.0).map(|first| first.min(second)))
}

pub fn rhs_main_coord(sf: &SpectralSummary, sg: &SpectralSummary, norm: Normalization) -> Result<Option<f64>> {
    check_dims(sf, sg)?;
    Ok(per_coord(sf, sg, norm)
        .iter()
        .map(|(p, v)| formulas::main_coord_term(rational_to_f64(p), rational_to_f64(v)))
        .sum())
}

/// Right-hand side of the antipodal bound; `g` must be antipodal and monotone.
pub fn rhs_symm(sf: &SpectralSummary, sg: &SpectralSummary, norm: Normalization) -> Result<Option<f64>> {
    check_dims(sf, sg)?;
    if !sg.antipodal {
        return Err(Error::NotAntipodal);
    }
    Ok(formulas::symm(rational_to_f64(&m1(sf, sg, norm))))
}

/// `m2 / (m1·log(e/m1))`, or `None` when `m1 = 0`.
pub fn remark_constant(sf: &SpectralSummary, sg: &SpectralSummary, norm: Normalization) -> Result<Option<f64>> {
    check_dims(sf, sg)?;
    Ok(formulas::remark_constant(rational_to_f64(&m1(sf, sg, norm)), rational_to_f64(&m2(sf, sg))))
}

/// Outcome of `Cor(f,g) ≥ ¼·min_i I_i(f)` for antipodal `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChvatalCheck {
    #[serde(with = "rational_str")]
    pub cor: Rational,
    /// `¼·min_i I_i(f)`.
    #[serde(with = "rational_str")]
    pub rhs: Rational,
    /// `cor / rhs`; `None` when `rhs = 0` (the conjecture is then trivially satisfied).
    pub ratio: Option<f64>,
    pub trivially_satisfied: bool,
    /// Exact comparison.
    pub holds: bool,
}

impl ChvatalCheck {
    pub fn ratio_or_inf(&self) -> f64 {
        self.ratio.unwrap_or(f64::INFINITY)
    }
}

pub fn chvatal_check(
    sf: &SpectralSummary,
    sg: &SpectralSummary,
    cor: Rational,
    norm: Normalization,
) -> Result<ChvatalCheck> {
    check_dims(sf, sg)?;
    if !(sg.antipodal && sg.monotone) {
        return Err(Error::NotAntipodal);
    }
    let min_inf = sf.influences(norm).iter().min().copied().unwrap_or_else(|| Rational::from_integer(0));
    let rhs = min_inf / Rational::from_integer(4);
    let zero = Rational::from_integer(0);
    Ok(ChvatalCheck {
        cor,
        rhs,
        ratio: (rhs != zero).then(|| rational_to_f64(&(cor / rhs))),
        trivially_satisfied: rhs == zero,
        holds: cor >= rhs,
    })
}

/// `cor / (¼·min_i I_i(f))`; `+∞` when the minimum influence is zero.
pub fn chvatal_ratio(sf: &SpectralSummary, sg: &SpectralSummary, norm: Normalization) -> Result<f64> {
    let cor = correlation_of_summaries(sf, sg)?;
    Ok(chvatal_check(sf, sg, cor, norm)?.ratio_or_inf())
}

fn correlation_of_summaries(sf: &SpectralSummary, sg: &SpectralSummary) -> Result<Rational> {
    check_dims(sf, sg)?;
    // Plancherel on non-empty sets
    let num: i128 = sf
        .fourier
        .numerators()
        .iter()
        .zip(sg.fourier.numerators())
        .skip(1)
        .map(|(&a, &b)| a as i128 * b as i128)
        .sum();
    Ok(Rational::new(num, 1i128 << (2 * sf.n)))
}

/// One right-hand side with its ratio; the ratio is present only when `rhs > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub rhs: Option<f64>,
    pub ratio: Option<f64>,
}

impl BoundEntry {
    fn new(cor: f64, rhs: Option<f64>) -> Self {
        let ratio = rhs.filter(|&r| r > 0.0).map(|r| cor / r);
        Self { rhs, ratio }
    }
}

/// Every bound quantity for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairBoundReport {
    pub n: usize,
    pub f_hex: String,
    pub g_hex: String,
    pub normalization: Normalization,
    /// False when either function is not monotone: the bounds are still
    /// evaluated but no theorem covers them.
    pub supported_by_theorem: bool,
    pub g_antipodal: bool,
    #[serde(with = "rational_str")]
    pub cor: Rational,
    #[serde(with = "rational_str")]
    pub m1: Rational,
    #[serde(with = "rational_str")]
    pub m2: Rational,
    #[serde(with = "rational_pairs")]
    pub per_coord: Vec<(Rational, Rational)>,
    pub talagrand: BoundEntry,
    pub kms: BoundEntry,
    pub main_tal: BoundEntry,
    pub main_coord: BoundEntry,
    pub symm: Option<BoundEntry>,
    pub chvatal: Option<ChvatalCheck>,
    pub remark_constant: Option<f64>,
}

impl PairBoundReport {
    pub fn entry(&self, which: Inequality) -> Option<BoundEntry> {
        match which {
            Inequality::Talagrand => Some(self.talagrand),
            Inequality::Kms => Some(self.kms),
            Inequality::MainTal => Some(self.main_tal),
            Inequality::MainCoord => Some(self.main_coord),
            Inequality::Symm => self.symm,
            Inequality::Chvatal => self
                .chvatal
                .as_ref()
                .map(|c| BoundEntry { rhs: Some(rational_to_f64(&c.rhs)), ratio: c.ratio }),
        }
    }

    /// `cor / rhs` for the given inequality, when defined.
    pub fn ratio(&self, which: Inequality) -> Option<f64> {
        self.entry(which).and_then(|e| e.ratio)
    }
}

/// Evaluates every bound for the pair `(f, g)`.
pub fn analyze_pair(f: &BooleanFunction, g: &BooleanFunction, norm: Normalization) -> Result<PairBoundReport> {
    let sf = spectral_summary(f)?;
    let sg = spectral_summary(g)?;
    analyze_summaries(f, g, &sf, &sg, norm)
}

pub fn analyze_summaries(
    f: &BooleanFunction,
    g: &BooleanFunction,
    sf: &SpectralSummary,
    sg: &SpectralSummary,
    norm: Normalization,
) -> Result<PairBoundReport> {
    let cor = correlation(f, g)?;
    let corf = rational_to_f64(&cor);
    let antipodal = sg.antipodal && sg.monotone;
    Ok(PairBoundReport {
        n: f.n(),
        f_hex: f.to_hex(),
        g_hex: g.to_hex(),
        normalization: norm,
        supported_by_theorem: sf.monotone && sg.monotone,
        g_antipodal: antipodal,
        cor,
        m1: m1(sf, sg, norm),
        m2: m2(sf, sg),
        per_coord: per_coord(sf, sg, norm),
        talagrand: BoundEntry::new(corf, rhs_talagrand(sf, sg, norm)?),
        kms: BoundEntry::new(corf, rhs_kms(sf, sg, norm)?),
        main_tal: BoundEntry::new(corf, rhs_main_tal(sf, sg, norm)?),
        main_coord: BoundEntry::new(corf, rhs_main_coord(sf, sg, norm)?),
        symm: if antipodal { Some(BoundEntry::new(corf, rhs_symm(sf, sg, norm)?)) } else { None },
        chvatal: if antipodal { Some(chvatal_check(sf, sg, cor, norm)?) } else { None },
        remark_constant: remark_constant(sf, sg, norm)?,
    })
}

/// Serializes rationals as `"p/q"` strings (integers without the slash).
pub mod rational_str {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::scalar::Rational;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|_| serde::de::Error::custom(format!("invalid rational `{s}`")))
    }
}

mod rational_pairs {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::scalar::Rational;

    pub fn serialize<S: Serializer>(v: &[(Rational, Rational)], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for (a, b) in v {
            seq.serialize_element(&[a.to_string(), b.to_string()])?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(Rational, Rational)>, D::Error> {
        let raw: Vec<[String; 2]> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|[a, b]| {
                let pa = a.parse().map_err(|_| serde::de::Error::custom(format!("invalid rational `{a}`")))?;
                let pb = b.parse().map_err(|_| serde::de::Error::custom(format!("invalid rational `{b}`")))?;
                Ok((pa, pb))
            })
            .collect()
    }
}
