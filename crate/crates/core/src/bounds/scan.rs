//! Pair scans over monotone functions with per-inequality minima.
//!
//! Each function's integer spectra are computed once; the pair loop works
//! on word popcounts and integer numerators over `4^n`, converting to floats
//! only for the final formulas. Every float produced here is bit-identical
//! to the one [`super::analyze_pair`] reports for the same pair.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{formulas, Inequality};
use crate::boolean::{BooleanFunction, Normalization};
use crate::error::{Error, Result};
use crate::monotone::{self, run_flip_chain, MAX_ENUM_N};

/// Largest `n` for an exhaustive pair scan.
pub const MAX_EXHAUSTIVE_N: usize = 5;
/// Largest `n` for `--dump-pairs`.
pub const MAX_DUMP_N: usize = 3;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    Exhaustive,
    Sampled,
    Annealed,
}

impl std::str::FromStr for ScanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(ScanMode::Exhaustive),
            "sampled" => Ok(ScanMode::Sampled),
            "annealed" => Ok(ScanMode::Annealed),
            other => Err(Error::field("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    pub n: usize,
    pub mode: ScanMode,
    pub normalization: Normalization,
    /// Pair budget (exhaustive, sampled) or iteration budget per objective (annealed).
    pub budget: Option<u64>,
    pub seed: u64,
}

impl ScanParams {
    pub fn exhaustive(n: usize, normalization: Normalization) -> Self {
        Self { n, mode: ScanMode::Exhaustive, normalization, budget: None, seed: 0 }
    }
}

/// Lowest ratio seen for one inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumRecord {
    pub ratio: f64,
    pub f_hex: String,
    pub g_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CounterexampleKind {
    Harris,
    Chvatal,
}

/// A pair violating Harris positivity or the antipodal conjecture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub kind: CounterexampleKind,
    pub f_hex: String,
    pub g_hex: String,
    /// Exact correlation as `p/q`.
    pub cor: String,
    /// Exact right-hand side (`0` for Harris).
    pub rhs: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanCounts {
    pub functions: u64,
    pub antipodal_functions: u64,
    pub pairs_examined: u64,
    /// Pairs with antipodal `g` among those examined.
    pub antipodal_pairs: u64,
    pub harris_violations: u64,
    pub chvatal_violations: u64,
    /// Pairs with antipodal `g` and a zero-influence coordinate in `f`.
    pub chvatal_trivial: u64,
    /// Ratios skipped because a logarithm left its domain (paper normalization only).
    pub out_of_domain: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseReport {
    pub schema_version: u32,
    pub params: ScanParams,
    pub counts: ScanCounts,
    /// True when the budget stopped an exhaustive scan early.
    pub partial: bool,
    pub minima: BTreeMap<String, MinimumRecord>,
    pub counterexamples: Vec<Counterexample>,
    /// Starting ratio of an annealing run, keyed like `minima`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub start: BTreeMap<String, MinimumRecord>,
}

impl WorstCaseReport {
    pub fn minimum(&self, which: Inequality) -> Option<&MinimumRecord> {
        self.minima.get(which.name())
    }
}

/// Integer spectra of one function, `n ≤ 6`.
#[derive(Debug, Clone)]
pub(crate) struct FnData {
    pub table: u64,
    pub ones: u64,
    pub pivotal: Vec<i64>,
    pub second: Vec<i64>,
    pub min_pivotal: i64,
    pub antipodal: bool,
}

impl FnData {
    pub fn new(f: &BooleanFunction) -> Self {
        let pivotal: Vec<i64> = f.pivotal_counts().into_iter().map(|c| c as i64).collect();
        Self {
            table: f.as_u64().expect("n ≤ 6"),
            ones: f.count_ones(),
            min_pivotal: pivotal.iter().copied().min().unwrap_or(0),
            pivotal,
            second: f.second_derivative_sums(),
            antipodal: f.is_antipodal() && f.is_monotone(),
        }
    }
}

/// Correlation numerator and ratios of one pair, indexed like [`Inequality`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairEval {
    /// `Cor·4^n`.
    pub cor_num: i128,
    pub ratios: [Option<f64>; 6],
    /// Some rhs was `None` (log out of domain).
    pub out_of_domain: bool,
    pub chvatal_violation: bool,
    pub chvatal_trivial: bool,
}

pub(crate) fn slot(which: Inequality) -> usize {
    match which {
        Inequality::Talagrand => 0,
        Inequality::Kms => 1,
        Inequality::MainTal => 2,
        Inequality::MainCoord => 3,
        Inequality::Symm => 4,
        Inequality::Chvatal => 5,
    }
}

const ALL: [Inequality; 6] = [
    Inequality::Talagrand,
    Inequality::Kms,
    Inequality::MainTal,
    Inequality::MainCoord,
    Inequality::Symm,
    Inequality::Chvatal,
];

pub(crate) fn eval_pair(n: usize, f: &FnData, g: &FnData, norm: Normalization) -> PairEval {
    let both = (f.table & g.table).count_ones() as i128;
    let cor_num = (both << n) - f.ones as i128 * g.ones as i128;
    let size = (1u64 << n) as f64;
    let quad = size * size;
    // influence scale: inf = pivotal·scale / 2^n
    let scale: i64 = match norm {
        Normalization::Std => 1,
        Normalization::Paper => 2,
    };
    let cor = cor_num as f64 / quad;
    let mut out_of_domain = false;
    let mut ratio = |rhs: Option<f64>| match rhs {
        Some(r) if r > 0.0 => Some(cor / r),
        Some(_) => None,
        None => {
            out_of_domain = true;
            None
        }
    };

    let mut m1_num: i64 = 0;
    let mut m2_num: i64 = 0;
    let mut kms = Some(0.0);
    let mut coord = Some(0.0);
    for i in 0..n {
        let (pf, pg) = (f.pivotal[i] * scale, g.pivotal[i] * scale);
        let p_num = pf * pg;
        m1_num += p_num;
        let v_num: i64 = (0..n).map(|j| f.second[i * n + j] * g.second[i * n + j]).sum();
        m2_num += v_num;
        let term = formulas::kms_term(pf as f64 / size, pg as f64 / size);
        kms = kms.zip(term).map(|(a, b)| a + b);
        let term = formulas::main_coord_term(p_num as f64 / quad, v_num as f64 / quad);
        coord = coord.zip(term).map(|(a, b)| a + b);
    }
    let m1 = m1_num as f64 / quad;
    let tal = formulas::talagrand(m1);
    let main_tal = if m1_num == 0 || m2_num == 0 {
        formulas::main_tal(m1, 0.0)
    } else {
        let second = ((m1_num as i128 * m1_num as i128) as f64 / (quad * quad)) / (m2_num as f64 / quad).abs();
        formulas::main_tal(m1, 0.0).map(|first| first.min(second))
    };

    let mut ratios = [None; 6];
    ratios[0] = ratio(tal);
    ratios[1] = ratio(kms);
    ratios[2] = ratio(main_tal);
    ratios[3] = ratio(coord);
    let mut chvatal_violation = false;
    let mut chvatal_trivial = false;
    if g.antipodal {
        ratios[4] = ratio(formulas::symm(m1));
        // rhs = min_pivotal·scale / (4·2^n); compare 4^n-scaled numerators
        let rhs_scaled = (f.min_pivotal * scale) as i128 * (1i128 << n);
        chvatal_violation = 4 * cor_num < rhs_scaled;
        if rhs_scaled == 0 {
            chvatal_trivial = true;
        } else {
            ratios[5] = Some((4 * cor_num) as f64 / rhs_scaled as f64);
        }
    }
    PairEval { cor_num, ratios, out_of_domain, chvatal_violation, chvatal_trivial }
}

/// Minima accumulator; merge is associative and commutative, ties broken by
/// lowest `(i, j)` so reports do not depend on the worker count.
#[derive(Debug, Clone, Default)]
struct Acc {
    counts: ScanCounts,
    best: [Option<(f64, usize, usize)>; 6],
    counterexamples: Vec<(usize, usize, CounterexampleKind, i128)>,
}

fn better(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

impl Acc {
    fn push(&mut self, i: usize, j: usize, e: &PairEval, g_antipodal: bool) {
        let c = &mut self.counts;
        c.pairs_examined += 1;
        if e.cor_num < 0 {
            c.harris_violations += 1;
            self.counterexamples.push((i, j, CounterexampleKind::Harris, e.cor_num));
        }
        if g_antipodal {
            c.antipodal_pairs += 1;
            if e.chvatal_trivial {
                c.chvatal_trivial += 1;
            }
            if e.chvatal_violation {
                c.chvatal_violations += 1;
                self.counterexamples.push((i, j, CounterexampleKind::Chvatal, e.cor_num));
            }
        }
        if e.out_of_domain {
            c.out_of_domain += 1;
        }
        for (k, r) in e.ratios.iter().enumerate() {
            if let Some(r) = *r {
                let cand = (r, i, j);
                if self.best[k].is_none_or(|b| better(cand, b)) {
                    self.best[k] = Some(cand);
                }
            }
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        let (a, b) = (&mut self.counts, &other.counts);
        a.pairs_examined += b.pairs_examined;
        a.antipodal_pairs += b.antipodal_pairs;
        a.harris_violations += b.harris_violations;
        a.chvatal_violations += b.chvatal_violations;
        a.chvatal_trivial += b.chvatal_trivial;
        a.out_of_domain += b.out_of_domain;
        for k in 0..6 {
            self.best[k] = match (self.best[k], other.best[k]) {
                (Some(x), Some(y)) => Some(if better(y, x) { y } else { x }),
                (x, y) => x.or(y),
            };
        }
        self.counterexamples.extend(other.counterexamples);
        self
    }
}

fn rational_string(num: i128, den: i128) -> String {
    crate::scalar::Rational::new(num, den).to_string()
}

fn finish(
    params: &ScanParams,
    acc: Acc,
    functions: &[BooleanFunction],
    data: &[FnData],
    partial: bool,
) -> WorstCaseReport {
    let n = params.n;
    let hex = |i: usize| functions[i].to_hex();
    let mut minima = BTreeMap::new();
    for which in ALL {
        if let Some((ratio, i, j)) = acc.best[slot(which)] {
            minima.insert(which.name().to_string(), MinimumRecord { ratio, f_hex: hex(i), g_hex: hex(j) });
        }
    }
    let mut cx = acc.counterexamples;
    cx.sort_by_key(|&(i, j, ref kind, _)| (i, j, kind == &CounterexampleKind::Chvatal));
    let scale: i64 = match params.normalization {
        Normalization::Std => 1,
        Normalization::Paper => 2,
    };
    let counterexamples = cx
        .into_iter()
        .map(|(i, j, kind, cor_num)| {
            let rhs = match kind {
                CounterexampleKind::Harris => "0".to_string(),
                CounterexampleKind::Chvatal => rational_string((data[i].min_pivotal * scale) as i128, 4i128 << n),
            };
            Counterexample { kind, f_hex: hex(i), g_hex: hex(j), cor: rational_string(cor_num, 1i128 << (2 * n)), rhs }
        })
        .collect();
    let mut counts = acc.counts;
    counts.functions = data.len() as u64;
    counts.antipodal_functions = data.iter().filter(|d| d.antipodal).count() as u64;
    WorstCaseReport {
        schema_version: REPORT_SCHEMA_VERSION,
        params: params.clone(),
        counts,
        partial,
        minima,
        counterexamples,
        start: BTreeMap::new(),
    }
}

fn all_monotone(n: usize) -> Result<(Vec<BooleanFunction>, Vec<FnData>)> {
    let functions: Vec<BooleanFunction> = monotone::enumerate_monotone(n)?.collect();
    let data = functions.par_iter().map(FnData::new).collect();
    Ok((functions, data))
}

/// Runs a scan. Results do not depend on the size of the rayon pool the
/// call runs in.
pub fn scan_pairs(params: &ScanParams) -> Result<WorstCaseReport> {
    match params.mode {
        ScanMode::Exhaustive => scan_exhaustive(params),
        ScanMode::Sampled => scan_sampled(params),
        ScanMode::Annealed => scan_annealed(params),
    }
}

fn scan_exhaustive(params: &ScanParams) -> Result<WorstCaseReport> {
    let n = params.n;
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::TooLarge { what: "exhaustive pair scan", n, limit: MAX_EXHAUSTIVE_N });
    }
    let (functions, data) = all_monotone(n)?;
    let count = data.len() as u64;
    let total = count * count;
    let budget = params.budget.unwrap_or(total).min(total);
    let rows = budget.div_ceil(count) as usize;
    let norm = params.normalization;
    let acc = (0..rows)
        .into_par_iter()
        .map(|i| {
            let mut acc = Acc::default();
            let end = (budget - i as u64 * count).min(count) as usize;
            for (j, g) in data[..end].iter().enumerate() {
                let e = eval_pair(n, &data[i], g, norm);
                acc.push(i, j, &e, g.antipodal);
            }
            acc
        })
        .reduce(Acc::default, Acc::merge);
    Ok(finish(params, acc, &functions, &data, budget < total))
}

/// Default sampled budget.
pub const DEFAULT_SAMPLES: u64 = 100_000;

fn scan_sampled(params: &ScanParams) -> Result<WorstCaseReport> {
    let n = params.n;
    if n > MAX_ENUM_N {
        return Err(Error::TooLarge { what: "sampled pair scan", n, limit: MAX_ENUM_N });
    }
    let budget = params.budget.unwrap_or(DEFAULT_SAMPLES);
    let steps = monotone::default_steps(n);
    // pair k draws f and g from its own ChaCha stream
    let pairs: Vec<(BooleanFunction, BooleanFunction)> = (0..budget)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(k);
            let mut f = BooleanFunction::zeros(n).expect("n checked");
            run_flip_chain(&mut f, &mut rng, steps);
            let mut g = BooleanFunction::zeros(n).expect("n checked");
            run_flip_chain(&mut g, &mut rng, steps);
            (f, g)
        })
        .collect();
    let mut functions = Vec::with_capacity(2 * pairs.len());
    for (f, g) in pairs {
        functions.push(f);
        functions.push(g);
    }
    let data: Vec<FnData> = functions.par_iter().map(FnData::new).collect();
    let norm = params.normalization;
    let acc = (0..budget as usize)
        .into_par_iter()
        .map(|k| {
            let mut acc = Acc::default();
            let (i, j) = (2 * k, 2 * k + 1);
            acc.push(i, j, &eval_pair(n, &data[i], &data[j], norm), data[j].antipodal);
            acc
        })
        .reduce(Acc::default, Acc::merge);
    let mut report = finish(params, acc, &functions, &data, false);
    report.counts.functions = budget * 2;
    Ok(report)
}

/// Default annealing iterations per objective.
pub const DEFAULT_ANNEAL_ITERATIONS: u64 = 20_000;

fn scan_annealed(params: &ScanParams) -> Result<WorstCaseReport> {
    let iterations = params.budget.unwrap_or(DEFAULT_ANNEAL_ITERATIONS);
    let schedule = super::AnnealSchedule { iterations, ..super::AnnealSchedule::default() };
    let mut merged: Option<WorstCaseReport> = None;
    for (k, which) in ALL.into_iter().enumerate() {
        let r = super::anneal_search(params.n, which, &schedule, params.seed.wrapping_add(k as u64), params.normalization)?;
        merged = Some(match merged {
            None => r,
            Some(mut m) => {
                m.minima.extend(r.minima);
                m.start.extend(r.start);
                m.counts.pairs_examined += r.counts.pairs_examined;
                m.counterexamples.extend(r.counterexamples);
                m
            }
        });
    }
    let mut report = merged.expect("at least one objective");
    report.params = params.clone();
    Ok(report)
}

/// Writes one CSV row per ordered monotone pair (`n ≤ 3`).
pub fn dump_pairs_csv(n: usize, norm: Normalization, path: impl AsRef<Path>) -> Result<()> {
    if n > MAX_DUMP_N {
        return Err(Error::TooLarge { what: "pair dump", n, limit: MAX_DUMP_N });
    }
    let (functions, data) = all_monotone(n)?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["f_hex", "g_hex", "cor", "talagrand", "kms", "main_tal", "main_coord", "symm", "chvatal"])
        .map_err(csv_err)?;
    let fmt = |r: Option<f64>| r.map(|x| format!("{x:e}")).unwrap_or_default();
    for (i, f) in data.iter().enumerate() {
        for (j, g) in data.iter().enumerate() {
            let e = eval_pair(n, f, g, norm);
            let mut row = vec![functions[i].to_hex(), functions[j].to_hex(), rational_string(e.cor_num, 1i128 << (2 * n))];
            row.extend(e.ratios.iter().map(|&r| fmt(r)));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv: {other:?}")),
    }
}

/// Serializes a report as pretty JSON with a trailing newline.
pub fn write_report(report: &WorstCaseReport, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::analyze_pair;

    #[test]
    fn n2_exhaustive_counts() {
        let rep = scan_pairs(&ScanParams::exhaustive(2, Normalization::Std)).unwrap();
        assert_eq!(rep.counts.pairs_examined, 36);
        assert_eq!(rep.counts.harris_violations, 0);
        assert!(!rep.partial);
        // oracle: talagrand/kms 0.21164339756999317 at (8, e); main_tal 0.25 at (a, a)
        let tal = rep.minimum(Inequality::Talagrand).unwrap();
        assert_eq!((tal.f_hex.as_str(), tal.g_hex.as_str()), ("8", "e"));
        assert!((tal.ratio - 0.21164339756999317).abs() < 1e-12);
        assert!((rep.minimum(Inequality::MainTal).unwrap().ratio - 0.25).abs() < 1e-12);
    }

    #[test]
    fn n3_chvatal_scan_has_no_counterexamples() {
        let rep = scan_pairs(&ScanParams::exhaustive(3, Normalization::Std)).unwrap();
        assert_eq!(rep.counts.antipodal_functions, 4);
        assert_eq!(rep.counts.antipodal_pairs, 80);
        assert_eq!(rep.counts.chvatal_violations, 0);
        assert!(rep.counterexamples.is_empty());
    }

    #[test]
    fn paper_normalization_surfaces_chvatal_counterexamples() {
        let rep = scan_pairs(&ScanParams::exhaustive(2, Normalization::Paper)).unwrap();
        assert!(rep.counts.chvatal_violations > 0);
        assert!(rep.counterexamples.iter().any(|c| c.kind == CounterexampleKind::Chvatal && c.f_hex == "8"));
    }

    #[test]
    fn fast_path_matches_report_bitwise() {
        for norm in [Normalization::Std, Normalization::Paper] {
            let fs: Vec<_> = monotone::enumerate_monotone(3).unwrap().collect();
            for f in &fs {
                for g in &fs {
                    let e = eval_pair(3, &FnData::new(f), &FnData::new(g), norm);
                    let rep = analyze_pair(f, g, norm).unwrap();
                    for which in ALL {
                        assert_eq!(e.ratios[slot(which)], rep.ratio(which), "{which:?} {f:?} {g:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn budget_flags_partial() {
        let params = ScanParams { budget: Some(50), ..ScanParams::exhaustive(3, Normalization::Std) };
        let rep = scan_pairs(&params).unwrap();
        assert!(rep.partial);
        assert_eq!(rep.counts.pairs_examined, 50);
    }

    #[test]
    fn rejects_large_exhaustive() {
        assert!(matches!(
            scan_pairs(&ScanParams::exhaustive(6, Normalization::Std)),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn sampled_is_seed_deterministic() {
        let params = ScanParams {
            n: 4,
            mode: ScanMode::Sampled,
            normalization: Normalization::Std,
            budget: Some(300),
            seed: 17,
        };
        let a = scan_pairs(&params).unwrap();
        let b = scan_pairs(&params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.harris_violations, 0);
    }
}
