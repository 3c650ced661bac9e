//! Randomized suites over the level checks. Case `i` draws from its own
//! ChaCha stream of the master seed, so any case can be replayed alone.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{check_geomineq, check_level2, check_lvl21, check_transport_1d, BoxField, DensitySpec, Margin};
use crate::boolean::BooleanFunction;
use crate::error::{Error, Result};
use crate::gaussian::{functional_to_json, GaussianFunctional};
use crate::monotone::enumerate_monotone;
use crate::process::Verdict;

pub const LEVEL_SCHEMA_VERSION: u32 = 1;
/// Violating cases kept in full in a report.
const MAX_RECORDED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelSuite {
    Lvl21,
    Transport,
    Geom,
    Level13,
}

impl LevelSuite {
    pub fn name(self) -> &'static str {
        match self {
            LevelSuite::Lvl21 => "lvl21",
            LevelSuite::Transport => "transport",
            LevelSuite::Geom => "geom",
            LevelSuite::Level13 => "level13",
        }
    }

    /// Case counts used by the acceptance runs.
    pub fn default_cases(self) -> u64 {
        match self {
            LevelSuite::Lvl21 | LevelSuite::Transport => 10_000,
            LevelSuite::Geom | LevelSuite::Level13 => 1_000,
        }
    }
}

impl std::str::FromStr for LevelSuite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lvl21" => Ok(LevelSuite::Lvl21),
            "transport" => Ok(LevelSuite::Transport),
            "geom" => Ok(LevelSuite::Geom),
            "level13" => Ok(LevelSuite::Level13),
            _ => Err(Error::field("suite", format!("unknown suite `{s}` (lvl21, transport, geom, level13)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub index: u64,
    pub margin: Margin,
    pub input: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSuiteReport {
    pub schema_version: u32,
    pub suite: LevelSuite,
    pub seed: u64,
    pub tol: f64,
    pub cases: u64,
    /// Cases where the inequality was evaluated.
    pub checked: u64,
    /// Cases outside the inequality's hypotheses (reported, not asserted).
    pub degenerate: u64,
    pub violations: u64,
    /// Smallest `margin / scale`.
    pub worst_relative_margin: f64,
    pub worst_case: Option<CaseRecord>,
    pub violating_cases: Vec<CaseRecord>,
    /// Empirical sharpness probes, e.g. the largest constant the observed
    /// cases would need.
    pub probes: BTreeMap<String, f64>,
    pub verdict: Verdict,
}

fn case_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A random covariance `AAᵀ + cI`.
fn random_covariance(rng: &mut impl Rng, d: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-0.8..0.8)).collect()).collect();
    let c = rng.random_range(0.2..1.0);
    (0..d)
        .map(|i| (0..d).map(|j| (0..d).map(|l| a[i][l] * a[j][l]).sum::<f64>() + if i == j { c } else { 0.0 }).collect())
        .collect()
}

fn random_cuts(rng: &mut impl Rng, d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|_| {
            let count = rng.random_range(0..=2usize);
            (0..count).map(|_| rng.random_range(-1.5..1.5)).collect()
        })
        .collect()
}

/// Single Gaussians, mixtures of 2–3 components and piecewise-constant
/// reweightings, one third each.
pub fn random_density(rng: &mut impl Rng, d: usize) -> DensitySpec {
    match rng.random_range(0..3u8) {
        0 => {
            let mean = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            DensitySpec::gaussian(mean, random_covariance(rng, d)).expect("valid by construction")
        }
        1 => {
            let comps = rng.random_range(2..=3usize);
            let raw: Vec<f64> = (0..comps).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let rest: f64 = weights[1..].iter().sum();
            weights[0] = 1.0 - rest;
            let means = (0..comps).map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
            let covs = (0..comps).map(|_| random_covariance(rng, d)).collect();
            DensitySpec::mixture(weights, means, covs).expect("valid by construction")
        }
        _ => {
            let cuts = random_cuts(rng, d);
            let cells: usize = cuts.iter().map(|b| b.len() + 1).product();
            let mut levels: Vec<f64> =
                (0..cells).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.05..3.0) }).collect();
            if levels.iter().all(|&c| c == 0.0) {
                levels[0] = 1.0;
            }
            DensitySpec::reweighted(cuts, levels).expect("valid by construction")
        }
    }
}

fn random_field(rng: &mut impl Rng, cuts: &[Vec<f64>], k: usize) -> BoxField {
    let cells: usize = cuts.iter().map(|b| b.len() + 1).product();
    let values = (0..cells)
        .map(|_| (0..k).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..2.0) }).collect())
        .collect();
    BoxField::new(cuts.to_vec(), values).expect("valid by construction")
}

fn random_halfspace(rng: &mut impl Rng, n: usize) -> GaussianFunctional<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    let theta = raw.iter().map(|x| x / norm).collect();
    GaussianFunctional::halfspace(theta, rng.random_range(-2.0..2.0)).expect("valid by construction")
}

/// Outcome of a single case: `None` when degenerate.
struct Outcome {
    margin: Option<Margin>,
    input: Value,
    probes: Vec<(&'static str, f64)>,
}

fn lvl21_case(seed: u64, index: u64) -> Result<Outcome> {
    let mut rng = case_rng(seed, index);
    let d = rng.random_range(1..=3usize);
    let (x, y) = (random_density(&mut rng, d), random_density(&mut rng, d));
    let c = check_lvl21(&x, &y)?;
    let kl = c.kl_x + c.kl_y;
    let mut probes = Vec::new();
    if kl > 1e-12 {
        probes.push(("needed_constant", -c.trace / kl));
    }
    if c.kl_x * c.kl_y > 1e-12 {
        probes.push(("trace_over_kl_product", c.trace / (c.kl_x * c.kl_y)));
    }
    Ok(Outcome { margin: Some(c.margin), input: json!({ "x": x, "y": y, "kl_x": c.kl_x, "kl_y": c.kl_y }), probes })
}

fn transport_case(seed: u64, index: u64) -> Result<Outcome> {
    let mut rng = case_rng(seed, index);
    // every tenth case is a pure mean shift, where equality holds
    let x = if index % 10 == 0 { DensitySpec::normal(rng.random_range(-2.0..2.0), 1.0)? } else { random_density(&mut rng, 1) };
    let c = check_transport_1d(&x)?;
    let mut probes = Vec::new();
    if c.kl > 1e-12 {
        probes.push(("w2_over_two_kl", c.w2_sq / (2.0 * c.kl)));
    }
    Ok(Outcome { margin: Some(c.margin), input: json!({ "x": x, "w2_sq": c.w2_sq, "kl": c.kl }), probes })
}

fn geom_case(seed: u64, index: u64) -> Result<Outcome> {
    let mut rng = case_rng(seed, index);
    let n = rng.random_range(1..=3usize);
    let k = rng.random_range(1..=3usize);
    let cuts = random_cuts(&mut rng, n);
    let (v, u) = (random_field(&mut rng, &cuts, k), random_field(&mut rng, &cuts, k));
    let c = check_geomineq(&v, &u)?;
    let mut probes = Vec::new();
    let log = if c.epsilon > 0.0 { (c.v_sq * c.u_sq / (c.epsilon * c.epsilon)).ln() } else { 0.0 };
    if c.epsilon > 0.0 && log > 1e-12 {
        probes.push(("needed_constant", -c.margin.lhs / (c.epsilon * log)));
    }
    Ok(Outcome { margin: Some(c.margin), input: json!({ "v": v, "u": u, "epsilon": c.epsilon }), probes })
}

/// Fixed level 1:3 cases: the half-space grid `a, b ∈ {−1, 0, 1}`,
/// `⟨θ, η⟩ ∈ {0.1, …, 1}`, then every pair of monotone sign-composed
/// functions with `n ≤ 3`.
pub fn level13_fixed_cases() -> Vec<(GaussianFunctional<f64>, GaussianFunctional<f64>)> {
    let mut out = Vec::new();
    for a in [-1.0, 0.0, 1.0] {
        for b in [-1.0, 0.0, 1.0] {
            for step in 1..=10 {
                let c = f64::from(step) / 10.0;
                let f = GaussianFunctional::halfspace(vec![1.0, 0.0], a).expect("unit");
                let g = GaussianFunctional::halfspace(vec![c, (1.0 - c * c).max(0.0).sqrt()], b).expect("unit");
                out.push((f, g));
            }
        }
    }
    for n in 1..=3 {
        let mut fs = Vec::new();
        let mut cursor = enumerate_monotone(n).expect("small n");
        while let Some(t) = cursor.next_table() {
            fs.push(GaussianFunctional::sign(BooleanFunction::from_u64(n, t).expect("table")).expect("sign"));
        }
        for f in &fs {
            for g in &fs {
                out.push((f.clone(), g.clone()));
            }
        }
    }
    out
}

fn level13_outcome(f: &GaussianFunctional<f64>, g: &GaussianFunctional<f64>) -> Result<Outcome> {
    let c = check_level2(f, g)?;
    let mut probes = Vec::new();
    if let Some(m) = c.margin {
        let log = (std::f64::consts::E * (c.var_f * c.var_g).sqrt() / c.q1).ln();
        probes.push(("needed_constant", -m.lhs / (c.q1 * log)));
    }
    let input = json!({
        "f": serde_json::from_str::<Value>(&functional_to_json(f))?,
        "g": serde_json::from_str::<Value>(&functional_to_json(g))?,
        "q1": c.q1,
        "lhs": c.lhs,
    });
    Ok(Outcome { margin: c.margin, input, probes })
}

/// Runs `cases` random cases of `suite` (for `level13`: the fixed cases
/// followed by `cases` random half-space pairs in dimension 2–4).
pub fn run_suite(suite: LevelSuite, cases: u64, seed: u64, tol: f64) -> Result<LevelSuiteReport> {
    let outcomes: Vec<Result<Outcome>> = match suite {
        LevelSuite::Lvl21 => (0..cases).into_par_iter().map(|i| lvl21_case(seed, i)).collect(),
        LevelSuite::Transport => (0..cases).into_par_iter().map(|i| transport_case(seed, i)).collect(),
        LevelSuite::Geom => (0..cases).into_par_iter().map(|i| geom_case(seed, i)).collect(),
        LevelSuite::Level13 => {
            let mut pairs = level13_fixed_cases();
            pairs.extend((0..cases).map(|i| {
                let mut rng = case_rng(seed, i);
                let n = rng.random_range(2..=4usize);
                (random_halfspace(&mut rng, n), random_halfspace(&mut rng, n))
            }));
            pairs.par_iter().map(|(f, g)| level13_outcome(f, g)).collect()
        }
    };
    let total = outcomes.len() as u64;
    let mut report = LevelSuiteReport {
        schema_version: LEVEL_SCHEMA_VERSION,
        suite,
        seed,
        tol,
        cases: total,
        checked: 0,
        degenerate: 0,
        violations: 0,
        worst_relative_margin: f64::INFINITY,
        worst_case: None,
        violating_cases: Vec::new(),
        probes: BTreeMap::new(),
        verdict: Verdict::Pass,
    };
    for (index, outcome) in outcomes.into_iter().enumerate() {
        let o = outcome?;
        for (name, v) in o.probes {
            let slot = report.probes.entry(format!("max_{name}")).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(v);
        }
        let Some(m) = o.margin else {
            report.degenerate += 1;
            continue;
        };
        report.checked += 1;
        let record = || CaseRecord { index: index as u64, margin: m, input: o.input.clone() };
        if m.relative() < report.worst_relative_margin {
            report.worst_relative_margin = m.relative();
            report.worst_case = Some(record());
        }
        if !m.holds(tol) {
            report.violations += 1;
            if report.violating_cases.len() < MAX_RECORDED {
                report.violating_cases.push(record());
            }
        }
    }
    if report.violations > 0 {
        report.verdict = Verdict::Fail;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass_and_are_deterministic() {
        for suite in [LevelSuite::Lvl21, LevelSuite::Transport, LevelSuite::Geom, LevelSuite::Level13] {
            let a = run_suite(suite, 40, 3, 1e-6).unwrap();
            assert_eq!(a.violations, 0, "{suite:?}");
            assert!(a.checked > 0);
            let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
            let b = pool.install(|| run_suite(suite, 40, 3, 1e-6)).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }

    #[test]
    fn level13_counts_degenerate_pairs() {
        let r = run_suite(LevelSuite::Level13, 0, 0, 1e-6).unwrap();
        assert_eq!(r.cases, 90 + 9 + 36 + 400);
        // constants have Q¹ = 0
        assert!(r.degenerate > 0);
        assert_eq!(r.checked + r.degenerate, r.cases);
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!("level13".parse::<LevelSuite>().unwrap(), LevelSuite::Level13);
        assert!("nope".parse::<LevelSuite>().unwrap_err().to_string().contains("suite"));
    }
}
