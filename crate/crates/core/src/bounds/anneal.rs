//! Simulated annealing over monotone pairs, minimizing one ratio.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scan::{
    eval_pair, slot, Counterexample, CounterexampleKind, FnData, MinimumRecord, ScanCounts, ScanMode, ScanParams,
    WorstCaseReport, REPORT_SCHEMA_VERSION,
};
use super::Inequality;
use crate::boolean::{BooleanFunction, Normalization};
use crate::error::{Error, Result};
use crate::monotone::{antipodal_neighbors, default_steps, monotone_neighbors, run_flip_chain, MAX_ENUM_N};
use crate::scalar::Rational;

/// Geometric cooling `T_k = t0·cooling^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub cooling: f64,
    pub iterations: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { t0: 0.05, cooling: 0.9995, iterations: 20_000 }
    }
}

struct State {
    f: BooleanFunction,
    g: BooleanFunction,
    fd: FnData,
    gd: FnData,
    energy: f64,
}

fn energy(n: usize, fd: &FnData, gd: &FnData, which: Inequality, norm: Normalization) -> f64 {
    eval_pair(n, fd, gd, norm).ratios[slot(which)].unwrap_or(f64::INFINITY)
}

fn random_antipodal<R: Rng>(n: usize, rng: &mut R) -> Result<BooleanFunction> {
    let mut g = BooleanFunction::dictator(n, rng.random_range(0..n))?;
    for _ in 0..(1u64 << n) {
        let nb = antipodal_neighbors(&g)?;
        if nb.is_empty() {
            break;
        }
        g = nb[rng.random_range(0..nb.len())].clone();
    }
    Ok(g)
}

/// Minimizes `cor/rhs` for `which`; pairs with undefined ratio have energy
/// `+∞`. The returned minimum is the best pair visited, so it never exceeds
/// the starting ratio.
pub fn anneal_search(
    n: usize,
    which: Inequality,
    schedule: &AnnealSchedule,
    seed: u64,
    norm: Normalization,
) -> Result<WorstCaseReport> {
    if n == 0 || n > MAX_ENUM_N {
        return Err(Error::InvalidArgument(format!("annealing needs 1 ≤ n ≤ {MAX_ENUM_N}, got {n}")));
    }
    if !(schedule.t0 > 0.0 && schedule.cooling > 0.0 && schedule.cooling <= 1.0) {
        return Err(Error::field("schedule", "need t0 > 0 and 0 < cooling ≤ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = BooleanFunction::zeros(n)?;
    run_flip_chain(&mut f, &mut rng, default_steps(n));
    let g = if which.needs_antipodal() {
        random_antipodal(n, &mut rng)?
    } else {
        let mut g = BooleanFunction::zeros(n)?;
        run_flip_chain(&mut g, &mut rng, default_steps(n));
        g
    };
    let (fd, gd) = (FnData::new(&f), FnData::new(&g));
    let e0 = energy(n, &fd, &gd, which, norm);
    let mut cur = State { f, g, fd, gd, energy: e0 };
    let mut best = (cur.energy, cur.f.clone(), cur.g.clone());
    let start = best.clone();

    let mut counts = ScanCounts::default();
    let mut cx: BTreeSet<(BooleanFunction, BooleanFunction, bool)> = BTreeSet::new();
    let mut record = |fd: &FnData, gd: &FnData, f: &BooleanFunction, g: &BooleanFunction, counts: &mut ScanCounts| {
        let e = eval_pair(n, fd, gd, norm);
        counts.pairs_examined += 1;
        if e.cor_num < 0 && cx.insert((f.clone(), g.clone(), false)) {
            counts.harris_violations += 1;
        }
        if gd.antipodal {
            counts.antipodal_pairs += 1;
            if e.chvatal_violation && cx.insert((f.clone(), g.clone(), true)) {
                counts.chvatal_violations += 1;
            }
        }
    };
    record(&cur.fd, &cur.gd, &cur.f, &cur.g, &mut counts);

    let mut temp = schedule.t0;
    for _ in 0..schedule.iterations {
        let move_f = rng.random_bool(0.5);
        let nb = if move_f {
            monotone_neighbors(&cur.f)?
        } else if which.needs_antipodal() {
            antipodal_neighbors(&cur.g)?
        } else {
            monotone_neighbors(&cur.g)?
        };
        if !nb.is_empty() {
            let cand = nb[rng.random_range(0..nb.len())].clone();
            let cd = FnData::new(&cand);
            let (fd, gd) = if move_f { (&cd, &cur.gd) } else { (&cur.fd, &cd) };
            let e = energy(n, fd, gd, which, norm);
            {
                let (cf, cg) = if move_f { (&cand, &cur.g) } else { (&cur.f, &cand) };
                record(fd, gd, cf, cg, &mut counts);
            }
            let u: f64 = rng.random();
            let accept = if e <= cur.energy || cur.energy.is_infinite() {
                true
            } else {
                u < (-(e - cur.energy) / temp).exp()
            };
            if accept {
                if move_f {
                    cur.f = cand;
                    cur.fd = cd;
                } else {
                    cur.g = cand;
                    cur.gd = cd;
                }
                cur.energy = e;
                if e < best.0 {
                    best = (e, cur.f.clone(), cur.g.clone());
                }
            }
        }
        temp *= schedule.cooling;
    }

    let rec = |(ratio, f, g): &(f64, BooleanFunction, BooleanFunction)| {
        ratio.is_finite().then(|| MinimumRecord { ratio: *ratio, f_hex: f.to_hex(), g_hex: g.to_hex() })
    };
    let mut minima = BTreeMap::new();
    let mut start_map = BTreeMap::new();
    if let Some(r) = rec(&best) {
        minima.insert(which.name().to_string(), r);
    }
    if let Some(r) = rec(&start) {
        start_map.insert(which.name().to_string(), r);
    }
    let size = 1i128 << n;
    let counterexamples = cx
        .into_iter()
        .map(|(f, g, chv)| {
            let cor = crate::boolean::correlation(&f, &g).expect("same n");
            let rhs = if chv {
                let min = f.pivotal_counts().into_iter().min().unwrap_or(0) as i128;
                let scale = if norm == Normalization::Paper { 2 } else { 1 };
                Rational::new(min * scale, 4 * size).to_string()
            } else {
                "0".to_string()
            };
            Counterexample {
                kind: if chv { CounterexampleKind::Chvatal } else { CounterexampleKind::Harris },
                f_hex: f.to_hex(),
                g_hex: g.to_hex(),
                cor: cor.to_string(),
                rhs,
            }
        })
        .collect();
    counts.functions = 0;
    Ok(WorstCaseReport {
        schema_version: REPORT_SCHEMA_VERSION,
        params: ScanParams { n, mode: ScanMode::Annealed, normalization: norm, budget: Some(schedule.iterations), seed },
        counts,
        partial: false,
        minima,
        counterexamples,
        start: start_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::scan::{scan_pairs, ScanParams};

    #[test]
    fn n2_finds_exhaustive_minimum() {
        let exhaustive = scan_pairs(&ScanParams::exhaustive(2, Normalization::Std)).unwrap();
        let schedule = AnnealSchedule { iterations: 2_000, ..AnnealSchedule::default() };
        for which in Inequality::MONOTONE_PAIR {
            let rep = anneal_search(2, which, &schedule, 5, Normalization::Std).unwrap();
            assert_eq!(rep.minimum(which).unwrap().ratio, exhaustive.minimum(which).unwrap().ratio, "{which:?}");
        }
    }

    #[test]
    fn never_worse_than_start_and_deterministic() {
        let schedule = AnnealSchedule { iterations: 3_000, ..AnnealSchedule::default() };
        let a = anneal_search(4, Inequality::MainTal, &schedule, 11, Normalization::Std).unwrap();
        let b = anneal_search(4, Inequality::MainTal, &schedule, 11, Normalization::Std).unwrap();
        assert_eq!(a, b);
        if let Some(s) = a.start.get("main_tal") {
            assert!(a.minima["main_tal"].ratio <= s.ratio);
        }
    }

    #[test]
    fn antipodal_objective_keeps_g_antipodal() {
        let schedule = AnnealSchedule { iterations: 1_000, ..AnnealSchedule::default() };
        let rep = anneal_search(3, Inequality::Chvatal, &schedule, 2, Normalization::Std).unwrap();
        let m = &rep.minima["chvatal"];
        let g = BooleanFunction::from_hex(3, &m.g_hex).unwrap();
        assert!(g.is_antipodal() && g.is_monotone());
        assert!(m.ratio >= 1.0);
    }
}
