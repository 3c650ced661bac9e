//! The Gronwall-type comparison for `p'' ≥ −p' − K·p·log(e/p)`: integrate
//! the equality case with RK4 and check `p(t) ≥ p(0)/2` up to the horizon
//! `min(1/(4√(K·log(2e/p₀))), p₀/(4|p'(0)|))`, on extremal trajectories and
//! on perturbations that still satisfy the differential inequality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::Verdict;
use crate::scalar::Real;

pub const GRONWALL_SCHEMA_VERSION: u32 = 1;
/// `p` is clipped here so `log(e/p)` stays finite.
pub const P_FLOOR: f64 = 1e-12;
/// Conclusion tolerance on `p − p₀/2`.
pub const CONCLUSION_TOL: f64 = 1e-8;
/// Relative tolerance of the discrete hypothesis check.
pub const HYPOTHESIS_TOL: f64 = 1e-6;
/// Trajectories run to this multiple of the horizon (capped at `MAX_TIME`)
/// so the first crossing of `p₀/2` can be located past it.
pub const HORIZON_MULTIPLE: f64 = 4.0;
pub const MAX_TIME: f64 = 10.0;
/// Relative amplitude of the `sin²(ωt)` perturbation.
pub const PERTURBATION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Extremal,
    Perturbed,
}

/// Values of `p` and `p'` on `t_j = j·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub k: T,
    pub p0: T,
    pub dp0: T,
    pub dt: T,
    pub p: Vec<T>,
    pub dp: Vec<T>,
    pub provenance: Provenance,
    /// Integration stopped at the floor `p ≤ 1e−12`.
    pub truncated: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn time(&self, j: usize) -> T {
        self.dt * T::from_usize_lossy(j)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// `x·log(e/x)`.
fn entropy_term<T: Real>(x: T) -> T {
    x * (T::one() - x.ln())
}

/// `−p' − K·p·log(e/p)`.
fn rhs<T: Real>(k: T, p: T, dp: T) -> T {
    -dp - k * entropy_term(p)
}

/// `min(1/(4√(K·log(2e/p₀))), p₀/(4|p'(0)|))`; infinite terms are skipped.
pub fn horizon<T: Real>(k: T, p0: T, dp0: T) -> T {
    let two_e = T::lit(2.0 * std::f64::consts::E);
    let a = T::one() / (T::lit(4.0) * (k * (two_e / p0).ln()).sqrt());
    let b = if dp0 == T::zero() { T::infinity() } else { p0 / (T::lit(4.0) * dp0.abs()) };
    a.min(b)
}

/// RK4 for the equality `p'' = −p' − K·p·log(e/p)` on `[0, t_end]`.
pub fn integrate_extremal<T: Real>(k: T, p0: T, dp0: T, dt: T, t_end: T) -> Result<Trajectory<T>> {
    if !(p0 > T::zero() && p0 < T::one()) {
        return Err(Error::field("p0", "p0 must lie in (0, 1)"));
    }
    if !(k >= T::zero()) || !(dt > T::zero()) || !(t_end >= T::zero()) {
        return Err(Error::InvalidArgument("need K ≥ 0, dt > 0 and T ≥ 0".into()));
    }
    let steps = (t_end / dt).round().to_usize().unwrap_or(0);
    let floor = T::lit(P_FLOOR);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);
    let (mut p, mut q) = (p0, dp0);
    let mut traj = Trajectory {
        k,
        p0,
        dp0,
        dt,
        p: Vec::with_capacity(steps + 1),
        dp: Vec::with_capacity(steps + 1),
        provenance: Provenance::Extremal,
        truncated: false,
    };
    traj.p.push(p);
    traj.dp.push(q);
    // the intermediate stages must not leave the domain of log either
    let f = |p: T, q: T| rhs(k, p.max(floor), q);
    for _ in 0..steps {
        let (k1p, k1q) = (q, f(p, q));
        let (k2p, k2q) = (q + half * dt * k1q, f(p + half * dt * k1p, q + half * dt * k1q));
        let (k3p, k3q) = (q + half * dt * k2q, f(p + half * dt * k2p, q + half * dt * k2q));
        let (k4p, k4q) = (q + dt * k3q, f(p + dt * k3p, q + dt * k3q));
        p = p + dt * sixth * (k1p + two * k2p + two * k3p + k4p);
        q = q + dt * sixth * (k1q + two * k2q + two * k3q + k4q);
        if !(p > floor) || !p.is_finite() || !q.is_finite() {
            traj.truncated = true;
            break;
        }
        traj.p.push(p);
        traj.dp.push(q);
    }
    Ok(traj)
}

/// `p̃ = p + 0.01·p₀·sin²(ωt)` with its exact derivative.
pub fn perturb<T: Real>(base: &Trajectory<T>, omega: T) -> Trajectory<T> {
    let amp = T::lit(PERTURBATION) * base.p0;
    let mut out = base.clone();
    out.provenance = Provenance::Perturbed;
    for j in 0..base.len() {
        let t = base.time(j);
        let s = (omega * t).sin();
        out.p[j] = base.p[j] + amp * s * s;
        out.dp[j] = base.dp[j] + amp * omega * (T::lit(2.0) * omega * t).sin();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConclusionStatus {
    /// Hypothesis held on the horizon; the conclusion was asserted.
    Checked,
    /// The discrete hypothesis check failed; nothing is asserted.
    Rejected,
    /// The trajectory hit the floor before the horizon.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConclusionReport {
    pub horizon: f64,
    pub status: ConclusionStatus,
    /// Smallest `(p'' + p' + K·p·log(e/p)) / scale` on the horizon, with
    /// five-point differences; about zero for extremal trajectories.
    pub hypothesis_worst: f64,
    /// Largest `|p'' + p' + K·p·log(e/p)| / scale`.
    pub hypothesis_max_abs: f64,
    /// `min (p(t) − p₀/2)` over grid points `t ≤ horizon`.
    pub worst_margin: f64,
    pub first_crossing: Option<f64>,
    /// `first_crossing / horizon`.
    pub crossing_ratio: Option<f64>,
    pub holds: bool,
}

/// Checks the discrete hypothesis on `[0, horizon]`, then `p ≥ p₀/2 − 1e−8`
/// there, and locates the first crossing of `p₀/2` (linear interpolation).
pub fn verify_conclusion<T: Real>(traj: &Trajectory<T>) -> ConclusionReport {
    let (k, dt) = (traj.k.to_f64_lossy(), traj.dt.to_f64_lossy());
    let p: Vec<f64> = traj.p.iter().map(|v| v.to_f64_lossy()).collect();
    let p0 = traj.p0.to_f64_lossy();
    let h = horizon(k, p0, traj.dp0.to_f64_lossy());
    let end = ((h / dt).floor() as usize).min(p.len().saturating_sub(1));
    let reached = (p.len() - 1) as f64 * dt >= h || !traj.truncated;

    let (mut worst, mut max_abs) = (f64::INFINITY, 0.0_f64);
    for j in 2..(end + 1).min(p.len().saturating_sub(2)) {
        let d1 = (p[j - 2] - 8.0 * p[j - 1] + 8.0 * p[j + 1] - p[j + 2]) / (12.0 * dt);
        let d2 = (-p[j - 2] + 16.0 * p[j - 1] - 30.0 * p[j] + 16.0 * p[j + 1] - p[j + 2]) / (12.0 * dt * dt);
        let drift = k * entropy_term(p[j]);
        let r = d2 + d1 + drift;
        let scale = d2.abs().max(d1.abs()).max(drift.abs()).max(1.0);
        worst = worst.min(r / scale);
        max_abs = max_abs.max((r / scale).abs());
    }
    if !worst.is_finite() {
        worst = 0.0;
    }
    let worst_margin = p[..=end].iter().map(|&v| v - 0.5 * p0).fold(f64::INFINITY, f64::min);
    let first_crossing = p.windows(2).enumerate().find(|(_, w)| w[1] < 0.5 * p0).map(|(j, w)| {
        let frac = (w[0] - 0.5 * p0) / (w[0] - w[1]);
        (j as f64 + frac) * dt
    });
    let status = if !reached {
        ConclusionStatus::Truncated
    } else if worst < -HYPOTHESIS_TOL {
        ConclusionStatus::Rejected
    } else {
        ConclusionStatus::Checked
    };
    ConclusionReport {
        horizon: h,
        status,
        hypothesis_worst: worst,
        hypothesis_max_abs: max_abs,
        worst_margin,
        first_crossing,
        crossing_ratio: first_crossing.map(|c| c / h),
        holds: status != ConclusionStatus::Checked || worst_margin >= -CONCLUSION_TOL,
    }
}

/// Step-halving check: the max error over the coarse grid of runs at `dt`,
/// `dt/2`, `dt/4`; the ratio of successive differences tends to 16.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub k: f64,
    pub p0: f64,
    pub dp0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub ratio: f64,
}

pub fn richardson_ratio(k: f64, p0: f64, dp0: f64, dt: f64, t_end: f64) -> Result<ConvergenceRecord> {
    let runs: Vec<Trajectory<f64>> =
        [1usize, 2, 4].iter().map(|&m| integrate_extremal(k, p0, dp0, dt / m as f64, t_end)).collect::<Result<_>>()?;
    if runs.iter().any(|r| r.truncated) {
        return Err(Error::Numerical("convergence run hit the floor".into()));
    }
    let coarse = runs[0].len();
    let diff = |a: &Trajectory<f64>, b: &Trajectory<f64>, ma: usize, mb: usize| {
        (0..coarse).map(|j| (a.p[j * ma] - b.p[j * mb]).abs()).fold(0.0, f64::max)
    };
    let ratio = diff(&runs[0], &runs[1], 1, 2) / diff(&runs[1], &runs[2], 2, 4);
    Ok(ConvergenceRecord { k, p0, dp0, dt, t_end, ratio })
}

/// Coarse step for the convergence check: a fixed fraction of the fastest
/// time scale `1/√(K·log(e/p₀) + 1)`, run over eight such scales.
pub fn convergence_check(k: f64, p0: f64, dp0: f64) -> Result<ConvergenceRecord> {
    let tau = 1.0 / (k * (std::f64::consts::E / p0).ln() + 1.0).sqrt();
    let t_end = (8.0 * tau).min(horizon(k, p0, dp0));
    richardson_ratio(k, p0, dp0, t_end / 16.0, t_end)
}

/// Corner tuples with `p'(0) ∈ {0, −p₀}`. With `p'(0) = −10p₀` the horizon
/// is shorter than the time scale on which RK4 errors rise above round-off,
/// so the step-halving ratio there measures rounding, not the method.
pub fn convergence_tuples() -> Vec<(f64, f64, f64)> {
    SweepGrid { slopes: vec![0.0, -1.0], ..SweepGrid::corners() }.tuples()
}

/// Parameter tuples `(K, p₀, p'(0))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ks: Vec<f64>,
    pub p0s: Vec<f64>,
    /// `p'(0) = c·p₀` for each `c`.
    pub slopes: Vec<f64>,
}

impl SweepGrid {
    /// The corner grid `K ∈ {0.1, 1, 10, e⁸}`, `p₀ ∈ {0.9, 0.5, 0.1, 0.01}`,
    /// `p'(0) ∈ {0, −p₀, −10p₀}`.
    pub fn corners() -> Self {
        Self { ks: vec![0.1, 1.0, 10.0, 8.0_f64.exp()], p0s: vec![0.9, 0.5, 0.1, 0.01], slopes: vec![0.0, -1.0, -10.0] }
    }

    /// 10 × 10 × 10 tuples containing the corner grid.
    pub fn default_sweep() -> Self {
        Self {
            ks: vec![0.01, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1000.0, 8.0_f64.exp()],
            p0s: vec![0.99, 0.9, 0.75, 0.5, 0.3, 0.1, 0.05, 0.02, 0.01, 0.001],
            slopes: vec![0.0, -0.05, -0.1, -0.25, -0.5, -1.0, -2.0, -4.0, -7.0, -10.0],
        }
    }

    pub fn tuples(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &k in &self.ks {
            for &p0 in &self.p0s {
                for &c in &self.slopes {
                    out.push((k, p0, c * p0));
                }
            }
        }
        out
    }
}

impl std::str::FromStr for SweepGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Self::default_sweep()),
            "corners" => Ok(Self::corners()),
            _ => Err(Error::field("sweep", format!("unknown sweep `{s}` (default, corners)"))),
        }
    }
}

/// One row of the sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallRow {
    pub k: f64,
    pub p0: f64,
    pub dp0: f64,
    pub provenance: Provenance,
    /// Perturbation frequency (`None` for extremal rows).
    pub omega: Option<f64>,
    #[serde(flatten)]
    pub conclusion: ConclusionReport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub total: u64,
    pub checked: u64,
    pub rejected: u64,
    pub truncated: u64,
    pub violations: u64,
}

impl RowCounts {
    fn add(&mut self, r: &ConclusionReport) {
        self.total += 1;
        match r.status {
            ConclusionStatus::Checked => self.checked += 1,
            ConclusionStatus::Rejected => self.rejected += 1,
            ConclusionStatus::Truncated => self.truncated += 1,
        }
        if !r.holds {
            self.violations += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub schema_version: u32,
    pub dt: f64,
    pub seed: u64,
    pub grid: SweepGrid,
    pub extremal: RowCounts,
    pub perturbed: RowCounts,
    /// Largest `|residual|/scale` of the hypothesis on extremal rows.
    pub extremal_equality_max: f64,
    /// Smallest `first crossing / horizon` among rows that cross.
    pub min_crossing_ratio: Option<f64>,
    pub convergence: Vec<ConvergenceRecord>,
    pub convergence_ok: bool,
    pub rows: Vec<GronwallRow>,
    pub verdict: Verdict,
}

/// Accepted band for the step-halving ratio.
pub const RATIO_BAND: (f64, f64) = (12.0, 20.0);

fn run_row(k: f64, p0: f64, dp0: f64, dt: f64, omega: Option<f64>) -> Result<GronwallRow> {
    let h = horizon(k, p0, dp0);
    let t_end = (HORIZON_MULTIPLE * h).min(MAX_TIME);
    let base = integrate_extremal(k, p0, dp0, dt, t_end)?;
    let traj = match omega {
        Some(w) => perturb(&base, w),
        None => base,
    };
    Ok(GronwallRow { k, p0, dp0, provenance: traj.provenance, omega, conclusion: verify_conclusion(&traj) })
}

/// Cap on perturbation draws, as a multiple of the compliant target.
pub const MAX_DRAWS_PER_TARGET: u64 = 20;

fn perturbation_job(tuples: &[(f64, f64, f64)], seed: u64, i: u64) -> (f64, f64, f64, Option<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    let (k, p0, dp0) = tuples[rng.random_range(0..tuples.len())];
    let omega = 10f64.powf(rng.random_range(-1.0..2.0));
    (k, p0, dp0, Some(omega))
}

/// Extremal rows for every tuple, then perturbed rows until `perturbations`
/// of them satisfy the hypothesis. Draw `i` picks a tuple from the grid and
/// `ω` log-uniform in `[0.1, 100]` from stream `i`; draws are consumed in
/// index order, so the rows do not depend on batching or workers. Rejected
/// draws stay in the table. The step-halving check runs on the corner grid.
pub fn sweep(grid: &SweepGrid, dt: f64, perturbations: u64, seed: u64) -> Result<GronwallReport> {
    let tuples = grid.tuples();
    if tuples.is_empty() {
        return Err(Error::field("sweep", "empty parameter grid"));
    }
    let mut rows: Vec<GronwallRow> =
        tuples.par_iter().map(|&(k, p0, dp0)| run_row(k, p0, dp0, dt, None)).collect::<Result<_>>()?;
    let max_draws = perturbations.saturating_mul(MAX_DRAWS_PER_TARGET);
    let (mut compliant, mut next) = (0u64, 0u64);
    while compliant < perturbations && next < max_draws {
        let batch = (2 * (perturbations - compliant)).max(64).min(max_draws - next);
        let drawn: Vec<GronwallRow> = (next..next + batch)
            .into_par_iter()
            .map(|i| {
                let (k, p0, dp0, w) = perturbation_job(&tuples, seed, i);
                run_row(k, p0, dp0, dt, w)
            })
            .collect::<Result<_>>()?;
        next += batch;
        for r in drawn {
            if compliant == perturbations {
                break;
            }
            if r.conclusion.status == ConclusionStatus::Checked {
                compliant += 1;
            }
            rows.push(r);
        }
    }
    let convergence: Vec<ConvergenceRecord> = convergence_tuples()
        .par_iter()
        .map(|&(k, p0, dp0)| convergence_check(k, p0, dp0))
        .collect::<Result<_>>()?;
    let convergence_ok = convergence.iter().all(|c| (RATIO_BAND.0..=RATIO_BAND.1).contains(&c.ratio));

    let (mut extremal, mut perturbed) = (RowCounts::default(), RowCounts::default());
    let mut equality: f64 = 0.0;
    let mut min_ratio: Option<f64> = None;
    for r in &rows {
        match r.provenance {
            Provenance::Extremal => {
                extremal.add(&r.conclusion);
                if r.conclusion.status != ConclusionStatus::Truncated {
                    equality = equality.max(r.conclusion.hypothesis_max_abs);
                }
            }
            Provenance::Perturbed => perturbed.add(&r.conclusion),
        }
        if r.conclusion.status == ConclusionStatus::Checked {
            if let Some(c) = r.conclusion.crossing_ratio {
                min_ratio = Some(min_ratio.map_or(c, |m: f64| m.min(c)));
            }
        }
    }
    let verdict = if extremal.violations + perturbed.violations > 0 || !convergence_ok {
        Verdict::Fail
    } else if compliant < perturbations {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(GronwallReport {
        schema_version: GRONWALL_SCHEMA_VERSION,
        dt,
        seed,
        grid: grid.clone(),
        extremal,
        perturbed,
        extremal_equality_max: equality,
        min_crossing_ratio: min_ratio,
        convergence,
        convergence_ok,
        rows,
        verdict,
    })
}

/// Writes the rows as CSV.
pub fn write_rows_csv(rows: &[GronwallRow], path: impl AsRef<std::path::Path>) -> Result<()> {
    write_rows(rows, std::fs::File::create(path)?)
}

/// Writes the sweep table with a fixed column set.
pub fn write_rows(rows: &[GronwallRow], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k",
        "p0",
        "dp0",
        "provenance",
        "omega",
        "status",
        "horizon",
        "worst_margin",
        "first_crossing",
        "crossing_ratio",
        "hypothesis_worst",
    ])
    .map_err(|e| Error::Io(e.into()))?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        let c = &r.conclusion;
        w.write_record([
            r.k.to_string(),
            r.p0.to_string(),
            r.dp0.to_string(),
            format!("{:?}", r.provenance).to_lowercase(),
            opt(r.omega),
            format!("{:?}", c.status).to_lowercase(),
            c.horizon.to_string(),
            c.worst_margin.to_string(),
            opt(c.first_crossing),
            opt(c.crossing_ratio),
            c.hypothesis_worst.to_string(),
        ])
        .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
