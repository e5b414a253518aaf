//! All-at-once hidden-variable model for two qubits in an exchange
//! interaction.
//!
//! Each qubit is a complex 3-vector `s(τ)`. A candidate history is fixed by
//! the 12 real parameters of the initial pair (s_a0, s_b0): the first-order
//! flow
//!
//! ```text
//! ds_a/dτ = (π/2)·s_b × s_a,      ds_b/dτ = (π/2)·s_a × s_b
//! ```
//!
//! (complex cross products, no conjugation) determines everything else.
//! A valid solution must satisfy, at τ = 0,
//!
//! ```text
//! s_a·s_a = 1,   s_b·s_b = 1,   s_a·s_b = 1     (conserved by the flow)
//! ```
//!
//! plus boundary constraints n̂·s = 1 at both preparations and (on the
//! integrated finals) at both measurements. Each complex equation is two
//! real constraints, so the full mode has 14 constraints on 12 variables;
//! the relaxed mode keeps only the real parts of the four boundary
//! constraints (10 on 12). Solutions are found by multistart damped
//! least squares (Levenberg–Marquardt with a forward-difference Jacobian),
//! deduplicated in parameter space, and counted per outcome: the counts
//! reproduce the Born probabilities for the √SWAP demo circuit.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::qstate::{BlochVector, CVec3, Sign};

/// Residual (sum of squared constraint violations) below which a candidate
/// counts as a solution.
pub const TOL_SOLVE: f64 = 1e-10;

/// Per-constraint violation bound that every reported solution satisfies.
pub const TOL_CONSTRAINT: f64 = 1e-8;

/// Parameter-space distance under which two candidates are the same solution.
pub const DEDUP_TOL: f64 = 1e-4;

/// Default RK4 integration step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Half-width of the uniform seed distribution for the 12 start parameters.
pub const SEED_RANGE: f64 = 2.0;

const PAIR_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HvError {
    #[error("trajectory diverged during integration")]
    Divergence,
    #[error("integration step must be positive and finite")]
    BadStep,
    #[error("Bloch vector has norm {norm}, expected a unit vector")]
    NonUnitBloch { norm: f64 },
    #[error("operation requires a non-empty solution set")]
    EmptySet,
    #[error("all outcome sets are empty")]
    AllEmpty,
    #[error("conjugate pairing not identifiable (solution {index})")]
    PairingFailed { index: usize },
    #[error("tau grid must be ascending, starting at 0")]
    BadGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// All 14 real constraints; boundary equations read n̂·s = 1 + 0i.
    Full,
    /// Boundary equations relaxed to n̂·Re[s] = 1 (10 real constraints).
    Relaxed,
}

/// One exchange-interaction boundary problem: product preparations going in,
/// per-wire measured directions coming out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HvProblem {
    pub alpha: f64,
    pub prep_a: BlochVector,
    pub prep_b: BlochVector,
    pub meas_a: (BlochVector, Sign),
    pub meas_b: (BlochVector, Sign),
    pub mode: ConstraintMode,
}

impl HvProblem {
    pub fn new(
        alpha: f64,
        prep_a: BlochVector,
        prep_b: BlochVector,
        meas_a: (BlochVector, Sign),
        meas_b: (BlochVector, Sign),
        mode: ConstraintMode,
    ) -> Result<HvProblem, HvError> {
        for b in [&prep_a, &prep_b, &meas_a.0, &meas_b.0] {
            if !b.is_unit(1e-9) {
                return Err(HvError::NonUnitBloch { norm: b.norm() });
            }
        }
        if !alpha.is_finite() {
            return Err(HvError::BadStep);
        }
        Ok(HvProblem { alpha, prep_a, prep_b, meas_a, meas_b, mode })
    }

    fn meas_dir_a(&self) -> BlochVector {
        self.meas_a.0.scaled(self.meas_a.1.as_f64())
    }

    fn meas_dir_b(&self) -> BlochVector {
        self.meas_b.0.scaled(self.meas_b.1.as_f64())
    }
}

/// Sampled history of one hidden pair on [0, alpha].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tau: Vec<f64>,
    pub s_a: Vec<CVec3>,
    pub s_b: Vec<CVec3>,
}

impl Trajectory {
    pub const CSV_HEADER: &'static str = "tau,re_sax,im_sax,re_say,im_say,re_saz,im_saz,re_sbx,im_sbx,re_sby,im_sby,re_sbz,im_sbz";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for k in 0..self.tau.len() {
            out.push_str(&crate::weakvalues::row_csv(self.tau[k], &self.s_a[k], &self.s_b[k]));
            out.push('\n');
        }
        out
    }
}

/// One hidden-variable solution: initial pair plus its sampled history.
#[derive(Debug, Clone)]
pub struct HiddenPair {
    pub s_a0: CVec3,
    pub s_b0: CVec3,
    pub trajectory: Trajectory,
}

/// Deduplicated solutions of one problem (one measurement outcome).
#[derive(Debug, Clone)]
pub struct SolutionSet {
    pub problem: HvProblem,
    pub solutions: Vec<HiddenPair>,
    pub residuals: Vec<f64>,
    pub dedup_tol: f64,
    pub seeds_used: usize,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

fn flow(a: &CVec3, b: &CVec3) -> (CVec3, CVec3) {
    let half_pi = std::f64::consts::FRAC_PI_2;
    (b.cross(a) * half_pi, a.cross(b) * half_pi)
}

fn rk4_step(a: &CVec3, b: &CVec3, h: f64) -> (CVec3, CVec3) {
    let (k1a, k1b) = flow(a, b);
    let (k2a, k2b) = flow(&(*a + k1a * (h / 2.0)), &(*b + k1b * (h / 2.0)));
    let (k3a, k3b) = flow(&(*a + k2a * (h / 2.0)), &(*b + k2b * (h / 2.0)));
    let (k4a, k4b) = flow(&(*a + k3a * h), &(*b + k3b * h));
    (
        *a + (k1a + k2a * 2.0 + k3a * 2.0 + k4a) * (h / 6.0),
        *b + (k1b + k2b * 2.0 + k3b * 2.0 + k4b) * (h / 6.0),
    )
}

fn check_finite(a: &CVec3, b: &CVec3) -> Result<(), HvError> {
    if !a.is_finite() || !b.is_finite() || a.max_abs() > 1e9 || b.max_abs() > 1e9 {
        return Err(HvError::Divergence);
    }
    Ok(())
}

/// Fixed-step RK4 integration of the cross-product flow on [0, alpha],
/// recording every step.
pub fn integrate_s(
    s_a0: CVec3,
    s_b0: CVec3,
    alpha: f64,
    step: f64,
) -> Result<Trajectory, HvError> {
    if step <= 0.0 || !step.is_finite() {
        return Err(HvError::BadStep);
    }
    let n = ((alpha.abs() / step).ceil() as usize).max(1);
    let h = alpha / n as f64;
    let mut tau = Vec::with_capacity(n + 1);
    let mut s_a = Vec::with_capacity(n + 1);
    let mut s_b = Vec::with_capacity(n + 1);
    let (mut a, mut b) = (s_a0, s_b0);
    check_finite(&a, &b)?;
    tau.push(0.0);
    s_a.push(a);
    s_b.push(b);
    for k in 1..=n {
        let (na, nb) = rk4_step(&a, &b, h);
        a = na;
        b = nb;
        check_finite(&a, &b)?;
        tau.push(alpha * k as f64 / n as f64);
        s_a.push(a);
        s_b.push(b);
    }
    Ok(Trajectory { tau, s_a, s_b })
}

/// Endpoint of the flow at `tau` without storing the history.
fn integrate_to(
    s_a0: CVec3,
    s_b0: CVec3,
    tau: f64,
    step: f64,
) -> Result<(CVec3, CVec3), HvError> {
    if step <= 0.0 || !step.is_finite() {
        return Err(HvError::BadStep);
    }
    let (mut a, mut b) = (s_a0, s_b0);
    check_finite(&a, &b)?;
    if tau == 0.0 {
        return Ok((a, b));
    }
    let n = ((tau.abs() / step).ceil() as usize).max(1);
    let h = tau / n as f64;
    for _ in 0..n {
        let (na, nb) = rk4_step(&a, &b, h);
        a = na;
        b = nb;
        check_finite(&a, &b)?;
    }
    Ok((a, b))
}

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

/// Parameter layout: [Re s_a0 (3), Im s_a0 (3), Re s_b0 (3), Im s_b0 (3)].
pub fn params_to_pair(params: &[f64; 12]) -> (CVec3, CVec3) {
    let a = CVec3::from_parts(
        BlochVector::new(params[0], params[1], params[2]),
        BlochVector::new(params[3], params[4], params[5]),
    );
    let b = CVec3::from_parts(
        BlochVector::new(params[6], params[7], params[8]),
        BlochVector::new(params[9], params[10], params[11]),
    );
    (a, b)
}

pub fn pair_to_params(a: &CVec3, b: &CVec3) -> [f64; 12] {
    let (ar, ai, br, bi) = (a.re(), a.im(), b.re(), b.im());
    [
        ar.x, ar.y, ar.z, ai.x, ai.y, ai.z, //
        br.x, br.y, br.z, bi.x, bi.y, bi.z,
    ]
}

fn conj_params(p: &[f64; 12]) -> [f64; 12] {
    let mut out = *p;
    for k in [3, 4, 5, 9, 10, 11] {
        out[k] = -out[k];
    }
    out
}

fn param_distance(p: &[f64; 12], q: &[f64; 12]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// The vector of real constraint violations for one parameter point:
/// six interaction components at τ=0 (Re/Im of s_a·s_a−1, s_b·s_b−1,
/// s_a·s_b−1), then the boundary components (8 in full mode, 4 relaxed).
pub fn constraint_violations_with_step(
    params: &[f64; 12],
    p: &HvProblem,
    step: f64,
) -> Result<Vec<f64>, HvError> {
    let (a0, b0) = params_to_pair(params);
    let one = num_complex::Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(14);
    for dot in [a0.dot(&a0), b0.dot(&b0), a0.dot(&b0)] {
        out.push(dot.re - 1.0);
        out.push(dot.im);
    }
    let (af, bf) = integrate_to(a0, b0, p.alpha, step)?;
    let boundaries = [
        (CVec3::from_bloch(p.prep_a), a0),
        (CVec3::from_bloch(p.prep_b), b0),
        (CVec3::from_bloch(p.meas_dir_a()), af),
        (CVec3::from_bloch(p.meas_dir_b()), bf),
    ];
    for (n_hat, s) in boundaries {
        let v = n_hat.dot(&s) - one;
        match p.mode {
            ConstraintMode::Full => {
                out.push(v.re);
                out.push(v.im);
            }
            ConstraintMode::Relaxed => out.push(v.re),
        }
    }
    Ok(out)
}

/// Constraint violations at the default integration step.
pub fn constraint_violations(params: &[f64; 12], p: &HvProblem) -> Result<Vec<f64>, HvError> {
    constraint_violations_with_step(params, p, DEFAULT_STEP)
}

/// Sum of squared constraint violations; +∞ for diverging parameter points.
pub fn constraint_residual(params: &[f64; 12], p: &HvProblem) -> f64 {
    match constraint_violations(params, p) {
        Ok(v) => v.iter().map(|x| x * x).sum(),
        Err(_) => f64::INFINITY,
    }
}

// ---------------------------------------------------------------------------
// Damped least squares
// ---------------------------------------------------------------------------

fn solve_normal_equations(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    // Gaussian elimination with partial pivoting on the n×n system.
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Levenberg–Marquardt on a residual vector function over 12 parameters.
/// Returns the refined point and its cost (sum of squares); `None` when the
/// start diverges before any progress is made.
fn lm_minimize(
    f: &dyn Fn(&[f64; 12]) -> Option<Vec<f64>>,
    x0: [f64; 12],
    max_iters: usize,
) -> Option<([f64; 12], f64)> {
    let mut x = x0;
    let mut r = f(&x)?;
    let mut cost = sum_sq(&r);
    let m = r.len();
    let mut lambda = 1e-3;
    let mut stall = 0;

    for _ in 0..max_iters {
        if cost < 1e-26 {
            break;
        }
        // Forward-difference Jacobian, column per parameter.
        let mut jac = vec![0.0; m * 12];
        for i in 0..12 {
            let delta = 1e-7 * (1.0 + x[i].abs());
            let mut xp = x;
            xp[i] += delta;
            let rp = f(&xp)?;
            for (k, col) in rp.iter().zip(&r).map(|(p, c)| (p - c) / delta).enumerate() {
                jac[k * 12 + i] = col;
            }
        }
        // Normal equations JᵀJ d = −Jᵀr with Marquardt damping.
        let mut jtj = [0.0f64; 144];
        let mut jtr = [0.0f64; 12];
        for k in 0..m {
            for i in 0..12 {
                let jki = jac[k * 12 + i];
                jtr[i] += jki * r[k];
                for j in i..12 {
                    jtj[i * 12 + j] += jki * jac[k * 12 + j];
                }
            }
        }
        for i in 0..12 {
            for j in 0..i {
                jtj[i * 12 + j] = jtj[j * 12 + i];
            }
        }

        let mut improved = false;
        for _ in 0..16 {
            let mut a = jtj;
            for i in 0..12 {
                a[i * 12 + i] += lambda * jtj[i * 12 + i].max(1e-12);
            }
            let mut rhs = jtr.map(|v| -v);
            let Some(d) = solve_normal_equations(&mut a, &mut rhs, 12) else {
                lambda *= 4.0;
                continue;
            };
            let mut xt = x;
            for (xi, di) in xt.iter_mut().zip(&d) {
                *xi += di;
            }
            if let Some(rt) = f(&xt) {
                let ct = sum_sq(&rt);
                if ct < cost {
                    let relative_gain = (cost - ct) / cost.max(1e-300);
                    x = xt;
                    r = rt;
                    cost = ct;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    stall = if relative_gain < 1e-12 { stall + 1 } else { 0 };
                    break;
                }
            }
            lambda *= 4.0;
            if lambda > 1e10 {
                break;
            }
        }
        if !improved || stall >= 3 {
            break;
        }
    }
    Some((x, cost))
}

// ---------------------------------------------------------------------------
// Multistart solve
// ---------------------------------------------------------------------------

fn start_rng(rng_seed: u64, index: u64) -> ChaCha8Rng {
    // Counter-split per-start stream so results are schedule-independent.
    let mixed = rng_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    ChaCha8Rng::seed_from_u64(mixed)
}

fn coarse_step(alpha: f64) -> f64 {
    let magnitude = alpha.abs().max(DEFAULT_STEP);
    magnitude / (magnitude / 0.01).round().max(1.0)
}

fn run_start(p: &HvProblem, x0: [f64; 12], fine_step: f64) -> Option<([f64; 12], f64)> {
    let coarse = coarse_step(p.alpha);
    let coarse_f = |x: &[f64; 12]| constraint_violations_with_step(x, p, coarse).ok();
    let (x1, c1) = lm_minimize(&coarse_f, x0, 150)?;
    if c1 > 1e-6 {
        return None;
    }
    let fine_f = |x: &[f64; 12]| constraint_violations_with_step(x, p, fine_step).ok();
    let (x2, c2) = lm_minimize(&fine_f, x1, 60)?;
    (c2 <= TOL_SOLVE).then_some((x2, c2))
}

/// Cluster candidate parameter points (sorted best first) and keep the
/// lowest-residual representative of each cluster.
fn cluster(mut candidates: Vec<([f64; 12], f64)>, dedup_tol: f64) -> Vec<([f64; 12], f64)> {
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| cmp_params(&a.0, &b.0)));
    let mut kept: Vec<([f64; 12], f64)> = Vec::new();
    for (params, cost) in candidates {
        if kept.iter().all(|(k, _)| param_distance(k, &params) > dedup_tol) {
            kept.push((params, cost));
        }
    }
    kept.sort_by(|a, b| cmp_params(&a.0, &b.0));
    kept
}

fn cmp_params(a: &[f64; 12], b: &[f64; 12]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

fn build_set(
    p: &HvProblem,
    kept: Vec<([f64; 12], f64)>,
    dedup_tol: f64,
    seeds_used: usize,
) -> SolutionSet {
    let mut solutions = Vec::with_capacity(kept.len());
    let mut residuals = Vec::with_capacity(kept.len());
    for (params, cost) in kept {
        let (a0, b0) = params_to_pair(&params);
        let trajectory =
            integrate_s(a0, b0, p.alpha, DEFAULT_STEP).expect("accepted solution integrates");
        solutions.push(HiddenPair { s_a0: a0, s_b0: b0, trajectory });
        residuals.push(cost);
    }
    SolutionSet {
        problem: *p,
        solutions,
        residuals,
        dedup_tol,
        seeds_used,
    }
}

/// Multistart solve with seeds drawn uniformly from [−range, range]¹².
pub fn solve_with_range(
    p: &HvProblem,
    n_seeds: usize,
    rng_seed: u64,
    range: f64,
) -> SolutionSet {
    let starts: Vec<[f64; 12]> = (0..n_seeds as u64)
        .map(|k| {
            let mut rng = start_rng(rng_seed, k);
            std::array::from_fn(|_| rng.gen_range(-range..=range))
        })
        .collect();
    let candidates: Vec<([f64; 12], f64)> = starts
        .par_iter()
        .filter_map(|&x0| run_start(p, x0, DEFAULT_STEP))
        .collect();
    build_set(p, cluster(candidates, DEDUP_TOL), DEDUP_TOL, n_seeds)
}

/// Multistart solve of one problem: `n_seeds` random starts, deterministic
/// in `rng_seed`. An empty set is a valid result.
pub fn solve(p: &HvProblem, n_seeds: usize, rng_seed: u64) -> SolutionSet {
    solve_with_range(p, n_seeds, rng_seed, SEED_RANGE)
}

/// Re-deduplicate an existing set at a different tolerance.
pub fn dedupe(set: &SolutionSet, dedup_tol: f64) -> SolutionSet {
    let candidates: Vec<([f64; 12], f64)> = set
        .solutions
        .iter()
        .zip(&set.residuals)
        .map(|(s, &r)| (pair_to_params(&s.s_a0, &s.s_b0), r))
        .collect();
    build_set(
        &set.problem,
        cluster(candidates, dedup_tol),
        dedup_tol,
        set.seeds_used,
    )
}

/// Outcome of the count-stability driver.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// (n_seeds, solution count) for each run, in order.
    pub counts: Vec<(usize, usize)>,
    pub stable: bool,
    pub widened: bool,
}

/// Solve at n, 2n and 4n seeds; the count must be unchanged across the two
/// doublings. If it is not, the seed range is widened ×2 once and the ladder
/// rerun.
pub fn solve_stable(
    p: &HvProblem,
    base_seeds: usize,
    rng_seed: u64,
) -> (SolutionSet, StabilityReport) {
    let ladder = |range: f64| {
        let runs: Vec<SolutionSet> = [base_seeds, 2 * base_seeds, 4 * base_seeds]
            .iter()
            .map(|&n| solve_with_range(p, n, rng_seed, range))
            .collect();
        let counts: Vec<(usize, usize)> =
            runs.iter().map(|s| (s.seeds_used, s.len())).collect();
        let stable = counts[0].1 == counts[1].1 && counts[1].1 == counts[2].1;
        (runs, counts, stable)
    };
    let (mut runs, mut counts, stable) = ladder(SEED_RANGE);
    let mut widened = false;
    if !stable {
        widened = true;
        let (r2, c2, _) = ladder(2.0 * SEED_RANGE);
        runs = r2;
        counts.extend(c2);
    }
    let stable = {
        let n = counts.len();
        counts[n - 2].1 == counts[n - 1].1 && counts[n - 3].1 == counts[n - 2].1
    };
    let set = runs.pop().expect("ladder ran");
    (set, StabilityReport { counts, stable, widened })
}

/// P(outcome) = |solutions| / Σ|solutions| over a family of outcome sets.
pub fn count_probability<K: Ord + Copy>(
    sets: &BTreeMap<K, SolutionSet>,
) -> Result<BTreeMap<K, f64>, HvError> {
    let total: usize = sets.values().map(SolutionSet::len).sum();
    if total == 0 {
        return Err(HvError::AllEmpty);
    }
    Ok(sets
        .iter()
        .map(|(k, s)| (*k, s.len() as f64 / total as f64))
        .collect())
}

// ---------------------------------------------------------------------------
// Averaging
// ---------------------------------------------------------------------------

/// Per-qubit real 3-vector series on a tau grid.
#[derive(Debug, Clone)]
pub struct AveragedSeries {
    pub tau: Vec<f64>,
    pub a: Vec<BlochVector>,
    pub b: Vec<BlochVector>,
}

fn check_grid(tau_grid: &[f64]) -> Result<(), HvError> {
    let ascending = tau_grid.windows(2).all(|w| w[1] > w[0]);
    if tau_grid.is_empty() || !ascending || tau_grid[0] < 0.0 {
        return Err(HvError::BadGrid);
    }
    Ok(())
}

/// Sample one solution's pair at the given grid times.
fn sample_solution(
    sol: &HiddenPair,
    tau_grid: &[f64],
    step: f64,
) -> Result<(Vec<CVec3>, Vec<CVec3>), HvError> {
    let mut out_a = Vec::with_capacity(tau_grid.len());
    let mut out_b = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let (a, b) = integrate_to(sol.s_a0, sol.s_b0, tau, step)?;
        out_a.push(a);
        out_b.push(b);
    }
    Ok((out_a, out_b))
}

fn mean_series(
    set: &SolutionSet,
    tau_grid: &[f64],
    keep: &[usize],
    part: fn(&CVec3) -> BlochVector,
) -> Result<AveragedSeries, HvError> {
    check_grid(tau_grid)?;
    if keep.is_empty() {
        return Err(HvError::EmptySet);
    }
    let mut acc_a = vec![BlochVector::new(0.0, 0.0, 0.0); tau_grid.len()];
    let mut acc_b = acc_a.clone();
    for &idx in keep {
        let (sa, sb) = sample_solution(&set.solutions[idx], tau_grid, DEFAULT_STEP)?;
        for k in 0..tau_grid.len() {
            let (pa, pb) = (part(&sa[k]), part(&sb[k]));
            acc_a[k] = BlochVector::new(acc_a[k].x + pa.x, acc_a[k].y + pa.y, acc_a[k].z + pa.z);
            acc_b[k] = BlochVector::new(acc_b[k].x + pb.x, acc_b[k].y + pb.y, acc_b[k].z + pb.z);
        }
    }
    let n = keep.len() as f64;
    Ok(AveragedSeries {
        tau: tau_grid.to_vec(),
        a: acc_a.into_iter().map(|v| v.scaled(1.0 / n)).collect(),
        b: acc_b.into_iter().map(|v| v.scaled(1.0 / n)).collect(),
    })
}

/// Unweighted mean of Re(s_a), Re(s_b) over all solutions at each grid time.
pub fn average_re_s(set: &SolutionSet, tau_grid: &[f64]) -> Result<AveragedSeries, HvError> {
    if set.is_empty() {
        return Err(HvError::EmptySet);
    }
    let keep: Vec<usize> = (0..set.len()).collect();
    mean_series(set, tau_grid, &keep, CVec3::re)
}

/// Which solutions the imaginary average runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImAverageMode {
    /// All solutions; conjugate closure makes this average vanish.
    All,
    /// One member of each conjugate pair, chosen as the member whose initial
    /// vectors better satisfy the preparation relation Im(s0) = n̂×Re(s0).
    FirstHalf,
}

/// Group solutions into conjugate pairs; error when any solution lacks a
/// conjugate partner in the set.
fn conjugate_pairs(set: &SolutionSet) -> Result<Vec<(usize, usize)>, HvError> {
    let params: Vec<[f64; 12]> = set
        .solutions
        .iter()
        .map(|s| pair_to_params(&s.s_a0, &s.s_b0))
        .collect();
    let mut used = vec![false; params.len()];
    let mut pairs = Vec::new();
    for i in 0..params.len() {
        if used[i] {
            continue;
        }
        let conj_i = conj_params(&params[i]);
        // A real solution is its own conjugate.
        if param_distance(&params[i], &conj_i) <= PAIR_TOL {
            used[i] = true;
            pairs.push((i, i));
            continue;
        }
        let partner = (0..params.len())
            .filter(|&j| j != i && !used[j])
            .min_by(|&j, &k| {
                param_distance(&params[j], &conj_i)
                    .total_cmp(&param_distance(&params[k], &conj_i))
            })
            .filter(|&j| param_distance(&params[j], &conj_i) <= PAIR_TOL);
        let Some(j) = partner else {
            return Err(HvError::PairingFailed { index: i });
        };
        used[i] = true;
        used[j] = true;
        pairs.push((i, j));
    }
    Ok(pairs)
}

/// Misalignment of a solution's initial vectors from the preparation
/// relation Im(s0) = n̂_prep × Re(s0).
fn prep_alignment_defect(p: &HvProblem, sol: &HiddenPair) -> f64 {
    let defect = |n_hat: BlochVector, s0: &CVec3| {
        let want = n_hat.cross(&s0.re());
        let im = s0.im();
        let d = BlochVector::new(im.x - want.x, im.y - want.y, im.z - want.z);
        d.dot(&d)
    };
    defect(p.prep_a, &sol.s_a0) + defect(p.prep_b, &sol.s_b0)
}

/// Mean of Im(s_a), Im(s_b) at each grid time, over all solutions or over a
/// canonical half (one member of each conjugate pair).
pub fn average_im_s(
    set: &SolutionSet,
    tau_grid: &[f64],
    mode: ImAverageMode,
) -> Result<AveragedSeries, HvError> {
    if set.is_empty() {
        return Err(HvError::EmptySet);
    }
    let keep: Vec<usize> = match mode {
        ImAverageMode::All => (0..set.len()).collect(),
        ImAverageMode::FirstHalf => conjugate_pairs(set)?
            .into_iter()
            .map(|(i, j)| {
                let (di, dj) = (
                    prep_alignment_defect(&set.problem, &set.solutions[i]),
                    prep_alignment_defect(&set.problem, &set.solutions[j]),
                );
                if dj < di {
                    j
                } else {
                    i
                }
            })
            .collect(),
    };
    mean_series(set, tau_grid, &keep, CVec3::im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::demo_problem;
    use crate::weakvalues::TwoBitOutcome;
    use num_complex::Complex64;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// The closed-form solution initials for the demo problem, per outcome.
    pub(super) fn known_solutions(outcome: TwoBitOutcome) -> Vec<(CVec3, CVec3)> {
        let one = c64(1.0, 0.0);
        let i = Complex64::i();
        let conj = |(a, b): &(CVec3, CVec3)| (a.conj(), b.conj());
        match outcome {
            TwoBitOutcome::ZeroZero => {
                let first = (
                    CVec3::new(one, -i, one),
                    CVec3::new(i, one, one),
                );
                vec![first, conj(&first)]
            }
            TwoBitOutcome::OneOne => {
                let first = (
                    CVec3::new(one, i, -one),
                    CVec3::new(-i, one, -one),
                );
                vec![first, conj(&first)]
            }
            TwoBitOutcome::OneZero => {
                let s1 = (
                    CVec3::new(one, one, i),
                    CVec3::new(-one, one, -i),
                );
                let s3 = (
                    CVec3::new(one, -one, -i),
                    CVec3::new(one, one, i),
                );
                vec![s1, conj(&s1), s3, conj(&s3)]
            }
            TwoBitOutcome::ZeroOne => vec![],
        }
    }

    #[test]
    fn equal_pair_is_stationary() {
        let s = CVec3::new(c64(0.3, 0.1), c64(-0.2, 0.5), c64(0.9, -0.4));
        let t = integrate_s(s, s, 1.0, 1e-2).unwrap();
        for k in 0..t.tau.len() {
            assert!(t.s_a[k].max_abs_diff(&s) < 1e-12);
            assert!(t.s_b[k].max_abs_diff(&s) < 1e-12);
        }
    }

    #[test]
    fn sum_is_conserved() {
        let a = CVec3::new(c64(1.0, 0.2), c64(0.0, -0.7), c64(0.4, 0.0));
        let b = CVec3::new(c64(-0.3, 0.0), c64(1.1, 0.4), c64(0.0, 0.9));
        let t = integrate_s(a, b, 0.8, 1e-3).unwrap();
        let total0 = a + b;
        for k in 0..t.tau.len() {
            assert!((t.s_a[k] + t.s_b[k]).max_abs_diff(&total0) < 1e-10);
        }
    }

    #[test]
    fn constraint_satisfying_flow_obeys_second_order_law() {
        // Initials satisfying the three interaction constraints make the
        // flow linear: d²s/dτ² = (π²/2)(s_other − s_self).
        let (a0, b0) = known_solutions(TwoBitOutcome::OneZero)[0];
        let t = integrate_s(a0, b0, 0.5, 1e-3).unwrap();
        let h = t.tau[1] - t.tau[0];
        let half_pi2 = 0.5 * std::f64::consts::PI.powi(2);
        let mut worst = 0.0f64;
        for k in 1..t.tau.len() - 1 {
            let fd2 = (t.s_a[k + 1] - t.s_a[k] * 2.0 + t.s_a[k - 1]) * (1.0 / (h * h));
            let law = (t.s_b[k] - t.s_a[k]) * half_pi2;
            worst = worst.max(fd2.max_abs_diff(&law));
        }
        assert!(worst < 40.0 * h * h, "second-order residual {worst}");
    }

    #[test]
    fn interaction_dots_are_conserved_along_solutions() {
        for outcome in [TwoBitOutcome::ZeroZero, TwoBitOutcome::OneZero] {
            for (a0, b0) in known_solutions(outcome) {
                let t = integrate_s(a0, b0, 0.5, 1e-3).unwrap();
                for k in 0..t.tau.len() {
                    let (a, b) = (&t.s_a[k], &t.s_b[k]);
                    assert!((a.dot(a) - c64(1.0, 0.0)).norm() < 1e-8);
                    assert!((b.dot(b) - c64(1.0, 0.0)).norm() < 1e-8);
                    assert!((a.dot(b) - c64(1.0, 0.0)).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn richardson_step_halving_agrees() {
        let (a0, b0) = known_solutions(TwoBitOutcome::ZeroZero)[0];
        let coarse = integrate_to(a0, b0, 0.5, 1e-3).unwrap();
        let fine = integrate_to(a0, b0, 0.5, 5e-4).unwrap();
        assert!(coarse.0.max_abs_diff(&fine.0) < 1e-9);
        assert!(coarse.1.max_abs_diff(&fine.1) < 1e-9);
    }

    #[test]
    fn divergence_is_detected() {
        let a = CVec3::new(c64(0.0, 40.0), c64(40.0, 0.0), c64(0.0, 0.0));
        let b = CVec3::new(c64(0.0, 0.0), c64(0.0, 40.0), c64(40.0, 0.0));
        assert!(matches!(
            integrate_s(a, b, 5.0, 1e-2),
            Err(HvError::Divergence)
        ));
    }

    #[test]
    fn exact_solutions_have_zero_residual() {
        for outcome in TwoBitOutcome::ALL {
            let p = demo_problem(outcome);
            for (a0, b0) in known_solutions(outcome) {
                let params = pair_to_params(&a0, &b0);
                let r = constraint_residual(&params, &p);
                assert!(r < 1e-12, "{outcome:?}: residual {r}");
            }
        }
    }

    #[test]
    fn single_violation_contributes_its_square() {
        // A zero-duration problem measured in the preparation bases: with
        // s_a0 = (1, u, iu) and s_b0 = (0, 1, 0), every constraint holds
        // except s_a·s_b = u. Nudging u to 1+δ violates exactly that one
        // real constraint by δ, so the residual is δ².
        let p = HvProblem::new(
            0.0,
            BlochVector::X,
            BlochVector::Y,
            (BlochVector::X, Sign::Plus),
            (BlochVector::Y, Sign::Plus),
            ConstraintMode::Full,
        )
        .unwrap();
        let pair = |u: Complex64| {
            (
                CVec3::new(c64(1.0, 0.0), u, Complex64::i() * u),
                CVec3::new(c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)),
            )
        };
        let (a0, b0) = pair(c64(1.0, 0.0));
        let exact = pair_to_params(&a0, &b0);
        assert!(constraint_residual(&exact, &p) < 1e-28);

        let delta = 1e-3;
        let (a0, b0) = pair(c64(1.0 + delta, 0.0));
        let perturbed = pair_to_params(&a0, &b0);
        let residual = constraint_residual(&perturbed, &p);
        assert!(
            (residual - delta * delta).abs() < 1e-12 * delta * delta + 1e-30,
            "residual {residual} vs delta² {}",
            delta * delta
        );
    }

    #[test]
    fn random_params_have_positive_residual() {
        use rand::{Rng, SeedableRng};
        let p = demo_problem(TwoBitOutcome::ZeroZero);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let params: [f64; 12] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            assert!(constraint_residual(&params, &p) > 0.0);
        }
    }

    #[test]
    fn solver_finds_the_known_solution_counts() {
        let mut counts = BTreeMap::new();
        for outcome in TwoBitOutcome::ALL {
            let set = solve(&demo_problem(outcome), 200, 7);
            counts.insert(outcome, set.len());

            // Every found solution matches one of the known closed forms.
            let known = known_solutions(outcome);
            for sol in &set.solutions {
                let found = pair_to_params(&sol.s_a0, &sol.s_b0);
                let matched = known.iter().any(|(a, b)| {
                    param_distance(&found, &pair_to_params(a, b)) < 1e-6
                });
                assert!(matched, "{outcome:?}: unexpected solution {found:?}");
            }
            for r in &set.residuals {
                assert!(*r <= TOL_SOLVE);
            }
        }
        assert_eq!(counts[&TwoBitOutcome::ZeroZero], 2);
        assert_eq!(counts[&TwoBitOutcome::OneZero], 4);
        assert_eq!(counts[&TwoBitOutcome::OneOne], 2);
        assert_eq!(counts[&TwoBitOutcome::ZeroOne], 0);
    }

    #[test]
    fn solver_is_deterministic() {
        let p = demo_problem(TwoBitOutcome::ZeroZero);
        let run = || {
            let set = solve(&p, 60, 11);
            set.solutions
                .iter()
                .map(|s| pair_to_params(&s.s_a0, &s.s_b0))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn conjugate_of_a_solution_is_a_solution() {
        let p = demo_problem(TwoBitOutcome::OneZero);
        let set = solve(&p, 120, 3);
        assert!(!set.is_empty());
        for sol in &set.solutions {
            let conj = conj_params(&pair_to_params(&sol.s_a0, &sol.s_b0));
            assert!(constraint_residual(&conj, &p) <= TOL_SOLVE);
        }
    }

    #[test]
    fn dedupe_examples() {
        let p = demo_problem(TwoBitOutcome::ZeroZero);
        let set = solve(&p, 120, 5);
        assert_eq!(set.len(), 2);
        let collapsed = dedupe(&set, 10.0); // coarse tolerance merges clusters
        assert_eq!(collapsed.len(), 1);
        let kept = dedupe(&set, 1e-6);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn count_probability_examples() {
        let mut sets = BTreeMap::new();
        for outcome in TwoBitOutcome::ALL {
            sets.insert(outcome, solve(&demo_problem(outcome), 200, 13));
        }
        let probs = count_probability(&sets).unwrap();
        assert_eq!(probs[&TwoBitOutcome::ZeroZero], 0.25);
        assert_eq!(probs[&TwoBitOutcome::OneZero], 0.5);
        assert_eq!(probs[&TwoBitOutcome::OneOne], 0.25);
        assert_eq!(probs[&TwoBitOutcome::ZeroOne], 0.0);

        let mut empty = BTreeMap::new();
        empty.insert(0u8, solve(&demo_problem(TwoBitOutcome::ZeroOne), 10, 1));
        assert!(matches!(count_probability(&empty), Err(HvError::AllEmpty)));
    }

    #[test]
    fn count_probability_small_families() {
        let donor = solve(&demo_problem(TwoBitOutcome::OneZero), 200, 13);
        assert_eq!(donor.len(), 4);
        let subset = |k: usize| SolutionSet {
            problem: donor.problem,
            solutions: donor.solutions[..k].to_vec(),
            residuals: donor.residuals[..k].to_vec(),
            dedup_tol: donor.dedup_tol,
            seeds_used: donor.seeds_used,
        };
        let mut sets = BTreeMap::new();
        sets.insert(0u8, subset(1));
        sets.insert(1u8, subset(1));
        let probs = count_probability(&sets).unwrap();
        assert_eq!(probs[&0], 0.5);
        assert_eq!(probs[&1], 0.5);

        let mut sets = BTreeMap::new();
        sets.insert(0u8, subset(3));
        sets.insert(1u8, subset(0));
        let probs = count_probability(&sets).unwrap();
        assert_eq!(probs[&0], 1.0);
        assert_eq!(probs[&1], 0.0);
    }

    #[test]
    fn first_half_pairing_failure_is_reported() {
        // A single solution with a nonzero imaginary part has no conjugate
        // partner in the set.
        let donor = solve(&demo_problem(TwoBitOutcome::ZeroZero), 120, 43);
        let orphan = SolutionSet {
            problem: donor.problem,
            solutions: vec![donor.solutions[0].clone()],
            residuals: vec![donor.residuals[0]],
            dedup_tol: donor.dedup_tol,
            seeds_used: donor.seeds_used,
        };
        assert!(matches!(
            average_im_s(&orphan, &[0.0, 0.5], ImAverageMode::FirstHalf),
            Err(HvError::PairingFailed { .. })
        ));
    }

    #[test]
    fn averages_recover_the_weak_values() {
        use crate::weakvalues::sqrt_swap_closed_form;
        let grid: Vec<f64> = (0..=50).map(|k| 0.5 * k as f64 / 50.0).collect();
        for outcome in [
            TwoBitOutcome::ZeroZero,
            TwoBitOutcome::OneZero,
            TwoBitOutcome::OneOne,
        ] {
            let set = solve(&demo_problem(outcome), 200, 17);
            let re = average_re_s(&set, &grid).unwrap();
            let im_all = average_im_s(&set, &grid, ImAverageMode::All).unwrap();
            for (k, &tau) in grid.iter().enumerate() {
                let (wa, wb) = sqrt_swap_closed_form(outcome, tau).unwrap();
                for (got, want) in [(&re.a[k], wa.re()), (&re.b[k], wb.re())] {
                    assert!(
                        (got.x - want.x).abs() < 1e-6
                            && (got.y - want.y).abs() < 1e-6
                            && (got.z - want.z).abs() < 1e-6,
                        "{outcome:?} Re mismatch at tau {tau}: {got:?} vs {want:?}"
                    );
                }
                for v in [&im_all.a[k], &im_all.b[k]] {
                    assert!(v.norm() < 1e-6, "{outcome:?} Im(all) nonzero at tau {tau}");
                }
            }
        }
    }

    #[test]
    fn first_half_average_recovers_im_for_diagonal_outcomes() {
        use crate::weakvalues::sqrt_swap_closed_form;
        let grid: Vec<f64> = (0..=50).map(|k| 0.5 * k as f64 / 50.0).collect();
        for outcome in [TwoBitOutcome::ZeroZero, TwoBitOutcome::OneOne] {
            let set = solve(&demo_problem(outcome), 200, 19);
            let im = average_im_s(&set, &grid, ImAverageMode::FirstHalf).unwrap();
            for (k, &tau) in grid.iter().enumerate() {
                let (wa, wb) = sqrt_swap_closed_form(outcome, tau).unwrap();
                for (got, want) in [(&im.a[k], wa.im()), (&im.b[k], wb.im())] {
                    assert!(
                        (got.x - want.x).abs() < 1e-6
                            && (got.y - want.y).abs() < 1e-6
                            && (got.z - want.z).abs() < 1e-6,
                        "{outcome:?} Im mismatch at tau {tau}: {got:?} vs {want:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn first_half_cannot_recover_im_for_one_zero() {
        // No subset of the four |10⟩ solutions averages to Im(w): every
        // one-per-pair selection leaves an O(1) residual. The canonical
        // selection is well-defined; the recovery property simply fails
        // here, unlike for the diagonal outcomes.
        use crate::weakvalues::sqrt_swap_closed_form;
        let grid: Vec<f64> = (0..=50).map(|k| 0.5 * k as f64 / 50.0).collect();
        let set = solve(&demo_problem(TwoBitOutcome::OneZero), 200, 23);
        assert_eq!(set.len(), 4);
        let im = average_im_s(&set, &grid, ImAverageMode::FirstHalf).unwrap();
        let mut worst = 0.0f64;
        for (k, &tau) in grid.iter().enumerate() {
            let (wa, _) = sqrt_swap_closed_form(TwoBitOutcome::OneZero, tau).unwrap();
            let want = wa.im();
            let got = &im.a[k];
            worst = worst
                .max((got.x - want.x).abs())
                .max((got.y - want.y).abs())
                .max((got.z - want.z).abs());
        }
        assert!(worst > 0.1, "expected an O(1) deviation, got {worst}");
    }

    #[test]
    fn singleton_averages_return_the_solution_itself() {
        let p = demo_problem(TwoBitOutcome::ZeroZero);
        let full = solve(&p, 120, 29);
        let singleton = SolutionSet {
            problem: p,
            solutions: vec![full.solutions[0].clone()],
            residuals: vec![full.residuals[0]],
            dedup_tol: full.dedup_tol,
            seeds_used: full.seeds_used,
        };
        let grid = [0.0, 0.25, 0.5];
        let re = average_re_s(&singleton, &grid).unwrap();
        let im = average_im_s(&singleton, &grid, ImAverageMode::All).unwrap();
        let (a_mid, _) =
            integrate_to(singleton.solutions[0].s_a0, singleton.solutions[0].s_b0, 0.25, 1e-3)
                .unwrap();
        assert!((re.a[1].x - a_mid.re().x).abs() < 1e-12);
        assert!((im.a[1].y - a_mid.im().y).abs() < 1e-12);
    }

    #[test]
    fn empty_set_errors() {
        let set = solve(&demo_problem(TwoBitOutcome::ZeroOne), 40, 31);
        assert!(set.is_empty());
        assert!(matches!(
            average_re_s(&set, &[0.0, 0.5]),
            Err(HvError::EmptySet)
        ));
    }

    #[test]
    fn relaxed_mode_finds_valid_relaxed_solutions() {
        let mut p = demo_problem(TwoBitOutcome::ZeroZero);
        p.mode = ConstraintMode::Relaxed;
        let set = solve(&p, 60, 37);
        assert!(!set.is_empty());
        for sol in &set.solutions {
            let params = pair_to_params(&sol.s_a0, &sol.s_b0);
            let v = constraint_violations(&params, &p).unwrap();
            assert_eq!(v.len(), 10);
            assert!(v.iter().all(|x| x.abs() <= TOL_CONSTRAINT));
        }
    }

    #[test]
    fn trajectory_csv_header() {
        let (a0, b0) = known_solutions(TwoBitOutcome::ZeroZero)[0];
        let t = integrate_s(a0, b0, 0.5, 0.25).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("tau,re_sax,"));
        assert_eq!(csv.lines().count(), 1 + t.tau.len());
    }

    #[test]
    fn stability_ladder_on_the_demo() {
        let (set, report) = solve_stable(&demo_problem(TwoBitOutcome::ZeroZero), 50, 41);
        assert!(report.stable, "counts: {:?}", report.counts);
        assert!(!report.widened);
        assert_eq!(set.len(), 2);
    }
}
