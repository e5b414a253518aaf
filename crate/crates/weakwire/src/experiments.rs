//! Canned experiment instances and the data products behind the CLI's
//! `reproduce` command.
//!
//! The central demo circuit prepares x̂⊗ŷ, runs a single √SWAP
//! (SwapAlpha with α = 0.5) and measures both wires in the ẑ basis. Its
//! outcome probabilities are {25%, 0%, 50%, 25%} for {00, 01, 10, 11}, and
//! its weak-value trajectories have closed forms
//! ([`crate::weakvalues::sqrt_swap_closed_form`]).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::circuit::{CircuitSpec, GateId, GateOp, Meas, Prep};
use crate::hvmodel::{
    self, solve, ConstraintMode, HvProblem, SolutionSet,
};
use crate::qstate::{BlochVector, CVec3, Sign};
use crate::weakvalues::{swap_sweep, two_state_cut, SweepSeries, TwoBitOutcome, WeakValueError};

/// Single-qubit prepare/measure circuit: prepared along `i_hat`, measured in
/// the `f_axis` basis with the given outcome.
pub fn prepare_measure_circuit(
    i_hat: BlochVector,
    f_axis: BlochVector,
    outcome: Sign,
) -> CircuitSpec {
    CircuitSpec::new(
        1,
        Prep::Wires(vec![i_hat]),
        vec![],
        Meas::Wires(vec![(f_axis, outcome)]),
    )
    .expect("single-qubit prepare/measure circuit is valid")
}

/// The √SWAP demo circuit, post-selected on the given joint outcome.
pub fn sqrt_swap_demo(outcome: TwoBitOutcome) -> CircuitSpec {
    let (sa, sb) = outcome.signs();
    CircuitSpec::new(
        2,
        Prep::Wires(vec![BlochVector::X, BlochVector::Y]),
        vec![vec![GateOp::SwapAlpha { wire_a: 0, wire_b: 1, alpha: 0.5 }]],
        Meas::Wires(vec![(BlochVector::Z, sa), (BlochVector::Z, sb)]),
    )
    .expect("demo circuit is valid")
}

/// The hidden-variable boundary problem matching [`sqrt_swap_demo`].
pub fn demo_problem(outcome: TwoBitOutcome) -> HvProblem {
    let (sa, sb) = outcome.signs();
    HvProblem::new(
        0.5,
        BlochVector::X,
        BlochVector::Y,
        (BlochVector::Z, sa),
        (BlochVector::Z, sb),
        ConstraintMode::Full,
    )
    .expect("demo problem is valid")
}

/// Extract the hidden-variable problem from a circuit consisting of exactly
/// one SwapAlpha moment with product boundaries.
pub fn problem_from_circuit(
    c: &CircuitSpec,
    mode: ConstraintMode,
) -> Result<(HvProblem, GateId), String> {
    let gates: Vec<_> = c.gates().collect();
    let [(gate_id, _, gate)] = gates.as_slice() else {
        return Err("circuit must contain exactly one gate".to_string());
    };
    let GateOp::SwapAlpha { wire_a, wire_b, alpha } = **gate else {
        return Err("the gate must be a SwapAlpha".to_string());
    };
    if c.n_qubits() != 2 || wire_a != 0 || wire_b != 1 {
        return Err("circuit must be two wires entering one SwapAlpha".to_string());
    }
    let Some(prep) = c.prep_wires() else {
        return Err("preparation must be per-wire Bloch vectors".to_string());
    };
    let Some(meas) = c.meas_wires() else {
        return Err("measurement must be per-wire (axis, outcome) entries".to_string());
    };
    let problem = HvProblem::new(alpha, prep[0], prep[1], meas[0], meas[1], mode)
        .map_err(|e| e.to_string())?;
    Ok((problem, *gate_id))
}

// ---------------------------------------------------------------------------
// fig3: a weak-value component pair across a long exchange sweep, with its
// sinusoidal fit
// ---------------------------------------------------------------------------

/// Least-squares fit of one real series to c0 + a·cos(πτ) + b·sin(πτ).
#[derive(Debug, Clone, Serialize)]
pub struct SinusoidFit {
    pub series: String,
    pub offset: f64,
    pub cos_amp: f64,
    pub sin_amp: f64,
    pub max_residual: f64,
}

fn fit_sinusoid(tau: &[f64], y: &[f64], series: &str) -> SinusoidFit {
    let pi = std::f64::consts::PI;
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (&t, &v) in tau.iter().zip(y) {
        let basis = [1.0, (pi * t).cos(), (pi * t).sin()];
        for i in 0..3 {
            aty[i] += basis[i] * v;
            for j in 0..3 {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&ata);
    let mut coef = [0.0f64; 3];
    for k in 0..3 {
        let mut m = ata;
        for row in 0..3 {
            m[row][k] = aty[row];
        }
        coef[k] = det3(&m) / d;
    }
    let max_residual = tau
        .iter()
        .zip(y)
        .map(|(&t, &v)| {
            (v - coef[0] - coef[1] * (pi * t).cos() - coef[2] * (pi * t).sin()).abs()
        })
        .fold(0.0, f64::max);
    SinusoidFit {
        series: series.to_string(),
        offset: coef[0],
        cos_amp: coef[1],
        sin_amp: coef[2],
        max_residual,
    }
}

/// One weak-value component for each of the two interacting qubits, swept
/// across a long exchange gate, plus sinusoidal fits of all four real
/// series.
#[derive(Debug, Clone)]
pub struct ComponentSweep {
    pub rng_seed: u64,
    pub alpha: f64,
    pub series: SweepSeries,
    pub fits: Vec<SinusoidFit>,
}

impl ComponentSweep {
    pub const CSV_HEADER: &'static str = "tau,re_wax,im_wax,re_wbx,im_wbx";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for k in 0..self.series.len() {
            let cols = [
                crate::jsonfmt::float(self.series.tau[k]),
                crate::jsonfmt::float(self.series.w_a[k].x.re),
                crate::jsonfmt::float(self.series.w_a[k].x.im),
                crate::jsonfmt::float(self.series.w_b[k].x.re),
                crate::jsonfmt::float(self.series.w_b[k].x.im),
            ];
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }

    pub fn worst_fit_residual(&self) -> f64 {
        self.fits.iter().map(|f| f.max_residual).fold(0.0, f64::max)
    }
}

/// Sweep the x-components of w_a and w_b across a random two-qubit exchange
/// instance of duration `alpha`, on a uniform grid of the given step.
pub fn component_sweep(
    rng_seed: u64,
    alpha: f64,
    tau_step: f64,
) -> Result<ComponentSweep, WeakValueError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
    let circuit = crate::random::swap_pair_instance(&mut rng, alpha, 0.05);
    let grid = crate::weakvalues::uniform_grid(alpha, tau_step);
    let series = swap_sweep(&circuit, GateId(0), &grid)?;
    let pull = |f: fn(&CVec3) -> f64, src: &[CVec3]| -> Vec<f64> { src.iter().map(f).collect() };
    let fits = vec![
        fit_sinusoid(&series.tau, &pull(|v| v.x.re, &series.w_a), "re_wax"),
        fit_sinusoid(&series.tau, &pull(|v| v.x.im, &series.w_a), "im_wax"),
        fit_sinusoid(&series.tau, &pull(|v| v.x.re, &series.w_b), "re_wbx"),
        fit_sinusoid(&series.tau, &pull(|v| v.x.im, &series.w_b), "im_wbx"),
    ];
    Ok(ComponentSweep { rng_seed, alpha, series, fits })
}

// ---------------------------------------------------------------------------
// fig5: weak values at the gate boundaries for every allowed outcome
// ---------------------------------------------------------------------------

fn cvec_json(v: &CVec3) -> [[f64; 2]; 3] {
    let c = v.components();
    [[c[0].re, c[0].im], [c[1].re, c[1].im], [c[2].re, c[2].im]]
}

/// One row of the boundary-value table: (w_a, w_b) of one outcome at τ = 0
/// or τ = 0.5, engine-computed.
#[derive(Debug, Clone, Serialize)]
pub struct EndpointRow {
    pub outcome: &'static str,
    pub tau: f64,
    pub w_a: [[f64; 2]; 3],
    pub w_b: [[f64; 2]; 3],
}

/// Weak vectors of the demo circuit at the gate input and output for the
/// three allowed outcomes.
pub fn endpoint_table() -> Vec<EndpointRow> {
    let mut rows = Vec::new();
    for outcome in [
        TwoBitOutcome::ZeroZero,
        TwoBitOutcome::OneZero,
        TwoBitOutcome::OneOne,
    ] {
        let circuit = sqrt_swap_demo(outcome);
        for tau in [0.0, 0.5] {
            let cut = crate::circuit::Cut::Inside { gate: GateId(0), tau };
            let states = two_state_cut(&circuit, &cut).expect("allowed outcome");
            let w_a = states.weak_vector(0).expect("wire 0");
            let w_b = states.weak_vector(1).expect("wire 1");
            rows.push(EndpointRow {
                outcome: outcome.label(),
                tau,
                w_a: cvec_json(&w_a),
                w_b: cvec_json(&w_b),
            });
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// fig6: the hidden-variable solution census
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CensusSolution {
    pub outcome: &'static str,
    pub s_a0: [[f64; 2]; 3],
    pub s_b0: [[f64; 2]; 3],
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSummary {
    pub alpha: f64,
    pub prep_a: [f64; 3],
    pub prep_b: [f64; 3],
    pub meas_axis_a: [f64; 3],
    pub meas_axis_b: [f64; 3],
}

/// The solver report for all four outcomes of the demo measurement;
/// serializes to the published solver-report JSON schema.
#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub problem: ProblemSummary,
    pub mode: ConstraintMode,
    pub n_seeds: usize,
    pub rng_seed: u64,
    pub solutions: Vec<CensusSolution>,
    pub counts: Vec<usize>,
    pub probabilities: Vec<f64>,
}

/// Solve the demo problem for every outcome sign pair and assemble the
/// census report. Counts and probabilities are ordered 00, 01, 10, 11.
pub fn solution_census(
    n_seeds: usize,
    rng_seed: u64,
    mode: ConstraintMode,
) -> (BTreeMap<TwoBitOutcome, SolutionSet>, SolverReport) {
    let mut sets = BTreeMap::new();
    for outcome in TwoBitOutcome::ALL {
        let mut problem = demo_problem(outcome);
        problem.mode = mode;
        sets.insert(outcome, solve(&problem, n_seeds, rng_seed));
    }
    let report = census_report(&sets, n_seeds, rng_seed, mode);
    (sets, report)
}

fn census_report(
    sets: &BTreeMap<TwoBitOutcome, SolutionSet>,
    n_seeds: usize,
    rng_seed: u64,
    mode: ConstraintMode,
) -> SolverReport {
    let base = demo_problem(TwoBitOutcome::ZeroZero);
    let bloch = |b: BlochVector| [b.x, b.y, b.z];
    let mut solutions = Vec::new();
    let mut counts = Vec::new();
    for outcome in TwoBitOutcome::ALL {
        let set = &sets[&outcome];
        counts.push(set.len());
        for (sol, residual) in set.solutions.iter().zip(&set.residuals) {
            solutions.push(CensusSolution {
                outcome: outcome.label(),
                s_a0: cvec_json(&sol.s_a0),
                s_b0: cvec_json(&sol.s_b0),
                residual: *residual,
            });
        }
    }
    let total: usize = counts.iter().sum();
    let probabilities = counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect();
    SolverReport {
        problem: ProblemSummary {
            alpha: base.alpha,
            prep_a: bloch(base.prep_a),
            prep_b: bloch(base.prep_b),
            meas_axis_a: bloch(base.meas_a.0),
            meas_axis_b: bloch(base.meas_b.0),
        },
        mode,
        n_seeds,
        rng_seed,
        solutions,
        counts,
        probabilities,
    }
}

/// Census over [`hvmodel::solve_stable`], for callers that need the
/// count-stability evidence alongside the report.
pub fn stable_solution_census(
    base_seeds: usize,
    rng_seed: u64,
    mode: ConstraintMode,
) -> (
    BTreeMap<TwoBitOutcome, SolutionSet>,
    Vec<hvmodel::StabilityReport>,
    SolverReport,
) {
    let mut sets = BTreeMap::new();
    let mut stability = Vec::new();
    for outcome in TwoBitOutcome::ALL {
        let mut problem = demo_problem(outcome);
        problem.mode = mode;
        let (set, report) = hvmodel::solve_stable(&problem, base_seeds, rng_seed);
        sets.insert(outcome, set);
        stability.push(report);
    }
    let report = census_report(&sets, base_seeds * 4, rng_seed, mode);
    (sets, stability, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::born_probability;
    use crate::weakvalues::sqrt_swap_closed_form;

    #[test]
    fn demo_probabilities() {
        let want = [
            (TwoBitOutcome::ZeroZero, 0.25),
            (TwoBitOutcome::ZeroOne, 0.0),
            (TwoBitOutcome::OneZero, 0.5),
            (TwoBitOutcome::OneOne, 0.25),
        ];
        for (outcome, p) in want {
            let got = born_probability(&sqrt_swap_demo(outcome)).unwrap();
            assert!((got - p).abs() < 1e-12, "{outcome:?}: {got}");
        }
    }

    #[test]
    fn endpoint_table_matches_closed_forms() {
        let rows = endpoint_table();
        assert_eq!(rows.len(), 6);
        for row in &rows {
            let outcome = TwoBitOutcome::from_label(row.outcome).unwrap();
            let (wa, wb) = sqrt_swap_closed_form(outcome, row.tau).unwrap();
            for (got, want) in [(&row.w_a, wa), (&row.w_b, wb)] {
                for (g, w) in got.iter().zip(want.components()) {
                    assert!((g[0] - w.re).abs() < 1e-10 && (g[1] - w.im).abs() < 1e-10);
                }
            }
        }
        // The |00⟩ output row, frozen from the closed-form oracle:
        // w_a(0.5) = (1+i, 1−i, 1) and w_b(0.5) = (0, 0, 1).
        let row = rows
            .iter()
            .find(|r| r.outcome == "00" && r.tau == 0.5)
            .unwrap();
        let want_a = [[1.0, 1.0], [1.0, -1.0], [1.0, 0.0]];
        let want_b = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]];
        for k in 0..3 {
            assert!((row.w_a[k][0] - want_a[k][0]).abs() < 1e-10);
            assert!((row.w_a[k][1] - want_a[k][1]).abs() < 1e-10);
            assert!((row.w_b[k][0] - want_b[k][0]).abs() < 1e-10);
            assert!((row.w_b[k][1] - want_b[k][1]).abs() < 1e-10);
        }
    }

    #[test]
    fn component_sweep_fits_are_essentially_perfect() {
        let sweep = component_sweep(1, 2.3, 0.01).unwrap();
        assert!(sweep.worst_fit_residual() <= 1e-8, "{}", sweep.worst_fit_residual());
        let csv = sweep.to_csv();
        assert!(csv.starts_with(ComponentSweep::CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + sweep.series.len());
    }

    #[test]
    fn swap_and_return_in_long_sweeps() {
        // Components swap at τ=1 and return at τ=2.
        let sweep = component_sweep(1, 2.3, 0.01).unwrap();
        let s = &sweep.series;
        let at = |t: f64| {
            s.tau
                .iter()
                .position(|&x| (x - t).abs() < 1e-9)
                .expect("grid point")
        };
        let (k0, k1, k2) = (at(0.0), at(1.0), at(2.0));
        assert!(s.w_a[k1].max_abs_diff(&s.w_b[k0]) < 1e-9);
        assert!(s.w_b[k1].max_abs_diff(&s.w_a[k0]) < 1e-9);
        assert!(s.w_a[k2].max_abs_diff(&s.w_a[k0]) < 1e-9);
    }

    #[test]
    fn census_reproduces_the_counts() {
        let (sets, report) = solution_census(200, 7, ConstraintMode::Full);
        assert_eq!(report.counts, vec![2, 0, 4, 2]);
        assert_eq!(report.probabilities, vec![0.25, 0.0, 0.5, 0.25]);
        assert_eq!(sets[&TwoBitOutcome::OneZero].len(), 4);
        let json = crate::jsonfmt::to_string(&report);
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["counts"][2], 4);
        assert_eq!(parsed["mode"], "full");
    }

    #[test]
    fn problem_extraction_from_circuit() {
        let c = sqrt_swap_demo(TwoBitOutcome::OneZero);
        let (p, gate) = problem_from_circuit(&c, ConstraintMode::Full).unwrap();
        assert_eq!(gate, GateId(0));
        assert_eq!(p.alpha, 0.5);
        assert_eq!(p.meas_a.1, Sign::Minus);

        let bad = prepare_measure_circuit(BlochVector::Z, BlochVector::Z, Sign::Plus);
        assert!(problem_from_circuit(&bad, ConstraintMode::Full).is_err());
    }
}
