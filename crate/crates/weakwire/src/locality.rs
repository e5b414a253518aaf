//! Numerical certification of the dynamic-locality behavior of weak values.
//!
//! Each check compares engine-computed weak vectors against a claimed law
//! and reports the worst residual. Checks distinguish three outcomes:
//!
//! * `Pass` / `Fail`: the law was asserted and held / was violated;
//! * `NotAsserted`: the law's preconditions were not met where violations
//!   occurred, so the residual is reported without judgement (some laws are
//!   conditional on separability of the boundary states).
//!
//! A check precondition violation (caller error: wrong gate kind, gates on a
//! wire that must be idle, …) is a hard `CheckError`, not a report.

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{
    evolve_forward, evolve_retro, rotation_matrix, CircuitError, CircuitSpec, Cut, GateId,
    GateOp, Meas,
};
use crate::qstate::{
    bloch_expectation, reduced_purity, BlochVector, CVec3, Operator, QstateError,
};
use crate::weakvalues::{swap_sweep, weak_vector, SweepSeries, WeakValueError};

/// Default absolute tolerance for asserted identities. Weak values are O(1)
/// in every shipped experiment, so absolute (not relative) bounds apply.
pub const CHECK_TOL: f64 = 1e-10;

/// A wire counts as separable when its reduced purity is within this of 1.
pub const SEPARABILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("wire {wire} has a gate between the given cuts")]
    WireHasGates { wire: usize },
    #[error("gate {0:?} is not a single-qubit rotation")]
    NotRotation(GateId),
    #[error("wire {wire} is not measured in a product-basis outcome")]
    NotProductMeasured { wire: usize },
    #[error("check requires a gateless prepare/measure circuit with product boundaries")]
    NotPrepareMeasure,
    #[error("tau grid is not uniform")]
    NonUniformGrid,
    #[error("sweep too short for finite differences")]
    GridTooShort,
    #[error(transparent)]
    WeakValue(#[from] WeakValueError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Qstate(#[from] QstateError),
}

/// Where the worst residual occurred.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wire: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The residual is reported but the law was not asserted (conditional
    /// identity whose preconditions were unmet).
    NotAsserted { reason: String },
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub check: String,
    pub status: CheckStatus,
    pub max_residual: f64,
    pub tolerance: f64,
    pub witness: Option<Witness>,
}

impl CheckReport {
    fn from_residual(
        check: &str,
        max_residual: f64,
        tolerance: f64,
        witness: Option<Witness>,
    ) -> CheckReport {
        let status = if max_residual <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        CheckReport {
            check: check.to_string(),
            status,
            max_residual,
            tolerance,
            witness,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

#[derive(Serialize)]
struct CheckReportJson<'a> {
    check: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<&'a str>,
    max_residual: f64,
    tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<&'a Witness>,
}

/// Serialize reports to the published JSON array schema
/// `{check, pass|skipped, max_residual, tolerance, witness}`.
pub fn reports_to_json(reports: &[CheckReport]) -> String {
    let rows: Vec<CheckReportJson> = reports
        .iter()
        .map(|r| {
            let (pass, skipped) = match &r.status {
                CheckStatus::Pass => (Some(true), None),
                CheckStatus::Fail => (Some(false), None),
                CheckStatus::NotAsserted { reason } => (None, Some(reason.as_str())),
            };
            CheckReportJson {
                check: &r.check,
                pass,
                skipped,
                max_residual: r.max_residual,
                tolerance: r.tolerance,
                witness: r.witness.as_ref(),
            }
        })
        .collect();
    crate::jsonfmt::to_string(&rows)
}

fn cut_span(cut: &Cut, c: &CircuitSpec) -> Result<f64, CheckError> {
    Ok(match *cut {
        Cut::Before(k) => k as f64,
        Cut::Inside { gate, .. } => {
            let (m, _, _) = c.locate(gate)?;
            m as f64 + 0.5
        }
    })
}

fn witness_for_cut(cut: &Cut, wire: Option<usize>) -> Witness {
    match *cut {
        Cut::Before(k) => Witness { wire, moment: Some(k), ..Default::default() },
        Cut::Inside { tau, .. } => Witness { wire, tau: Some(tau), ..Default::default() },
    }
}

/// The weak vector of `wire` must be identical at every given cut, provided
/// no gate acts on the wire anywhere between them.
pub fn check_wire_constancy(
    c: &CircuitSpec,
    wire: usize,
    cuts: &[Cut],
) -> Result<CheckReport, CheckError> {
    let positions = cuts
        .iter()
        .map(|cut| cut_span(cut, c))
        .collect::<Result<Vec<f64>, _>>()?;
    let lo = positions.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (_, m, g) in c.gates() {
        let (g_lo, g_hi) = (m as f64, m as f64 + 1.0);
        if g.touches(wire) && g_hi > lo && g_lo < hi {
            return Err(CheckError::WireHasGates { wire });
        }
    }

    let reference = weak_vector(c, &cuts[0], wire)?;
    let mut max_residual = 0.0f64;
    let mut witness = witness_for_cut(&cuts[0], Some(wire));
    for cut in cuts {
        let w = weak_vector(c, cut, wire)?;
        let r = w.max_abs_diff(&reference);
        if r > max_residual {
            max_residual = r;
            witness = witness_for_cut(cut, Some(wire));
        }
    }
    Ok(CheckReport::from_residual(
        "wire_constancy",
        max_residual,
        CHECK_TOL,
        Some(witness),
    ))
}

/// The 3×3 Bloch rotation realized by a single-qubit unitary:
/// `R_jk = ½ Tr(σ_j U σ_k U†)`.
pub fn conjugation_rotation(u: &Operator) -> [[f64; 3]; 3] {
    let paulis = Operator::paulis();
    let udag = u.dagger();
    let mut r = [[0.0; 3]; 3];
    for (j, sj) in paulis.iter().enumerate() {
        for (k, sk) in paulis.iter().enumerate() {
            let m = sj.matmul(&u.matmul(&sk.matmul(&udag)));
            r[j][k] = 0.5 * m.trace().re;
        }
    }
    r
}

fn rotate_cvec(r: &[[f64; 3]; 3], v: &CVec3) -> CVec3 {
    let comps = v.components();
    let mut out = [num_complex::Complex64::new(0.0, 0.0); 3];
    for j in 0..3 {
        for k in 0..3 {
            out[j] += comps[k] * r[j][k];
        }
    }
    CVec3::new(out[0], out[1], out[2])
}

/// Through a single-qubit rotation gate, the wire's weak vector is subjected
/// to exactly the gate's Bloch rotation: w_after = R·w_before, applied to
/// the real and imaginary parts alike.
pub fn check_gate_rotation(c: &CircuitSpec, gate: GateId) -> Result<CheckReport, CheckError> {
    let (m, _, g) = c.locate(gate)?;
    let (wire, u) = match *g {
        GateOp::Rotation { wire, axis, angle, phase } => {
            (wire, rotation_matrix(axis, angle, phase))
        }
        GateOp::SwapAlpha { .. } => return Err(CheckError::NotRotation(gate)),
    };
    let w_before = weak_vector(c, &Cut::Before(m), wire)?;
    let w_after = weak_vector(c, &Cut::Before(m + 1), wire)?;
    let rotated = rotate_cvec(&conjugation_rotation(&u), &w_before);
    let residual = w_after.max_abs_diff(&rotated);
    Ok(CheckReport::from_residual(
        "gate_rotation",
        residual,
        CHECK_TOL,
        Some(Witness {
            wire: Some(wire),
            moment: Some(m),
            ..Default::default()
        }),
    ))
}

/// The measured direction of `wire`, when the measurement record fixes one:
/// the per-wire entry, or the product factor of an explicit |f⟩ that is
/// separable on this wire.
fn measured_direction(c: &CircuitSpec, wire: usize) -> Result<BlochVector, CheckError> {
    match c.meas() {
        Meas::Wires(ws) => {
            let (axis, sign) = ws[wire];
            Ok(axis.scaled(sign.as_f64()))
        }
        Meas::State(f) => {
            if reduced_purity(f, wire)? < 1.0 - SEPARABILITY_TOL {
                return Err(CheckError::NotProductMeasured { wire });
            }
            Ok(bloch_expectation(f, wire)?.normalized())
        }
    }
}

/// At the final cut, the measured wire's weak vector satisfies w·f̂ = 1 with
/// no imaginary part in that direction.
pub fn check_measurement_anchor(
    c: &CircuitSpec,
    wire: usize,
) -> Result<CheckReport, CheckError> {
    let f_hat = measured_direction(c, wire)?;
    let w = weak_vector(c, &c.final_cut(), wire)?;
    let anchor = w.dot(&CVec3::from_bloch(f_hat));
    let residual = (anchor - num_complex::Complex64::new(1.0, 0.0)).norm();
    Ok(CheckReport::from_residual(
        "measurement_anchor",
        residual,
        CHECK_TOL,
        Some(Witness {
            wire: Some(wire),
            moment: Some(c.n_moments()),
            ..Default::default()
        }),
    ))
}

/// In a gateless prepare/measure circuit, the constant weak vector obeys
/// w = î + i(î×w) at the preparation and w = f̂ + i(w×f̂) at the measurement.
pub fn check_prep_relations(c: &CircuitSpec, wire: usize) -> Result<CheckReport, CheckError> {
    if c.gates().next().is_some() {
        return Err(CheckError::NotPrepareMeasure);
    }
    let (Some(preps), Some(meas)) = (c.prep_wires(), c.meas_wires()) else {
        return Err(CheckError::NotPrepareMeasure);
    };
    let i_hat = CVec3::from_bloch(preps[wire]);
    let (axis, sign) = meas[wire];
    let f_hat = CVec3::from_bloch(axis.scaled(sign.as_f64()));
    let w = weak_vector(c, &Cut::Before(0), wire)?;
    let i = num_complex::Complex64::i();
    let prep_residual = w.max_abs_diff(&(i_hat + i_hat.cross(&w).scaled(i)));
    let meas_residual = w.max_abs_diff(&(f_hat + w.cross(&f_hat).scaled(i)));
    Ok(CheckReport::from_residual(
        "prep_relations",
        prep_residual.max(meas_residual),
        CHECK_TOL,
        Some(Witness { wire: Some(wire), ..Default::default() }),
    ))
}

fn require_uniform(s: &SweepSeries) -> Result<f64, CheckError> {
    if s.len() < 3 {
        return Err(CheckError::GridTooShort);
    }
    s.uniform_step().ok_or(CheckError::NonUniformGrid)
}

/// Raw worst-case residual of the second-order exchange law
/// d²w/dτ² = (π²/2)(w_other − w_self) under central differences.
pub fn swap_ode_residual(s: &SweepSeries) -> Result<(f64, Witness), CheckError> {
    let h = require_uniform(s)?;
    let half_pi2 = 0.5 * std::f64::consts::PI.powi(2);
    let mut worst = (0.0f64, Witness::default());
    for (own, other) in [(&s.w_a, &s.w_b), (&s.w_b, &s.w_a)] {
        for k in 1..s.len() - 1 {
            let fd2 = (own[k + 1] - own[k] * 2.0 + own[k - 1]).scaled((1.0 / (h * h)).into());
            let law = (other[k] - own[k]) * half_pi2;
            let r = fd2.max_abs_diff(&law);
            if r > worst.0 {
                worst = (r, Witness { tau: Some(s.tau[k]), ..Default::default() });
            }
        }
    }
    Ok(worst)
}

/// Certify the second-order exchange law on a uniform sweep. The tolerance
/// is C·h² with C = 10·π⁴/4·max|w|, the fourth-derivative bound of the
/// sinusoidal solutions.
pub fn check_swap_ode(s: &SweepSeries) -> Result<CheckReport, CheckError> {
    let h = require_uniform(s)?;
    let c_bound = 10.0 * std::f64::consts::PI.powi(4) / 4.0 * s.max_abs();
    let (residual, witness) = swap_ode_residual(s)?;
    Ok(CheckReport::from_residual(
        "swap_ode",
        residual,
        c_bound * h * h,
        Some(witness),
    ))
}

/// (w_a + w_b)/2 must be constant across the whole sweep.
pub fn check_avg_conservation(s: &SweepSeries) -> Result<CheckReport, CheckError> {
    if s.is_empty() {
        return Err(CheckError::GridTooShort);
    }
    let reference = (s.w_a[0] + s.w_b[0]) * 0.5;
    let mut worst = (0.0f64, Witness::default());
    for k in 0..s.len() {
        let avg = (s.w_a[k] + s.w_b[k]) * 0.5;
        let r = avg.max_abs_diff(&reference);
        if r > worst.0 {
            worst = (r, Witness { tau: Some(s.tau[k]), ..Default::default() });
        }
    }
    Ok(CheckReport::from_residual(
        "swap_avg_conservation",
        worst.0,
        CHECK_TOL,
        Some(worst.1),
    ))
}

/// Residual of the first-order cross-product law at one grid point.
#[derive(Debug, Clone)]
pub struct CrossPointResidual {
    pub tau: f64,
    pub residual: f64,
    /// Whether the law's preconditions held here: both wires separable in
    /// both the forward and the retro state.
    pub asserted: bool,
}

/// Per-point residuals of dw_a/dτ = (π/2)·w_b×w_a (and the mirrored law for
/// w_b) against finite differences, with the separability precondition
/// evaluated at every grid point.
pub fn cross_product_residuals(
    c: &CircuitSpec,
    s: &SweepSeries,
) -> Result<Vec<CrossPointResidual>, CheckError> {
    let h = require_uniform(s)?;
    let (_, _, g) = c.locate(s.gate)?;
    let (wire_a, wire_b) = match *g {
        GateOp::SwapAlpha { wire_a, wire_b, .. } => (wire_a, wire_b),
        GateOp::Rotation { .. } => {
            return Err(CheckError::Circuit(CircuitError::NotSwapAlpha(s.gate)))
        }
    };
    let half_pi = 0.5 * std::f64::consts::PI;
    let n = s.len();
    let derivative = |series: &[CVec3], k: usize| -> CVec3 {
        if k == 0 {
            (series[0] * -3.0 + series[1] * 4.0 - series[2]) * (0.5 / h)
        } else if k == n - 1 {
            (series[n - 1] * 3.0 - series[n - 2] * 4.0 + series[n - 3]) * (0.5 / h)
        } else {
            (series[k + 1] - series[k - 1]) * (0.5 / h)
        }
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let tau = s.tau[k];
        let da = derivative(&s.w_a, k);
        let db = derivative(&s.w_b, k);
        let law_a = s.w_b[k].cross(&s.w_a[k]) * half_pi;
        let law_b = s.w_a[k].cross(&s.w_b[k]) * half_pi;
        let residual = da.max_abs_diff(&law_a).max(db.max_abs_diff(&law_b));

        let cut = Cut::Inside { gate: s.gate, tau };
        let forward = evolve_forward(c, &cut)?;
        let retro = evolve_retro(c, &cut)?;
        let separable = [&forward, &retro].iter().all(|state| {
            [wire_a, wire_b].iter().all(|&w| {
                reduced_purity(state, w).map(|p| p >= 1.0 - SEPARABILITY_TOL) == Ok(true)
            })
        });
        out.push(CrossPointResidual { tau, residual, asserted: separable });
    }
    Ok(out)
}

/// Certify the first-order cross-product law where its preconditions hold;
/// where they do not, the residual is reported without assertion.
pub fn check_cross_product(
    c: &CircuitSpec,
    s: &SweepSeries,
) -> Result<CheckReport, CheckError> {
    let h = require_uniform(s)?;
    let tolerance = 10.0 * std::f64::consts::PI.powi(3) / 3.0 * s.max_abs() * h * h;
    let points = cross_product_residuals(c, s)?;
    let overall = points
        .iter()
        .map(|p| p.residual)
        .fold(0.0f64, f64::max);
    let asserted_worst = points
        .iter()
        .filter(|p| p.asserted)
        .map(|p| p.residual)
        .fold(0.0f64, f64::max);
    let any_asserted = points.iter().any(|p| p.asserted);
    let worst_point = points
        .iter()
        .max_by(|a, b| a.residual.total_cmp(&b.residual))
        .expect("non-empty grid");
    let witness = Witness { tau: Some(worst_point.tau), ..Default::default() };

    let status = if overall <= tolerance {
        CheckStatus::Pass
    } else if any_asserted && asserted_worst > tolerance {
        CheckStatus::Fail
    } else {
        CheckStatus::NotAsserted {
            reason: "law violated only where the separability preconditions are unmet"
                .to_string(),
        }
    };
    Ok(CheckReport {
        check: "cross_product".to_string(),
        status,
        max_residual: overall,
        tolerance,
        witness: Some(witness),
    })
}

/// Check w·w = 1 at a cut, asserted only when the wire is separable in the
/// forward or the retro state there.
pub fn check_hyperbolic_norm(
    c: &CircuitSpec,
    cut: &Cut,
    wire: usize,
) -> Result<CheckReport, CheckError> {
    let w = weak_vector(c, cut, wire)?;
    let residual = (w.dot(&w) - num_complex::Complex64::new(1.0, 0.0)).norm();
    let forward_purity = reduced_purity(&evolve_forward(c, cut)?, wire)?;
    let retro_purity = reduced_purity(&evolve_retro(c, cut)?, wire)?;
    let separable = forward_purity >= 1.0 - SEPARABILITY_TOL
        || retro_purity >= 1.0 - SEPARABILITY_TOL;
    let witness = witness_for_cut(cut, Some(wire));
    if !separable {
        return Ok(CheckReport {
            check: "hyperbolic_norm".to_string(),
            status: CheckStatus::NotAsserted {
                reason: "condition not met: wire separable in neither state".to_string(),
            },
            max_residual: residual,
            tolerance: CHECK_TOL,
            witness: Some(witness),
        });
    }
    Ok(CheckReport::from_residual(
        "hyperbolic_norm",
        residual,
        CHECK_TOL,
        Some(witness),
    ))
}

// ---------------------------------------------------------------------------
// Randomized battery
// ---------------------------------------------------------------------------

fn aggregate(name: &str, mut reports: Vec<(u64, CheckReport)>) -> CheckReport {
    assert!(!reports.is_empty());
    reports.sort_by(|a, b| a.1.max_residual.total_cmp(&b.1.max_residual));
    let any_fail = reports.iter().any(|(_, r)| r.failed());
    let (seed, worst) = reports.pop().expect("non-empty");
    let mut witness = worst.witness.clone().unwrap_or_default();
    witness.instance = Some(seed);
    CheckReport {
        check: name.to_string(),
        status: if any_fail { CheckStatus::Fail } else { CheckStatus::Pass },
        max_residual: worst.max_residual,
        tolerance: worst.tolerance,
        witness: Some(witness),
    }
}

fn seeded(base: u64, k: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(base.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ k)
}

use crate::weakvalues::uniform_grid;

/// Run the full randomized verification battery: `n_instances` seeded
/// instances per randomized family plus the √SWAP demo cases, at the given
/// assertion tolerance (demo sweeps use their own h²-scaled tolerances).
pub fn run_battery(n_instances: usize, base_seed: u64, tolerance: f64) -> Vec<CheckReport> {
    use crate::experiments::sqrt_swap_demo;
    use crate::random;
    use crate::weakvalues::TwoBitOutcome;

    let mut reports = Vec::new();
    let with_tol = |mut r: CheckReport| {
        r.tolerance = tolerance;
        r.status = if r.max_residual <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        r
    };

    // Wire constancy on idle wires of random entangled circuits.
    let mut family = Vec::new();
    for k in 0..n_instances as u64 {
        let mut rng = seeded(base_seed, k);
        let n_qubits = 3 + (k % 2) as usize;
        let idle = (k % n_qubits as u64) as usize;
        let c = random::idle_wire_instance(&mut rng, n_qubits, idle, 6, 0.05);
        let cuts: Vec<Cut> = (0..=6).map(Cut::Before).collect();
        family.push((
            k,
            with_tol(check_wire_constancy(&c, idle, &cuts).expect("valid instance")),
        ));
    }
    reports.push(aggregate("wire_constancy", family));

    // Gate rotation on entangled instances.
    let mut family = Vec::new();
    for k in 0..n_instances as u64 {
        let mut rng = seeded(base_seed.wrapping_add(1), k);
        let (c, gate) = random::rotation_probe_instance(&mut rng, 0.05);
        family.push((
            k,
            with_tol(check_gate_rotation(&c, gate).expect("valid instance")),
        ));
    }
    reports.push(aggregate("gate_rotation", family));

    // Measurement anchor on product-measured instances, every wire.
    let mut family = Vec::new();
    for k in 0..n_instances as u64 {
        let mut rng = seeded(base_seed.wrapping_add(2), k);
        let c = random::product_measured_instance(&mut rng, 3, 4, 0.05);
        for wire in 0..3 {
            family.push((
                k,
                with_tol(check_measurement_anchor(&c, wire).expect("valid instance")),
            ));
        }
    }
    reports.push(aggregate("measurement_anchor", family));

    // Preparation/measurement cross-product relations, single qubit.
    let mut family = Vec::new();
    for k in 0..(2 * n_instances) as u64 {
        let mut rng = seeded(base_seed.wrapping_add(3), k);
        let c = loop {
            let c = crate::experiments::prepare_measure_circuit(
                random::random_bloch(&mut rng),
                random::random_bloch(&mut rng),
                random::random_sign(&mut rng),
            );
            if crate::circuit::transition_amplitude(&c)
                .expect("valid circuit")
                .norm()
                >= 0.05
            {
                break c;
            }
        };
        family.push((
            k,
            with_tol(check_prep_relations(&c, 0).expect("valid instance")),
        ));
    }
    reports.push(aggregate("prep_relations", family));

    // Exchange ODE + average conservation: demo outcomes and random pairs.
    let mut ode_family = Vec::new();
    let mut avg_family = Vec::new();
    let mut sweeps: Vec<(u64, SweepSeries)> = Vec::new();
    for (k, outcome) in [
        TwoBitOutcome::ZeroZero,
        TwoBitOutcome::OneZero,
        TwoBitOutcome::OneOne,
    ]
    .into_iter()
    .enumerate()
    {
        let c = sqrt_swap_demo(outcome);
        let grid = uniform_grid(0.5, 1e-3);
        sweeps.push((k as u64, swap_sweep(&c, GateId(0), &grid).expect("demo sweep")));
    }
    for k in 0..20u64 {
        let mut rng = seeded(base_seed.wrapping_add(4), k);
        use rand::Rng;
        let alpha = rng.gen_range(0.1..2.3);
        let c = random::swap_pair_instance(&mut rng, alpha, 0.05);
        let grid = uniform_grid(alpha, 1e-3);
        sweeps.push((100 + k, swap_sweep(&c, GateId(0), &grid).expect("random sweep")));
    }
    for (k, s) in &sweeps {
        ode_family.push((*k, check_swap_ode(s).expect("uniform sweep")));
        avg_family.push((*k, with_tol(check_avg_conservation(s).expect("uniform sweep"))));
    }
    reports.push(aggregate("swap_ode", ode_family));
    reports.push(aggregate("swap_avg_conservation", avg_family));

    // Cross-product law on the demo outcomes (passes for 00 and 11, large
    // unasserted residual for 10).
    for outcome in [
        TwoBitOutcome::ZeroZero,
        TwoBitOutcome::OneZero,
        TwoBitOutcome::OneOne,
    ] {
        let c = sqrt_swap_demo(outcome);
        let grid = uniform_grid(0.5, 1e-3);
        let s = swap_sweep(&c, GateId(0), &grid).expect("demo sweep");
        let mut r = check_cross_product(&c, &s).expect("uniform sweep");
        r.check = format!("cross_product_demo_{}", outcome.label());
        reports.push(r);
    }

    // Hyperbolic normalization on single-qubit circuits (always asserted).
    let mut family = Vec::new();
    for k in 0..n_instances as u64 {
        let mut rng = seeded(base_seed.wrapping_add(5), k);
        let c = loop {
            let c = crate::experiments::prepare_measure_circuit(
                random::random_bloch(&mut rng),
                random::random_bloch(&mut rng),
                random::random_sign(&mut rng),
            );
            if crate::circuit::transition_amplitude(&c)
                .expect("valid circuit")
                .norm()
                >= 0.05
            {
                break c;
            }
        };
        family.push((
            k,
            with_tol(check_hyperbolic_norm(&c, &Cut::Before(0), 0).expect("valid instance")),
        ));
    }
    reports.push(aggregate("hyperbolic_norm", family));

    // Hyperbolic normalization at demo cuts: asserted at the input
    // (separable forward state), reported unasserted in the entangled
    // interior.
    let demo = sqrt_swap_demo(TwoBitOutcome::OneZero);
    for (label, tau) in [("input", 0.0), ("interior", 0.25)] {
        let cut = Cut::Inside { gate: GateId(0), tau };
        let mut r = check_hyperbolic_norm(&demo, &cut, 0).expect("demo cut");
        r.check = format!("hyperbolic_norm_demo_{label}");
        reports.push(r);
    }

    reports
}

/// Two circuits identical except for one distant gate may disagree about a
/// wire's weak values everywhere, while each circuit still keeps that
/// wire's weak values constant on its wires. Returns
/// (between-circuit difference, worst within-circuit constancy residual).
pub fn counterfactual_distinction(seed: u64) -> Result<(f64, f64), CheckError> {
    use rand::Rng;
    let mut rng = seeded(seed, 424_242);
    let prep = crate::random::random_state(&mut rng, 2);
    let meas = crate::random::random_state(&mut rng, 2);
    let axis = crate::random::random_bloch(&mut rng);
    let build = |angle: f64| -> Result<CircuitSpec, CheckError> {
        Ok(CircuitSpec::new(
            2,
            crate::circuit::Prep::State(prep.clone()),
            vec![vec![GateOp::Rotation { wire: 1, axis, angle, phase: 0.0 }]],
            Meas::State(meas.clone()),
        )?)
    };
    let c1 = build(rng.gen_range(0.5..1.5))?;
    let c2 = build(rng.gen_range(2.0..3.0))?;
    let cuts = [Cut::Before(0), Cut::Before(1)];
    let mut constancy = 0.0f64;
    for c in [&c1, &c2] {
        let r = check_wire_constancy(c, 0, &cuts)?;
        constancy = constancy.max(r.max_residual);
    }
    let w1 = weak_vector(&c1, &Cut::Before(0), 0)?;
    let w2 = weak_vector(&c2, &Cut::Before(0), 0)?;
    Ok((w1.max_abs_diff(&w2), constancy))
}
