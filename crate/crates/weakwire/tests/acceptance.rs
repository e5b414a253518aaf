//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS line with its measured worst-case numbers (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weakwire::circuit::{born_probability, CircuitSpec, Cut, GateId};
use weakwire::experiments::{
    component_sweep, demo_problem, prepare_measure_circuit, sqrt_swap_demo,
};
use weakwire::hvmodel::{
    average_im_s, average_re_s, constraint_violations, count_probability, solve, ImAverageMode,
    SolutionSet,
};
use weakwire::locality::{
    check_avg_conservation, check_cross_product, check_gate_rotation, check_measurement_anchor,
    check_swap_ode, check_wire_constancy, swap_ode_residual, CheckStatus,
};
use weakwire::qstate::BlochVector;
use weakwire::random;
use weakwire::weakvalues::{
    hyperbolic_dot, single_qubit_closed_form, single_qubit_probability_rule, sqrt_swap_closed_form,
    swap_sweep, uniform_grid, weak_vector, TwoBitOutcome,
};
use weakwire::Sign;

const ALLOWED: [TwoBitOutcome; 3] = [
    TwoBitOutcome::ZeroZero,
    TwoBitOutcome::OneZero,
    TwoBitOutcome::OneOne,
];

fn tilted_circuit(theta0: f64, outcome: Sign) -> CircuitSpec {
    let axis = BlochVector::new(theta0.sin(), 0.0, theta0.cos());
    prepare_measure_circuit(BlochVector::Z, axis, outcome)
}

fn random_angles(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| rng.gen_range(0.05 * std::f64::consts::PI..0.95 * std::f64::consts::PI))
        .collect()
}

#[test]
fn criterion_01_single_qubit_oracle() {
    let started = Instant::now();
    let mut worst_closed = 0.0f64;
    let mut worst_norm = 0.0f64;
    for theta0 in random_angles(100, 101) {
        for outcome in [Sign::Plus, Sign::Minus] {
            let circuit = tilted_circuit(theta0, outcome);
            let engine = weak_vector(&circuit, &Cut::Before(0), 0).unwrap();
            let closed = single_qubit_closed_form(theta0, outcome).unwrap();
            worst_closed = worst_closed.max(engine.max_abs_diff(&closed));
            let norm = hyperbolic_dot(&engine, &engine);
            worst_norm =
                worst_norm.max((norm - num_complex::Complex64::new(1.0, 0.0)).norm());
        }
    }
    let elapsed = started.elapsed();
    assert!(worst_closed < 1e-10, "closed-form residual {worst_closed}");
    assert!(worst_norm < 1e-10, "hyperbolic norm residual {worst_norm}");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 01 PASS single-qubit oracle: closed-form {worst_closed:.2e}, w·w−1 {worst_norm:.2e}, {elapsed:?}"
    );
}

#[test]
fn criterion_02_probability_rule() {
    let mut worst = 0.0f64;
    for theta0 in random_angles(100, 202) {
        let ws = [
            single_qubit_closed_form(theta0, Sign::Plus).unwrap(),
            single_qubit_closed_form(theta0, Sign::Minus).unwrap(),
        ];
        let rule = single_qubit_probability_rule(&ws).unwrap();
        let born = [
            (theta0 / 2.0).cos().powi(2),
            (theta0 / 2.0).sin().powi(2),
        ];
        let engine_born = [
            born_probability(&tilted_circuit(theta0, Sign::Plus)).unwrap(),
            born_probability(&tilted_circuit(theta0, Sign::Minus)).unwrap(),
        ];
        for k in 0..2 {
            worst = worst
                .max((rule[k] - born[k]).abs())
                .max((rule[k] - engine_born[k]).abs());
        }
    }
    assert!(worst < 1e-10, "probability-rule residual {worst}");
    println!("criterion 02 PASS probability rule matches Born weights: worst {worst:.2e}");
}

#[test]
fn criterion_03_wire_constancy() {
    let mut worst = 0.0f64;
    for k in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + k);
        let n_qubits = 3 + (k % 2) as usize;
        let idle = (k as usize) % n_qubits;
        let circuit = random::idle_wire_instance(&mut rng, n_qubits, idle, 6, 0.05);
        let cuts: Vec<Cut> = (0..=6).map(Cut::Before).collect();
        let report = check_wire_constancy(&circuit, idle, &cuts).unwrap();
        assert!(
            report.max_residual <= 1e-10,
            "instance {k}: residual {}",
            report.max_residual
        );
        worst = worst.max(report.max_residual);
    }
    println!("criterion 03 PASS wire constancy on 50 idle-wire circuits: worst {worst:.2e}");
}

#[test]
fn criterion_04_gate_rotation() {
    let mut worst = 0.0f64;
    for k in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + k);
        let (circuit, gate) = random::rotation_probe_instance(&mut rng, 0.05);
        let report = check_gate_rotation(&circuit, gate).unwrap();
        assert!(
            report.max_residual <= 1e-10,
            "instance {k}: residual {}",
            report.max_residual
        );
        worst = worst.max(report.max_residual);
    }
    println!("criterion 04 PASS rotation conjugation on 50 entangled circuits: worst {worst:.2e}");
}

#[test]
fn criterion_05_measurement_anchor() {
    let mut worst = 0.0f64;
    for k in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + k);
        let circuit = random::product_measured_instance(&mut rng, 3, 4, 0.05);
        for wire in 0..3 {
            let report = check_measurement_anchor(&circuit, wire).unwrap();
            assert!(
                report.max_residual <= 1e-10,
                "instance {k} wire {wire}: residual {}",
                report.max_residual
            );
            worst = worst.max(report.max_residual);
        }
    }
    println!("criterion 05 PASS measurement anchor on 50 product-measured circuits: worst {worst:.2e}");
}

#[test]
fn criterion_06_swap_ode() {
    let mut sweeps: Vec<(String, CircuitSpec, f64)> = ALLOWED
        .iter()
        .map(|&o| (format!("demo {}", o.label()), sqrt_swap_demo(o), 0.5))
        .collect();
    for k in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + k);
        let alpha = rng.gen_range(0.1..2.3);
        let circuit = random::swap_pair_instance(&mut rng, alpha, 0.05);
        sweeps.push((format!("random {k}"), circuit, alpha));
    }
    let mut worst_ratio_low = f64::INFINITY;
    let mut worst_ratio_high = 0.0f64;
    let mut worst_avg = 0.0f64;
    for (label, circuit, alpha) in &sweeps {
        let coarse = swap_sweep(circuit, GateId(0), &uniform_grid(*alpha, 1e-3)).unwrap();
        let fine = swap_sweep(circuit, GateId(0), &uniform_grid(*alpha, 5e-4)).unwrap();
        let ode = check_swap_ode(&coarse).unwrap();
        assert!(
            ode.passed(),
            "{label}: ODE residual {} over tolerance {}",
            ode.max_residual,
            ode.tolerance
        );
        let (r_coarse, _) = swap_ode_residual(&coarse).unwrap();
        let (r_fine, _) = swap_ode_residual(&fine).unwrap();
        let ratio = r_coarse / r_fine;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "{label}: refinement ratio {ratio}"
        );
        worst_ratio_low = worst_ratio_low.min(ratio);
        worst_ratio_high = worst_ratio_high.max(ratio);
        let avg = check_avg_conservation(&coarse).unwrap();
        assert!(
            avg.max_residual <= 1e-10,
            "{label}: w_avg drift {}",
            avg.max_residual
        );
        worst_avg = worst_avg.max(avg.max_residual);
    }
    println!(
        "criterion 06 PASS exchange ODE on {} sweeps: h→h/2 ratios in [{worst_ratio_low:.3}, {worst_ratio_high:.3}], w_avg drift {worst_avg:.2e}",
        sweeps.len()
    );
}

#[test]
fn criterion_07_closed_form_trajectories_and_cross_product() {
    let grid: Vec<f64> = (0..=100).map(|k| 0.5 * k as f64 / 100.0).collect();
    let mut worst = 0.0f64;
    for outcome in ALLOWED {
        let circuit = sqrt_swap_demo(outcome);
        let series = swap_sweep(&circuit, GateId(0), &grid).unwrap();
        for (k, &tau) in grid.iter().enumerate() {
            let (wa, wb) = sqrt_swap_closed_form(outcome, tau).unwrap();
            worst = worst
                .max(series.w_a[k].max_abs_diff(&wa))
                .max(series.w_b[k].max_abs_diff(&wb));
        }
    }
    assert!(worst < 1e-10, "closed-form trajectory residual {worst}");

    let fine = uniform_grid(0.5, 1e-3);
    for outcome in [TwoBitOutcome::ZeroZero, TwoBitOutcome::OneOne] {
        let circuit = sqrt_swap_demo(outcome);
        let series = swap_sweep(&circuit, GateId(0), &fine).unwrap();
        let report = check_cross_product(&circuit, &series).unwrap();
        assert!(
            report.passed(),
            "{outcome:?}: cross-product law should hold ({:?}, residual {})",
            report.status,
            report.max_residual
        );
    }
    let circuit = sqrt_swap_demo(TwoBitOutcome::OneZero);
    let series = swap_sweep(&circuit, GateId(0), &fine).unwrap();
    let report = check_cross_product(&circuit, &series).unwrap();
    assert!(
        matches!(report.status, CheckStatus::NotAsserted { .. }),
        "10 outcome must not be asserted"
    );
    assert!(
        report.max_residual > 0.1,
        "10 outcome should visibly violate the law, residual {}",
        report.max_residual
    );
    println!(
        "criterion 07 PASS closed-form trajectories (worst {worst:.2e}); cross-product law holds for 00/11 and fails for 10 (residual {:.3})",
        report.max_residual
    );
}

#[test]
fn criterion_08_born_probabilities() {
    let want = [
        (TwoBitOutcome::ZeroZero, 0.25),
        (TwoBitOutcome::ZeroOne, 0.0),
        (TwoBitOutcome::OneZero, 0.50),
        (TwoBitOutcome::OneOne, 0.25),
    ];
    let mut worst = 0.0f64;
    for (outcome, expected) in want {
        let p = born_probability(&sqrt_swap_demo(outcome)).unwrap();
        assert!(
            (p - expected).abs() < 1e-12,
            "{outcome:?}: got {p}, want {expected}"
        );
        worst = worst.max((p - expected).abs());
    }
    println!("criterion 08 PASS Born probabilities {{0.25, 0, 0.50, 0.25}}: worst {worst:.2e}");
}

fn demo_counts(n_seeds: usize, rng_seed: u64) -> BTreeMap<TwoBitOutcome, SolutionSet> {
    TwoBitOutcome::ALL
        .into_iter()
        .map(|outcome| (outcome, solve(&demo_problem(outcome), n_seeds, rng_seed)))
        .collect()
}

#[test]
fn criterion_09_solution_counts() {
    let started = Instant::now();
    let sets = demo_counts(400, 7);
    let elapsed = started.elapsed();

    let want = [
        (TwoBitOutcome::ZeroZero, 2usize),
        (TwoBitOutcome::ZeroOne, 0),
        (TwoBitOutcome::OneZero, 4),
        (TwoBitOutcome::OneOne, 2),
    ];
    for (outcome, count) in want {
        assert_eq!(sets[&outcome].len(), count, "{outcome:?} count");
    }

    // Stability across seed doublings.
    for n_seeds in [200, 800] {
        let ladder = demo_counts(n_seeds, 7);
        for (outcome, count) in want {
            assert_eq!(
                ladder[&outcome].len(),
                count,
                "{outcome:?} count at {n_seeds} seeds"
            );
        }
    }

    // Every solution satisfies all 14 constraints to 1e-8.
    let mut worst_violation = 0.0f64;
    for set in sets.values() {
        for sol in &set.solutions {
            let params = weakwire::hvmodel::pair_to_params(&sol.s_a0, &sol.s_b0);
            let v = constraint_violations(&params, &set.problem).unwrap();
            assert_eq!(v.len(), 14);
            for violation in &v {
                assert!(violation.abs() <= 1e-8, "violation {violation}");
                worst_violation = worst_violation.max(violation.abs());
            }
        }
    }

    // Count-derived probabilities equal the Born probabilities.
    let probs = count_probability(&sets).unwrap();
    let mut worst_prob = 0.0f64;
    for outcome in TwoBitOutcome::ALL {
        let born = born_probability(&sqrt_swap_demo(outcome)).unwrap();
        worst_prob = worst_prob.max((probs[&outcome] - born).abs());
    }
    assert!(worst_prob < 1e-12, "count vs Born probabilities {worst_prob}");
    assert!(elapsed.as_secs_f64() < 60.0, "400-seed census took {elapsed:?}");
    println!(
        "criterion 09 PASS solution counts {{2,0,4,2}} stable over 200/400/800 seeds; constraints ≤ {worst_violation:.2e}; probabilities match Born to {worst_prob:.2e}; 400-seed census in {elapsed:?}"
    );
}

#[test]
fn criterion_10_averaging_recovery() {
    let grid: Vec<f64> = (0..=50).map(|k| 0.5 * k as f64 / 50.0).collect();
    let mut worst_re = 0.0f64;
    let mut worst_im_all = 0.0f64;
    let mut worst_im_half = 0.0f64;
    for outcome in ALLOWED {
        let set = solve(&demo_problem(outcome), 400, 7);
        let re = average_re_s(&set, &grid).unwrap();
        let im_all = average_im_s(&set, &grid, ImAverageMode::All).unwrap();
        for (k, &tau) in grid.iter().enumerate() {
            let (wa, wb) = sqrt_swap_closed_form(outcome, tau).unwrap();
            for (got, want) in [(&re.a[k], wa.re()), (&re.b[k], wb.re())] {
                let d = (got.x - want.x)
                    .abs()
                    .max((got.y - want.y).abs())
                    .max((got.z - want.z).abs());
                assert!(d < 1e-6, "{outcome:?} Re residual {d} at tau {tau}");
                worst_re = worst_re.max(d);
            }
            for v in [&im_all.a[k], &im_all.b[k]] {
                assert!(v.norm() < 1e-6, "{outcome:?} Im(all) {} at tau {tau}", v.norm());
                worst_im_all = worst_im_all.max(v.norm());
            }
        }

        let im_half = average_im_s(&set, &grid, ImAverageMode::FirstHalf).unwrap();
        let mut residual = 0.0f64;
        for (k, &tau) in grid.iter().enumerate() {
            let (wa, wb) = sqrt_swap_closed_form(outcome, tau).unwrap();
            for (got, want) in [(&im_half.a[k], wa.im()), (&im_half.b[k], wb.im())] {
                residual = residual
                    .max((got.x - want.x).abs())
                    .max((got.y - want.y).abs())
                    .max((got.z - want.z).abs());
            }
        }
        match outcome {
            // The half-set recovery holds for the diagonal outcomes.
            TwoBitOutcome::ZeroZero | TwoBitOutcome::OneOne => {
                assert!(residual < 1e-6, "{outcome:?} Im(first-half) residual {residual}");
                worst_im_half = worst_im_half.max(residual);
            }
            // For 10 no selection of one solution per conjugate pair can
            // reproduce Im(w); the suite pins the measured deviation instead
            // (see the decisions ledger for the enumeration argument).
            TwoBitOutcome::OneZero => {
                assert!(
                    residual > 0.1,
                    "10 outcome unexpectedly recovered Im(w): residual {residual}"
                );
            }
            TwoBitOutcome::ZeroOne => unreachable!(),
        }
    }
    println!(
        "criterion 10 PASS averaging recovery: Re ≤ {worst_re:.2e} on 51 points, Im(all) ≤ {worst_im_all:.2e}, Im(first-half) ≤ {worst_im_half:.2e} for 00/11 (10 deviates as documented)"
    );
}

#[test]
fn criterion_11_component_sweep_fit() {
    let sweep = component_sweep(7, 2.3, 0.01).unwrap();
    let residual = sweep.worst_fit_residual();
    assert!(residual <= 1e-8, "fit residual {residual}");
    println!(
        "criterion 11 PASS sinusoidal fit over [0, 2.3]: max residual {residual:.2e} across {} fitted series",
        sweep.fits.len()
    );
}
