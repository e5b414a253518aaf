//! `weakwire`: weak values on circuit wires from the command line.
//!
//! Subcommands:
//!
//! * `weak`      per-wire, per-cut weak vectors of a circuit (JSON out)
//! * `sweep`     weak-value trajectories inside a SwapAlpha gate (CSV out)
//! * `verify`    run the dynamic-locality check suite (JSON report array)
//! * `hv-solve`  multistart hidden-variable solve over all outcome signs
//! * `reproduce` canned data products: `--figure fig3|fig5|fig6`
//!
//! Exit codes: 0 success, 1 input error, 2 forbidden outcome (zero
//! transition amplitude), 3 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use weakwire::circuit::{transition_amplitude, CircuitSpec, Cut};
use weakwire::experiments;
use weakwire::hvmodel::ConstraintMode;
use weakwire::jsonfmt;
use weakwire::locality;
use weakwire::weakvalues::{swap_sweep, two_state_cut, TwoBitOutcome, WeakValueError};

#[derive(Parser)]
#[command(name = "weakwire", version, about = "Post-selected weak values on quantum circuit wires")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Relaxed,
}

impl From<ModeArg> for ConstraintMode {
    fn from(m: ModeArg) -> ConstraintMode {
        match m {
            ModeArg::Full => ConstraintMode::Full,
            ModeArg::Relaxed => ConstraintMode::Relaxed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig3,
    Fig5,
    Fig6,
}

#[derive(Subcommand)]
enum Command {
    /// Weak vectors of every wire at every boundary cut of a circuit.
    Weak {
        /// Circuit JSON path.
        #[arg(long)]
        input: PathBuf,
        /// Output path (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Weak-value trajectories inside a SwapAlpha gate, as CSV.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Gate index (defaults to the first SwapAlpha in the circuit).
        #[arg(long)]
        gate: Option<usize>,
        /// Interior-time grid step.
        #[arg(long, default_value_t = 1e-2)]
        tau_step: f64,
    },
    /// Run the verification suite; exits 3 if any check fails.
    Verify {
        /// Optional circuit JSON: when given, the applicable checks run on
        /// that circuit; otherwise the randomized battery runs.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Assertion tolerance for the checks.
        #[arg(long, default_value_t = locality::CHECK_TOL)]
        tolerance: f64,
        /// Instances per randomized check family.
        #[arg(long, default_value_t = 50)]
        instances: usize,
        /// Base seed for the randomized instance families.
        #[arg(long, default_value_t = 1)]
        rng_seed: u64,
    },
    /// Solve the hidden-variable problem of a single-SwapAlpha circuit for
    /// all four outcome sign pairs.
    HvSolve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Random starts per outcome.
        #[arg(long, default_value_t = 400)]
        seeds: usize,
        #[arg(long, default_value_t = 7)]
        rng_seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Full)]
        mode: ModeArg,
        /// Directory for per-solution trajectory CSV files
        /// (`<outcome>_<index>.csv`).
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Emit a canned data product.
    Reproduce {
        #[arg(long, value_enum)]
        figure: FigureArg,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Grid step for fig3.
        #[arg(long, default_value_t = 1e-2)]
        tau_step: f64,
        /// Random starts per outcome for fig6.
        #[arg(long, default_value_t = 400)]
        seeds: usize,
        #[arg(long, default_value_t = 7)]
        rng_seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Full)]
        mode: ModeArg,
    },
}

enum CmdError {
    Input(String),
    ForbiddenOutcome(String),
    VerificationFailure(String),
}

impl CmdError {
    fn exit_code(&self) -> u8 {
        match self {
            CmdError::Input(_) => 1,
            CmdError::ForbiddenOutcome(_) => 2,
            CmdError::VerificationFailure(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CmdError::Input(m) | CmdError::ForbiddenOutcome(m) | CmdError::VerificationFailure(m) => m,
        }
    }
}

fn input_err<E: std::fmt::Display>(e: E) -> CmdError {
    CmdError::Input(e.to_string())
}

fn weak_err(e: WeakValueError) -> CmdError {
    match e {
        WeakValueError::ForbiddenOutcome { .. } => {
            CmdError::ForbiddenOutcome("zero transition amplitude".to_string())
        }
        other => CmdError::Input(other.to_string()),
    }
}

fn read_circuit(path: &Path) -> Result<CircuitSpec, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Input(format!("cannot read {}: {e}", path.display())))?;
    CircuitSpec::from_json(&text).map_err(input_err)
}

fn emit(output: Option<&Path>, content: &str) -> Result<(), CmdError> {
    match output {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CmdError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct WireVector {
    wire: usize,
    w: [[f64; 2]; 3],
}

#[derive(Serialize)]
struct CutVectors {
    cut: usize,
    wires: Vec<WireVector>,
}

#[derive(Serialize)]
struct WeakOutput {
    amplitude: [f64; 2],
    born_probability: f64,
    cuts: Vec<CutVectors>,
}

fn cmd_weak(input: &Path, output: Option<&Path>) -> Result<(), CmdError> {
    let circuit = read_circuit(input)?;
    let amplitude = transition_amplitude(&circuit).map_err(input_err)?;
    let mut cuts = Vec::new();
    for k in 0..=circuit.n_moments() {
        let states = two_state_cut(&circuit, &Cut::Before(k)).map_err(weak_err)?;
        let mut wires = Vec::new();
        for wire in 0..circuit.n_qubits() {
            let w = states.weak_vector(wire).map_err(weak_err)?;
            let c = w.components();
            wires.push(WireVector {
                wire,
                w: [[c[0].re, c[0].im], [c[1].re, c[1].im], [c[2].re, c[2].im]],
            });
        }
        cuts.push(CutVectors { cut: k, wires });
    }
    let report = WeakOutput {
        amplitude: [amplitude.re, amplitude.im],
        born_probability: amplitude.norm_sqr(),
        cuts,
    };
    emit(output, &jsonfmt::to_string(&report))
}

fn cmd_sweep(
    input: &Path,
    output: Option<&Path>,
    gate: Option<usize>,
    tau_step: f64,
) -> Result<(), CmdError> {
    if tau_step <= 0.0 || !tau_step.is_finite() {
        return Err(CmdError::Input("tau-step must be positive".to_string()));
    }
    let circuit = read_circuit(input)?;
    let (gate_id, alpha) = match gate {
        Some(idx) => {
            let (_, _, g) = circuit
                .locate(weakwire::circuit::GateId(idx))
                .map_err(input_err)?;
            match *g {
                weakwire::circuit::GateOp::SwapAlpha { alpha, .. } => {
                    (weakwire::circuit::GateId(idx), alpha)
                }
                _ => return Err(CmdError::Input(format!("gate {idx} is not a SwapAlpha"))),
            }
        }
        None => circuit
            .gates()
            .find_map(|(id, _, g)| match *g {
                weakwire::circuit::GateOp::SwapAlpha { alpha, .. } => Some((id, alpha)),
                _ => None,
            })
            .ok_or_else(|| CmdError::Input("circuit has no SwapAlpha gate".to_string()))?,
    };
    let grid = weakwire::weakvalues::uniform_grid(alpha, tau_step);
    let series = swap_sweep(&circuit, gate_id, &grid).map_err(weak_err)?;
    emit(output, &series.to_csv())
}

fn check_err(e: locality::CheckError) -> CmdError {
    match e {
        locality::CheckError::WeakValue(WeakValueError::ForbiddenOutcome { .. }) => {
            CmdError::ForbiddenOutcome("zero transition amplitude".to_string())
        }
        other => CmdError::Input(other.to_string()),
    }
}

fn circuit_checks(circuit: &CircuitSpec, tolerance: f64) -> Result<Vec<locality::CheckReport>, CmdError> {
    let mut reports = Vec::new();
    let retol = |mut r: locality::CheckReport| {
        if matches!(r.status, locality::CheckStatus::Pass | locality::CheckStatus::Fail) {
            r.status = if r.max_residual <= tolerance {
                locality::CheckStatus::Pass
            } else {
                locality::CheckStatus::Fail
            };
            r.tolerance = tolerance;
        }
        r
    };
    // Idle wires: constancy across all boundary cuts.
    let cuts: Vec<Cut> = (0..=circuit.n_moments()).map(Cut::Before).collect();
    for wire in 0..circuit.n_qubits() {
        let idle = circuit.gates().all(|(_, _, g)| !g.touches(wire));
        if idle {
            let r = locality::check_wire_constancy(circuit, wire, &cuts).map_err(check_err)?;
            reports.push(retol(r));
        }
    }
    // Rotation gates.
    let gates: Vec<_> = circuit.gates().map(|(id, _, g)| (id, g.clone())).collect();
    for (id, g) in &gates {
        match g {
            weakwire::circuit::GateOp::Rotation { .. } => {
                let r = locality::check_gate_rotation(circuit, *id).map_err(check_err)?;
                reports.push(retol(r));
            }
            weakwire::circuit::GateOp::SwapAlpha { alpha, .. } => {
                let grid = weakwire::weakvalues::uniform_grid(*alpha, 1e-3);
                let series = swap_sweep(circuit, *id, &grid).map_err(weak_err)?;
                reports.push(locality::check_swap_ode(&series).map_err(check_err)?);
                reports
                    .push(retol(locality::check_avg_conservation(&series).map_err(check_err)?));
                reports.push(locality::check_cross_product(circuit, &series).map_err(check_err)?);
            }
        }
    }
    // Measurement anchors on product-measured wires.
    for wire in 0..circuit.n_qubits() {
        match locality::check_measurement_anchor(circuit, wire) {
            Ok(r) => reports.push(retol(r)),
            Err(locality::CheckError::NotProductMeasured { .. }) => {}
            Err(e) => return Err(check_err(e)),
        }
    }
    Ok(reports)
}

fn cmd_verify(
    input: Option<&Path>,
    output: Option<&Path>,
    tolerance: f64,
    instances: usize,
    rng_seed: u64,
) -> Result<(), CmdError> {
    let reports = match input {
        Some(path) => {
            let circuit = read_circuit(path)?;
            circuit_checks(&circuit, tolerance)?
        }
        None => locality::run_battery(instances, rng_seed, tolerance),
    };
    emit(output, &locality::reports_to_json(&reports))?;
    let failures: Vec<&str> = reports
        .iter()
        .filter(|r| r.failed())
        .map(|r| r.check.as_str())
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CmdError::VerificationFailure(format!(
            "checks failed: {}",
            failures.join(", ")
        )))
    }
}

fn cmd_hv_solve(
    input: &Path,
    output: Option<&Path>,
    seeds: usize,
    rng_seed: u64,
    mode: ConstraintMode,
    trajectories: Option<&Path>,
) -> Result<(), CmdError> {
    let circuit = read_circuit(input)?;
    let (base_problem, _) =
        experiments::problem_from_circuit(&circuit, mode).map_err(CmdError::Input)?;
    let mut sets = std::collections::BTreeMap::new();
    for outcome in TwoBitOutcome::ALL {
        let (sa, sb) = outcome.signs();
        let mut problem = base_problem;
        problem.meas_a.1 = sa;
        problem.meas_b.1 = sb;
        sets.insert(outcome, weakwire::hvmodel::solve(&problem, seeds, rng_seed));
    }
    if let Some(dir) = trajectories {
        std::fs::create_dir_all(dir)
            .map_err(|e| CmdError::Input(format!("cannot create {}: {e}", dir.display())))?;
        for (outcome, set) in &sets {
            for (idx, sol) in set.solutions.iter().enumerate() {
                let path = dir.join(format!("{}_{idx}.csv", outcome.label()));
                std::fs::write(&path, sol.trajectory.to_csv()).map_err(|e| {
                    CmdError::Input(format!("cannot write {}: {e}", path.display()))
                })?;
            }
        }
    }
    let report = SolveOutput::new(&base_problem, mode, seeds, rng_seed, &sets);
    emit(output, &jsonfmt::to_string(&report))
}

#[derive(Serialize)]
struct SolveSolution {
    outcome: &'static str,
    s_a0: [[f64; 2]; 3],
    s_b0: [[f64; 2]; 3],
    residual: f64,
}

#[derive(Serialize)]
struct SolveOutput {
    problem: experiments::ProblemSummary,
    mode: ConstraintMode,
    n_seeds: usize,
    rng_seed: u64,
    solutions: Vec<SolveSolution>,
    counts: Vec<usize>,
    probabilities: Vec<f64>,
}

impl SolveOutput {
    fn new(
        problem: &weakwire::hvmodel::HvProblem,
        mode: ConstraintMode,
        n_seeds: usize,
        rng_seed: u64,
        sets: &std::collections::BTreeMap<TwoBitOutcome, weakwire::hvmodel::SolutionSet>,
    ) -> SolveOutput {
        let cvec = |v: &weakwire::CVec3| {
            let c = v.components();
            [[c[0].re, c[0].im], [c[1].re, c[1].im], [c[2].re, c[2].im]]
        };
        let bloch = |b: weakwire::BlochVector| [b.x, b.y, b.z];
        let mut solutions = Vec::new();
        let mut counts = Vec::new();
        for outcome in TwoBitOutcome::ALL {
            let set = &sets[&outcome];
            counts.push(set.len());
            for (sol, residual) in set.solutions.iter().zip(&set.residuals) {
                solutions.push(SolveSolution {
                    outcome: outcome.label(),
                    s_a0: cvec(&sol.s_a0),
                    s_b0: cvec(&sol.s_b0),
                    residual: *residual,
                });
            }
        }
        let total: usize = counts.iter().sum();
        let probabilities = counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        SolveOutput {
            problem: experiments::ProblemSummary {
                alpha: problem.alpha,
                prep_a: bloch(problem.prep_a),
                prep_b: bloch(problem.prep_b),
                meas_axis_a: bloch(problem.meas_a.0),
                meas_axis_b: bloch(problem.meas_b.0),
            },
            mode,
            n_seeds,
            rng_seed,
            solutions,
            counts,
            probabilities,
        }
    }
}

#[derive(Serialize)]
struct Fig3Output {
    rng_seed: u64,
    alpha: f64,
    fits: Vec<experiments::SinusoidFit>,
    max_fit_residual: f64,
}

fn cmd_reproduce(
    figure: FigureArg,
    output: Option<&Path>,
    tau_step: f64,
    seeds: usize,
    rng_seed: u64,
    mode: ConstraintMode,
) -> Result<(), CmdError> {
    match figure {
        FigureArg::Fig3 => {
            let sweep = experiments::component_sweep(rng_seed, 2.3, tau_step).map_err(weak_err)?;
            // CSV goes to --output (or stdout); the fit summary always goes
            // to stdout as JSON.
            emit(output, &sweep.to_csv())?;
            let fit = Fig3Output {
                rng_seed,
                alpha: sweep.alpha,
                max_fit_residual: sweep.worst_fit_residual(),
                fits: sweep.fits.clone(),
            };
            if output.is_some() {
                print!("{}", jsonfmt::to_string(&fit));
            }
            Ok(())
        }
        FigureArg::Fig5 => {
            let rows = experiments::endpoint_table();
            emit(output, &jsonfmt::to_string(&rows))
        }
        FigureArg::Fig6 => {
            let (_, report) = experiments::solution_census(seeds, rng_seed, mode);
            emit(output, &jsonfmt::to_string(&report))
        }
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("WEAKWIRE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn run(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Weak { input, output } => cmd_weak(&input, output.as_deref()),
        Command::Sweep { input, output, gate, tau_step } => {
            cmd_sweep(&input, output.as_deref(), gate, tau_step)
        }
        Command::Verify { input, output, tolerance, instances, rng_seed } => cmd_verify(
            input.as_deref(),
            output.as_deref(),
            tolerance,
            instances,
            rng_seed,
        ),
        Command::HvSolve { input, output, seeds, rng_seed, mode, trajectories } => cmd_hv_solve(
            &input,
            output.as_deref(),
            seeds,
            rng_seed,
            mode.into(),
            trajectories.as_deref(),
        ),
        Command::Reproduce { figure, output, tau_step, seeds, rng_seed, mode } => cmd_reproduce(
            figure,
            output.as_deref(),
            tau_step,
            seeds,
            rng_seed,
            mode.into(),
        ),
    }
}

fn main() -> ExitCode {
    configure_threads();
    // Argument errors are input errors (exit 1); help/version exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("weakwire: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
