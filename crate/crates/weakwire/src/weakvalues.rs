//! Post-selected weak values.
//!
//! For a complete circuit with preparation |i⟩, total unitary U and
//! post-selected outcome |f⟩, the weak value of a Hermitian operator A at a
//! cut is
//!
//! ```text
//! W[A] = ⟨f| U_after · A · U_before |i⟩ / ⟨f| U |i⟩,
//! ```
//!
//! computed here as the two-state sandwich ⟨retro| A |forward⟩ / amplitude.
//! Inserting the three Pauli operators of one wire gives that wire's complex
//! weak-value vector `w`. Weak values are undefined (and refused) when the
//! transition amplitude vanishes: a forbidden outcome.
//!
//! The module also carries the closed forms used as independent oracles: the
//! single-qubit prepare/measure expressions, and the three weak-value
//! trajectories inside the √SWAP demo circuit (x̂⊗ŷ prepared, both wires
//! measured in the ẑ basis).

use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{
    evolve_forward, evolve_retro, transition_amplitude, CircuitError, CircuitSpec, Cut, GateId,
    GateOp,
};
use crate::jsonfmt;
use crate::qstate::{embed_single, CVec3, Operator, Sign, StateVector};

/// Amplitudes smaller than this are treated as a forbidden outcome.
pub const EPS_AMP: f64 = 1e-10;

/// Complex weak-value 3-vector (W[σx], W[σy], W[σz]) of one qubit at one cut.
pub type WeakVector = CVec3;

#[derive(Debug, Error)]
pub enum WeakValueError {
    #[error("zero transition amplitude (|amp| = {amplitude:.3e}): weak values do not exist for this outcome")]
    ForbiddenOutcome { amplitude: f64 },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("closed form undefined at theta0 = {theta0}")]
    DegenerateAngle { theta0: f64 },
    #[error("tau grid must be strictly ascending and inside the gate")]
    BadGrid,
    #[error("interior time {tau} outside [0, 0.5]")]
    BadTau { tau: f64 },
    #[error("probability rule undefined: Re(w) vanishes for entry {index}")]
    ZeroRealPart { index: usize },
    #[error("no weak vectors given")]
    Empty,
}

/// Forward and retro states at one cut, with the circuit amplitude.
/// Reused so a weak-vector evaluation runs the circuit once, not six times.
pub struct TwoStateCut {
    pub forward: StateVector,
    pub retro: StateVector,
    pub amplitude: Complex64,
}

/// Evolve both boundary states to the cut; errors on a forbidden outcome.
pub fn two_state_cut(c: &CircuitSpec, cut: &Cut) -> Result<TwoStateCut, WeakValueError> {
    let amplitude = transition_amplitude(c)?;
    if amplitude.norm() <= EPS_AMP {
        return Err(WeakValueError::ForbiddenOutcome {
            amplitude: amplitude.norm(),
        });
    }
    Ok(TwoStateCut {
        forward: evolve_forward(c, cut)?,
        retro: evolve_retro(c, cut)?,
        amplitude,
    })
}

impl TwoStateCut {
    /// ⟨retro| A |forward⟩ / amplitude.
    pub fn sandwich(&self, a: &Operator) -> Complex64 {
        self.retro.inner(&self.forward.apply(a)) / self.amplitude
    }

    /// The weak-value vector of `wire`: the three Pauli sandwiches.
    pub fn weak_vector(&self, wire: usize) -> Result<WeakVector, WeakValueError> {
        let n = self.forward.n_qubits();
        let [sx, sy, sz] = Operator::paulis();
        Ok(WeakVector::new(
            self.sandwich(&embed_single(&sx, wire, n).map_err(CircuitError::from)?),
            self.sandwich(&embed_single(&sy, wire, n).map_err(CircuitError::from)?),
            self.sandwich(&embed_single(&sz, wire, n).map_err(CircuitError::from)?),
        ))
    }
}

/// Weak value of an arbitrary operator at a cut.
pub fn weak_value(
    c: &CircuitSpec,
    cut: &Cut,
    a: &Operator,
) -> Result<Complex64, WeakValueError> {
    Ok(two_state_cut(c, cut)?.sandwich(a))
}

/// Weak-value vector of one wire at a cut.
pub fn weak_vector(
    c: &CircuitSpec,
    cut: &Cut,
    wire: usize,
) -> Result<WeakVector, WeakValueError> {
    two_state_cut(c, cut)?.weak_vector(wire)
}

/// Unconjugated dot product u·v = Σ_j u_j v_j; `w.dot(w) = 1` is the
/// hyperbolic normalization.
pub fn hyperbolic_dot(u: &WeakVector, v: &WeakVector) -> Complex64 {
    u.dot(v)
}

/// Ascending uniform grid between 0 and `span` with approximately the
/// requested step and exact endpoints (no rounding past the gate duration).
/// Negative spans (reversed exchange gates) give a grid from `span` up to 0.
pub fn uniform_grid(span: f64, step: f64) -> Vec<f64> {
    let n = ((span.abs() / step).round() as usize).max(2);
    let mut grid: Vec<f64> = (0..=n)
        .map(|k| if k == n { span } else { span * k as f64 / n as f64 })
        .collect();
    if span < 0.0 {
        grid.reverse();
    }
    grid
}

/// Weak-value trajectories of both wires of a SwapAlpha gate, sampled on a
/// grid of interior times.
#[derive(Debug, Clone)]
pub struct SweepSeries {
    pub gate: GateId,
    pub tau: Vec<f64>,
    pub w_a: Vec<WeakVector>,
    pub w_b: Vec<WeakVector>,
}

/// Evaluate both wires' weak vectors at every interior time in `tau_grid`
/// (strictly ascending, inside the gate's [0, alpha] range).
pub fn swap_sweep(
    c: &CircuitSpec,
    gate: GateId,
    tau_grid: &[f64],
) -> Result<SweepSeries, WeakValueError> {
    let (_, _, g) = c.locate(gate)?;
    let (wire_a, wire_b) = match *g {
        GateOp::SwapAlpha { wire_a, wire_b, .. } => (wire_a, wire_b),
        GateOp::Rotation { .. } => return Err(CircuitError::NotSwapAlpha(gate).into()),
    };
    if tau_grid.is_empty() || tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(WeakValueError::BadGrid);
    }
    let mut w_a = Vec::with_capacity(tau_grid.len());
    let mut w_b = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let states = two_state_cut(c, &Cut::Inside { gate, tau })?;
        w_a.push(states.weak_vector(wire_a)?);
        w_b.push(states.weak_vector(wire_b)?);
    }
    Ok(SweepSeries {
        gate,
        tau: tau_grid.to_vec(),
        w_a,
        w_b,
    })
}

impl SweepSeries {
    pub const CSV_HEADER: &'static str = "tau,re_wax,im_wax,re_way,im_way,re_waz,im_waz,re_wbx,im_wbx,re_wby,im_wby,re_wbz,im_wbz";

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Uniform grid step, if the grid is uniform to within a relative 1e-9.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.tau.len() < 2 {
            return None;
        }
        let h = self.tau[1] - self.tau[0];
        let uniform = self
            .tau
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-12));
        uniform.then_some(h)
    }

    /// Largest |component| over both trajectories.
    pub fn max_abs(&self) -> f64 {
        self.w_a
            .iter()
            .chain(&self.w_b)
            .map(CVec3::max_abs)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&row_csv(self.tau[k], &self.w_a[k], &self.w_b[k]));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn row_csv(tau: f64, a: &CVec3, b: &CVec3) -> String {
    let mut cols = vec![jsonfmt::float(tau)];
    for v in [a, b] {
        for comp in v.components() {
            cols.push(jsonfmt::float(comp.re));
            cols.push(jsonfmt::float(comp.im));
        }
    }
    cols.join(",")
}

/// The two closed-form weak vectors for a qubit prepared along +ẑ and
/// measured in the basis tilted by `theta0` in the x–z plane:
/// `(tan(θ₀/2), i·tan(θ₀/2), 1)` for the + outcome and
/// `(−cot(θ₀/2), −i·cot(θ₀/2), 1)` for the − outcome.
pub fn single_qubit_closed_form(
    theta0: f64,
    outcome: Sign,
) -> Result<WeakVector, WeakValueError> {
    let half = theta0 / 2.0;
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    match outcome {
        Sign::Plus => {
            if half.cos().abs() < 1e-12 {
                return Err(WeakValueError::DegenerateAngle { theta0 });
            }
            let t = half.tan();
            Ok(WeakVector::new(Complex64::new(t, 0.0), i * t, one))
        }
        Sign::Minus => {
            if half.sin().abs() < 1e-12 {
                return Err(WeakValueError::DegenerateAngle { theta0 });
            }
            let ct = half.cos() / half.sin();
            Ok(WeakVector::new(Complex64::new(-ct, 0.0), -i * ct, one))
        }
    }
}

/// Joint outcome of measuring both wires of a two-qubit circuit in a ±1
/// basis; `Zero` is the +1 eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TwoBitOutcome {
    ZeroZero,
    ZeroOne,
    OneZero,
    OneOne,
}

impl TwoBitOutcome {
    pub const ALL: [TwoBitOutcome; 4] = [
        TwoBitOutcome::ZeroZero,
        TwoBitOutcome::ZeroOne,
        TwoBitOutcome::OneZero,
        TwoBitOutcome::OneOne,
    ];

    pub fn signs(self) -> (Sign, Sign) {
        match self {
            TwoBitOutcome::ZeroZero => (Sign::Plus, Sign::Plus),
            TwoBitOutcome::ZeroOne => (Sign::Plus, Sign::Minus),
            TwoBitOutcome::OneZero => (Sign::Minus, Sign::Plus),
            TwoBitOutcome::OneOne => (Sign::Minus, Sign::Minus),
        }
    }

    pub fn from_signs(a: Sign, b: Sign) -> TwoBitOutcome {
        match (a, b) {
            (Sign::Plus, Sign::Plus) => TwoBitOutcome::ZeroZero,
            (Sign::Plus, Sign::Minus) => TwoBitOutcome::ZeroOne,
            (Sign::Minus, Sign::Plus) => TwoBitOutcome::OneZero,
            (Sign::Minus, Sign::Minus) => TwoBitOutcome::OneOne,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TwoBitOutcome::ZeroZero => "00",
            TwoBitOutcome::ZeroOne => "01",
            TwoBitOutcome::OneZero => "10",
            TwoBitOutcome::OneOne => "11",
        }
    }

    pub fn from_label(s: &str) -> Option<TwoBitOutcome> {
        Self::ALL.iter().copied().find(|o| o.label() == s)
    }
}

/// Closed-form weak-value trajectories (w_a, w_b) inside the √SWAP demo
/// circuit (prep x̂⊗ŷ, both wires measured in the ẑ basis), for interior
/// time `tau` in [0, 0.5]. The `01` outcome has zero amplitude, so its
/// trajectories do not exist.
pub fn sqrt_swap_closed_form(
    outcome: TwoBitOutcome,
    tau: f64,
) -> Result<(WeakVector, WeakVector), WeakValueError> {
    if !(0.0..=0.5).contains(&tau) {
        return Err(WeakValueError::BadTau { tau });
    }
    let pi = std::f64::consts::PI;
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    let e_plus = Complex64::from_polar(1.0, pi * tau); // e^{iπτ}
    let e_minus = Complex64::from_polar(1.0, -pi * tau); // e^{−iπτ}
    let half = Complex64::new(0.5, 0.0);
    let pair = match outcome {
        TwoBitOutcome::ZeroZero => {
            let wa = WeakVector::new(
                half * (one + i + (one - i) * e_plus),
                half * (one - i - (one + i) * e_plus),
                one,
            );
            let wb = WeakVector::new(
                half * (one + i - (one - i) * e_plus),
                half * (one - i + (one + i) * e_plus),
                one,
            );
            (wa, wb)
        }
        TwoBitOutcome::OneZero => {
            let s = (pi * tau).sin();
            let wa = WeakVector::new(
                half * (one + e_minus),
                half * (one - e_minus),
                Complex64::new(-s, 0.0),
            );
            let wb = WeakVector::new(
                half * (one - e_minus),
                half * (one + e_minus),
                Complex64::new(s, 0.0),
            );
            (wa, wb)
        }
        TwoBitOutcome::OneOne => {
            let wa = WeakVector::new(
                half * (one - i + (one + i) * e_plus),
                half * (one + i - (one - i) * e_plus),
                -one,
            );
            let wb = WeakVector::new(
                half * (one - i - (one + i) * e_plus),
                half * (one + i + (one - i) * e_plus),
                -one,
            );
            (wa, wb)
        }
        TwoBitOutcome::ZeroOne => {
            return Err(WeakValueError::ForbiddenOutcome { amplitude: 0.0 })
        }
    };
    Ok(pair)
}

/// Probabilities assigned directly to weak values: P_k ∝ 1/‖Re(w_k)‖²,
/// normalized so the probabilities sum to one.
pub fn single_qubit_probability_rule(ws: &[WeakVector]) -> Result<Vec<f64>, WeakValueError> {
    if ws.is_empty() {
        return Err(WeakValueError::Empty);
    }
    let mut weights = Vec::with_capacity(ws.len());
    for (index, w) in ws.iter().enumerate() {
        let re2 = w.re().dot(&w.re());
        if re2 <= 1e-30 {
            return Err(WeakValueError::ZeroRealPart { index });
        }
        weights.push(1.0 / re2);
    }
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|p| p / total).collect())
}
