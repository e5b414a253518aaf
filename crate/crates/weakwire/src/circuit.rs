//! Circuit data model and evolution: preparation, gate moments, measurement,
//! forward and retro propagation, transition amplitudes and Born
//! probabilities.
//!
//! A [`CircuitSpec`] is the whole problem instance: it fixes `|i⟩` (the
//! prepared state), the ordered gate moments, and `|f⟩` (the post-selected
//! measurement outcome). Weak values are evaluated at a [`Cut`]: either the
//! boundary before moment `k`, or a point at internal time `tau` inside a
//! [`GateOp::SwapAlpha`] gate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{
    bloch_to_state, embed_pair, embed_single, BlochVector, Operator, QstateError, Sign,
    StateVector,
};

/// Default cap on circuit width; dense simulation above this is rejected.
pub const DEFAULT_QUBIT_CAP: usize = 12;

/// Tolerance for accepting gate axes / boundary Bloch vectors as unit length.
const AXIS_UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Qstate(#[from] QstateError),
    #[error("{n_qubits} qubits exceeds the dense-simulation cap of {cap}")]
    TooManyQubits { n_qubits: usize, cap: usize },
    #[error("boundary lists {got} wire entries, circuit has {expected}")]
    WrongWireCount { expected: usize, got: usize },
    #[error("boundary entry for wire {wire} is duplicated or missing")]
    BadWireCoverage { wire: usize },
    #[error("wire {wire} out of range for {n_qubits} qubit(s)")]
    WireOutOfRange { wire: usize, n_qubits: usize },
    #[error("moment {moment} has gates with overlapping wires")]
    OverlappingWires { moment: usize },
    #[error("gate axis has norm {norm}, expected a unit vector")]
    NonUnitAxis { norm: f64 },
    #[error("gate parameter is not finite")]
    NonFiniteParam,
    #[error("cut before moment {moment} out of range (circuit has {n_moments} moments)")]
    CutOutOfRange { moment: usize, n_moments: usize },
    #[error("no gate with id {0:?}")]
    NoSuchGate(GateId),
    #[error("gate {0:?} is not a SwapAlpha gate")]
    NotSwapAlpha(GateId),
    #[error("interior time {tau} outside the gate range [0, {alpha}]")]
    TauOutOfRange { tau: f64, alpha: f64 },
    #[error("measurement outcome must be +1 or -1, got {0}")]
    BadOutcome(i64),
    #[error("malformed circuit JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// One gate application.
#[derive(Debug, Clone, PartialEq)]
pub enum GateOp {
    /// exp(i·phase)·exp(−i·angle/2·(axis·σ)) on one wire.
    Rotation {
        wire: usize,
        axis: BlochVector,
        angle: f64,
        phase: f64,
    },
    /// Continuous exchange interaction on two wires; `alpha = 1` is a full
    /// SWAP, `alpha = 0.5` the entangling √SWAP.
    SwapAlpha {
        wire_a: usize,
        wire_b: usize,
        alpha: f64,
    },
}

impl GateOp {
    pub fn touches(&self, wire: usize) -> bool {
        match *self {
            GateOp::Rotation { wire: w, .. } => w == wire,
            GateOp::SwapAlpha { wire_a, wire_b, .. } => wire_a == wire || wire_b == wire,
        }
    }

    pub fn wires(&self) -> Vec<usize> {
        match *self {
            GateOp::Rotation { wire, .. } => vec![wire],
            GateOp::SwapAlpha { wire_a, wire_b, .. } => vec![wire_a, wire_b],
        }
    }
}

/// Stable handle for a gate: its index in circuit order (moment by moment,
/// position within moment).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateId(pub usize);

/// A spacetime location in the circuit where states and weak values are
/// evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    /// The boundary before moment `k`; `k = n_moments` is the final cut.
    Before(usize),
    /// Internal time `tau` inside a SwapAlpha gate, measured from the gate
    /// input (`tau = 0`) to its full duration (`tau = alpha`).
    Inside { gate: GateId, tau: f64 },
}

/// Preparation: either one Bloch direction per wire or an explicit state.
#[derive(Debug, Clone, PartialEq)]
pub enum Prep {
    Wires(Vec<BlochVector>),
    State(StateVector),
}

/// Measurement record: per-wire (axis, outcome) pairs or an explicit
/// post-selected state |f⟩.
#[derive(Debug, Clone, PartialEq)]
pub enum Meas {
    Wires(Vec<(BlochVector, Sign)>),
    State(StateVector),
}

/// A complete circuit: the full "all-at-once" problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    n_qubits: usize,
    prep: Prep,
    moments: Vec<Vec<GateOp>>,
    meas: Meas,
}

impl CircuitSpec {
    pub fn new(
        n_qubits: usize,
        prep: Prep,
        moments: Vec<Vec<GateOp>>,
        meas: Meas,
    ) -> Result<CircuitSpec, CircuitError> {
        CircuitSpec::with_qubit_cap(n_qubits, prep, moments, meas, DEFAULT_QUBIT_CAP)
    }

    pub fn with_qubit_cap(
        n_qubits: usize,
        prep: Prep,
        moments: Vec<Vec<GateOp>>,
        meas: Meas,
        cap: usize,
    ) -> Result<CircuitSpec, CircuitError> {
        if n_qubits == 0 || n_qubits > cap {
            return Err(CircuitError::TooManyQubits { n_qubits, cap });
        }
        let dim = 1usize << n_qubits;
        match &prep {
            Prep::Wires(ws) => {
                if ws.len() != n_qubits {
                    return Err(CircuitError::WrongWireCount {
                        expected: n_qubits,
                        got: ws.len(),
                    });
                }
                for b in ws {
                    check_unit(b)?;
                }
            }
            Prep::State(s) => {
                if s.dim() != dim {
                    return Err(CircuitError::WrongWireCount {
                        expected: n_qubits,
                        got: s.n_qubits(),
                    });
                }
            }
        }
        match &meas {
            Meas::Wires(ws) => {
                if ws.len() != n_qubits {
                    return Err(CircuitError::WrongWireCount {
                        expected: n_qubits,
                        got: ws.len(),
                    });
                }
                for (b, _) in ws {
                    check_unit(b)?;
                }
            }
            Meas::State(s) => {
                if s.dim() != dim {
                    return Err(CircuitError::WrongWireCount {
                        expected: n_qubits,
                        got: s.n_qubits(),
                    });
                }
            }
        }
        for (m, moment) in moments.iter().enumerate() {
            let mut used = vec![false; n_qubits];
            for g in moment {
                validate_gate(g, n_qubits)?;
                for w in g.wires() {
                    if used[w] {
                        return Err(CircuitError::OverlappingWires { moment: m });
                    }
                    used[w] = true;
                }
            }
        }
        Ok(CircuitSpec { n_qubits, prep, moments, meas })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_moments(&self) -> usize {
        self.moments.len()
    }

    pub fn moments(&self) -> &[Vec<GateOp>] {
        &self.moments
    }

    pub fn prep(&self) -> &Prep {
        &self.prep
    }

    pub fn meas(&self) -> &Meas {
        &self.meas
    }

    /// Cut at the circuit output (after every moment).
    pub fn final_cut(&self) -> Cut {
        Cut::Before(self.n_moments())
    }

    /// All gates in circuit order with their ids and moment indices.
    pub fn gates(&self) -> impl Iterator<Item = (GateId, usize, &GateOp)> {
        self.moments
            .iter()
            .enumerate()
            .flat_map(|(m, gs)| gs.iter().map(move |g| (m, g)))
            .enumerate()
            .map(|(id, (m, g))| (GateId(id), m, g))
    }

    /// Locate a gate by id: (moment index, index within moment, gate).
    pub fn locate(&self, id: GateId) -> Result<(usize, usize, &GateOp), CircuitError> {
        let mut seen = 0;
        for (m, gs) in self.moments.iter().enumerate() {
            for (k, g) in gs.iter().enumerate() {
                if seen == id.0 {
                    return Ok((m, k, g));
                }
                seen += 1;
            }
        }
        Err(CircuitError::NoSuchGate(id))
    }

    /// The prepared state |i⟩.
    pub fn prep_state(&self) -> StateVector {
        match &self.prep {
            Prep::State(s) => s.clone(),
            Prep::Wires(ws) => {
                let factors: Vec<StateVector> = ws
                    .iter()
                    .map(|b| bloch_to_state(*b).expect("validated unit Bloch vector"))
                    .collect();
                StateVector::product(&factors)
            }
        }
    }

    /// The post-selected state |f⟩. A per-wire outcome `(n̂, −1)` is the
    /// eigenstate pointing along `−n̂`.
    pub fn meas_state(&self) -> StateVector {
        match &self.meas {
            Meas::State(s) => s.clone(),
            Meas::Wires(ws) => {
                let factors: Vec<StateVector> = ws
                    .iter()
                    .map(|(b, sign)| {
                        bloch_to_state(b.scaled(sign.as_f64()))
                            .expect("validated unit Bloch vector")
                    })
                    .collect();
                StateVector::product(&factors)
            }
        }
    }

    /// Per-wire measurement record, when the measurement is in product form.
    pub fn meas_wires(&self) -> Option<&[(BlochVector, Sign)]> {
        match &self.meas {
            Meas::Wires(ws) => Some(ws),
            Meas::State(_) => None,
        }
    }

    /// Per-wire preparation record, when the preparation is in product form.
    pub fn prep_wires(&self) -> Option<&[BlochVector]> {
        match &self.prep {
            Prep::Wires(ws) => Some(ws),
            Prep::State(_) => None,
        }
    }

    /// Same circuit with a different measurement record.
    pub fn with_meas(&self, meas: Meas) -> Result<CircuitSpec, CircuitError> {
        CircuitSpec::new(self.n_qubits, self.prep.clone(), self.moments.clone(), meas)
    }
}

fn check_unit(b: &BlochVector) -> Result<(), CircuitError> {
    let norm = b.norm();
    if (norm - 1.0).abs() > AXIS_UNIT_TOL {
        return Err(CircuitError::NonUnitAxis { norm });
    }
    Ok(())
}

fn validate_gate(g: &GateOp, n_qubits: usize) -> Result<(), CircuitError> {
    let check_wire = |w: usize| {
        if w >= n_qubits {
            Err(CircuitError::WireOutOfRange { wire: w, n_qubits })
        } else {
            Ok(())
        }
    };
    match g {
        GateOp::Rotation { wire, axis, angle, phase } => {
            check_wire(*wire)?;
            check_unit(axis)?;
            if !angle.is_finite() || !phase.is_finite() {
                return Err(CircuitError::NonFiniteParam);
            }
        }
        GateOp::SwapAlpha { wire_a, wire_b, alpha } => {
            check_wire(*wire_a)?;
            check_wire(*wire_b)?;
            if wire_a == wire_b {
                return Err(CircuitError::WireOutOfRange {
                    wire: *wire_b,
                    n_qubits,
                });
            }
            if !alpha.is_finite() {
                return Err(CircuitError::NonFiniteParam);
            }
        }
    }
    Ok(())
}

/// The 4×4 exchange-interaction unitary, in the basis
/// {|00⟩, |01⟩, |10⟩, |11⟩}:
///
/// ```text
/// ⎛ 1      0          0      0 ⎞
/// ⎜ 0  (1+e^{iπα})/2  (1−e^{iπα})/2  0 ⎟
/// ⎜ 0  (1−e^{iπα})/2  (1+e^{iπα})/2  0 ⎟
/// ⎝ 0      0          0      1 ⎠
/// ```
pub fn swap_alpha_matrix(alpha: f64) -> Operator {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let e = Complex64::from_polar(1.0, std::f64::consts::PI * alpha);
    let p = (one + e) / 2.0;
    let m = (one - e) / 2.0;
    Operator::new(
        4,
        vec![
            one, zero, zero, zero, //
            zero, p, m, zero, //
            zero, m, p, zero, //
            zero, zero, zero, one,
        ],
    )
    .expect("static 4x4 operator")
}

/// 2×2 rotation unitary e^{i·phase}·exp(−i·angle/2·(axis·σ)).
pub fn rotation_matrix(axis: BlochVector, angle: f64, phase: f64) -> Operator {
    let half = angle / 2.0;
    let (s, c) = (half.sin(), half.cos());
    let ph = Complex64::from_polar(1.0, phase);
    let i = Complex64::i();
    // cos(θ/2) I − i sin(θ/2) (n·σ)
    Operator::from_rows2([
        [
            ph * (Complex64::new(c, 0.0) - i * s * axis.z),
            ph * (-i * s * Complex64::new(axis.x, -axis.y)),
        ],
        [
            ph * (-i * s * Complex64::new(axis.x, axis.y)),
            ph * (Complex64::new(c, 0.0) + i * s * axis.z),
        ],
    ])
}

/// Full 2^N unitary for one gate.
pub fn gate_unitary(g: &GateOp, n_qubits: usize) -> Result<Operator, CircuitError> {
    validate_gate(g, n_qubits)?;
    let op = match g {
        GateOp::Rotation { wire, axis, angle, phase } => {
            embed_single(&rotation_matrix(*axis, *angle, *phase), *wire, n_qubits)?
        }
        GateOp::SwapAlpha { wire_a, wire_b, alpha } => {
            embed_pair(&swap_alpha_matrix(*alpha), *wire_a, *wire_b, n_qubits)?
        }
    };
    Ok(op)
}

fn validate_interior(tau: f64, alpha: f64) -> Result<(), CircuitError> {
    let (lo, hi) = if alpha >= 0.0 { (0.0, alpha) } else { (alpha, 0.0) };
    if !tau.is_finite() || tau < lo || tau > hi {
        return Err(CircuitError::TauOutOfRange { tau, alpha });
    }
    Ok(())
}

/// |i⟩ propagated forward to the cut. For an interior cut, concurrent gates
/// of the same moment on other wires are applied in full before the partial
/// exchange U_ex[tau]; distant evolution does not alter local weak values,
/// and the verification suite exercises that irrelevance.
pub fn evolve_forward(c: &CircuitSpec, cut: &Cut) -> Result<StateVector, CircuitError> {
    let mut psi = c.prep_state();
    match *cut {
        Cut::Before(k) => {
            if k > c.n_moments() {
                return Err(CircuitError::CutOutOfRange {
                    moment: k,
                    n_moments: c.n_moments(),
                });
            }
            for moment in &c.moments()[..k] {
                for g in moment {
                    psi = psi.apply(&gate_unitary(g, c.n_qubits())?);
                }
            }
        }
        Cut::Inside { gate, tau } => {
            let (m, idx, g) = c.locate(gate)?;
            let (wire_a, wire_b, alpha) = match *g {
                GateOp::SwapAlpha { wire_a, wire_b, alpha } => (wire_a, wire_b, alpha),
                GateOp::Rotation { .. } => return Err(CircuitError::NotSwapAlpha(gate)),
            };
            validate_interior(tau, alpha)?;
            for moment in &c.moments()[..m] {
                for g in moment {
                    psi = psi.apply(&gate_unitary(g, c.n_qubits())?);
                }
            }
            for (k, other) in c.moments()[m].iter().enumerate() {
                if k != idx {
                    psi = psi.apply(&gate_unitary(other, c.n_qubits())?);
                }
            }
            let partial = embed_pair(&swap_alpha_matrix(tau), wire_a, wire_b, c.n_qubits())?;
            psi = psi.apply(&partial);
        }
    }
    Ok(psi)
}

/// |f⟩ propagated backward to the cut: U†[t_f − t]|f⟩. For an interior cut
/// the remaining partial exchange is U_ex[alpha−tau]†; concurrent gates of
/// the same moment belong to the forward side.
pub fn evolve_retro(c: &CircuitSpec, cut: &Cut) -> Result<StateVector, CircuitError> {
    let mut phi = c.meas_state();
    let apply_daggered_moments = |phi: &mut StateVector, from: usize| -> Result<(), CircuitError> {
        for moment in c.moments()[from..].iter().rev() {
            for g in moment {
                *phi = phi.apply(&gate_unitary(g, c.n_qubits())?.dagger());
            }
        }
        Ok(())
    };
    match *cut {
        Cut::Before(k) => {
            if k > c.n_moments() {
                return Err(CircuitError::CutOutOfRange {
                    moment: k,
                    n_moments: c.n_moments(),
                });
            }
            apply_daggered_moments(&mut phi, k)?;
        }
        Cut::Inside { gate, tau } => {
            let (m, _, g) = c.locate(gate)?;
            let (wire_a, wire_b, alpha) = match *g {
                GateOp::SwapAlpha { wire_a, wire_b, alpha } => (wire_a, wire_b, alpha),
                GateOp::Rotation { .. } => return Err(CircuitError::NotSwapAlpha(gate)),
            };
            validate_interior(tau, alpha)?;
            apply_daggered_moments(&mut phi, m + 1)?;
            let rest =
                embed_pair(&swap_alpha_matrix(alpha - tau), wire_a, wire_b, c.n_qubits())?;
            phi = phi.apply(&rest.dagger());
        }
    }
    Ok(phi)
}

/// ⟨f|U[t_f−t_i]|i⟩, the denominator of every weak value. Equals
/// ⟨retro|forward⟩ evaluated at any common cut.
pub fn transition_amplitude(c: &CircuitSpec) -> Result<Complex64, CircuitError> {
    let forward = evolve_forward(c, &c.final_cut())?;
    Ok(c.meas_state().inner(&forward))
}

/// |⟨f|U|i⟩|².
pub fn born_probability(c: &CircuitSpec) -> Result<f64, CircuitError> {
    Ok(transition_amplitude(c)?.norm_sqr())
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    n_qubits: usize,
    prep: BoundaryJson,
    moments: Vec<Vec<GateJson>>,
    meas: BoundaryJson,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BoundaryJson {
    State { state: Vec<[f64; 2]> },
    Product(Vec<WireEntryJson>),
}

#[derive(Serialize, Deserialize)]
struct WireEntryJson {
    wire: usize,
    bloch: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<i64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type")]
enum GateJson {
    #[serde(rename = "rot")]
    Rot {
        wire: usize,
        axis: [f64; 3],
        angle: f64,
        #[serde(default)]
        phase: f64,
    },
    #[serde(rename = "swap_alpha")]
    SwapAlpha { wires: [usize; 2], alpha: f64 },
}

fn wires_from_entries(
    entries: Vec<WireEntryJson>,
    n_qubits: usize,
    want_outcome: bool,
) -> Result<Vec<(BlochVector, Option<Sign>)>, CircuitError> {
    if entries.len() != n_qubits {
        return Err(CircuitError::WrongWireCount {
            expected: n_qubits,
            got: entries.len(),
        });
    }
    let mut out: Vec<Option<(BlochVector, Option<Sign>)>> = vec![None; n_qubits];
    for e in entries {
        if e.wire >= n_qubits {
            return Err(CircuitError::WireOutOfRange { wire: e.wire, n_qubits });
        }
        if out[e.wire].is_some() {
            return Err(CircuitError::BadWireCoverage { wire: e.wire });
        }
        let sign = match (want_outcome, e.outcome) {
            (true, Some(v)) => {
                Some(Sign::from_i8(v as i8).ok_or(CircuitError::BadOutcome(v))?)
            }
            (true, None) => return Err(CircuitError::BadOutcome(0)),
            (false, _) => None,
        };
        out[e.wire] = Some((BlochVector::new(e.bloch[0], e.bloch[1], e.bloch[2]), sign));
    }
    out.into_iter()
        .enumerate()
        .map(|(w, v)| v.ok_or(CircuitError::BadWireCoverage { wire: w }))
        .collect()
}

fn state_from_json(state: Vec<[f64; 2]>) -> Result<StateVector, CircuitError> {
    let amps = state
        .into_iter()
        .map(|[re, im]| Complex64::new(re, im))
        .collect();
    Ok(StateVector::new(amps)?)
}

impl CircuitSpec {
    /// Parse the published circuit JSON schema.
    pub fn from_json(text: &str) -> Result<CircuitSpec, CircuitError> {
        let raw: CircuitJson = serde_json::from_str(text)?;
        let prep = match raw.prep {
            BoundaryJson::State { state } => Prep::State(state_from_json(state)?),
            BoundaryJson::Product(entries) => Prep::Wires(
                wires_from_entries(entries, raw.n_qubits, false)?
                    .into_iter()
                    .map(|(b, _)| b)
                    .collect(),
            ),
        };
        let meas = match raw.meas {
            BoundaryJson::State { state } => Meas::State(state_from_json(state)?),
            BoundaryJson::Product(entries) => Meas::Wires(
                wires_from_entries(entries, raw.n_qubits, true)?
                    .into_iter()
                    .map(|(b, s)| (b, s.expect("outcome required")))
                    .collect(),
            ),
        };
        let moments = raw
            .moments
            .into_iter()
            .map(|moment| {
                moment
                    .into_iter()
                    .map(|g| match g {
                        GateJson::Rot { wire, axis, angle, phase } => GateOp::Rotation {
                            wire,
                            axis: BlochVector::new(axis[0], axis[1], axis[2]),
                            angle,
                            phase,
                        },
                        GateJson::SwapAlpha { wires, alpha } => GateOp::SwapAlpha {
                            wire_a: wires[0],
                            wire_b: wires[1],
                            alpha,
                        },
                    })
                    .collect()
            })
            .collect();
        CircuitSpec::new(raw.n_qubits, prep, moments, meas)
    }

    /// Serialize back to the published circuit JSON schema.
    pub fn to_json_value(&self) -> serde_json::Value {
        let boundary_state = |s: &StateVector| BoundaryJson::State {
            state: s.amps().iter().map(|a| [a.re, a.im]).collect(),
        };
        let prep = match &self.prep {
            Prep::State(s) => boundary_state(s),
            Prep::Wires(ws) => BoundaryJson::Product(
                ws.iter()
                    .enumerate()
                    .map(|(wire, b)| WireEntryJson {
                        wire,
                        bloch: [b.x, b.y, b.z],
                        outcome: None,
                    })
                    .collect(),
            ),
        };
        let meas = match &self.meas {
            Meas::State(s) => boundary_state(s),
            Meas::Wires(ws) => BoundaryJson::Product(
                ws.iter()
                    .enumerate()
                    .map(|(wire, (b, sign))| WireEntryJson {
                        wire,
                        bloch: [b.x, b.y, b.z],
                        outcome: Some(sign.as_f64() as i64),
                    })
                    .collect(),
            ),
        };
        let moments: Vec<Vec<GateJson>> = self
            .moments
            .iter()
            .map(|moment| {
                moment
                    .iter()
                    .map(|g| match *g {
                        GateOp::Rotation { wire, axis, angle, phase } => GateJson::Rot {
                            wire,
                            axis: [axis.x, axis.y, axis.z],
                            angle,
                            phase,
                        },
                        GateOp::SwapAlpha { wire_a, wire_b, alpha } => GateJson::SwapAlpha {
                            wires: [wire_a, wire_b],
                            alpha,
                        },
                    })
                    .collect()
            })
            .collect();
        serde_json::to_value(CircuitJson {
            n_qubits: self.n_qubits,
            prep,
            moments,
            meas,
        })
        .expect("circuit JSON serialization")
    }
}
