//! Seeded random circuit instances for property checks and randomized
//! verification batteries. Everything is deterministic given the caller's
//! RNG state; generators that need a non-vanishing transition amplitude
//! resample until the instance clears `min_amp`.

use num_complex::Complex64;
use rand::Rng;

use crate::circuit::{transition_amplitude, CircuitSpec, GateId, GateOp, Meas, Prep};
use crate::qstate::{BlochVector, Sign, StateVector};

/// Uniform point on the Bloch sphere.
pub fn random_bloch<R: Rng>(rng: &mut R) -> BlochVector {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    BlochVector::new(r * phi.cos(), r * phi.sin(), z)
}

pub fn random_sign<R: Rng>(rng: &mut R) -> Sign {
    if rng.gen_bool(0.5) {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Generic (typically entangled) random state: box-sampled amplitudes,
/// normalized.
pub fn random_state<R: Rng>(rng: &mut R, n_qubits: usize) -> StateVector {
    loop {
        let amps: Vec<Complex64> = (0..1usize << n_qubits)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue; // all amplitudes conspired to be tiny; resample
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        return StateVector::new(amps).expect("normalized random state");
    }
}

pub fn random_rotation<R: Rng>(rng: &mut R, wire: usize) -> GateOp {
    GateOp::Rotation {
        wire,
        axis: random_bloch(rng),
        angle: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        phase: rng.gen_range(0.0..std::f64::consts::TAU),
    }
}

fn random_moment<R: Rng>(rng: &mut R, wires: &[usize]) -> Vec<GateOp> {
    // One gate per moment keeps moments trivially disjoint; a SwapAlpha on a
    // random wire pair half the time, a rotation otherwise.
    if wires.len() >= 2 && rng.gen_bool(0.5) {
        let a = wires[rng.gen_range(0..wires.len())];
        let b = loop {
            let b = wires[rng.gen_range(0..wires.len())];
            if b != a {
                break b;
            }
        };
        vec![GateOp::SwapAlpha {
            wire_a: a,
            wire_b: b,
            alpha: rng.gen_range(0.1..2.3),
        }]
    } else {
        let wire = wires[rng.gen_range(0..wires.len())];
        vec![random_rotation(rng, wire)]
    }
}

/// Random circuit with product (Bloch) boundaries and one random gate per
/// moment.
pub fn random_circuit<R: Rng>(rng: &mut R, n_qubits: usize, n_moments: usize) -> CircuitSpec {
    let wires: Vec<usize> = (0..n_qubits).collect();
    let prep = Prep::Wires((0..n_qubits).map(|_| random_bloch(rng)).collect());
    let meas = Meas::Wires(
        (0..n_qubits)
            .map(|_| (random_bloch(rng), random_sign(rng)))
            .collect(),
    );
    let moments = (0..n_moments).map(|_| random_moment(rng, &wires)).collect();
    CircuitSpec::new(n_qubits, prep, moments, meas).expect("generated circuit is valid")
}

/// As [`random_circuit`], resampled until |⟨f|U|i⟩| ≥ `min_amp`.
pub fn random_circuit_amplitude_guarded<R: Rng>(
    rng: &mut R,
    n_qubits: usize,
    n_moments: usize,
    min_amp: f64,
) -> CircuitSpec {
    loop {
        let c = random_circuit(rng, n_qubits, n_moments);
        if transition_amplitude(&c).expect("valid circuit").norm() >= min_amp {
            return c;
        }
    }
}

/// Circuit whose gates never touch `idle_wire`; boundaries are generic
/// entangled states. The idle wire's weak vector must stay constant across
/// every cut.
pub fn idle_wire_instance<R: Rng>(
    rng: &mut R,
    n_qubits: usize,
    idle_wire: usize,
    n_moments: usize,
    min_amp: f64,
) -> CircuitSpec {
    assert!(idle_wire < n_qubits);
    let wires: Vec<usize> = (0..n_qubits).filter(|&w| w != idle_wire).collect();
    loop {
        let prep = Prep::State(random_state(rng, n_qubits));
        let meas = Meas::State(random_state(rng, n_qubits));
        let moments = (0..n_moments).map(|_| random_moment(rng, &wires)).collect();
        let c = CircuitSpec::new(n_qubits, prep, moments, meas).expect("valid circuit");
        if transition_amplitude(&c).expect("valid circuit").norm() >= min_amp {
            return c;
        }
    }
}

/// Entangled 3-qubit instance with a rotation probe gate in mid-circuit;
/// returns the probe's id.
pub fn rotation_probe_instance<R: Rng>(rng: &mut R, min_amp: f64) -> (CircuitSpec, GateId) {
    loop {
        let prep = Prep::State(random_state(rng, 3));
        let meas = Meas::State(random_state(rng, 3));
        let probe_wire = rng.gen_range(0..3);
        let moments = vec![
            vec![GateOp::SwapAlpha {
                wire_a: 0,
                wire_b: 1,
                alpha: rng.gen_range(0.1..1.9),
            }],
            vec![random_rotation(rng, probe_wire)],
            vec![GateOp::SwapAlpha {
                wire_a: 1,
                wire_b: 2,
                alpha: rng.gen_range(0.1..1.9),
            }],
        ];
        let c = CircuitSpec::new(3, prep, moments, meas).expect("valid circuit");
        if transition_amplitude(&c).expect("valid circuit").norm() >= min_amp {
            return (c, GateId(1));
        }
    }
}

/// Random instance with an entangled preparation and a per-wire product
/// measurement.
pub fn product_measured_instance<R: Rng>(
    rng: &mut R,
    n_qubits: usize,
    n_moments: usize,
    min_amp: f64,
) -> CircuitSpec {
    let wires: Vec<usize> = (0..n_qubits).collect();
    loop {
        let prep = Prep::State(random_state(rng, n_qubits));
        let meas = Meas::Wires(
            (0..n_qubits)
                .map(|_| (random_bloch(rng), random_sign(rng)))
                .collect(),
        );
        let moments = (0..n_moments).map(|_| random_moment(rng, &wires)).collect();
        let c = CircuitSpec::new(n_qubits, prep, moments, meas).expect("valid circuit");
        if transition_amplitude(&c).expect("valid circuit").norm() >= min_amp {
            return c;
        }
    }
}

/// Two-qubit instance: generic prepared and measured states around a single
/// SwapAlpha gate of the given duration. Returns the circuit; the gate is
/// always `GateId(0)`.
pub fn swap_pair_instance<R: Rng>(rng: &mut R, alpha: f64, min_amp: f64) -> CircuitSpec {
    loop {
        let prep = Prep::State(random_state(rng, 2));
        let meas = Meas::State(random_state(rng, 2));
        let moments = vec![vec![GateOp::SwapAlpha { wire_a: 0, wire_b: 1, alpha }]];
        let c = CircuitSpec::new(2, prep, moments, meas).expect("valid circuit");
        if transition_amplitude(&c).expect("valid circuit").norm() >= min_amp {
            return c;
        }
    }
}
