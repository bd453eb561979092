//! Circuit intermediate representation.
//!
//! A circuit is a linear sequence of gates over a fixed number of qubits on a
//! 1D chain. The linear order is only required to be consistent with the
//! per-qubit gate order; the actual partial order (and thus moments and depth)
//! is recovered by as-soon-as-possible scheduling.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduce an angle into the canonical interval `[0, 2π)`.
pub fn canonical_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Distance from `x` to the nearest multiple of `2π`.
pub fn dist_to_zero_mod_tau(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    r.min(TAU - r)
}

/// Distance between two angles modulo `2π`.
pub fn angle_dist(a: f64, b: f64) -> f64 {
    dist_to_zero_mod_tau(a - b)
}

/// A gate from the hardware gate set: Z-rotation, Phased-X or CNOT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Gate {
    ZRot { qubit: usize, theta: f64 },
    PhasedX { qubit: usize, axis_phase: f64, angle: f64 },
    CNot { control: usize, target: usize },
}

impl Gate {
    pub fn zrot(qubit: usize, theta: f64) -> Self {
        Gate::ZRot {
            qubit,
            theta: canonical_angle(theta),
        }
    }

    pub fn phased_x(qubit: usize, axis_phase: f64, angle: f64) -> Self {
        Gate::PhasedX {
            qubit,
            axis_phase: canonical_angle(axis_phase),
            angle: canonical_angle(angle),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::CNot { control, target }
    }

    /// The qubits this gate acts on, smallest first for CNOTs.
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::ZRot { qubit, .. } | Gate::PhasedX { qubit, .. } => (qubit, None),
            Gate::CNot { control, target } => {
                (control.min(target), Some(control.max(target)))
            }
        }
    }

    pub fn min_qubit(&self) -> usize {
        self.qubits().0
    }

    pub fn is_single_qubit(&self) -> bool {
        !matches!(self, Gate::CNot { .. })
    }

    pub fn acts_on(&self, qubit: usize) -> bool {
        let (a, b) = self.qubits();
        a == qubit || b == Some(qubit)
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let check = |qubit: usize| {
            if qubit >= num_qubits {
                Err(Error::QubitOutOfRange { qubit, num_qubits })
            } else {
                Ok(())
            }
        };
        match *self {
            Gate::ZRot { qubit, .. } | Gate::PhasedX { qubit, .. } => check(qubit),
            Gate::CNot { control, target } => {
                check(control)?;
                check(target)?;
                if control == target || control.abs_diff(target) != 1 {
                    return Err(Error::ConnectivityViolation { control, target });
                }
                Ok(())
            }
        }
    }

    /// Canonicalize angle parameters into `[0, 2π)`.
    pub fn canonicalized(self) -> Self {
        match self {
            Gate::ZRot { qubit, theta } => Gate::zrot(qubit, theta),
            Gate::PhasedX {
                qubit,
                axis_phase,
                angle,
            } => Gate::phased_x(qubit, axis_phase, angle),
            g => g,
        }
    }
}

/// An immutable quantum circuit on a 1D nearest-neighbor chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitDoc", into = "CircuitDoc")]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

#[derive(Serialize, Deserialize)]
struct CircuitDoc {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl TryFrom<CircuitDoc> for Circuit {
    type Error = Error;
    fn try_from(doc: CircuitDoc) -> Result<Self> {
        Circuit::new(doc.num_qubits, doc.gates)
    }
}

impl From<Circuit> for CircuitDoc {
    fn from(c: Circuit) -> Self {
        CircuitDoc {
            num_qubits: c.num_qubits,
            gates: c.gates,
        }
    }
}

impl Circuit {
    /// Build a circuit, validating qubit ranges and nearest-neighbor
    /// connectivity. Angles are canonicalized into `[0, 2π)`.
    pub fn new(num_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.validate(num_qubits)?;
        }
        let gates = gates.into_iter().map(Gate::canonicalized).collect();
        Ok(Circuit { num_qubits, gates })
    }

    pub fn empty(num_qubits: usize) -> Self {
        Circuit {
            num_qubits,
            gates: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Number of gate nodes, `n` in the quality function.
    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Circuit depth `d`: the number of moments under ASAP scheduling.
    pub fn depth(&self) -> usize {
        self.schedule_asap().depth
    }

    /// As-soon-as-possible schedule: each gate is placed in the earliest
    /// moment after all of its wire predecessors.
    pub fn schedule_asap(&self) -> Schedule {
        let mut next_free = vec![0usize; self.num_qubits];
        let mut moment_of = Vec::with_capacity(self.gates.len());
        let mut depth = 0usize;
        for g in &self.gates {
            let (a, b) = g.qubits();
            let mut m = next_free[a];
            if let Some(b) = b {
                m = m.max(next_free[b]);
            }
            moment_of.push(m);
            next_free[a] = m + 1;
            if let Some(b) = b {
                next_free[b] = m + 1;
            }
            depth = depth.max(m + 1);
        }
        Schedule { moment_of, depth }
    }

    /// Per-qubit sequences of gate indices, in wire order.
    pub fn wires(&self) -> Vec<Vec<usize>> {
        let mut wires = vec![Vec::new(); self.num_qubits];
        for (i, g) in self.gates.iter().enumerate() {
            let (a, b) = g.qubits();
            wires[a].push(i);
            if let Some(b) = b {
                wires[b].push(i);
            }
        }
        wires
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serialization cannot fail")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialization cannot fail")
    }

    /// Parse canonical JSON, rejecting connectivity and range violations.
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }
}

/// ASAP schedule of a circuit: moment index per gate plus the depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    /// Moment index per gate, aligned with `Circuit::gates`.
    pub moment_of: Vec<usize>,
    /// `1 + max moment`, or 0 for an empty circuit.
    pub depth: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn depth_of_empty_circuit_is_zero() {
        assert_eq!(Circuit::empty(3).depth(), 0);
        assert_eq!(Circuit::empty(3).gate_count(), 0);
    }

    #[test]
    fn sequential_cnots_occupy_two_moments() {
        let c = Circuit::new(2, vec![Gate::cnot(0, 1), Gate::cnot(0, 1)]).unwrap();
        assert_eq!(c.depth(), 2);
        assert_eq!(c.gate_count(), 2);
    }

    #[test]
    fn disjoint_gates_pack_into_one_moment() {
        let c = Circuit::new(2, vec![Gate::zrot(0, 0.3), Gate::zrot(1, 0.4)]).unwrap();
        assert_eq!(c.depth(), 1);
    }

    #[test]
    fn asap_respects_dependency_chain() {
        let c = Circuit::new(2, vec![Gate::zrot(0, 0.3), Gate::cnot(0, 1)]).unwrap();
        assert_eq!(c.schedule_asap().moment_of, vec![0, 1]);
    }

    #[test]
    fn asap_hand_checked_dag() {
        // CNot(0,1)@0, ZRot(q2)@0, CNot(1,2)@1
        let c = Circuit::new(
            3,
            vec![Gate::cnot(0, 1), Gate::zrot(2, 0.1), Gate::cnot(1, 2)],
        )
        .unwrap();
        assert_eq!(c.schedule_asap().moment_of, vec![0, 0, 1]);
        assert_eq!(c.depth(), 2);
    }

    #[test]
    fn scheduling_is_idempotent_in_effect() {
        let c = Circuit::new(
            3,
            vec![Gate::cnot(0, 1), Gate::zrot(2, 0.1), Gate::cnot(1, 2)],
        )
        .unwrap();
        assert_eq!(c.schedule_asap(), c.schedule_asap());
    }

    #[test]
    fn rejects_long_range_cnot() {
        assert!(matches!(
            Circuit::new(3, vec![Gate::cnot(0, 2)]),
            Err(Error::ConnectivityViolation { .. })
        ));
        assert!(matches!(
            Circuit::new(3, vec![Gate::cnot(1, 1)]),
            Err(Error::ConnectivityViolation { .. })
        ));
    }

    #[test]
    fn rejects_out_of_range_qubit() {
        assert!(matches!(
            Circuit::new(2, vec![Gate::zrot(2, 0.1)]),
            Err(Error::QubitOutOfRange { .. })
        ));
    }

    #[test]
    fn angles_are_canonicalized() {
        let c = Circuit::new(1, vec![Gate::zrot(0, -PI)]).unwrap();
        match c.gates()[0] {
            Gate::ZRot { theta, .. } => assert!((theta - PI).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let c = Circuit::new(
            3,
            vec![
                Gate::zrot(0, 1.25),
                Gate::phased_x(1, 0.5, 2.0),
                Gate::cnot(1, 2),
            ],
        )
        .unwrap();
        let s = c.to_json();
        assert_eq!(Circuit::from_json(&s).unwrap(), c);

        let bad = r#"{"num_qubits":3,"gates":[{"type":"cnot","control":0,"target":2}]}"#;
        assert!(Circuit::from_json(bad).is_err());
    }
}
