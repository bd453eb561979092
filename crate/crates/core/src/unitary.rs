//! Dense unitary computation, the correctness oracle for all rewrites.
//!
//! Qubit 0 is the most significant bit of the basis-state index.

use ndarray::Array2;
use num_complex::Complex64;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};

/// Default cap on the number of qubits for dense unitaries (1024 x 1024).
pub const DEFAULT_QUBIT_CAP: usize = 10;

type C = Complex64;

/// A dense `2^k x 2^k` unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    num_qubits: usize,
    mat: Array2<C>,
}

impl Unitary {
    pub fn identity(num_qubits: usize) -> Self {
        let dim = 1 << num_qubits;
        Unitary {
            num_qubits,
            mat: Array2::eye(dim),
        }
    }

    pub fn from_matrix(num_qubits: usize, mat: Array2<C>) -> Self {
        assert_eq!(mat.nrows(), 1 << num_qubits);
        assert_eq!(mat.ncols(), 1 << num_qubits);
        Unitary { num_qubits, mat }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<C> {
        &self.mat
    }

    /// Max-norm deviation of `U† U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let mut s = C::new(0.0, 0.0);
                for k in 0..dim {
                    s += self.mat[(k, i)].conj() * self.mat[(k, j)];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - expect).norm());
            }
        }
        worst
    }

    /// Left-multiply by a gate: `U <- G U`, i.e. the gate acts after the
    /// operations already accumulated in `U`.
    pub fn apply_gate(&mut self, gate: &Gate) {
        match *gate {
            Gate::ZRot { qubit, theta } => self.apply_1q(qubit, &zrot_matrix(theta)),
            Gate::PhasedX {
                qubit,
                axis_phase,
                angle,
            } => self.apply_1q(qubit, &phased_x_matrix(axis_phase, angle)),
            Gate::CNot { control, target } => self.apply_cnot(control, target),
        }
    }

    fn apply_1q(&mut self, qubit: usize, g: &[[C; 2]; 2]) {
        let dim = self.dim();
        let bit = 1usize << (self.num_qubits - 1 - qubit);
        for r0 in 0..dim {
            if r0 & bit != 0 {
                continue;
            }
            let r1 = r0 | bit;
            for c in 0..dim {
                let a = self.mat[(r0, c)];
                let b = self.mat[(r1, c)];
                self.mat[(r0, c)] = g[0][0] * a + g[0][1] * b;
                self.mat[(r1, c)] = g[1][0] * a + g[1][1] * b;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let dim = self.dim();
        let cbit = 1usize << (self.num_qubits - 1 - control);
        let tbit = 1usize << (self.num_qubits - 1 - target);
        for r in 0..dim {
            if r & cbit != 0 && r & tbit == 0 {
                let r2 = r | tbit;
                for c in 0..dim {
                    self.mat.swap((r, c), (r2, c));
                }
            }
        }
    }
}

/// `diag(1, e^{iθ})`.
pub fn zrot_matrix(theta: f64) -> [[C; 2]; 2] {
    [
        [C::new(1.0, 0.0), C::new(0.0, 0.0)],
        [C::new(0.0, 0.0), C::from_polar(1.0, theta)],
    ]
}

/// Rotation by `angle` about the axis at `axis_phase` in the XY plane:
/// `[[cos θ/2, -i e^{-iφ} sin θ/2], [-i e^{iφ} sin θ/2, cos θ/2]]`.
pub fn phased_x_matrix(axis_phase: f64, angle: f64) -> [[C; 2]; 2] {
    let c = C::new((angle / 2.0).cos(), 0.0);
    let s = (angle / 2.0).sin();
    let mi = C::new(0.0, -1.0);
    [
        [c, mi * C::from_polar(s, -axis_phase)],
        [mi * C::from_polar(s, axis_phase), c],
    ]
}

/// Convert a 2x2 gate matrix into an `ndarray` matrix.
pub fn matrix_1q(g: &[[C; 2]; 2]) -> Array2<C> {
    Array2::from_shape_vec((2, 2), vec![g[0][0], g[0][1], g[1][0], g[1][1]]).unwrap()
}

/// 2x2 matrix of a single-qubit gate; panics on CNOT.
pub fn gate_matrix_1q(gate: &Gate) -> [[C; 2]; 2] {
    match *gate {
        Gate::ZRot { theta, .. } => zrot_matrix(theta),
        Gate::PhasedX {
            axis_phase, angle, ..
        } => phased_x_matrix(axis_phase, angle),
        Gate::CNot { .. } => panic!("CNOT is not a single-qubit gate"),
    }
}

/// Dense unitary of a full circuit. Errors above the qubit cap.
pub fn unitary_of(circuit: &Circuit, cap: usize) -> Result<Unitary> {
    if circuit.num_qubits() > cap {
        return Err(Error::QubitCapExceeded {
            num_qubits: circuit.num_qubits(),
            cap,
        });
    }
    let mut u = Unitary::identity(circuit.num_qubits());
    for g in circuit.gates() {
        u.apply_gate(g);
    }
    Ok(u)
}

/// Dense unitary of a gate slice restricted to a window of wires.
///
/// `wires` must be sorted, contiguous on the chain, and cover every qubit the
/// gates act on; the gates keep their relative order.
pub fn unitary_over_wires(gates: &[Gate], wires: &[usize]) -> Unitary {
    let local_index = |q: usize| -> usize {
        wires
            .iter()
            .position(|&w| w == q)
            .expect("gate acts outside the wire window")
    };
    let mut u = Unitary::identity(wires.len());
    for g in gates {
        let local = match *g {
            Gate::ZRot { qubit, theta } => Gate::ZRot {
                qubit: local_index(qubit),
                theta,
            },
            Gate::PhasedX {
                qubit,
                axis_phase,
                angle,
            } => Gate::PhasedX {
                qubit: local_index(qubit),
                axis_phase,
                angle,
            },
            Gate::CNot { control, target } => Gate::CNot {
                control: local_index(control),
                target: local_index(target),
            },
        };
        u.apply_gate(&local);
    }
    u
}

/// True iff `u = c v` for some unit scalar `c`, within `tol` in max norm.
/// The candidate phase is taken from the largest-magnitude entry ratio.
pub fn equivalent_up_to_phase(u: &Unitary, v: &Unitary, tol: f64) -> bool {
    if u.dim() != v.dim() {
        return false;
    }
    let (mut bi, mut bj, mut best) = (0usize, 0usize, -1.0f64);
    for ((i, j), x) in v.mat.indexed_iter() {
        let n = x.norm();
        if n > best {
            best = n;
            bi = i;
            bj = j;
        }
    }
    if best <= 0.0 {
        return false;
    }
    let mut c = u.mat[(bi, bj)] / v.mat[(bi, bj)];
    let n = c.norm();
    if n == 0.0 {
        return false;
    }
    c /= n;
    u.mat
        .iter()
        .zip(v.mat.iter())
        .all(|(a, b)| (a - c * b).norm() < tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mat_of(gates: Vec<Gate>, m: usize) -> Unitary {
        unitary_of(&Circuit::new(m, gates).unwrap(), DEFAULT_QUBIT_CAP).unwrap()
    }

    #[test]
    fn zrot_pi_is_pauli_z() {
        let u = mat_of(vec![Gate::zrot(0, PI)], 1);
        assert!((u.matrix()[(0, 0)] - C::new(1.0, 0.0)).norm() < 1e-12);
        assert!((u.matrix()[(1, 1)] - C::new(-1.0, 0.0)).norm() < 1e-12);
        assert!(u.matrix()[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn phased_x_pi_is_x_up_to_phase() {
        let u = mat_of(vec![Gate::phased_x(0, 0.0, PI)], 1);
        let x = Unitary::from_matrix(
            1,
            Array2::from_shape_vec(
                (2, 2),
                vec![
                    C::new(0.0, 0.0),
                    C::new(1.0, 0.0),
                    C::new(1.0, 0.0),
                    C::new(0.0, 0.0),
                ],
            )
            .unwrap(),
        );
        // -i X exactly
        assert!((u.matrix()[(0, 1)] - C::new(0.0, -1.0)).norm() < 1e-12);
        assert!(equivalent_up_to_phase(&u, &x, 1e-9));
    }

    #[test]
    fn cnot_pair_is_identity() {
        let u = mat_of(vec![Gate::cnot(0, 1), Gate::cnot(0, 1)], 2);
        assert!(equivalent_up_to_phase(&u, &Unitary::identity(2), 1e-12));
    }

    #[test]
    fn identity_and_z_are_not_phase_equivalent() {
        let i = Unitary::identity(1);
        let z = mat_of(vec![Gate::zrot(0, PI)], 1);
        assert!(!equivalent_up_to_phase(&i, &z, 1e-9));
    }

    #[test]
    fn unitarity_holds_for_random_circuits() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut gates = Vec::new();
            for _ in 0..25 {
                if rng.gen_bool(0.5) {
                    let a = rng.gen_range(0..3usize);
                    let (c, t) = if rng.gen_bool(0.5) { (a, a + 1) } else { (a + 1, a) };
                    gates.push(Gate::cnot(c, t));
                } else {
                    let q = rng.gen_range(0..4usize);
                    if rng.gen_bool(0.5) {
                        gates.push(Gate::zrot(q, rng.gen_range(0.0..TAU)));
                    } else {
                        gates.push(Gate::phased_x(
                            q,
                            rng.gen_range(0.0..TAU),
                            rng.gen_range(0.0..TAU),
                        ));
                    }
                }
            }
            let u = mat_of(gates, 4);
            assert!(u.unitarity_deviation() < 1e-9);
        }
    }

    use std::f64::consts::TAU;

    #[test]
    fn qubit_cap_is_enforced() {
        let c = Circuit::empty(11);
        assert!(matches!(
            unitary_of(&c, DEFAULT_QUBIT_CAP),
            Err(crate::error::Error::QubitCapExceeded { .. })
        ));
    }

    #[test]
    fn window_unitary_matches_full_unitary() {
        let gates = vec![Gate::cnot(1, 2), Gate::zrot(1, 0.7), Gate::cnot(2, 1)];
        let local = unitary_over_wires(&gates, &[1, 2]);
        let full = mat_of(
            gates
                .iter()
                .map(|g| match *g {
                    Gate::ZRot { qubit, theta } => Gate::zrot(qubit - 1, theta),
                    Gate::CNot { control, target } => Gate::cnot(control - 1, target - 1),
                    g => g,
                })
                .collect(),
            2,
        );
        assert!(equivalent_up_to_phase(&local, &full, 1e-12));
    }
}
