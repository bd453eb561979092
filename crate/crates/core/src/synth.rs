//! Resynthesis of arbitrary 2x2 unitaries into the canonical
//! ZRot-then-PhasedX form (at most two hardware gates, up to global phase).

use ndarray::Array2;
use num_complex::Complex64;

use crate::circuit::{canonical_angle, dist_to_zero_mod_tau, Gate};
use crate::error::{Error, Result};
use crate::unitary::{matrix_1q, phased_x_matrix, zrot_matrix};

type C = Complex64;

/// Reconstruction tolerance for synthesis decisions.
pub const SYNTH_TOL: f64 = 1e-9;

/// Canonical decomposition of a single-qubit unitary: an optional ZRot
/// followed (in time) by an optional PhasedX.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneQubitForm {
    pub zrot: Option<f64>,
    pub phased_x: Option<(f64, f64)>,
}

impl OneQubitForm {
    pub fn len(&self) -> usize {
        self.zrot.is_some() as usize + self.phased_x.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Materialize the form as gates on `qubit`, in time order.
    pub fn gates(&self, qubit: usize) -> Vec<Gate> {
        let mut out = Vec::with_capacity(2);
        if let Some(theta) = self.zrot {
            out.push(Gate::zrot(qubit, theta));
        }
        if let Some((axis_phase, angle)) = self.phased_x {
            out.push(Gate::phased_x(qubit, axis_phase, angle));
        }
        out
    }

    /// Matrix of the form (PhasedX · ZRot, since ZRot acts first).
    pub fn matrix(&self) -> Array2<C> {
        let mut m = Array2::eye(2);
        if let Some(theta) = self.zrot {
            m = matrix_1q(&zrot_matrix(theta)).dot(&m);
        }
        if let Some((phi, angle)) = self.phased_x {
            m = matrix_1q(&phased_x_matrix(phi, angle)).dot(&m);
        }
        m
    }
}

fn unitarity_deviation_2x2(u: &Array2<C>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let s = u[(0, i)].conj() * u[(0, j)] + u[(1, i)].conj() * u[(1, j)];
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - expect).norm());
        }
    }
    worst
}

/// Max-norm distance between `u` and `c v` for the best unit scalar `c`.
pub fn phase_distance_2x2(u: &Array2<C>, v: &Array2<C>) -> f64 {
    let (mut bi, mut bj, mut best) = (0, 0, -1.0f64);
    for i in 0..2 {
        for j in 0..2 {
            if v[(i, j)].norm() > best {
                best = v[(i, j)].norm();
                bi = i;
                bj = j;
            }
        }
    }
    let c = u[(bi, bj)] / v[(bi, bj)];
    let n = c.norm();
    if n == 0.0 {
        return f64::INFINITY;
    }
    let c = c / n;
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((u[(i, j)] - c * v[(i, j)]).norm());
        }
    }
    worst
}

/// Decompose a 2x2 unitary into the minimal canonical form whose product
/// equals the input up to global phase within `SYNTH_TOL`.
pub fn resynthesize_1q(u: &Array2<C>) -> Result<OneQubitForm> {
    assert_eq!(u.dim(), (2, 2));
    let deviation = unitarity_deviation_2x2(u);
    if deviation > 1e-8 {
        return Err(Error::NotUnitary { deviation });
    }

    // Normalize to SU(2): v = u / sqrt(det u), so v = [[a, b], [-b*, a*]].
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let s = det.sqrt();
    let a = u[(0, 0)] / s;
    let b = u[(0, 1)] / s;
    let v10 = u[(1, 0)] / s;

    // |v10| = sin(theta/2) in SU(2); atan2 keeps theta well-conditioned
    // where acos(|a|) would amplify rounding near |a| = 1.
    let abs_a = a.norm();
    let half_sin = v10.norm();
    let theta = 2.0 * half_sin.atan2(abs_a);

    let form = if half_sin < SYNTH_TOL {
        // Diagonal up to phase: a pure Z rotation (or the identity).
        let lambda = canonical_angle(-2.0 * a.arg());
        if dist_to_zero_mod_tau(lambda) < SYNTH_TOL {
            OneQubitForm {
                zrot: None,
                phased_x: None,
            }
        } else {
            OneQubitForm {
                zrot: Some(lambda),
                phased_x: None,
            }
        }
    } else {
        let mu = if abs_a > 1e-12 { a.arg() } else { 0.0 };
        let lambda = canonical_angle(-2.0 * mu);
        // v10 = e^{i mu} * (-i e^{i phi} sin(theta/2))
        let denom = C::new(0.0, -1.0) * C::from_polar(half_sin, mu);
        let phi = canonical_angle((v10 / denom).arg());
        let zrot = if dist_to_zero_mod_tau(lambda) < SYNTH_TOL {
            None
        } else {
            Some(lambda)
        };
        OneQubitForm {
            zrot,
            phased_x: Some((phi, canonical_angle(theta))),
        }
    };

    debug_assert!(
        phase_distance_2x2(u, &form.matrix()) < 1e-8,
        "resynthesis round-trip failed: {:?} vs {:?} (b = {b})",
        u,
        form
    );
    Ok(form)
}

/// Haar-random single-qubit unitary (a random unit quaternion in SU(2)).
pub fn haar_random_1q(rng: &mut impl rand::Rng) -> Array2<C> {
    use rand_distr::StandardNormal;
    let q: [f64; 4] = [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ];
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Array2::from_shape_vec(
        (2, 2),
        vec![C::new(w, z), C::new(y, x), C::new(-y, x), C::new(w, -z)],
    )
    .unwrap()
}

/// The Hadamard matrix, used when reversing CNOT orientation.
pub fn hadamard() -> Array2<C> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_vec(
        (2, 2),
        vec![C::new(h, 0.0), C::new(h, 0.0), C::new(h, 0.0), C::new(-h, 0.0)],
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_resynthesizes_to_nothing() {
        let form = resynthesize_1q(&Array2::eye(2)).unwrap();
        assert!(form.is_empty());
    }

    #[test]
    fn pauli_z_resynthesizes_to_single_zrot() {
        let z = matrix_1q(&zrot_matrix(PI));
        let form = resynthesize_1q(&z).unwrap();
        assert_eq!(form.phased_x, None);
        let lambda = form.zrot.unwrap();
        assert!((lambda - PI).abs() < 1e-9);
    }

    #[test]
    fn x_like_resynthesizes_to_single_phased_x() {
        let p = matrix_1q(&phased_x_matrix(0.3, 1.1));
        let form = resynthesize_1q(&p).unwrap();
        assert_eq!(form.zrot, None);
        let (phi, angle) = form.phased_x.unwrap();
        assert!((phi - 0.3).abs() < 1e-9 && (angle - 1.1).abs() < 1e-9);
    }

    #[test]
    fn hadamard_round_trips_within_tolerance() {
        let h = hadamard();
        let form = resynthesize_1q(&h).unwrap();
        assert_eq!(form.len(), 2);
        assert!(phase_distance_2x2(&h, &form.matrix()) < 1e-9);
    }

    #[test]
    fn rejects_non_unitary_input() {
        let m = Array2::from_shape_vec(
            (2, 2),
            vec![
                C::new(1.0, 0.0),
                C::new(0.5, 0.0),
                C::new(0.0, 0.0),
                C::new(1.0, 0.0),
            ],
        )
        .unwrap();
        assert!(matches!(resynthesize_1q(&m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn round_trip_over_haar_random_unitaries() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let u = haar_random_1q(&mut rng);
            let form = resynthesize_1q(&u).unwrap();
            assert!(
                phase_distance_2x2(&u, &form.matrix()) < 1e-9,
                "round-trip failure for {u:?}"
            );
        }
    }
}
