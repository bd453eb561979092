//! Random circuit generation and the random-expansion pipeline that
//! produces training and evaluation episodes.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;

use crate::circuit::{Circuit, Gate};
use crate::rules::{apply, enumerate_transformations, prune, AppliedStep, KindFilter};
use crate::synth::{hadamard, resynthesize_1q};
use crate::unitary::{matrix_1q, phased_x_matrix, zrot_matrix};

/// Configuration of the random-circuit pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub num_qubits: usize,
    pub num_logical_gates: usize,
    pub seed: u64,
    pub expansion_steps: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            num_qubits: 12,
            num_logical_gates: 150,
            seed: 0,
            expansion_steps: 500,
        }
    }
}

/// Sample a random local unitary: a uniform pick among the common special
/// gates (quarter/half Z rotations, X, Y, Hadamard) and generic-angle
/// rotations. Only the Hadamard needs two hardware gates, so the mean
/// decomposed length is 9/8 — local gates "might" expand, but mostly don't.
fn random_local(rng: &mut impl Rng) -> Array2<Complex64> {
    match rng.gen_range(0..8) {
        0 => matrix_1q(&zrot_matrix(PI / 2.0)),
        1 => matrix_1q(&zrot_matrix(PI)),
        2 => matrix_1q(&zrot_matrix(3.0 * PI / 2.0)),
        3 => matrix_1q(&zrot_matrix(rng.gen_range(0.0..2.0 * PI))),
        4 => matrix_1q(&phased_x_matrix(0.0, PI)),
        5 => matrix_1q(&phased_x_matrix(PI / 2.0, PI)),
        6 => matrix_1q(&phased_x_matrix(
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(0.0..2.0 * PI),
        )),
        _ => hadamard(),
    }
}

/// Probability that a logical gate is a CNOT rather than a local unitary.
/// CNOT-heavy circuits keep expansion productive: CNOT reversal is the only
/// gate-count-increasing soft rule, so entangling gates are what give the
/// expansion pipeline room to grow.
const CNOT_PROBABILITY: f64 = 0.95;

/// Exponent of the center-weighted CNOT position distribution.
const POSITION_BIAS: f64 = 0.9;

/// Sample a nearest-neighbor CNOT position with a mild bias towards the
/// middle of the chain: weight(a) = min(a+1, m-1-a, 6)^POSITION_BIAS over
/// the m-1 positions. Central qubits take part in more entangling gates,
/// which yields the serial structure (high depth per gate) typical of
/// circuits that route information across the whole chain; the cap keeps
/// the bias local to the edges on long chains so wide circuits stay
/// near-uniform in the bulk.
fn sample_cnot_position(rng: &mut impl Rng, num_qubits: usize) -> usize {
    let positions = num_qubits - 1;
    let weight =
        |a: usize| (a + 1).min(positions - a).min(6) as f64;
    let total: f64 = (0..positions).map(|a| weight(a).powf(POSITION_BIAS)).sum();
    let mut x = rng.gen_range(0.0..total);
    for a in 0..positions {
        let w = weight(a).powf(POSITION_BIAS);
        if x < w {
            return a;
        }
        x -= w;
    }
    positions - 1
}

/// Generate a random circuit: each logical gate is, with probability
/// [`CNOT_PROBABILITY`], a CNOT on a center-biased nearest-neighbor pair
/// with uniform orientation, and otherwise a random local unitary on a
/// uniform qubit, decomposed into at most two hardware gates.
/// Deterministic per seed.
pub fn random_circuit(cfg: &GenConfig) -> Circuit {
    assert!(cfg.num_qubits >= 2, "random circuits need at least 2 qubits");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gates = Vec::new();
    for _ in 0..cfg.num_logical_gates {
        if rng.gen_bool(CNOT_PROBABILITY) {
            let a = sample_cnot_position(&mut rng, cfg.num_qubits);
            let (c, t) = if rng.gen_bool(0.5) { (a, a + 1) } else { (a + 1, a) };
            gates.push(Gate::cnot(c, t));
        } else {
            let q = rng.gen_range(0..cfg.num_qubits);
            let u = random_local(&mut rng);
            let form = resynthesize_1q(&u).expect("local sample is unitary");
            gates.extend(form.gates(q));
        }
    }
    Circuit::new(cfg.num_qubits, gates).expect("generated gates respect connectivity")
}

/// Result of random expansion. `exhausted_at` flags the step at which no
/// soft transformation was available (the circuit is returned as-is).
#[derive(Debug, Clone)]
pub struct ExpandOutcome {
    pub circuit: Circuit,
    pub exhausted_at: Option<usize>,
    /// Applied transformations in order, for replay.
    pub applied: Vec<AppliedStep>,
}

/// Base sampling weight of a CNOT-reversal instance once the expansion ramp
/// has saturated; every other soft instance has weight 1.
const REVERSAL_WEIGHT: f64 = 2.7;
/// Number of expansion steps over which the reversal weight ramps up.
const REVERSAL_RAMP_STEPS: usize = 500;

/// Sampling weight of an S6 (CNOT reversal) instance at expansion step `k`.
/// The weight rises quadratically from ~0 to [`REVERSAL_WEIGHT`] over the
/// first [`REVERSAL_RAMP_STEPS`] steps, so short expansions shuffle a
/// circuit with commutation moves while long expansions accumulate the
/// gate-count growth that makes deep benchmark circuits.
fn reversal_weight(step: usize) -> f64 {
    let x = ((step as f64 + 1.0) / REVERSAL_RAMP_STEPS as f64).min(1.0);
    REVERSAL_WEIGHT * x * x
}

/// Apply `steps` random soft transformations, then prune once at the end.
///
/// Sampling is weighted: commutation-style instances are uniform while
/// CNOT-reversal instances follow [`reversal_weight`], so the growth rate
/// of a long expansion far exceeds that of a short one. Pruning is
/// deliberately not interleaved: the hard rules would otherwise undo most
/// of the growth (e.g. the local gates inserted by CNOT reversal cancel
/// again as soon as commutation moves bring them together), and the point
/// of expansion is to build deep, redundant circuits.
/// Preserves logical equivalence.
pub fn expand(circuit: &Circuit, steps: usize, seed: u64) -> ExpandOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = circuit.clone();
    let mut applied = Vec::new();
    let mut exhausted_at = None;
    for step in 0..steps {
        let soft = enumerate_transformations(&c, KindFilter::Soft)
            .expect("soft enumeration cannot collide");
        if soft.is_empty() {
            exhausted_at = Some(step);
            break;
        }
        let w6 = reversal_weight(step);
        let weights: Vec<f64> = soft
            .iter()
            .map(|t| {
                if t.rule == crate::rules::RuleId::S6ReverseCnot {
                    w6
                } else {
                    1.0
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut x = rng.gen_range(0.0..total);
        let mut idx = soft.len() - 1;
        for (i, wi) in weights.iter().enumerate() {
            if x < *wi {
                idx = i;
                break;
            }
            x -= wi;
        }
        let t = &soft[idx];
        applied.push(AppliedStep::from(t));
        c = apply(&c, t).expect("enumerated transformation must apply");
    }
    ExpandOutcome {
        circuit: prune(&c),
        exhausted_at,
        applied,
    }
}

/// One episode start produced by the generate -> prune -> expand pipeline.
#[derive(Debug, Clone)]
pub struct Episode {
    pub index: usize,
    pub seed: u64,
    /// The pruned circuit before expansion (the recovery reference).
    pub pruned: Circuit,
    /// The expanded circuit the optimizer starts from.
    pub start: Circuit,
}

/// SplitMix64, used to derive independent per-episode seeds from a master
/// seed so that stream elements stay deterministic under any parallelism.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lazily yield `count` pipeline outputs with per-episode derived seeds.
pub fn episode_stream(cfg: GenConfig, count: usize) -> impl Iterator<Item = Episode> {
    (0..count).map(move |index| make_episode(&cfg, index))
}

/// Build the episode at `index` of the stream for `cfg` (parallel callers
/// can shard by index).
pub fn make_episode(cfg: &GenConfig, index: usize) -> Episode {
    let seed = derive_seed(cfg.seed, index as u64);
    let gen_cfg = GenConfig { seed, ..*cfg };
    let raw = random_circuit(&gen_cfg);
    let pruned = prune(&raw);
    let start = expand(&pruned, cfg.expansion_steps, derive_seed(seed, 1)).circuit;
    Episode {
        index,
        seed,
        pruned,
        start,
    }
}
