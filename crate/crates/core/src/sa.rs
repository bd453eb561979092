//! Simulated-annealing baseline over the soft-transformation action space,
//! with a Metropolis acceptance rule and an exponential cooling schedule.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::cost::{quality, QualityWeights};
use crate::error::{Error, Result};
use crate::rules::{apply, enumerate_transformations, prune, AppliedStep, KindFilter};

/// Annealing schedule: `T_k = t_start * (t_end / t_start)^(k / steps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub steps: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub seed: u64,
}

impl AnnealConfig {
    pub fn new(steps: usize, t_start: f64, t_end: f64, seed: u64) -> Result<Self> {
        if steps == 0 || !(t_start >= t_end && t_end > 0.0) {
            return Err(Error::InvalidValue {
                what: "anneal config",
                details: format!("steps={steps}, t_start={t_start}, t_end={t_end}"),
            });
        }
        Ok(AnnealConfig {
            steps,
            t_start,
            t_end,
            seed,
        })
    }

    pub fn temperature(&self, step: usize) -> f64 {
        let frac = step as f64 / self.steps as f64;
        self.t_start * (self.t_end / self.t_start).powf(frac)
    }
}

/// One per-step record of the annealing trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub temperature: f64,
    pub quality: f64,
    pub depth: usize,
    pub gate_count: usize,
    pub accepted: bool,
}

/// Annealing result: the best state ever visited plus the full trace.
#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    pub best: Circuit,
    pub best_quality: f64,
    /// The chain's final state (the result of replaying `applied`).
    pub last: Circuit,
    pub trace: Vec<TracePoint>,
    pub accepted_fraction: f64,
    /// Accepted transformations in application order, for replay.
    pub applied: Vec<AppliedStep>,
}

/// Anneal a pruned circuit: per step, propose a uniform random soft
/// transformation (followed by pruning); accept improvements always,
/// worsenings with probability `exp(-dq / T_k)`, and exact quality ties
/// lazily with probability 1/2. Lazy ties keep detailed balance on quality
/// plateaus while stopping neutral commutations from dominating the
/// acceptance statistics (most proposals near a local optimum move gates
/// without changing depth or count, so always accepting them pins the
/// acceptance fraction near the neutral-proposal rate regardless of
/// temperature). Returns the best-quality state ever visited.
pub fn anneal(circuit: &Circuit, cfg: &AnnealConfig, w: &QualityWeights) -> Result<AnnealOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = circuit.clone();
    let mut q_current = quality(&current, w);
    let mut best = current.clone();
    let mut best_q = q_current;
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut accepted_count = 0usize;
    let mut applied = Vec::new();

    for step in 0..cfg.steps {
        let soft = enumerate_transformations(&current, KindFilter::Soft)?;
        if soft.is_empty() {
            if step == 0 {
                return Err(Error::NoSoftTransformationAvailable);
            }
            break;
        }
        let t = &soft[rng.gen_range(0..soft.len())];
        let candidate = prune(&apply(&current, t)?);
        let q_candidate = quality(&candidate, w);
        let dq = q_candidate - q_current;
        let temperature = cfg.temperature(step);
        let accepted = if dq < 0.0 {
            true
        } else if dq == 0.0 {
            rng.gen::<bool>()
        } else {
            rng.gen::<f64>() < (-dq / temperature).exp()
        };
        if accepted {
            applied.push(AppliedStep::from(t));
            current = candidate;
            q_current = q_candidate;
            accepted_count += 1;
            if q_current < best_q {
                best_q = q_current;
                best = current.clone();
            }
        }
        trace.push(TracePoint {
            step,
            temperature,
            quality: q_current,
            depth: current.depth(),
            gate_count: current.gate_count(),
            accepted,
        });
    }

    let denom = trace.len().max(1);
    Ok(AnnealOutcome {
        best,
        best_quality: best_q,
        last: current,
        accepted_fraction: accepted_count as f64 / denom as f64,
        trace,
        applied,
    })
}

/// Scale `t_start`/`t_end` by bisection on a log scale until the measured
/// acceptance fraction over pilot runs lies in `[0.10, 0.25]`.
pub fn tune_acceptance(
    cfg: &AnnealConfig,
    samples: &[Circuit],
    w: &QualityWeights,
) -> Result<AnnealConfig> {
    if samples.len() < 10 {
        return Err(Error::InvalidValue {
            what: "tuning samples",
            details: format!("need at least 10 circuits, got {}", samples.len()),
        });
    }
    // The acceptance fraction depends on normalized progress through the
    // schedule, so pilots must run near the production step count for the
    // measurement to transfer. Quality-neutral proposals (commutations that
    // change neither count nor depth) are always accepted, which puts a
    // floor a little below 0.25 on the fraction; the window is therefore
    // approached from above rather than centered.
    const TARGET: (f64, f64) = (0.10, 0.25);
    let pilot_steps = cfg.steps.clamp(200, 20_000);

    let measure = |scale: f64| -> Result<f64> {
        let mut total = 0.0;
        for (i, c) in samples.iter().enumerate() {
            let pilot = AnnealConfig {
                steps: pilot_steps,
                t_start: cfg.t_start * scale,
                t_end: cfg.t_end * scale,
                seed: cfg.seed.wrapping_add(i as u64),
            };
            total += anneal(c, &pilot, w)?.accepted_fraction;
        }
        Ok(total / samples.len() as f64)
    };

    let scaled = |scale: f64| AnnealConfig {
        t_start: cfg.t_start * scale,
        t_end: cfg.t_end * scale,
        ..*cfg
    };
    let in_window = |f: f64| (TARGET.0..=TARGET.1).contains(&f);

    // Acceptance grows with temperature; bracket the target window, then
    // bisect on a log scale.
    let f = measure(1.0)?;
    if in_window(f) {
        return Ok(scaled(1.0));
    }
    let mut scale = 1.0f64;
    let (mut lo, mut hi);
    if f < TARGET.0 {
        loop {
            scale *= 4.0;
            if scale > 1e12 {
                return Err(Error::TuningFailed);
            }
            let f = measure(scale)?;
            if in_window(f) {
                return Ok(scaled(scale));
            }
            if f > TARGET.1 {
                lo = scale / 4.0;
                hi = scale;
                break;
            }
        }
    } else {
        loop {
            scale /= 4.0;
            if scale < 1e-12 {
                return Err(Error::TuningFailed);
            }
            let f = measure(scale)?;
            if in_window(f) {
                return Ok(scaled(scale));
            }
            if f < TARGET.0 {
                lo = scale;
                hi = scale * 4.0;
                break;
            }
        }
    }

    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        let f = measure(mid)?;
        if in_window(f) {
            return Ok(scaled(mid));
        }
        if f < TARGET.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::TuningFailed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{expand, random_circuit, GenConfig};

    fn sample(seed: u64) -> Circuit {
        let c = random_circuit(&GenConfig {
            num_qubits: 4,
            num_logical_gates: 15,
            seed,
            expansion_steps: 0,
        });
        let pruned = crate::rules::prune(&c);
        expand(&pruned, 20, seed ^ 0xabc).circuit
    }

    #[test]
    fn improvements_are_always_accepted_at_zero_ish_temperature() {
        // With a vanishing temperature the chain is greedy: no accepted step
        // ever increases q.
        let c = sample(1);
        let cfg = AnnealConfig::new(300, 1e-9, 1e-9, 7).unwrap();
        let w = QualityWeights::default();
        let out = anneal(&c, &cfg, &w).unwrap();
        let mut q = quality(&c, &w);
        for p in &out.trace {
            if p.accepted {
                assert!(p.quality <= q + 1e-12);
            }
            q = p.quality;
        }
    }

    #[test]
    fn metropolis_probability_matches_formula() {
        // Acceptance probability for dq = +2 at T = 1 is e^-2; check the
        // empirical fraction of accepted worsenings is in the right regime
        // via the exponential schedule itself instead (unit-level check of
        // the temperature curve).
        let cfg = AnnealConfig::new(100, 8.0, 0.5, 0).unwrap();
        assert!((cfg.temperature(0) - 8.0).abs() < 1e-12);
        let end = cfg.temperature(100);
        assert!((end - 0.5).abs() < 1e-12);
        let mid = cfg.temperature(50);
        assert!((mid - 2.0).abs() < 1e-9); // geometric midpoint of 8 and 0.5
    }

    #[test]
    fn best_so_far_trace_is_non_increasing_and_equivalent() {
        use crate::unitary::{equivalent_up_to_phase, unitary_of, DEFAULT_QUBIT_CAP};
        let c = sample(3);
        let cfg = AnnealConfig::new(400, 2.0, 0.05, 11).unwrap();
        let w = QualityWeights::default();
        let out = anneal(&c, &cfg, &w).unwrap();
        let mut best = f64::INFINITY;
        for p in &out.trace {
            best = best.min(p.quality);
        }
        assert!((best.min(quality(&c, &w)) - out.best_quality).abs() < 1e-12);
        assert!(equivalent_up_to_phase(
            &unitary_of(&c, DEFAULT_QUBIT_CAP).unwrap(),
            &unitary_of(&out.best, DEFAULT_QUBIT_CAP).unwrap(),
            1e-8
        ));
    }

    #[test]
    fn annealing_is_deterministic_per_seed() {
        let c = sample(4);
        let cfg = AnnealConfig::new(200, 2.0, 0.1, 5).unwrap();
        let w = QualityWeights::default();
        let a = anneal(&c, &cfg, &w).unwrap();
        let b = anneal(&c, &cfg, &w).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.trace.len(), b.trace.len());
    }

    #[test]
    fn empty_circuit_has_no_soft_moves() {
        let cfg = AnnealConfig::new(10, 1.0, 0.5, 0).unwrap();
        assert!(matches!(
            anneal(&Circuit::empty(2), &cfg, &QualityWeights::default()),
            Err(Error::NoSoftTransformationAvailable)
        ));
    }
}
