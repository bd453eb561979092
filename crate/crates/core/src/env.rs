//! The RL environment: circuit state, grid-encoded observations, the soft
//! action space with its mask, and the immediate reward.

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::Array3;

use crate::circuit::{angle_dist, Circuit, Gate};
use crate::cost::{QualityFn, QualityWeights};
use crate::error::{Error, Result};
use crate::rules::{
    apply, enumerate_transformations, prune, KindFilter, RuleKind, Transformation, CLASS_TOL,
    SOFT_RULES,
};

/// Gate-class channels of the observation grid, in channel order:
/// ZRot[π/2], ZRot[π], ZRot[3π/2], ZRot[generic], PhasedX[X-like, angle π],
/// PhasedX[generic], CNot[control at lower index], CNot[target at lower index].
pub const NUM_GATE_CLASSES: usize = 8;

/// Number of soft rules, i.e. action-rule channels.
pub const NUM_SOFT_RULES: usize = SOFT_RULES.len();

/// Gate-class channel and encoding cell (the gate's lower qubit) of a gate.
pub fn gate_class(gate: &Gate) -> (usize, usize) {
    match *gate {
        Gate::ZRot { qubit, theta } => {
            let ch = if angle_dist(theta, PI / 2.0) < CLASS_TOL {
                0
            } else if angle_dist(theta, PI) < CLASS_TOL {
                1
            } else if angle_dist(theta, 3.0 * PI / 2.0) < CLASS_TOL {
                2
            } else {
                3
            };
            (qubit, ch)
        }
        Gate::PhasedX {
            qubit,
            axis_phase,
            angle,
        } => {
            let x_like = crate::circuit::dist_to_zero_mod_tau(axis_phase) < CLASS_TOL
                || angle_dist(axis_phase, PI) < CLASS_TOL;
            let ch = if x_like && angle_dist(angle, PI) < CLASS_TOL {
                4
            } else {
                5
            };
            (qubit, ch)
        }
        Gate::CNot { control, target } => {
            if control < target {
                (control, 6)
            } else {
                (target, 7)
            }
        }
    }
}

/// One-hot observation grid of shape (qubit, moment, gate class).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub grid: Array3<u8>,
}

impl Observation {
    /// Encode a circuit into a grid with `capacity` moment columns. Moments
    /// at or beyond the current depth are all-zero padding; moments beyond
    /// `capacity` (possible only after an overflow termination) are dropped.
    pub fn encode(circuit: &Circuit, capacity: usize) -> Observation {
        let mut grid = Array3::zeros((circuit.num_qubits(), capacity, NUM_GATE_CLASSES));
        let schedule = circuit.schedule_asap();
        for (i, g) in circuit.gates().iter().enumerate() {
            let m = schedule.moment_of[i];
            if m >= capacity {
                continue;
            }
            let (q, ch) = gate_class(g);
            grid[(q, m, ch)] = 1;
        }
        Observation { grid }
    }

    pub fn num_qubits(&self) -> usize {
        self.grid.dim().0
    }

    pub fn capacity(&self) -> usize {
        self.grid.dim().1
    }

    /// Flat binary layout: row-major (qubit, moment, channel), one byte per
    /// entry.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.grid.iter().copied().collect()
    }
}

/// Boolean action grid of shape (qubit, moment, soft rule).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMask {
    pub grid: Array3<bool>,
}

impl ActionMask {
    pub fn count(&self) -> usize {
        self.grid.iter().filter(|&&b| b).count()
    }

    /// 1-bit-packed layout: row-major (qubit, moment, rule), LSB first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.grid.len().div_ceil(8)];
        for (i, &b) in self.grid.iter().enumerate() {
            if b {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }
}

/// A cell of the action grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionCell {
    pub qubit: usize,
    pub moment: usize,
    pub rule: usize,
}

/// Map an enumerated soft transformation to its action cell.
pub fn transformation_to_action(t: &Transformation) -> Result<ActionCell> {
    let rule = t.rule.soft_index().ok_or(Error::NotApplicable)?;
    Ok(ActionCell {
        qubit: t.locus.qubit,
        moment: t.locus.moment,
        rule,
    })
}

/// Outcome of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StateInfo,
}

/// (d, n, q) of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateInfo {
    pub depth: usize,
    pub gate_count: usize,
    pub quality: f64,
}

/// One optimization episode over a circuit. Single-actor; create one handle
/// per concurrent rollout.
pub struct Env {
    state: Circuit,
    start: Circuit,
    quality: Box<dyn QualityFn + Send>,
    episode_len: usize,
    capacity: usize,
    step_count: usize,
    done: bool,
    actions: HashMap<ActionCell, Transformation>,
    mask: ActionMask,
}

impl Env {
    /// Start an episode on a pruned circuit. `capacity` columns must fit the
    /// start depth.
    pub fn reset(start: Circuit, episode_len: usize, capacity: usize) -> Result<(Env, Observation)> {
        Env::reset_with_quality(start, episode_len, capacity, Box::new(QualityWeights::default()))
    }

    pub fn reset_with_quality(
        start: Circuit,
        episode_len: usize,
        capacity: usize,
        quality: Box<dyn QualityFn + Send>,
    ) -> Result<(Env, Observation)> {
        let depth = start.depth();
        if depth > capacity {
            return Err(Error::CapacityExceeded { depth, capacity });
        }
        let mut env = Env {
            state: start.clone(),
            start,
            quality,
            episode_len,
            capacity,
            step_count: 0,
            done: false,
            actions: HashMap::new(),
            mask: ActionMask {
                grid: Array3::from_elem((0, 0, 0), false),
            },
        };
        env.refresh_actions()?;
        let obs = env.observation();
        Ok((env, obs))
    }

    /// Default moment capacity: twice the start circuit's depth.
    pub fn default_capacity(start: &Circuit) -> usize {
        (2 * start.depth()).max(1)
    }

    fn refresh_actions(&mut self) -> Result<()> {
        let soft = enumerate_transformations(&self.state, KindFilter::Soft)?;
        let mut grid = Array3::from_elem(
            (self.state.num_qubits(), self.capacity, NUM_SOFT_RULES),
            false,
        );
        let mut actions = HashMap::with_capacity(soft.len());
        for t in soft {
            debug_assert_eq!(t.rule.kind(), RuleKind::Soft);
            let cell = transformation_to_action(&t)?;
            if cell.moment < self.capacity {
                grid[(cell.qubit, cell.moment, cell.rule)] = true;
                actions.insert(cell, t);
            }
        }
        self.actions = actions;
        self.mask = ActionMask { grid };
        Ok(())
    }

    pub fn state(&self) -> &Circuit {
        &self.state
    }

    pub fn start(&self) -> &Circuit {
        &self.start
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn observation(&self) -> Observation {
        Observation::encode(&self.state, self.capacity)
    }

    pub fn mask(&self) -> &ActionMask {
        &self.mask
    }

    pub fn info(&self) -> StateInfo {
        StateInfo {
            depth: self.state.depth(),
            gate_count: self.state.gate_count(),
            quality: self.quality.quality(&self.state),
        }
    }

    /// The transformation behind a mask-true cell.
    pub fn action_to_transformation(&self, cell: ActionCell) -> Result<&Transformation> {
        self.actions.get(&cell).ok_or(Error::MaskedAction {
            qubit: cell.qubit,
            moment: cell.moment,
            rule: cell.rule,
        })
    }

    /// Apply the soft transformation at `cell`, prune, and return the reward
    /// `q(previous) - q(next)`. The episode ends after `episode_len` steps,
    /// or early (with an extra `-q` penalty) if the depth outgrows the
    /// moment capacity.
    pub fn step(&mut self, cell: ActionCell) -> Result<StepOutcome> {
        let t = self.action_to_transformation(cell)?.clone();
        let q_prev = self.quality.quality(&self.state);
        let next = prune(&apply(&self.state, &t)?);
        let q_next = self.quality.quality(&next);
        self.state = next;
        self.step_count += 1;

        let mut reward = q_prev - q_next;
        let overflow = self.state.depth() > self.capacity;
        if overflow {
            reward -= q_next;
            self.done = true;
        }
        if self.step_count >= self.episode_len {
            self.done = true;
        }
        if !self.done {
            self.refresh_actions()?;
            if self.actions.is_empty() {
                // Nothing left to do; end the episode instead of stalling.
                self.done = true;
            }
        } else {
            self.refresh_actions()?;
        }
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.done,
            info: self.info(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    #[test]
    fn empty_circuit_gives_all_zero_observation_and_empty_mask() {
        let (env, obs) = Env::reset(Circuit::empty(2), 10, 4).unwrap();
        assert!(obs.grid.iter().all(|&x| x == 0));
        assert_eq!(env.mask().count(), 0);
    }

    #[test]
    fn single_cnot_encodes_at_lower_qubit() {
        let c = Circuit::new(2, vec![Gate::cnot(0, 1)]).unwrap();
        let (_, obs) = Env::reset(c, 10, 2).unwrap();
        assert_eq!(obs.grid[(0, 0, 6)], 1);
        assert_eq!(obs.grid.iter().map(|&x| x as usize).sum::<usize>(), 1);

        let c = Circuit::new(2, vec![Gate::cnot(1, 0)]).unwrap();
        let (_, obs) = Env::reset(c, 10, 2).unwrap();
        assert_eq!(obs.grid[(0, 0, 7)], 1);
    }

    #[test]
    fn zrot_special_angle_channels() {
        for (theta, ch) in [
            (PI / 2.0, 0usize),
            (PI, 1),
            (3.0 * PI / 2.0, 2),
            (0.37, 3),
        ] {
            let g = Gate::zrot(0, theta);
            assert_eq!(gate_class(&g), (0, ch));
        }
        assert_eq!(gate_class(&Gate::phased_x(1, 0.0, PI)), (1, 4));
        assert_eq!(gate_class(&Gate::phased_x(1, PI, PI)), (1, 4));
        assert_eq!(gate_class(&Gate::phased_x(1, 0.3, PI)), (1, 5));
        assert_eq!(gate_class(&Gate::phased_x(1, 0.0, 0.5)), (1, 5));
    }

    #[test]
    fn capacity_overflow_is_rejected_at_reset() {
        let c = Circuit::new(1, vec![Gate::zrot(0, 1.0), Gate::phased_x(0, 0.3, 1.0)]).unwrap();
        assert!(matches!(
            Env::reset(c, 10, 1),
            Err(Error::CapacityExceeded { depth: 2, capacity: 1 })
        ));
    }

    #[test]
    fn mask_count_matches_soft_enumeration() {
        let cfg = crate::datagen::GenConfig {
            num_qubits: 4,
            num_logical_gates: 12,
            seed: 5,
            expansion_steps: 0,
        };
        let c = prune(&crate::datagen::random_circuit(&cfg));
        let soft = enumerate_transformations(&c, KindFilter::Soft).unwrap();
        let cap = Env::default_capacity(&c);
        let (env, _) = Env::reset(c, 10, cap).unwrap();
        assert_eq!(env.mask().count(), soft.len());
        assert_eq!(env.mask().count(), env.actions.len());
    }

    #[test]
    fn action_round_trip_is_exact() {
        let cfg = crate::datagen::GenConfig {
            num_qubits: 5,
            num_logical_gates: 20,
            seed: 9,
            expansion_steps: 0,
        };
        let c = prune(&crate::datagen::random_circuit(&cfg));
        let cap = Env::default_capacity(&c);
        let soft = enumerate_transformations(&c, KindFilter::Soft).unwrap();
        let (env, _) = Env::reset(c, 10, cap).unwrap();
        for t in &soft {
            let cell = transformation_to_action(t).unwrap();
            assert_eq!(env.action_to_transformation(cell).unwrap(), t);
        }
    }

    #[test]
    fn reward_telescopes_over_an_episode() {
        let cfg = crate::datagen::GenConfig {
            num_qubits: 4,
            num_logical_gates: 15,
            seed: 21,
            expansion_steps: 0,
        };
        let c = prune(&crate::datagen::random_circuit(&cfg));
        let w = QualityWeights::default();
        let q0 = crate::cost::quality(&c, &w);
        let cap = 100; // generous: avoid the overflow penalty
        let (mut env, _) = Env::reset(c, 25, cap).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut total = 0.0;
        while !env.is_done() {
            let cells: Vec<ActionCell> = env.actions.keys().copied().collect();
            let mut cells = cells;
            cells.sort_by_key(|c| (c.qubit, c.moment, c.rule));
            let cell = cells[rng.gen_range(0..cells.len())];
            total += env.step(cell).unwrap().reward;
        }
        let q_final = crate::cost::quality(env.state(), &w);
        assert!((total - (q0 - q_final)).abs() < 1e-9);
    }

    #[test]
    fn masked_action_is_rejected() {
        let c = Circuit::new(2, vec![Gate::cnot(0, 1)]).unwrap();
        let (mut env, _) = Env::reset(c, 10, 4).unwrap();
        let bogus = ActionCell {
            qubit: 1,
            moment: 3,
            rule: 0,
        };
        assert!(matches!(env.step(bogus), Err(Error::MaskedAction { .. })));
    }

    #[test]
    fn observation_cells_have_at_most_one_active_channel() {
        let cfg = crate::datagen::GenConfig {
            num_qubits: 5,
            num_logical_gates: 25,
            seed: 33,
            expansion_steps: 0,
        };
        let c = crate::datagen::random_circuit(&cfg);
        let depth = c.depth();
        let obs = Observation::encode(&c, depth + 3);
        for q in 0..5 {
            for m in 0..depth + 3 {
                let active: usize = (0..NUM_GATE_CLASSES)
                    .map(|ch| obs.grid[(q, m, ch)] as usize)
                    .sum();
                assert!(active <= 1);
                if m >= depth {
                    assert_eq!(active, 0);
                }
            }
        }
    }
}
