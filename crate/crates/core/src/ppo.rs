//! Proximal policy optimization over the circuit environment: masked policy
//! evaluation, rollouts, the clipped-surrogate update, the training loop,
//! and policy-driven circuit optimization.

use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::cost::{quality, QualityWeights};
use crate::datagen::{derive_seed, make_episode, GenConfig};
use crate::env::{ActionCell, ActionMask, Env, Observation};
use crate::error::{Error, Result};
use crate::nn::{Adam, Grads, NetConfig, PolicyValueNet};
use crate::rules::prune;

/// Observation grid (qubit, moment, channel) -> network input
/// (channel, qubit, moment).
pub fn obs_to_input(obs: &Observation) -> Array3<f64> {
    let (q, m, c) = obs.grid.dim();
    let mut input = Array3::zeros((c, q, m));
    for ((qi, mi, ci), &v) in obs.grid.indexed_iter() {
        input[(ci, qi, mi)] = v as f64;
    }
    input
}

/// Mask-true cells in deterministic (qubit, moment, rule) order.
pub fn mask_cells(mask: &ActionMask) -> Vec<ActionCell> {
    mask.grid
        .indexed_iter()
        .filter(|(_, &b)| b)
        .map(|((qubit, moment, rule), _)| ActionCell {
            qubit,
            moment,
            rule,
        })
        .collect()
}

/// Log-softmax of the logits restricted to the given cells.
fn masked_log_probs(logits: &Array3<f64>, cells: &[ActionCell]) -> Vec<f64> {
    let raw: Vec<f64> = cells
        .iter()
        .map(|c| logits[(c.rule, c.qubit, c.moment)])
        .collect();
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + raw.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    raw.iter().map(|&x| x - lse).collect()
}

/// Policy/value evaluation of one state.
pub struct PolicyEval {
    pub cells: Vec<ActionCell>,
    pub log_probs: Vec<f64>,
    pub value: f64,
}

/// Evaluate the net on an observation, restricting the policy to mask-true
/// cells. Errors with `AllMasked` when no action is available.
pub fn evaluate(
    net: &PolicyValueNet,
    obs: &Observation,
    mask: &ActionMask,
) -> Result<PolicyEval> {
    let cells = mask_cells(mask);
    if cells.is_empty() {
        return Err(Error::AllMasked);
    }
    let cache = net.forward(&obs_to_input(obs));
    let log_probs = masked_log_probs(&cache.policy_logits, &cells);
    Ok(PolicyEval {
        cells,
        log_probs,
        value: cache.value,
    })
}

/// Pick an action: greedy argmax or a sample from the masked distribution.
pub fn select_action(eval: &PolicyEval, rng: &mut impl Rng, greedy: bool) -> usize {
    if greedy {
        let mut best = 0;
        for i in 1..eval.log_probs.len() {
            if eval.log_probs[i] > eval.log_probs[best] {
                best = i;
            }
        }
        return best;
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &lp) in eval.log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    eval.log_probs.len() - 1
}

/// One recorded environment step.
pub struct StepRecord {
    pub input: Array3<f64>,
    pub cells: Vec<ActionCell>,
    pub chosen: usize,
    pub logp: f64,
    pub value: f64,
    pub reward: f64,
}

/// Roll the policy through one episode, recording everything the update
/// needs. The episode ends on the env's own termination conditions.
pub fn rollout(
    net: &PolicyValueNet,
    env: &mut Env,
    rng: &mut impl Rng,
    greedy: bool,
) -> Result<Vec<StepRecord>> {
    let mut records = Vec::new();
    while !env.is_done() {
        let obs = env.observation();
        let eval = match evaluate(net, &obs, env.mask()) {
            Ok(e) => e,
            Err(Error::AllMasked) => break,
            Err(e) => return Err(e),
        };
        let chosen = select_action(&eval, rng, greedy);
        let outcome = env.step(eval.cells[chosen])?;
        records.push(StepRecord {
            input: obs_to_input(&obs),
            cells: eval.cells,
            chosen,
            logp: eval.log_probs[chosen],
            value: eval.value,
            reward: outcome.reward,
        });
    }
    Ok(records)
}

/// Discounted suffix-sum returns and one-step advantages
/// `A_t = r_t + gamma * V(s_{t+1}) - V(s_t)` (terminal value 0).
pub fn returns_and_advantages(records: &[StepRecord], gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let n = records.len();
    let mut returns = vec![0.0; n];
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        acc = records[t].reward + gamma * acc;
        returns[t] = acc;
        let next_value = if t + 1 < n { records[t + 1].value } else { 0.0 };
        advantages[t] = records[t].reward + gamma * next_value - records[t].value;
    }
    (returns, advantages)
}

/// One update sample: a state, its action set, the chosen action, and the
/// quantities frozen at rollout time.
pub struct Sample {
    pub input: Array3<f64>,
    pub cells: Vec<ActionCell>,
    pub chosen: usize,
    pub logp_old: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// PPO loss knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
        }
    }
}

/// Mean PPO loss over a batch and its analytic parameter gradient:
/// `-min(rho * A, clip(rho) * A) + value_coef * (V - R)^2
///  - entropy_coef * H(policy)`.
pub fn batch_loss_and_grads(
    net: &PolicyValueNet,
    batch: &[Sample],
    cfg: &PpoConfig,
) -> Result<(f64, Grads)> {
    assert!(!batch.is_empty(), "empty update batch");
    let mut grads = net.zero_grads();
    let mut total_loss = 0.0;
    let scale = 1.0 / batch.len() as f64;

    for s in batch {
        let cache = net.forward(&s.input);
        let log_probs = masked_log_probs(&cache.policy_logits, &s.cells);
        let probs: Vec<f64> = log_probs.iter().map(|&lp| lp.exp()).collect();
        let logp = log_probs[s.chosen];
        let rho = (logp - s.logp_old).exp();
        let surr1 = rho * s.advantage;
        let clipped = rho.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let surr2 = clipped * s.advantage;
        let objective = surr1.min(surr2);
        // Gradient flows through rho only when the unclipped branch is
        // active (ties included: there the clip is the identity).
        let dobj_dlogp = if surr1 <= surr2 { surr1 } else { 0.0 };

        let value_err = cache.value - s.ret;
        let entropy = -log_probs
            .iter()
            .zip(&probs)
            .map(|(&lp, &p)| p * lp)
            .sum::<f64>();

        total_loss += scale
            * (-objective + cfg.value_coef * value_err * value_err
                - cfg.entropy_coef * entropy);

        // d(loss)/d(logit_i) over the masked cells.
        let mut grad_logits = Array3::zeros(cache.policy_logits.dim());
        for (i, c) in s.cells.iter().enumerate() {
            let indicator = if i == s.chosen { 1.0 } else { 0.0 };
            let mut g = -dobj_dlogp * (indicator - probs[i]);
            if cfg.entropy_coef != 0.0 {
                // dH/dz_i = -p_i * (log p_i + H)
                g += cfg.entropy_coef * probs[i] * (log_probs[i] + entropy);
            }
            grad_logits[(c.rule, c.qubit, c.moment)] += scale * g;
        }
        let grad_value = scale * 2.0 * cfg.value_coef * value_err;
        net.backward(&cache, &grad_logits, grad_value, &mut grads);
    }

    if !total_loss.is_finite() {
        return Err(Error::NonfiniteLoss);
    }
    Ok((total_loss, grads))
}

/// Normalize advantages to zero mean / unit variance across the batch.
pub fn normalize_advantages(batch: &mut [Sample]) {
    let n = batch.len() as f64;
    if batch.len() < 2 {
        return;
    }
    let mean = batch.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = batch
        .iter()
        .map(|s| (s.advantage - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt().max(1e-8);
    for s in batch {
        s.advantage = (s.advantage - mean) / std;
    }
}

/// Full training configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub episode_len: usize,
    /// Gradient steps per collected batch.
    pub inner_epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub ppo: PpoConfig,
    #[serde(skip, default)]
    pub net: NetConfig,
    pub gen: GenConfig,
    pub weights: QualityWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            episodes_per_epoch: 32,
            episode_len: 50,
            inner_epochs: 2,
            lr: 1e-3,
            seed: 0,
            ppo: PpoConfig::default(),
            net: NetConfig::default(),
            gen: GenConfig::default(),
            weights: QualityWeights::default(),
        }
    }
}

/// Per-epoch aggregate statistics over the epoch's episodes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_depth: f64,
    pub mean_gate_count: f64,
    pub mean_quality: f64,
    pub mean_return: f64,
}

/// Training result: the trained net plus the learning curves.
pub struct TrainOutcome {
    pub net: PolicyValueNet,
    pub curves: Vec<EpochStats>,
}

/// Train a fresh policy on the episode stream defined by `cfg.gen`. Each
/// epoch samples new episodes, collects on-policy rollouts, and performs
/// `inner_epochs` full-batch clipped updates.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(cfg, |_| {})
}

/// `train`, reporting each epoch's statistics as they are produced.
pub fn train_with_progress(
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    let mut net = PolicyValueNet::new(&NetConfig {
        seed: derive_seed(cfg.seed, 0xface),
        ..cfg.net
    });
    let mut adam = Adam::new(cfg.lr, net.num_params());
    let mut curves = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut batch: Vec<Sample> = Vec::new();
        let mut sum_depth = 0.0;
        let mut sum_gates = 0.0;
        let mut sum_quality = 0.0;
        let mut sum_return = 0.0;
        let episodes = cfg.episodes_per_epoch.max(1);

        for e in 0..episodes {
            let index = epoch * episodes + e;
            let episode = make_episode(&cfg.gen, index);
            let capacity = Env::default_capacity(&episode.start);
            let (mut env, _) = Env::reset_with_quality(
                episode.start,
                cfg.episode_len,
                capacity,
                Box::new(cfg.weights),
            )?;
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x1000 + index as u64));
            let records = rollout(&net, &mut env, &mut rng, false)?;

            let info = env.info();
            sum_depth += info.depth as f64;
            sum_gates += info.gate_count as f64;
            sum_quality += info.quality;
            sum_return += records.iter().map(|r| r.reward).sum::<f64>();

            let (returns, advantages) = returns_and_advantages(&records, cfg.ppo.gamma);
            for (t, r) in records.into_iter().enumerate() {
                batch.push(Sample {
                    input: r.input,
                    cells: r.cells,
                    chosen: r.chosen,
                    logp_old: r.logp,
                    advantage: advantages[t],
                    ret: returns[t],
                });
            }
        }

        if !batch.is_empty() {
            normalize_advantages(&mut batch);
            for _ in 0..cfg.inner_epochs.max(1) {
                let (_, grads) = batch_loss_and_grads(&net, &batch, &cfg.ppo)?;
                let mut params = net.params_vec();
                adam.step(&mut params, &grads.to_vec());
                net.set_params_vec(&params);
            }
        }

        let stats = EpochStats {
            epoch,
            mean_depth: sum_depth / episodes as f64,
            mean_gate_count: sum_gates / episodes as f64,
            mean_quality: sum_quality / episodes as f64,
            mean_return: sum_return / episodes as f64,
        };
        progress(&stats);
        curves.push(stats);
    }

    Ok(TrainOutcome { net, curves })
}

/// Policy-driven optimization settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub attempts: usize,
    pub episode_len: usize,
    pub greedy: bool,
    pub seed: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            attempts: 1,
            episode_len: 50,
            greedy: false,
            seed: 0,
        }
    }
}

/// Result of policy-driven optimization.
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub best: Circuit,
    pub best_quality: f64,
    /// Per-attempt applied-transformation logs, for replay against the
    /// pruned input.
    pub episodes: Vec<Vec<crate::rules::AppliedStep>>,
}

/// Run the policy on a circuit for `attempts` episodes and return the
/// best-quality state visited anywhere (the pruned input included).
pub fn optimize(
    net: &PolicyValueNet,
    circuit: &Circuit,
    cfg: &OptimizeConfig,
    w: &QualityWeights,
) -> Result<OptimizeOutcome> {
    let start = prune(circuit);
    let mut best = start.clone();
    let mut best_q = quality(&start, w);
    let mut episodes = Vec::with_capacity(cfg.attempts);

    for attempt in 0..cfg.attempts {
        let capacity = Env::default_capacity(&start);
        let (mut env, _) =
            Env::reset_with_quality(start.clone(), cfg.episode_len, capacity, Box::new(*w))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, attempt as u64));
        let mut applied = Vec::new();
        while !env.is_done() {
            let obs = env.observation();
            let eval = match evaluate(net, &obs, env.mask()) {
                Ok(e) => e,
                Err(Error::AllMasked) => break,
                Err(e) => return Err(e),
            };
            let chosen = select_action(&eval, &mut rng, cfg.greedy);
            applied.push(crate::rules::AppliedStep::from(
                env.action_to_transformation(eval.cells[chosen])?,
            ));
            let outcome = env.step(eval.cells[chosen])?;
            if outcome.info.quality < best_q {
                best_q = outcome.info.quality;
                best = env.state().clone();
            }
        }
        episodes.push(applied);
    }
    Ok(OptimizeOutcome {
        best,
        best_quality: best_q,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::random_circuit;
    use crate::env::NUM_GATE_CLASSES;

    fn toy_batch(seed: u64, episodes: usize) -> (PolicyValueNet, Vec<Sample>) {
        let net_cfg = NetConfig {
            trunk_layers: 2,
            channels: 4,
            kernel: 3,
            seed,
        };
        let mut net = PolicyValueNet::new(&net_cfg);
        // Perturb the heads so probabilities and values are non-trivial.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
        let mut params = net.params_vec();
        for p in &mut params {
            *p += 0.05 * rng.gen::<f64>();
        }
        net.set_params_vec(&params);

        let gen = GenConfig {
            num_qubits: 4,
            num_logical_gates: 12,
            seed,
            expansion_steps: 5,
        };
        let mut batch = Vec::new();
        for e in 0..episodes {
            let episode = make_episode(&gen, e);
            let capacity = Env::default_capacity(&episode.start);
            let (mut env, _) =
                Env::reset(episode.start, 6, capacity).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + e as u64);
            let records = rollout(&net, &mut env, &mut rng, false).unwrap();
            let (returns, advantages) = returns_and_advantages(&records, 0.99);
            for (t, r) in records.into_iter().enumerate() {
                batch.push(Sample {
                    input: r.input,
                    cells: r.cells,
                    chosen: r.chosen,
                    logp_old: r.logp,
                    advantage: advantages[t],
                    ret: returns[t],
                });
            }
        }
        normalize_advantages(&mut batch);
        (net, batch)
    }

    #[test]
    fn masked_log_probs_normalize() {
        let (net, batch) = toy_batch(5, 1);
        assert!(!batch.is_empty());
        let s = &batch[0];
        let cache = net.forward(&s.input);
        let lp = masked_log_probs(&cache.policy_logits, &s.cells);
        let total: f64 = lp.iter().map(|&x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (mut net, batch) = toy_batch(7, 2);
        assert!(batch.len() >= 4);
        let cfg = PpoConfig {
            entropy_coef: 0.01,
            ..PpoConfig::default()
        };
        let (loss0, grads) = batch_loss_and_grads(&net, &batch, &cfg).unwrap();
        let gvec = grads.to_vec();
        let params = net.params_vec();

        // Probe a spread of parameter coordinates across all layers.
        let n = params.len();
        let h = 1e-6;
        let mut checked = 0;
        for idx in (0..n).step_by((n / 25).max(1)) {
            let mut p2 = params.clone();
            p2[idx] += h;
            net.set_params_vec(&p2);
            let (loss1, _) = batch_loss_and_grads(&net, &batch, &cfg).unwrap();
            let numeric = (loss1 - loss0) / h;
            let denom = numeric.abs().max(gvec[idx].abs()).max(1e-8);
            let rel = (numeric - gvec[idx]).abs() / denom;
            assert!(
                rel < 1e-4 || (numeric - gvec[idx]).abs() < 1e-7,
                "param {idx}: numeric {numeric}, analytic {}",
                gvec[idx]
            );
            checked += 1;
        }
        assert!(checked >= 20);
        net.set_params_vec(&params);
    }

    #[test]
    fn returns_are_discounted_suffix_sums() {
        let records: Vec<StepRecord> = [1.0, 0.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &r)| StepRecord {
                input: Array3::zeros((NUM_GATE_CLASSES, 1, 1)),
                cells: vec![],
                chosen: 0,
                logp: 0.0,
                value: 0.1 * i as f64,
                reward: r,
            })
            .collect();
        let (ret, adv) = returns_and_advantages(&records, 0.5);
        assert!((ret[0] - (1.0 + 0.5 * (0.0 + 0.5 * 2.0))).abs() < 1e-12);
        assert!((ret[2] - 2.0).abs() < 1e-12);
        // One-step advantage at t=1: 0 + 0.5 * v2 - v1.
        assert!((adv[1] - (0.5 * 0.2 - 0.1)).abs() < 1e-12);
        // Terminal: v3 = 0.
        assert!((adv[2] - (2.0 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn fresh_net_policy_is_uniform_over_the_mask() {
        let net = PolicyValueNet::new(&NetConfig {
            trunk_layers: 2,
            channels: 4,
            kernel: 3,
            seed: 1,
        });
        let c = prune(&random_circuit(&GenConfig {
            num_qubits: 4,
            num_logical_gates: 15,
            seed: 2,
            expansion_steps: 0,
        }));
        let capacity = Env::default_capacity(&c);
        let (env, obs) = Env::reset(c, 10, capacity).unwrap();
        let eval = evaluate(&net, &obs, env.mask()).unwrap();
        let expected = -(eval.cells.len() as f64).ln();
        for &lp in &eval.log_probs {
            assert!((lp - expected).abs() < 1e-12);
        }
        assert_eq!(eval.value, 0.0);
    }

    #[test]
    fn evaluate_rejects_empty_mask() {
        let net = PolicyValueNet::new(&NetConfig {
            trunk_layers: 1,
            channels: 2,
            kernel: 3,
            seed: 0,
        });
        let (env, obs) = Env::reset(Circuit::empty(2), 5, 2).unwrap();
        assert!(matches!(
            evaluate(&net, &obs, env.mask()),
            Err(Error::AllMasked)
        ));
    }

    #[test]
    fn update_step_reduces_the_loss_on_a_fixed_batch() {
        let (mut net, batch) = toy_batch(11, 2);
        let cfg = PpoConfig::default();
        let (loss0, grads) = batch_loss_and_grads(&net, &batch, &cfg).unwrap();
        let mut adam = Adam::new(1e-3, net.num_params());
        let mut params = net.params_vec();
        for _ in 0..5 {
            adam.step(&mut params, &grads.to_vec());
        }
        net.set_params_vec(&params);
        let (loss1, _) = batch_loss_and_grads(&net, &batch, &cfg).unwrap();
        assert!(loss1 < loss0);
    }

    #[test]
    fn optimize_never_worsens_the_pruned_input() {
        let net = PolicyValueNet::new(&NetConfig {
            trunk_layers: 2,
            channels: 4,
            kernel: 3,
            seed: 3,
        });
        let c = random_circuit(&GenConfig {
            num_qubits: 4,
            num_logical_gates: 20,
            seed: 4,
            expansion_steps: 0,
        });
        let w = QualityWeights::default();
        let out = optimize(
            &net,
            &c,
            &OptimizeConfig {
                attempts: 3,
                episode_len: 10,
                greedy: false,
                seed: 5,
            },
            &w,
        )
        .unwrap();
        assert!(out.best_quality <= quality(&prune(&c), &w) + 1e-12);
        // The reported best quality matches the reported best circuit.
        assert!((quality(&out.best, &w) - out.best_quality).abs() < 1e-12);
    }
}
