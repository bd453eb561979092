//! End-to-end acceptance suite. Each criterion is one test that prints a
//! single `criterion N (...): pass` line on success (run with
//! `--nocapture` to see them) and fails with a detailed message otherwise.

use std::sync::OnceLock;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use qcopt::circuit::Circuit;
use qcopt::cost::{quality, QualityWeights};
use qcopt::datagen::{derive_seed, make_episode, random_circuit, GenConfig};
use qcopt::env::{transformation_to_action, ActionCell, Env};
use qcopt::nn::{NetConfig, PolicyValueNet};
use qcopt::ppo::{
    batch_loss_and_grads, evaluate, mask_cells, optimize, rollout, train, normalize_advantages,
    returns_and_advantages, OptimizeConfig, PpoConfig, Sample, TrainConfig, TrainOutcome,
};
use qcopt::qaoa::{compile_maxcut, permuted_reference, Graph, QaoaParams};
use qcopt::rules::{enumerate_transformations, prune, verify_local, KindFilter};
use qcopt::sa::{anneal, tune_acceptance, AnnealConfig};
use qcopt::unitary::{equivalent_up_to_phase, unitary_of, DEFAULT_QUBIT_CAP};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn stderr_of_mean(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
    (var / v.len() as f64).sqrt()
}

/// Uniform-random choice over the current action mask, in a deterministic
/// cell order.
fn random_policy_episode(env: &mut Env, rng: &mut impl Rng) {
    while !env.is_done() {
        let mut cells: Vec<ActionCell> = mask_cells(env.mask());
        cells.sort_by_key(|c| (c.qubit, c.moment, c.rule));
        if cells.is_empty() {
            break;
        }
        let cell = cells[rng.gen_range(0..cells.len())];
        env.step(cell).expect("mask-true action must apply");
    }
}

#[test]
fn criterion_1_soundness() {
    // Every enumerated transformation on 1,000 seeded random 5-qubit
    // circuits passes local verification.
    let mut checked = 0usize;
    for seed in 0..1000u64 {
        let c = random_circuit(&GenConfig {
            num_qubits: 5,
            num_logical_gates: 25,
            seed,
            expansion_steps: 0,
        });
        let c = prune(&c);
        for t in enumerate_transformations(&c, KindFilter::All).unwrap() {
            assert!(
                verify_local(&c, &t).unwrap(),
                "criterion 1: transformation {t:?} failed local verification on seed {seed}"
            );
            checked += 1;
        }
    }
    assert!(checked > 10_000, "criterion 1: too few transformations exercised");

    // 100 random-policy episodes (T = 100) end phase-equivalent to their
    // start circuit under the full 32x32 unitary.
    let gen = GenConfig {
        num_qubits: 5,
        num_logical_gates: 25,
        seed: 7,
        expansion_steps: 50,
    };
    for i in 0..100 {
        let ep = make_episode(&gen, i);
        let start = ep.start.clone();
        let u = unitary_of(&start, DEFAULT_QUBIT_CAP).unwrap();
        let capacity = Env::default_capacity(&start);
        let (mut env, _) = Env::reset(start, 100, capacity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(1234, i as u64));
        random_policy_episode(&mut env, &mut rng);
        let v = unitary_of(env.state(), DEFAULT_QUBIT_CAP).unwrap();
        assert!(
            equivalent_up_to_phase(&u, &v, 1e-8),
            "criterion 1: episode {i} is not phase-equivalent to its start"
        );
    }
    println!("criterion 1 (soundness suite): pass");
}

#[test]
fn criterion_2_pruning_properties() {
    let w = QualityWeights::default();
    for seed in 0..10_000u64 {
        let cfg = GenConfig {
            num_qubits: 3 + (seed % 4) as usize,
            num_logical_gates: 10 + (seed % 21) as usize,
            seed,
            expansion_steps: 0,
        };
        let c = random_circuit(&cfg);
        let p = prune(&c);
        assert!(
            quality(&p, &w) <= quality(&c, &w) + 1e-12,
            "criterion 2: pruning worsened quality on seed {seed}"
        );
        assert_eq!(p, prune(&p), "criterion 2: prune not idempotent on seed {seed}");
        let hard = enumerate_transformations(&p, KindFilter::Hard).unwrap();
        assert!(
            hard.is_empty(),
            "criterion 2: {} hard-rule opportunities remain post-prune on seed {seed}",
            hard.len()
        );
    }
    println!("criterion 2 (pruning properties): pass");
}

#[test]
fn criterion_3_pipeline_statistics_anchors() {
    let base = GenConfig {
        num_qubits: 12,
        num_logical_gates: 150,
        seed: 424242,
        expansion_steps: 500,
    };
    let count = 300usize;
    let (mut n1, mut d2, mut n2, mut d3, mut n3) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..count {
        let ep = make_episode(&base, i);
        let raw = random_circuit(&GenConfig { seed: ep.seed, ..base });
        n1 += raw.gate_count() as f64;
        d2 += ep.pruned.depth() as f64;
        n2 += ep.pruned.gate_count() as f64;
        d3 += ep.start.depth() as f64;
        n3 += ep.start.gate_count() as f64;
    }
    let m = count as f64;
    let (n1, d2, n2, d3, n3) = (n1 / m, d2 / m, n2 / m, d3 / m, n3 / m);

    let within = |value: f64, center: f64, frac: f64| {
        (value - center).abs() <= frac * center
    };
    assert!(
        within(n1, 159.0, 0.25),
        "criterion 3: mean gate count before pruning {n1:.1} outside 159 +-25%"
    );
    assert!(
        within(d2, 37.15, 0.25),
        "criterion 3: mean depth after pruning {d2:.2} outside 37.15 +-25%"
    );
    assert!(
        within(n2, 115.27, 0.25),
        "criterion 3: mean gate count after pruning {n2:.2} outside 115.27 +-25%"
    );
    assert!(
        within(d3, 248.0, 0.35),
        "criterion 3: mean depth after expansion {d3:.1} outside 248 +-35%"
    );
    assert!(
        within(n3, 508.0, 0.35),
        "criterion 3: mean gate count after expansion {n3:.1} outside 508 +-35%"
    );
    println!(
        "criterion 3 (pipeline statistics anchors, {count} seeds): pass \
         [n1={n1:.1} d2={d2:.2} n2={n2:.1} d3={d3:.1} n3={n3:.1}]"
    );
}

#[test]
fn criterion_4_annealing_beats_pruning() {
    let w = QualityWeights::default();
    let gen = GenConfig {
        num_qubits: 8,
        num_logical_gates: 60,
        seed: 21,
        expansion_steps: 100,
    };
    let episodes: Vec<_> = (0..100).map(|i| make_episode(&gen, i)).collect();

    let samples: Vec<Circuit> = episodes.iter().take(10).map(|e| e.start.clone()).collect();
    let entry = AnnealConfig::new(20_000, 1.0, 0.05, 99).unwrap();
    let tuned = tune_acceptance(&entry, &samples, &w).expect("criterion 4: tuning failed");

    let (mut best_qs, mut pruned_qs, mut fractions) = (Vec::new(), Vec::new(), Vec::new());
    for (i, ep) in episodes.iter().enumerate() {
        let cfg = AnnealConfig { seed: 1000 + i as u64, ..tuned };
        let out = anneal(&ep.start, &cfg, &w).unwrap();

        // Best-so-far trace is non-increasing and consistent with the
        // reported best quality.
        let mut running = quality(&ep.start, &w);
        for p in &out.trace {
            let next = running.min(p.quality);
            assert!(next <= running, "criterion 4: best-so-far increased");
            running = next;
        }
        assert!(
            (running - out.best_quality).abs() < 1e-12,
            "criterion 4: trace minimum disagrees with best quality"
        );

        best_qs.push(out.best_quality);
        pruned_qs.push(quality(&ep.pruned, &w));
        fractions.push(out.accepted_fraction);
    }

    let mean_best = mean(&best_qs);
    let mean_pruned = mean(&pruned_qs);
    let mean_fraction = mean(&fractions);
    assert!(
        mean_best <= 0.95 * mean_pruned,
        "criterion 4: mean annealed quality {mean_best:.2} above 0.95 x pruned {:.2}",
        0.95 * mean_pruned
    );
    assert!(
        (0.10..=0.25).contains(&mean_fraction),
        "criterion 4: acceptance fraction {mean_fraction:.3} outside [0.10, 0.25]"
    );
    println!(
        "criterion 4 (annealing beats pruning): pass \
         [mean q {mean_best:.2} vs bar {:.2}, acceptance {mean_fraction:.3}]",
        0.95 * mean_pruned
    );
}

#[test]
fn criterion_5_ppo_correctness() {
    let net_cfg = NetConfig {
        trunk_layers: 2,
        channels: 4,
        kernel: 3,
        seed: 17,
    };
    let mut net = PolicyValueNet::new(&net_cfg);
    // Perturb parameters so the policy and value are non-trivial.
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut params = net.params_vec();
    for p in &mut params {
        *p += 0.05 * rng.gen::<f64>();
    }
    net.set_params_vec(&params);

    // Collect a small on-policy batch.
    let gen = GenConfig {
        num_qubits: 4,
        num_logical_gates: 12,
        seed: 19,
        expansion_steps: 5,
    };
    let mut batch: Vec<Sample> = Vec::new();
    for e in 0..2 {
        let ep = make_episode(&gen, e);
        let capacity = Env::default_capacity(&ep.start);
        let (mut env, _) = Env::reset(ep.start, 6, capacity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20 + e as u64);
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
    assert!(batch.len() >= 4);

    // Analytic gradient vs central finite differences over >= 20 parameter
    // directions spread across all layers.
    let ppo = PpoConfig { entropy_coef: 0.01, ..PpoConfig::default() };
    let (_, grads) = batch_loss_and_grads(&net, &batch, &ppo).unwrap();
    let gvec = grads.to_vec();
    let params = net.params_vec();
    let n = params.len();
    let h = 1e-5;
    let mut checked = 0usize;
    for idx in (0..n).step_by((n / 25).max(1)) {
        let mut plus = params.clone();
        plus[idx] += h;
        net.set_params_vec(&plus);
        let (loss_plus, _) = batch_loss_and_grads(&net, &batch, &ppo).unwrap();
        let mut minus = params.clone();
        minus[idx] -= h;
        net.set_params_vec(&minus);
        let (loss_minus, _) = batch_loss_and_grads(&net, &batch, &ppo).unwrap();
        let numeric = (loss_plus - loss_minus) / (2.0 * h);
        let denom = numeric.abs().max(gvec[idx].abs()).max(1e-8);
        let rel = (numeric - gvec[idx]).abs() / denom;
        assert!(
            rel < 1e-4 || (numeric - gvec[idx]).abs() < 1e-8,
            "criterion 5: gradient mismatch at parameter {idx}: numeric {numeric}, analytic {}",
            gvec[idx]
        );
        checked += 1;
    }
    assert!(checked >= 20, "criterion 5: fewer than 20 directions checked");
    net.set_params_vec(&params);

    // Masked actions have exactly zero probability: the policy distribution
    // is supported on exactly the mask-true cells and sums to one there.
    let ep = make_episode(&gen, 11);
    let capacity = Env::default_capacity(&ep.start);
    let (env, obs) = Env::reset(ep.start, 6, capacity).unwrap();
    let eval = evaluate(&net, &obs, env.mask()).unwrap();
    assert_eq!(eval.cells.len(), env.mask().count());
    let total: f64 = eval.log_probs.iter().map(|&lp| lp.exp()).sum();
    assert!(
        (total - 1.0).abs() < 1e-12,
        "criterion 5: masked policy does not sum to 1 over the mask"
    );

    // With A = 0 and V = R, the update is exactly zero.
    let mut degenerate = batch;
    for s in &mut degenerate {
        s.advantage = 0.0;
        s.ret = net.forward(&s.input).value;
    }
    let ppo0 = PpoConfig { entropy_coef: 0.0, ..PpoConfig::default() };
    let (_, grads) = batch_loss_and_grads(&net, &degenerate, &ppo0).unwrap();
    assert!(
        grads.to_vec().iter().all(|&g| g == 0.0),
        "criterion 5: zero-advantage, zero-value-error update is not exactly zero"
    );
    println!("criterion 5 (policy-gradient correctness): pass [{checked} directions]");
}

/// Toy training class shared by criteria 6 and 7.
fn toy_gen() -> GenConfig {
    GenConfig {
        num_qubits: 4,
        num_logical_gates: 20,
        seed: 31,
        expansion_steps: 30,
    }
}

fn trained_policy() -> &'static TrainOutcome {
    static TRAINED: OnceLock<TrainOutcome> = OnceLock::new();
    TRAINED.get_or_init(|| {
        let cfg = TrainConfig {
            epochs: 400,
            episodes_per_epoch: 32,
            episode_len: 50,
            inner_epochs: 2,
            lr: 1e-3,
            seed: 9,
            ppo: PpoConfig::default(),
            net: NetConfig {
                trunk_layers: 3,
                channels: 8,
                kernel: 3,
                seed: 0,
            },
            gen: toy_gen(),
            weights: QualityWeights::default(),
        };
        train(&cfg).expect("training must not fail")
    })
}

#[test]
fn criterion_6_learning_beats_random_policy() {
    let w = QualityWeights::default();
    let gen = toy_gen();
    let outcome = trained_policy();
    // The untouched initialization is exactly uniform over the mask: the
    // random-policy baseline.
    let fresh = PolicyValueNet::new(&NetConfig {
        trunk_layers: 1,
        channels: 2,
        kernel: 3,
        seed: 5,
    });

    let eval_count = 64usize;
    let (mut q_trained, mut q_random, mut q_pruned) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..eval_count {
        let ep = make_episode(&gen, 1_000_000 + i);
        q_pruned.push(quality(&ep.pruned, &w));
        for (net, acc) in [(&outcome.net, &mut q_trained), (&fresh, &mut q_random)] {
            let capacity = Env::default_capacity(&ep.start);
            let (mut env, _) = Env::reset_with_quality(
                ep.start.clone(),
                50,
                capacity,
                Box::new(w),
            )
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(77, i as u64));
            rollout(net, &mut env, &mut rng, false).unwrap();
            acc.push(env.info().quality);
        }
    }

    let (mt, st) = (mean(&q_trained), stderr_of_mean(&q_trained));
    let (mr, sr) = (mean(&q_random), stderr_of_mean(&q_random));
    let mp = mean(&q_pruned);
    let separation = (mr - mt) / (st * st + sr * sr).sqrt();
    assert!(
        separation >= 3.0,
        "criterion 6: trained policy ({mt:.2}) beats random ({mr:.2}) by only \
         {separation:.1} standard errors"
    );
    assert!(
        mt < mp,
        "criterion 6: trained mean quality {mt:.2} does not beat pruned originals {mp:.2}"
    );
    println!(
        "criterion 6 (learning beats random policy): pass \
         [trained {mt:.2} vs random {mr:.2} ({separation:.1} se), pruned {mp:.2}]"
    );
}

#[test]
fn criterion_7_size_extrapolation() {
    let w = QualityWeights::default();
    let net = &trained_policy().net;
    let gen = GenConfig {
        num_qubits: 50,
        num_logical_gates: 2500,
        seed: 11,
        expansion_steps: 0,
    };
    let (mut q_before, mut q_after) = (Vec::new(), Vec::new());
    for i in 0..20 {
        let ep = make_episode(&gen, i);
        let pruned = ep.pruned;
        q_before.push(quality(&pruned, &w));
        let out = optimize(
            net,
            &pruned,
            &OptimizeConfig {
                attempts: 1,
                episode_len: 50,
                greedy: false,
                seed: derive_seed(88, i as u64),
            },
            &w,
        )
        .expect("criterion 7: evaluation on 50-qubit observations failed");
        q_after.push(out.best_quality);
    }
    let (before, after) = (mean(&q_before), mean(&q_after));
    assert!(
        after <= before + 1e-12,
        "criterion 7: mean quality increased from {before:.2} to {after:.2}"
    );
    println!(
        "criterion 7 (size extrapolation to 50 qubits): pass [mean q {before:.2} -> {after:.2}]"
    );
}

#[test]
fn criterion_8_qaoa_oracle() {
    // Deterministic generic angles.
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut random_params = |cycles: usize| {
        let p = QaoaParams::new(
            (0..cycles)
                .map(|_| (rng.gen_range(0.2..1.3), rng.gen_range(0.2..1.3)))
                .collect(),
        )
        .unwrap();
        assert!(p.is_generic(), "criterion 8: sampled angles are not generic");
        p
    };

    // All graphs on <= 4 nodes (every edge subset of the complete graph),
    // plus the 5-node all-to-all graph.
    let mut cases: Vec<Graph> = Vec::new();
    for n in 1..=4usize {
        let all_edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .collect();
        for bits in 0..(1u32 << all_edges.len()) {
            let edges: Vec<(usize, usize)> = all_edges
                .iter()
                .enumerate()
                .filter(|(i, _)| bits >> i & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            cases.push(Graph::new(n, &edges).unwrap());
        }
    }
    cases.push(Graph::complete(5));

    let mut compiled_count = 0usize;
    for graph in &cases {
        for cycles in [1usize, 2] {
            let params = random_params(cycles);
            let n = graph.num_nodes();
            let out = compile_maxcut(graph, &params, n).unwrap();
            let u = unitary_of(&out.circuit, DEFAULT_QUBIT_CAP).unwrap();
            let reference = permuted_reference(graph, &params, &out.permutation).unwrap();
            assert!(
                equivalent_up_to_phase(&u, &reference, 1e-8),
                "criterion 8: compiled circuit deviates from the dense reference \
                 ({n} nodes, {} edges, {cycles} cycles)",
                graph.edges().len()
            );
            compiled_count += 1;
        }
    }

    // 6-node all-to-all, 2 cycles: report shape against the published
    // anchor without a pass/fail bound.
    let params = random_params(2);
    let six = compile_maxcut(&Graph::complete(6), &params, 6).unwrap();
    println!(
        "criterion 8 (maxcut compilation oracle): pass \
         [{compiled_count} compilations verified; 6-node 2-cycle d={} n={} vs anchor d=75 n=142]",
        six.circuit.depth(),
        six.circuit.gate_count()
    );
}

#[test]
fn criterion_9_action_encoding_bijection() {
    let mut total = 0usize;
    for seed in 0..1000u64 {
        let c = prune(&random_circuit(&GenConfig {
            num_qubits: 5,
            num_logical_gates: 25,
            seed: derive_seed(99, seed),
            expansion_steps: 0,
        }));
        let soft = enumerate_transformations(&c, KindFilter::Soft).unwrap();
        let capacity = Env::default_capacity(&c);
        let (env, _) = Env::reset(c, 10, capacity).unwrap();
        assert_eq!(
            env.mask().count(),
            soft.len(),
            "criterion 9: mask count disagrees with enumeration on seed {seed}"
        );
        let mut seen = std::collections::HashSet::new();
        for t in &soft {
            let cell = transformation_to_action(t).unwrap();
            assert!(
                seen.insert(cell),
                "criterion 9: two transformations share action cell {cell:?}"
            );
            let back = env.action_to_transformation(cell).unwrap();
            assert_eq!(back, t, "criterion 9: action round-trip mismatch on seed {seed}");
        }
        total += soft.len();
    }
    assert!(total > 5_000, "criterion 9: too few transformations exercised");
    println!("criterion 9 (action encoding bijection): pass [{total} round-trips]");
}
