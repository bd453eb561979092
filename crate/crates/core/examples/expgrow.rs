use ndarray::Array2;
use num_complex::Complex64;
use qcopt::circuit::{Circuit, Gate};
use qcopt::datagen::{derive_seed, expand};
use qcopt::rules::prune;
use qcopt::synth::{haar_random_1q, hadamard, resynthesize_1q};
use qcopt::unitary::{matrix_1q, phased_x_matrix, zrot_matrix};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[derive(Clone, Copy)]
struct Dist {
    p_cnot: f64,
    // local-gate weights: generic zrot, generic phased-x, hadamard, haar, special zoo
    w: [f64; 5],
    // CNOT position bias exponent: weight(a) = min(a+1, 11-a)^k
    k: f64,
    // true: orientation uniform; false: control always lower index
    flip: bool,
    // position random-walk restart probability; >=1.0 disables the walk
    restart: f64,
}

fn sample_pos(rng: &mut ChaCha8Rng, k: f64) -> usize {
    if k == 0.0 {
        return rng.gen_range(0..11);
    }
    let w: Vec<f64> = (0..11)
        .map(|a| (std::cmp::min(a + 1, 11 - a) as f64).powf(k))
        .collect();
    let total: f64 = w.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (a, wi) in w.iter().enumerate() {
        if x < *wi {
            return a;
        }
        x -= wi;
    }
    10
}

fn sample_local(rng: &mut ChaCha8Rng, d: &Dist) -> Array2<Complex64> {
    let total: f64 = d.w.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    let mut k = 0;
    for (i, wi) in d.w.iter().enumerate() {
        if x < *wi {
            k = i;
            break;
        }
        x -= wi;
        k = i;
    }
    match k {
        0 => matrix_1q(&zrot_matrix(rng.gen_range(0.0..2.0 * PI))),
        1 => matrix_1q(&phased_x_matrix(
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(0.0..2.0 * PI),
        )),
        2 => hadamard(),
        3 => haar_random_1q(rng),
        _ => match rng.gen_range(0..5) {
            0 => matrix_1q(&zrot_matrix(PI / 2.0)),
            1 => matrix_1q(&zrot_matrix(PI)),
            2 => matrix_1q(&zrot_matrix(3.0 * PI / 2.0)),
            3 => matrix_1q(&phased_x_matrix(0.0, PI)),
            _ => matrix_1q(&phased_x_matrix(PI / 2.0, PI)),
        },
    }
}

fn gen(seed: u64, d: &Dist) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gates = Vec::new();
    let mut walk: Option<usize> = None;
    for _ in 0..150 {
        if rng.gen_bool(d.p_cnot) {
            let a = if d.restart >= 1.0 {
                sample_pos(&mut rng, d.k)
            } else {
                // reflecting +-1 walk over positions with random restarts
                match walk {
                    Some(prev) if !rng.gen_bool(d.restart) => {
                        if prev == 0 { 1 }
                        else if prev == 10 { 9 }
                        else if rng.gen_bool(0.5) { prev - 1 } else { prev + 1 }
                    }
                    _ => rng.gen_range(0..11),
                }
            };
            walk = Some(a);
            let (c, t) = if d.flip && rng.gen_bool(0.5) { (a + 1, a) } else { (a, a + 1) };
            gates.push(Gate::cnot(c, t));
        } else {
            let q = rng.gen_range(0..12);
            let u = sample_local(&mut rng, d);
            gates.extend(resynthesize_1q(&u).unwrap().gates(q));
        }
    }
    Circuit::new(12, gates).unwrap()
}

fn trace(dist: &Dist) {
    use qcopt::rules::{apply, enumerate_transformations, KindFilter};
    let mut c = prune(&gen(derive_seed(1234, 0), dist));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(5678, 0));
    let mut picked = std::collections::BTreeMap::new();
    for step in 0..500usize {
        let soft = enumerate_transformations(&c, KindFilter::Soft).unwrap();
        if step % 100 == 0 {
            let mut by_rule = std::collections::BTreeMap::new();
            for t in &soft {
                *by_rule.entry(format!("{:?}", t.rule)).or_insert(0) += 1;
            }
            println!(
                "step {step}: d={} n={} moves={} {:?}",
                c.depth(), c.gate_count(), soft.len(), by_rule
            );
        }
        let t = soft[rng.gen_range(0..soft.len())].clone();
        *picked.entry(format!("{:?}", t.rule)).or_insert(0) += 1;
        c = apply(&c, &t).unwrap();
    }
    let p = prune(&c);
    println!("pre-prune d={} n={} | post d={} n={}", c.depth(), c.gate_count(), p.depth(), p.gate_count());
    println!("picked: {picked:?}");
}

fn anchors() {
    use qcopt::datagen::{make_episode, random_circuit, GenConfig};
    let base = GenConfig { num_qubits: 12, num_logical_gates: 150, seed: 424242, expansion_steps: 500 };
    let (mut n1, mut d1, mut n2, mut d2, mut n3, mut d3) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let count = 300;
    for i in 0..count {
        let ep = make_episode(&base, i);
        let raw = random_circuit(&GenConfig { seed: ep.seed, ..base });
        n1 += raw.gate_count() as f64;
        d1 += raw.depth() as f64;
        n2 += ep.pruned.gate_count() as f64;
        d2 += ep.pruned.depth() as f64;
        n3 += ep.start.gate_count() as f64;
        d3 += ep.start.depth() as f64;
    }
    let m = count as f64;
    println!("targets: n1 119-199 | d2 27.9-46.4 n2 86.5-144.1 | d3 161-335 n3 330-686");
    println!(
        "pipeline 300 seeds: n1={:.1} d1={:.1} | d2={:.1} n2={:.1} | d3={:.1} n3={:.1}",
        n1 / m, d1 / m, d2 / m, n2 / m, d3 / m, n3 / m
    );
}

fn aux() {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{make_episode, GenConfig};
    let w = QualityWeights::default();
    for (name, q, g, e, cnt) in [
        ("sa 8q/60g/100x", 8usize, 60usize, 100usize, 50usize),
        ("toy 4q/20g/30x", 4, 20, 30, 50),
        ("ext 50q/2500g/0x", 50, 2500, 0, 10),
    ] {
        let base = GenConfig { num_qubits: q, num_logical_gates: g, seed: 11, expansion_steps: e };
        let (mut qp, mut qs, mut dp, mut np, mut ds, mut ns) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..cnt {
            let ep = make_episode(&base, i);
            qp += quality(&ep.pruned, &w);
            qs += quality(&ep.start, &w);
            dp += ep.pruned.depth() as f64;
            np += ep.pruned.gate_count() as f64;
            ds += ep.start.depth() as f64;
            ns += ep.start.gate_count() as f64;
        }
        let m = cnt as f64;
        println!(
            "{name}: pruned d={:.1} n={:.1} q={:.2} | start d={:.1} n={:.1} q={:.2}",
            dp / m, np / m, qp / m, ds / m, ns / m, qs / m
        );
    }
}

fn sa_pilot(count: usize, steps: usize) {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{make_episode, GenConfig};
    use qcopt::sa::{anneal, tune_acceptance, AnnealConfig};
    let w = QualityWeights::default();
    let base = GenConfig { num_qubits: 8, num_logical_gates: 60, seed: 21, expansion_steps: 100 };
    let eps: Vec<_> = (0..count).map(|i| make_episode(&base, i)).collect();
    let tuner_samples: Vec<_> = eps.iter().take(10).map(|e| e.start.clone()).collect();
    let cfg = AnnealConfig::new(steps, 1.0, 0.05, 99).unwrap();
    let t0 = std::time::Instant::now();
    let tuned = tune_acceptance(&cfg, &tuner_samples, &w).unwrap();
    println!("tuned t_start={:.4} t_end={:.6} in {:?}", tuned.t_start, tuned.t_end, t0.elapsed());
    let (mut qb, mut qp, mut acc) = (0.0, 0.0, 0.0);
    let t1 = std::time::Instant::now();
    for (i, ep) in eps.iter().enumerate() {
        let cfg_i = AnnealConfig { seed: 1000 + i as u64, ..tuned };
        let out = anneal(&ep.start, &cfg_i, &w).unwrap();
        qb += out.best_quality;
        qp += quality(&ep.pruned, &w);
        acc += out.accepted_fraction;
        if i == 0 {
            println!("first anneal: {:?} q {:.2} -> {:.2}", t1.elapsed(), quality(&ep.start, &w), out.best_quality);
        }
    }
    let m = count as f64;
    println!(
        "mean best q={:.2} vs 0.95*pruned={:.2} (pruned {:.2}); acceptance={:.3}; total {:?}",
        qb / m, 0.95 * qp / m, qp / m, acc / m, t1.elapsed()
    );
}

fn sa_scan(steps: usize) {
    use qcopt::cost::QualityWeights;
    use qcopt::datagen::{make_episode, GenConfig};
    use qcopt::sa::{anneal, AnnealConfig};
    let w = QualityWeights::default();
    let base = GenConfig { num_qubits: 8, num_logical_gates: 60, seed: 21, expansion_steps: 100 };
    let eps: Vec<_> = (0..100).map(|i| make_episode(&base, i)).collect();
    let qp: f64 = eps.iter().map(|e| qcopt::cost::quality(&e.pruned, &w)).sum::<f64>()
        / eps.len() as f64;
    for &(t_start, t_end) in &[
        (1.0f64, 0.05f64),
        (1.0, 0.06),
        (1.0, 0.08),
        (1.1, 0.05),
        (0.9, 0.05),
        (1.0, 0.045),
    ] {
        let (mut acc, mut qb) = (0.0, 0.0);
        let mut rows = Vec::new();
        for (i, ep) in eps.iter().enumerate() {
            let cfg = AnnealConfig::new(steps, t_start, t_end, 1000 + i as u64).unwrap();
            let out = anneal(&ep.start, &cfg, &w).unwrap();
            acc += out.accepted_fraction;
            qb += out.best_quality;
            let qpi = qcopt::cost::quality(&ep.pruned, &w);
            rows.push((out.best_quality - 0.95 * qpi, i, out.best_quality, qpi));
        }
        let m = eps.len() as f64;
        println!(
            "t=({t_start},{t_end}) mean acceptance={:.4} mean best q={:.2} (bar {:.2})",
            acc / m, qb / m, 0.95 * qp
        );
        rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let over = rows.iter().filter(|r| r.0 > 0.0).count();
        println!("circuits over own bar: {over}/100");
        for r in rows.iter().take(12) {
            println!("  idx {:>3} deficit {:+.2} best {:.2} pruned {:.2}", r.1, r.0, r.2, r.3);
        }
    }
}

fn rl_pilot(epochs: usize, layers: usize, channels: usize, entropy: f64, inner: usize, lr: f64) {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{derive_seed as ds, make_episode, GenConfig};
    use qcopt::env::Env;
    use qcopt::nn::{NetConfig, PolicyValueNet};
    use qcopt::ppo::{rollout, train_with_progress, PpoConfig, TrainConfig};
    let w = QualityWeights::default();
    let gen = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 30 };
    let cfg = TrainConfig {
        epochs,
        episodes_per_epoch: 32,
        episode_len: 50,
        inner_epochs: inner,
        lr,
        seed: 9,
        ppo: PpoConfig { entropy_coef: entropy, ..PpoConfig::default() },
        net: NetConfig { trunk_layers: layers, channels, kernel: 3, seed: 0 },
        gen,
        weights: w,
    };
    let t0 = std::time::Instant::now();
    let out = train_with_progress(&cfg, |s| {
        if s.epoch % 10 == 0 {
            println!(
                "epoch {:>4}: mean q={:.2} d={:.1} n={:.1} ret={:.2} ({:?})",
                s.epoch, s.mean_quality, s.mean_depth, s.mean_gate_count, s.mean_return,
                t0.elapsed()
            );
        }
    })
    .unwrap();
    println!("trained in {:?}", t0.elapsed());

    // Evaluation on fresh episodes: trained policy vs the uniform policy of
    // a freshly initialized net, plus the pruned-original reference.
    let fresh = PolicyValueNet::new(&NetConfig { trunk_layers: 1, channels: 2, kernel: 3, seed: 5 });
    let eval_count = 64usize;
    let (mut qt, mut qr, mut qp) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..eval_count {
        let ep = make_episode(&gen, 1_000_000 + i);
        qp.push(quality(&ep.pruned, &w));
        for (net, acc) in [(&out.net, &mut qt), (&fresh, &mut qr)] {
            let capacity = Env::default_capacity(&ep.start);
            let (mut env, _) =
                Env::reset_with_quality(ep.start.clone(), 50, capacity, Box::new(w)).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ds(77, i as u64));
            rollout(net, &mut env, &mut rng, false).unwrap();
            acc.push(env.info().quality);
        }
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    };
    let (mt, st) = stats(&qt);
    let (mr, sr) = stats(&qr);
    let (mp, _) = stats(&qp);
    let sep = (mr - mt) / (st * st + sr * sr).sqrt();
    println!(
        "eval: trained q={mt:.2}±{st:.2} random q={mr:.2}±{sr:.2} pruned q={mp:.2} | separation={sep:.1} sigma, beats pruned: {}",
        mt < mp
    );
}

fn greedy_pilot() {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{make_episode, GenConfig};
    use qcopt::rules::{apply, enumerate_transformations, KindFilter};
    let w = QualityWeights::default();
    let gen = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 30 };
    let (mut qf, mut qb, mut qp) = (0.0, 0.0, 0.0);
    let count = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..count {
        let ep = make_episode(&gen, 1_000_000 + i);
        qp += quality(&ep.pruned, &w);
        let mut c = ep.start.clone();
        let mut best = quality(&c, &w);
        for _ in 0..50 {
            let soft = enumerate_transformations(&c, KindFilter::Soft).unwrap();
            if soft.is_empty() { break; }
            let mut cands: Vec<(f64, Circuit)> = soft
                .iter()
                .map(|t| {
                    let n = prune(&apply(&c, t).unwrap());
                    (quality(&n, &w), n)
                })
                .collect();
            let min = cands.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
            let ties: Vec<usize> =
                (0..cands.len()).filter(|&k| cands[k].0 <= min + 1e-12).collect();
            let pick = ties[rng.gen_range(0..ties.len())];
            c = cands.swap_remove(pick).1;
            let q = quality(&c, &w);
            if q < best { best = q; }
        }
        qf += quality(&c, &w);
        qb += best;
    }
    let m = count as f64;
    println!("greedy 50 steps: final={:.2} best={:.2} pruned={:.2}", qf / m, qb / m, qp / m);
}

// Prune variant: also collapse every maximal run of adjacent 1q gates on a
// wire to its canonical (ZRot, PhasedX) form, to a fixpoint with the hard
// rules.
fn canon_prune(c: &Circuit) -> Circuit {
    let mut cur = prune(c);
    loop {
        let gates = cur.gates().to_vec();
        let n = gates.len();
        let mut remove = vec![false; n];
        let mut replace: Vec<(usize, Vec<Gate>)> = Vec::new();
        let mut changed = false;
        for w in 0..cur.num_qubits() {
            let wire: Vec<usize> = (0..n)
                .filter(|&i| match gates[i] {
                    Gate::ZRot { qubit, .. } | Gate::PhasedX { qubit, .. } => qubit == w,
                    Gate::CNot { control, target } => control == w || target == w,
                })
                .collect();
            let mut k = 0;
            while k < wire.len() {
                let mut run = Vec::new();
                while k < wire.len() && !matches!(gates[wire[k]], Gate::CNot { .. }) {
                    run.push(wire[k]);
                    k += 1;
                }
                let already_canonical = run.len() == 2
                    && matches!(gates[run[0]], Gate::ZRot { .. })
                    && matches!(gates[run[1]], Gate::PhasedX { .. });
                if run.len() >= 2 && !already_canonical {
                    let mut u = Array2::<Complex64>::eye(2);
                    for &gi in &run {
                        let m = match gates[gi] {
                            Gate::ZRot { theta, .. } => matrix_1q(&zrot_matrix(theta)),
                            Gate::PhasedX { axis_phase, angle, .. } => {
                                matrix_1q(&phased_x_matrix(axis_phase, angle))
                            }
                            Gate::CNot { .. } => unreachable!(),
                        };
                        u = m.dot(&u);
                    }
                    let form = resynthesize_1q(&u).unwrap();
                    let new_gates = form.gates(w);
                    changed = true;
                    for &gi in &run {
                        remove[gi] = true;
                    }
                    replace.push((run[0], new_gates));
                }
                k += 1;
            }
        }
        if !changed {
            return cur;
        }
        let mut out = Vec::new();
        for i in 0..n {
            if let Some(pos) = replace.iter().position(|(at, _)| *at == i) {
                out.extend(replace[pos].1.iter().copied());
            }
            if !remove[i] {
                out.push(gates[i]);
            }
        }
        cur = prune(&Circuit::new(cur.num_qubits(), out).unwrap());
    }
}

// Weighted expansion: `steps` soft transformations with S6 instances
// weighted `ws6`, no interleaved pruning, canonicalizing prune at the end.
fn expand_weighted(c: &Circuit, steps: usize, seed: u64, ws6: f64) -> Circuit {
    use qcopt::rules::{apply, enumerate_transformations, KindFilter, RuleId};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = c.clone();
    for _ in 0..steps {
        let ts = enumerate_transformations(&cur, KindFilter::Soft).unwrap();
        if ts.is_empty() {
            break;
        }
        let weights: Vec<f64> = ts
            .iter()
            .map(|t| if t.rule == RuleId::S6ReverseCnot { ws6 } else { 1.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut x = rng.gen_range(0.0..total);
        let mut idx = 0;
        for (i, wi) in weights.iter().enumerate() {
            if x < *wi {
                idx = i;
                break;
            }
            x -= wi;
            idx = i;
        }
        cur = apply(&cur, &ts[idx]).unwrap();
    }
    canon_prune(&cur)
}

// Expansion with an S6 weight that ramps linearly from 0 to `base` over the
// first `warmup` steps; plain end prune.
fn expand_ramp(c: &Circuit, steps: usize, seed: u64, base: f64, warmup: usize) -> Circuit {
    expand_ramp_p(c, steps, seed, base, warmup, RAMP_EXP)
}

static RAMP_EXP: f64 = 2.0;

fn expand_ramp_p(c: &Circuit, steps: usize, seed: u64, base: f64, warmup: usize, p: f64) -> Circuit {
    use qcopt::rules::{apply, enumerate_transformations, KindFilter, RuleId};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = c.clone();
    for k in 0..steps {
        let ts = enumerate_transformations(&cur, KindFilter::Soft).unwrap();
        if ts.is_empty() {
            break;
        }
        let w6 = base * ((k as f64 + 1.0) / warmup as f64).min(1.0).powf(p);
        let weights: Vec<f64> = ts
            .iter()
            .map(|t| if t.rule == RuleId::S6ReverseCnot { w6 } else { 1.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut x = rng.gen_range(0.0..total);
        let mut idx = 0;
        for (i, wi) in weights.iter().enumerate() {
            if x < *wi {
                idx = i;
                break;
            }
            x -= wi;
            idx = i;
        }
        cur = apply(&cur, &ts[idx]).unwrap();
    }
    prune(&cur)
}

fn ramp_pilot(base: f64, warmup: usize) {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{random_circuit, GenConfig};
    let w = QualityWeights::default();
    let gen = GenConfig { num_qubits: 12, num_logical_gates: 150, seed: 424242, expansion_steps: 0 };
    let count = 16;
    let (mut d3, mut n3) = (0.0, 0.0);
    for i in 0..count {
        let c = prune(&random_circuit(&GenConfig { seed: derive_seed(gen.seed, i), ..gen }));
        let e = expand_ramp(&c, 500, derive_seed(900, i), base, warmup);
        d3 += e.depth() as f64;
        n3 += e.gate_count() as f64;
    }
    let gen4 = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 0 };
    let (mut qs, mut qp) = (0.0, 0.0);
    for i in 0..32 {
        let c = prune(&random_circuit(&GenConfig { seed: derive_seed(gen4.seed, i), ..gen4 }));
        let e = expand_ramp(&c, 30, derive_seed(901, i), base, warmup);
        qs += quality(&e, &w);
        qp += quality(&c, &w);
    }
    // The SA class (criterion 4): 8q, 60 gates, 100 expansion steps.
    let gen8 = GenConfig { num_qubits: 8, num_logical_gates: 60, seed: 21, expansion_steps: 0 };
    let (mut qs8, mut qp8) = (0.0, 0.0);
    for i in 0..32 {
        let c = prune(&random_circuit(&GenConfig { seed: derive_seed(gen8.seed, i), ..gen8 }));
        let e = expand_ramp(&c, 100, derive_seed(902, i), base, warmup);
        qs8 += quality(&e, &w);
        qp8 += quality(&c, &w);
    }
    println!(
        "base={base:4.1} W={warmup}: 12q d3={:.1} n3={:.1} (want d 161-335, n 330-686) | toy start q={:.2} pruned {:.2} | 8q start q={:.2} pruned {:.2}",
        d3 / count as f64, n3 / count as f64, qs / 32.0, qp / 32.0, qs8 / 32.0, qp8 / 32.0
    );
}

fn beam_ramp_pilot(base: f64, warmup: usize, width: usize, depth: usize) {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{random_circuit, GenConfig};
    use qcopt::rules::{apply, enumerate_transformations, KindFilter};
    let w = QualityWeights::default();
    let gen4 = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 0 };
    let count = 16;
    let (mut qb, mut qp, mut qs) = (0.0, 0.0, 0.0);
    for i in 0..count {
        let seed = derive_seed(gen4.seed, 1_000_000 + i);
        let c = prune(&random_circuit(&GenConfig { seed, ..gen4 }));
        let start = expand_ramp(&c, 30, derive_seed(seed, 1), base, warmup);
        qp += quality(&c, &w);
        qs += quality(&start, &w);
        let mut frontier = vec![start.clone()];
        let mut best = quality(&start, &w);
        for _ in 0..depth {
            let mut next: Vec<(f64, Circuit)> = Vec::new();
            for fc in &frontier {
                for t in enumerate_transformations(fc, KindFilter::Soft).unwrap() {
                    let n = prune(&apply(fc, &t).unwrap());
                    let q = quality(&n, &w);
                    next.push((q, n));
                }
            }
            if next.is_empty() { break; }
            next.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            next.dedup_by(|a, b| a.1 == b.1);
            next.truncate(width);
            best = best.min(next[0].0);
            frontier = next.into_iter().map(|x| x.1).collect();
        }
        qb += best;
        println!("  ep {i}: start {:.2} beam best {best:.2} pruned {:.2}", quality(&start, &w), quality(&c, &w));
    }
    println!(
        "ramp beam base={base} W={warmup} w={width} d={depth}: start={:.2} best={:.2} pruned={:.2}",
        qs / count as f64, qb / count as f64, qp / count as f64
    );
}

fn canon_weighted_pilot(ws6: f64) {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{random_circuit, GenConfig};
    let w = QualityWeights::default();
    let gen = GenConfig { num_qubits: 12, num_logical_gates: 150, seed: 424242, expansion_steps: 0 };
    let count = 16;
    let (mut d3, mut n3) = (0.0, 0.0);
    for i in 0..count {
        let c = canon_prune(&random_circuit(&GenConfig { seed: derive_seed(gen.seed, i), ..gen }));
        let e = expand_weighted(&c, 500, derive_seed(800, i), ws6);
        d3 += e.depth() as f64;
        n3 += e.gate_count() as f64;
    }
    let gen4 = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 0 };
    let (mut qs, mut qp) = (0.0, 0.0);
    for i in 0..32 {
        let c = canon_prune(&random_circuit(&GenConfig { seed: derive_seed(gen4.seed, i), ..gen4 }));
        let e = expand_weighted(&c, 30, derive_seed(801, i), ws6);
        qs += quality(&e, &w);
        qp += quality(&c, &w);
    }
    println!(
        "ws6={ws6:4.1}: 12q d3={:.1} n3={:.1} (windows d 161-335, n 330-686) | 4q toy start q={:.2} pruned q={:.2}",
        d3 / count as f64, n3 / count as f64, qs / 32.0, qp / 32.0
    );
}

fn canon_pilot() {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{make_episode, GenConfig};
    let w = QualityWeights::default();
    // Criterion-3 class with the canonicalizing prune applied at the end of
    // the standard end-prune expansion.
    let gen = GenConfig { num_qubits: 12, num_logical_gates: 150, seed: 424242, expansion_steps: 500 };
    let count = 40;
    let (mut d2, mut n2, mut d3, mut n3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..count {
        let ep = make_episode(&gen, i);
        let p = canon_prune(&ep.pruned);
        let s = canon_prune(&ep.start);
        d2 += p.depth() as f64;
        n2 += p.gate_count() as f64;
        d3 += s.depth() as f64;
        n3 += s.gate_count() as f64;
        if i % 10 == 0 {
            println!("  ep {i}: d3={} n3={} (plain d3={} n3={})", s.depth(), s.gate_count(), ep.start.depth(), ep.start.gate_count());
        }
    }
    let m = count as f64;
    println!(
        "12q canon: d2={:.1} n2={:.1} (windows d 27.9-46.4, n 86.5-144.1) | d3={:.1} n3={:.1} (windows d 161-335, n 330-686)",
        d2 / m, n2 / m, d3 / m, n3 / m
    );
    // Toy class with canonicalizing prune everywhere.
    let gen4 = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 30 };
    let (mut qs, mut qp) = (0.0, 0.0);
    for i in 0..32 {
        let ep = make_episode(&gen4, i);
        qs += quality(&canon_prune(&ep.start), &w);
        qp += quality(&canon_prune(&ep.pruned), &w);
    }
    println!("4q canon toy: start q={:.2} pruned q={:.2}", qs / 32.0, qp / 32.0);
}

fn beam_canon_pilot(width: usize, depth: usize) {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{make_episode, GenConfig};
    use qcopt::rules::{apply, enumerate_transformations, KindFilter};
    let w = QualityWeights::default();
    let gen = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 30 };
    let count = 16;
    let (mut qb, mut qp, mut qf) = (0.0, 0.0, 0.0);
    for i in 0..count {
        let ep = make_episode(&gen, 1_000_000 + i);
        let start = canon_prune(&ep.start);
        let pruned = canon_prune(&ep.pruned);
        qp += quality(&pruned, &w);
        let mut frontier = vec![start.clone()];
        let mut best = quality(&start, &w);
        for _ in 0..depth {
            let mut next: Vec<(f64, Circuit)> = Vec::new();
            for c in &frontier {
                for t in enumerate_transformations(c, KindFilter::Soft).unwrap() {
                    let nc = canon_prune(&apply(c, &t).unwrap());
                    next.push((quality(&nc, &w), nc));
                }
            }
            if next.is_empty() { break; }
            next.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            next.dedup_by(|a, b| a.1 == b.1);
            next.truncate(width);
            best = best.min(next[0].0);
            frontier = next.into_iter().map(|x| x.1).collect();
        }
        qb += best;
        qf += quality(&frontier.first().unwrap_or(&start), &w).min(best);
        println!("  ep {i}: start {:.2} beam best {best:.2} vs pruned {:.2}", quality(&start, &w), quality(&pruned, &w));
    }
    println!("canon beam w={width} d={depth}: mean best={:.2} pruned={:.2}", qb / count as f64, qp / count as f64);
}

fn pstep_pilot() {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{random_circuit, GenConfig};
    use qcopt::rules::{apply, enumerate_transformations, KindFilter, RuleId};
    let w = QualityWeights::default();
    // Per-step-pruned expansion with an S6 weight multiplier: each S6
    // instance counts `ws6` times in the sampling weights.
    let expand_ps = |c: &Circuit, steps: usize, seed: u64, ws6: f64| -> Circuit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cur = c.clone();
        for _ in 0..steps {
            let ts = enumerate_transformations(&cur, KindFilter::Soft).unwrap();
            if ts.is_empty() {
                break;
            }
            let weights: Vec<f64> = ts
                .iter()
                .map(|t| if t.rule == RuleId::S6ReverseCnot { ws6 } else { 1.0 })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut x = rng.gen_range(0.0..total);
            let mut idx = 0;
            for (i, wi) in weights.iter().enumerate() {
                if x < *wi {
                    idx = i;
                    break;
                }
                x -= wi;
                idx = i;
            }
            cur = prune(&apply(&cur, &ts[idx]).unwrap());
        }
        cur
    };
    for ws6 in [1.0, 3.0, 8.0, 20.0] {
        let gen = GenConfig { num_qubits: 12, num_logical_gates: 150, seed: 424242, expansion_steps: 0 };
        let count = 12;
        let (mut d3, mut n3) = (0.0, 0.0);
        for i in 0..count {
            let c = prune(&random_circuit(&GenConfig { seed: derive_seed(gen.seed, i), ..gen }));
            let e = expand_ps(&c, 500, derive_seed(700, i), ws6);
            d3 += e.depth() as f64;
            n3 += e.gates().len() as f64;
        }
        let gen4 = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 0 };
        let (mut qs, mut qp) = (0.0, 0.0);
        for i in 0..32 {
            let c = prune(&random_circuit(&GenConfig { seed: derive_seed(gen4.seed, i), ..gen4 }));
            let e = expand_ps(&c, 30, derive_seed(701, i), ws6);
            qs += quality(&e, &w);
            qp += quality(&c, &w);
        }
        println!(
            "ws6={ws6:5.1}: 12q d3={:.1} n3={:.1} (windows d 161-335, n 330-686) | 4q toy start q={:.2} pruned q={:.2}",
            d3 / count as f64, n3 / count as f64, qs / 32.0, qp / 32.0
        );
    }
}

fn rulefirst_pilot() {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{random_circuit, GenConfig};
    use qcopt::rules::{apply, enumerate_transformations, KindFilter, RuleId};
    let w = QualityWeights::default();
    // Expansion variant: pick a soft RULE uniformly among those with >=1
    // instance, then a uniform instance of it; prune once at the end.
    let expand_rf = |c: &Circuit, steps: usize, seed: u64| -> Circuit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cur = c.clone();
        for _ in 0..steps {
            let ts = enumerate_transformations(&cur, KindFilter::Soft).unwrap();
            if ts.is_empty() {
                break;
            }
            let mut rules: Vec<RuleId> = ts.iter().map(|t| t.rule).collect();
            rules.sort();
            rules.dedup();
            let r = rules[rng.gen_range(0..rules.len())];
            let of_r: Vec<_> = ts.iter().filter(|t| t.rule == r).collect();
            let t = of_r[rng.gen_range(0..of_r.len())];
            cur = apply(&cur, t).unwrap();
        }
        prune(&cur)
    };

    // S6 instance share during plain expansion, both scales.
    for (nq, ng, steps) in [(4usize, 20usize, 30usize), (12, 150, 500)] {
        let gen = GenConfig { num_qubits: nq, num_logical_gates: ng, seed: 31, expansion_steps: 0 };
        let c = prune(&random_circuit(&GenConfig { seed: derive_seed(gen.seed, 0), ..gen }));
        let mut cur = c.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut s6, mut tot) = (0usize, 0usize);
        for _ in 0..steps {
            let ts = enumerate_transformations(&cur, KindFilter::Soft).unwrap();
            if ts.is_empty() { break; }
            s6 += ts.iter().filter(|t| t.rule == RuleId::S6ReverseCnot).count();
            tot += ts.len();
            let t = &ts[rng.gen_range(0..ts.len())];
            cur = apply(&cur, t).unwrap();
        }
        println!("{nq}q: S6 share of enumeration during expansion = {:.3}", s6 as f64 / tot as f64);
    }

    // Rule-first anchors at 12q (criterion 3 windows: d3 in [161.2,334.8], n3 in [330.2,685.8]).
    let gen = GenConfig { num_qubits: 12, num_logical_gates: 150, seed: 424242, expansion_steps: 0 };
    let count = 60;
    let (mut d3, mut n3) = (0.0, 0.0);
    for i in 0..count {
        let c = prune(&random_circuit(&GenConfig { seed: derive_seed(gen.seed, i), ..gen }));
        let e = expand_rf(&c, 500, derive_seed(555, i));
        d3 += e.depth() as f64;
        n3 += e.gates().len() as f64;
    }
    println!("12q rule-first: d3={:.1} n3={:.1}", d3 / count as f64, n3 / count as f64);

    // Rule-first toy class: start q vs pruned q.
    let gen = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 0 };
    let (mut qs, mut qp) = (0.0, 0.0);
    for i in 0..64 {
        let c = prune(&random_circuit(&GenConfig { seed: derive_seed(gen.seed, i), ..gen }));
        let e = expand_rf(&c, 30, derive_seed(556, i));
        qs += quality(&e, &w);
        qp += quality(&c, &w);
    }
    println!("4q rule-first toy: start q={:.2} pruned q={:.2}", qs / 64.0, qp / 64.0);
}

fn beam_pilot(width: usize, depth: usize) {
    use qcopt::cost::{quality, QualityWeights};
    use qcopt::datagen::{make_episode, GenConfig};
    use qcopt::rules::{apply, enumerate_transformations, KindFilter};
    let w = QualityWeights::default();
    let gen = GenConfig { num_qubits: 4, num_logical_gates: 20, seed: 31, expansion_steps: 30 };
    let count = 16;
    let (mut qb, mut qp) = (0.0, 0.0);
    for i in 0..count {
        let ep = make_episode(&gen, 1_000_000 + i);
        qp += quality(&ep.pruned, &w);
        let mut frontier = vec![ep.start.clone()];
        let mut best = quality(&ep.start, &w);
        for _ in 0..depth {
            let mut next: Vec<(f64, Circuit)> = Vec::new();
            for c in &frontier {
                for t in enumerate_transformations(c, KindFilter::Soft).unwrap() {
                    let n = prune(&apply(c, &t).unwrap());
                    let q = quality(&n, &w);
                    next.push((q, n));
                }
            }
            if next.is_empty() { break; }
            next.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            next.dedup_by(|a, b| a.1 == b.1);
            next.truncate(width);
            best = best.min(next[0].0);
            frontier = next.into_iter().map(|x| x.1).collect();
        }
        qb += best;
        println!("  ep {i}: beam best {best:.2} vs pruned {:.2}", quality(&ep.pruned, &w));
    }
    println!("beam w={width} d={depth}: mean best={:.2} pruned={:.2}", qb / count as f64, qp / count as f64);
}

fn main() {
    if std::env::args().nth(1).as_deref() == Some("beamramp") {
        let a: Vec<String> = std::env::args().collect();
        beam_ramp_pilot(a[2].parse().unwrap(), a[3].parse().unwrap(), a[4].parse().unwrap(), a[5].parse().unwrap());
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("ramp") {
        let base: f64 = std::env::args().nth(2).unwrap().parse().unwrap();
        let warmup: usize = std::env::args().nth(3).unwrap().parse().unwrap();
        ramp_pilot(base, warmup);
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("canonw") {
        for a in std::env::args().skip(2) {
            canon_weighted_pilot(a.parse().unwrap());
        }
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("canon") {
        canon_pilot();
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("beamcanon") {
        let width = std::env::args().nth(2).and_then(|x| x.parse().ok()).unwrap_or(32);
        let depth = std::env::args().nth(3).and_then(|x| x.parse().ok()).unwrap_or(50);
        beam_canon_pilot(width, depth);
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("pstep") {
        pstep_pilot();
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("rulefirst") {
        rulefirst_pilot();
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("beam") {
        let width = std::env::args().nth(2).and_then(|x| x.parse().ok()).unwrap_or(32);
        let depth = std::env::args().nth(3).and_then(|x| x.parse().ok()).unwrap_or(50);
        beam_pilot(width, depth);
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("greedy") {
        greedy_pilot();
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("rl") {
        let arg = |i: usize, d: f64| -> f64 {
            std::env::args().nth(i).and_then(|x| x.parse().ok()).unwrap_or(d)
        };
        rl_pilot(
            arg(2, 200.0) as usize,
            arg(3, 3.0) as usize,
            arg(4, 8.0) as usize,
            arg(5, 0.0),
            arg(6, 2.0) as usize,
            arg(7, 1e-3),
        );
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("sascan") {
        let steps = std::env::args().nth(2).and_then(|x| x.parse().ok()).unwrap_or(20000);
        sa_scan(steps);
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("sa") {
        let count = std::env::args().nth(2).and_then(|x| x.parse().ok()).unwrap_or(5);
        let steps = std::env::args().nth(3).and_then(|x| x.parse().ok()).unwrap_or(20000);
        sa_pilot(count, steps);
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("aux") {
        aux();
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("anchors") {
        anchors();
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("trace") {
        trace(&Dist { p_cnot: 0.85, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 0.0, flip: true, restart: 1.0 });
        return;
    }
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(25);
    let configs: Vec<(&str, Dist)> = vec![
        ("p=0.9 k=0.9", Dist { p_cnot: 0.9, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 0.9, flip: true, restart: 1.0 }),
        ("p=0.9 k=1.0", Dist { p_cnot: 0.9, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 1.0, flip: true, restart: 1.0 }),
        ("p=0.9 k=1.1", Dist { p_cnot: 0.9, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 1.1, flip: true, restart: 1.0 }),
        ("p=0.95 k=0.8", Dist { p_cnot: 0.95, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 0.8, flip: true, restart: 1.0 }),
        ("p=0.95 k=0.9", Dist { p_cnot: 0.95, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 0.9, flip: true, restart: 1.0 }),
        ("p=0.95 k=1.0", Dist { p_cnot: 0.95, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 1.0, flip: true, restart: 1.0 }),
        ("p=0.95 k=1.1", Dist { p_cnot: 0.95, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 1.1, flip: true, restart: 1.0 }),
        ("p=1.0 k=0.9", Dist { p_cnot: 1.0, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 0.9, flip: true, restart: 1.0 }),
        ("p=1.0 k=1.0", Dist { p_cnot: 1.0, w: [0.5, 0.5, 0.0, 0.0, 0.0], k: 1.0, flip: true, restart: 1.0 }),
    ];
    println!("targets: n1 119-199 d1 36-60 | d2 27.9-46.4 n2 86.5-144.1 | d3 161-335 n3 330-686");
    for (name, dist) in &configs {
        let (mut n1, mut d1, mut n2, mut d2, mut n3, mut d3) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for s in 0..seeds {
            let raw = gen(derive_seed(1234, s), dist);
            n1 += raw.gate_count() as f64;
            d1 += raw.depth() as f64;
            let p = prune(&raw);
            n2 += p.gate_count() as f64;
            d2 += p.depth() as f64;
            let e = expand(&p, 500, derive_seed(5678, s)).circuit;
            n3 += e.gate_count() as f64;
            d3 += e.depth() as f64;
        }
        let m = seeds as f64;
        println!(
            "{name}: n1={:.1} d1={:.1} | d2={:.1} n2={:.1} | d3={:.1} n3={:.1}",
            n1 / m, d1 / m, d2 / m, n2 / m, d3 / m, n3 / m
        );
    }
}
