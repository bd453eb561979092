//! Command-line front end: circuit generation, pruning, expansion,
//! annealing, training, policy optimization, verification, QAOA
//! compilation, statistics and diagram rendering. Every run emits a
//! manifest with config, seeds, file digests and per-stage metrics.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use qcopt::circuit::{Circuit, Gate};
use qcopt::cost::{quality, QualityWeights};
use qcopt::datagen::{derive_seed, expand, make_episode, random_circuit, GenConfig};
use qcopt::error::Error;
use qcopt::nn::{NetConfig, PolicyValueNet};
use qcopt::ppo::{optimize, train_with_progress, OptimizeConfig, PpoConfig, TrainConfig};
use qcopt::qaoa::{compile_maxcut, permuted_reference, Graph, QaoaParams};
use qcopt::rules::{apply, find_transformation, prune, verify_local, AppliedStep};
use qcopt::sa::{anneal, tune_acceptance, AnnealConfig};
use qcopt::unitary::{equivalent_up_to_phase, unitary_of, DEFAULT_QUBIT_CAP};

const EXIT_FAILURE: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EXIT_VERIFICATION: i32 = 3;
const EXIT_CAPACITY: i32 = 4;

#[derive(Parser)]
#[command(name = "qcopt", about = "Hardware-aware quantum circuit optimizer", version)]
struct Cli {
    /// Worker count for batch subcommands (default: QCOPT_JOBS or 1).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random circuits (optionally pruned and expanded).
    Generate(GenerateArgs),
    /// Exhaustively apply the hard rules to a circuit or a directory.
    Prune(PruneArgs),
    /// Apply random soft transformations to a circuit, then prune.
    Expand(ExpandArgs),
    /// Optimize a circuit by simulated annealing.
    Anneal(AnnealArgs),
    /// Train a policy/value network on the random-circuit stream.
    Train(TrainArgs),
    /// Optimize a circuit with a trained network.
    Optimize(OptimizeArgs),
    /// Replay a transformation log and check every step.
    Verify(VerifyArgs),
    /// Compile a MaxCut QAOA circuit for a graph.
    CompileQaoa(CompileQaoaArgs),
    /// Aggregate depth/gate-count/quality statistics over a directory.
    Stats(StatsArgs),
    /// Render a circuit as a monospaced diagram.
    Render(RenderArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 12)]
    qubits: usize,
    /// Logical gates before decomposition.
    #[arg(long, default_value_t = 150)]
    gates: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Random-expansion steps applied after pruning (0 = raw circuits).
    #[arg(long, default_value_t = 0)]
    expand_steps: usize,
    /// Prune each circuit before writing it.
    #[arg(long)]
    prune: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PruneArgs {
    /// Single input circuit (JSON).
    #[arg(long, conflicts_with = "dir", required_unless_present = "dir")]
    input: Option<PathBuf>,
    /// Directory of input circuits.
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Output file (with --input) or directory (with --dir).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the applied-transformation log here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct AnnealArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 20000)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    t_start: f64,
    #[arg(long, default_value_t = 0.05)]
    t_end: f64,
    /// Rescale the temperature range until pilot-run acceptance lies in
    /// [0.10, 0.25].
    #[arg(long)]
    tune: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    episodes: usize,
    #[arg(long, default_value_t = 50)]
    episode_len: usize,
    #[arg(long, default_value_t = 12)]
    qubits: usize,
    #[arg(long, default_value_t = 150)]
    gates: usize,
    #[arg(long, default_value_t = 500)]
    expand_steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 4)]
    layers: usize,
    #[arg(long, default_value_t = 32)]
    channels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trained-network output file.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch learning-curve CSV.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Trained network file.
    #[arg(long)]
    net: PathBuf,
    #[arg(long, default_value_t = 1)]
    attempts: usize,
    #[arg(long, default_value_t = 50)]
    episode_len: usize,
    /// Always take the highest-probability action.
    #[arg(long)]
    greedy: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Transformation log produced by expand/anneal/optimize.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct CompileQaoaArgs {
    /// Edge-list file: one "u v" pair per line, '#' comments allowed.
    #[arg(long)]
    graph: PathBuf,
    /// Per-cycle gamma angles (repeat per cycle).
    #[arg(long, required = true, num_args = 1.., action = clap::ArgAction::Append)]
    gamma: Vec<f64>,
    /// Per-cycle beta angles (must match --gamma in count).
    #[arg(long, required = true, num_args = 1.., action = clap::ArgAction::Append)]
    beta: Vec<f64>,
    /// Chain length (default: the graph's node count).
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory of circuit JSON files.
    #[arg(long)]
    dir: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    input: PathBuf,
}

// --- manifest plumbing ------------------------------------------------------

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct StageMetrics {
    stage: String,
    depth: usize,
    gate_count: usize,
    quality: f64,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    stages: Vec<StageMetrics>,
    wall_time_secs: f64,
}

struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
}

impl ManifestBuilder {
    fn new(subcommand: &str, config: serde_json::Value) -> Self {
        ManifestBuilder {
            manifest: RunManifest {
                subcommand: subcommand.into(),
                config,
                seeds: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                stages: Vec::new(),
                wall_time_secs: 0.0,
            },
            started: Instant::now(),
        }
    }

    fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    fn input(&mut self, path: &Path) -> Result<(), Error> {
        self.manifest.inputs.push(digest(path)?);
        Ok(())
    }

    fn output(&mut self, path: &Path) -> Result<(), Error> {
        self.manifest.outputs.push(digest(path)?);
        Ok(())
    }

    fn stage(&mut self, name: &str, circuit: &Circuit) {
        let w = QualityWeights::default();
        self.manifest.stages.push(StageMetrics {
            stage: name.into(),
            depth: circuit.depth(),
            gate_count: circuit.gate_count(),
            quality: quality(circuit, &w),
        });
    }

    /// Write the manifest next to `anchor`: `<anchor>.manifest.json` for a
    /// file, `<anchor>/manifest.json` for a directory.
    fn write(mut self, anchor: &Path) -> Result<(), Error> {
        self.manifest.wall_time_secs = self.started.elapsed().as_secs_f64();
        let path = if anchor.is_dir() {
            anchor.join("manifest.json")
        } else {
            let mut name = anchor.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            anchor.with_file_name(name)
        };
        let json = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

fn digest(path: &Path) -> Result<FileDigest, Error> {
    let bytes = std::fs::read(path)?;
    let hash = Sha256::digest(&bytes);
    let sha256 = hash.iter().map(|b| format!("{b:02x}")).collect();
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256,
    })
}

fn read_circuit(path: &Path) -> Result<Circuit, Error> {
    let text = std::fs::read_to_string(path)?;
    Circuit::from_json(&text)
}

fn write_circuit(path: &Path, circuit: &Circuit) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, circuit.to_json())?;
    Ok(())
}

// --- transformation logs ----------------------------------------------------

#[derive(Serialize, serde::Deserialize)]
struct TransformationLog {
    start: serde_json::Value,
    /// Whether the producer pruned after every step (annealing and episode
    /// rollouts do, expansion does not); replay must follow suit so loci of
    /// later steps resolve against the same intermediate circuits.
    prune_each_step: bool,
    episodes: Vec<Vec<AppliedStep>>,
}

impl TransformationLog {
    fn new(
        start: &Circuit,
        prune_each_step: bool,
        episodes: Vec<Vec<AppliedStep>>,
    ) -> Result<Self, Error> {
        Ok(TransformationLog {
            start: serde_json::from_str(&start.to_json())
                .map_err(|e| Error::Format(e.to_string()))?,
            prune_each_step,
            episodes,
        })
    }

    fn start_circuit(&self) -> Result<Circuit, Error> {
        Circuit::from_json(&self.start.to_string())
    }

    fn write(&self, path: &Path) -> Result<(), Error> {
        let json =
            serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

// --- subcommands ------------------------------------------------------------

fn jobs_or_default(flag: Option<usize>) -> Result<usize, Error> {
    let jobs = match flag {
        Some(j) => j,
        None => std::env::var("QCOPT_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(1),
    };
    if jobs == 0 {
        return Err(Error::InvalidValue {
            what: "jobs",
            details: "must be at least 1".into(),
        });
    }
    Ok(jobs)
}

fn run_generate(args: &GenerateArgs) -> Result<(), Error> {
    let config = serde_json::json!({
        "qubits": args.qubits, "gates": args.gates, "count": args.count,
        "expand_steps": args.expand_steps, "prune": args.prune, "seed": args.seed,
    });
    let mut manifest = ManifestBuilder::new("generate", config);
    manifest.seed(args.seed);
    std::fs::create_dir_all(&args.out)?;
    let gen = GenConfig {
        num_qubits: args.qubits,
        num_logical_gates: args.gates,
        seed: args.seed,
        expansion_steps: args.expand_steps,
    };
    for index in 0..args.count {
        let circuit = if args.expand_steps > 0 {
            make_episode(&gen, index).start
        } else {
            let seed = derive_seed(args.seed, index as u64);
            let raw = random_circuit(&GenConfig { seed, ..gen });
            if args.prune {
                prune(&raw)
            } else {
                raw
            }
        };
        let path = args.out.join(format!("circuit_{index:04}.json"));
        write_circuit(&path, &circuit)?;
        manifest.output(&path)?;
        if index == 0 {
            manifest.stage("first_output", &circuit);
        }
    }
    manifest.write(&args.out)
}

fn run_prune(args: &PruneArgs) -> Result<(), Error> {
    let config = serde_json::json!({
        "input": args.input.as_ref().map(|p| p.display().to_string()),
        "dir": args.dir.as_ref().map(|p| p.display().to_string()),
    });
    let mut manifest = ManifestBuilder::new("prune", config);
    if let Some(input) = &args.input {
        let circuit = read_circuit(input)?;
        manifest.input(input)?;
        manifest.stage("input", &circuit);
        let pruned = prune(&circuit);
        manifest.stage("output", &pruned);
        write_circuit(&args.out, &pruned)?;
        manifest.output(&args.out)?;
        manifest.write(&args.out)
    } else {
        let dir = args.dir.as_ref().unwrap();
        std::fs::create_dir_all(&args.out)?;
        for path in circuit_files(dir)? {
            let circuit = read_circuit(&path)?;
            manifest.input(&path)?;
            let pruned = prune(&circuit);
            let out = args.out.join(path.file_name().unwrap());
            write_circuit(&out, &pruned)?;
            manifest.output(&out)?;
        }
        manifest.write(&args.out)
    }
}

fn run_expand(args: &ExpandArgs) -> Result<(), Error> {
    let config = serde_json::json!({
        "input": args.input.display().to_string(), "steps": args.steps, "seed": args.seed,
    });
    let mut manifest = ManifestBuilder::new("expand", config);
    manifest.seed(args.seed);
    let circuit = read_circuit(&args.input)?;
    manifest.input(&args.input)?;
    manifest.stage("input", &circuit);
    let outcome = expand(&circuit, args.steps, args.seed);
    manifest.stage("output", &outcome.circuit);
    write_circuit(&args.out, &outcome.circuit)?;
    manifest.output(&args.out)?;
    if let Some(log_path) = &args.log {
        TransformationLog::new(&circuit, false, vec![outcome.applied])?.write(log_path)?;
        manifest.output(log_path)?;
    }
    manifest.write(&args.out)
}

fn run_anneal(args: &AnnealArgs) -> Result<(), Error> {
    let config = serde_json::json!({
        "input": args.input.display().to_string(), "steps": args.steps,
        "t_start": args.t_start, "t_end": args.t_end, "tune": args.tune,
        "seed": args.seed,
    });
    let mut manifest = ManifestBuilder::new("anneal", config);
    manifest.seed(args.seed);
    let circuit = read_circuit(&args.input)?;
    manifest.input(&args.input)?;
    manifest.stage("input", &circuit);
    let start = prune(&circuit);
    manifest.stage("pruned", &start);

    let w = QualityWeights::default();
    let mut cfg = AnnealConfig::new(args.steps, args.t_start, args.t_end, args.seed)?;
    if args.tune {
        // The tuner wants a pilot population; reuse the input circuit with
        // per-pilot seeds.
        let samples = vec![start.clone(); 10];
        cfg = tune_acceptance(&cfg, &samples, &w)?;
        eprintln!(
            "tuned temperature range: [{:.6}, {:.6}]",
            cfg.t_end, cfg.t_start
        );
    }
    let outcome = anneal(&start, &cfg, &w)?;
    eprintln!(
        "best q = {:.3}, acceptance fraction = {:.3}",
        outcome.best_quality, outcome.accepted_fraction
    );
    manifest.stage("best", &outcome.best);
    write_circuit(&args.out, &outcome.best)?;
    manifest.output(&args.out)?;
    if let Some(log_path) = &args.log {
        TransformationLog::new(&start, true, vec![outcome.applied])?.write(log_path)?;
        manifest.output(log_path)?;
    }
    manifest.write(&args.out)
}

fn run_train(args: &TrainArgs) -> Result<(), Error> {
    let cfg = TrainConfig {
        epochs: args.epochs,
        episodes_per_epoch: args.episodes,
        episode_len: args.episode_len,
        inner_epochs: 2,
        lr: args.lr,
        seed: args.seed,
        ppo: PpoConfig::default(),
        net: NetConfig {
            trunk_layers: args.layers,
            channels: args.channels,
            ..NetConfig::default()
        },
        gen: GenConfig {
            num_qubits: args.qubits,
            num_logical_gates: args.gates,
            seed: args.seed,
            expansion_steps: args.expand_steps,
        },
        weights: QualityWeights::default(),
    };
    let config = serde_json::to_value(&cfg).map_err(|e| Error::Format(e.to_string()))?;
    let mut manifest = ManifestBuilder::new("train", config);
    manifest.seed(args.seed);

    let outcome = train_with_progress(&cfg, |stats| {
        eprintln!(
            "epoch {:4}: mean d = {:7.2}, mean n = {:8.2}, mean q = {:8.3}, mean return = {:8.3}",
            stats.epoch, stats.mean_depth, stats.mean_gate_count, stats.mean_quality,
            stats.mean_return
        );
    })?;
    outcome.net.save(&args.out)?;
    manifest.output(&args.out)?;
    if let Some(curves) = &args.curves {
        let mut text = String::from("epoch,mean_depth,mean_gate_count,mean_quality,mean_return\n");
        for s in &outcome.curves {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                s.epoch, s.mean_depth, s.mean_gate_count, s.mean_quality, s.mean_return
            ));
        }
        std::fs::write(curves, text)?;
        manifest.output(curves)?;
    }
    manifest.write(&args.out)
}

fn run_optimize(args: &OptimizeArgs) -> Result<(), Error> {
    let config = serde_json::json!({
        "input": args.input.display().to_string(), "net": args.net.display().to_string(),
        "attempts": args.attempts, "episode_len": args.episode_len,
        "greedy": args.greedy, "seed": args.seed,
    });
    let mut manifest = ManifestBuilder::new("optimize", config);
    manifest.seed(args.seed);
    let circuit = read_circuit(&args.input)?;
    manifest.input(&args.input)?;
    manifest.input(&args.net)?;
    manifest.stage("input", &circuit);
    let start = prune(&circuit);
    manifest.stage("pruned", &start);
    let net = PolicyValueNet::load(&args.net)?;
    let w = QualityWeights::default();
    let outcome = optimize(
        &net,
        &circuit,
        &OptimizeConfig {
            attempts: args.attempts,
            episode_len: args.episode_len,
            greedy: args.greedy,
            seed: args.seed,
        },
        &w,
    )?;
    eprintln!("best q = {:.3}", outcome.best_quality);
    manifest.stage("best", &outcome.best);
    write_circuit(&args.out, &outcome.best)?;
    manifest.output(&args.out)?;
    if let Some(log_path) = &args.log {
        TransformationLog::new(&start, true, outcome.episodes)?.write(log_path)?;
        manifest.output(log_path)?;
    }
    manifest.write(&args.out)
}

/// Replay a log: every step must re-enumerate, pass the local-window unitary
/// check, and (when the circuit is small enough) keep the full unitary
/// phase-equivalent to the start.
fn run_verify(args: &VerifyArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.log)?;
    let log: TransformationLog =
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    let start = log.start_circuit()?;
    let full_check = start.num_qubits() <= DEFAULT_QUBIT_CAP;
    let start_unitary = if full_check {
        Some(unitary_of(&start, DEFAULT_QUBIT_CAP)?)
    } else {
        None
    };

    let mut steps_checked = 0usize;
    let mut violations = 0usize;
    for (e, episode) in log.episodes.iter().enumerate() {
        let mut current = start.clone();
        for (i, step) in episode.iter().enumerate() {
            match find_transformation(&current, step) {
                Ok(t) => {
                    if !verify_local(&current, &t)? {
                        eprintln!("episode {e} step {i}: local unitary mismatch");
                        violations += 1;
                    }
                    current = apply(&current, &t)?;
                    if log.prune_each_step {
                        current = prune(&current);
                    }
                }
                Err(_) => {
                    eprintln!(
                        "episode {e} step {i}: {} at (moment {}, qubit {}) not applicable",
                        step.rule.name(),
                        step.moment,
                        step.qubit
                    );
                    violations += 1;
                    break;
                }
            }
            steps_checked += 1;
        }
        if let Some(u0) = &start_unitary {
            let u1 = unitary_of(&current, DEFAULT_QUBIT_CAP)?;
            if !equivalent_up_to_phase(u0, &u1, args.tol) {
                eprintln!("episode {e}: final unitary differs from the start circuit");
                violations += 1;
            }
        }
    }
    println!(
        "{}",
        serde_json::json!({
            "episodes": log.episodes.len(),
            "steps_checked": steps_checked,
            "violations": violations,
            "full_unitary_checked": full_check,
        })
    );
    if violations > 0 {
        eprintln!(
            "{}",
            serde_json::json!({"error": format!("{violations} verification violations"),
                               "exit_code": EXIT_VERIFICATION})
        );
        std::process::exit(EXIT_VERIFICATION);
    }
    Ok(())
}

fn run_compile_qaoa(args: &CompileQaoaArgs) -> Result<(), Error> {
    if args.gamma.len() != args.beta.len() {
        return Err(Error::InvalidValue {
            what: "qaoa params",
            details: format!(
                "{} gamma values but {} beta values",
                args.gamma.len(),
                args.beta.len()
            ),
        });
    }
    let config = serde_json::json!({
        "graph": args.graph.display().to_string(),
        "gamma": args.gamma, "beta": args.beta, "qubits": args.qubits,
    });
    let mut manifest = ManifestBuilder::new("compile-qaoa", config);
    let text = std::fs::read_to_string(&args.graph)?;
    let graph = Graph::parse_edge_list(&text)?;
    manifest.input(&args.graph)?;
    let params = QaoaParams::new(
        args.gamma
            .iter()
            .zip(&args.beta)
            .map(|(&g, &b)| (g, b))
            .collect(),
    )?;
    for (cycle, name, value) in params.non_generic_angles() {
        eprintln!(
            "warning: cycle {cycle} {name} = {value} is near a multiple of pi; \
             compiled sizes are not representative"
        );
    }
    let num_qubits = args.qubits.unwrap_or_else(|| graph.num_nodes());
    let compiled = compile_maxcut(&graph, &params, num_qubits)?;
    manifest.stage("compiled", &compiled.circuit);
    write_circuit(&args.out, &compiled.circuit)?;
    manifest.output(&args.out)?;
    println!(
        "{}",
        serde_json::json!({
            "depth": compiled.circuit.depth(),
            "gate_count": compiled.circuit.gate_count(),
            "permutation": compiled.permutation,
        })
    );
    if num_qubits <= DEFAULT_QUBIT_CAP {
        let u = unitary_of(&compiled.circuit, DEFAULT_QUBIT_CAP)?;
        let reference = permuted_reference(&graph, &params, &compiled.permutation)?;
        if !equivalent_up_to_phase(&u, &reference, 1e-8) {
            eprintln!(
                "{}",
                serde_json::json!({"error": "compiled circuit disagrees with the reference unitary",
                                   "exit_code": EXIT_VERIFICATION})
            );
            std::process::exit(EXIT_VERIFICATION);
        }
    }
    manifest.write(&args.out)
}

fn circuit_files(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && !p
                    .file_name()
                    .is_some_and(|n| n.to_string_lossy().contains("manifest"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_stats(args: &StatsArgs) -> Result<(), Error> {
    let files = circuit_files(&args.dir)?;
    if files.is_empty() {
        return Err(Error::InvalidValue {
            what: "stats directory",
            details: format!("no circuit files in {}", args.dir.display()),
        });
    }
    let w = QualityWeights::default();
    let mut depths = Vec::new();
    let mut counts = Vec::new();
    let mut qualities = Vec::new();
    for path in &files {
        let c = read_circuit(path)?;
        depths.push(c.depth() as f64);
        counts.push(c.gate_count() as f64);
        qualities.push(quality(&c, &w));
    }
    let (dm, ds) = mean_stderr(&depths);
    let (nm, ns) = mean_stderr(&counts);
    let (qm, qs) = mean_stderr(&qualities);
    println!(
        "{}",
        serde_json::json!({
            "count": files.len(),
            "depth": {"mean": dm, "stderr": ds},
            "gate_count": {"mean": nm, "stderr": ns},
            "quality": {"mean": qm, "stderr": qs},
        })
    );
    Ok(())
}

/// Monospaced diagram: one line per qubit, one three-character column per
/// moment. `@` marks a CNOT control, `+` its target, `Z`/`X` the rotations.
fn render(circuit: &Circuit) -> String {
    let depth = circuit.depth();
    let schedule = circuit.schedule_asap();
    let mut cells = vec![vec!["---".to_string(); depth]; circuit.num_qubits()];
    for (i, gate) in circuit.gates().iter().enumerate() {
        let m = schedule.moment_of[i];
        match *gate {
            Gate::ZRot { qubit, .. } => cells[qubit][m] = "-Z-".into(),
            Gate::PhasedX { qubit, .. } => cells[qubit][m] = "-X-".into(),
            Gate::CNot { control, target } => {
                cells[control][m] = "-@-".into();
                cells[target][m] = "-+-".into();
            }
        }
    }
    let mut out = String::new();
    for (q, row) in cells.iter().enumerate() {
        out.push_str(&format!("q{q:02}: "));
        for cell in row {
            out.push_str(cell);
        }
        out.push('\n');
    }
    out
}

fn run_render(args: &RenderArgs) -> Result<(), Error> {
    let circuit = read_circuit(&args.input)?;
    print!("{}", render(&circuit));
    let w = QualityWeights::default();
    println!(
        "d = {}, n = {}, q = {:.2}",
        circuit.depth(),
        circuit.gate_count(),
        quality(&circuit, &w)
    );
    Ok(())
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::CapacityExceeded { .. }
        | Error::QubitCapExceeded { .. }
        | Error::TooManyNodes { .. } => EXIT_CAPACITY,
        Error::InvalidValue { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = jobs_or_default(cli.jobs).and_then(|_jobs| match &cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Prune(args) => run_prune(args),
        Command::Expand(args) => run_expand(args),
        Command::Anneal(args) => run_anneal(args),
        Command::Train(args) => run_train(args),
        Command::Optimize(args) => run_optimize(args),
        Command::Verify(args) => run_verify(args),
        Command::CompileQaoa(args) => run_compile_qaoa(args),
        Command::Stats(args) => run_stats(args),
        Command::Render(args) => run_render(args),
    });
    if let Err(err) = result {
        eprintln!(
            "{}",
            serde_json::json!({"error": err.to_string(), "exit_code": exit_code(&err)})
        );
        std::process::exit(exit_code(&err));
    }
}
