//! MaxCut QAOA workload compiler: cycles of ZZ interactions and X-rotation
//! layers, routed onto the 1D chain with a linear swap network, plus a dense
//! reference unitary acting as the compilation oracle.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::rules::prune;
use crate::unitary::{Unitary, DEFAULT_QUBIT_CAP};

/// Undirected, non-weighted graph with validated edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    num_nodes: usize,
    /// Normalized to (low, high), sorted, deduplicated at construction.
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut norm = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(Error::InvalidValue {
                    what: "graph edge",
                    details: format!("self-loop at node {u}"),
                });
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidValue {
                    what: "graph edge",
                    details: format!("edge ({u}, {v}) out of range for {num_nodes} nodes"),
                });
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        let before = norm.len();
        norm.dedup();
        if norm.len() != before {
            return Err(Error::InvalidValue {
                what: "graph edge",
                details: "duplicate edge".into(),
            });
        }
        Ok(Graph {
            num_nodes,
            edges: norm,
        })
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph {
            num_nodes: n,
            edges,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Parse an edge-list: one "u v" pair per whitespace-separated line;
    /// blank lines and `#` comments are skipped. Node count is 1 + max index.
    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut edges = Vec::new();
        let mut max_node = 0usize;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Format(format!("bad edge-list line: {line:?}")))
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::Format(format!("bad edge-list line: {line:?}")));
            }
            max_node = max_node.max(u).max(v);
            edges.push((u, v));
        }
        Graph::new(if edges.is_empty() { 0 } else { max_node + 1 }, &edges)
    }
}

/// Angles below this distance to a multiple of π are flagged as non-generic:
/// they make gates collapse under pruning, so compiled sizes are not
/// representative.
pub const GENERIC_ANGLE_TOL: f64 = 1e-6;

/// Per-cycle angle pairs (gamma_c, beta_c).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub cycles: Vec<(f64, f64)>,
}

impl QaoaParams {
    pub fn new(cycles: Vec<(f64, f64)>) -> Result<Self> {
        if cycles.is_empty() {
            return Err(Error::InvalidValue {
                what: "qaoa params",
                details: "cycle count must be >= 1".into(),
            });
        }
        Ok(QaoaParams { cycles })
    }

    pub fn num_cycles(&self) -> usize {
        self.cycles.len()
    }

    /// Angles within `GENERIC_ANGLE_TOL` of a multiple of π, reported as
    /// (cycle, name, value).
    pub fn non_generic_angles(&self) -> Vec<(usize, &'static str, f64)> {
        let near_pi_multiple = |a: f64| {
            let r = a.rem_euclid(PI);
            r < GENERIC_ANGLE_TOL || PI - r < GENERIC_ANGLE_TOL
        };
        let mut out = Vec::new();
        for (c, &(gamma, beta)) in self.cycles.iter().enumerate() {
            if near_pi_multiple(gamma) {
                out.push((c, "gamma", gamma));
            }
            if near_pi_multiple(beta) {
                out.push((c, "beta", beta));
            }
        }
        out
    }

    pub fn is_generic(&self) -> bool {
        self.non_generic_angles().is_empty()
    }
}

/// Compilation result: the pruned circuit plus the qubit permutation the
/// swap network leaves behind. `permutation[wire]` is the graph node whose
/// state ends up on that wire.
#[derive(Debug, Clone)]
pub struct CompiledQaoa {
    pub circuit: Circuit,
    pub permutation: Vec<usize>,
    /// Angles flagged by the genericity check, empty for generic params.
    pub warnings: Vec<(usize, &'static str, f64)>,
}

/// ZZ(gamma) on adjacent wires: CNot, ZRot(2 gamma) on the target, CNot.
fn zz_gates(low: usize, high: usize, gamma: f64) -> [Gate; 3] {
    [
        Gate::cnot(low, high),
        Gate::zrot(high, 2.0 * gamma),
        Gate::cnot(low, high),
    ]
}

/// SWAP on adjacent wires as three CNots.
fn swap_gates(low: usize, high: usize) -> [Gate; 3] {
    [
        Gate::cnot(low, high),
        Gate::cnot(high, low),
        Gate::cnot(low, high),
    ]
}

/// Compile the MaxCut QAOA circuit for `graph` onto a chain of `num_qubits`
/// qubits. Per cycle: a ZZ(gamma_c) per edge, with non-adjacent node pairs
/// brought together by odd-even transposition swap layers, then a
/// PhasedX(0, 2 beta_c) on every qubit. The output is pruned, which fuses
/// swaps with adjacent ZZ interactions.
pub fn compile_maxcut(
    graph: &Graph,
    params: &QaoaParams,
    num_qubits: usize,
) -> Result<CompiledQaoa> {
    if graph.num_nodes() > num_qubits {
        return Err(Error::TooManyNodes {
            nodes: graph.num_nodes(),
            qubits: num_qubits,
        });
    }
    // pos[node] = wire currently holding the node's state.
    let mut pos: Vec<usize> = (0..num_qubits).collect();
    let mut gates = Vec::new();
    let mut parity = 0usize;

    for &(gamma, beta) in &params.cycles {
        let mut remaining: Vec<(usize, usize)> = graph.edges().to_vec();
        let mut layers = 0usize;
        loop {
            remaining.retain(|&(u, v)| {
                let (a, b) = (pos[u].min(pos[v]), pos[u].max(pos[v]));
                if b - a == 1 {
                    gates.extend(zz_gates(a, b, gamma));
                    false
                } else {
                    true
                }
            });
            if remaining.is_empty() {
                break;
            }
            // Full odd-even transposition layer; n layers make every node
            // pair adjacent at least once.
            assert!(layers <= 2 * num_qubits + 2, "swap network failed to route");
            let mut wire = parity;
            while wire + 1 < num_qubits {
                gates.extend(swap_gates(wire, wire + 1));
                for p in pos.iter_mut() {
                    if *p == wire {
                        *p = wire + 1;
                    } else if *p == wire + 1 {
                        *p = wire;
                    }
                }
                wire += 2;
            }
            parity ^= 1;
            layers += 1;
        }
        for q in 0..num_qubits {
            gates.push(Gate::phased_x(q, 0.0, 2.0 * beta));
        }
    }

    let circuit = prune(&Circuit::new(num_qubits, gates)?);
    // permutation[wire] = node on that wire.
    let mut permutation = vec![usize::MAX; num_qubits];
    for (node, &wire) in pos.iter().enumerate() {
        permutation[wire] = node;
    }
    Ok(CompiledQaoa {
        circuit,
        permutation,
        warnings: params.non_generic_angles(),
    })
}

/// Dense oracle: the exact product of `exp(-i gamma_c Z_i Z_j)` over edges
/// and X-rotation layers `Rx(2 beta_c)` on every qubit, in the unpermuted
/// node basis.
pub fn maxcut_reference_unitary(
    graph: &Graph,
    params: &QaoaParams,
    num_qubits: usize,
) -> Result<Unitary> {
    if graph.num_nodes() > num_qubits {
        return Err(Error::TooManyNodes {
            nodes: graph.num_nodes(),
            qubits: num_qubits,
        });
    }
    if num_qubits > DEFAULT_QUBIT_CAP {
        return Err(Error::QubitCapExceeded {
            num_qubits,
            cap: DEFAULT_QUBIT_CAP,
        });
    }
    let mut u = Unitary::identity(num_qubits);
    let dim = u.dim();
    for &(gamma, beta) in &params.cycles {
        for &(a, b) in graph.edges() {
            // Left-multiply by the diagonal exp(-i gamma Z_a Z_b): scale row
            // i by e^{-i gamma} when the two bits agree, e^{+i gamma} when
            // they differ. Qubit 0 is the most significant bit.
            let phases: Vec<C> = (0..dim)
                .map(|i| {
                    let ba = (i >> (num_qubits - 1 - a)) & 1;
                    let bb = (i >> (num_qubits - 1 - b)) & 1;
                    let sign = if ba == bb { -1.0 } else { 1.0 };
                    C::from_polar(1.0, sign * gamma)
                })
                .collect();
            let mut mat = u.matrix().clone();
            for (i, mut row) in mat.outer_iter_mut().enumerate() {
                row.map_inplace(|x| *x *= phases[i]);
            }
            u = Unitary::from_matrix(num_qubits, mat);
        }
        for q in 0..num_qubits {
            u.apply_gate(&Gate::phased_x(q, 0.0, 2.0 * beta));
        }
    }
    Ok(u)
}

/// Permutation operator: maps the node-basis state to the wire basis given
/// `permutation[wire] = node` (as reported by `compile_maxcut`).
pub fn permutation_unitary(permutation: &[usize]) -> Unitary {
    let n = permutation.len();
    let dim = 1usize << n;
    let mut mat = ndarray::Array2::zeros((dim, dim));
    for j in 0..dim {
        let mut i = 0usize;
        for (wire, &node) in permutation.iter().enumerate() {
            let bit = (j >> (n - 1 - node)) & 1;
            i |= bit << (n - 1 - wire);
        }
        mat[(i, j)] = C::new(1.0, 0.0);
    }
    Unitary::from_matrix(n, mat)
}

/// Reference unitary with the compiled permutation applied, directly
/// comparable to the compiled circuit's unitary.
pub fn permuted_reference(
    graph: &Graph,
    params: &QaoaParams,
    permutation: &[usize],
) -> Result<Unitary> {
    let num_qubits = permutation.len();
    let reference = maxcut_reference_unitary(graph, params, num_qubits)?;
    let p = permutation_unitary(permutation);
    let mat = p.matrix().dot(reference.matrix());
    Ok(Unitary::from_matrix(num_qubits, mat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{enumerate_transformations, KindFilter};
    use crate::unitary::{equivalent_up_to_phase, unitary_of};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_params(cycles: usize, seed: u64) -> QaoaParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        QaoaParams::new(
            (0..cycles)
                .map(|_| (0.3 + rng.gen::<f64>(), 0.3 + rng.gen::<f64>()))
                .collect(),
        )
        .unwrap()
    }

    fn check_compilation(graph: &Graph, params: &QaoaParams) {
        let n = graph.num_nodes().max(1);
        let out = compile_maxcut(graph, params, n).unwrap();
        let compiled = unitary_of(&out.circuit, DEFAULT_QUBIT_CAP).unwrap();
        let reference = permuted_reference(graph, params, &out.permutation).unwrap();
        assert!(
            equivalent_up_to_phase(&compiled, &reference, 1e-8),
            "compiled circuit disagrees with the reference"
        );
        // Pruned output has no hard-rule opportunity left.
        let hard = enumerate_transformations(&out.circuit, KindFilter::Hard).unwrap();
        assert!(hard.is_empty());
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(3, &[(0, 0)]).is_err());
        assert!(Graph::new(3, &[(0, 3)]).is_err());
        assert!(Graph::new(3, &[(0, 1), (1, 0)]).is_err());
        let g = Graph::new(3, &[(2, 0), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
        assert_eq!(Graph::complete(4).edges().len(), 6);
    }

    #[test]
    fn edge_list_parsing() {
        let g = Graph::parse_edge_list("0 1\n# comment\n2 1\n").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(Graph::parse_edge_list("0 1 2").is_err());
        assert!(Graph::parse_edge_list("0 x").is_err());
        assert_eq!(Graph::parse_edge_list("").unwrap().num_nodes(), 0);
    }

    #[test]
    fn zero_angles_give_identity_reference() {
        let g = Graph::complete(3);
        let p = QaoaParams::new(vec![(0.0, 0.0)]).unwrap();
        let u = maxcut_reference_unitary(&g, &p, 3).unwrap();
        let id = Unitary::identity(3);
        assert!(equivalent_up_to_phase(&u, &id, 1e-12));
        assert!(!p.is_generic());
    }

    #[test]
    fn single_edge_reference_is_diagonal_without_mixer() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let p = QaoaParams::new(vec![(0.7, 0.0)]).unwrap();
        let u = maxcut_reference_unitary(&g, &p, 2).unwrap();
        for ((i, j), &v) in u.matrix().indexed_iter() {
            if i != j {
                assert!(v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn edgeless_graph_is_just_the_mixer_layer() {
        let g = Graph::new(3, &[]).unwrap();
        let p = random_params(1, 1);
        let out = compile_maxcut(&g, &p, 3).unwrap();
        assert_eq!(out.circuit.gate_count(), 3);
        assert!(out
            .circuit
            .gates()
            .iter()
            .all(|g| matches!(g, Gate::PhasedX { .. })));
        assert_eq!(out.permutation, vec![0, 1, 2]);
        check_compilation(&g, &p);
    }

    #[test]
    fn path_and_triangle_compilations_match_the_oracle() {
        check_compilation(&Graph::new(2, &[(0, 1)]).unwrap(), &random_params(1, 2));
        check_compilation(&Graph::complete(3), &random_params(1, 3));
        check_compilation(&Graph::complete(3), &random_params(2, 4));
    }

    #[test]
    fn all_to_all_graphs_route_correctly() {
        for n in 4..=5 {
            for cycles in 1..=2 {
                check_compilation(&Graph::complete(n), &random_params(cycles, n as u64));
            }
        }
    }

    #[test]
    fn six_node_compilation_is_connectivity_clean_and_reports_size() {
        let g = Graph::complete(6);
        let p = random_params(2, 9);
        let out = compile_maxcut(&g, &p, 6).unwrap();
        assert!(out.warnings.is_empty());
        // Round-trip through JSON re-runs the connectivity validation.
        let json = out.circuit.to_json();
        let back = Circuit::from_json(&json).unwrap();
        assert_eq!(back, out.circuit);
        assert!(out.circuit.depth() > 0);
        check_compilation(&g, &p);
    }

    #[test]
    fn too_many_nodes_is_rejected() {
        let g = Graph::complete(4);
        assert!(matches!(
            compile_maxcut(&g, &random_params(1, 0), 3),
            Err(Error::TooManyNodes { nodes: 4, qubits: 3 })
        ));
        assert!(matches!(
            maxcut_reference_unitary(&Graph::complete(12), &random_params(1, 0), 12),
            Err(Error::QubitCapExceeded { .. })
        ));
    }

    #[test]
    fn genericity_warnings_fire_near_pi_multiples() {
        let p = QaoaParams::new(vec![(PI, 0.4), (0.5, 2.0 * PI + 1e-9)]).unwrap();
        let warns = p.non_generic_angles();
        assert_eq!(warns.len(), 2);
        assert_eq!(warns[0], (0, "gamma", PI));
        assert_eq!(warns[1].0, 1);
        assert!(random_params(3, 5).is_generic());
    }
}
