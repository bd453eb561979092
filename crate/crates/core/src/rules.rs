//! The transformation-rule engine: enumeration, application and local
//! verification of hard and soft rewrites, plus pruning to the hard-rule
//! fixpoint.
//!
//! Hard rules (H1, H2, H4) are always advantageous and applied automatically
//! by [`prune`]; soft rules (S1, S2, S3, S5, S6) are context-dependent and
//! chosen by the annealer or the RL agent.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::{angle_dist, canonical_angle, dist_to_zero_mod_tau, Circuit, Gate};
use crate::error::{Error, Result};
use crate::synth::{hadamard, resynthesize_1q, OneQubitForm};
use crate::unitary::{equivalent_up_to_phase, gate_matrix_1q, matrix_1q, unitary_over_wires};

/// Angle-class membership tolerance (identity detection, X-like axes).
/// Deliberately strict: a loose closeness criterion lets optimizers exploit
/// invalid simplifications on near-special angles.
pub const CLASS_TOL: f64 = 1e-6;

/// Tolerance for local unitary verification of a rewrite.
pub const VERIFY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Hard,
    Soft,
}

/// The built-in rule catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    /// Drop a ZRot or PhasedX whose angle is 0 mod 2π.
    H1DropIdentity,
    /// Merge two adjacent single-qubit gates into the canonical form.
    H2Merge1q,
    /// Cancel two adjacent identical CNOTs.
    H4CancelCnotPair,
    /// Commute a ZRot with a CNOT through the control wire.
    S1CommuteZrotControl,
    /// Commute an X-like PhasedX with a CNOT through the target wire.
    S2CommuteXlikeTarget,
    /// Exchange two adjacent CNOTs sharing only a control or only a target wire.
    S3ExchangeCnots,
    /// Move a ZRot across a PhasedX on the same wire, shifting the axis phase.
    S5MoveZrotAcrossPhasedX,
    /// Reverse a CNOT's orientation, inserting Hadamard-equivalent locals.
    S6ReverseCnot,
}

/// All rules in catalog (enumeration) order.
pub const ALL_RULES: [RuleId; 8] = [
    RuleId::H1DropIdentity,
    RuleId::H2Merge1q,
    RuleId::H4CancelCnotPair,
    RuleId::S1CommuteZrotControl,
    RuleId::S2CommuteXlikeTarget,
    RuleId::S3ExchangeCnots,
    RuleId::S5MoveZrotAcrossPhasedX,
    RuleId::S6ReverseCnot,
];

/// The soft rules, in action-channel order.
pub const SOFT_RULES: [RuleId; 5] = [
    RuleId::S1CommuteZrotControl,
    RuleId::S2CommuteXlikeTarget,
    RuleId::S3ExchangeCnots,
    RuleId::S5MoveZrotAcrossPhasedX,
    RuleId::S6ReverseCnot,
];

impl RuleId {
    pub fn kind(&self) -> RuleKind {
        match self {
            RuleId::H1DropIdentity | RuleId::H2Merge1q | RuleId::H4CancelCnotPair => RuleKind::Hard,
            _ => RuleKind::Soft,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RuleId::H1DropIdentity => "H1_drop_identity",
            RuleId::H2Merge1q => "H2_merge_1q",
            RuleId::H4CancelCnotPair => "H4_cancel_cnot_pair",
            RuleId::S1CommuteZrotControl => "S1_commute_zrot_through_control",
            RuleId::S2CommuteXlikeTarget => "S2_commute_xlike_through_target",
            RuleId::S3ExchangeCnots => "S3_exchange_cnots_shared_wire",
            RuleId::S5MoveZrotAcrossPhasedX => "S5_move_zrot_across_phasedx",
            RuleId::S6ReverseCnot => "S6_reverse_cnot",
        }
    }

    /// Index of a soft rule within [`SOFT_RULES`].
    pub fn soft_index(&self) -> Option<usize> {
        SOFT_RULES.iter().position(|r| r == self)
    }
}

/// A selectable subset of the built-in catalog. The default enables all
/// rules; restricted catalogs are useful for experiments and tests.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<RuleId>,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            rules: ALL_RULES.to_vec(),
        }
    }
}

impl RuleSet {
    pub fn with_rules(mut rules: Vec<RuleId>) -> Self {
        rules.sort();
        rules.dedup();
        RuleSet { rules }
    }

    pub fn rules(&self) -> &[RuleId] {
        &self.rules
    }

    pub fn contains(&self, rule: RuleId) -> bool {
        self.rules.contains(&rule)
    }
}

/// Which rule kinds to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindFilter {
    Hard,
    Soft,
    All,
}

impl KindFilter {
    fn admits(&self, kind: RuleKind) -> bool {
        matches!(
            (self, kind),
            (KindFilter::All, _) | (KindFilter::Hard, RuleKind::Hard) | (KindFilter::Soft, RuleKind::Soft)
        )
    }
}

/// Anchor of a transformation in the (moment, qubit) plane.
///
/// Single-gate rules anchor at the gate's moment and smallest qubit;
/// two-gate rules at the first gate's moment and the smallest shared qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Locus {
    pub moment: usize,
    pub qubit: usize,
}

/// One applicable rule instance on a specific circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformation {
    pub rule: RuleId,
    pub locus: Locus,
    /// Indices of the affected gates in the circuit's linear gate list.
    pub affected: (usize, Option<usize>),
    /// Snapshot of the affected gates, used to detect stale applications.
    snapshot: (Gate, Option<Gate>),
}

/// Replayable record of an applied transformation: the rule plus the locus
/// it anchored at, enough to re-find the same instance on the same circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedStep {
    pub rule: RuleId,
    pub moment: usize,
    pub qubit: usize,
}

impl From<&Transformation> for AppliedStep {
    fn from(t: &Transformation) -> Self {
        AppliedStep {
            rule: t.rule,
            moment: t.locus.moment,
            qubit: t.locus.qubit,
        }
    }
}

/// Re-find the transformation a recorded step refers to on `circuit`.
/// Injectivity of (rule, locus) makes the lookup unambiguous.
pub fn find_transformation(circuit: &Circuit, step: &AppliedStep) -> Result<Transformation> {
    enumerate_transformations(circuit, KindFilter::All)?
        .into_iter()
        .find(|t| {
            t.rule == step.rule && t.locus.moment == step.moment && t.locus.qubit == step.qubit
        })
        .ok_or(Error::NotApplicable)
}

struct View<'a> {
    circuit: &'a Circuit,
    wires: Vec<Vec<usize>>,
    moments: Vec<usize>,
}

impl<'a> View<'a> {
    fn new(circuit: &'a Circuit) -> Self {
        View {
            circuit,
            wires: circuit.wires(),
            moments: circuit.schedule_asap().moment_of,
        }
    }

    fn gate(&self, i: usize) -> &Gate {
        &self.circuit.gates()[i]
    }

    fn next_on_wire(&self, wire: usize, id: usize) -> Option<usize> {
        let w = &self.wires[wire];
        let pos = w.iter().position(|&x| x == id)?;
        w.get(pos + 1).copied()
    }
}

fn is_identity_1q(g: &Gate) -> bool {
    match *g {
        Gate::ZRot { theta, .. } => dist_to_zero_mod_tau(theta) < CLASS_TOL,
        Gate::PhasedX { angle, .. } => dist_to_zero_mod_tau(angle) < CLASS_TOL,
        Gate::CNot { .. } => false,
    }
}

/// X-like: axis phase at 0 or π, i.e. a rotation about ±X, which commutes
/// with the target side of a CNOT.
fn is_x_like(g: &Gate) -> bool {
    match *g {
        Gate::PhasedX { axis_phase, .. } => {
            dist_to_zero_mod_tau(axis_phase) < CLASS_TOL || angle_dist(axis_phase, PI) < CLASS_TOL
        }
        _ => false,
    }
}

fn merge_1q(g1: &Gate, g2: &Gate) -> Result<OneQubitForm> {
    let m = matrix_1q(&gate_matrix_1q(g2)).dot(&matrix_1q(&gate_matrix_1q(g1)));
    resynthesize_1q(&m)
}

/// The merge is unconditionally advantageous only when it strictly reduces
/// the gate count; a two-gate output would merely rewrite the pair in place.
fn h2_applicable(g1: &Gate, g2: &Gate) -> bool {
    match merge_1q(g1, g2) {
        Ok(form) => form.len() < 2,
        Err(_) => false,
    }
}

/// Enumerate all instances of the requested rule kinds, in deterministic
/// order (rule id, then moment, then qubit). Fails with
/// `InjectivityViolation` if two instances collide on (rule, locus).
pub fn enumerate_transformations(circuit: &Circuit, filter: KindFilter) -> Result<Vec<Transformation>> {
    enumerate_with(circuit, &RuleSet::default(), filter)
}

/// [`enumerate_transformations`] restricted to a rule catalog.
pub fn enumerate_with(
    circuit: &Circuit,
    rules: &RuleSet,
    filter: KindFilter,
) -> Result<Vec<Transformation>> {
    let view = View::new(circuit);
    let mut out = Vec::new();
    let mut seen: HashMap<(RuleId, Locus), ()> = HashMap::new();
    for &rule in rules.rules() {
        if !filter.admits(rule.kind()) {
            continue;
        }
        let mut instances = enumerate_rule(&view, rule);
        instances.sort_by_key(|t| (t.locus.moment, t.locus.qubit));
        for t in &instances {
            if seen.insert((t.rule, t.locus), ()).is_some() {
                return Err(Error::InjectivityViolation {
                    rule: t.rule.name(),
                    moment: t.locus.moment,
                    qubit: t.locus.qubit,
                });
            }
        }
        out.extend(instances);
    }
    Ok(out)
}

fn single(view: &View, rule: RuleId, i: usize) -> Transformation {
    let g = *view.gate(i);
    Transformation {
        rule,
        locus: Locus {
            moment: view.moments[i],
            qubit: g.min_qubit(),
        },
        affected: (i, None),
        snapshot: (g, None),
    }
}

fn pair(view: &View, rule: RuleId, i: usize, j: usize, shared_qubit: usize) -> Transformation {
    Transformation {
        rule,
        locus: Locus {
            moment: view.moments[i],
            qubit: shared_qubit,
        },
        affected: (i, Some(j)),
        snapshot: (*view.gate(i), Some(*view.gate(j))),
    }
}

fn enumerate_rule(view: &View, rule: RuleId) -> Vec<Transformation> {
    let mut out = Vec::new();
    match rule {
        RuleId::H1DropIdentity => {
            for (i, g) in view.circuit.gates().iter().enumerate() {
                if is_identity_1q(g) {
                    out.push(single(view, rule, i));
                }
            }
        }
        RuleId::S6ReverseCnot => {
            for (i, g) in view.circuit.gates().iter().enumerate() {
                if matches!(g, Gate::CNot { .. }) {
                    out.push(single(view, rule, i));
                }
            }
        }
        RuleId::H2Merge1q => {
            for_wire_pairs(view, |w, i, j| {
                let (g1, g2) = (view.gate(i), view.gate(j));
                if g1.is_single_qubit() && g2.is_single_qubit() && h2_applicable(g1, g2) {
                    out.push(pair(view, rule, i, j, w));
                }
            });
        }
        RuleId::H4CancelCnotPair => {
            for_wire_pairs(view, |w, i, j| {
                let (g1, g2) = (view.gate(i), view.gate(j));
                if let (Gate::CNot { control: c1, target: t1 }, Gate::CNot { control: c2, target: t2 }) =
                    (g1, g2)
                {
                    // Register on the lower wire only; require adjacency on
                    // both wires for a true cancellation.
                    if c1 == c2
                        && t1 == t2
                        && w == g1.min_qubit()
                        && view.next_on_wire(g1.qubits().1.unwrap(), i) == Some(j)
                    {
                        out.push(pair(view, rule, i, j, w));
                    }
                }
            });
        }
        RuleId::S1CommuteZrotControl => {
            for_wire_pairs(view, |w, i, j| {
                let (g1, g2) = (view.gate(i), view.gate(j));
                let ok = matches!((g1, g2),
                    (Gate::ZRot { .. }, Gate::CNot { control, .. }) if *control == w)
                    || matches!((g1, g2),
                    (Gate::CNot { control, .. }, Gate::ZRot { .. }) if *control == w);
                if ok {
                    out.push(pair(view, rule, i, j, w));
                }
            });
        }
        RuleId::S2CommuteXlikeTarget => {
            for_wire_pairs(view, |w, i, j| {
                let (g1, g2) = (view.gate(i), view.gate(j));
                let ok = matches!((g1, g2),
                    (Gate::PhasedX { .. }, Gate::CNot { target, .. }) if *target == w && is_x_like(g1))
                    || matches!((g1, g2),
                    (Gate::CNot { target, .. }, Gate::PhasedX { .. }) if *target == w && is_x_like(g2));
                if ok {
                    out.push(pair(view, rule, i, j, w));
                }
            });
        }
        RuleId::S3ExchangeCnots => {
            for_wire_pairs(view, |w, i, j| {
                let (g1, g2) = (view.gate(i), view.gate(j));
                if let (Gate::CNot { control: c1, target: t1 }, Gate::CNot { control: c2, target: t2 }) =
                    (g1, g2)
                {
                    let share_control_only = *c1 == w && *c2 == w && t1 != t2;
                    let share_target_only = *t1 == w && *t2 == w && c1 != c2;
                    if share_control_only || share_target_only {
                        out.push(pair(view, rule, i, j, w));
                    }
                }
            });
        }
        RuleId::S5MoveZrotAcrossPhasedX => {
            for_wire_pairs(view, |w, i, j| {
                let (g1, g2) = (view.gate(i), view.gate(j));
                let ok = matches!((g1, g2), (Gate::ZRot { .. }, Gate::PhasedX { .. }))
                    || matches!((g1, g2), (Gate::PhasedX { .. }, Gate::ZRot { .. }));
                if ok {
                    out.push(pair(view, rule, i, j, w));
                }
            });
        }
    }
    out
}

fn for_wire_pairs(view: &View, mut f: impl FnMut(usize, usize, usize)) {
    for (w, wire) in view.wires.iter().enumerate() {
        for k in 0..wire.len().saturating_sub(1) {
            f(w, wire[k], wire[k + 1]);
        }
    }
}

/// The gate-level content of a rewrite: affected wires (sorted), the affected
/// gates in time order, and their replacement in time order.
#[derive(Debug, Clone)]
pub struct LocalRewrite {
    pub wires: Vec<usize>,
    pub before: Vec<Gate>,
    pub after: Vec<Gate>,
}

fn local_rewrite(t: &Transformation) -> Result<LocalRewrite> {
    let (g1, g2) = (t.snapshot.0, t.snapshot.1);
    let mut wires: Vec<usize> = Vec::new();
    let mut push_wires = |g: &Gate| {
        let (a, b) = g.qubits();
        wires.push(a);
        if let Some(b) = b {
            wires.push(b);
        }
    };
    push_wires(&g1);
    if let Some(g2) = &g2 {
        push_wires(g2);
    }
    wires.sort_unstable();
    wires.dedup();

    let q = t.locus.qubit;
    let (before, after) = match t.rule {
        RuleId::H1DropIdentity => (vec![g1], vec![]),
        RuleId::H2Merge1q => {
            let g2 = g2.ok_or(Error::NotApplicable)?;
            let form = merge_1q(&g1, &g2)?;
            (vec![g1, g2], form.gates(q))
        }
        RuleId::H4CancelCnotPair => (vec![g1, g2.ok_or(Error::NotApplicable)?], vec![]),
        RuleId::S1CommuteZrotControl | RuleId::S2CommuteXlikeTarget | RuleId::S3ExchangeCnots => {
            let g2 = g2.ok_or(Error::NotApplicable)?;
            (vec![g1, g2], vec![g2, g1])
        }
        RuleId::S5MoveZrotAcrossPhasedX => {
            let g2 = g2.ok_or(Error::NotApplicable)?;
            match (g1, g2) {
                (Gate::ZRot { theta, .. }, Gate::PhasedX { axis_phase, angle, .. }) => (
                    vec![g1, g2],
                    vec![
                        Gate::phased_x(q, canonical_angle(axis_phase - theta), angle),
                        g1,
                    ],
                ),
                (Gate::PhasedX { axis_phase, angle, .. }, Gate::ZRot { theta, .. }) => (
                    vec![g1, g2],
                    vec![
                        g2,
                        Gate::phased_x(q, canonical_angle(axis_phase + theta), angle),
                    ],
                ),
                _ => return Err(Error::NotApplicable),
            }
        }
        RuleId::S6ReverseCnot => {
            let Gate::CNot { control, target } = g1 else {
                return Err(Error::NotApplicable);
            };
            let h = resynthesize_1q(&hadamard()).expect("Hadamard is unitary");
            let mut after = Vec::with_capacity(9);
            after.extend(h.gates(control));
            after.extend(h.gates(target));
            after.push(Gate::cnot(target, control));
            after.extend(h.gates(control));
            after.extend(h.gates(target));
            (vec![g1], after)
        }
    };
    Ok(LocalRewrite { wires, before, after })
}

/// Verify a transformation by comparing the dense unitaries of the affected
/// gates and their replacement over the union of affected wires.
pub fn verify_local(circuit: &Circuit, t: &Transformation) -> Result<bool> {
    revalidate(circuit, t)?;
    let lr = local_rewrite(t)?;
    let before = unitary_over_wires(&lr.before, &lr.wires);
    let after = unitary_over_wires(&lr.after, &lr.wires);
    Ok(equivalent_up_to_phase(&before, &after, VERIFY_TOL))
}

fn revalidate(circuit: &Circuit, t: &Transformation) -> Result<()> {
    let gates = circuit.gates();
    let (i, j) = t.affected;
    let stale = |idx: usize, snap: &Gate| gates.get(idx) != Some(snap);
    if stale(i, &t.snapshot.0) || j.is_some_and(|j| stale(j, t.snapshot.1.as_ref().unwrap())) {
        return Err(Error::StaleTransformation);
    }
    // The instance must still be enumerable at the same locus.
    let view = View::new(circuit);
    let found = enumerate_rule(&view, t.rule)
        .into_iter()
        .any(|u| u.locus == t.locus && u.affected == t.affected);
    if found {
        Ok(())
    } else {
        Err(Error::NotApplicable)
    }
}

/// Apply a transformation enumerated on this exact circuit, producing a new
/// circuit with a canonical gate order.
pub fn apply(circuit: &Circuit, t: &Transformation) -> Result<Circuit> {
    revalidate(circuit, t)?;
    let lr = local_rewrite(t)?;

    let mut slab: Vec<Gate> = circuit.gates().to_vec();
    let mut wires = circuit.wires();
    let mut affected = vec![t.affected.0];
    if let Some(j) = t.affected.1 {
        affected.push(j);
    }
    let after_ids: Vec<usize> = lr
        .after
        .iter()
        .map(|g| {
            slab.push(*g);
            slab.len() - 1
        })
        .collect();

    for &w in &lr.wires {
        let old: Vec<usize> = wires[w]
            .iter()
            .copied()
            .filter(|id| affected.contains(id))
            .collect();
        if old.is_empty() {
            continue;
        }
        let start = wires[w].iter().position(|id| affected.contains(id)).unwrap();
        // Affected gates are consecutive on every wire they share.
        for (k, id) in old.iter().enumerate() {
            if wires[w].get(start + k) != Some(id) {
                return Err(Error::NotApplicable);
            }
        }
        let replacement: Vec<usize> = after_ids
            .iter()
            .copied()
            .filter(|&id| slab[id].acts_on(w))
            .collect();
        wires[w].splice(start..start + old.len(), replacement);
    }

    rebuild(circuit.num_qubits(), &slab, &wires)
}

/// Topologically sort the edited wire structure back into a linear circuit.
fn rebuild(num_qubits: usize, slab: &[Gate], wires: &[Vec<usize>]) -> Result<Circuit> {
    let mut indegree: HashMap<usize, usize> = HashMap::new();
    let mut successors: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut alive: Vec<usize> = Vec::new();
    for wire in wires {
        for &id in wire {
            indegree.entry(id).or_insert(0);
        }
        for k in 0..wire.len().saturating_sub(1) {
            successors.entry(wire[k]).or_default().push(wire[k + 1]);
            *indegree.entry(wire[k + 1]).or_insert(0) += 1;
        }
    }
    alive.extend(indegree.keys().copied());

    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut ready: BinaryHeap<Reverse<usize>> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| Reverse(id))
        .collect();
    let mut order = Vec::with_capacity(alive.len());
    while let Some(Reverse(id)) = ready.pop() {
        order.push(slab[id]);
        if let Some(succ) = successors.get(&id) {
            for &s in succ {
                let d = indegree.get_mut(&s).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(s));
                }
            }
        }
    }
    if order.len() != alive.len() {
        return Err(Error::NotApplicable); // cycle: the rewrite was unsound
    }
    Circuit::new(num_qubits, order)
}

/// Apply hard rules to fixpoint (deterministic scan order, restarting after
/// each application), then return the repacked circuit. `q` never increases.
pub fn prune(circuit: &Circuit) -> Circuit {
    prune_with(circuit, &RuleSet::default())
}

/// [`prune`] restricted to a rule catalog.
pub fn prune_with(circuit: &Circuit, rules: &RuleSet) -> Circuit {
    let mut c = circuit.clone();
    let bound = 10 * circuit.gate_count() + 16;
    let mut applications = 0usize;
    loop {
        let hard = enumerate_with(&c, rules, KindFilter::Hard)
            .expect("hard-rule enumeration cannot collide");
        let Some(t) = hard.first() else { break };
        c = apply(&c, t).expect("enumerated hard rule must apply");
        applications += 1;
        debug_assert!(applications <= bound, "prune exceeded its termination bound");
        if applications > bound {
            break;
        }
    }
    c
}
