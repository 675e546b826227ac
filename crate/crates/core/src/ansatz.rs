//! Parameterized circuits: the structure-inspired ansatz (SIA) in its YZ and
//! YZ+Y flavours, the hardware-efficient baselines and a product ansatz.
//! Also the odd-even SWAP network and two-qubit gate resource counts.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qubo::QuboInstance;
use crate::statevector::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    SiaYz,
    SiaYzY,
    HeaLinearCnot,
    HeaParallelCz,
    Product,
}

impl AnsatzKind {
    pub const ALL: [AnsatzKind; 5] = [
        AnsatzKind::SiaYz,
        AnsatzKind::SiaYzY,
        AnsatzKind::HeaLinearCnot,
        AnsatzKind::HeaParallelCz,
        AnsatzKind::Product,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnsatzKind::SiaYz => "sia_yz",
            AnsatzKind::SiaYzY => "sia_yz_y",
            AnsatzKind::HeaLinearCnot => "hea_linear_cnot",
            AnsatzKind::HeaParallelCz => "hea_parallel_cz",
            AnsatzKind::Product => "product",
        }
    }

    pub fn is_sia(self) -> bool {
        matches!(self, AnsatzKind::SiaYz | AnsatzKind::SiaYzY)
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnsatzKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "sia" | "sia_yz" | "yz" => Ok(AnsatzKind::SiaYz),
            "sia_yz_y" | "yz_y" => Ok(AnsatzKind::SiaYzY),
            "hea" | "hea_linear_cnot" => Ok(AnsatzKind::HeaLinearCnot),
            "hea_parallel_cz" => Ok(AnsatzKind::HeaParallelCz),
            "product" => Ok(AnsatzKind::Product),
            _ => Err(invalid(format!("unknown ansatz kind {s:?}"))),
        }
    }
}

/// Order in which SIA two-qubit blocks are placed within a layer.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrder {
    #[default]
    Lexicographic,
    ReverseLexicographic,
    Explicit(Vec<(usize, usize)>),
}

impl EdgeOrder {
    /// Instance edges arranged in this order. An explicit order must be a
    /// permutation of the instance's edge set.
    pub fn arrange(&self, instance: &QuboInstance) -> Result<Vec<(usize, usize)>> {
        let mut edges: Vec<(usize, usize)> = instance.edges().collect();
        match self {
            EdgeOrder::Lexicographic => Ok(edges),
            EdgeOrder::ReverseLexicographic => {
                edges.reverse();
                Ok(edges)
            }
            EdgeOrder::Explicit(order) => {
                let canon: Vec<(usize, usize)> =
                    order.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
                let given: HashSet<_> = canon.iter().copied().collect();
                let known: HashSet<_> = edges.iter().copied().collect();
                if given.len() != canon.len() || given != known {
                    return Err(invalid(
                        "explicit edge order must list every instance edge exactly once",
                    ));
                }
                Ok(canon)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            EdgeOrder::Lexicographic => "lexicographic".into(),
            EdgeOrder::ReverseLexicographic => "reverse_lexicographic".into(),
            EdgeOrder::Explicit(_) => "explicit".into(),
        }
    }
}

impl FromStr for EdgeOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lexicographic" | "lex" => Ok(EdgeOrder::Lexicographic),
            "reverse" | "reverse_lexicographic" => Ok(EdgeOrder::ReverseLexicographic),
            _ => Err(invalid(format!("unknown edge order {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    H,
    Ry,
    /// `exp(-i (p1 Z_i Y_j + p0 Y_i Z_j) / 2)` with slots `[p0, p1]`.
    YzPair,
    Cnot,
    Cz,
}

/// One gate. `qubits` holds one index, or two for pair gates (control first
/// for CNOT). `slots` are parameter indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub slots: Vec<usize>,
    /// 0 for the initial Hadamard layer, then 1-based repetition index.
    pub layer: usize,
}

impl Gate {
    fn fixed(kind: GateKind, qubits: Vec<usize>, layer: usize) -> Self {
        Self { kind, qubits, slots: Vec::new(), layer }
    }

    fn param(kind: GateKind, qubits: Vec<usize>, slots: Vec<usize>, layer: usize) -> Self {
        Self { kind, qubits, slots, layer }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub kind: AnsatzKind,
    pub layers: usize,
    #[serde(default)]
    pub edge_order: EdgeOrder,
}

impl AnsatzSpec {
    pub fn sia(layers: usize) -> Self {
        Self { kind: AnsatzKind::SiaYz, layers, edge_order: EdgeOrder::Lexicographic }
    }

    pub fn build(&self, instance: &QuboInstance) -> Result<Circuit> {
        let n = instance.n();
        match self.kind {
            AnsatzKind::SiaYz => build_sia(instance, SiaVariant::Yz, self.layers, &self.edge_order),
            AnsatzKind::SiaYzY => {
                build_sia(instance, SiaVariant::YzY, self.layers, &self.edge_order)
            }
            AnsatzKind::HeaLinearCnot => build_hea_linear_cnot(n, self.layers),
            AnsatzKind::HeaParallelCz => build_hea_parallel_cz(n, self.layers),
            AnsatzKind::Product => build_product_ansatz(n, self.layers),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiaVariant {
    Yz,
    YzY,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n: usize,
    pub kind: AnsatzKind,
    pub layers: usize,
    pub param_count: usize,
    pub gates: Vec<Gate>,
    /// Edge placement within each SIA layer; empty for other kinds.
    #[serde(default)]
    pub edge_order: Vec<(usize, usize)>,
}

fn check_size(n: usize, layers: usize) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("ansatz needs at least 2 qubits, got {n}")));
    }
    if layers == 0 {
        return Err(invalid("ansatz needs at least one layer"));
    }
    Ok(())
}

fn hadamard_layer(n: usize) -> Vec<Gate> {
    (0..n).map(|q| Gate::fixed(GateKind::H, vec![q], 0)).collect()
}

/// H layer, then per layer an R_y on every vertex followed by one block per
/// edge. A YZ block has slots `[p0, p1]`. A YZ+Y block has four slots: R_y on
/// `j`, R_y on `i`, then the YZ pair with the last two.
pub fn build_sia(
    instance: &QuboInstance,
    variant: SiaVariant,
    layers: usize,
    edge_order: &EdgeOrder,
) -> Result<Circuit> {
    let n = instance.n();
    check_size(n, layers)?;
    let edges = edge_order.arrange(instance)?;
    let mut gates = hadamard_layer(n);
    let mut slot = 0;
    for layer in 1..=layers {
        for q in 0..n {
            gates.push(Gate::param(GateKind::Ry, vec![q], vec![slot], layer));
            slot += 1;
        }
        for &(i, j) in &edges {
            if variant == SiaVariant::YzY {
                gates.push(Gate::param(GateKind::Ry, vec![j], vec![slot], layer));
                gates.push(Gate::param(GateKind::Ry, vec![i], vec![slot + 1], layer));
                slot += 2;
            }
            gates.push(Gate::param(GateKind::YzPair, vec![i, j], vec![slot, slot + 1], layer));
            slot += 2;
        }
    }
    let kind = match variant {
        SiaVariant::Yz => AnsatzKind::SiaYz,
        SiaVariant::YzY => AnsatzKind::SiaYzY,
    };
    Ok(Circuit { n, kind, layers, param_count: slot, gates, edge_order: edges })
}

/// Shared skeleton of the baselines: `n` rotation layers interleaved with
/// `n - 1` entangling layers, repeated `layers` times.
fn build_layered(
    n: usize,
    layers: usize,
    kind: AnsatzKind,
    mut entangle: impl FnMut(&mut Vec<Gate>, usize, usize),
) -> Result<Circuit> {
    check_size(n, layers)?;
    let mut gates = hadamard_layer(n);
    let mut slot = 0;
    for layer in 1..=layers {
        for r in 0..n {
            if r > 0 {
                entangle(&mut gates, layer, r - 1);
            }
            for q in 0..n {
                gates.push(Gate::param(GateKind::Ry, vec![q], vec![slot], layer));
                slot += 1;
            }
        }
    }
    Ok(Circuit { n, kind, layers, param_count: slot, gates, edge_order: Vec::new() })
}

pub fn build_hea_linear_cnot(n: usize, layers: usize) -> Result<Circuit> {
    build_layered(n, layers, AnsatzKind::HeaLinearCnot, |gates, layer, _| {
        for q in 0..n - 1 {
            gates.push(Gate::fixed(GateKind::Cnot, vec![q, q + 1], layer));
        }
    })
}

/// Each entangling layer is a full brick: CZ on pairs starting at an even
/// qubit, then on pairs starting at an odd qubit, `n - 1` CZs in total. The
/// starting parity alternates between successive entangling layers.
pub fn build_hea_parallel_cz(n: usize, layers: usize) -> Result<Circuit> {
    build_layered(n, layers, AnsatzKind::HeaParallelCz, |gates, layer, e| {
        for half in 0..2 {
            let offset = (e + half) % 2;
            for q in (offset..n - 1).step_by(2) {
                gates.push(Gate::fixed(GateKind::Cz, vec![q, q + 1], layer));
            }
        }
    })
}

pub fn build_product_ansatz(n: usize, layers: usize) -> Result<Circuit> {
    build_layered(n, layers, AnsatzKind::Product, |_, _, _| {})
}

impl Circuit {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.qubits.len() == 2).count()
    }

    /// Number of leading Hadamards that together map `|0..0>` to `|+>^n`.
    fn plus_prefix(&self) -> usize {
        let prefix = self
            .gates
            .iter()
            .take(self.n)
            .enumerate()
            .take_while(|(q, g)| g.kind == GateKind::H && g.qubits == [*q])
            .count();
        if prefix == self.n {
            prefix
        } else {
            0
        }
    }

    pub fn prepare(&self, params: &[f64]) -> Result<State> {
        let mut state = State::plus(self.n)?;
        self.prepare_into(params, &mut state)?;
        Ok(state)
    }

    /// Prepares into an existing buffer of the right size.
    pub fn prepare_into(&self, params: &[f64], state: &mut State) -> Result<()> {
        if params.len() != self.param_count {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                self.param_count,
                params.len()
            )));
        }
        if state.n() != self.n {
            return Err(invalid(format!(
                "state has {} qubits, circuit {}",
                state.n(),
                self.n
            )));
        }
        let skip = self.plus_prefix();
        if skip == self.n {
            state.reset_plus();
        } else {
            *state = State::basis(self.n, 0)?;
        }
        for gate in &self.gates[skip..] {
            apply_gate(state, gate, params)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn apply_gate(state: &mut State, gate: &Gate, params: &[f64]) -> Result<()> {
    let q = &gate.qubits;
    match gate.kind {
        GateKind::H => state.apply_h(q[0]),
        GateKind::Ry => state.apply_ry(q[0], params[gate.slots[0]]),
        GateKind::YzPair => {
            state.apply_yz_pair(q[0], q[1], params[gate.slots[0]], params[gate.slots[1]])
        }
        GateKind::Cnot => state.apply_cnot(q[0], q[1]),
        GateKind::Cz => state.apply_cz(q[0], q[1]),
    }
}

/// One layer of the odd-even transposition network on a line of qubits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapLayer {
    /// Adjacent physical positions `(p, p + 1)` acted on.
    pub positions: Vec<(usize, usize)>,
    /// Logical pairs interacting at those positions, as `(min, max)`.
    pub logical: Vec<(usize, usize)>,
    /// Whether each two-qubit block in this layer is fused with a SWAP.
    pub swap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapSchedule {
    pub n: usize,
    /// Logical qubit at each physical position before the first layer.
    pub initial_layout: Vec<usize>,
    pub layers: Vec<SwapLayer>,
}

impl SwapSchedule {
    pub fn swap_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.swap).count()
    }

    pub fn pair_count(&self) -> usize {
        self.layers.iter().map(|l| l.logical.len()).sum()
    }

    /// CNOTs when each block costs 2, or 3 when fused with a SWAP.
    pub fn cnot_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.logical.len() * if l.swap { 3 } else { 2 })
            .sum()
    }

    pub fn cnot_depth(&self) -> usize {
        self.layers.iter().map(|l| if l.swap { 3 } else { 2 }).sum()
    }

    /// Replays the schedule, checking that every pair meets exactly once at
    /// adjacent positions.
    pub fn verify(&self) -> Result<()> {
        let mut layout = self.initial_layout.clone();
        let mut seen = HashSet::new();
        for layer in &self.layers {
            for (&(p, p1), &pair) in layer.positions.iter().zip(&layer.logical) {
                if p1 != p + 1 || p1 >= self.n {
                    return Err(invalid(format!("positions ({p}, {p1}) are not adjacent")));
                }
                let (a, b) = (layout[p], layout[p1]);
                if (a.min(b), a.max(b)) != pair {
                    return Err(invalid(format!("layer records {pair:?} at ({p}, {p1})")));
                }
                if !seen.insert(pair) {
                    return Err(invalid(format!("pair {pair:?} meets twice")));
                }
                if layer.swap {
                    layout.swap(p, p1);
                }
            }
        }
        let all = self.n * (self.n - 1) / 2;
        if seen.len() != all {
            return Err(invalid(format!("{} of {all} pairs met", seen.len())));
        }
        Ok(())
    }
}

/// Odd-even transposition network. The first layer's swaps are folded into
/// the initial layout and the last layer needs none, leaving `n - 2` SWAP
/// layers for `n >= 3`.
pub fn linear_swap_schedule(n: usize) -> Result<SwapSchedule> {
    if n < 2 {
        return Err(invalid(format!("swap schedule needs at least 2 qubits, got {n}")));
    }
    let mut layout: Vec<usize> = (0..n).collect();
    let mut raw = Vec::new();
    for t in 0..n {
        let positions: Vec<(usize, usize)> =
            (t % 2..n - 1).step_by(2).map(|p| (p, p + 1)).collect();
        if positions.is_empty() {
            continue;
        }
        let logical = positions
            .iter()
            .map(|&(p, q)| (layout[p].min(layout[q]), layout[p].max(layout[q])))
            .collect();
        for &(p, q) in &positions {
            layout.swap(p, q);
        }
        raw.push((positions, logical));
    }
    let mut initial_layout: Vec<usize> = (0..n).collect();
    for &(p, q) in &raw[0].0 {
        initial_layout.swap(p, q);
    }
    let last = raw.len() - 1;
    let layers = raw
        .into_iter()
        .enumerate()
        .map(|(k, (positions, logical))| SwapLayer {
            positions,
            logical,
            swap: k != 0 && k != last,
        })
        .collect();
    Ok(SwapSchedule { n, initial_layout, layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Linear,
    AllToAll,
}

impl FromStr for Connectivity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "linear" => Ok(Connectivity::Linear),
            "all_to_all" | "all" | "full" => Ok(Connectivity::AllToAll),
            _ => Err(invalid(format!("unknown connectivity {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub kind: AnsatzKind,
    pub n: usize,
    pub layers: usize,
    pub connectivity: Connectivity,
    pub cnot_count: u64,
    pub cnot_depth: u64,
    pub param_count: u64,
}

/// Two-qubit gate counts on a complete-graph instance. SIA blocks are SO(4)
/// gates at two CNOTs each; on a line they ride an odd-even SWAP network.
/// Baselines count `(n-1)^2` per layer. Multi-layer counts scale linearly.
pub fn resource_estimate(
    kind: AnsatzKind,
    n: usize,
    layers: usize,
    connectivity: Connectivity,
) -> Result<ResourceEstimate> {
    check_size(n, layers)?;
    let (nn, l) = (n as u64, layers as u64);
    let edges = nn * (nn - 1) / 2;
    let (count, depth) = match (kind, connectivity) {
        (AnsatzKind::SiaYz | AnsatzKind::SiaYzY, Connectivity::Linear) => {
            ((3 * nn - 2) * (nn - 1) / 2, 3 * nn - 2)
        }
        (AnsatzKind::SiaYz | AnsatzKind::SiaYzY, Connectivity::AllToAll) => {
            (nn * (nn - 1), 2 * nn)
        }
        (AnsatzKind::HeaLinearCnot, _) => ((nn - 1) * (nn - 1), (nn - 1) * (nn - 1)),
        (AnsatzKind::HeaParallelCz, _) => ((nn - 1) * (nn - 1), (nn - 1) * (nn - 1).min(2)),
        (AnsatzKind::Product, _) => (0, 0),
    };
    let params = match kind {
        AnsatzKind::SiaYz => nn + 2 * edges,
        AnsatzKind::SiaYzY => nn + 4 * edges,
        _ => nn * nn,
    };
    Ok(ResourceEstimate {
        kind,
        n,
        layers,
        connectivity,
        cnot_count: count * l,
        cnot_depth: depth * l,
        param_count: params * l,
    })
}
