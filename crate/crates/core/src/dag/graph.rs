use std::fmt;

use serde::{Deserialize, Serialize};

/// Node types. Patch and modulation indices are 0-based here and print
/// 1-based (`p1`, `m1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    Uf,
    Sc,
    Ic,
    Dt,
    Dx,
    Add,
    Mul,
    Neg,
    Square,
    Eq0,
    Patch(u16),
    Modulation(u16),
}

/// Number of non-auxiliary node types.
pub const BASE_TYPES: usize = 10;

impl NodeType {
    /// Index into a type-embedding table of `BASE_TYPES + n_patch + n_mod`
    /// rows.
    pub fn vocab_index(self, n_patch: usize) -> usize {
        match self {
            NodeType::Uf => 0,
            NodeType::Sc => 1,
            NodeType::Ic => 2,
            NodeType::Dt => 3,
            NodeType::Dx => 4,
            NodeType::Add => 5,
            NodeType::Mul => 6,
            NodeType::Neg => 7,
            NodeType::Square => 8,
            NodeType::Eq0 => 9,
            NodeType::Patch(i) => BASE_TYPES + i as usize,
            NodeType::Modulation(l) => BASE_TYPES + n_patch + l as usize,
        }
    }

    pub fn is_auxiliary(self) -> bool {
        matches!(self, NodeType::Patch(_) | NodeType::Modulation(_))
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeType::Uf => write!(f, "UF"),
            NodeType::Sc => write!(f, "SC"),
            NodeType::Ic => write!(f, "IC"),
            NodeType::Dt => write!(f, "dt"),
            NodeType::Dx => write!(f, "dx"),
            NodeType::Add => write!(f, "add"),
            NodeType::Mul => write!(f, "mul"),
            NodeType::Neg => write!(f, "neg"),
            NodeType::Square => write!(f, "square"),
            NodeType::Eq0 => write!(f, "eq0"),
            NodeType::Patch(i) => write!(f, "p{}", i + 1),
            NodeType::Modulation(l) => write!(f, "m{}", l + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub ty: NodeType,
    pub feature: Vec<f32>,
}

/// A typed DAG with per-node features. Node ids are indices into `nodes`;
/// edges point from operand to operation and may repeat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
    pub d_f: usize,
    pub n_patch: usize,
    pub n_mod: usize,
}

impl PdeGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        BASE_TYPES + self.n_patch + self.n_mod
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.len()];
        for &(_, t) in &self.edges {
            d[t] += 1;
        }
        d
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.len()];
        for &(s, _) in &self.edges {
            d[s] += 1;
        }
        d
    }

    /// Successor lists, one entry per edge.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for &(s, t) in &self.edges {
            adj[s].push(t);
        }
        adj
    }

    pub fn count(&self, ty: NodeType) -> usize {
        self.nodes.iter().filter(|n| n.ty == ty).count()
    }

    /// Nodes that are neither patch nor modulation nodes.
    pub fn core_len(&self) -> usize {
        self.nodes.iter().filter(|n| !n.ty.is_auxiliary()).count()
    }

    /// Ids of all `Modulation` nodes in `m1..mL` order.
    pub fn modulation_ids(&self) -> Vec<usize> {
        let mut ids: Vec<(u16, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.ty {
                NodeType::Modulation(l) => Some((l, i)),
                _ => None,
            })
            .collect();
        ids.sort_unstable();
        ids.into_iter().map(|(_, i)| i).collect()
    }

    /// Kahn's algorithm; `None` when there is a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let adj = self.successors();
        let mut indeg = self.in_degrees();
        let mut ready: Vec<usize> = (0..self.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(v) = ready.pop() {
            order.push(v);
            for &w in &adj[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(w);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> PdeGraph {
        assert_eq!(perm.len(), self.len());
        let mut nodes = vec![None; self.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            nodes[perm[i]] = Some(n.clone());
        }
        PdeGraph {
            nodes: nodes.into_iter().map(|n| n.expect("perm is not a permutation")).collect(),
            edges: self.edges.iter().map(|&(s, t)| (perm[s], perm[t])).collect(),
            d_f: self.d_f,
            n_patch: self.n_patch,
            n_mod: self.n_mod,
        }
    }

    /// Structural invariants of a compiled graph; empty when all hold.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if !self.is_acyclic() {
            bad.push("graph has a cycle".to_string());
        }
        let mut core_in = vec![0usize; self.len()];
        let mut aux_in = vec![Vec::new(); self.len()];
        let mut out = vec![Vec::new(); self.len()];
        for &(s, t) in &self.edges {
            if self.nodes[s].ty.is_auxiliary() {
                aux_in[t].push(s);
            } else {
                core_in[t] += 1;
            }
            out[s].push(t);
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.feature.len() != self.d_f {
                bad.push(format!("node {i} has feature width {}", n.feature.len()));
            }
            let d = core_in[i];
            let ok = match n.ty {
                NodeType::Uf | NodeType::Sc => d == 0,
                NodeType::Add | NodeType::Mul => d >= 2,
                NodeType::Patch(_) => {
                    d == 1 && self.edges.iter().any(|&(s, t)| t == i && self.nodes[s].ty == NodeType::Ic)
                }
                NodeType::Modulation(_) => d == 0,
                _ => d == 1,
            };
            if !ok {
                bad.push(format!("node {i} ({}) has in-degree {d}", n.ty));
            }
            match n.ty {
                NodeType::Modulation(_) => {
                    if out[i].len() != 1 || self.nodes[out[i][0]].ty != NodeType::Uf {
                        bad.push(format!("node {i} ({}) must have one edge to UF", n.ty));
                    }
                }
                NodeType::Sc => {
                    if n.feature.iter().any(|&v| v.to_bits() != n.feature[0].to_bits()) {
                        bad.push(format!("node {i} (SC) feature is not constant"));
                    }
                }
                NodeType::Patch(_) => {}
                _ => {
                    if n.feature.iter().any(|&v| v != 0.0) {
                        bad.push(format!("node {i} ({}) has a nonzero feature", n.ty));
                    }
                }
            }
            if !aux_in[i].is_empty() && n.ty != NodeType::Uf {
                bad.push(format!("node {i} ({}) receives an auxiliary edge", n.ty));
            }
        }
        bad
    }
}
