use sha2::{Digest, Sha256};

use super::{NodeType, PdeGraph};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForm {
    pub bytes: Vec<u8>,
    pub hash: u64,
    /// `order[k]` is the node placed at canonical position `k`.
    pub order: Vec<usize>,
}

/// A labelling-independent encoding of a typed DAG.
///
/// Colour refinement over (type, degrees, feature bits) and neighbour colour
/// multisets, followed by individualization of the first non-singleton cell
/// whenever refinement stalls. Every leaf of that search is a complete
/// relabelling; the lexicographically smallest encoding wins, so two graphs
/// share bytes exactly when they are isomorphic.
pub fn canonical_form(g: &PdeGraph) -> CanonicalForm {
    let n = g.len();
    let mut ins = vec![Vec::new(); n];
    let mut outs = vec![Vec::new(); n];
    for &(s, t) in &g.edges {
        outs[s].push(t);
        ins[t].push(s);
    }
    let (indeg, outdeg) = (g.in_degrees(), g.out_degrees());
    let keys: Vec<(NodeType, usize, usize, Vec<u32>)> = (0..n)
        .map(|i| (g.nodes[i].ty, indeg[i], outdeg[i], g.nodes[i].feature.iter().map(|v| v.to_bits()).collect()))
        .collect();
    let colors = rank(&keys);
    let mut search = Search { g, ins, outs, best: None };
    search.run(colors);
    let (bytes, order) = search.best.unwrap_or_default();
    let digest = Sha256::digest(&bytes);
    let hash = u64::from_le_bytes(digest[..8].try_into().unwrap());
    CanonicalForm { bytes, hash, order }
}

/// Dense ranks of `keys` in sorted order.
fn rank<K: Ord>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<&K> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    keys.iter().map(|k| sorted.binary_search(&k).unwrap() as u32).collect()
}

fn distinct(colors: &[u32]) -> usize {
    colors.iter().copied().max().map_or(0, |m| m as usize + 1)
}

struct Search<'a> {
    g: &'a PdeGraph,
    ins: Vec<Vec<usize>>,
    outs: Vec<Vec<usize>>,
    best: Option<(Vec<u8>, Vec<usize>)>,
}

impl Search<'_> {
    fn refine(&self, mut colors: Vec<u32>) -> Vec<u32> {
        loop {
            let keys: Vec<(u32, Vec<u32>, Vec<u32>)> = (0..colors.len())
                .map(|i| {
                    let mut a: Vec<u32> = self.ins[i].iter().map(|&j| colors[j]).collect();
                    let mut b: Vec<u32> = self.outs[i].iter().map(|&j| colors[j]).collect();
                    a.sort_unstable();
                    b.sort_unstable();
                    (colors[i], a, b)
                })
                .collect();
            let next = rank(&keys);
            if distinct(&next) == distinct(&colors) {
                return next;
            }
            colors = next;
        }
    }

    fn run(&mut self, colors: Vec<u32>) {
        let colors = self.refine(colors);
        let n = colors.len();
        if distinct(&colors) == n {
            let mut order = vec![0; n];
            for (i, &c) in colors.iter().enumerate() {
                order[c as usize] = i;
            }
            let bytes = encode(self.g, &order);
            if self.best.as_ref().map_or(true, |(b, _)| bytes < *b) {
                self.best = Some((bytes, order));
            }
            return;
        }
        let mut size = vec![0usize; n];
        for &c in &colors {
            size[c as usize] += 1;
        }
        let target = (0..n).find(|&c| size[c] > 1).unwrap() as u32;
        let cell: Vec<usize> = (0..n).filter(|&i| colors[i] == target).collect();
        for &v in &cell {
            let keys: Vec<(u32, bool)> = (0..n).map(|i| (colors[i], colors[i] == target && i != v)).collect();
            self.run(rank(&keys));
        }
    }
}

fn encode(g: &PdeGraph, order: &[usize]) -> Vec<u8> {
    let mut pos = vec![0u32; order.len()];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k as u32;
    }
    let mut out = b"PDAG1".to_vec();
    for v in [order.len(), g.d_f, g.n_patch, g.n_mod] {
        out.extend((v as u32).to_le_bytes());
    }
    for &i in order {
        let node = &g.nodes[i];
        out.extend(type_code(node.ty).to_le_bytes());
        for v in &node.feature {
            out.extend(v.to_bits().to_le_bytes());
        }
    }
    let mut edges: Vec<(u32, u32)> = g.edges.iter().map(|&(s, t)| (pos[s], pos[t])).collect();
    edges.sort_unstable();
    out.extend((edges.len() as u32).to_le_bytes());
    for (s, t) in edges {
        out.extend(s.to_le_bytes());
        out.extend(t.to_le_bytes());
    }
    out
}

fn type_code(ty: NodeType) -> u32 {
    match ty {
        NodeType::Patch(i) => 0x1_0000 + i as u32,
        NodeType::Modulation(l) => 0x2_0000 + l as u32,
        base => base.vocab_index(0) as u32,
    }
}
