use super::PdeGraph;

/// Longest representable shortest-path length; unreachable pairs also get it.
pub const PHI_CAP: u8 = 14;

/// Directed shortest-path lengths, clamped to [`PHI_CAP`]. Floyd-Warshall;
/// graphs here have at most a few hundred nodes.
pub fn shortest_paths(g: &PdeGraph) -> Vec<Vec<u8>> {
    let n = g.len();
    let inf = u32::MAX / 2;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(s, t) in &g.edges {
        if s != t {
            d[s][t] = 1;
        }
    }
    for k in 0..n {
        let dk = d[k].clone();
        for row in d.iter_mut() {
            let dik = row[k];
            if dik >= inf {
                continue;
            }
            for (dij, &dkj) in row.iter_mut().zip(&dk) {
                let via = dik + dkj;
                if via < *dij {
                    *dij = via;
                }
            }
        }
    }
    d.into_iter().map(|row| row.into_iter().map(|v| v.min(PHI_CAP as u32) as u8).collect()).collect()
}

/// `reach[i][j]`: a directed path `i -> j` exists (including `i == j`).
pub fn reachability(g: &PdeGraph) -> Vec<Vec<bool>> {
    let n = g.len();
    let adj = g.successors();
    let mut reach = vec![vec![false; n]; n];
    for (s, row) in reach.iter_mut().enumerate() {
        let mut stack = vec![s];
        row[s] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !row[w] {
                    row[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    reach
}

/// `0` where a path runs between the two nodes in either direction,
/// `-inf` elsewhere.
pub fn connectivity_mask(g: &PdeGraph) -> Vec<Vec<f32>> {
    let reach = reachability(g);
    let n = g.len();
    (0..n)
        .map(|i| (0..n).map(|j| if reach[i][j] || reach[j][i] { 0.0 } else { f32::NEG_INFINITY }).collect())
        .collect()
}

/// Everything the encoder needs about graph structure.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphFeatures {
    pub phi: Vec<Vec<u8>>,
    pub mask: Vec<Vec<f32>>,
    pub indeg: Vec<usize>,
    pub outdeg: Vec<usize>,
}

impl GraphFeatures {
    pub fn of(g: &PdeGraph) -> Self {
        Self { phi: shortest_paths(g), mask: connectivity_mask(g), indeg: g.in_degrees(), outdeg: g.out_degrees() }
    }
}
