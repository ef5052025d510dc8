//! Lowering of PDE expressions to typed computational DAGs, with the
//! structural features the graph encoder consumes.
//!
//! ```
//! use graphpde::dag::{canonical_form, compile, GraphConfig};
//! use graphpde::ir::{coef_table, parse_pde};
//!
//! let cfg = GraphConfig::default();
//! let ic = vec![0.0; 256];
//! let a = parse_pde("dt(u) + c*dx(u) = 0", &coef_table([("c", 0.4)])).unwrap();
//! let b = parse_pde("b*dx(v) + dt(v) = 0", &coef_table([("b", 0.4)])).unwrap();
//! let (ga, gb) = (compile(&a, &ic, &cfg).unwrap(), compile(&b, &ic, &cfg).unwrap());
//! assert_eq!(ga.core_len(), 8);
//! assert_eq!(canonical_form(&ga).hash, canonical_form(&gb).hash);
//! ```

mod canon;
mod compile;
mod graph;
mod paths;
mod power;
pub mod random;

pub use canon::{canonical_form, CanonicalForm};
pub use compile::{compile, CompileError, GraphConfig};
pub use graph::{Node, NodeType, PdeGraph, BASE_TYPES};
pub use paths::{connectivity_mask, reachability, shortest_paths, GraphFeatures, PHI_CAP};
pub use power::{expand_power, PowerTree};

use serde_json::{json, Value};

/// JSON view of a graph and its structural features. Masked entries of
/// `mask` are `null`, since JSON has no infinity.
pub fn graph_json(g: &PdeGraph) -> Value {
    let f = GraphFeatures::of(g);
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| json!({ "id": i, "type": n.ty.to_string(), "feature": n.feature }))
        .collect();
    let mask: Vec<Vec<Option<f32>>> =
        f.mask.iter().map(|row| row.iter().map(|&v| v.is_finite().then_some(v)).collect()).collect();
    json!({
        "format_version": 1,
        "d_f": g.d_f,
        "n_patch": g.n_patch,
        "n_mod": g.n_mod,
        "nodes": nodes,
        "edges": g.edges,
        "phi": f.phi,
        "mask": mask,
        "indeg": f.indeg,
        "outdeg": f.outdeg,
        "hash": format!("{:016x}", canonical_form(g).hash),
    })
}

#[cfg(test)]
mod tests;
