//! Random graphs and PDEs for property tests and fuzzing.

use rand::Rng;

use super::{Node, NodeType, PdeGraph};
use crate::ir::{Expr, PdeAst};

const OP_TYPES: [NodeType; 10] = [
    NodeType::Uf,
    NodeType::Sc,
    NodeType::Ic,
    NodeType::Dt,
    NodeType::Dx,
    NodeType::Add,
    NodeType::Mul,
    NodeType::Neg,
    NodeType::Square,
    NodeType::Eq0,
];

/// `n` nodes with random base types and zero features; each forward pair
/// `i < j` is an edge with probability `p`, so the result is acyclic.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, p: f64) -> PdeGraph {
    let nodes =
        (0..n).map(|_| Node { ty: OP_TYPES[rng.random_range(0..OP_TYPES.len())], feature: vec![0.0; 1] }).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    PdeGraph { nodes, edges, d_f: 1, n_patch: 0, n_mod: 0 }
}

/// A random valid PDE in `u`, `dt(u) + ... = 0`, with up to `max_terms`
/// extra terms. Coefficients are named `k0, k1, ...` and drawn from a few
/// values so that repeated values occur.
pub fn random_pde<R: Rng>(rng: &mut R, max_terms: usize) -> PdeAst {
    let mut next = 0;
    let mut terms = vec![Expr::dt(Expr::var("u"))];
    for _ in 0..rng.random_range(1..=max_terms.max(1)) {
        let t = random_expr(rng, 3, &mut next);
        terms.push(if rng.random_bool(0.3) { Expr::neg(t) } else { t });
    }
    PdeAst::new(Expr::eq0(Expr::Add(terms)))
}

fn random_expr<R: Rng>(rng: &mut R, depth: usize, next: &mut usize) -> Expr {
    let leaf = depth == 0 || rng.random_bool(0.25);
    if leaf {
        return if rng.random_bool(0.5) {
            Expr::var("u")
        } else {
            let name = format!("k{next}");
            *next += 1;
            Expr::coef(&name, [0.5, -1.0, 2.0][rng.random_range(0..3)])
        };
    }
    match rng.random_range(0..6) {
        0 => Expr::dx(random_expr(rng, depth - 1, next)),
        1 => Expr::square(random_expr(rng, depth - 1, next)),
        2 => Expr::pow(random_expr(rng, depth - 1, next), rng.random_range(1..12)),
        3 => Expr::Add(vec![random_expr(rng, depth - 1, next), random_expr(rng, depth - 1, next)]),
        _ => {
            let k = rng.random_range(2..4);
            Expr::Mul((0..k).map(|_| random_expr(rng, depth - 1, next)).collect())
        }
    }
}
