use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::random::{random_dag, random_pde};
use super::*;
use crate::ir::{coef_table, parse_pde, Expr, PdeAst};

fn cfg() -> GraphConfig {
    GraphConfig::default()
}

fn ic() -> Vec<f64> {
    (0..256).map(|i| (i as f64 * 0.1).sin()).collect()
}

fn parse(text: &str, coefs: &[(&str, f64)]) -> PdeAst {
    parse_pde(text, &coef_table(coefs.iter().copied())).unwrap()
}

fn advection() -> PdeGraph {
    compile(&parse("dt(u) + c*dx(u) = 0", &[("c", 0.4)]), &ic(), &cfg()).unwrap()
}

fn types(g: &PdeGraph) -> Vec<String> {
    g.nodes.iter().map(|n| n.ty.to_string()).collect()
}

#[test]
fn advection_graph() {
    let g = advection();
    assert_eq!(g.core_len(), 8);
    assert_eq!(g.len(), 8 + 16 + 8);
    for ty in ["UF", "SC", "IC", "dt", "dx", "mul", "add", "eq0"] {
        assert_eq!(types(&g).iter().filter(|t| *t == ty).count(), 1, "{ty}");
    }
    assert!(g.check_invariants().is_empty(), "{:?}", g.check_invariants());
    let sc = g.nodes.iter().find(|n| n.ty == NodeType::Sc).unwrap();
    assert_eq!(sc.feature, vec![0.4f32; 16]);
    let p3 = g.nodes.iter().find(|n| n.ty == NodeType::Patch(2)).unwrap();
    let want: Vec<f32> = ic()[32..48].iter().map(|&v| v as f32).collect();
    assert_eq!(p3.feature, want);
    assert_eq!(g.modulation_ids().len(), 8);
}

#[test]
fn pure_time_derivative() {
    let g = compile(&parse("dt(u) = 0", &[]), &ic(), &cfg()).unwrap();
    assert_eq!(&types(&g)[..4], ["UF", "dt", "eq0", "IC"]);
    assert_eq!(&g.edges[..3], [(0, 1), (1, 2), (0, 3)]);
    assert!(g.check_invariants().is_empty());
}

/// Lowered by hand from `dt(u) + dx(c*u^2) - nu*dx(dx(u)) = 0`.
#[test]
fn burgers_graph_matches_hand_lowering() {
    let ast = parse("dt(u) + dx(c*u^2) - nu*dxx(u) = 0", &[("c", 1.0), ("nu", 0.01)]);
    let g = compile(&ast, &ic(), &cfg()).unwrap();
    let want = ["UF", "dt", "SC", "square", "mul", "dx", "SC", "dx", "dx", "mul", "neg", "add", "eq0", "IC"];
    assert_eq!(&types(&g)[..14], want);
    let want_edges = [
        (0, 1),
        (0, 3),
        (2, 4),
        (3, 4),
        (4, 5),
        (0, 7),
        (7, 8),
        (6, 9),
        (8, 9),
        (9, 10),
        (1, 11),
        (5, 11),
        (10, 11),
        (11, 12),
        (0, 13),
    ];
    assert_eq!(&g.edges[..want_edges.len()], want_edges);
    assert_eq!(g.count(NodeType::Square), 1);
    assert!(g.check_invariants().is_empty());
}

#[test]
fn shared_subexpressions_and_coefficients() {
    let g = compile(&parse("dt(u) + a*dx(u) + a*dx(u)^2 = 0", &[("a", 2.0)]), &ic(), &cfg()).unwrap();
    assert_eq!(g.count(NodeType::Uf), 1);
    assert_eq!(g.count(NodeType::Sc), 1);
    assert_eq!(g.count(NodeType::Dx), 1);
}

#[test]
fn high_powers_share_square_chains() {
    let g = compile(&parse("dt(u) + u^11 = 0", &[]), &ic(), &cfg()).unwrap();
    assert_eq!(g.count(NodeType::Square), 3);
    assert_eq!(g.count(NodeType::Mul), 1);
    assert!(g.check_invariants().is_empty());
}

#[test]
fn zero_terms_dropped() {
    let with_zero = parse("dt(u) + a*u^2 + b*dx(u) = 0", &[("a", 0.0), ("b", 0.3)]);
    let without = parse("dt(u) + b*dx(u) = 0", &[("b", 0.3)]);
    let (g1, g2) = (compile(&with_zero, &ic(), &cfg()).unwrap(), compile(&without, &ic(), &cfg()).unwrap());
    assert_eq!(g1, g2);
    let all_zero = PdeAst::new(Expr::eq0(Expr::dt(Expr::Mul(vec![Expr::coef("a", 0.0), Expr::var("u")]))));
    assert_eq!(compile(&all_zero, &ic(), &cfg()), Err(CompileError::AllTermsZero));
}

#[test]
fn errors() {
    let ast = parse("dt(u) = 0", &[]);
    assert_eq!(compile(&ast, &[0.0; 100], &cfg()), Err(CompileError::BadGridSize { n_x: 100, expected: 256 }));
    let unbound = parse_pde("dt(u) + c*u = 0", &[("c".to_string(), None)].into_iter().collect()).unwrap();
    assert!(matches!(compile(&unbound, &ic(), &cfg()), Err(CompileError::InvalidAst(_))));
}

#[test]
fn fuzzed_pdes_compile_to_valid_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let ast = random_pde(&mut rng, 4);
        let g = match compile(&ast, &ic(), &cfg()) {
            Ok(g) => g,
            Err(e) => panic!("{ast}: {e}"),
        };
        assert!(g.is_acyclic());
        assert!(g.check_invariants().is_empty(), "{ast}: {:?}", g.check_invariants());
        assert_eq!(compile(&ast, &ic(), &cfg()).unwrap(), g);
    }
}

fn bfs_oracle(g: &PdeGraph) -> Vec<Vec<u8>> {
    let adj = g.successors();
    (0..g.len())
        .map(|s| {
            let mut d = vec![usize::MAX; g.len()];
            d[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for &w in &adj[v] {
                    if d[w] == usize::MAX {
                        d[w] = d[v] + 1;
                        q.push_back(w);
                    }
                }
            }
            d.into_iter().map(|x| x.min(14) as u8).collect()
        })
        .collect()
}

fn chain(n: usize) -> PdeGraph {
    let mut g = random_dag(&mut ChaCha8Rng::seed_from_u64(0), n, 0.0);
    g.edges = (1..n).map(|i| (i - 1, i)).collect();
    g
}

#[test]
fn shortest_paths_on_chains() {
    let phi = shortest_paths(&chain(3));
    assert_eq!(phi[0][2], 2);
    assert_eq!(phi[2][0], 14);
    assert!((0..3).all(|i| phi[i][i] == 0));
    let long = shortest_paths(&chain(21));
    assert_eq!(long[0][13], 13);
    assert_eq!(long[0][14], 14);
    assert_eq!(long[0][20], 14);
}

#[test]
fn shortest_paths_match_bfs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.random_range(1..=64);
        let p = rng.random_range(0.02..0.3);
        let g = random_dag(&mut rng, n, p);
        assert_eq!(shortest_paths(&g), bfs_oracle(&g));
    }
}

#[test]
fn mask_rules() {
    let mut two = chain(6);
    two.edges = vec![(0, 1), (1, 2), (3, 4), (4, 5)];
    let m = connectivity_mask(&two);
    for i in 0..3 {
        for j in 3..6 {
            assert_eq!(m[i][j], f32::NEG_INFINITY);
            assert_eq!(m[j][i], f32::NEG_INFINITY);
        }
    }
    assert_eq!((m[0][2], m[2][0]), (0.0, 0.0));
    let mut full = chain(5);
    full.edges = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
    assert!(connectivity_mask(&full).iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn compiled_graphs_are_connected() {
    let g = advection();
    assert!(connectivity_mask(&g).iter().flatten().any(|v| v.is_infinite()));
    let f = GraphFeatures::of(&g);
    for (j, n) in g.nodes.iter().enumerate() {
        assert_eq!(f.mask[0][j] == 0.0, n.ty != NodeType::Sc, "{}", n.ty);
    }
}

fn random_perm(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

#[test]
fn canonical_form_symbol_and_order_invariance() {
    let a = compile(&parse("dt(u) + c*dx(u) = 0", &[("c", 0.4)]), &ic(), &cfg()).unwrap();
    let b = compile(&parse("b*dx(v) + dt(v) = 0", &[("b", 0.4)]), &ic(), &cfg()).unwrap();
    assert_eq!(canonical_form(&a).bytes, canonical_form(&b).bytes);
    let burgers = compile(&parse("dt(u) + dx(c*u^2) = 0", &[("c", 0.4)]), &ic(), &cfg()).unwrap();
    assert_ne!(canonical_form(&a).hash, canonical_form(&burgers).hash);
    let other_value = compile(&parse("dt(u) + c*dx(u) = 0", &[("c", 0.5)]), &ic(), &cfg()).unwrap();
    assert_ne!(canonical_form(&a).hash, canonical_form(&other_value).hash);
}

#[test]
fn canonical_form_invariant_under_relabelling_and_child_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let ast = random_pde(&mut rng, 4);
        let g = compile(&ast, &ic(), &cfg()).unwrap();
        let c = canonical_form(&g);
        let p = random_perm(&mut rng, g.len());
        assert_eq!(canonical_form(&g.permuted(&p)).bytes, c.bytes);
        let mut root = ast.root.clone();
        shuffle_children(&mut root, &mut rng);
        let g2 = compile(&PdeAst::new(root), &ic(), &cfg()).unwrap();
        assert_eq!(canonical_form(&g2).bytes, c.bytes);
        assert_eq!(g.permuted(&inverse(&c.order)).nodes, canonical_order_nodes(&g, &c));
    }
}

fn inverse(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (k, &i) in order.iter().enumerate() {
        inv[i] = k;
    }
    inv
}

fn canonical_order_nodes(g: &PdeGraph, c: &CanonicalForm) -> Vec<Node> {
    c.order.iter().map(|&i| g.nodes[i].clone()).collect()
}

fn shuffle_children(e: &mut Expr, rng: &mut impl Rng) {
    match e {
        Expr::Add(cs) | Expr::Mul(cs) => {
            cs.shuffle(rng);
            cs.iter_mut().for_each(|c| shuffle_children(c, rng));
        }
        Expr::Dt(c) | Expr::Dx(c) | Expr::Neg(c) | Expr::Square(c) | Expr::Pow(c, _) | Expr::Eq0(c) => {
            shuffle_children(c, rng)
        }
        _ => {}
    }
}

fn edge_multiset(g: &PdeGraph, perm: &[usize]) -> Vec<(usize, usize)> {
    let mut e: Vec<_> = g.edges.iter().map(|&(s, t)| (perm[s], perm[t])).collect();
    e.sort_unstable();
    e
}

fn brute_isomorphic(a: &PdeGraph, b: &PdeGraph) -> bool {
    if a.len() != b.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    let target = edge_multiset(b, &(0..b.len()).collect::<Vec<_>>());
    let mut perm: Vec<usize> = (0..a.len()).collect();
    permutations(&mut perm, 0, &mut |p| {
        (0..a.len()).all(|i| a.nodes[i] == b.nodes[p[i]]) && edge_multiset(a, p) == target
    })
}

fn permutations(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
    if k == p.len() {
        return f(p);
    }
    for i in k..p.len() {
        p.swap(k, i);
        if permutations(p, k + 1, f) {
            p.swap(k, i);
            return true;
        }
        p.swap(k, i);
    }
    false
}

/// Small typed graphs drawn from few types so that symmetric cells and
/// near-miss pairs are common.
fn small_graph(rng: &mut impl Rng, n: usize) -> PdeGraph {
    let mut g = random_dag(rng, n, 0.35);
    for node in &mut g.nodes {
        node.ty = [NodeType::Sc, NodeType::Add, NodeType::Mul][rng.random_range(0..3)];
    }
    g
}

#[test]
fn canonical_form_agrees_with_brute_force_isomorphism() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut iso = 0;
    for _ in 0..400 {
        let n = rng.random_range(1..=7);
        let a = small_graph(&mut rng, n);
        let b = match rng.random_range(0..3) {
            0 => a.permuted(&random_perm(&mut rng, n)),
            1 => {
                let mut b = a.clone();
                if let Some(e) = b.edges.pop() {
                    let s = rng.random_range(0..n);
                    let t = rng.random_range(0..n);
                    if s < t {
                        b.edges.push((s, t));
                    } else {
                        b.edges.push(e);
                    }
                }
                b.permuted(&random_perm(&mut rng, n))
            }
            _ => small_graph(&mut rng, n),
        };
        let same = brute_isomorphic(&a, &b);
        iso += same as usize;
        assert_eq!(canonical_form(&a).bytes == canonical_form(&b).bytes, same);
    }
    assert!(iso > 100);
}

#[test]
fn json_export_marks_masked_entries_null() {
    let v = graph_json(&advection());
    let mask = v["mask"].as_array().unwrap();
    assert!(mask.iter().flat_map(|r| r.as_array().unwrap()).any(|x| x.is_null()));
    assert_eq!(v["nodes"][0]["type"], "UF");
    assert_eq!(v["phi"][0][0], 0);
}
