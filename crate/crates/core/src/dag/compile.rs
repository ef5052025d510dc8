use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{expand_power, Node, NodeType, PdeGraph, PowerTree};
use crate::ir::{validate_ast, Expr, PdeAst, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub d_f: usize,
    pub n_patch: usize,
    pub n_mod: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { d_f: 16, n_patch: 16, n_mod: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("initial condition has {n_x} values, expected N * d_f = {expected}")]
    BadGridSize { n_x: usize, expected: usize },
    #[error("invalid PDE: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidAst(Vec<Violation>),
    #[error("every term of the PDE has a zero coefficient")]
    AllTermsZero,
}

/// Lowers a PDE and its discretized initial condition to a typed DAG.
///
/// Identical subexpressions become one node, coefficients with the same name
/// are one `SC` node, and terms with a zero coefficient are dropped first.
pub fn compile(ast: &PdeAst, ic_values: &[f64], config: &GraphConfig) -> Result<PdeGraph, CompileError> {
    let expected = config.n_patch * config.d_f;
    if ic_values.len() != expected {
        return Err(CompileError::BadGridSize { n_x: ic_values.len(), expected });
    }
    let report = validate_ast(ast);
    if !report.is_empty() {
        return Err(CompileError::InvalidAst(report));
    }
    let root = drop_zero_terms(&ast.root).ok_or(CompileError::AllTermsZero)?;
    let mut b = Builder { g: empty(config), memo: HashMap::new(), coefs: HashMap::new(), uf: None };
    let top = b.lower(&root);
    debug_assert_eq!(b.g.nodes[top].ty, NodeType::Eq0);
    let uf = b.uf.expect("validated AST has an unknown");

    let ic = b.push(NodeType::Ic, zeros(config.d_f));
    b.g.edges.push((uf, ic));
    for (i, patch) in ic_values.chunks(config.d_f).enumerate() {
        let p = b.push(NodeType::Patch(i as u16), patch.iter().map(|&v| v as f32).collect());
        b.g.edges.push((ic, p));
    }
    for l in 0..config.n_mod {
        let m = b.push(NodeType::Modulation(l as u16), zeros(config.d_f));
        b.g.edges.push((m, uf));
    }
    Ok(b.g)
}

fn empty(config: &GraphConfig) -> PdeGraph {
    PdeGraph { nodes: Vec::new(), edges: Vec::new(), d_f: config.d_f, n_patch: config.n_patch, n_mod: config.n_mod }
}

fn zeros(n: usize) -> Vec<f32> {
    vec![0.0; n]
}

/// `None` when `e` is identically zero because of a zero coefficient.
fn drop_zero_terms(e: &Expr) -> Option<Expr> {
    Some(match e {
        Expr::Coef { value: Some(v), .. } if *v == 0.0 => return None,
        Expr::Var(_) | Expr::Coef { .. } => e.clone(),
        Expr::Dt(c) => Expr::dt(drop_zero_terms(c)?),
        Expr::Dx(c) => Expr::dx(drop_zero_terms(c)?),
        Expr::Neg(c) => Expr::neg(drop_zero_terms(c)?),
        Expr::Square(c) => Expr::square(drop_zero_terms(c)?),
        Expr::Pow(c, k) => Expr::pow(drop_zero_terms(c)?, *k),
        Expr::Eq0(c) => Expr::eq0(drop_zero_terms(c)?),
        Expr::Mul(cs) => Expr::Mul(cs.iter().map(drop_zero_terms).collect::<Option<_>>()?),
        Expr::Add(cs) => {
            let mut kept: Vec<Expr> = cs.iter().filter_map(drop_zero_terms).collect();
            match kept.len() {
                0 => return None,
                1 => kept.pop().unwrap(),
                _ => Expr::Add(kept),
            }
        }
    })
}

struct Builder {
    g: PdeGraph,
    /// (type, sorted operand ids) -> node, for operator nodes.
    memo: HashMap<(NodeType, Vec<usize>), usize>,
    coefs: HashMap<String, usize>,
    uf: Option<usize>,
}

impl Builder {
    fn push(&mut self, ty: NodeType, feature: Vec<f32>) -> usize {
        self.g.nodes.push(Node { ty, feature });
        self.g.nodes.len() - 1
    }

    fn op(&mut self, ty: NodeType, mut operands: Vec<usize>) -> usize {
        operands.sort_unstable();
        if let Some(&id) = self.memo.get(&(ty, operands.clone())) {
            return id;
        }
        let id = self.push(ty, zeros(self.g.d_f));
        self.g.edges.extend(operands.iter().map(|&s| (s, id)));
        self.memo.insert((ty, operands), id);
        id
    }

    fn lower(&mut self, e: &Expr) -> usize {
        match e {
            Expr::Var(_) => match self.uf {
                Some(id) => id,
                None => {
                    let id = self.push(NodeType::Uf, zeros(self.g.d_f));
                    self.uf = Some(id);
                    id
                }
            },
            Expr::Coef { name, value } => {
                if let Some(&id) = self.coefs.get(name) {
                    return id;
                }
                let v = value.expect("validated AST has bound coefficients") as f32;
                let id = self.push(NodeType::Sc, vec![v; self.g.d_f]);
                self.coefs.insert(name.clone(), id);
                id
            }
            Expr::Dt(c) => self.unary(NodeType::Dt, c),
            Expr::Dx(c) => self.unary(NodeType::Dx, c),
            Expr::Neg(c) => self.unary(NodeType::Neg, c),
            Expr::Square(c) => self.unary(NodeType::Square, c),
            Expr::Eq0(c) => self.unary(NodeType::Eq0, c),
            Expr::Add(cs) => self.nary(NodeType::Add, cs),
            Expr::Mul(cs) => self.nary(NodeType::Mul, cs),
            Expr::Pow(c, k) => {
                let base = self.lower(c);
                self.power(&expand_power(*k), base)
            }
        }
    }

    fn unary(&mut self, ty: NodeType, c: &Expr) -> usize {
        let id = self.lower(c);
        self.op(ty, vec![id])
    }

    fn nary(&mut self, ty: NodeType, cs: &[Expr]) -> usize {
        let ids = cs.iter().map(|c| self.lower(c)).collect();
        self.op(ty, ids)
    }

    fn power(&mut self, t: &PowerTree, base: usize) -> usize {
        match t {
            PowerTree::Base => base,
            PowerTree::Square(inner) => {
                let id = self.power(inner, base);
                self.op(NodeType::Square, vec![id])
            }
            PowerTree::Mul(ts) => {
                let ids = ts.iter().map(|t| self.power(t, base)).collect();
                self.op(NodeType::Mul, ids)
            }
        }
    }
}
