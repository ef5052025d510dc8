use std::fmt;

use super::{Expr, PdeAst};

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    RootNotEq0,
    Eq0NotRoot,
    TooFewOperands { op: &'static str, count: usize },
    ExponentBelowOne,
    NonFiniteCoefficient(String),
    UnboundCoefficient(String),
    MissingUnknown,
    MultipleUnknowns(Vec<String>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RootNotEq0 => write!(f, "root is not Eq0"),
            Violation::Eq0NotRoot => write!(f, "Eq0 not root"),
            Violation::TooFewOperands { op, count } => write!(f, "{op} has {count} operands, needs at least 2"),
            Violation::ExponentBelowOne => write!(f, "exponent < 1"),
            Violation::NonFiniteCoefficient(n) => write!(f, "coefficient `{n}` is not finite"),
            Violation::UnboundCoefficient(n) => write!(f, "coefficient `{n}` has no value"),
            Violation::MissingUnknown => write!(f, "no unknown field"),
            Violation::MultipleUnknowns(names) => write!(f, "multiple unknown fields: {}", names.join(", ")),
        }
    }
}

/// Violations of the AST invariants, in traversal order. Empty means valid.
pub type ValidationReport = Vec<Violation>;

/// Checks every structural invariant; never fails, only reports.
///
/// Pass `allow_unbound = true` to accept symbolic coefficient slots.
pub fn validate_with(ast: &PdeAst, allow_unbound: bool) -> ValidationReport {
    let mut report = Vec::new();
    if !matches!(ast.root, Expr::Eq0(_)) {
        report.push(Violation::RootNotEq0);
    }
    let mut unknowns: Vec<String> = Vec::new();
    let mut stack: Vec<(&Expr, bool)> = vec![(&ast.root, true)];
    while let Some((e, is_root)) = stack.pop() {
        match e {
            Expr::Eq0(_) if !is_root => report.push(Violation::Eq0NotRoot),
            Expr::Add(cs) if cs.len() < 2 => report.push(Violation::TooFewOperands { op: "Add", count: cs.len() }),
            Expr::Mul(cs) if cs.len() < 2 => report.push(Violation::TooFewOperands { op: "Mul", count: cs.len() }),
            Expr::Pow(_, k) if *k < 1 => report.push(Violation::ExponentBelowOne),
            Expr::Coef { name, value: Some(v) } if !v.is_finite() => {
                report.push(Violation::NonFiniteCoefficient(name.clone()))
            }
            Expr::Coef { name, value: None } if !allow_unbound => {
                report.push(Violation::UnboundCoefficient(name.clone()))
            }
            Expr::Var(n) if !unknowns.contains(n) => unknowns.push(n.clone()),
            _ => {}
        }
        for c in e.children().into_iter().rev() {
            stack.push((c, false));
        }
    }
    match unknowns.len() {
        0 => report.push(Violation::MissingUnknown),
        1 => {}
        _ => report.push(Violation::MultipleUnknowns(unknowns)),
    }
    report
}

/// [`validate_with`] requiring every coefficient to be bound.
pub fn validate_ast(ast: &PdeAst) -> ValidationReport {
    validate_with(ast, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> Expr {
        Expr::var("u")
    }

    #[test]
    fn valid_advection_is_clean() {
        let ast = PdeAst::new(Expr::eq0(Expr::Add(vec![
            Expr::dt(u()),
            Expr::Mul(vec![Expr::coef("c", 1.0), Expr::dx(u())]),
        ])));
        assert!(validate_ast(&ast).is_empty());
    }

    #[test]
    fn nested_eq0() {
        let ast = PdeAst::new(Expr::eq0(Expr::Add(vec![Expr::dt(u()), Expr::eq0(u())])));
        let r = validate_ast(&ast);
        assert_eq!(r, vec![Violation::Eq0NotRoot]);
        assert_eq!(r[0].to_string(), "Eq0 not root");
    }

    #[test]
    fn zero_exponent() {
        let ast = PdeAst::new(Expr::eq0(Expr::Add(vec![Expr::dt(u()), Expr::pow(u(), 0)])));
        let r = validate_ast(&ast);
        assert_eq!(r, vec![Violation::ExponentBelowOne]);
        assert_eq!(r[0].to_string(), "exponent < 1");
    }

    #[test]
    fn other_violations() {
        let ast = PdeAst::new(Expr::Add(vec![
            Expr::dt(Expr::var("v")),
            Expr::Mul(vec![u()]),
            Expr::coef("a", f64::NAN),
            Expr::symbol("b"),
        ]));
        let r = validate_ast(&ast);
        assert!(r.contains(&Violation::RootNotEq0));
        assert!(r.contains(&Violation::TooFewOperands { op: "Mul", count: 1 }));
        assert!(r.contains(&Violation::NonFiniteCoefficient("a".into())));
        assert!(r.contains(&Violation::UnboundCoefficient("b".into())));
        assert!(r.contains(&Violation::MultipleUnknowns(vec!["v".into(), "u".into()])));
        assert!(!validate_with(&ast, true).contains(&Violation::UnboundCoefficient("b".into())));
    }

    #[test]
    fn no_unknown() {
        let ast = PdeAst::new(Expr::eq0(Expr::dt(Expr::coef("a", 1.0))));
        assert_eq!(validate_ast(&ast), vec![Violation::MissingUnknown]);
    }
}
