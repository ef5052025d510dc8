use std::fmt;

/// One node of a PDE expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// The unknown field.
    Var(String),
    /// A scalar coefficient. `value` is `None` for symbolic templates.
    Coef { name: String, value: Option<f64> },
    Dt(Box<Expr>),
    Dx(Box<Expr>),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    Square(Box<Expr>),
    Pow(Box<Expr>, u32),
    /// `child = 0`; only valid at the root.
    Eq0(Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    pub fn coef(name: &str, value: f64) -> Self {
        Expr::Coef { name: name.to_string(), value: Some(value) }
    }

    pub fn symbol(name: &str) -> Self {
        Expr::Coef { name: name.to_string(), value: None }
    }

    pub fn dt(e: Expr) -> Self {
        Expr::Dt(Box::new(e))
    }

    pub fn dx(e: Expr) -> Self {
        Expr::Dx(Box::new(e))
    }

    pub fn neg(e: Expr) -> Self {
        Expr::Neg(Box::new(e))
    }

    pub fn pow(e: Expr, k: u32) -> Self {
        Expr::Pow(Box::new(e), k)
    }

    pub fn square(e: Expr) -> Self {
        Expr::Square(Box::new(e))
    }

    pub fn eq0(e: Expr) -> Self {
        Expr::Eq0(Box::new(e))
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_) | Expr::Coef { .. } => vec![],
            Expr::Dt(c) | Expr::Dx(c) | Expr::Neg(c) | Expr::Square(c) | Expr::Pow(c, _) | Expr::Eq0(c) => {
                vec![c]
            }
            Expr::Add(cs) | Expr::Mul(cs) => cs.iter().collect(),
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::Var(_) | Expr::Coef { .. } => vec![],
            Expr::Dt(c) | Expr::Dx(c) | Expr::Neg(c) | Expr::Square(c) | Expr::Pow(c, _) | Expr::Eq0(c) => {
                vec![c]
            }
            Expr::Add(cs) | Expr::Mul(cs) => cs.iter_mut().collect(),
        }
    }

    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    fn walk_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        f(self);
        for c in self.children_mut() {
            c.walk_mut(f);
        }
    }

    /// Copy with the children of every `Add`/`Mul` sorted by their printed
    /// form, so commutative reorderings compare equal.
    pub fn sorted(&self) -> Expr {
        let mut e = self.clone();
        e.sort_in_place();
        e
    }

    fn sort_in_place(&mut self) {
        for c in self.children_mut() {
            c.sort_in_place();
        }
        if let Expr::Add(cs) | Expr::Mul(cs) = self {
            cs.sort_by_cached_key(|c| c.to_string());
        }
    }

    fn is_atom(&self) -> bool {
        matches!(self, Expr::Var(_) | Expr::Coef { .. } | Expr::Dt(_) | Expr::Dx(_))
    }
}

/// Prints in the surface DSL. `Neg` renders as subtraction inside a sum; it
/// has no standalone spelling elsewhere.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(n) | Expr::Coef { name: n, .. } => write!(f, "{n}"),
            Expr::Dt(c) => write!(f, "dt({c})"),
            Expr::Dx(c) => write!(f, "dx({c})"),
            Expr::Eq0(c) => write!(f, "{c} = 0"),
            Expr::Add(cs) => {
                // Lead with a non-negated term when there is one.
                let mut order: Vec<&Expr> = cs.iter().filter(|c| !matches!(c, Expr::Neg(_))).collect();
                order.extend(cs.iter().filter(|c| matches!(c, Expr::Neg(_))));
                for (i, c) in order.into_iter().enumerate() {
                    match (i, c) {
                        (0, Expr::Neg(inner)) => write!(f, "-{}", Term(inner))?,
                        (0, _) => write!(f, "{}", Term(c))?,
                        (_, Expr::Neg(inner)) => write!(f, " - {}", Term(inner))?,
                        _ => write!(f, " + {}", Term(c))?,
                    }
                }
                Ok(())
            }
            Expr::Mul(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{}", Factor(c))?;
                }
                Ok(())
            }
            Expr::Pow(c, k) => write!(f, "{}^{k}", Atom(c)),
            Expr::Square(c) => write!(f, "{}^2", Atom(c)),
            Expr::Neg(c) => write!(f, "-{}", Term(c)),
        }
    }
}

/// Parenthesizes anything that is not a term (`Add`, `Neg`).
struct Term<'a>(&'a Expr);
/// Parenthesizes anything that is not a factor.
struct Factor<'a>(&'a Expr);
/// Parenthesizes anything that is not an atom.
struct Atom<'a>(&'a Expr);

impl fmt::Display for Term<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Add(_) | Expr::Neg(_) | Expr::Eq0(_) => write!(f, "({})", self.0),
            e => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for Factor<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            e @ (Expr::Pow(..) | Expr::Square(_)) => write!(f, "{e}"),
            e if e.is_atom() => write!(f, "{e}"),
            e => write!(f, "({e})"),
        }
    }
}

impl fmt::Display for Atom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_atom() {
            write!(f, "{}", self.0)
        } else {
            write!(f, "({})", self.0)
        }
    }
}

/// A PDE `F(u, c, ...) = 0` as an expression tree rooted at `Eq0`.
///
/// The initial condition is implicit: every PDE carries exactly one, attached
/// to its unknown field when compiled.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeAst {
    pub root: Expr,
}

impl PdeAst {
    pub fn new(root: Expr) -> Self {
        Self { root }
    }

    /// Coefficient names in first-occurrence order, deduplicated.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        self.root.walk(&mut |e| {
            if let Expr::Coef { name, .. } = e {
                if !names.contains(name) {
                    names.push(name.clone());
                }
            }
        });
        names
    }

    /// Coefficient values by name.
    pub fn coefficient(&self, name: &str) -> Option<Option<f64>> {
        let mut found = None;
        self.root.walk(&mut |e| {
            if let Expr::Coef { name: n, value } = e {
                if n == name && found.is_none() {
                    found = Some(*value);
                }
            }
        });
        found
    }

    /// Copy with every coefficient listed in `values` bound to its value.
    pub fn bind(&self, values: &[(String, f64)]) -> PdeAst {
        let mut root = self.root.clone();
        root.walk_mut(&mut |e| {
            if let Expr::Coef { name, value } = e {
                if let Some((_, v)) = values.iter().find(|(n, _)| n == name) {
                    *value = Some(*v);
                }
            }
        });
        PdeAst { root }
    }

    /// Equality up to reordering of `Add`/`Mul` children.
    pub fn equivalent(&self, other: &PdeAst) -> bool {
        self.root.sorted() == other.root.sorted()
    }
}

impl fmt::Display for PdeAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}
