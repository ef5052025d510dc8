//! Recursive-descent parser for the PDE DSL.
//!
//! ```text
//! eq     := expr "=" "0"
//! expr   := term (("+" | "-") term)*
//! term   := factor ("*" factor)*
//! factor := atom ("^" INT)?
//! atom   := IDENT | NUMBER | "dt(" expr ")" | "dx(" expr ")" | "dxx(" expr ")" | "(" expr ")"
//! ```
//!
//! Identifiers present in the coefficient table become coefficients; the one
//! remaining identifier is the unknown field. Subtraction lowers to `Neg`
//! inside an `Add`, and `dxx(e)` to `dx(dx(e))`.

use std::collections::BTreeMap;

use super::{Expr, PdeAst};

/// Coefficient side table: name to value, or `None` for a symbolic slot.
pub type CoefTable = BTreeMap<String, Option<f64>>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: expected {expected}")]
    SyntaxError { position: usize, expected: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("more than one unknown field: `{0}` and `{1}`")]
    MultipleUnknowns(String, String),
    #[error("equation has no unknown field")]
    MissingUnknown,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Int(u32),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    Equals,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Number(s) => format!("number `{s}`"),
        Tok::Int(k) => format!("integer `{k}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Equals => "`=`".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => out.push((start, Tok::Plus)),
            '-' => out.push((start, Tok::Minus)),
            '*' => out.push((start, Tok::Star)),
            '^' => out.push((start, Tok::Caret)),
            '(' => out.push((start, Tok::LParen)),
            ')' => out.push((start, Tok::RParen)),
            '=' => out.push((start, Tok::Equals)),
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut is_int = true;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    is_int = false;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        is_int = false;
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s = &text[start..i];
                if s.parse::<f64>().is_err() {
                    return Err(ParseError::SyntaxError { position: start, expected: "a number".into() });
                }
                match (is_int, s.parse::<u32>()) {
                    (true, Ok(k)) => out.push((start, Tok::Int(k))),
                    _ => out.push((start, Tok::Number(s.to_string()))),
                }
                continue;
            }
            _ => {
                return Err(ParseError::SyntaxError {
                    position: start,
                    expected: "an operator, identifier or number".into(),
                })
            }
        }
        i += c.len_utf8();
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    table: &'a CoefTable,
    unknown: Option<String>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError::SyntaxError {
            position: self.offset(),
            expected: format!("{expected}, found {}", describe(self.peek())),
        }
    }

    fn equation(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.expr()?;
        self.expect(Tok::Equals, "`=`")?;
        match self.bump() {
            Tok::Int(0) => {}
            _ => {
                self.pos -= 1;
                return Err(self.error("`0`"));
            }
        }
        if *self.peek() != Tok::End {
            return Err(self.error("end of input"));
        }
        Ok(Expr::eq0(lhs))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(Expr::neg(self.term()?));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Add(terms) })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.factor()?];
        while *self.peek() == Tok::Star {
            self.bump();
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::Mul(factors) })
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            match self.bump() {
                Tok::Int(k) => return Ok(Expr::pow(base, k)),
                _ => {
                    self.pos -= 1;
                    return Err(self.error("an integer exponent"));
                }
            }
        }
        Ok(base)
    }

    fn call_arg(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let e = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                let is_call = *self.peek() == Tok::LParen;
                match (name.as_str(), is_call) {
                    ("dt", true) => Ok(Expr::dt(self.call_arg()?)),
                    ("dx", true) => Ok(Expr::dx(self.call_arg()?)),
                    ("dxx", true) => Ok(Expr::dx(Expr::dx(self.call_arg()?))),
                    (_, true) => Err(ParseError::UnknownSymbol(name)),
                    _ => self.identifier(name),
                }
            }
            Tok::Number(s) => {
                self.bump();
                Ok(Expr::coef(&s, s.parse().unwrap()))
            }
            Tok::Int(k) => {
                self.bump();
                Ok(Expr::coef(&k.to_string(), k as f64))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.error("an operand")),
        }
    }

    fn identifier(&mut self, name: String) -> Result<Expr, ParseError> {
        if let Some(value) = self.table.get(&name) {
            return Ok(Expr::Coef { name, value: *value });
        }
        if matches!(name.as_str(), "dt" | "dx" | "dxx") {
            return Err(ParseError::UnknownSymbol(name));
        }
        match &self.unknown {
            Some(u) if *u != name => Err(ParseError::MultipleUnknowns(u.clone(), name)),
            _ => {
                self.unknown = Some(name.clone());
                Ok(Expr::Var(name))
            }
        }
    }
}

/// Parses `text` against the coefficient table `table`.
pub fn parse_pde(text: &str, table: &CoefTable) -> Result<PdeAst, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, table, unknown: None };
    let root = p.equation()?;
    if p.unknown.is_none() {
        return Err(ParseError::MissingUnknown);
    }
    Ok(PdeAst::new(root))
}

/// Convenience table with every coefficient bound.
pub fn coef_table<'a>(values: impl IntoIterator<Item = (&'a str, f64)>) -> CoefTable {
    values.into_iter().map(|(k, v)| (k.to_string(), Some(v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, coefs: &[(&str, f64)]) -> Result<PdeAst, ParseError> {
        parse_pde(text, &coef_table(coefs.iter().copied()))
    }

    #[test]
    fn advection() {
        let ast = parse("dt(u) + c*dx(u) = 0", &[("c", 0.7)]).unwrap();
        let want = Expr::eq0(Expr::Add(vec![
            Expr::dt(Expr::var("u")),
            Expr::Mul(vec![Expr::coef("c", 0.7), Expr::dx(Expr::var("u"))]),
        ]));
        assert_eq!(ast.root, want);
    }

    #[test]
    fn minimal() {
        let ast = parse("dt(u) = 0", &[]).unwrap();
        assert_eq!(ast.root, Expr::eq0(Expr::dt(Expr::var("u"))));
    }

    #[test]
    fn burgers_with_sugar_and_subtraction() {
        // Hand-traced: the three terms become Add([Dt(u), Dx(Pow(u,2)), Neg(Mul(nu, Dx(Dx(u))))]).
        let ast = parse("dt(u) + dx(u^2) - nu*dxx(u) = 0", &[("nu", 0.01)]).unwrap();
        let u = || Expr::var("u");
        let want = Expr::eq0(Expr::Add(vec![
            Expr::dt(u()),
            Expr::dx(Expr::pow(u(), 2)),
            Expr::neg(Expr::Mul(vec![Expr::coef("nu", 0.01), Expr::dx(Expr::dx(u()))])),
        ]));
        assert_eq!(ast.root, want);
    }

    #[test]
    fn unknown_field_name_is_free() {
        let ast = parse("b*dx(v)+dt(v)=0", &[("b", 1.0)]).unwrap();
        assert!(matches!(&ast.root, Expr::Eq0(inner) if matches!(**inner, Expr::Add(_))));
    }

    #[test]
    fn numbers_become_coefficients() {
        let ast = parse("dt(u) + 2.5*u^3 = 0", &[]).unwrap();
        assert_eq!(ast.coefficient("2.5"), Some(Some(2.5)));
    }

    #[test]
    fn symbolic_coefficients() {
        let mut table = CoefTable::new();
        table.insert("c".into(), None);
        let ast = parse_pde("dt(u) + c*dx(u) = 0", &table).unwrap();
        assert_eq!(ast.coefficient("c"), Some(None));
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("dt(u) + c*dx(u) = 0", &[]), Err(ParseError::MultipleUnknowns(..))));
        assert!(matches!(parse("dt(u) + sin(u) = 0", &[]), Err(ParseError::UnknownSymbol(s)) if s == "sin"));
        assert!(matches!(parse("dt(c) = 0", &[("c", 1.0)]), Err(ParseError::MissingUnknown)));
        assert!(matches!(
            parse("dt(u) + = 0", &[]),
            Err(ParseError::SyntaxError { position: 8, .. })
        ));
        assert!(matches!(parse("dt(u) = 1", &[]), Err(ParseError::SyntaxError { position: 8, .. })));
        assert!(matches!(parse("dt(u)", &[]), Err(ParseError::SyntaxError { position: 5, .. })));
        assert!(matches!(parse("dt(u) + u^x = 0", &[]), Err(ParseError::SyntaxError { .. })));
        assert!(matches!(parse("dt(u) # = 0", &[]), Err(ParseError::SyntaxError { position: 6, .. })));
    }

    #[test]
    fn exponent_zero_parses_for_the_validator_to_reject() {
        let ast = parse("dt(u) + u^0 = 0", &[]).unwrap();
        assert!(!crate::ir::validate_ast(&ast).is_empty());
    }
}
