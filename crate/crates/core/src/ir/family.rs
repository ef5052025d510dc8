use serde::{Deserialize, Serialize};

use super::{Expr, PdeAst};

/// Coefficients of `u_t + f0(u) + f1(u)_x - nu u_xx = 0` with
/// `f_i(u) = sum_k c[i][k] u^k`, `k = 0..=3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeCoefficients {
    pub c: [[f64; 4]; 2],
    pub nu: f64,
}

/// Address of one polynomial coefficient `c[i][k]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoefSlot {
    pub i: usize,
    pub k: usize,
}

impl CoefSlot {
    pub fn all() -> impl Iterator<Item = CoefSlot> {
        (0..2).flat_map(|i| (0..4).map(move |k| CoefSlot { i, k }))
    }

    /// `c00` ... `c13`.
    pub fn name(self) -> String {
        format!("c{}{}", self.i, self.k)
    }
}

pub const VISCOSITY_NAME: &str = "nu";

impl PdeCoefficients {
    pub fn zero() -> Self {
        Self { c: [[0.0; 4]; 2], nu: 0.0 }
    }

    pub fn get(&self, s: CoefSlot) -> f64 {
        self.c[s.i][s.k]
    }

    pub fn set(&mut self, s: CoefSlot, v: f64) {
        self.c[s.i][s.k] = v;
    }

    /// Slots with a nonzero coefficient, in `c00..c13` order.
    pub fn nonzero_slots(&self) -> Vec<CoefSlot> {
        CoefSlot::all().filter(|&s| self.get(s) != 0.0).collect()
    }

    /// Flux is at most linear in `u`.
    pub fn linear_flux(&self) -> bool {
        self.c[1][2] == 0.0 && self.c[1][3] == 0.0
    }

    /// The PDE as an AST; zero-valued terms are left out.
    pub fn to_ast(&self) -> PdeAst {
        let u = || Expr::var("u");
        let monomial = |slot: CoefSlot| {
            let c = Expr::coef(&slot.name(), self.get(slot));
            match slot.k {
                0 => c,
                1 => Expr::Mul(vec![c, u()]),
                k => Expr::Mul(vec![c, Expr::pow(u(), k as u32)]),
            }
        };
        let mut terms = vec![Expr::dt(u())];
        for k in 0..4 {
            let s = CoefSlot { i: 0, k };
            if self.get(s) != 0.0 {
                terms.push(monomial(s));
            }
        }
        let mut flux: Vec<Expr> = (0..4)
            .map(|k| CoefSlot { i: 1, k })
            .filter(|&s| self.get(s) != 0.0)
            .map(monomial)
            .collect();
        match flux.len() {
            0 => {}
            1 => terms.push(Expr::dx(flux.pop().unwrap())),
            _ => terms.push(Expr::dx(Expr::Add(flux))),
        }
        if self.nu != 0.0 {
            terms.push(Expr::neg(Expr::Mul(vec![
                Expr::coef(VISCOSITY_NAME, self.nu),
                Expr::dx(Expr::dx(u())),
            ])));
        }
        let lhs = if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Add(terms) };
        PdeAst::new(Expr::eq0(lhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{coef_table, parse_pde, validate_ast};

    #[test]
    fn empty_family_is_pure_time_derivative() {
        assert_eq!(PdeCoefficients::zero().to_ast().to_string(), "dt(u) = 0");
    }

    #[test]
    fn family_ast_matches_hand_written_dsl() {
        let mut c = PdeCoefficients::zero();
        c.c[0][0] = -1.0;
        c.c[0][3] = 0.5;
        c.c[1][1] = 0.2;
        c.c[1][2] = 1.1;
        c.nu = 0.01;
        let ast = c.to_ast();
        assert!(validate_ast(&ast).is_empty());
        let table = coef_table([("c00", -1.0), ("c03", 0.5), ("c11", 0.2), ("c12", 1.1), ("nu", 0.01)]);
        let parsed = parse_pde("dt(u) + c00 + c03*u^3 + dx(c11*u + c12*u^2) - nu*dxx(u) = 0", &table).unwrap();
        assert!(ast.equivalent(&parsed));
    }
}
