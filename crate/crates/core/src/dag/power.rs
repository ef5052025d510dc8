/// `u^k` written with squares and one product, following the binary
/// expansion of `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PowerTree {
    Base,
    Square(Box<PowerTree>),
    Mul(Vec<PowerTree>),
}

impl PowerTree {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            PowerTree::Base => u,
            PowerTree::Square(t) => {
                let v = t.eval(u);
                v * v
            }
            PowerTree::Mul(ts) => ts.iter().map(|t| t.eval(u)).product(),
        }
    }

    /// Operator nodes, counting every occurrence (no sharing).
    pub fn op_count(&self) -> usize {
        match self {
            PowerTree::Base => 0,
            PowerTree::Square(t) => 1 + t.op_count(),
            PowerTree::Mul(ts) => 1 + ts.iter().map(PowerTree::op_count).sum::<usize>(),
        }
    }
}

/// One squaring chain per set bit of `k`, highest bit first.
///
/// # Panics
///
/// If `k == 0`.
pub fn expand_power(k: u32) -> PowerTree {
    assert!(k >= 1, "exponent must be positive");
    let mut factors: Vec<PowerTree> = (0..32)
        .rev()
        .filter(|b| k & (1 << b) != 0)
        .map(|b| (0..b).fold(PowerTree::Base, |t, _| PowerTree::Square(Box::new(t))))
        .collect();
    if factors.len() == 1 {
        factors.pop().unwrap()
    } else {
        PowerTree::Mul(factors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(t: PowerTree) -> PowerTree {
        PowerTree::Square(Box::new(t))
    }

    #[test]
    fn small_exponents() {
        assert_eq!(expand_power(1), PowerTree::Base);
        assert_eq!(expand_power(2), sq(PowerTree::Base));
        assert_eq!(expand_power(3), PowerTree::Mul(vec![sq(PowerTree::Base), PowerTree::Base]));
        assert_eq!(
            expand_power(11),
            PowerTree::Mul(vec![sq(sq(sq(PowerTree::Base))), sq(PowerTree::Base), PowerTree::Base])
        );
    }

    #[test]
    fn evaluates_to_power() {
        for k in 1..=32 {
            let want = 1.37f64.powi(k as i32);
            assert!((expand_power(k).eval(1.37) - want).abs() <= 1e-9 * want, "k={k}");
        }
    }
}
