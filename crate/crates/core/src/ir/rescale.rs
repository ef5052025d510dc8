use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PdeAst, PdeCoefficients};

/// `y = scale * x + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub scale: f64,
    pub offset: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }

    /// Maps `[lo, hi]` onto `[to_lo, to_hi]`.
    fn between(lo: f64, hi: f64, to_lo: f64, to_hi: f64) -> Self {
        let scale = (to_hi - to_lo) / (hi - lo);
        Self { scale, offset: to_lo - scale * lo }
    }
}

/// A benchmark equation in its original coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `u_t + (u^2)_x = (nu / pi) u_xx`
    Burgers { nu: f64 },
    /// `u_t + beta u_x = 0`
    Advection { beta: f64 },
    /// `u_t = nu u_xx + rho u (1 - u)`
    ReactionDiffusion { nu: f64, rho: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleSpec {
    #[serde(flatten)]
    pub family: Family,
    pub t_domain: (f64, f64),
    pub x_domain: (f64, f64),
}

impl RescaleSpec {
    /// The benchmark's usual domain for each family.
    pub fn standard(family: Family) -> Self {
        let (t_domain, x_domain) = match family {
            Family::Burgers { .. } => ((0.0, 2.0), (-1.0, 1.0)),
            Family::Advection { .. } => ((0.0, 2.0), (0.0, 1.0)),
            Family::ReactionDiffusion { .. } => ((0.0, 1.0), (0.0, 1.0)),
        };
        Self { family, t_domain, x_domain }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RescaleError {
    #[error("unsupported equation family `{0}`")]
    UnsupportedFamily(String),
    #[error("coefficient {0} must be positive")]
    NonPositiveCoefficient(&'static str),
    #[error("empty domain interval")]
    DegenerateDomain,
}

impl FromStr for Family {
    type Err = RescaleError;

    /// `burgers:NU`, `advection:BETA`, `reaction_diffusion:NU,RHO`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = args.split(',').filter(|a| !a.is_empty()).filter_map(|a| a.trim().parse().ok()).collect();
        match (name, nums.as_slice()) {
            ("burgers", [nu]) => Ok(Family::Burgers { nu: *nu }),
            ("advection", [beta]) => Ok(Family::Advection { beta: *beta }),
            ("reaction_diffusion", [nu, rho]) => Ok(Family::ReactionDiffusion { nu: *nu, rho: *rho }),
            _ => Err(RescaleError::UnsupportedFamily(s.to_string())),
        }
    }
}

/// An equation restated on `(t', x') in [0, 1] x [-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rescaled {
    pub ast: PdeAst,
    pub coefficients: PdeCoefficients,
    pub t_map: AffineMap,
    pub x_map: AffineMap,
}

/// Rewrites a benchmark equation in the canonical coordinates used by the
/// pretraining family.
///
/// With `t' = (t - t0) / T` and `x' = -1 + 2 (x - x0) / X`, derivatives pick
/// up `d/dt = (1/T) d/dt'` and `d/dx = (2/X) d/dx'`; multiplying through by
/// `T` gives the coefficients below.
pub fn rescale_to_canonical(spec: &RescaleSpec) -> Result<Rescaled, RescaleError> {
    let (t0, t1) = spec.t_domain;
    let (x0, x1) = spec.x_domain;
    if !(t1 > t0) || !(x1 > x0) {
        return Err(RescaleError::DegenerateDomain);
    }
    let big_t = t1 - t0;
    let big_x = x1 - x0;
    let dx = 2.0 / big_x;
    let mut c = PdeCoefficients::zero();
    match spec.family {
        Family::Burgers { nu } => {
            if nu <= 0.0 {
                return Err(RescaleError::NonPositiveCoefficient("nu"));
            }
            c.c[1][2] = big_t * dx;
            c.nu = big_t * dx * dx * nu / PI;
        }
        Family::Advection { beta } => {
            if beta <= 0.0 {
                return Err(RescaleError::NonPositiveCoefficient("beta"));
            }
            c.c[1][1] = big_t * dx * beta;
        }
        Family::ReactionDiffusion { nu, rho } => {
            if nu <= 0.0 {
                return Err(RescaleError::NonPositiveCoefficient("nu"));
            }
            if rho <= 0.0 {
                return Err(RescaleError::NonPositiveCoefficient("rho"));
            }
            c.nu = big_t * dx * dx * nu;
            c.c[0][1] = -big_t * rho;
            c.c[0][2] = big_t * rho;
        }
    }
    Ok(Rescaled {
        ast: c.to_ast(),
        coefficients: c,
        t_map: AffineMap::between(t0, t1, 0.0, 1.0),
        x_map: AffineMap::between(x0, x1, -1.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{coef_table, parse_pde, validate_ast};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn burgers() {
        let r = rescale_to_canonical(&RescaleSpec::standard(Family::Burgers { nu: 0.01 })).unwrap();
        let want = parse_pde(
            "dt(u) + dx(k*u^2) - nu*dxx(u) = 0",
            &coef_table([("k", 2.0), ("nu", 2.0 * 0.01 / PI)]),
        )
        .unwrap();
        assert!(close(r.coefficients.c[1][2], 2.0));
        assert!(close(r.coefficients.nu, 2.0 * 0.01 / PI));
        assert_eq!(r.ast.to_string().replace("c12", "k"), want.to_string());
        assert_eq!((r.t_map.scale, r.t_map.offset), (0.5, 0.0));
        assert_eq!((r.x_map.scale, r.x_map.offset), (1.0, 0.0));
    }

    #[test]
    fn advection() {
        let r = rescale_to_canonical(&RescaleSpec::standard(Family::Advection { beta: 0.1 })).unwrap();
        assert!(close(r.coefficients.c[1][1], 0.4));
        assert_eq!(r.ast.to_string(), "dt(u) + dx(c11*u) = 0");
        assert_eq!((r.t_map.scale, r.t_map.offset), (0.5, 0.0));
        assert_eq!((r.x_map.scale, r.x_map.offset), (2.0, -1.0));
    }

    #[test]
    fn reaction_diffusion() {
        let r = rescale_to_canonical(&RescaleSpec::standard(Family::ReactionDiffusion { nu: 1.0, rho: 1.0 })).unwrap();
        assert_eq!(r.coefficients.nu, 4.0);
        assert_eq!(r.coefficients.c[0][1], -1.0);
        assert_eq!(r.coefficients.c[0][2], 1.0);
        assert_eq!(r.ast.to_string(), "dt(u) + c01*u + c02*u^2 - nu*dx(dx(u)) = 0");
        assert_eq!((r.t_map.scale, r.t_map.offset), (1.0, 0.0));
        assert_eq!((r.x_map.scale, r.x_map.offset), (2.0, -1.0));
    }

    #[test]
    fn rescaled_asts_validate_and_domains_map_onto_canonical_box() {
        let families = [
            Family::Burgers { nu: 0.1 },
            Family::Burgers { nu: 0.001 },
            Family::Advection { beta: 1.0 },
            Family::ReactionDiffusion { nu: 0.5, rho: 2.0 },
        ];
        for f in families {
            let spec = RescaleSpec::standard(f);
            let r = rescale_to_canonical(&spec).unwrap();
            assert!(validate_ast(&r.ast).is_empty());
            assert!(close(r.t_map.apply(spec.t_domain.0), 0.0));
            assert!(close(r.t_map.apply(spec.t_domain.1), 1.0));
            assert!(close(r.x_map.apply(spec.x_domain.0), -1.0));
            assert!(close(r.x_map.apply(spec.x_domain.1), 1.0));
        }
    }

    #[test]
    fn family_strings() {
        assert_eq!("burgers:0.1".parse::<Family>().unwrap(), Family::Burgers { nu: 0.1 });
        assert_eq!(
            "reaction_diffusion:1,2".parse::<Family>().unwrap(),
            Family::ReactionDiffusion { nu: 1.0, rho: 2.0 }
        );
        assert!(matches!("kdv:1".parse::<Family>(), Err(RescaleError::UnsupportedFamily(_))));
        let bad = RescaleSpec::standard(Family::Advection { beta: -1.0 });
        assert!(matches!(rescale_to_canonical(&bad), Err(RescaleError::NonPositiveCoefficient("beta"))));
    }
}
