use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ir::{CoefSlot, PdeCoefficients};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefConfig {
    /// Chance that each `c_ik` is zero.
    pub p_zero: f64,
    /// Nonzero `c_ik` are uniform on `[-range, range]`.
    pub range: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    /// Chance of `nu = 0` when the flux is linear.
    pub p_nu_zero: f64,
}

impl Default for CoefConfig {
    fn default() -> Self {
        Self { p_zero: 0.5, range: 3.0, nu_min: 1e-3, nu_max: 1.0, p_nu_zero: 0.5 }
    }
}

/// Draws coefficients; `log nu` is uniform on `[log nu_min, log nu_max]`.
pub fn sample_pde<R: Rng>(rng: &mut R, cfg: &CoefConfig) -> PdeCoefficients {
    let mut c = PdeCoefficients::zero();
    for s in CoefSlot::all() {
        if !rng.random_bool(cfg.p_zero) {
            c.set(s, rng.random_range(-cfg.range..=cfg.range));
        }
    }
    c.nu = rng.random_range(cfg.nu_min.ln()..=cfg.nu_max.ln()).exp();
    if c.linear_flux() && rng.random_bool(cfg.p_nu_zero) {
        c.nu = 0.0;
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcConfig {
    /// Sinusoids per initial condition.
    pub terms: usize,
    /// Integer wave numbers are uniform on `n_min..=n_max`.
    pub n_min: u32,
    pub n_max: u32,
    pub p_abs: f64,
    pub p_window: f64,
    /// Window sigmoid steepness times the domain length.
    pub window_steepness: f64,
}

impl Default for IcConfig {
    fn default() -> Self {
        Self { terms: 2, n_min: 1, n_max: 8, p_abs: 0.1, p_window: 0.1, window_steepness: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    /// Periods over the domain.
    pub n: u32,
    pub phase: f64,
}

/// How an initial condition was built; enough to rebuild it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcRecipe {
    pub terms: Vec<SineTerm>,
    /// `sign * |g|` when present.
    pub abs_sign: Option<f64>,
    /// Smooth restriction to `(lo, hi)` with the given steepness.
    pub window: Option<(f64, f64, f64)>,
}

impl IcRecipe {
    /// `g(x) = sum A_i sin(k_i x + phi_i)`, `k_i = 2 pi n_i / L_x`, on the
    /// grid `xs` of a domain of length 2.
    pub fn eval(&self, xs: &[f64]) -> Vec<f64> {
        let lx = 2.0;
        xs.iter()
            .map(|&x| {
                let mut g: f64 = self.terms.iter().map(|t| t.amplitude * (2.0 * PI * t.n as f64 / lx * x + t.phase).sin()).sum();
                if let Some(s) = self.abs_sign {
                    g = s * g.abs();
                }
                if let Some((lo, hi, kappa)) = self.window {
                    g *= sigmoid(kappa * (x - lo)) * sigmoid(kappa * (hi - x));
                }
                g
            })
            .collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn sample_ic_recipe<R: Rng>(rng: &mut R, cfg: &IcConfig) -> IcRecipe {
    let terms = (0..cfg.terms)
        .map(|_| SineTerm {
            amplitude: rng.random_range(0.0..=1.0),
            n: rng.random_range(cfg.n_min..=cfg.n_max),
            phase: rng.random_range(0.0..2.0 * PI),
        })
        .collect();
    let abs_sign = rng.random_bool(cfg.p_abs).then(|| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let window = rng.random_bool(cfg.p_window).then(|| {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        (a.min(b), a.max(b), cfg.window_steepness / 2.0)
    });
    IcRecipe { terms, abs_sign, window }
}

/// A random initial condition on the `n_x`-point grid of `[-1, 1)`.
pub fn sample_initial_condition<R: Rng>(rng: &mut R, n_x: usize, cfg: &IcConfig) -> Vec<f64> {
    assert!(n_x >= 2);
    let xs: Vec<f64> = (0..n_x).map(|j| -1.0 + 2.0 * j as f64 / n_x as f64).collect();
    sample_ic_recipe(rng, cfg).eval(&xs)
}
