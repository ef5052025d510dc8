//! Synthetic pretraining data: random PDEs from the polynomial family,
//! random initial conditions, and their numerical solutions.

mod sample;
mod solver;

pub use sample::{sample_ic_recipe, sample_initial_condition, sample_pde, CoefConfig, IcConfig, IcRecipe, SineTerm};
pub use solver::{solve_pde, GridConfig, Rejected, SpectralSolver};

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ir::PdeCoefficients;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatagenConfig {
    pub count: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub coefficients: CoefConfig,
    #[serde(default)]
    pub ic: IcConfig,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[serde(default)]
    pub threads: usize,
    /// Give up after `count * max_draws_factor` draws.
    #[serde(default = "default_draws_factor")]
    pub max_draws_factor: usize,
}

fn default_draws_factor() -> usize {
    100
}

impl DatagenConfig {
    pub fn with_count(count: usize) -> Self {
        Self {
            count,
            grid: GridConfig::default(),
            coefficients: CoefConfig::default(),
            ic: IcConfig::default(),
            threads: 0,
            max_draws_factor: default_draws_factor(),
        }
    }
}

/// One accepted solution on the data grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeSample {
    /// Draw number this sample came from.
    pub draw: u64,
    pub seed: u64,
    pub coefficients: PdeCoefficients,
    pub ic_recipe: Option<IcRecipe>,
    pub n_x: usize,
    pub n_t: usize,
    pub dt_data: f64,
    /// Rejected draws since the previous accepted sample.
    pub rejected_before: usize,
    pub ic: Vec<f32>,
    /// Row-major `[n_t, n_x]`; row 0 equals `ic`.
    pub solution: Vec<f32>,
}

impl PdeSample {
    pub fn at(&self, t_idx: usize, x_idx: usize) -> f32 {
        self.solution[t_idx * self.n_x + x_idx]
    }

    pub fn max_abs(&self) -> f32 {
        self.solution.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    /// `(t, x)` of a grid point.
    pub fn coord(&self, t_idx: usize, x_idx: usize) -> [f32; 2] {
        [(t_idx as f64 * self.dt_data) as f32, (-1.0 + 2.0 * x_idx as f64 / self.n_x as f64) as f32]
    }

    pub fn ic_f64(&self) -> Vec<f64> {
        self.ic.iter().map(|&v| v as f64).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub draws: usize,
    pub accepted: usize,
    pub rejected_non_finite: usize,
    pub rejected_too_large: usize,
}

impl GenerationStats {
    pub fn rejected(&self) -> usize {
        self.rejected_non_finite + self.rejected_too_large
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatagenError {
    #[error("only {accepted} of {count} samples accepted after {draws} draws")]
    TooManyRejections { accepted: usize, count: usize, draws: usize },
    #[error("requested {count} points from a grid of {available}")]
    CountTooLarge { count: usize, available: usize },
    #[error("invalid datagen config: {0}")]
    Config(String),
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of draw `index` under `base_seed`; any draw can be regenerated alone.
pub fn draw_seed(base_seed: u64, index: u64) -> u64 {
    mix(base_seed ^ mix(index))
}

/// Samples and solves one draw.
pub fn generate_draw(cfg: &DatagenConfig, solver: &SpectralSolver, base_seed: u64, draw: u64) -> Result<PdeSample, Rejected> {
    let seed = draw_seed(base_seed, draw);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefficients = sample_pde(&mut rng, &cfg.coefficients);
    let recipe = sample_ic_recipe(&mut rng, &cfg.ic);
    let g = recipe.eval(&cfg.grid.xs());
    // The stored IC is f32, so solve from exactly that.
    let ic: Vec<f32> = g.iter().map(|&v| v as f32).collect();
    let g: Vec<f64> = ic.iter().map(|&v| v as f64).collect();
    let sol = solver.solve(&coefficients, &g, &cfg.grid)?;
    Ok(PdeSample {
        draw,
        seed,
        coefficients,
        ic_recipe: Some(recipe),
        n_x: cfg.grid.n_x,
        n_t: cfg.grid.n_t,
        dt_data: cfg.grid.dt_data,
        rejected_before: 0,
        solution: sol.iter().map(|&v| v as f32).collect(),
        ic,
    })
}

/// Draws until `cfg.count` samples are accepted, keeping the first accepted
/// ones in draw order.
pub fn generate_samples(cfg: &DatagenConfig, base_seed: u64) -> Result<(Vec<PdeSample>, GenerationStats), DatagenError> {
    if cfg.grid.n_x < 4 || cfg.grid.n_x % 2 != 0 || cfg.grid.n_t < 1 {
        return Err(DatagenError::Config("n_x must be even and at least 4, n_t at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().map_err(|e| DatagenError::Config(e.to_string()))?;
    let solver = SpectralSolver::new(cfg.grid.n_x);
    let max_draws = cfg.count.saturating_mul(cfg.max_draws_factor).max(1);
    let batch = pool.current_num_threads().max(1) * 4;
    let mut stats = GenerationStats::default();
    let mut out = Vec::with_capacity(cfg.count);
    let mut since_last = 0;
    let mut next = 0u64;
    while out.len() < cfg.count {
        if stats.draws >= max_draws {
            return Err(DatagenError::TooManyRejections { accepted: out.len(), count: cfg.count, draws: stats.draws });
        }
        let draws: Vec<u64> = (next..next + batch as u64).collect();
        next += batch as u64;
        let results: Vec<_> =
            pool.install(|| draws.par_iter().map(|&d| generate_draw(cfg, &solver, base_seed, d)).collect());
        for r in results {
            if out.len() == cfg.count || stats.draws >= max_draws {
                break;
            }
            stats.draws += 1;
            match r {
                Ok(mut s) => {
                    s.rejected_before = since_last;
                    since_last = 0;
                    out.push(s);
                }
                Err(Rejected::NonFinite { .. }) => {
                    stats.rejected_non_finite += 1;
                    since_last += 1;
                }
                Err(Rejected::TooLarge { .. }) => {
                    stats.rejected_too_large += 1;
                    since_last += 1;
                }
            }
        }
    }
    stats.accepted = out.len();
    Ok((out, stats))
}

/// Rolls the initial condition and every snapshot right by `shift` cells.
pub fn augment_translate(sample: &PdeSample, shift: usize) -> PdeSample {
    let n = sample.n_x;
    let s = shift % n;
    let roll = |row: &[f32]| -> Vec<f32> { (0..n).map(|j| row[(j + n - s) % n]).collect() };
    let mut out = sample.clone();
    out.ic = roll(&sample.ic);
    out.solution = sample.solution.chunks(n).flat_map(roll).collect();
    out.ic_recipe = None;
    out
}

/// `count` distinct grid points, uniformly without replacement, with their
/// values.
pub fn sample_points<R: Rng>(rng: &mut R, sample: &PdeSample, count: usize) -> Result<Vec<(usize, usize, f32)>, DatagenError> {
    let total = sample.n_t * sample.n_x;
    if count > total {
        return Err(DatagenError::CountTooLarge { count, available: total });
    }
    Ok(index::sample(rng, total, count)
        .into_iter()
        .map(|k| {
            let (t, x) = (k / sample.n_x, k % sample.n_x);
            (t, x, sample.solution[k])
        })
        .collect())
}
