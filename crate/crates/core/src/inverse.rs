//! Coefficient recovery from one noisy solution by particle swarm search
//! over the pretrained model's predictions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::PdeSample;
use crate::ir::{CoefSlot, PdeCoefficients};
use crate::model::ModelParams;
use crate::trainer::{relative_l2, sample_input, TrainError};

/// `u + U(-r |u|_inf, r |u|_inf)` per point.
pub fn add_noise<R: Rng>(u: &[f32], r: f64, rng: &mut R) -> Vec<f32> {
    let bound = r * u.iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
    if bound <= 0.0 {
        return u.to_vec();
    }
    u.iter().map(|&v| (v as f64 + rng.random_range(-bound..=bound)) as f32).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-dimension `(lo, hi)`.
    pub bounds: Vec<(f64, f64)>,
    /// Velocity limit as a fraction of each box width.
    pub velocity_clamp: f64,
    /// Initial velocities are uniform within this fraction of the width.
    pub initial_velocity: f64,
    /// Put particle 0 at the box centre.
    pub center_particle: bool,
    /// Extra starting positions, used before random ones.
    pub seeded_positions: Vec<Vec<f64>>,
    pub seed: u64,
    /// Worker threads for objective calls; 0 uses all cores.
    pub threads: usize,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 64,
            iterations: 300,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            bounds: Vec::new(),
            velocity_clamp: 0.2,
            initial_velocity: 0.1,
            center_particle: true,
            seeded_positions: Vec::new(),
            seed: 0,
            threads: 0,
        }
    }
}

impl PsoConfig {
    pub fn with_bounds(bounds: Vec<(f64, f64)>) -> Self {
        Self { bounds, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), InverseError> {
        if self.swarm_size == 0 {
            return Err(InverseError::Config("swarm_size must be at least 1".into()));
        }
        if self.bounds.is_empty() || self.bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(InverseError::Config("bounds must be nonempty with lo < hi".into()));
        }
        if self.seeded_positions.iter().any(|p| p.len() != self.bounds.len()) {
            return Err(InverseError::Config("seeded position has the wrong dimension".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best value after initialization and after each iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum InverseError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error("model is incompatible with the problem: {0}")]
    ModelIncompatible(String),
    #[error("observation is not finite")]
    NonFiniteObservation,
    #[error("no coefficients to search")]
    NoUnknowns,
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Global-best PSO with inertia. Positions are clamped to the box (the
/// clamped velocity component is zeroed); objective values that are not
/// finite count as `+inf`.
pub fn pso_minimize(objective: impl Fn(&[f64]) -> f64 + Sync, cfg: &PsoConfig) -> Result<PsoResult, InverseError> {
    cfg.validate()?;
    let dim = cfg.bounds.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| InverseError::Config(e.to_string()))?;
    let eval = |xs: &[Vec<f64>]| -> Vec<f64> {
        pool.install(|| {
            xs.par_iter()
                .map(|x| {
                    let v = objective(x);
                    if v.is_finite() {
                        v
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width: Vec<f64> = cfg.bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let vmax: Vec<f64> = width.iter().map(|w| w * cfg.velocity_clamp).collect();
    let mut seeded = cfg.seeded_positions.iter();
    let mut x: Vec<Vec<f64>> = (0..cfg.swarm_size)
        .map(|i| {
            if i == 0 && cfg.center_particle {
                cfg.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
            } else if let Some(p) = seeded.next() {
                p.iter().zip(&cfg.bounds).map(|(&v, &(lo, hi))| v.clamp(lo, hi)).collect()
            } else {
                cfg.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
            }
        })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cfg.swarm_size)
        .map(|_| {
            (0..dim)
                .map(|d| {
                    let b = cfg.initial_velocity * width[d];
                    if b > 0.0 {
                        rng.random_range(-b..=b)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mut pbest = x.clone();
    let mut pval = eval(&x);
    let argmin = |vals: &[f64]| (0..vals.len()).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
    let g = argmin(&pval);
    let mut gbest = pbest[g].clone();
    let mut gval = pval[g];
    let mut trace = vec![gval];
    for _ in 0..cfg.iterations {
        for i in 0..cfg.swarm_size {
            for d in 0..dim {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let vel = cfg.inertia * v[i][d]
                    + cfg.cognitive * r1 * (pbest[i][d] - x[i][d])
                    + cfg.social * r2 * (gbest[d] - x[i][d]);
                v[i][d] = vel.clamp(-vmax[d], vmax[d]);
                let (lo, hi) = cfg.bounds[d];
                let next = x[i][d] + v[i][d];
                if next < lo || next > hi {
                    x[i][d] = next.clamp(lo, hi);
                    v[i][d] = 0.0;
                } else {
                    x[i][d] = next;
                }
            }
        }
        let vals = eval(&x);
        for i in 0..cfg.swarm_size {
            if vals[i] < pval[i] {
                pval[i] = vals[i];
                pbest[i] = x[i].clone();
            }
        }
        let g = argmin(&pval);
        if pval[g] < gval {
            gval = pval[g];
            gbest = pbest[g].clone();
        }
        trace.push(gval);
    }
    Ok(PsoResult { best: gbest, best_value: gval, trace })
}

/// Slots searched when recovering `c`: its nonzero coefficients except
/// `c10`, which cannot affect the solution.
pub fn search_slots(c: &PdeCoefficients) -> Vec<CoefSlot> {
    c.nonzero_slots().into_iter().filter(|&s| s != CoefSlot { i: 1, k: 0 }).collect()
}

/// One observed solution and the coefficients to recover.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseProblem {
    /// Known values; entries in `search` are overwritten by candidates.
    pub base: PdeCoefficients,
    pub search: Vec<CoefSlot>,
    /// Row-major `[n_t, n_x]`; row 0 serves as the initial condition.
    pub observation: Vec<f32>,
    pub n_t: usize,
    pub n_x: usize,
    pub dt_data: f64,
    /// Grid points used by the objective; all when absent.
    pub subsample: Option<usize>,
    pub subsample_seed: u64,
}

impl InverseProblem {
    /// Recover the searchable coefficients of `sample` from `observation`
    /// (usually a noisy copy of its solution). `nu` and `c10` stay known.
    pub fn for_sample(sample: &PdeSample, observation: Vec<f32>) -> Self {
        Self {
            base: sample.coefficients,
            search: search_slots(&sample.coefficients),
            observation,
            n_t: sample.n_t,
            n_x: sample.n_x,
            dt_data: sample.dt_data,
            subsample: None,
            subsample_seed: 0,
        }
    }

    pub fn with_values(&self, values: &[f64]) -> PdeCoefficients {
        let mut c = self.base;
        for (&s, &v) in self.search.iter().zip(values) {
            c.set(s, v);
        }
        c
    }

    /// The equation with searched slots left symbolic, in the DSL.
    pub fn template(&self) -> String {
        let placeholder = vec![1.0; self.search.len()];
        self.with_values(&placeholder).to_ast().to_string()
    }

    fn validate(&self, params: &ModelParams) -> Result<(), InverseError> {
        if self.search.is_empty() {
            return Err(InverseError::NoUnknowns);
        }
        if self.observation.len() != self.n_t * self.n_x || self.n_t == 0 {
            return Err(InverseError::ModelIncompatible(format!("observation is not {} x {}", self.n_t, self.n_x)));
        }
        if self.observation.iter().any(|v| !v.is_finite()) {
            return Err(InverseError::NonFiniteObservation);
        }
        if self.n_x != params.config.n_x() {
            return Err(InverseError::ModelIncompatible(format!(
                "grid has {} points, model reads {}",
                self.n_x,
                params.config.n_x()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseResult {
    pub coefficients: PdeCoefficients,
    pub values: Vec<f64>,
    pub objective: f64,
    pub trace: Vec<f64>,
}

/// Relative L2 mismatch between model predictions and the observation, as a
/// function of the searched values.
pub struct Objective<'a> {
    params: &'a ModelParams,
    problem: &'a InverseProblem,
    carrier: PdeSample,
    coords: Vec<[f32; 2]>,
    target: Vec<f32>,
}

impl<'a> Objective<'a> {
    pub fn new(problem: &'a InverseProblem, params: &'a ModelParams) -> Result<Self, InverseError> {
        problem.validate(params)?;
        let all = problem.n_t * problem.n_x;
        let idx: Vec<usize> = match problem.subsample {
            Some(k) if k < all => {
                let mut rng = ChaCha8Rng::seed_from_u64(problem.subsample_seed);
                let mut v = rand::seq::index::sample(&mut rng, all, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..all).collect(),
        };
        let carrier = PdeSample {
            draw: 0,
            seed: 0,
            coefficients: problem.base,
            ic_recipe: None,
            n_x: problem.n_x,
            n_t: problem.n_t,
            dt_data: problem.dt_data,
            rejected_before: 0,
            ic: problem.observation[..problem.n_x].to_vec(),
            solution: Vec::new(),
        };
        let coords = idx.iter().map(|&k| carrier.coord(k / problem.n_x, k % problem.n_x)).collect();
        let target = idx.iter().map(|&k| problem.observation[k]).collect();
        Ok(Self { params, problem, carrier, coords, target })
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, InverseError> {
        let mut s = self.carrier.clone();
        s.coefficients = self.problem.with_values(values);
        let input = sample_input(&s, &self.params.config)?;
        let mut pred = Vec::with_capacity(self.coords.len());
        for chunk in self.coords.chunks(4096) {
            pred.extend(self.params.predict(&input, chunk).map_err(TrainError::from)?);
        }
        Ok(relative_l2(&pred, &self.target)?)
    }
}

/// PSO over the searched slots within `pso.bounds`.
pub fn recover_coefficients(
    problem: &InverseProblem,
    params: &ModelParams,
    pso: &PsoConfig,
) -> Result<InverseResult, InverseError> {
    if pso.bounds.len() != problem.search.len() {
        return Err(InverseError::Config(format!(
            "{} bounds for {} coefficients",
            pso.bounds.len(),
            problem.search.len()
        )));
    }
    let obj = Objective::new(problem, params)?;
    let r = pso_minimize(|x| obj.eval(x).unwrap_or(f64::INFINITY), pso)?;
    Ok(InverseResult { coefficients: problem.with_values(&r.best), values: r.best, objective: r.best_value, trace: r.trace })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub format_version: u32,
    pub template: String,
    pub coefficients: Vec<String>,
    pub bounds: Vec<(f64, f64)>,
    pub recovered: Vec<f64>,
    /// Values the observation was generated with, when known.
    pub truth: Option<Vec<f64>>,
    pub noise: f64,
    pub objective: f64,
    pub trace: Vec<f64>,
    pub seed: u64,
}

impl InversionReport {
    pub fn new(problem: &InverseProblem, pso: &PsoConfig, result: &InverseResult, noise: f64, truth: Option<Vec<f64>>) -> Self {
        Self {
            format_version: crate::io::FORMAT_VERSION,
            template: problem.template(),
            coefficients: problem.search.iter().map(|s| s.name()).collect(),
            bounds: pso.bounds.clone(),
            recovered: result.values.clone(),
            truth,
            noise,
            objective: result.objective,
            trace: result.trace.clone(),
            seed: pso.seed,
        }
    }
}
