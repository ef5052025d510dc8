use graphpde::datagen::{generate_samples, DatagenConfig, PdeSample};
use graphpde::inverse::*;
use graphpde::ir::CoefSlot;
use graphpde::model::{ModelConfig, ModelParams};
use graphpde::trainer::{predict_grid, relative_l2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn noise_respects_its_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u: Vec<f32> = (0..1000).map(|k| (k as f32 * 0.01).sin() * 2.0).collect();
    assert_eq!(add_noise(&u, 0.0, &mut rng), u);
    let sup = u.iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
    for r in [0.001, 0.01, 0.1] {
        let n = add_noise(&u, r, &mut rng);
        let worst = n.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs() as f64));
        assert!(worst <= r * sup * (1.0 + 1e-6), "{worst}");
        assert!(worst > 0.5 * r * sup);
    }
}

#[test]
fn noise_has_zero_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 1_000_000;
    let u = vec![1.0f32; n];
    let r = 0.1;
    let noisy = add_noise(&u, r, &mut rng);
    let mean = noisy.iter().map(|&v| v as f64 - 1.0).sum::<f64>() / n as f64;
    // U(-b, b) has sigma b / sqrt(3).
    let sigma = r / 3f64.sqrt();
    assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "{mean}");
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn sphere_cfg(seed: u64) -> PsoConfig {
    PsoConfig { swarm_size: 40, iterations: 200, seed, center_particle: false, ..PsoConfig::with_bounds(vec![(-3.0, 3.0); 4]) }
}

#[test]
fn sphere_is_minimized() {
    let r = pso_minimize(sphere, &sphere_cfg(7)).unwrap();
    assert!(r.best_value < 1e-3, "{}", r.best_value);
    assert_eq!(r.trace.len(), 201);
    assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(r.best_value, sphere(&r.best));
    assert_eq!(r.trace.last(), Some(&r.best_value));
}

#[test]
fn pso_is_deterministic_and_thread_independent() {
    let a = pso_minimize(sphere, &sphere_cfg(3)).unwrap();
    let b = pso_minimize(sphere, &PsoConfig { threads: 1, ..sphere_cfg(3) }).unwrap();
    assert_eq!(a, b);
    let c = pso_minimize(sphere, &sphere_cfg(4)).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn lone_still_particle_stays_put() {
    let cfg = PsoConfig {
        swarm_size: 1,
        iterations: 50,
        cognitive: 0.0,
        social: 0.0,
        initial_velocity: 0.0,
        center_particle: false,
        seeded_positions: vec![vec![0.5, -1.25]],
        ..PsoConfig::with_bounds(vec![(-3.0, 3.0); 2])
    };
    let visited = std::sync::Mutex::new(Vec::new());
    let r = pso_minimize(
        |x| {
            visited.lock().unwrap().push(x.to_vec());
            sphere(x)
        },
        &cfg,
    )
    .unwrap();
    let visited = visited.into_inner().unwrap();
    assert_eq!(visited.len(), 51);
    assert!(visited.iter().all(|x| x == &vec![0.5, -1.25]));
    assert_eq!(r.best, vec![0.5, -1.25]);
}

#[test]
fn positions_stay_in_bounds_and_bad_values_lose() {
    let cfg = PsoConfig { iterations: 30, ..PsoConfig::with_bounds(vec![(-1.0, 2.0), (0.5, 0.75)]) };
    let seen = std::sync::Mutex::new(Vec::new());
    let r = pso_minimize(
        |x| {
            seen.lock().unwrap().push(x.to_vec());
            // Pushes particles against the upper walls; NaN on part of the box.
            if x[0] < 0.0 {
                f64::NAN
            } else {
                -x[0] - x[1]
            }
        },
        &cfg,
    )
    .unwrap();
    for x in seen.into_inner().unwrap() {
        assert!((-1.0..=2.0).contains(&x[0]) && (0.5..=0.75).contains(&x[1]), "{x:?}");
    }
    assert!(r.best[0] >= 0.0);
    assert!((r.best_value + 2.75).abs() < 1e-2, "{}", r.best_value);
}

#[test]
fn bad_configs() {
    assert!(matches!(pso_minimize(sphere, &PsoConfig::with_bounds(vec![])), Err(InverseError::Config(_))));
    assert!(matches!(pso_minimize(sphere, &PsoConfig::with_bounds(vec![(1.0, 1.0)])), Err(InverseError::Config(_))));
    let zero = PsoConfig { swarm_size: 0, ..PsoConfig::with_bounds(vec![(0.0, 1.0)]) };
    assert!(matches!(pso_minimize(sphere, &zero), Err(InverseError::Config(_))));
}

#[test]
fn relative_l2_is_scale_invariant() {
    let t: Vec<f32> = (0..64).map(|k| (k as f32 * 0.3).cos()).collect();
    let p: Vec<f32> = t.iter().map(|v| v * 0.9 + 0.05).collect();
    let base = relative_l2(&p, &t).unwrap();
    for c in [-3.0f32, 0.5, 8.0] {
        let ps: Vec<f32> = p.iter().map(|v| v * c).collect();
        let ts: Vec<f32> = t.iter().map(|v| v * c).collect();
        assert!((relative_l2(&ps, &ts).unwrap() - base).abs() < 1e-6);
    }
}

fn tiny() -> ModelConfig {
    ModelConfig { d_e: 8, heads: 2, feat_hidden: 8, d_h: 6, hyper_hidden: 8, enc_layers: 1, n_mod: 2, ..ModelConfig::desk() }
}

/// A sample whose solution is the model's own prediction.
fn self_consistent() -> (ModelParams, PdeSample) {
    let mut cfg = DatagenConfig::with_count(4);
    cfg.grid.n_t = 11;
    let (samples, _) = generate_samples(&cfg, 3).unwrap();
    let mut s = samples.into_iter().find(|s| search_slots(&s.coefficients).len() >= 2).unwrap();
    let params = ModelParams::init(tiny(), 5).unwrap();
    let mut pred = predict_grid(&params, &s).unwrap();
    // Row 0 is the IC fed to the graph.
    pred[..s.n_x].copy_from_slice(&s.ic);
    s.solution = pred;
    (params, s)
}

#[test]
fn search_excludes_c10() {
    let mut c = graphpde::ir::PdeCoefficients::zero();
    c.c[1][0] = 2.0;
    c.c[0][2] = 1.0;
    c.nu = 0.1;
    assert_eq!(search_slots(&c), vec![CoefSlot { i: 0, k: 2 }]);
}

#[test]
fn recovery_cannot_do_worse_than_truth() {
    let (params, s) = self_consistent();
    let problem = InverseProblem::for_sample(&s, s.solution.clone());
    let truth: Vec<f64> = problem.search.iter().map(|&k| s.coefficients.get(k)).collect();
    let pso = PsoConfig {
        swarm_size: 8,
        iterations: 5,
        seeded_positions: vec![truth.clone()],
        ..PsoConfig::with_bounds(vec![(-3.0, 3.0); problem.search.len()])
    };
    let r = recover_coefficients(&problem, &params, &pso).unwrap();
    let at_truth = Objective::new(&problem, &params).unwrap().eval(&truth).unwrap();
    assert!(r.objective <= at_truth, "{} > {at_truth}", r.objective);
    assert!(r.values.iter().all(|v| (-3.0..=3.0).contains(v)));
    assert_eq!(r.coefficients.nu, s.coefficients.nu);
    assert_eq!(r.coefficients.c[1][0], s.coefficients.c[1][0]);
    let report = InversionReport::new(&problem, &pso, &r, 0.0, Some(truth));
    let json = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<InversionReport>(&json).unwrap(), report);
    assert!(!report.template.contains("1 "));
    for name in &report.coefficients {
        assert!(report.template.contains(name.as_str()), "{} lacks {name}", report.template);
    }
}

#[test]
fn subsampled_objective_is_deterministic() {
    let (params, s) = self_consistent();
    let mut problem = InverseProblem::for_sample(&s, s.solution.clone());
    problem.subsample = Some(200);
    let x = vec![0.5; problem.search.len()];
    let a = Objective::new(&problem, &params).unwrap().eval(&x).unwrap();
    let b = Objective::new(&problem, &params).unwrap().eval(&x).unwrap();
    assert_eq!(a, b);
    problem.subsample_seed = 1;
    assert_ne!(a, Objective::new(&problem, &params).unwrap().eval(&x).unwrap());
}

#[test]
fn problem_errors() {
    let (params, s) = self_consistent();
    let mut p = InverseProblem::for_sample(&s, s.solution.clone());
    let pso = PsoConfig::with_bounds(vec![(-3.0, 3.0); p.search.len()]);
    p.observation[5] = f32::NAN;
    assert!(matches!(recover_coefficients(&p, &params, &pso), Err(InverseError::NonFiniteObservation)));
    let mut p = InverseProblem::for_sample(&s, s.solution.clone());
    p.search.clear();
    assert!(matches!(recover_coefficients(&p, &params, &PsoConfig::with_bounds(vec![])), Err(InverseError::NoUnknowns)));
    let p = InverseProblem::for_sample(&s, s.solution.clone());
    let other = ModelParams::init(ModelConfig { n_patch: 8, ..tiny() }, 0).unwrap();
    assert!(matches!(recover_coefficients(&p, &other, &pso), Err(InverseError::ModelIncompatible(_))));
    let wrong = PsoConfig::with_bounds(vec![(-3.0, 3.0); p.search.len() + 1]);
    assert!(matches!(recover_coefficients(&p, &params, &wrong), Err(InverseError::Config(_))));
}
