//! `graphpde` subcommands. Exit codes: 0 success, 1 usage error, 2 runtime
//! error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use graphpde::dag::compile;
use graphpde::datagen::{generate_samples, DatagenConfig, GridConfig, IcRecipe, SineTerm};
use graphpde::encoder::GraphInput;
use graphpde::inverse::{add_noise, recover_coefficients, InverseProblem, InversionReport, PsoConfig};
use graphpde::io::{
    export_heatmap, load_checkpoint, read_dataset, save_checkpoint, write_dataset, write_loss_csv, HeatmapOptions,
};
use graphpde::ir::{parse_pde, CoefTable};
use graphpde::model::ModelConfig;
use graphpde::trainer::{evaluate, predict_grid, train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "graphpde", version, about = "Symbolic PDEs to solutions with a pretrained graph model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    scale: Option<Scale>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Scale {
    Desk,
    Paper,
}

impl Scale {
    fn model(self) -> ModelConfig {
        match self {
            Scale::Desk => ModelConfig::desk(),
            Scale::Paper => ModelConfig::paper(),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset directory.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Train (or fine-tune) a model on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint to continue from.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Full-grid relative L2 of a checkpoint on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Predict the solution of one PDE on the data grid.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Equation in the DSL, e.g. `dt(u) + dx(a*u^2) - nu*dxx(u) = 0`.
        #[arg(long)]
        pde: Option<String>,
        /// Coefficient value, `name=value`; repeatable.
        #[arg(long = "coef")]
        coefs: Vec<String>,
        /// Initial condition as sine terms `A:n:phase`, comma separated.
        #[arg(long)]
        ic_sines: Option<String>,
        /// Initial condition values, one per grid point, whitespace or comma separated.
        #[arg(long)]
        ic_file: Option<PathBuf>,
    },
    /// Recover coefficients of one dataset sample from its noisy solution.
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        swarm: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        subsample: Option<usize>,
    },
    /// SVG heatmap of a dataset sample or of a model prediction for it.
    ExportPlot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Plot this checkpoint's prediction instead of the stored solution.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

/// Parses argv (including the program name) and runs; returns the exit code.
pub fn run_cli(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn load_config<T: DeserializeOwned>(path: &Option<PathBuf>, default: T) -> Result<T> {
    match path {
        None => Ok(default),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn echo_config<T: Serialize>(out: &Path, command: &str, config: &T) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let value = serde_json::json!({ "format_version": graphpde::io::FORMAT_VERSION, "command": command, "config": config });
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    fs::write(out.join("run_config.json"), text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct GenRun<'a> {
    seed: u64,
    datagen: &'a DatagenConfig,
}

#[derive(Serialize)]
struct TrainRun<'a> {
    data: &'a Path,
    init: Option<&'a Path>,
    train: &'a TrainConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct InvertConfig {
    noise: f64,
    subsample: Option<usize>,
    pso: PsoConfig,
}

impl Default for InvertConfig {
    fn default() -> Self {
        Self { noise: 0.0, subsample: None, pso: PsoConfig::default() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EvalConfig {
    /// Expected model; the checkpoint must match when given.
    model: Option<ModelConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct InferConfig {
    pde: Option<String>,
    coefficients: std::collections::BTreeMap<String, f64>,
    ic: Option<Vec<f64>>,
    ic_sines: Vec<SineTerm>,
    grid: GridConfig,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            pde: None,
            coefficients: Default::default(),
            ic: None,
            ic_sines: vec![SineTerm { amplitude: 1.0, n: 1, phase: 0.0 }],
            grid: GridConfig::default(),
        }
    }
}

fn check_model(expected: &Option<ModelConfig>, scale: Option<Scale>, got: &ModelConfig) -> Result<()> {
    let want = expected.clone().or_else(|| scale.map(Scale::model));
    if let Some(w) = want {
        if &w != got {
            bail!("checkpoint model config does not match the requested one");
        }
    }
    Ok(())
}

/// Full grid as CSV, one time row per line.
fn grid_csv(field: &[f32], n_x: usize) -> String {
    let mut s = String::new();
    for row in field.chunks(n_x) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:e}");
        }
        s.push('\n');
    }
    s
}

fn parse_sines(text: &str) -> Result<Vec<SineTerm>> {
    text.split(',')
        .map(|t| {
            let f: Vec<&str> = t.trim().split(':').collect();
            if f.len() != 3 {
                bail!("sine term `{t}` is not A:n:phase");
            }
            Ok(SineTerm { amplitude: f[0].parse()?, n: f[1].parse()?, phase: f[2].parse()? })
        })
        .collect()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen { common, count, threads } => {
            let mut cfg: DatagenConfig = load_config(&common.config, DatagenConfig::with_count(10))?;
            if let Some(c) = count {
                cfg.count = c;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            let seed = common.seed.unwrap_or(0);
            let (samples, stats) = generate_samples(&cfg, seed)?;
            write_dataset(&common.out, &samples, &stats, Some(&cfg), seed)?;
            echo_config(&common.out, "gen", &GenRun { seed, datagen: &cfg })?;
            eprintln!("{} samples, {} rejected of {} draws", stats.accepted, stats.rejected(), stats.draws);
        }
        Command::Train { common, data, init, epochs, batch_size, lr, points, threads } => {
            let mut default = TrainConfig::default();
            if let Some(s) = common.scale {
                default.model = s.model();
            }
            let mut cfg: TrainConfig = load_config(&common.config, default)?;
            if let (Some(s), Some(_)) = (common.scale, &common.config) {
                cfg.model = s.model();
            }
            if let Some(v) = epochs {
                cfg.epochs = v;
                cfg.warmup_epochs = cfg.warmup_epochs.min(v.saturating_sub(1));
            }
            if let Some(v) = batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = lr {
                cfg.base_lr = v;
            }
            if let Some(v) = points {
                cfg.points_per_sample = v;
            }
            if let Some(v) = threads {
                cfg.threads = v;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            let dataset = read_dataset(&data)?;
            let start = match &init {
                Some(p) => Some(load_checkpoint(p)?.params),
                None => None,
            };
            echo_config(&common.out, "train", &TrainRun { data: &data, init: init.as_deref(), train: &cfg })?;
            let out = common.out.clone();
            let every = cfg.checkpoint_every;
            let run = train(&dataset.samples, &cfg, start, &mut |log, params, adam| {
                eprintln!("epoch {} lr {:.3e} train {:.5}", log.epoch, log.lr, log.train_loss);
                if every > 0 && (log.epoch + 1) % every == 0 {
                    save_checkpoint(&out.join(format!("checkpoint-{:06}", log.epoch + 1)), params, Some(adam), log.epoch + 1)
                        .map_err(|e| std::io::Error::other(e.to_string()))?;
                }
                Ok(())
            })?;
            save_checkpoint(&common.out.join("checkpoint"), &run.params, Some(&run.optimizer), cfg.epochs)?;
            write_loss_csv(&common.out.join("loss.csv"), &run.curve)?;
            write_json(
                &common.out.join("split.json"),
                &serde_json::json!({ "train": run.train_indices, "test": run.test_indices }),
            )?;
        }
        Command::Eval { common, checkpoint, data } => {
            let cfg: EvalConfig = load_config(&common.config, EvalConfig::default())?;
            let ck = load_checkpoint(&checkpoint)?;
            check_model(&cfg.model, common.scale, &ck.params.config)?;
            let dataset = read_dataset(&data)?;
            let report = evaluate(&ck.params, &dataset.samples)?;
            echo_config(&common.out, "eval", &serde_json::json!({ "checkpoint": checkpoint, "data": data, "eval": cfg }))?;
            write_json(&common.out.join("metrics.json"), &report)?;
            println!("mean relative L2 {:.6}", report.mean);
        }
        Command::Infer { common, checkpoint, pde, coefs, ic_sines, ic_file } => {
            let mut cfg: InferConfig = load_config(&common.config, InferConfig::default())?;
            if let Some(p) = pde {
                cfg.pde = Some(p);
            }
            for kv in &coefs {
                let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("--coef expects name=value, got `{kv}`"))?;
                cfg.coefficients.insert(k.trim().to_string(), v.trim().parse().with_context(|| format!("value of {k}"))?);
            }
            if let Some(s) = ic_sines {
                cfg.ic_sines = parse_sines(&s)?;
                cfg.ic = None;
            }
            if let Some(p) = ic_file {
                let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                let vals: Result<Vec<f64>, _> =
                    text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(str::parse).collect();
                cfg.ic = Some(vals.context("parsing initial condition")?);
            }
            let text = cfg.pde.clone().ok_or_else(|| anyhow!("no PDE given (--pde or config `pde`)"))?;
            let ck = load_checkpoint(&checkpoint)?;
            check_model(&None, common.scale, &ck.params.config)?;
            let table: CoefTable = cfg.coefficients.iter().map(|(k, v)| (k.clone(), Some(*v))).collect();
            let ast = parse_pde(&text, &table)?;
            let grid = GridConfig { n_x: ck.params.config.n_x(), ..cfg.grid };
            let ic = match &cfg.ic {
                Some(v) => v.clone(),
                None => IcRecipe { terms: cfg.ic_sines.clone(), abs_sign: None, window: None }.eval(&grid.xs()),
            };
            let ic: Vec<f64> = ic.iter().map(|&v| v as f32 as f64).collect();
            let graph = compile(&ast, &ic, &ck.params.config.graph())?;
            let input = GraphInput::new(&graph, &ck.params.config)?;
            let coords: Vec<[f32; 2]> = (0..grid.n_t)
                .flat_map(|t| (0..grid.n_x).map(move |x| (t, x)))
                .map(|(t, x)| [grid.t(t) as f32, grid.x(x) as f32])
                .collect();
            let mut pred = Vec::with_capacity(coords.len());
            for chunk in coords.chunks(4096) {
                pred.extend(ck.params.predict(&input, chunk)?);
            }
            echo_config(&common.out, "infer", &serde_json::json!({ "checkpoint": checkpoint, "infer": cfg }))?;
            fs::write(common.out.join("prediction.csv"), grid_csv(&pred, grid.n_x))?;
        }
        Command::Invert { common, checkpoint, data, index, noise, swarm, iterations, subsample } => {
            let mut cfg: InvertConfig = load_config(&common.config, InvertConfig::default())?;
            if let Some(r) = noise {
                cfg.noise = r;
            }
            if let Some(s) = swarm {
                cfg.pso.swarm_size = s;
            }
            if let Some(i) = iterations {
                cfg.pso.iterations = i;
            }
            if subsample.is_some() {
                cfg.subsample = subsample;
            }
            if let Some(s) = common.seed {
                cfg.pso.seed = s;
            }
            let ck = load_checkpoint(&checkpoint)?;
            check_model(&None, common.scale, &ck.params.config)?;
            let dataset = read_dataset(&data)?;
            let sample = dataset
                .samples
                .get(index)
                .ok_or_else(|| anyhow!("dataset has {} samples, no index {index}", dataset.samples.len()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.pso.seed ^ 0x4E01_5E);
            let observed = add_noise(&sample.solution, cfg.noise, &mut rng);
            let mut problem = InverseProblem::for_sample(sample, observed);
            problem.subsample = cfg.subsample;
            problem.subsample_seed = cfg.pso.seed;
            if cfg.pso.bounds.is_empty() {
                cfg.pso.bounds = vec![(-3.0, 3.0); problem.search.len()];
            }
            echo_config(&common.out, "invert", &serde_json::json!({ "checkpoint": checkpoint, "data": data, "index": index, "invert": cfg }))?;
            let result = recover_coefficients(&problem, &ck.params, &cfg.pso)?;
            let truth = problem.search.iter().map(|&s| sample.coefficients.get(s)).collect();
            let report = InversionReport::new(&problem, &cfg.pso, &result, cfg.noise, Some(truth));
            write_json(&common.out.join("inversion.json"), &report)?;
            for (name, v) in report.coefficients.iter().zip(&report.recovered) {
                println!("{name} = {v:.6}");
            }
        }
        Command::ExportPlot { common, data, index, checkpoint } => {
            let opts: HeatmapOptions = load_config(&common.config, HeatmapOptions::default())?;
            let dataset = read_dataset(&data)?;
            let sample = dataset
                .samples
                .get(index)
                .ok_or_else(|| anyhow!("dataset has {} samples, no index {index}", dataset.samples.len()))?;
            let (field, name) = match &checkpoint {
                Some(p) => {
                    let ck = load_checkpoint(p)?;
                    (predict_grid(&ck.params, sample)?, "prediction")
                }
                None => (sample.solution.clone(), "solution"),
            };
            echo_config(&common.out, "export-plot", &serde_json::json!({ "data": data, "index": index, "checkpoint": checkpoint, "plot": opts }))?;
            export_heatmap(&common.out.join(format!("{name}-{index:06}.svg")), &field, sample.n_t, sample.n_x, &opts)?;
        }
    }
    Ok(())
}
