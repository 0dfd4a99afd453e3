use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use srra::learner::{Erm, Params};
use srra::oracle::{LabelOracle, NoiseKind, NoiseSpec};
use srra::{Clustering, Permutation};
use srra_harness::config::{ClassKind, ExperimentConfig, Inputs, OutputSpec, Overrides, Task};
use srra_harness::error::{HarnessError, Result};
use srra_harness::sweep::Axis;
use srra_harness::theta::theta_report;
use srra_harness::verify::{self, Options, SUITES};

// Like println!, but a closed stdout (e.g. piped into head) is not an error.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "srra", version, about = "Active learning experiments with smooth relative regret approximations")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learner once and write `<name>.json` and `<name>_trajectory.csv`.
    Run(ConfigArgs),
    /// Vary one parameter and write one record per point plus a summary CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run a named property suite (`--list` shows them).
    Verify {
        suite: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the suite's number of trials, builds or seeds.
        #[arg(long)]
        trials: Option<usize>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Materialize a label oracle and save `<name>_labels.csv` and `<name>_oracle.json`.
    OracleGen(ConfigArgs),
    /// Report disagreement coefficients of the configured class.
    Theta {
        #[command(flatten)]
        config: ConfigArgs,
        /// Smallest radius considered (default: mu).
        #[arg(long)]
        r_floor: Option<f64>,
    },
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON configuration; when given, it replaces every other config flag.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (beats the config file and SRRA_OUT_DIR).
    #[arg(long)]
    out_dir: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Task::Lrpp)]
    task: Task,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,

    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 3)]
    iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 1.0)]
    c3: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// none | uniform_flip | distance_decay | adversarial_file
    #[arg(long, default_value = "none")]
    noise: String,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[arg(long)]
    noise_file: Option<String>,

    /// exact | local_search
    #[arg(long, default_value = "exact")]
    erm: String,
    #[arg(long, default_value_t = 5)]
    restarts: usize,

    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value_t = ClassKind::Thresholds)]
    class_kind: ClassKind,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    class: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    name: String,
    #[arg(long)]
    record_timing: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            return ExperimentConfig::load(path);
        }
        let kind = match self.noise.as_str() {
            "none" => NoiseKind::None,
            "uniform_flip" => NoiseKind::UniformFlip { eta: self.eta },
            "distance_decay" => NoiseKind::DistanceDecay {
                rho: self.rho,
                scale: self.scale,
            },
            "adversarial_file" => NoiseKind::AdversarialFile {
                path: self
                    .noise_file
                    .clone()
                    .ok_or_else(|| HarnessError::config("noise.path", "--noise-file is required"))?,
            },
            other => return Err(HarnessError::config("noise.kind", format!("unknown noise model `{other}`"))),
        };
        let erm = match self.erm.as_str() {
            "exact" => Erm::Exact,
            "local_search" => Erm::LocalSearch {
                restarts: self.restarts,
            },
            other => return Err(HarnessError::config("erm.kind", format!("unknown minimizer `{other}`"))),
        };
        let config = ExperimentConfig {
            task: self.task,
            n: self.n,
            k: self.k,
            d: self.d,
            params: Params {
                epsilon: self.epsilon,
                mu: self.mu,
                delta: self.delta,
                iterations: self.iterations,
                c1: self.c1,
                c2: self.c2,
                c3: self.c3,
                master_seed: self.seed,
            },
            noise: NoiseSpec {
                kind,
                seed: self.noise_seed,
            },
            erm,
            overrides: Overrides {
                p: self.p,
                q: self.q,
                m: self.m,
            },
            class_kind: self.class_kind,
            budget: self.budget,
            inputs: Inputs {
                truth: self.truth.clone(),
                features: self.features.clone(),
                class: self.class.clone(),
            },
            output: OutputSpec {
                dir: None,
                name: self.name.clone(),
            },
            record_timing: self.record_timing,
        };
        config.validate()?;
        Ok(config)
    }
}

fn oracle_gen(config: &ExperimentConfig, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let mut rng = srra::rng::stream(config.params.master_seed, &[0x7472_7574]);
    let oracle = match config.task {
        Task::Lrpp => {
            let truth = match &config.inputs.truth {
                Some(path) => Permutation::read_csv(path)?,
                None => Permutation::random(config.n, &mut rng)?,
            };
            LabelOracle::ranking(&truth, &config.noise)?
        }
        Task::Clustering => {
            let k = config.k.expect("validated");
            let truth = match &config.inputs.truth {
                Some(path) => Clustering::read_csv(path, Some(k))?,
                None => Clustering::random(config.n, k, &mut rng)?,
            };
            LabelOracle::clustering(&truth, &config.noise)?
        }
        _ => return Err(HarnessError::config("task", "oracle-gen supports lrpp and clustering")),
    };
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let labels = dir.join(format!("{}_labels.csv", config.output.name));
    let sidecar = dir.join(format!("{}_oracle.json", config.output.name));
    oracle.save(&labels, &sidecar)?;
    Ok((labels, sidecar))
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let record = srra_harness::run(&config)?;
            let dir = config.out_dir(args.out_dir.as_deref());
            let (json, csv) = srra_harness::write_run(&record, &dir, &config.output.name)?;
            out!("{}", json.display());
            out!("{}", csv.display());
            if record.status != srra::learner::RunStatus::Completed {
                eprintln!("run stopped early: {:?}", record.status);
            }
            Ok(true)
        }
        Command::Sweep { config, axis, values } => {
            let template = config.resolve()?;
            let points = srra_harness::sweep(&template, axis, &values)?;
            let dir = template.out_dir(config.out_dir.as_deref());
            let summary = srra_harness::write_sweep(&points, axis, &dir, &template.output.name)?;
            out!("{}", summary.display());
            Ok(true)
        }
        Command::Verify {
            suite,
            list,
            seed,
            trials,
            json,
        } => {
            let Some(suite) = suite.filter(|_| !list) else {
                for (name, about) in SUITES {
                    out!("{name:<24} {about}");
                }
                return Ok(true);
            };
            let report = verify::verify(&suite, &Options { seed, trials })?;
            if json {
                out!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for p in &report.properties {
                    let tag = if p.passed { "PASS" } else { "FAIL" };
                    out!("{tag}  {}: {}", p.name, p.detail);
                }
            }
            Ok(report.passed())
        }
        Command::OracleGen(args) => {
            let config = args.resolve()?;
            let (labels, sidecar) = oracle_gen(&config, &config.out_dir(args.out_dir.as_deref()))?;
            out!("{}", labels.display());
            out!("{}", sidecar.display());
            Ok(true)
        }
        Command::Theta { config, r_floor } => {
            let report = theta_report(&config.resolve()?, r_floor)?;
            out!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cli.threads;
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
