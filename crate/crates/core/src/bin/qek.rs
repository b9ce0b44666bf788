use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qek::datasets::{self, FetchOutcome, Manifest, ReduceMethod};
use qek::experiment::{self, ModelFile, RunConfig, OUT_DIR_ENV};
use qek::{AnsatzSpec, Architecture, Error, Result};

/// Quantum embedding kernel experiments.
#[derive(Parser)]
#[command(name = "qek", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download and verify a dataset.
    Fetch {
        dataset: String,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train one model and write its trace CSV and model JSON.
    Train {
        #[arg(long)]
        arch: Option<Architecture>,
        #[arg(long)]
        layers: Option<usize>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run the architecture x layer x repetition grid.
    Sweep {
        /// Comma-separated architectures.
        #[arg(long, value_delimiter = ',')]
        architectures: Option<Vec<Architecture>>,
        /// Layer list (`1,2,3`) or inclusive range (`1..5`).
        #[arg(long, value_parser = parse_layers)]
        layers: Option<LayerList>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Report what gate erasure removes from the echo circuit.
    EraseCheck {
        #[arg(long)]
        arch: Architecture,
        #[arg(long)]
        layers: usize,
        #[arg(long, default_value_t = 5)]
        qubits: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute the test accuracy of a trained model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Write the training Gram matrix as CSV.
        #[arg(long)]
        gram: Option<PathBuf>,
    },
}

#[derive(Clone)]
struct LayerList(Vec<usize>);

fn parse_layers(s: &str) -> std::result::Result<LayerList, String> {
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("empty layer range {s}"));
        }
        return Ok(LayerList((a..=b).collect()));
    }
    s.split(',')
        .map(num)
        .collect::<std::result::Result<_, _>>()
        .map(LayerList)
}

/// Flags shared by `train` and `sweep`; each mirrors a config key.
#[derive(Args)]
struct RunOpts {
    /// Flat JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    fd_epsilon: Option<f64>,
    #[arg(long)]
    feature_scale: Option<f64>,
    #[arg(long = "c")]
    c: Option<f64>,
    #[arg(long)]
    reduce: Option<ReduceMethod>,
    #[arg(long)]
    class_cap: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_candidates: Option<usize>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

macro_rules! overlay {
    ($cfg:ident, $opts:ident; $($flag:ident => $key:ident),* $(,)?) => {
        $(if let Some(v) = $opts.$flag.clone() { $cfg.$key = v; })*
    };
}

impl RunOpts {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        overlay!(cfg, self;
            dataset => dataset, data_dir => data_dir, out_dir => out_dir,
            qubits => n_qubits, iterations => iterations, batch_size => batch_size,
            checkpoint_every => checkpoint_every, learning_rate => learning_rate,
            fd_epsilon => fd_epsilon, feature_scale => feature_scale, c => c,
            reduce => reduce, train_fraction => train_fraction,
            split_candidates => split_candidates, split_seed => split_seed, seed => seed,
        );
        if self.manifest.is_some() {
            cfg.manifest = self.manifest.clone();
        }
        if self.class_cap.is_some() {
            cfg.class_cap = self.class_cap;
        }
        Ok(cfg)
    }
}

fn single<T: Copy>(flag: Option<T>, list: &[T], what: &str) -> Result<T> {
    match (flag, list) {
        (Some(v), _) => Ok(v),
        (None, [v]) => Ok(*v),
        _ => Err(Error::Config(format!(
            "train needs exactly one {what} (use --{what})"
        ))),
    }
}

fn fetch(name: &str, data_dir: &Path, manifest: Option<&Path>) -> Result<()> {
    let manifest = match manifest {
        Some(p) => Manifest::load(p)?,
        None => Manifest::builtin(),
    };
    let entry = manifest.entry(name)?;
    match datasets::fetch(entry, data_dir)? {
        FetchOutcome::Cached { path, sha256 } => {
            println!("cached {} sha256={sha256}", path.display())
        }
        FetchOutcome::Downloaded { path, sha256 } => {
            println!("downloaded {} sha256={sha256}", path.display())
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), |v| format!("{v:.6}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fetch {
            dataset,
            data_dir,
            manifest,
        } => fetch(&dataset, &data_dir, manifest.as_deref()),
        Command::Train { arch, layers, opts } => {
            let cfg = opts.resolve()?;
            let arch = single(arch, &cfg.architectures, "arch")?;
            let layers = single(layers, &cfg.layers, "layers")?;
            let art = experiment::run_train(&cfg, arch, layers)?;
            let m = &art.model.metrics;
            println!("trace  {}", art.trace_path.display());
            println!("model  {}", art.model_path.display());
            println!(
                "alignment {} -> {}  accuracy {:.6}  elapsed {:.2}s",
                fmt_opt(m.initial_alignment),
                fmt_opt(m.final_alignment),
                m.final_accuracy,
                m.elapsed_seconds
            );
            Ok(())
        }
        Command::Sweep {
            architectures,
            layers,
            repetitions,
            master_seed,
            jobs,
            opts,
        } => {
            let mut cfg = opts.resolve()?;
            if let Some(a) = architectures {
                cfg.architectures = a;
            }
            if let Some(LayerList(l)) = layers {
                cfg.layers = l;
            }
            cfg.repetitions = repetitions.unwrap_or(cfg.repetitions);
            cfg.master_seed = master_seed.unwrap_or(cfg.master_seed);
            cfg.jobs = jobs.unwrap_or(cfg.jobs);
            let r = experiment::run_sweep(&cfg)?;
            println!("summary {}", r.summary_path.display());
            println!("stats   {}", r.stats_path.display());
            println!(
                "{} cells run, {} resumed, {} failed, {:.2}s",
                r.ran, r.skipped, r.failed, r.wall_seconds
            );
            Ok(())
        }
        Command::EraseCheck {
            arch,
            layers,
            qubits,
            trials,
            seed,
        } => {
            let spec = AnsatzSpec::new(arch, qubits, layers)?;
            let report = experiment::erase_check(&spec, trials, seed)?;
            print!("{}", report.render());
            if !report.passed() {
                // numeric failure
                std::process::exit(4);
            }
            Ok(())
        }
        Command::Evaluate {
            model,
            dataset,
            data_dir,
            manifest,
            gram,
        } => {
            let m = ModelFile::load(&model)?;
            if let Some(d) = dataset {
                if !d.eq_ignore_ascii_case(&m.dataset) {
                    return Err(Error::Config(format!(
                        "model was trained on {}, not {d}",
                        m.dataset
                    )));
                }
            }
            let data = RunConfig {
                data_dir: data_dir.unwrap_or_else(|| m.config.data_dir.clone()),
                manifest: manifest.or_else(|| m.config.manifest.clone()),
                ..RunConfig::default()
            };
            let ev = experiment::evaluate(&m, &data)?;
            println!("accuracy {}", ev.accuracy);
            println!("alignment {}", fmt_opt(ev.alignment));
            if let Some(p) = gram {
                std::fs::write(&p, ev.gram.to_csv()).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                println!("gram {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
