//! Experiment runner behind the `qek` binary.
//!
//! Artifacts:
//!
//! * trace CSV `trace_<dataset>_<arch>_<layers>_<seed>.csv` with header
//!   `iteration,alignment,test_accuracy,elapsed_seconds`
//! * model JSON `model_<dataset>_<arch>_<layers>_<seed>.json` ([`ModelFile`])
//! * sweep summary `summary_<dataset>.csv` with header [`SUMMARY_HEADER`]
//!   and per-cell statistics in `summary_<dataset>_stats.csv`
//!
//! Failed sweep cells keep their row with `error` in both metric columns.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{echo_template, erase_redundant, AnsatzSpec, Architecture, GateCounts};
use crate::datasets::{self, Dataset, Manifest, ReduceMethod};
use crate::error::{Error, Result};
use crate::kernel::Embedding;
use crate::statesim::State;
use crate::train::{self, evaluate_checkpoint, AlignmentTrace, Samples, TrainConfig};

pub const OUT_DIR_ENV: &str = "QEK_OUT_DIR";

pub const SUMMARY_HEADER: &str = "dataset,arch,layers,rep,seed,final_accuracy,final_alignment,elapsed_seconds,one_qubit_gates,two_qubit_gates";

/// Flat experiment configuration; every key has a matching CLI flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: String,
    pub data_dir: PathBuf,
    /// Manifest override; the bundled manifest is used when absent.
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub architectures: Vec<Architecture>,
    pub layers: Vec<usize>,
    pub repetitions: usize,
    pub n_qubits: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub checkpoint_every: usize,
    pub learning_rate: f64,
    pub fd_epsilon: f64,
    pub feature_scale: f64,
    pub c: f64,
    pub reduce: ReduceMethod,
    pub class_cap: Option<usize>,
    pub train_fraction: f64,
    pub split_candidates: usize,
    pub split_seed: u64,
    /// Seed of a single `train` run.
    pub seed: u64,
    /// Root of the per-run seeds of a sweep.
    pub master_seed: u64,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: String::new(),
            data_dir: PathBuf::from("data"),
            manifest: None,
            out_dir: PathBuf::from("out"),
            architectures: Architecture::ALL.to_vec(),
            layers: (1..=5).collect(),
            repetitions: 25,
            n_qubits: 5,
            iterations: 5000,
            batch_size: 5,
            checkpoint_every: 250,
            learning_rate: 0.2,
            fd_epsilon: 1e-3,
            feature_scale: 1.0,
            c: 1.0,
            reduce: ReduceMethod::Pca,
            class_cap: None,
            train_fraction: 0.75,
            split_candidates: 25,
            split_seed: 0,
            seed: 0,
            master_seed: 0,
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dataset.is_empty() {
            return bad("no dataset given".into());
        }
        if self.architectures.is_empty() {
            return bad("architecture list is empty".into());
        }
        if self.layers.is_empty() {
            return bad("layer range is empty".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if self.split_candidates == 0 {
            return bad("split_candidates must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if self.class_cap == Some(0) {
            return bad("class_cap must be >= 1".into());
        }
        AnsatzSpec::new(Architecture::DataFirst, self.n_qubits, 1)
            .map_err(|e| Error::Config(e.to_string()))?;
        self.train_config(Architecture::DataFirst, 1, 0)?.validate()
    }

    pub fn manifest(&self) -> Result<Manifest> {
        match &self.manifest {
            Some(p) => Manifest::load(p),
            None => Ok(Manifest::builtin()),
        }
    }

    /// Training settings for one run. Initialization and minibatch draws use
    /// separate streams derived from `seed`.
    pub fn train_config(
        &self,
        arch: Architecture,
        layers: usize,
        seed: u64,
    ) -> Result<TrainConfig> {
        let spec = AnsatzSpec::new(arch, self.n_qubits, layers)?;
        Ok(TrainConfig {
            spec,
            iterations: self.iterations,
            batch_size: self.batch_size,
            checkpoint_every: self.checkpoint_every,
            learning_rate: self.learning_rate,
            fd_epsilon: self.fd_epsilon,
            init_seed: seed,
            batch_seed: splitmix64(seed ^ 0x6261_7463_6865_7321),
            feature_scale: self.feature_scale,
            c: self.c,
        })
    }
}

/// One round of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repetition `rep` in a sweep. It ignores the architecture and
/// layer count so that every cell of one repetition starts from the same
/// random streams (matched seeds across the grid).
pub fn run_seed(master_seed: u64, rep: usize) -> u64 {
    splitmix64(splitmix64(master_seed) ^ rep as u64)
}

/// Train/test sets ready for training.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    /// Seed of the split picked by [`datasets::select_split`].
    pub split_seed: u64,
}

impl Prepared {
    pub fn train_samples(&self) -> Samples<'_> {
        Samples {
            features: &self.train.features,
            labels: &self.train.labels,
        }
    }

    pub fn test_samples(&self) -> Samples<'_> {
        Samples {
            features: &self.test.features,
            labels: &self.test.labels,
        }
    }
}

/// Reads the fetched dataset file named by the config.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let manifest = cfg.manifest()?;
    let entry = manifest.entry(&cfg.dataset)?;
    let path = cfg.data_dir.join(&entry.file);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run `qek fetch {}` first",
            path.display(),
            entry.name
        )));
    }
    datasets::load(entry, &path)
}

/// Normalize, fit the width to the qubit count, optionally cap classes,
/// then split with the most balanced of the candidate seeds.
pub fn prepare(cfg: &RunConfig, raw: &Dataset) -> Result<Prepared> {
    let mut ds = datasets::normalize_minmax(raw)?;
    let n = cfg.n_qubits;
    if ds.n_features() > n {
        ds = datasets::reduce_features(&ds, n, cfg.reduce)?;
    } else if ds.n_features() < n {
        log::info!(
            "{}: padding {} features with zero columns to {n} qubits",
            ds.name,
            ds.n_features()
        );
        for row in &mut ds.features {
            row.resize(n, 0.0);
        }
    }
    if let Some(cap) = cfg.class_cap {
        ds = datasets::subsample_per_class(&ds, cap, cfg.split_seed);
    }
    let split_seed = datasets::select_split(
        &ds,
        cfg.split_candidates,
        cfg.train_fraction,
        cfg.split_seed,
    )?;
    let (train, test) = datasets::stratified_split(&ds, cfg.train_fraction, split_seed)?;
    Ok(Prepared {
        train,
        test,
        split_seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub final_accuracy: f64,
    /// `None` when the final kernel matrix was degenerate.
    pub final_alignment: Option<f64>,
    pub initial_alignment: Option<f64>,
    pub elapsed_seconds: f64,
}

/// Final-model JSON written by `train` and read by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub dataset: String,
    pub spec: AnsatzSpec,
    pub theta: Vec<f64>,
    pub feature_scale: f64,
    pub c: f64,
    pub seed: u64,
    pub split_seed: u64,
    pub metrics: Metrics,
    pub gate_counts: GateCounts,
    pub config: RunConfig,
}

impl ModelFile {
    pub const FORMAT: &'static str = "qek-model/1";

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if model.format != Self::FORMAT {
            return Err(Error::Config(format!(
                "{}: unsupported model format `{}`",
                path.display(),
                model.format
            )));
        }
        Ok(model)
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn artifact_stem(dataset: &str, arch: Architecture, layers: usize, seed: u64) -> String {
    format!("{dataset}_{arch}_{layers}_{seed}")
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub model: ModelFile,
    pub trace: AlignmentTrace,
    pub trace_path: PathBuf,
    pub model_path: PathBuf,
}

/// One training run on prepared data, without touching the filesystem.
pub fn run_train_on(
    cfg: &RunConfig,
    prepared: &Prepared,
    arch: Architecture,
    layers: usize,
    seed: u64,
) -> Result<(ModelFile, AlignmentTrace)> {
    let tc = cfg.train_config(arch, layers, seed)?;
    let start = Instant::now();
    let outcome = train::train(&tc, prepared.train_samples(), prepared.test_samples())?;
    let elapsed = start.elapsed().as_secs_f64();
    let first = outcome.trace.first().expect("trace has an initial row");
    let last = outcome.trace.last().expect("trace has a final row");
    let model = ModelFile {
        format: ModelFile::FORMAT.into(),
        dataset: cfg.dataset.to_ascii_lowercase(),
        spec: tc.spec,
        theta: outcome.theta.clone(),
        feature_scale: cfg.feature_scale,
        c: cfg.c,
        seed,
        split_seed: prepared.split_seed,
        metrics: Metrics {
            final_accuracy: last.test_accuracy,
            final_alignment: finite(last.alignment),
            initial_alignment: finite(first.alignment),
            elapsed_seconds: elapsed,
        },
        gate_counts: tc.spec.build().count_gates(),
        config: cfg.clone(),
    };
    Ok((model, outcome.trace))
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// `train` subcommand: one run, trace CSV and model JSON in `out_dir`.
pub fn run_train(cfg: &RunConfig, arch: Architecture, layers: usize) -> Result<TrainArtifacts> {
    cfg.validate()?;
    let raw = load_dataset(cfg)?;
    let prepared = prepare(cfg, &raw)?;
    let (model, trace) = run_train_on(cfg, &prepared, arch, layers, cfg.seed)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let stem = artifact_stem(&model.dataset, arch, layers, cfg.seed);
    let trace_path = cfg.out_dir.join(format!("trace_{stem}.csv"));
    let model_path = cfg.out_dir.join(format!("model_{stem}.json"));
    write_atomic(&trace_path, &trace.to_csv())?;
    write_atomic(&model_path, &(serde_json::to_string_pretty(&model)? + "\n"))?;
    Ok(TrainArtifacts {
        model,
        trace,
        trace_path,
        model_path,
    })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub accuracy: f64,
    pub alignment: Option<f64>,
    pub gram: crate::kernel::KernelMatrix,
}

/// Rebuilds the split stored in a model file and recomputes its metrics.
/// `data` overrides where the dataset files are read from.
pub fn evaluate(model: &ModelFile, data: &RunConfig) -> Result<Evaluation> {
    let mut cfg = model.config.clone();
    cfg.data_dir = data.data_dir.clone();
    cfg.manifest = data.manifest.clone();
    let raw = load_dataset(&cfg)?;
    let prepared = prepare(&cfg, &raw)?;
    if prepared.split_seed != model.split_seed {
        log::warn!(
            "split seed {} differs from the recorded {}; the data may have changed",
            prepared.split_seed,
            model.split_seed
        );
    }
    let (alignment, accuracy) = evaluate_checkpoint(
        &model.spec,
        &model.theta,
        model.feature_scale,
        model.c,
        prepared.train_samples(),
        prepared.test_samples(),
    )?;
    let gram = Embedding::new(&model.spec, &model.theta, model.feature_scale)?
        .matrix(&prepared.train.features)?;
    Ok(Evaluation {
        accuracy,
        alignment: finite(alignment),
        gram,
    })
}

/// One row of the sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub arch: Architecture,
    pub layers: usize,
    pub rep: usize,
    pub seed: u64,
    /// `None` marks a failed cell.
    pub final_accuracy: Option<f64>,
    pub final_alignment: Option<f64>,
    pub elapsed_seconds: f64,
    pub gates: GateCounts,
    pub failed: bool,
}

fn opt_field(v: Option<f64>, failed: bool) -> String {
    match (failed, v) {
        (true, _) => "error".into(),
        (false, Some(v)) => v.to_string(),
        (false, None) => "NaN".into(),
    }
}

impl SummaryRow {
    pub fn key(&self) -> (String, Architecture, usize, usize) {
        (self.dataset.clone(), self.arch, self.layers, self.rep)
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.arch,
            self.layers,
            self.rep,
            self.seed,
            opt_field(self.final_accuracy, self.failed),
            opt_field(self.final_alignment, self.failed),
            self.elapsed_seconds,
            self.gates.one_qubit,
            self.gates.two_qubit
        )
    }

    pub fn parse(line: &str) -> Result<SummaryRow> {
        let f: Vec<&str> = line.trim().split(',').collect();
        let err = |m: &str| Error::Parse {
            path: "<summary csv>".into(),
            line: 0,
            msg: format!("{m}: `{line}`"),
        };
        if f.len() != 10 {
            return Err(err("expected 10 fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| err("bad integer"));
        let failed = f[5] == "error";
        let metric = |s: &str| -> Result<Option<f64>> {
            match s {
                "error" => Ok(None),
                s => {
                    let v: f64 = s.parse().map_err(|_| err("bad number"))?;
                    Ok(finite(v))
                }
            }
        };
        Ok(SummaryRow {
            dataset: f[0].to_string(),
            arch: f[1].parse()?,
            layers: int(f[2])?,
            rep: int(f[3])?,
            seed: f[4].parse().map_err(|_| err("bad seed"))?,
            final_accuracy: metric(f[5])?,
            final_alignment: metric(f[6])?,
            elapsed_seconds: f[7].parse().map_err(|_| err("bad elapsed"))?,
            gates: GateCounts {
                one_qubit: int(f[8])?,
                two_qubit: int(f[9])?,
            },
            failed,
        })
    }
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut lines = text.lines();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some(h) if h.trim() == SUMMARY_HEADER => {}
        Some(_) => {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 1,
                msg: "unexpected summary header".into(),
            })
        }
    }
    // a torn final line from a killed run is ignored
    lines
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| match SummaryRow::parse(l) {
            Ok(r) => Some(Ok(r)),
            Err(e) => {
                log::warn!("{}: skipping unreadable row ({e})", path.display());
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub summary_path: PathBuf,
    pub stats_path: PathBuf,
    pub rows: Vec<SummaryRow>,
    pub ran: usize,
    pub skipped: usize,
    pub failed: usize,
    pub wall_seconds: f64,
}

/// Runs every `(arch, layers, rep)` cell not yet present in the summary.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let start = Instant::now();
    let dataset = cfg.dataset.to_ascii_lowercase();
    let raw = load_dataset(cfg)?;
    let prepared = prepare(cfg, &raw)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let summary_path = cfg.out_dir.join(format!("summary_{dataset}.csv"));
    let stats_path = cfg.out_dir.join(format!("summary_{dataset}_stats.csv"));

    let existing = read_summary(&summary_path)?;
    let done: BTreeSet<_> = existing.iter().map(SummaryRow::key).collect();
    let mut cells = Vec::new();
    for &arch in &cfg.architectures {
        for &layers in &cfg.layers {
            for rep in 0..cfg.repetitions {
                if !done.contains(&(dataset.clone(), arch, layers, rep)) {
                    cells.push((arch, layers, rep));
                }
            }
        }
    }
    let skipped = cfg.architectures.len() * cfg.layers.len() * cfg.repetitions - cells.len();
    if skipped > 0 {
        log::info!("resuming: {skipped} cells already recorded");
    }

    // rewrite the file so a torn tail line does not merge with new rows
    let mut body = String::from(SUMMARY_HEADER);
    body.push('\n');
    for r in &existing {
        body.push_str(&r.to_csv_line());
        body.push('\n');
    }
    write_atomic(&summary_path, &body)?;
    let file = OpenOptions::new()
        .append(true)
        .open(&summary_path)
        .map_err(|e| Error::io(&summary_path, e))?;
    let writer = Mutex::new(file);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let new_rows: Vec<Result<SummaryRow>> = pool.install(|| {
        cells
            .par_iter()
            .with_max_len(1)
            .map(|&(arch, layers, rep)| {
                let row = run_cell(cfg, &dataset, &prepared, arch, layers, rep);
                let mut f = writer.lock().unwrap_or_else(|p| p.into_inner());
                writeln!(f, "{}", row.to_csv_line())
                    .and_then(|_| f.flush())
                    .map_err(|e| Error::io(&summary_path, e))?;
                Ok(row)
            })
            .collect()
    });
    let mut rows = existing;
    let mut failed = 0;
    for r in new_rows {
        let r = r?;
        failed += usize::from(r.failed);
        rows.push(r);
    }
    let ran = rows.len() - skipped;
    write_atomic(&stats_path, &summary_stats(&rows))?;
    Ok(SweepReport {
        summary_path,
        stats_path,
        rows,
        ran,
        skipped,
        failed,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_cell(
    cfg: &RunConfig,
    dataset: &str,
    prepared: &Prepared,
    arch: Architecture,
    layers: usize,
    rep: usize,
) -> SummaryRow {
    let seed = run_seed(cfg.master_seed, rep);
    let start = Instant::now();
    let gates = AnsatzSpec::new(arch, cfg.n_qubits, layers)
        .map(|s| s.build().count_gates())
        .unwrap_or_default();
    let mut row = SummaryRow {
        dataset: dataset.to_string(),
        arch,
        layers,
        rep,
        seed,
        final_accuracy: None,
        final_alignment: None,
        elapsed_seconds: 0.0,
        gates,
        failed: false,
    };
    let result = run_train_on(cfg, prepared, arch, layers, seed).and_then(|(model, trace)| {
        let stem = artifact_stem(dataset, arch, layers, seed);
        write_atomic(
            &cfg.out_dir.join(format!("trace_{stem}.csv")),
            &trace.to_csv(),
        )?;
        Ok(model)
    });
    row.elapsed_seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(model) => {
            row.final_accuracy = Some(model.metrics.final_accuracy);
            row.final_alignment = model.metrics.final_alignment;
        }
        Err(e) => {
            log::error!("{arch} L={layers} rep={rep}: {e}");
            row.failed = true;
        }
    }
    row
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub const STATS_HEADER: &str = "dataset,arch,layers,runs,errors,accuracy_mean,accuracy_median,accuracy_q1,accuracy_q3,alignment_mean,alignment_median,elapsed_mean";

/// Per-cell statistics over repetitions, one line per `(dataset, arch, layers)`.
pub fn summary_stats(rows: &[SummaryRow]) -> String {
    let mut groups: Vec<(String, Architecture, usize)> = Vec::new();
    for r in rows {
        let k = (r.dataset.clone(), r.arch, r.layers);
        if !groups.contains(&k) {
            groups.push(k);
        }
    }
    groups.sort();
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for (ds, arch, layers) in groups {
        let cell: Vec<&SummaryRow> = rows
            .iter()
            .filter(|r| r.dataset == ds && r.arch == arch && r.layers == layers)
            .collect();
        let sorted = |f: &dyn Fn(&SummaryRow) -> Option<f64>| {
            let mut v: Vec<f64> = cell.iter().filter_map(|r| f(r)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let acc = sorted(&|r| r.final_accuracy);
        let ali = sorted(&|r| r.final_alignment);
        let mean = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let elapsed: Vec<f64> = cell.iter().map(|r| r.elapsed_seconds).collect();
        let _ = writeln!(
            out,
            "{ds},{arch},{layers},{},{},{},{},{},{},{},{},{}",
            cell.len(),
            cell.iter().filter(|r| r.failed).count(),
            mean(&acc),
            quantile(&acc, 0.5),
            quantile(&acc, 0.25),
            quantile(&acc, 0.75),
            mean(&ali),
            quantile(&ali, 0.5),
            mean(&elapsed),
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct EraseReport {
    pub spec: AnsatzSpec,
    pub before: GateCounts,
    pub after: GateCounts,
    pub erased: usize,
    pub trials: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl EraseReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }

    pub fn render(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "echo circuit: {} L={} qubits={}",
            s.arch, s.n_layers, s.n_qubits
        );
        for (name, c) in [("before", self.before), ("after", self.after)] {
            let _ = writeln!(
                out,
                "{name:<7} one_qubit={} two_qubit={} total={}",
                c.one_qubit,
                c.two_qubit,
                c.total()
            );
        }
        let _ = writeln!(out, "erased  {}", self.erased);
        let _ = writeln!(
            out,
            "value check: {} random bindings, max |delta| = {:.3e} -> {}",
            self.trials,
            self.max_deviation,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        out
    }
}

/// Simplifies the echo circuit of `spec` and checks on random bindings that
/// the kernel value is unchanged.
pub fn erase_check(spec: &AnsatzSpec, trials: usize, seed: u64) -> Result<EraseReport> {
    let echo = echo_template(spec);
    let (reduced, erased) = erase_redundant(&echo)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_qubits;
    let mut max_deviation: f64 = 0.0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
        let theta: Vec<f64> = (0..spec.param_count())
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let value = |c: &crate::circuit::Circuit| -> Result<f64> {
            let gates = c.bind(&x, &theta, 1.0)?.to_gates()?;
            let mut state = State::zero(n)?;
            state.apply_all(&gates)?;
            Ok(state.zero_probability())
        };
        max_deviation = max_deviation.max((value(&echo)? - value(&reduced)?).abs());
    }
    Ok(EraseReport {
        spec: *spec,
        before: echo.count_gates(),
        after: reduced.count_gates(),
        erased,
        trials,
        max_deviation,
        tolerance: 1e-10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_seeds_are_matched_across_cells_and_distinct_across_reps() {
        let a = run_seed(7, 0);
        assert_eq!(a, run_seed(7, 0));
        assert_ne!(a, run_seed(7, 1));
        assert_ne!(a, run_seed(8, 0));
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn summary_row_round_trip() {
        let row = SummaryRow {
            dataset: "wine".into(),
            arch: Architecture::DataWeaved,
            layers: 2,
            rep: 3,
            seed: 99,
            final_accuracy: Some(0.75),
            final_alignment: Some(0.125),
            elapsed_seconds: 1.5,
            gates: GateCounts {
                one_qubit: 40,
                two_qubit: 10,
            },
            failed: false,
        };
        assert_eq!(SummaryRow::parse(&row.to_csv_line()).unwrap(), row);
        let bad = SummaryRow {
            failed: true,
            final_accuracy: None,
            final_alignment: None,
            ..row
        };
        let line = bad.to_csv_line();
        assert!(line.contains(",error,error,"));
        assert_eq!(SummaryRow::parse(&line).unwrap(), bad);
    }

    #[test]
    fn config_defaults_and_unknown_keys() {
        let cfg: RunConfig = serde_json::from_str(r#"{"dataset": "wine"}"#).unwrap();
        assert_eq!(cfg.iterations, 5000);
        assert_eq!(cfg.batch_size, 5);
        assert_eq!(cfg.checkpoint_every, 250);
        assert_eq!(cfg.n_qubits, 5);
        assert_eq!(cfg.layers, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.repetitions, 25);
        cfg.validate().unwrap();
        assert!(serde_json::from_str::<RunConfig>(r#"{"datset": "wine"}"#).is_err());
        let empty = RunConfig {
            layers: vec![],
            ..cfg.clone()
        };
        assert!(empty.validate().is_err());
        let zero = RunConfig {
            repetitions: 0,
            ..cfg
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn erase_check_reports() {
        let df = erase_check(
            &AnsatzSpec::new(Architecture::DataFirst, 3, 1).unwrap(),
            10,
            0,
        )
        .unwrap();
        assert_eq!(df.erased, 12);
        assert!(df.passed());
        assert!(df.render().contains("PASS"));
        for arch in [Architecture::DataLast, Architecture::DataWeaved] {
            let r = erase_check(&AnsatzSpec::new(arch, 3, 2).unwrap(), 10, 0).unwrap();
            assert_eq!(r.erased, 0);
            assert_eq!(r.before, r.after);
        }
    }
}
