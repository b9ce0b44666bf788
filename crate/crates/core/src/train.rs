//! Kernel-target-alignment training.
//!
//! Plain stochastic gradient ascent on the minibatch alignment, with central
//! finite-difference gradients. At iteration 0, every `checkpoint_every`
//! steps and after the final step, the full training-set alignment and the
//! test accuracy of a freshly fitted one-vs-rest SVM are recorded.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::AnsatzSpec;
use crate::error::{Error, Result};
use crate::kernel::{target_alignment, Embedding};
use crate::svm::{self, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub spec: AnsatzSpec,
    pub iterations: usize,
    pub batch_size: usize,
    pub checkpoint_every: usize,
    pub learning_rate: f64,
    pub fd_epsilon: f64,
    pub init_seed: u64,
    pub batch_seed: u64,
    pub feature_scale: f64,
    /// SVM regularization used at checkpoints.
    pub c: f64,
}

impl TrainConfig {
    pub fn new(spec: AnsatzSpec) -> Self {
        TrainConfig {
            spec,
            iterations: 5000,
            batch_size: 5,
            checkpoint_every: 250,
            learning_rate: 0.2,
            fd_epsilon: 1e-3,
            init_seed: 0,
            batch_seed: 0,
            feature_scale: 1.0,
            c: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be >= 2");
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be >= 1");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be > 0");
        }
        if !(self.fd_epsilon > 0.0) || !self.fd_epsilon.is_finite() {
            return bad("fd_epsilon must be > 0");
        }
        if !(self.c > 0.0) {
            return bad("C must be > 0");
        }
        Ok(())
    }
}

/// Labeled feature vectors.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub features: &'a [Vec<f64>],
    pub labels: &'a [usize],
}

impl<'a> Samples<'a> {
    pub fn new(features: &'a [Vec<f64>], labels: &'a [usize]) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::dim("label count", features.len(), labels.len()));
        }
        Ok(Samples { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `2·n·L` angles drawn i.i.d. from `U[0, 2π)`.
pub fn init_params(spec: &AnsatzSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.param_count())
        .map(|_| rng.random_range(0.0..TAU))
        .collect()
}

/// Alignment of the kernel matrix on a batch against its labels.
pub fn batch_alignment(
    spec: &AnsatzSpec,
    theta: &[f64],
    batch: Samples<'_>,
    feature_scale: f64,
) -> Result<f64> {
    if batch.len() < 2 {
        return Err(Error::InvalidArgument(
            "batch must hold at least two samples".into(),
        ));
    }
    let k = Embedding::new(spec, theta, feature_scale)?.matrix(batch.features)?;
    target_alignment(&k, batch.labels)
}

/// Central differences `(A(θ + εe_i) − A(θ − εe_i)) / 2ε`.
pub fn fd_gradient(
    spec: &AnsatzSpec,
    theta: &[f64],
    batch: Samples<'_>,
    epsilon: f64,
    feature_scale: f64,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(
            "finite-difference step must be > 0".into(),
        ));
    }
    if theta.len() != spec.param_count() {
        return Err(Error::dim(
            "parameter vector length",
            spec.param_count(),
            theta.len(),
        ));
    }
    (0..theta.len())
        .into_par_iter()
        .map(|i| {
            let mut shifted = theta.to_vec();
            shifted[i] = theta[i] + epsilon;
            let plus = batch_alignment(spec, &shifted, batch, feature_scale)?;
            shifted[i] = theta[i] - epsilon;
            let minus = batch_alignment(spec, &shifted, batch, feature_scale)?;
            Ok((plus - minus) / (2.0 * epsilon))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// `NaN` when the checkpoint kernel was degenerate.
    pub alignment: f64,
    pub test_accuracy: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTrace {
    pub rows: Vec<TraceRow>,
}

impl AlignmentTrace {
    pub const HEADER: &'static str = "iteration,alignment,test_accuracy,elapsed_seconds";

    pub fn first(&self) -> Option<&TraceRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.iteration, r.alignment, r.test_accuracy, r.elapsed_seconds
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::HEADER) {
            return Err(Error::Parse {
                path: "<trace csv>".into(),
                line: 1,
                msg: format!("expected header `{}`", Self::HEADER),
            });
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let err = |msg: String| Error::Parse {
                path: "<trace csv>".into(),
                line: k + 2,
                msg,
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(err(format!("expected 4 fields, got {}", f.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| err(e.to_string()));
            rows.push(TraceRow {
                iteration: f[0].trim().parse().map_err(|e| err(format!("{e}")))?,
                alignment: num(f[1])?,
                test_accuracy: num(f[2])?,
                elapsed_seconds: num(f[3])?,
            });
        }
        Ok(AlignmentTrace { rows })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub theta: Vec<f64>,
    pub trace: AlignmentTrace,
}

/// Full-set alignment and held-out accuracy for a parameter vector.
pub fn evaluate_checkpoint(
    spec: &AnsatzSpec,
    theta: &[f64],
    feature_scale: f64,
    c: f64,
    train: Samples<'_>,
    test: Samples<'_>,
) -> Result<(f64, f64)> {
    let emb = Embedding::new(spec, theta, feature_scale)?;
    let k_train = emb.matrix(train.features)?;
    let alignment = match target_alignment(&k_train, train.labels) {
        Ok(a) => a,
        Err(Error::DegenerateKernel) => f64::NAN,
        Err(e) => return Err(e),
    };
    let model = svm::fit_ovr(&k_train, train.labels, &SvmParams::with_c(c))?;
    let k_cross = emb.cross(test.features, train.features)?;
    let predicted = model.predict(&k_cross)?;
    let acc = svm::accuracy(&predicted, test.labels)?;
    Ok((alignment, acc))
}

/// Trains from `init_params(spec, init_seed)`.
pub fn train(config: &TrainConfig, train: Samples<'_>, test: Samples<'_>) -> Result<TrainOutcome> {
    let theta = init_params(&config.spec, config.init_seed);
    train_from(config, theta, train, test)
}

/// Trains from an explicit starting point.
pub fn train_from(
    config: &TrainConfig,
    mut theta: Vec<f64>,
    train: Samples<'_>,
    test: Samples<'_>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let spec = &config.spec;
    if theta.len() != spec.param_count() {
        return Err(Error::dim(
            "parameter vector length",
            spec.param_count(),
            theta.len(),
        ));
    }
    for (what, s) in [("training", &train), ("test", &test)] {
        if s.is_empty() {
            return Err(Error::InvalidArgument(format!("{what} set is empty")));
        }
        if let Some(x) = s.features.iter().find(|x| x.len() != spec.n_qubits) {
            return Err(Error::dim("feature width", spec.n_qubits, x.len()));
        }
    }
    if train.len() < config.batch_size {
        return Err(Error::Config(format!(
            "batch_size {} exceeds training set size {}",
            config.batch_size,
            train.len()
        )));
    }

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.batch_seed);
    let mut trace = AlignmentTrace::default();
    let mut checkpoint = |iteration: usize, theta: &[f64]| -> Result<()> {
        let (alignment, test_accuracy) =
            evaluate_checkpoint(spec, theta, config.feature_scale, config.c, train, test)?;
        log::debug!("iter {iteration}: alignment {alignment:.6} accuracy {test_accuracy:.4}");
        trace.rows.push(TraceRow {
            iteration,
            alignment,
            test_accuracy,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        Ok(())
    };

    checkpoint(0, &theta)?;
    let mut batch_x = Vec::with_capacity(config.batch_size);
    let mut batch_y = Vec::with_capacity(config.batch_size);
    for step in 1..=config.iterations {
        // batch drawn even when there is nothing to train, so traces with
        // and without inert parameters consume the same random stream
        batch_x.clear();
        batch_y.clear();
        for i in index::sample(&mut rng, train.len(), config.batch_size) {
            batch_x.push(train.features[i].clone());
            batch_y.push(train.labels[i]);
        }
        if !theta.is_empty() {
            let batch = Samples::new(&batch_x, &batch_y)?;
            let grad = fd_gradient(spec, &theta, batch, config.fd_epsilon, config.feature_scale)?;
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t += config.learning_rate * g;
            }
        }
        if step % config.checkpoint_every == 0 || step == config.iterations {
            checkpoint(step, &theta)?;
        }
    }
    Ok(TrainOutcome { theta, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Architecture;

    fn toy() -> (Vec<Vec<f64>>, Vec<usize>) {
        let x = vec![
            vec![0.1, 0.2],
            vec![0.15, 0.3],
            vec![0.2, 0.1],
            vec![0.8, 0.9],
            vec![0.9, 0.7],
            vec![0.85, 0.95],
        ];
        (x, vec![0, 0, 0, 1, 1, 1])
    }

    #[test]
    fn init_params_shape_and_determinism() {
        let s0 = AnsatzSpec::new(Architecture::DataWeaved, 5, 0).unwrap();
        assert!(init_params(&s0, 1).is_empty());
        let s3 = AnsatzSpec::new(Architecture::DataLast, 5, 3).unwrap();
        let a = init_params(&s3, 9);
        assert_eq!(a.len(), 30);
        assert_eq!(a, init_params(&s3, 9));
        assert_ne!(a, init_params(&s3, 10));
        assert!(a.iter().all(|&v| (0.0..TAU).contains(&v)));
    }

    #[test]
    fn init_params_prefix_property() {
        // a shallower spec with the same seed gets the leading slice
        let deep = AnsatzSpec::new(Architecture::DataFirst, 3, 3).unwrap();
        let shallow = AnsatzSpec::new(Architecture::DataWeaved, 3, 2).unwrap();
        assert_eq!(init_params(&shallow, 4)[..], init_params(&deep, 4)[..12]);
    }

    #[test]
    fn identical_pair_aligns_perfectly() {
        let spec = AnsatzSpec::new(Architecture::DataWeaved, 2, 1).unwrap();
        let theta = init_params(&spec, 0);
        let x = vec![vec![0.4, 0.6], vec![0.4, 0.6]];
        let a = batch_alignment(&spec, &theta, Samples::new(&x, &[1, 1]).unwrap(), 1.0).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_label_batch_is_positive() {
        let spec = AnsatzSpec::new(Architecture::DataLast, 2, 2).unwrap();
        let (x, _) = toy();
        for seed in 0..5 {
            let theta = init_params(&spec, seed);
            let a =
                batch_alignment(&spec, &theta, Samples::new(&x, &[4; 6]).unwrap(), 1.0).unwrap();
            assert!(a > 0.0);
        }
    }

    #[test]
    fn batch_too_small() {
        let spec = AnsatzSpec::new(Architecture::DataLast, 2, 1).unwrap();
        let x = vec![vec![0.4, 0.6]];
        assert!(batch_alignment(&spec, &[0.0; 4], Samples::new(&x, &[0]).unwrap(), 1.0).is_err());
    }

    #[test]
    fn data_first_single_layer_has_zero_gradient() {
        let spec = AnsatzSpec::new(Architecture::DataFirst, 2, 1).unwrap();
        let (x, y) = toy();
        let batch = Samples::new(&x, &y).unwrap();
        for seed in 0..5 {
            let theta = init_params(&spec, seed);
            let g = fd_gradient(&spec, &theta, batch, 1e-3, 1.0).unwrap();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm < 1e-8, "norm {norm}");
        }
    }

    #[test]
    fn empty_gradient_for_no_layers() {
        let spec = AnsatzSpec::new(Architecture::DataWeaved, 2, 0).unwrap();
        let (x, y) = toy();
        let g = fd_gradient(&spec, &[], Samples::new(&x, &y).unwrap(), 1e-3, 1.0).unwrap();
        assert!(g.is_empty());
        assert!(fd_gradient(&spec, &[], Samples::new(&x, &y).unwrap(), 0.0, 1.0).is_err());
    }

    #[test]
    fn step_sizes_agree() {
        let spec = AnsatzSpec::new(Architecture::DataWeaved, 3, 1).unwrap();
        let x = vec![
            vec![0.1, 0.5, 0.9],
            vec![0.3, 0.2, 0.4],
            vec![0.8, 0.6, 0.1],
            vec![0.7, 0.9, 0.5],
        ];
        let y = [0, 0, 1, 1];
        let batch = Samples::new(&x, &y).unwrap();
        let theta = init_params(&spec, 3);
        let coarse = fd_gradient(&spec, &theta, batch, 1e-3, 1.0).unwrap();
        let fine = fd_gradient(&spec, &theta, batch, 1e-5, 1.0).unwrap();
        for (a, b) in coarse.iter().zip(&fine) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn trace_layout_and_inert_training() {
        let spec = AnsatzSpec::new(Architecture::DataFirst, 2, 1).unwrap();
        let (x, y) = toy();
        let s = Samples::new(&x, &y).unwrap();
        let mut cfg = TrainConfig::new(spec);
        cfg.iterations = 7;
        cfg.checkpoint_every = 3;
        cfg.batch_size = 3;
        let out = train(&cfg, s, s).unwrap();
        let iters: Vec<usize> = out.trace.rows.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, vec![0, 3, 6, 7]);
        let theta0 = init_params(&spec, cfg.init_seed);
        for (a, b) in out.theta.iter().zip(&theta0) {
            assert!((a - b).abs() < 1e-8);
        }
        let a0 = out.trace.rows[0].alignment;
        assert!(out
            .trace
            .rows
            .iter()
            .all(|r| (r.alignment - a0).abs() < 1e-10));
    }

    #[test]
    fn single_iteration_trace() {
        let spec = AnsatzSpec::new(Architecture::DataWeaved, 2, 1).unwrap();
        let (x, y) = toy();
        let s = Samples::new(&x, &y).unwrap();
        let mut cfg = TrainConfig::new(spec);
        cfg.iterations = 1;
        cfg.checkpoint_every = 250;
        let out = train(&cfg, s, s).unwrap();
        assert_eq!(out.trace.rows.len(), 2);
        assert_eq!(out.trace.rows[0].iteration, 0);
        assert_eq!(out.trace.rows[1].iteration, 1);
    }

    #[test]
    fn config_validation() {
        let spec = AnsatzSpec::new(Architecture::DataWeaved, 2, 1).unwrap();
        let mut cfg = TrainConfig::new(spec);
        assert!(cfg.validate().is_ok());
        assert_eq!(
            (cfg.iterations, cfg.batch_size, cfg.checkpoint_every),
            (5000, 5, 250)
        );
        cfg.batch_size = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::new(spec);
        cfg.iterations = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::new(spec);
        cfg.learning_rate = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let trace = AlignmentTrace {
            rows: vec![
                TraceRow {
                    iteration: 0,
                    alignment: 0.5,
                    test_accuracy: 0.75,
                    elapsed_seconds: 0.01,
                },
                TraceRow {
                    iteration: 250,
                    alignment: f64::NAN,
                    test_accuracy: 0.8,
                    elapsed_seconds: 1.5,
                },
            ],
        };
        let csv = trace.to_csv();
        assert!(csv.starts_with("iteration,alignment,test_accuracy,elapsed_seconds\n"));
        let back = AlignmentTrace::from_csv(&csv).unwrap();
        assert_eq!(back.rows[0], trace.rows[0]);
        assert!(back.rows[1].alignment.is_nan());
        assert!(AlignmentTrace::from_csv("bad\n").is_err());
    }
}
