//! UCI dataset acquisition, parsing and preprocessing.
//!
//! Datasets are described by a versioned text manifest (see
//! `data/datasets.manifest`) that pins the download URL, the digest and the
//! column schema of each native file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};

/// The manifest shipped with the crate.
pub const BUILTIN_MANIFEST: &str = include_str!("../data/datasets.manifest");

pub const SUPPORTED: [&str; 4] = ["hayes-roth", "heart", "seeds", "wine"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Whitespace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    First,
    Last,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    pub url: String,
    pub sha256: Option<String>,
    pub delimiter: Delimiter,
    pub label: LabelColumn,
    pub ignore: Vec<usize>,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn builtin() -> Manifest {
        Manifest::parse(BUILTIN_MANIFEST).expect("bundled manifest is valid")
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut version = None;
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| Error::Manifest(format!("line {}: {m}", lineno + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f[0] == "manifest-version" {
                let v = f
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| err("bad version"))?;
                if v != 1 {
                    return Err(err(&format!("unsupported manifest version {v}")));
                }
                version = Some(v);
                continue;
            }
            if f.len() != 8 {
                return Err(err(&format!("expected 8 fields, got {}", f.len())));
            }
            let sha256 = match f[3] {
                "-" => None,
                d if d.len() == 64 && d.chars().all(|c| c.is_ascii_hexdigit()) => {
                    Some(d.to_ascii_lowercase())
                }
                _ => return Err(err("sha256 must be 64 hex digits or `-`")),
            };
            let delimiter = match f[4] {
                "comma" => Delimiter::Comma,
                "whitespace" => Delimiter::Whitespace,
                _ => return Err(err("delimiter must be `comma` or `whitespace`")),
            };
            let label = match f[5] {
                "first" => LabelColumn::First,
                "last" => LabelColumn::Last,
                i => LabelColumn::Index(i.parse().map_err(|_| err("bad label column"))?),
            };
            let ignore = match f[6] {
                "-" => Vec::new(),
                list => list
                    .split(',')
                    .map(|v| v.parse().map_err(|_| err("bad ignore column")))
                    .collect::<Result<_>>()?,
            };
            entries.push(ManifestEntry {
                name: f[0].to_string(),
                file: f[1].to_string(),
                url: f[2].to_string(),
                sha256,
                delimiter,
                label,
                ignore,
                n_classes: f[7].parse().map_err(|_| err("bad class count"))?,
            });
        }
        Ok(Manifest {
            version: version.ok_or_else(|| Error::Manifest("missing manifest-version".into()))?,
            entries,
        })
    }

    pub fn entry(&self, name: &str) -> Result<&ManifestEntry> {
        let key = name.to_ascii_lowercase();
        self.entries
            .iter()
            .find(|e| e.name == key)
            .ok_or_else(|| Error::UnknownDataset(name.to_string()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    /// The file was already present and verified.
    Cached {
        path: PathBuf,
        sha256: String,
    },
    Downloaded {
        path: PathBuf,
        sha256: String,
    },
}

impl FetchOutcome {
    pub fn path(&self) -> &Path {
        match self {
            FetchOutcome::Cached { path, .. } | FetchOutcome::Downloaded { path, .. } => path,
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".sha256");
    PathBuf::from(s)
}

fn expected_digest(entry: &ManifestEntry, path: &Path) -> Result<Option<String>> {
    if let Some(d) = &entry.sha256 {
        return Ok(Some(d.clone()));
    }
    match fs::read_to_string(sidecar(path)) {
        Ok(s) => Ok(Some(s.trim().to_ascii_lowercase())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(sidecar(path), e)),
    }
}

fn verify(path: &Path, expected: Option<&str>, actual: &str) -> Result<()> {
    match expected {
        Some(exp) if exp != actual => Err(Error::Checksum {
            path: path.to_path_buf(),
            expected: exp.to_string(),
            actual: actual.to_string(),
        }),
        _ => Ok(()),
    }
}

/// Downloads the dataset into `dest_dir` unless a verified copy exists.
pub fn fetch(entry: &ManifestEntry, dest_dir: &Path) -> Result<FetchOutcome> {
    let path = dest_dir.join(&entry.file);
    let expected = expected_digest(entry, &path)?;
    if path.exists() {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let actual = sha256_hex(&bytes);
        verify(&path, expected.as_deref(), &actual)?;
        if expected.is_none() {
            fs::write(sidecar(&path), format!("{actual}\n")).map_err(|e| Error::io(&path, e))?;
        }
        return Ok(FetchOutcome::Cached {
            path,
            sha256: actual,
        });
    }

    let network = |msg: String| Error::Network {
        url: entry.url.clone(),
        msg,
    };
    let mut response = ureq::get(&entry.url)
        .call()
        .map_err(|e| network(e.to_string()))?;
    let mut bytes = Vec::new();
    response
        .body_mut()
        .as_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| network(e.to_string()))?;
    let actual = sha256_hex(&bytes);
    verify(&path, expected.as_deref(), &actual)?;

    fs::create_dir_all(dest_dir).map_err(|e| Error::io(dest_dir, e))?;
    let tmp = path.with_extension("part");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    if entry.sha256.is_none() {
        fs::write(sidecar(&path), format!("{actual}\n")).map_err(|e| Error::io(&path, e))?;
    }
    Ok(FetchOutcome::Downloaded {
        path,
        sha256: actual,
    })
}

/// A labeled feature matrix. `labels[i]` indexes into `class_names`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::dim("label count", features.len(), labels.len()));
        }
        let width = features.first().map_or(0, Vec::len);
        if let Some(row) = features.iter().find(|r| r.len() != width) {
            return Err(Error::dim("feature row width", width, row.len()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidArgument(format!(
                "label {l} has no class name ({} classes)",
                class_names.len()
            )));
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            class_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Canonical exchange CSV: header `label,f0,f1,…`, label as class name.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for j in 0..self.n_features() {
            let _ = write!(out, ",f{j}");
        }
        out.push('\n');
        for (row, &l) in self.features.iter().zip(&self.labels) {
            out.push_str(&self.class_names[l]);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Dataset> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, h)| h).unwrap_or_default();
        if !header.starts_with("label") {
            return Err(Error::Parse {
                path: name.into(),
                line: 1,
                msg: "expected header `label,f0,...`".into(),
            });
        }
        let mut raw = Vec::new();
        for (k, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let feats = parse_numbers(&fields[1..], name, k + 1)?;
            raw.push((fields[0].to_string(), feats));
        }
        assemble(name, raw, name)
    }
}

fn parse_numbers(fields: &[&str], path: &str, line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                msg: format!("`{f}` is not a number"),
            })
        })
        .collect()
}

/// Builds a dataset from `(raw label, features)` rows. Class ids follow the
/// sorted label strings (numeric order when every label is a number).
fn assemble(name: &str, raw: Vec<(String, Vec<f64>)>, path: &str) -> Result<Dataset> {
    let mut names: Vec<String> = raw.iter().map(|(l, _)| l.clone()).collect();
    names.sort();
    names.dedup();
    if names.iter().all(|n| n.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        });
    }
    let index: BTreeMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let labels = raw.iter().map(|(l, _)| index[l.as_str()]).collect();
    let features = raw.iter().map(|(_, f)| f.clone()).collect();
    Dataset::new(name, features, labels, names.clone()).map_err(|e| Error::Parse {
        path: path.into(),
        line: 0,
        msg: e.to_string(),
    })
}

/// Parses a dataset file in its native UCI layout.
pub fn load(entry: &ManifestEntry, path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_native(entry, &text, &path.display().to_string())
}

/// Parses native UCI text. Rows with `?` are dropped and logged; any other
/// malformed row is a parse error.
pub fn parse_native(entry: &ManifestEntry, text: &str, origin: &str) -> Result<Dataset> {
    let mut width = None;
    let mut raw = Vec::new();
    let mut dropped = 0;
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = match entry.delimiter {
            Delimiter::Comma => trimmed.split(',').map(str::trim).collect(),
            Delimiter::Whitespace => trimmed.split_whitespace().collect(),
        };
        let parse_err = |msg: String| Error::Parse {
            path: origin.into(),
            line: lineno,
            msg,
        };
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_err(format!(
                    "expected {w} fields, found {}",
                    fields.len()
                )))
            }
            _ => {}
        }
        let label_at = match entry.label {
            LabelColumn::First => 0,
            LabelColumn::Last => fields.len() - 1,
            LabelColumn::Index(i) => i,
        };
        if label_at >= fields.len() {
            return Err(parse_err(format!("label column {label_at} out of range")));
        }
        if fields.contains(&"?") {
            log::warn!("{origin}:{lineno}: dropping row with missing values");
            dropped += 1;
            continue;
        }
        let feats: Vec<&str> = fields
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_at && !entry.ignore.contains(i))
            .map(|(_, f)| *f)
            .collect();
        let values = parse_numbers(&feats, origin, lineno)?;
        let label = fields[label_at];
        let label = match label.parse::<f64>() {
            Ok(v) if v.fract() == 0.0 => format!("{}", v as i64),
            _ => label.to_string(),
        };
        raw.push((label, values));
    }
    if dropped > 0 {
        log::info!("{origin}: dropped {dropped} incomplete rows");
    }
    if raw.is_empty() {
        return Err(Error::Parse {
            path: origin.into(),
            line: 0,
            msg: "no data rows".into(),
        });
    }
    let ds = assemble(&entry.name, raw, origin)?;
    if ds.n_classes() != entry.n_classes {
        return Err(Error::Parse {
            path: origin.into(),
            line: 0,
            msg: format!(
                "expected {} classes for {}, found {}",
                entry.n_classes,
                entry.name,
                ds.n_classes()
            ),
        });
    }
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConstantColumns {
    Drop,
    Zero,
}

fn minmax_columns(ds: &Dataset, policy: ConstantColumns) -> Result<Dataset> {
    let width = ds.n_features();
    let mut keep = Vec::new();
    let mut ranges = Vec::new();
    for j in 0..width {
        let (lo, hi) = ds
            .features
            .iter()
            .map(|r| r[j])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if hi > lo {
            keep.push(j);
            ranges.push(Some((lo, hi - lo)));
        } else if policy == ConstantColumns::Zero {
            keep.push(j);
            ranges.push(None);
        } else {
            log::warn!("{}: dropping constant feature column {j}", ds.name);
        }
    }
    if keep.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: every feature column is constant",
            ds.name
        )));
    }
    let features = ds
        .features
        .iter()
        .map(|row| {
            keep.iter()
                .zip(&ranges)
                .map(|(&j, r)| match r {
                    Some((lo, span)) => ((row[j] - lo) / span).clamp(0.0, 1.0),
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    Ok(Dataset {
        features,
        ..ds.clone()
    })
}

/// Per-column `(v − min) / (max − min)` over the whole dataset. Constant
/// columns are dropped with a warning.
pub fn normalize_minmax(ds: &Dataset) -> Result<Dataset> {
    minmax_columns(ds, ConstantColumns::Drop)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReduceMethod {
    Truncate,
    #[default]
    Pca,
}

impl std::str::FromStr for ReduceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncate" => Ok(ReduceMethod::Truncate),
            "pca" => Ok(ReduceMethod::Pca),
            _ => Err(Error::InvalidArgument(format!(
                "unknown reduction `{s}` (expected truncate or pca)"
            ))),
        }
    }
}

/// Principal component projection fitted with a Jacobi eigendecomposition
/// of the covariance matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `n_features × n_components`, orthonormal columns.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

impl Pca {
    pub fn fit(features: &[Vec<f64>], n_components: usize) -> Result<Pca> {
        let n = features.len();
        let d = features.first().map_or(0, Vec::len);
        if n_components > d {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {n_components} components of {d} features"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("PCA on empty data".into()));
        }
        let mean: Vec<f64> = (0..d)
            .map(|j| features.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = Matrix::zeros(d, d);
        for row in features {
            for a in 0..d {
                let da = row[a] - mean[a];
                for b in a..d {
                    cov[(a, b)] += da * (row[b] - mean[b]);
                }
            }
        }
        let denom = (n.max(2) - 1) as f64;
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / denom;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eig = symmetric_eigen(&cov)?;
        let mut components = Matrix::zeros(d, n_components);
        for j in 0..d {
            for k in 0..n_components {
                components[(j, k)] = eig.vectors[(j, k)];
            }
        }
        Ok(Pca {
            mean,
            components,
            explained_variance: eig.values[..n_components].to_vec(),
        })
    }

    pub fn transform(&self, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = self.components.cols();
        features
            .iter()
            .map(|row| {
                (0..k)
                    .map(|c| {
                        row.iter()
                            .zip(&self.mean)
                            .enumerate()
                            .map(|(j, (v, m))| (v - m) * self.components[(j, c)])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn inverse_transform(&self, scores: &[Vec<f64>]) -> Vec<Vec<f64>> {
        scores
            .iter()
            .map(|s| {
                self.mean
                    .iter()
                    .enumerate()
                    .map(|(j, m)| {
                        m + s
                            .iter()
                            .enumerate()
                            .map(|(c, v)| v * self.components[(j, c)])
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }
}

/// Reduces the feature count to `n_out`, either by keeping the leading
/// columns or by projecting onto the top principal components and
/// re-normalizing to `[0, 1]`.
pub fn reduce_features(ds: &Dataset, n_out: usize, method: ReduceMethod) -> Result<Dataset> {
    if n_out == 0 || n_out > ds.n_features() {
        return Err(Error::InvalidArgument(format!(
            "cannot reduce {} features to {n_out}",
            ds.n_features()
        )));
    }
    match method {
        ReduceMethod::Truncate => Ok(Dataset {
            features: ds.features.iter().map(|r| r[..n_out].to_vec()).collect(),
            ..ds.clone()
        }),
        ReduceMethod::Pca => {
            let pca = Pca::fit(&ds.features, n_out)?;
            let projected = Dataset {
                features: pca.transform(&ds.features),
                ..ds.clone()
            };
            // keep the width: a component with zero spread maps to 0
            minmax_columns(&projected, ConstantColumns::Zero)
        }
    }
}

/// Caps every class at `cap` samples, chosen by a seeded shuffle.
pub fn subsample_per_class(ds: &Dataset, cap: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for class in 0..ds.n_classes() {
        let mut idx: Vec<usize> = (0..ds.n_samples())
            .filter(|&i| ds.labels[i] == class)
            .collect();
        if idx.len() > cap {
            idx.shuffle(&mut rng);
            idx.truncate(cap);
        }
        keep.extend(idx);
    }
    keep.sort_unstable();
    ds.subset(&keep)
}

/// Per class, `floor(fraction · count)` samples (at least one, at most
/// `count − 1`) go to the training side after a seeded shuffle.
pub fn stratified_split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

pub fn split_indices(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..ds.n_classes() {
        let mut idx: Vec<usize> = (0..ds.n_samples())
            .filter(|&i| ds.labels[i] == class)
            .collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class `{}` has {} sample(s); need at least 2 to split",
                ds.class_names[class],
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_train = ((fraction * idx.len() as f64).floor() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Largest absolute gap between per-class label proportions of two sets.
pub fn split_deviation(train: &Dataset, test: &Dataset) -> f64 {
    let p = |ds: &Dataset| -> Vec<f64> {
        let total = ds.n_samples().max(1) as f64;
        ds.class_counts()
            .iter()
            .map(|&c| c as f64 / total)
            .collect()
    };
    p(train)
        .iter()
        .zip(p(test))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Among seeds `base_seed .. base_seed + n_candidates`, the one whose split
/// has the smallest [`split_deviation`]; ties go to the smaller seed.
pub fn select_split(
    ds: &Dataset,
    n_candidates: usize,
    fraction: f64,
    base_seed: u64,
) -> Result<u64> {
    if n_candidates == 0 {
        return Err(Error::InvalidArgument(
            "need at least one candidate split".into(),
        ));
    }
    let mut best = (f64::INFINITY, base_seed);
    for k in 0..n_candidates as u64 {
        let seed = base_seed.wrapping_add(k);
        let (train, test) = stratified_split(ds, fraction, seed)?;
        let dev = split_deviation(&train, &test);
        if dev < best.0 {
            best = (dev, seed);
        }
    }
    Ok(best.1)
}
