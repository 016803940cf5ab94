//! Two-moons data: generation, stratified splitting, and CSV I/O.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`,
//! with Gaussian draws from `rand_distr::StandardNormal`, so a seed gives the
//! same dataset on every platform.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub features: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<[f64; 2]>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::validation(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::validation(format!("label {bad} >= class count {n_classes}")));
        }
        Ok(Dataset { features, labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

/// Evenly spaced points on `[0, π]`, endpoints included.
fn arc_grid(n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { PI / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| i as f64 * step)
}

/// Interleaving half-circles. The first `n/2` points are the outer moon
/// `(cos t, sin t)` with label 0, the rest the inner moon
/// `(1 − cos t, 0.5 − sin t)` with label 1. Gaussian noise of standard
/// deviation `noise` is then added to every coordinate.
pub fn make_moons(n_samples: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_samples < 2 {
        return Err(Error::validation(format!("need at least 2 samples, got {n_samples}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::validation(format!("noise must be non-negative, got {noise}")));
    }
    let n_outer = n_samples / 2;
    let n_inner = n_samples - n_outer;

    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for t in arc_grid(n_outer) {
        features.push([t.cos(), t.sin()]);
        labels.push(0);
    }
    for t in arc_grid(n_inner) {
        features.push([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }

    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for point in &mut features {
            for coord in point.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *coord += noise * z;
            }
        }
    }
    Dataset::new(features, labels, 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_size: 200, test_size: 100, seed: 0 }
    }
}

/// Stratified shuffle split. Each class contributes to the training set in
/// proportion to its share of the data (largest remainder), and both outputs
/// are shuffled.
pub fn split(dataset: &Dataset, config: SplitConfig) -> Result<(Dataset, Dataset)> {
    if config.train_size == 0 || config.test_size == 0 {
        return Err(Error::validation("split sizes must be positive"));
    }
    let needed = config.train_size + config.test_size;
    if dataset.len() < needed {
        return Err(Error::validation(format!(
            "dataset has {} samples, split needs {needed}",
            dataset.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes];
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for idx in &mut by_class {
        idx.shuffle(&mut rng);
    }

    let train_quota = proportional_quota(&by_class, config.train_size, dataset.len());
    let test_quota = proportional_quota(&by_class, config.test_size, dataset.len());

    let mut train = Vec::with_capacity(config.train_size);
    let mut test = Vec::with_capacity(config.test_size);
    for ((idx, &tr), &te) in by_class.iter().zip(&train_quota).zip(&test_quota) {
        train.extend_from_slice(&idx[..tr]);
        test.extend_from_slice(&idx[tr..tr + te]);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Largest-remainder apportionment of `target` slots over classes, capped by
/// class size.
fn proportional_quota(by_class: &[Vec<usize>], target: usize, total: usize) -> Vec<usize> {
    let mut quota: Vec<usize> = by_class.iter().map(|c| c.len() * target / total).collect();
    let mut remainders: Vec<(usize, usize)> = by_class
        .iter()
        .enumerate()
        .map(|(k, c)| ((c.len() * target) % total, k))
        .collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut missing = target - quota.iter().sum::<usize>();
    for &(_, k) in remainders.iter().cycle().take(remainders.len() * 2) {
        if missing == 0 {
            break;
        }
        if quota[k] < by_class[k].len() {
            quota[k] += 1;
            missing -= 1;
        }
    }
    quota
}

pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x1", "x2", "label"]).map_err(csv_err)?;
    for (p, l) in dataset.features.iter().zip(&dataset.labels) {
        w.write_record([format!("{:.17e}", p[0]), format!("{:.17e}", p[1]), l.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Header `x1,x2,label`; coordinates in scientific notation with 18
/// significant digits so values round-trip exactly.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf)?;
    write_atomic(path, &buf)
}

pub fn read_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["x1", "x2", "label"] {
        return Err(Error::Parse { line: 1, message: "expected header x1,x2,label".into() });
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", record.len())));
        }
        let coord = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("field {} '{}': {e}", i + 1, &record[i])))
        };
        let x1 = coord(0)?;
        let x2 = coord(1)?;
        let label = record[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| bad(format!("label '{}': {e}", &record[2])))?;
        features.push([x1, x2]);
        labels.push(label);
    }
    let n_classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Dataset::new(features, labels, n_classes)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}
