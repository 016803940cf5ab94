//! Training loop, evaluation, per-epoch metrics and multi-seed aggregation for
//! the two-moons classification task.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_moons, split, Dataset, SplitConfig};
use crate::engine::{AngleParams, CircuitSpec};
use crate::error::{Error, Result};
use crate::gradients::{class_expectations, loss_and_grad, model_grad};
use crate::observable::{init_observable, spectrum, HermitianParams, Observable, ObservableLayout};
use crate::optim::{make_groups, OptimizerSetup, ParamGroup, ANGLES_GROUP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Pauli-Z on each class qubit, angles trained alone.
    FixedPauliZ,
    /// Learnable observables sharing the angles' optimizer settings.
    LearnableShared,
    /// Learnable observables with their own optimizer and learning rate.
    LearnableSeparate,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::FixedPauliZ, Regime::LearnableShared, Regime::LearnableSeparate];

    pub fn name(&self) -> &'static str {
        match self {
            Regime::FixedPauliZ => "fixed_pauli_z",
            Regime::LearnableShared => "learnable_shared",
            Regime::LearnableSeparate => "learnable_separate",
        }
    }

    pub fn default_optimizers(&self) -> OptimizerSetup {
        match self {
            Regime::FixedPauliZ => OptimizerSetup::fixed(),
            Regime::LearnableShared => OptimizerSetup::shared(),
            Regime::LearnableSeparate => OptimizerSetup::separate(),
        }
    }

    pub fn is_learnable(&self) -> bool {
        !matches!(self, Regime::FixedPauliZ)
    }
}

/// Starting point for learnable observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableInit {
    #[default]
    Random,
    PauliZ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: CircuitSpec,
    pub regime: Regime,
    pub batch_size: usize,
    pub epochs: usize,
    pub noise: f64,
    pub seeds: Vec<u64>,
    pub optimizers: OptimizerSetup,
    pub observable_init: ObservableInit,
    pub train_size: usize,
    pub test_size: usize,
}

impl ExperimentConfig {
    /// Two-moons defaults: 4 qubits, 2 layers, batch 20, 30 epochs, 200/100 split, seeds 0..5.
    pub fn new(regime: Regime, noise: f64) -> Self {
        ExperimentConfig {
            spec: CircuitSpec::new(4, 2),
            regime,
            batch_size: 20,
            epochs: 30,
            noise,
            seeds: (0..5).collect(),
            optimizers: regime.default_optimizers(),
            observable_init: ObservableInit::Random,
            train_size: 200,
            test_size: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > self.train_size {
            return Err(Error::config(format!(
                "batch size {} must lie in 1..={}",
                self.batch_size, self.train_size
            )));
        }
        if self.test_size == 0 {
            return Err(Error::config("test set must be non-empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config(format!("noise must be non-negative, got {}", self.noise)));
        }
        if self.spec.n_qubits < N_CLASSES {
            return Err(Error::config(format!(
                "{N_CLASSES} class observables need at least {N_CLASSES} qubits"
            )));
        }
        match (self.regime.is_learnable(), self.optimizers.observables) {
            (false, Some(_)) => Err(Error::config("fixed observables take no observable optimizer")),
            (true, None) => Err(Error::config(format!(
                "regime {} needs an observable optimizer",
                self.regime.name()
            ))),
            _ => Ok(()),
        }?;
        self.optimizers.angles.validate()?;
        if let Some(o) = self.optimizers.observables {
            o.validate()?;
        }
        Ok(())
    }
}

const N_CLASSES: usize = 2;

/// Independent random streams derived from a run seed.
mod stream {
    pub const DATA: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const ANGLES: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const OBSERVABLE_BASE: u64 = 100;
}

/// SplitMix64 over `seed` and a stream tag.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: CircuitSpec,
    pub angles: AngleParams,
    pub observables: Vec<Observable>,
}

impl Model {
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        class_expectations(x, &self.angles, &self.spec, &self.observables)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// `(λ_min, λ_max)` per class observable.
    pub spectra: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub regime: Regime,
    pub noise: f64,
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    pub model: Model,
}

impl RunSummary {
    pub fn final_metrics(&self) -> &EpochMetrics {
        self.epochs.last().expect("a completed run has at least one epoch")
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}_{}", self.regime.name(), self.noise, self.seed)
    }

    /// `epoch,train_loss,train_acc,test_acc,eig_min_k,eig_max_k…`
    pub fn to_csv(&self) -> String {
        let k = self.epochs.first().map_or(0, |e| e.spectra.len());
        let mut out = String::from("epoch,train_loss,train_acc,test_acc");
        for i in 0..k {
            write!(out, ",eig_min_{i},eig_max_{i}").unwrap();
        }
        out.push('\n');
        for e in &self.epochs {
            write!(out, "{},{},{},{}", e.epoch, e.train_loss, e.train_accuracy, e.test_accuracy).unwrap();
            for (lo, hi) in &e.spectra {
                write!(out, ",{lo},{hi}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

struct Evaluation {
    loss: f64,
    accuracy: f64,
}

fn evaluate(model: &Model, data: &Dataset) -> Result<Evaluation> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &label) in data.features.iter().zip(&data.labels) {
        let logits = model.logits(x)?;
        loss += loss_and_grad(&logits, label)?.0;
        if argmax(&logits) == label {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation { loss: loss / n, accuracy: correct as f64 / n })
}

fn observable_spectra(observables: &[Observable]) -> Result<Vec<(f64, f64)>> {
    observables
        .iter()
        .map(|o| spectrum(&o.params).map(|s| (s.min(), s.max())))
        .collect()
}

/// Train/test split for a run. Depends only on the seed and noise level, so
/// every regime sees the same data.
pub fn run_data(config: &ExperimentConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = config.train_size + config.test_size;
    let all = make_moons(n, config.noise, derive_seed(seed, stream::DATA))?;
    split(
        &all,
        SplitConfig {
            train_size: config.train_size,
            test_size: config.test_size,
            seed: derive_seed(seed, stream::SPLIT),
        },
    )
}

/// Initial model: angles uniform in `[−π, π]`, one local observable per class
/// on qubit `k`.
pub fn init_model(config: &ExperimentConfig, seed: u64) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::ANGLES));
    let angles = AngleParams((0..config.spec.n_angles()).map(|_| rng.random_range(-PI..=PI)).collect());
    let observables = (0..N_CLASSES)
        .map(|k| {
            let layout = ObservableLayout::LocalSingleQubit { target: k };
            let params = match (config.regime, config.observable_init) {
                (Regime::FixedPauliZ, _) | (_, ObservableInit::PauliZ) => HermitianParams::pauli_z(),
                (_, ObservableInit::Random) => {
                    init_observable(&layout, derive_seed(seed, stream::OBSERVABLE_BASE + k as u64))
                }
            };
            Observable::new(layout, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Model { spec: config.spec, angles, observables })
}

fn flatten_observables(observables: &[Observable]) -> Vec<f64> {
    observables.iter().flat_map(|o| o.params.to_flat()).collect()
}

fn write_back(model: &mut Model, group: &ParamGroup) -> Result<()> {
    if group.name == ANGLES_GROUP {
        model.angles.0.copy_from_slice(&group.values);
        return Ok(());
    }
    let mut offset = 0;
    for o in &mut model.observables {
        let n = o.params.n_params();
        o.params.set_flat(&group.values[offset..offset + n])?;
        offset += n;
    }
    Ok(())
}

pub fn train_run(config: &ExperimentConfig, seed: u64) -> Result<RunSummary> {
    config.validate()?;
    let (train, test) = run_data(config, seed)?;
    let mut model = init_model(config, seed)?;

    let mut groups = make_groups(
        config
            .optimizers
            .named()
            .into_iter()
            .map(|(name, cfg)| {
                let values = if name == ANGLES_GROUP {
                    model.angles.0.clone()
                } else {
                    flatten_observables(&model.observables)
                };
                (name, cfg, values)
            })
            .collect(),
    )?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::SHUFFLE));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk
                .iter()
                .map(|&i| (train.features[i].as_slice(), train.labels[i]))
                .collect();
            let (loss, bundle) = model_grad(&batch, &model.angles, &model.spec, &model.observables)?;
            if !loss.is_finite() || !bundle.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite loss or gradient in epoch {epoch} ({} seed {seed}, noise {}): loss {loss}",
                    config.regime.name(),
                    config.noise
                )));
            }
            for group in &mut groups {
                if group.name == ANGLES_GROUP {
                    group.step(&bundle.d_angles)?;
                } else {
                    let flat: Vec<f64> = bundle.d_observables.iter().flat_map(|g| g.to_flat()).collect();
                    group.step(&flat)?;
                }
                write_back(&mut model, group)?;
            }
        }

        let train_eval = evaluate(&model, &train)?;
        let test_eval = evaluate(&model, &test)?;
        if !train_eval.loss.is_finite() {
            return Err(Error::numerical(format!(
                "training loss became {} after epoch {epoch} ({} seed {seed}, noise {})",
                train_eval.loss,
                config.regime.name(),
                config.noise
            )));
        }
        epochs.push(EpochMetrics {
            epoch,
            train_loss: train_eval.loss,
            train_accuracy: train_eval.accuracy,
            test_accuracy: test_eval.accuracy,
            spectra: observable_spectra(&model.observables)?,
        });
    }

    Ok(RunSummary { regime: config.regime, noise: config.noise, seed, epochs, model })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateEpoch {
    pub epoch: usize,
    pub train_loss: Stat,
    pub train_accuracy: Stat,
    pub test_accuracy: Stat,
    pub eig_min: Vec<Stat>,
    pub eig_max: Vec<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub regime: Regime,
    pub noise: f64,
    pub seeds: Vec<u64>,
    pub epochs: Vec<AggregateEpoch>,
}

impl AggregateReport {
    pub fn final_epoch(&self) -> &AggregateEpoch {
        self.epochs.last().expect("reports cover at least one epoch")
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}_aggregate.json", self.regime.name(), self.noise)
    }
}

pub fn aggregate(runs: &[RunSummary]) -> Result<AggregateReport> {
    let first = runs.first().ok_or_else(|| Error::validation("nothing to aggregate"))?;
    for r in runs {
        if r.regime != first.regime || r.noise.to_bits() != first.noise.to_bits() {
            return Err(Error::validation(format!(
                "cannot aggregate {} at noise {} with {} at noise {}",
                r.regime.name(),
                r.noise,
                first.regime.name(),
                first.noise
            )));
        }
        if r.epochs.len() != first.epochs.len() {
            return Err(Error::validation("runs have different epoch counts"));
        }
    }
    let k = first.epochs[0].spectra.len();
    let epochs = (0..first.epochs.len())
        .map(|e| {
            let col = |f: &dyn Fn(&EpochMetrics) -> f64| -> Stat {
                Stat::of(&runs.iter().map(|r| f(&r.epochs[e])).collect::<Vec<_>>())
            };
            AggregateEpoch {
                epoch: first.epochs[e].epoch,
                train_loss: col(&|m| m.train_loss),
                train_accuracy: col(&|m| m.train_accuracy),
                test_accuracy: col(&|m| m.test_accuracy),
                eig_min: (0..k).map(|i| col(&|m| m.spectra[i].0)).collect(),
                eig_max: (0..k).map(|i| col(&|m| m.spectra[i].1)).collect(),
            }
        })
        .collect();
    Ok(AggregateReport {
        regime: first.regime,
        noise: first.noise,
        seeds: runs.iter().map(|r| r.seed).collect(),
        epochs,
    })
}

/// Per-regime optimizer overrides for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptimizers {
    pub fixed_pauli_z: OptimizerSetup,
    pub learnable_shared: OptimizerSetup,
    pub learnable_separate: OptimizerSetup,
}

impl Default for SweepOptimizers {
    fn default() -> Self {
        SweepOptimizers {
            fixed_pauli_z: OptimizerSetup::fixed(),
            learnable_shared: OptimizerSetup::shared(),
            learnable_separate: OptimizerSetup::separate(),
        }
    }
}

impl SweepOptimizers {
    pub fn for_regime(&self, regime: Regime) -> OptimizerSetup {
        match regime {
            Regime::FixedPauliZ => self.fixed_pauli_z,
            Regime::LearnableShared => self.learnable_shared,
            Regime::LearnableSeparate => self.learnable_separate,
        }
    }
}

/// A grid of experiments: every regime at every noise level, each over all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub circuit: CircuitSpec,
    pub regimes: Vec<Regime>,
    pub noises: Vec<f64>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub observable_init: ObservableInit,
    pub optimizers: SweepOptimizers,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            circuit: CircuitSpec::new(4, 2),
            regimes: Regime::ALL.to_vec(),
            noises: vec![0.1, 0.2, 0.3],
            seeds: (0..5).collect(),
            epochs: 30,
            batch_size: 20,
            train_size: 200,
            test_size: 100,
            observable_init: ObservableInit::Random,
            optimizers: SweepOptimizers::default(),
        }
    }
}

impl SweepConfig {
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        if self.regimes.is_empty() || self.noises.is_empty() {
            return Err(Error::config("sweep needs at least one regime and one noise level"));
        }
        let mut out = Vec::new();
        for &regime in &self.regimes {
            for &noise in &self.noises {
                let cfg = ExperimentConfig {
                    spec: self.circuit,
                    regime,
                    batch_size: self.batch_size,
                    epochs: self.epochs,
                    noise,
                    seeds: self.seeds.clone(),
                    optimizers: self.optimizers.for_regime(regime),
                    observable_init: self.observable_init,
                    train_size: self.train_size,
                    test_size: self.test_size,
                };
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

/// Runs every `(experiment, seed)` pair. With `jobs > 1` runs execute on a
/// worker pool; results keep the sequential order either way.
pub fn run_all(experiments: &[ExperimentConfig], jobs: usize) -> Result<Vec<Vec<RunSummary>>> {
    let tasks: Vec<(usize, u64)> = experiments
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let run = |&(i, seed): &(usize, u64)| train_run(&experiments[i], seed);
    let results: Vec<Result<RunSummary>> = if jobs <= 1 {
        tasks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| tasks.par_iter().map(run).collect())
    };
    let mut grouped: Vec<Vec<RunSummary>> = vec![Vec::new(); experiments.len()];
    for (&(i, _), r) in tasks.iter().zip(results) {
        grouped[i].push(r?);
    }
    Ok(grouped)
}
