//! Unsupervised training of the bisection networks.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::features::{build_features, normalize_features, random_rotation, FeatureMatrix, NormOptions};
use crate::graph::{extract_dual_graph, DualGraph};
use crate::loss::{Objective, PhysicalPenaltyMatrix, DEFAULT_ALPHA, DEFAULT_BETA};
use crate::mesh::TetMesh;
use crate::nn::{init_params, ModelConfig, ModelParams, Tensor2};
use crate::optim::{adam_step, AdamState};
use crate::par::Exec;
use crate::seed;
use crate::{Error, Result};

const TAG_INIT: u64 = 0x696e6974;
const TAG_SHUFFLE: u64 = 0x73687566;
const TAG_ROTATE: u64 = 0x726f7461;
const TAG_SPLIT: u64 = 0x73706c74;

/// One training graph with its raw features.
#[derive(Clone, Debug)]
pub struct Sample {
    pub name: String,
    pub graph: DualGraph,
    pub features: FeatureMatrix,
}

impl Sample {
    pub fn from_mesh(name: impl Into<String>, mesh: &TetMesh, with_physical: bool) -> Result<Self> {
        Ok(Sample {
            name: name.into(),
            graph: extract_dual_graph(mesh)?,
            features: build_features(mesh, with_physical)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// λ in the `λ‖W‖₂²` term.
    pub weight_decay: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub augment: bool,
    pub smooth_include_self: bool,
    pub exec: Exec,
}

impl TrainConfig {
    /// Published hyperparameters for each configuration.
    pub fn defaults(model: ModelConfig, seed: u64) -> Self {
        let (epochs, lr) = match model {
            ModelConfig::Base => (300, 1e-5),
            ModelConfig::Enhanced => (400, 1e-4),
            ModelConfig::HeteroEnhanced => (150, 1e-4),
        };
        TrainConfig {
            epochs,
            batch_size: 4,
            lr,
            weight_decay: 1e-5,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            seed,
            augment: true,
            smooth_include_self: true,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        for (name, v) in [
            ("learning rate", self.lr),
            ("weight decay", self.weight_decay),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn objective(&self, model: ModelConfig) -> Objective {
        match model {
            ModelConfig::HeteroEnhanced => Objective::Heterogeneous {
                alpha: self.alpha,
                beta: self.beta,
                lambda: self.weight_decay,
            },
            _ => Objective::Homogeneous { lambda: self.weight_decay },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub skipped: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
}

/// Seeded split by whole samples; `train_frac` of them (at least one) go to training.
pub fn split_train_val<T>(mut items: Vec<T>, train_frac: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut rng = seed::rng(seed::derive(seed, [TAG_SPLIT]));
    items.shuffle(&mut rng);
    let n_train = ((items.len() as f64 * train_frac).round() as usize).clamp(1.min(items.len()), items.len());
    let val = items.split_off(n_train);
    (items, val)
}

/// Normalized model input for a sample and, for the heterogeneous model, its penalty matrix.
pub fn prepare_input(
    sample: &Sample,
    model: ModelConfig,
    augment_seed: Option<u64>,
    smooth_include_self: bool,
) -> Result<(FeatureMatrix, Option<PhysicalPenaltyMatrix>)> {
    if sample.features.cols() != model.input_width() {
        return Err(Error::Shape(format!(
            "sample '{}' has {} feature columns, model '{}' expects {}",
            sample.name,
            sample.features.cols(),
            model.name(),
            model.input_width()
        )));
    }
    let raw = match augment_seed {
        Some(s) => sample.features.rotated(&random_rotation(s)),
        None => sample.features.clone(),
    };
    let opts = NormOptions {
        mode: model.norm_mode(),
        smooth_include_self,
    };
    let x = normalize_features(&raw, &sample.graph, opts)?;
    let p = if sample.features.has_physical() {
        Some(PhysicalPenaltyMatrix::from_features(&sample.features)?)
    } else {
        None
    };
    Ok((x, p))
}

enum SampleResult {
    Ok(f64, Vec<Tensor2>),
    Skipped,
}

fn sample_step(
    sample: &Sample,
    params: &ModelParams,
    cfg: &TrainConfig,
    augment_seed: Option<u64>,
    exec: Exec,
) -> Result<SampleResult> {
    let (x, p) = prepare_input(sample, params.config, augment_seed, cfg.smooth_include_self)?;
    match cfg.objective(params.config).value_and_grad(params, &sample.graph, &x, p.as_ref(), exec) {
        Ok((loss, grads)) => Ok(SampleResult::Ok(loss, grads)),
        Err(Error::DegeneratePartition { gamma }) => {
            log::warn!("skipping sample '{}': degenerate partition (Γ = {gamma:e})", sample.name);
            Ok(SampleResult::Skipped)
        }
        Err(e) => Err(e),
    }
}

fn sample_loss(sample: &Sample, params: &ModelParams, cfg: &TrainConfig) -> Result<Option<f64>> {
    let (x, p) = prepare_input(sample, params.config, None, cfg.smooth_include_self)?;
    let y = crate::nn::model_forward(&sample.graph, &x, params, cfg.exec)?;
    match cfg.objective(params.config).value(&y, &sample.graph, params, p.as_ref()) {
        Ok(l) => Ok(Some(l)),
        Err(Error::DegeneratePartition { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Mean loss over `samples` without augmentation; degenerate samples are left out.
pub fn evaluate(samples: &[Sample], params: &ModelParams, cfg: &TrainConfig) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in samples {
        if let Some(l) = sample_loss(s, params, cfg)? {
            sum += l;
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// The initialization [`train`] starts from for a given seed.
pub fn initial_params(model: ModelConfig, seed: u64) -> ModelParams {
    init_params(model, seed::derive(seed, [TAG_INIT]))
}

/// Trains from a seeded Glorot initialization.
pub fn train(train: &[Sample], val: &[Sample], model: ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_from(initial_params(model, cfg.seed), train, val, cfg, |_, _| Ok(()))
}

/// Trains `params` in place of a fresh initialization, calling `on_epoch`
/// after every epoch.
pub fn train_from(
    mut params: ModelParams,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &ModelParams) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    for s in train.iter().chain(val) {
        if s.features.cols() != params.config.input_width() {
            return Err(Error::Shape(format!(
                "sample '{}' has {} feature columns, model '{}' expects {}",
                s.name,
                s.features.cols(),
                params.config.name(),
                params.config.input_width()
            )));
        }
    }
    let mut state = AdamState::new(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    // Batch members run through `cfg.exec`; each one's own kernels stay sequential.
    let inner = if cfg.exec.is_parallel() { Exec::Sequential } else { cfg.exec };

    for epoch in 1..=cfg.epochs {
        let mut rng = seed::rng(seed::derive(cfg.seed, [TAG_SHUFFLE, epoch as u64]));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_used = 0usize;
        let mut skipped = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let results = cfg.exec.map(batch, |&si| {
                let aug = cfg
                    .augment
                    .then(|| seed::derive(cfg.seed, [TAG_ROTATE, epoch as u64, si as u64]));
                sample_step(&train[si], &params, cfg, aug, inner)
            });
            let mut acc: Option<Vec<Tensor2>> = None;
            let mut count = 0usize;
            for r in results {
                match r? {
                    SampleResult::Ok(loss, grads) => {
                        loss_sum += loss;
                        count += 1;
                        match acc.as_mut() {
                            None => acc = Some(grads),
                            Some(a) => a.iter_mut().zip(&grads).for_each(|(a, g)| a.add_assign(g)),
                        }
                    }
                    SampleResult::Skipped => skipped += 1,
                }
            }
            if let Some(mut grads) = acc {
                let inv = 1.0 / count as f64;
                grads.iter_mut().for_each(|g| g.scale(inv));
                adam_step(&mut params, &grads, &mut state, cfg.lr)?;
                n_used += count;
            }
        }
        if n_used == 0 {
            return Err(Error::Numeric(format!("every training sample was degenerate in epoch {epoch}")));
        }
        let train_loss = loss_sum / n_used as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite training loss in epoch {epoch}")));
        }
        let val_loss = if val.is_empty() { None } else { evaluate(val, &params, cfg)? };
        let rec = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            skipped,
        };
        log::info!(
            "epoch {epoch}: train {train_loss:.6}{}",
            val_loss.map(|v| format!(", val {v:.6}")).unwrap_or_default()
        );
        on_epoch(&rec, &params)?;
        history.push(rec);
    }
    Ok(TrainOutcome { params, history })
}

/// `epoch,train_loss,val_loss`; the validation column is empty without a validation set.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for r in history {
        s.push_str(&format!(
            "{},{},{}\n",
            r.epoch,
            r.train_loss,
            r.val_loss.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    s
}

pub fn write_history_csv(history: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(history_csv(history).as_bytes())
        .map_err(|e| Error::io(path, e))
}
