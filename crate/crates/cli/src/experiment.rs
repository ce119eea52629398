//! Training and evaluation of one (sweep point, split) job.

use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use rfdl_core::classify::{accuracy, build_label_matrix, fit_posthoc_classifier, predict_batch, AlmSchedule};
use rfdl_core::data::{pca_reduce, split_per_class, Dataset, DatasetManifest, SplitPlan};
use rfdl_core::solver::{fit_cf_baseline, fit_djrfdl, fit_jrfdl};
use rfdl_core::{ConvergenceTrace, HyperParams, Matrix, Method, Model, Preprocessing};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// A loaded dataset with the hash of its files.
pub struct LoadedData {
    pub dataset: Dataset,
    pub sha256: String,
}

pub fn load_dataset(manifest_path: &Path) -> anyhow::Result<LoadedData> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let dataset = manifest.load(base)?;
    let mut hasher = Sha256::new();
    for part in [&manifest.features, &manifest.labels] {
        let path = if part.is_absolute() { part.clone() } else { base.join(part) };
        let bytes = std::fs::read(&path).map_err(|e| rfdl_core::Error::Io { path, source: e })?;
        hasher.update(&bytes);
    }
    Ok(LoadedData { dataset, sha256: hex::encode(hasher.finalize()) })
}

/// Default factor rank `min(2c, N)`, kept within the feature count.
pub fn default_rank(classes: usize, samples: usize, features: usize) -> usize {
    (2 * classes).min(samples).min(features).max(1)
}

/// Split `index` of the config, or every sample when no split is set.
pub fn plan_split(cfg: &ExperimentConfig, ds: &Dataset, index: usize) -> anyhow::Result<SplitPlan> {
    match cfg.split.train_per_class {
        Some(per_class) => Ok(split_per_class(&ds.labels, ds.classes, per_class, cfg.split.seed + index as u64)?),
        None => Ok(SplitPlan {
            per_class: 0,
            seed: cfg.split.seed + index as u64,
            train: (0..ds.labels.len()).collect(),
            test: Vec::new(),
        }),
    }
}

pub struct Trained {
    pub model: Model,
    pub trace: ConvergenceTrace,
    pub params: HyperParams,
    pub train_time_s: f64,
    pub train_accuracy: f64,
}

/// Trains on the columns of `x` listed in `train`. The training features
/// go through the dataset's normalization and, if configured, a PCA fitted
/// on them; both are recorded in the model.
pub fn train(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    x: &Matrix,
    train: &[usize],
    dict_size: Option<usize>,
    seed: u64,
) -> anyhow::Result<Trained> {
    let started = Instant::now();
    let raw = x.select_columns(train);
    let labels = ds.select_labels(train);
    let normalized = ds.normalize.apply(&raw);
    let (features, pca) = match cfg.pca_energy {
        Some(energy) => {
            let (z, basis) = pca_reduce(&normalized, energy)?;
            (z, Some(basis))
        }
        None => (normalized, None),
    };
    let samples = features.ncols();
    let k = dict_size.or(cfg.params.dict_size).unwrap_or(samples);
    let r = cfg.params.factor_rank.unwrap_or_else(|| default_rank(ds.classes, samples, features.nrows()));
    let params = cfg.resolve(k, r, seed)?;
    let h = build_label_matrix(&labels, ds.classes)?;

    let (mut model, trace) = match cfg.method {
        Method::Djrfdl => fit_djrfdl(&features, &h, &params)?,
        Method::Jrfdl => fit_jrfdl(&features, &params)?,
        Method::CfBaseline => fit_cf_baseline(&features, &params)?,
    };
    if model.c.is_none() {
        let fit = fit_posthoc_classifier(&model.p, &features, &h, cfg.posthoc_beta, &AlmSchedule::default())
            .context("post-hoc classifier")?;
        model.c = Some(fit.c);
        model.classes = Some(ds.classes);
    }
    model.preprocessing = Preprocessing { normalize: ds.normalize, pca };
    let train_time_s = started.elapsed().as_secs_f64();
    let train_accuracy = evaluate(&model, &raw, &labels)?;
    Ok(Trained { model, trace, params, train_time_s, train_accuracy })
}

/// Accuracy of `model` on raw samples.
pub fn evaluate(model: &Model, raw: &Matrix, truth: &[usize]) -> anyhow::Result<f64> {
    if raw.ncols() == 0 {
        return Err(rfdl_core::Error::EmptyMatrix("evaluation split has no samples".into()).into());
    }
    let x = model.prepare(raw)?;
    let predicted: Vec<usize> = predict_batch(model, &x)?.iter().map(|p| p.hard).collect();
    Ok(accuracy(&predicted, truth)?)
}
