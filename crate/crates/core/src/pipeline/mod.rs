//! Stage orchestration: partition, compress, features, predict, merge, evaluate.

pub mod config;
pub mod store;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{DtmConfig, LossSection, ModelConfig, PipelineConfig, TrainSection};
pub use store::{PatchPrediction, StageKind};

use crate::cloud::{ClassLabel, LabeledCloud};
use crate::compress::{compress_patch, CompressedPatch};
use crate::error::{Error, Result};
use crate::evaluate::{
    bin_error_table, confusion, dtm_rmse, metrics, rasterize_dtm, BinErrors, ConfusionCounts,
    DtmRaster, GridSpec, Metrics,
};
use crate::features::patch_features;
use crate::hag::annotate_hag;
use crate::io::write_cloud_auto;
use crate::learn::checkpoint::Checkpoint;
use crate::learn::{
    train_toy, Dataset, EpochStats, FeatureMatrix, ToyClassifier, GROUND_CLASS, NON_GROUND_CLASS,
};
use crate::merge::PredictionAccumulator;
use crate::partition::{partition, Patch};
use crate::rng::SeededRng;

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.source.exit_code()
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

/// Attaches a stage name to a library error.
pub trait InStage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T> InStage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Anything that scores the central points of a compressed patch.
pub trait PointClassifier: Sync {
    fn name(&self) -> &str;

    /// Ground probability per row of `features`; `central` holds the patch-local
    /// index of each row.
    fn ground_probabilities(
        &self,
        patch: &CompressedPatch,
        central: &[usize],
        features: &FeatureMatrix,
    ) -> Result<Vec<f64>>;
}

impl PointClassifier for ToyClassifier {
    fn name(&self) -> &str {
        "toy"
    }

    fn ground_probabilities(
        &self,
        _patch: &CompressedPatch,
        _central: &[usize],
        features: &FeatureMatrix,
    ) -> Result<Vec<f64>> {
        self.predict(features)
    }
}

/// Reads the answer off the patch labels: 1 for Ground, 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleClassifier;

impl PointClassifier for OracleClassifier {
    fn name(&self) -> &str {
        "oracle"
    }

    fn ground_probabilities(
        &self,
        patch: &CompressedPatch,
        central: &[usize],
        _features: &FeatureMatrix,
    ) -> Result<Vec<f64>> {
        Ok(central
            .iter()
            .map(|&i| f64::from(u8::from(patch.cloud.labels[i].is_ground())))
            .collect())
    }
}

/// A toy classifier checked against the configured feature recipe.
pub fn load_classifier(cfg: &PipelineConfig, path: &Path) -> Result<ToyClassifier> {
    let ck = Checkpoint::load(path)?;
    if ck.recipe_hash != cfg.features.hash() {
        return Err(Error::Config(format!(
            "{} was trained with a different feature recipe",
            path.display()
        )));
    }
    if ck.classifier.input_dim != cfg.features.dim() {
        return Err(Error::Config("checkpoint input size does not match the recipe".into()));
    }
    Ok(ck.classifier)
}

pub fn partition_cloud(cfg: &PipelineConfig, cloud: &LabeledCloud) -> StageResult<Vec<Patch>> {
    partition(cloud, &cfg.partition).stage("partition")
}

/// Member points of each patch before compression, in the stored-patch layout.
pub fn uncompressed_patches(cloud: &LabeledCloud, patches: &[Patch]) -> Vec<CompressedPatch> {
    patches
        .iter()
        .map(|p| CompressedPatch {
            patch_id: p.id,
            center: p.center,
            cloud: cloud.select(&p.member_indices),
            member_indices: p.member_indices.clone(),
            central_mask: p.central_mask.clone(),
        })
        .collect()
}

/// Compresses a patch held in the stored-patch layout.
pub fn compress_stored(patch: &CompressedPatch, cfg: &PipelineConfig) -> Result<CompressedPatch> {
    let mut out = patch.clone();
    for p in &mut out.cloud.points {
        *p = crate::compress::compress_point(p, patch.center, &cfg.compress)?;
    }
    Ok(out)
}

pub fn compress_all(
    cfg: &PipelineConfig,
    cloud: &LabeledCloud,
    patches: &[Patch],
) -> StageResult<Vec<CompressedPatch>> {
    patches
        .par_iter()
        .map(|p| compress_patch(p, cloud, &cfg.compress))
        .collect::<Result<_>>()
        .stage("compress")
}

/// Scores the central points of one compressed patch.
pub fn predict_patch(
    cfg: &PipelineConfig,
    patch: &CompressedPatch,
    clf: &dyn PointClassifier,
) -> StageResult<PatchPrediction> {
    let (central, features) = patch_features(patch, &cfg.features).stage("features")?;
    let probs = clf
        .ground_probabilities(patch, &central, &features)
        .stage("predict")?;
    if probs.len() != central.len() {
        return Err(Error::LengthMismatch {
            expected: central.len(),
            actual: probs.len(),
        })
        .stage("predict");
    }
    Ok(PatchPrediction {
        patch_id: patch.patch_id,
        center: patch.center,
        indices: central.iter().map(|&i| patch.member_indices[i]).collect(),
        ground_prob: probs,
    })
}

pub fn predict_patches(
    cfg: &PipelineConfig,
    patches: &[CompressedPatch],
    clf: &dyn PointClassifier,
) -> StageResult<Vec<PatchPrediction>> {
    patches.par_iter().map(|p| predict_patch(cfg, p, clf)).collect()
}

/// Partition, compress and predict without keeping every compressed patch in memory.
pub fn predict_cloud(
    cfg: &PipelineConfig,
    cloud: &LabeledCloud,
    clf: &dyn PointClassifier,
) -> StageResult<Vec<PatchPrediction>> {
    let patches = partition_cloud(cfg, cloud)?;
    patches
        .par_iter()
        .map(|p| {
            let cp = compress_patch(p, cloud, &cfg.compress).stage("compress")?;
            predict_patch(cfg, &cp, clf)
        })
        .collect()
}

/// Soft-votes patch predictions in patch order.
pub fn merge_predictions(
    source_points: usize,
    preds: &[PatchPrediction],
) -> StageResult<PredictionAccumulator> {
    let mut acc = PredictionAccumulator::new(source_points);
    for p in preds {
        for (&i, &prob) in p.indices.iter().zip(&p.ground_prob) {
            acc.accumulate(i, prob).stage("merge")?;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSummary {
    pub classifier: String,
    pub points: usize,
    pub patches: usize,
    pub votes: u64,
    pub uncovered: usize,
    pub ground_points: usize,
}

/// Copy of `cloud` carrying the merged labels and mean ground probabilities.
pub fn labeled_output(
    cloud: &LabeledCloud,
    acc: &PredictionAccumulator,
) -> (LabeledCloud, Vec<ClassLabel>, usize) {
    let merged = acc.finalize();
    let mut out = LabeledCloud {
        points: cloud.points.clone(),
        labels: merged.labels.clone(),
        channels: Default::default(),
    };
    out.channels.ground_prob = Some(acc.mean_probabilities());
    (out, merged.labels, merged.uncovered)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub scenes: usize,
    pub pool_samples: usize,
    pub samples: usize,
    pub ground_fraction: f64,
    pub feature_dim: usize,
    pub recipe_hash: String,
    pub epochs: Vec<EpochStats>,
}

/// Training rows for the central points of every patch of `cloud`.
///
/// HAG bins come from the cloud's `hag_bin` channel, computed from its ground labels when absent.
pub fn training_samples(cfg: &PipelineConfig, cloud: &LabeledCloud) -> StageResult<Dataset> {
    let mut cloud = cloud.clone();
    if cloud.channels.hag_bin.is_none() {
        annotate_hag(&mut cloud, &cfg.hag).stage("hag")?;
    }
    let patches = partition_cloud(cfg, &cloud)?;
    let parts: Vec<Dataset> = patches
        .par_iter()
        .map(|p| {
            let cp = compress_patch(p, &cloud, &cfg.compress).stage("compress")?;
            let (central, features) = patch_features(&cp, &cfg.features).stage("features")?;
            let bins = cp.cloud.channels.hag_bin.as_ref().expect("annotated above");
            Ok(Dataset {
                features,
                classes: central
                    .iter()
                    .map(|&i| {
                        if cp.cloud.labels[i].is_ground() {
                            GROUND_CLASS
                        } else {
                            NON_GROUND_CLASS
                        }
                    })
                    .collect(),
                bins: central.iter().map(|&i| usize::from(bins[i])).collect(),
            })
        })
        .collect::<StageResult<_>>()?;
    let mut data = Dataset::new(cfg.features.dim());
    for part in &parts {
        data.append(part).stage("features")?;
    }
    Ok(data)
}

/// Trains a fresh toy classifier on the central points of all `clouds`.
pub fn train_classifier(
    cfg: &PipelineConfig,
    clouds: &[LabeledCloud],
) -> StageResult<(Checkpoint, TrainSummary)> {
    cfg.validate().stage("config")?;
    let mut pool = Dataset::new(cfg.features.dim());
    for cloud in clouds {
        pool.append(&training_samples(cfg, cloud)?).stage("features")?;
    }
    let pool_samples = pool.len();
    let data = if pool.len() > cfg.train.max_samples {
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        SeededRng::derived(cfg.train.optimizer.seed, 1).shuffle(&mut idx);
        idx.truncate(cfg.train.max_samples);
        idx.sort_unstable();
        pool.select(&idx)
    } else {
        pool
    };
    if data.is_empty() {
        return Err(Error::Validation("no central points to train on".into())).stage("train");
    }
    let mut clf = ToyClassifier::new(
        cfg.features.dim(),
        &cfg.model.hidden,
        cfg.hag.num_bins(),
        cfg.model.seed,
    );
    clf.fit_normalization(&data.features);
    let report = train_toy(&mut clf, &data, &cfg.loss_config(), &cfg.train.optimizer).stage("train")?;
    let ground = data.classes.iter().filter(|c| **c == GROUND_CLASS).count();
    let summary = TrainSummary {
        scenes: clouds.len(),
        pool_samples,
        samples: data.len(),
        ground_fraction: ground as f64 / data.len() as f64,
        feature_dim: cfg.features.dim(),
        recipe_hash: format!("{:016x}", cfg.features.hash()),
        epochs: report.epochs,
    };
    let ck = Checkpoint {
        classifier: clf,
        binning: cfg.hag.clone(),
        recipe_hash: cfg.features.hash(),
    };
    Ok((ck, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtmReference {
    /// A raster supplied by the caller, e.g. the analytic terrain of a synthetic scene.
    Supplied,
    /// TIN over the ground-labeled points of the truth cloud.
    TruthTin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtmSummary {
    pub reference: DtmReference,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    pub compared_cells: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub points: usize,
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    pub dtm: DtmSummary,
    /// Misclassification per true HAG bin.
    pub bin_errors: Vec<BinErrors>,
}

/// Metrics of `pred` against the labels of `truth`, and DTM RMSE of the predicted
/// ground against `reference` (or the truth ground TIN when absent).
pub fn evaluate_labels(
    cfg: &PipelineConfig,
    pred: &[ClassLabel],
    truth: &LabeledCloud,
    reference: Option<&DtmRaster>,
) -> StageResult<EvaluationReport> {
    let counts = confusion(pred, &truth.labels).stage("evaluate")?;
    let m = metrics(&counts).stage("evaluate")?;

    let (reference, kind) = match reference {
        Some(r) => (r.clone(), DtmReference::Supplied),
        None => {
            let spec = GridSpec::covering(&truth.bounds().stage("evaluate")?, cfg.dtm.cell_size)
                .stage("evaluate")?;
            let r = rasterize_dtm(&truth.ground_points(), spec).stage("evaluate")?;
            (r, DtmReference::TruthTin)
        }
    };
    let pred_ground: Vec<_> = truth
        .points
        .iter()
        .zip(pred)
        .filter(|(_, l)| l.is_ground())
        .map(|(p, _)| *p)
        .collect();
    let pred_dtm = rasterize_dtm(&pred_ground, reference.spec).stage("evaluate")?;
    let rmse = dtm_rmse(&pred_dtm, &reference).stage("evaluate")?;
    let compared_cells = pred_dtm
        .valid
        .iter()
        .zip(&reference.valid)
        .filter(|(a, b)| **a && **b)
        .count();

    let bins = match &truth.channels.hag_bin {
        Some(b) => b.clone(),
        None => {
            let mut t = truth.clone();
            annotate_hag(&mut t, &cfg.hag).stage("evaluate")?;
            t.channels.hag_bin.unwrap()
        }
    };
    let bin_errors = bin_error_table(pred, &truth.labels, &bins, cfg.hag.num_bins()).stage("evaluate")?;

    Ok(EvaluationReport {
        points: pred.len(),
        confusion: counts,
        metrics: m,
        dtm: DtmSummary {
            reference: kind,
            cell_size: reference.spec.cell_size,
            width: reference.spec.width,
            height: reference.spec.height,
            compared_cells,
            rmse,
        },
        bin_errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    TrainToy,
    Predict,
    Evaluate,
}

impl RunMode {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "train-toy" | "train_toy" => Some(RunMode::TrainToy),
            "predict" => Some(RunMode::Predict),
            "evaluate" => Some(RunMode::Evaluate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for intermediates, the labeled cloud, the checkpoint and the report.
    pub work_dir: Option<PathBuf>,
    /// Score with truth labels instead of a checkpoint.
    pub oracle: bool,
    pub reference_dtm: Option<DtmRaster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: RunMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationReport>,
}

impl RunReport {
    /// Pretty JSON with a trailing newline; identical inputs give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub const REPORT_FILE: &str = "report.json";
pub const MODEL_FILE: &str = "model.gfck";
pub const LABELED_FILE: &str = "labeled.gfb";

/// Runs the stages for `mode` on one cloud.
///
/// With a work directory, the partition, compress and predict intermediates are
/// persisted under `partition/`, `compress/` and `pred/` together with the labeled
/// cloud, checkpoint and report.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    cloud: &LabeledCloud,
    mode: RunMode,
    opts: &RunOptions,
) -> StageResult<RunReport> {
    cfg.validate().stage("config")?;
    let work = opts.work_dir.as_deref();
    if let Some(dir) = work {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)).stage("write")?;
    }

    if mode == RunMode::TrainToy {
        let (ck, summary) = train_classifier(cfg, std::slice::from_ref(cloud))?;
        if let Some(dir) = work {
            ck.save(&dir.join(MODEL_FILE)).stage("write")?;
        }
        let report = RunReport {
            mode,
            train: Some(summary),
            predict: None,
            evaluation: None,
        };
        write_report(work, &report)?;
        return Ok(report);
    }

    let toy;
    let clf: &dyn PointClassifier = if opts.oracle {
        &OracleClassifier
    } else {
        let path = cfg
            .classifier
            .as_deref()
            .ok_or_else(|| Error::Config("no classifier checkpoint configured".into()))
            .stage("config")?;
        toy = load_classifier(cfg, path).stage("ingest")?;
        &toy
    };

    let preds = match work {
        None => predict_cloud(cfg, cloud, clf)?,
        Some(dir) => {
            let patches = partition_cloud(cfg, cloud)?;
            let raw = uncompressed_patches(cloud, &patches);
            store::write_patches(&dir.join("partition"), StageKind::Partition, cloud.len(), &raw)
                .stage("write")?;
            drop(raw);
            let compressed = compress_all(cfg, cloud, &patches)?;
            store::write_patches(&dir.join("compress"), StageKind::Compress, cloud.len(), &compressed)
                .stage("write")?;
            let preds = predict_patches(cfg, &compressed, clf)?;
            store::write_predictions(&dir.join("pred"), cloud.len(), &preds).stage("write")?;
            preds
        }
    };

    let acc = merge_predictions(cloud.len(), &preds)?;
    let (labeled, labels, uncovered) = labeled_output(cloud, &acc);
    if let Some(dir) = work {
        write_cloud_auto(&labeled, &dir.join(LABELED_FILE)).stage("write")?;
    }
    let predict = PredictSummary {
        classifier: clf.name().to_string(),
        points: cloud.len(),
        patches: preds.len(),
        votes: preds.iter().map(|p| p.indices.len() as u64).sum(),
        uncovered,
        ground_points: labels.iter().filter(|l| l.is_ground()).count(),
    };
    let evaluation = if mode == RunMode::Evaluate {
        Some(evaluate_labels(cfg, &labels, cloud, opts.reference_dtm.as_ref())?)
    } else {
        None
    };
    let report = RunReport {
        mode,
        train: None,
        predict: Some(predict),
        evaluation,
    };
    write_report(work, &report)?;
    Ok(report)
}

fn write_report(work: Option<&Path>, report: &RunReport) -> StageResult<()> {
    if let Some(dir) = work {
        let path = dir.join(REPORT_FILE);
        std::fs::write(&path, report.to_json())
            .map_err(|e| Error::io(&path, e))
            .stage("write")?;
    }
    Ok(())
}

/// Runs the toy classifier end to end on `eval` scenes after training on `train` scenes.
pub fn train_and_evaluate(
    cfg: &PipelineConfig,
    train: &[LabeledCloud],
    eval: &[(LabeledCloud, Option<DtmRaster>)],
) -> StageResult<(TrainSummary, Vec<EvaluationReport>)> {
    let (ck, summary) = train_classifier(cfg, train)?;
    let mut reports = Vec::with_capacity(eval.len());
    for (cloud, reference) in eval {
        let preds = predict_cloud(cfg, cloud, &ck.classifier)?;
        let acc = merge_predictions(cloud.len(), &preds)?;
        let merged = acc.finalize();
        reports.push(evaluate_labels(cfg, &merged.labels, cloud, reference.as_ref())?);
    }
    Ok((summary, reports))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    Bins,
    Roc,
}

impl SweepParameter {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "lambda" => Some(SweepParameter::Lambda),
            "bins" => Some(SweepParameter::Bins),
            "roc" => Some(SweepParameter::Roc),
            _ => None,
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &PipelineConfig, value: f64) -> Result<PipelineConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParameter::Lambda => cfg.loss.lambda = value,
            SweepParameter::Bins => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::Config(format!("bin count must be an integer, got {value}")));
                }
                cfg.hag = crate::hag::HagBinning::with_bins(value as usize)?;
            }
            SweepParameter::Roc => cfg.compress.compressed_radius = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub mean_oa: f64,
    pub evaluations: Vec<EvaluationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Retrains and re-evaluates once per value of `parameter`.
pub fn sensitivity_sweep(
    base: &PipelineConfig,
    parameter: SweepParameter,
    values: &[f64],
    train: &[LabeledCloud],
    eval: &[(LabeledCloud, Option<DtmRaster>)],
) -> StageResult<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into())).stage("config");
    }
    if eval.is_empty() {
        return Err(Error::Config("sweep needs at least one evaluation scene".into())).stage("config");
    }
    let mut entries = Vec::with_capacity(values.len());
    for &value in values {
        let cfg = parameter.apply(base, value).stage("config")?;
        log::info!("sweep {parameter:?} = {value}");
        let (_, evaluations) = train_and_evaluate(&cfg, train, eval)?;
        let mean_oa = evaluations.iter().map(|e| e.metrics.oa).sum::<f64>() / evaluations.len() as f64;
        entries.push(SweepEntry {
            value,
            mean_oa,
            evaluations,
        });
    }
    Ok(SweepReport { parameter, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SceneObject, SceneSpec, Terrain};

    fn small_scene(seed: u64) -> crate::synth::Scene {
        generate(&SceneSpec {
            seed,
            extent: (60.0, 60.0),
            origin: (1000.0, 2000.0),
            terrain: Terrain::Inclined {
                z0: 10.0,
                slope_deg: 3.0,
                azimuth_deg: 45.0,
            },
            objects: vec![SceneObject::Box {
                x: 30.0,
                y: 30.0,
                width: 12.0,
                length: 8.0,
                height: 6.0,
            }],
            ground_density: 1.0,
            canopy_ground_density: 1.0,
            object_density: 1.0,
            noise_sigma: 0.0,
        })
        .unwrap()
    }

    fn small_cfg() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.set_outer_radius(30.0);
        cfg.set_inner_radius(10.0 * std::f64::consts::SQRT_2);
        cfg.partition.step = 20.0;
        cfg.compress.compressed_radius = 20.0;
        cfg.train.optimizer.epochs = 5;
        cfg
    }

    #[test]
    fn oracle_run_is_perfect() {
        let scene = small_scene(1);
        let cfg = small_cfg();
        let opts = RunOptions {
            oracle: true,
            ..Default::default()
        };
        let r = run_pipeline(&cfg, &scene.cloud, RunMode::Evaluate, &opts).unwrap();
        let e = r.evaluation.unwrap();
        assert_eq!(e.metrics.oa, 1.0);
        assert_eq!(r.predict.unwrap().uncovered, 0);
        assert!(e.dtm.rmse < 1e-9);
    }

    #[test]
    fn inconsistent_config_fails_before_work() {
        let scene = small_scene(1);
        let mut cfg = small_cfg();
        cfg.compress.inner_radius = 25.0;
        let err = run_pipeline(&cfg, &scene.cloud, RunMode::Evaluate, &RunOptions::default())
            .unwrap_err();
        assert_eq!(err.stage, "config");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_checkpoint_is_config_error() {
        let scene = small_scene(1);
        let err = run_pipeline(&small_cfg(), &scene.cloud, RunMode::Predict, &RunOptions::default())
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn training_produces_loadable_checkpoint() {
        let scene = small_scene(2);
        let cfg = small_cfg();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            work_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let r = run_pipeline(&cfg, &scene.cloud, RunMode::TrainToy, &opts).unwrap();
        assert_eq!(r.train.unwrap().epochs.len(), 5);
        let clf = load_classifier(&cfg, &dir.path().join(MODEL_FILE)).unwrap();
        assert_eq!(clf.input_dim, cfg.features.dim());

        let mut other = cfg.clone();
        other.features.context_sizes = vec![8.0];
        assert!(load_classifier(&other, &dir.path().join(MODEL_FILE)).is_err());
    }

    #[test]
    fn empty_sweep_rejected() {
        let err = sensitivity_sweep(&small_cfg(), SweepParameter::Lambda, &[], &[], &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn sweep_values_apply() {
        let base = small_cfg();
        assert_eq!(SweepParameter::Lambda.apply(&base, 0.25).unwrap().loss.lambda, 0.25);
        assert_eq!(SweepParameter::Bins.apply(&base, 8.0).unwrap().hag.num_bins(), 8);
        assert_eq!(
            SweepParameter::Roc.apply(&base, 25.0).unwrap().compress.compressed_radius,
            25.0
        );
        assert!(SweepParameter::Roc.apply(&base, 5.0).is_err());
        assert!(SweepParameter::Bins.apply(&base, 6.5).is_err());
    }
}
