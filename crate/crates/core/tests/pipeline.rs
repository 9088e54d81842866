use std::path::Path;

use gflow_core::io::{read_cloud_auto, write_cloud_auto};
use gflow_core::pipeline::store::{self, StageKind};
use gflow_core::pipeline::{
    self, OracleClassifier, PipelineConfig, RunMode, RunOptions, LABELED_FILE, MODEL_FILE,
    REPORT_FILE,
};
use gflow_core::synth::{generate, SceneObject, SceneSpec, Terrain};
use gflow_core::LabeledCloud;

fn scene() -> LabeledCloud {
    generate(&SceneSpec {
        seed: 3,
        extent: (80.0, 70.0),
        origin: (0.0, 0.0),
        terrain: Terrain::Undulating {
            z0: 5.0,
            amplitude: 1.0,
            wavelength: 60.0,
        },
        objects: vec![
            SceneObject::Box {
                x: 25.0,
                y: 30.0,
                width: 10.0,
                length: 14.0,
                height: 7.0,
            },
            SceneObject::Canopy {
                x: 60.0,
                y: 40.0,
                radius: 5.0,
                height: 12.0,
                understory_density: 0.3,
            },
        ],
        ground_density: 1.0,
        canopy_ground_density: 0.5,
        object_density: 1.0,
        noise_sigma: 0.03,
    })
    .unwrap()
    .cloud
}

fn cfg() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.set_outer_radius(40.0);
    cfg.set_inner_radius(10.0 * std::f64::consts::SQRT_2);
    cfg.partition.step = 20.0;
    cfg.compress.compressed_radius = 25.0;
    cfg.train.optimizer.epochs = 10;
    cfg
}

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn text(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn default_config_file_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg, PipelineConfig::default());
    cfg.validate().unwrap();
}

#[test]
fn staged_rerun_matches_full_run() {
    let cloud = scene();
    let cfg = cfg();
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("work");
    let opts = RunOptions {
        work_dir: Some(work.clone()),
        oracle: true,
        reference_dtm: None,
    };
    let full = pipeline::run_pipeline(&cfg, &cloud, RunMode::Evaluate, &opts).unwrap();

    // compress again from the persisted partition output
    let (m, raw) = store::read_patches(&work.join("partition"), StageKind::Partition).unwrap();
    assert_eq!(m.source_points, cloud.len());
    let compressed: Vec<_> = raw
        .iter()
        .map(|p| pipeline::compress_stored(p, &cfg).unwrap())
        .collect();
    let re = dir.path().join("re");
    store::write_patches(&re.join("compress"), StageKind::Compress, cloud.len(), &compressed).unwrap();
    assert_eq!(
        text(&work.join("compress/manifest.json")),
        text(&re.join("compress/manifest.json"))
    );

    // predict and merge from the persisted compress output
    let (_, stored) = store::read_patches(&work.join("compress"), StageKind::Compress).unwrap();
    let preds = pipeline::predict_patches(&cfg, &stored, &OracleClassifier).unwrap();
    store::write_predictions(&re.join("pred"), cloud.len(), &preds).unwrap();
    assert_eq!(
        text(&work.join("pred/manifest.json")),
        text(&re.join("pred/manifest.json"))
    );
    let (_, read_back) = store::read_predictions(&work.join("pred")).unwrap();
    let acc = pipeline::merge_predictions(cloud.len(), &read_back).unwrap();
    let (labeled, labels, _) = pipeline::labeled_output(&cloud, &acc);
    write_cloud_auto(&labeled, &re.join(LABELED_FILE)).unwrap();
    assert_eq!(bytes(&work.join(LABELED_FILE)), bytes(&re.join(LABELED_FILE)));

    let eval = pipeline::evaluate_labels(&cfg, &labels, &cloud, None).unwrap();
    assert_eq!(Some(eval), full.evaluation);
    let on_disk: pipeline::RunReport =
        serde_json::from_slice(&bytes(&work.join(REPORT_FILE))).unwrap();
    assert_eq!(on_disk, full);
}

#[test]
fn in_memory_and_persisted_runs_agree() {
    let cloud = scene();
    let cfg = cfg();
    let dir = tempfile::tempdir().unwrap();
    let oracle = RunOptions {
        oracle: true,
        ..Default::default()
    };
    let a = pipeline::run_pipeline(&cfg, &cloud, RunMode::Evaluate, &oracle).unwrap();
    let b = pipeline::run_pipeline(
        &cfg,
        &cloud,
        RunMode::Evaluate,
        &RunOptions {
            work_dir: Some(dir.path().to_path_buf()),
            ..oracle
        },
    )
    .unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let m = a.evaluation.unwrap().metrics;
    assert_eq!((m.oa, m.iou1, m.iou2), (1.0, Some(1.0), Some(1.0)));
}

#[test]
fn trained_checkpoint_drives_predict_run() {
    let cloud = scene();
    let mut cfg = cfg();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        work_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    pipeline::run_pipeline(&cfg, &cloud, RunMode::TrainToy, &opts).unwrap();
    cfg.classifier = Some(dir.path().join(MODEL_FILE));
    let r = pipeline::run_pipeline(&cfg, &cloud, RunMode::Predict, &opts).unwrap();
    let p = r.predict.unwrap();
    assert_eq!(p.classifier, "toy");
    assert_eq!(p.uncovered, 0);
    let labeled = read_cloud_auto(&dir.path().join(LABELED_FILE)).unwrap();
    assert_eq!(labeled.len(), cloud.len());
    assert!(labeled.channels.ground_prob.is_some());
}

#[test]
fn sweep_yields_one_entry_per_value() {
    let cloud = scene();
    let mut cfg = cfg();
    cfg.train.optimizer.epochs = 2;
    let eval = vec![(cloud.clone(), None)];
    let r = pipeline::sensitivity_sweep(
        &cfg,
        pipeline::SweepParameter::Lambda,
        &[0.25, 0.5, 0.75],
        std::slice::from_ref(&cloud),
        &eval,
    )
    .unwrap();
    assert_eq!(r.entries.len(), 3);
    assert_eq!(r.entries[2].value, 0.75);
}
