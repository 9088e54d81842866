use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gflow_core::evaluate::{DtmRaster, GridSpec};
use gflow_core::hag::annotate_hag;
use gflow_core::io::{read_cloud_auto, write_cloud_auto};
use gflow_core::partition::PartitionConfig;
use gflow_core::pipeline::store::{self, StageKind};
use gflow_core::pipeline::{
    self, InStage, OracleClassifier, PipelineConfig, PointClassifier, RunMode, RunOptions,
    StageResult, SweepParameter,
};
use gflow_core::synth::{generate, Preset};
use gflow_core::{Error, LabeledCloud};

/// Written next to partition output so `compress` reuses the same radii.
const PARTITION_CONFIG_FILE: &str = "partition.toml";

#[derive(Parser)]
#[command(name = "gflow", version, about = "Ground filtering for airborne LiDAR point clouds")]
struct Cli {
    /// Seed for scene generation and training (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for patch-level stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> StageResult<PipelineConfig> {
        match &self.config {
            Some(p) => PipelineConfig::load(p).stage("config"),
            None => Ok(PipelineConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic scene.
    Synth {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the analytic terrain as an ESRI ASCII grid.
        #[arg(long)]
        truth_dtm: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        dtm_cell: f64,
    },
    /// Split a cloud into overlapping cylindrical patches.
    Partition {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        outer: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        inner: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compress the context ring of every patch.
    Compress {
        #[arg(long)]
        patches: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        roc: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append height-above-ground channels.
    Hag {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the toy classifier on labeled clouds.
    TrainToy {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score the central points of compressed patches.
    Predict {
        #[arg(long)]
        compressed: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, conflicts_with = "oracle")]
        model: Option<PathBuf>,
        /// Use the truth labels carried by the patches.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Soft-vote patch predictions into one labeled cloud.
    Merge {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predicted labels with truth and report metrics.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        dtm_cell: Option<f64>,
        #[arg(long)]
        reference_dtm: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every stage on one cloud.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        input: PathBuf,
        /// train-toy, predict or evaluate.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        work_dir: Option<PathBuf>,
        #[arg(long)]
        reference_dtm: Option<PathBuf>,
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Retrain and evaluate for each value of one hyperparameter.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// lambda, bins or roc.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, required = true, num_args = 1..)]
        train: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        eval: Vec<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> StageResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into())).stage("config");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))
            .stage("config")?;
    }
    let seed = cli.seed;

    match cli.command {
        Command::Synth {
            preset,
            out,
            truth_dtm,
            dtm_cell,
        } => {
            let preset = Preset::from_name(&preset)
                .ok_or_else(|| Error::Config(format!("unknown preset `{preset}`")))
                .stage("config")?;
            let scene = generate(&preset.spec(seed.unwrap_or(0))).stage("synth")?;
            write_cloud_auto(&scene.cloud, &out).stage("write")?;
            if let Some(path) = truth_dtm {
                let spec = GridSpec::covering(&scene.terrain.bounds(), dtm_cell).stage("config")?;
                scene.terrain.raster(spec).write_esri_ascii(&path).stage("write")?;
            }
            log::info!("wrote {} points to {}", scene.cloud.len(), out.display());
        }
        Command::Partition {
            input,
            config,
            outer,
            step,
            inner,
            out,
        } => {
            let mut cfg = config.load()?;
            if let Some(v) = outer {
                cfg.set_outer_radius(v);
            }
            if let Some(v) = step {
                cfg.partition.step = v;
            }
            if let Some(v) = inner {
                cfg.set_inner_radius(v);
            }
            let cloud = ingest(&input)?;
            let patches = pipeline::partition_cloud(&cfg, &cloud)?;
            let raw = pipeline::uncompressed_patches(&cloud, &patches);
            store::write_patches(&out, StageKind::Partition, cloud.len(), &raw).stage("write")?;
            let path = out.join(PARTITION_CONFIG_FILE);
            let text = toml_partition(&cfg.partition);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e)).stage("write")?;
            log::info!("{} patches written to {}", raw.len(), out.display());
        }
        Command::Compress {
            patches,
            config,
            roc,
            out,
        } => {
            let mut cfg = config.load()?;
            let path = patches.join(PARTITION_CONFIG_FILE);
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e)).stage("ingest")?;
                let p = PipelineConfig::from_toml(&text).stage("ingest")?.partition;
                cfg.set_outer_radius(p.outer_radius);
                cfg.set_inner_radius(p.inner_radius);
                cfg.partition.step = p.step;
            }
            if let Some(v) = roc {
                cfg.compress.compressed_radius = v;
            }
            cfg.validate().stage("config")?;
            let (manifest, raw) = store::read_patches(&patches, StageKind::Partition).stage("ingest")?;
            let compressed = {
                use rayon::prelude::*;
                raw.par_iter()
                    .map(|p| pipeline::compress_stored(p, &cfg))
                    .collect::<gflow_core::Result<Vec<_>>>()
                    .stage("compress")?
            };
            store::write_patches(&out, StageKind::Compress, manifest.source_points, &compressed)
                .stage("write")?;
        }
        Command::Hag { input, config, out } => {
            let cfg = config.load()?;
            cfg.hag.validate().stage("config")?;
            let mut cloud = ingest(&input)?;
            annotate_hag(&mut cloud, &cfg.hag).stage("hag")?;
            write_cloud_auto(&cloud, &out).stage("write")?;
        }
        Command::TrainToy {
            input,
            config,
            out,
            report,
        } => {
            let mut cfg = config.load()?;
            apply_seed(&mut cfg, seed);
            cfg.validate().stage("config")?;
            let clouds = input.iter().map(|p| ingest(p)).collect::<StageResult<Vec<_>>>()?;
            let (ck, summary) = pipeline::train_classifier(&cfg, &clouds)?;
            ck.save(&out).stage("write")?;
            emit_json(report.as_deref(), &json(&summary))?;
        }
        Command::Predict {
            compressed,
            config,
            model,
            oracle,
            out,
        } => {
            let mut cfg = config.load()?;
            if model.is_some() {
                cfg.classifier = model;
            }
            cfg.validate().stage("config")?;
            let toy;
            let clf: &dyn PointClassifier = if oracle {
                &OracleClassifier
            } else {
                let path = cfg
                    .classifier
                    .clone()
                    .ok_or_else(|| Error::Config("pass --model, --oracle or set `classifier`".into()))
                    .stage("config")?;
                toy = pipeline::load_classifier(&cfg, &path).stage("ingest")?;
                &toy
            };
            let (manifest, patches) = store::read_patches(&compressed, StageKind::Compress).stage("ingest")?;
            let preds = pipeline::predict_patches(&cfg, &patches, clf)?;
            store::write_predictions(&out, manifest.source_points, &preds).stage("write")?;
        }
        Command::Merge { pred, cloud, out } => {
            let (manifest, preds) = store::read_predictions(&pred).stage("ingest")?;
            let cloud = ingest(&cloud)?;
            if manifest.source_points != cloud.len() {
                return Err(Error::Validation(format!(
                    "predictions index {} points, cloud has {}",
                    manifest.source_points,
                    cloud.len()
                )))
                .stage("ingest");
            }
            let acc = pipeline::merge_predictions(cloud.len(), &preds)?;
            let (labeled, _, uncovered) = pipeline::labeled_output(&cloud, &acc);
            if uncovered > 0 {
                eprintln!("warning: {uncovered} points received no prediction and were labeled non-ground");
            }
            write_cloud_auto(&labeled, &out).stage("write")?;
        }
        Command::Evaluate {
            pred,
            truth,
            config,
            dtm_cell,
            reference_dtm,
            report,
        } => {
            let mut cfg = config.load()?;
            if let Some(c) = dtm_cell {
                cfg.dtm.cell_size = c;
            }
            cfg.validate().stage("config")?;
            let pred = ingest(&pred)?;
            let truth = ingest(&truth)?;
            if pred.len() != truth.len() {
                return Err(Error::Validation(format!(
                    "prediction has {} points, truth has {}",
                    pred.len(),
                    truth.len()
                )))
                .stage("ingest");
            }
            let reference = reference_dtm.as_deref().map(read_raster).transpose()?;
            let r = pipeline::evaluate_labels(&cfg, &pred.labels, &truth, reference.as_ref())?;
            emit_json(report.as_deref(), &json(&r))?;
        }
        Command::Run {
            config,
            input,
            mode,
            work_dir,
            reference_dtm,
            oracle,
            model,
        } => {
            let mut cfg = config.load()?;
            apply_seed(&mut cfg, seed);
            if model.is_some() {
                cfg.classifier = model;
            }
            let mode = RunMode::from_name(&mode)
                .ok_or_else(|| Error::Config(format!("unknown mode `{mode}`")))
                .stage("config")?;
            cfg.validate().stage("config")?;
            let cloud = ingest(&input)?;
            let opts = RunOptions {
                work_dir: work_dir.clone(),
                oracle,
                reference_dtm: reference_dtm.as_deref().map(read_raster).transpose()?,
            };
            let report = pipeline::run_pipeline(&cfg, &cloud, mode, &opts)?;
            if work_dir.is_none() {
                print!("{}", report.to_json());
            }
        }
        Command::Sweep {
            config,
            param,
            values,
            train,
            eval,
            report,
        } => {
            let mut cfg = config.load()?;
            apply_seed(&mut cfg, seed);
            let param = SweepParameter::from_name(&param)
                .ok_or_else(|| Error::Config(format!("unknown sweep parameter `{param}`")))
                .stage("config")?;
            cfg.validate().stage("config")?;
            let train = train.iter().map(|p| ingest(p)).collect::<StageResult<Vec<_>>>()?;
            let eval = eval
                .iter()
                .map(|p| Ok((ingest(p)?, None)))
                .collect::<StageResult<Vec<_>>>()?;
            let r = pipeline::sensitivity_sweep(&cfg, param, &values, &train, &eval)?;
            emit_json(report.as_deref(), &r.to_json())?;
        }
    }
    Ok(())
}

fn ingest(path: &Path) -> StageResult<LabeledCloud> {
    read_cloud_auto(path).stage("ingest")
}

fn read_raster(path: &Path) -> StageResult<DtmRaster> {
    DtmRaster::read_esri_ascii(path).stage("ingest")
}

fn apply_seed(cfg: &mut PipelineConfig, seed: Option<u64>) {
    if let Some(s) = seed {
        cfg.train.optimizer.seed = s;
        cfg.model.seed = s;
    }
}

fn toml_partition(p: &PartitionConfig) -> String {
    let cfg = PipelineConfig {
        partition: *p,
        ..Default::default()
    };
    cfg.to_toml()
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn emit_json(path: Option<&Path>, text: &str) -> StageResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)).stage("write"),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
