use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sfmreg_core::features::Support;
use sfmreg_core::metrics::MetricThresholds;
use sfmreg_core::register::{FineSupport, RegistrationConfig};
use sfmreg_core::NormalizationMode;

#[derive(Debug, Parser)]
#[command(name = "sfmreg", version, about = "Geometry-only registration of SfM reconstructions")]
pub struct Cli {
    /// Worker threads for parallel stages; outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Master seed for every stochastic step.
    #[arg(long, global = true, env = "SFMREG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a COLMAP text model into an oriented PLY cloud.
    Ingest(IngestArgs),
    /// Build partial reconstructions and a perturbed pair manifest.
    GenDataset(GenDatasetArgs),
    /// Register two clouds.
    Register(RegisterArgs),
    /// Register every pair of a manifest into a results directory.
    RegisterDataset(RegisterDatasetArgs),
    /// Score registration results against a manifest.
    Eval(EvalArgs),
    /// Write a procedural two-facade scene as a COLMAP text model.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Se3,
    Sim3,
}

impl From<ModeArg> for NormalizationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Se3 => NormalizationMode::Se3,
            ModeArg::Sim3 => NormalizationMode::Sim3,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    pub colmap_dir: PathBuf,
    pub out_cloud: PathBuf,
    /// Neighbourhood size for PCA normals.
    #[arg(long, default_value_t = sfmreg_core::geometry::DEFAULT_NORMAL_K)]
    pub normal_k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDatasetArgs {
    pub colmap_dir: PathBuf,
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Sim3)]
    pub mode: ModeArg,
    /// Pairs need overlap strictly above this.
    #[arg(long, default_value_t = 0.30)]
    pub min_overlap: f64,
    #[arg(long, default_value_t = 0.1)]
    pub overlap_tau: f64,
    #[arg(long, default_value_t = 75)]
    pub n_low: usize,
    #[arg(long, default_value_t = 300)]
    pub n_high: usize,
    /// Random-point partials to add; 0 disables them.
    #[arg(long, default_value_t = 10)]
    pub random_partials: usize,
    #[arg(long, default_value_t = 200)]
    pub random_target_images: usize,
    #[arg(long, default_value_t = 2)]
    pub min_track: usize,
    #[arg(long, default_value_t = 0.5)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub scale_max: f64,
    /// Half-width of the translation box in scene-normalized units.
    #[arg(long, default_value_t = 0.5)]
    pub translation_extent: f64,
    /// Command run as `<cmd> <input_model_dir> <output_model_dir>` for each
    /// partial; its COLMAP text output replaces the track-filtered model.
    #[arg(long)]
    pub external_triangulator: Option<String>,
}

/// Matcher and RANSAC overrides; unset values take the per-mode defaults.
#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Sim3)]
    pub mode: ModeArg,
    /// `ppf`, or `import:<dir>` with `<dir>/a.feat` and `<dir>/b.feat`
    /// holding one row per superpoint in FPS order.
    #[arg(long, default_value = "ppf")]
    pub features: String,
    #[arg(long)]
    pub max_superpoints: Option<usize>,
    /// Fixed-radius descriptor support (normalized units).
    #[arg(long, conflicts_with = "descriptor_knn")]
    pub descriptor_radius: Option<f64>,
    /// k-NN descriptor support.
    #[arg(long)]
    pub descriptor_knn: Option<usize>,
    /// k-NN support for descriptors inside local groups.
    #[arg(long, conflicts_with = "fine_radius_fraction")]
    pub fine_knn: Option<usize>,
    /// Fine support as a fraction of the descriptor radius.
    #[arg(long)]
    pub fine_radius_fraction: Option<f64>,
    #[arg(long)]
    pub coarse_k: Option<usize>,
    #[arg(long)]
    pub mutual_top: Option<usize>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub sinkhorn_iters: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub slack_score: Option<f64>,
    #[arg(long)]
    pub confidence_min: Option<f64>,
    #[arg(long)]
    pub inlier_threshold: Option<f64>,
    #[arg(long)]
    pub max_correspondences: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub confidence: Option<f64>,
}

impl PipelineArgs {
    pub fn config(&self, seed: u64) -> RegistrationConfig {
        let mut c = RegistrationConfig::for_mode(self.mode.into()).with_seed(seed);
        if let Some(v) = self.max_superpoints {
            c.max_superpoints = v;
        }
        if let Some(r) = self.descriptor_radius {
            c.descriptor_support = Support::Radius(r);
        }
        if let Some(k) = self.descriptor_knn {
            c.descriptor_support = Support::Knn(k);
        }
        if let Some(k) = self.fine_knn {
            c.fine_support = FineSupport::Knn(k);
        }
        if let Some(f) = self.fine_radius_fraction {
            c.fine_support = FineSupport::RadiusFraction(f);
        }
        if let Some(v) = self.coarse_k {
            c.coarse.k = v;
        }
        if let Some(v) = self.mutual_top {
            c.coarse.mutual_top = v;
        }
        if let Some(v) = self.group_size {
            c.group_size = v;
        }
        if let Some(v) = self.sinkhorn_iters {
            c.sinkhorn.iters = v;
        }
        if let Some(v) = self.temperature {
            c.sinkhorn.temperature = v;
        }
        if let Some(v) = self.slack_score {
            c.sinkhorn.slack_score = v;
        }
        if let Some(v) = self.confidence_min {
            c.confidence_min = v;
        }
        if let Some(v) = self.inlier_threshold {
            c.ransac.inlier_threshold = v;
        }
        if let Some(v) = self.max_correspondences {
            c.ransac.max_correspondences = v;
        }
        if let Some(v) = self.max_iterations {
            c.ransac.max_iterations = v;
        }
        if let Some(v) = self.confidence {
            c.ransac.confidence = v;
        }
        c
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RegisterArgs {
    pub cloud_a: PathBuf,
    pub cloud_b: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Result JSON (transform, inlier stats, matches).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Also write the matches alone in the standalone matches format.
    #[arg(long)]
    pub matches: Option<PathBuf>,
    /// Write the FPS superpoint rows of both clouds as JSON.
    #[arg(long)]
    pub superpoints_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RegisterDatasetArgs {
    pub manifest: PathBuf,
    pub results_dir: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 0.1)]
    pub tau_ir: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tau_fmr: f64,
    #[arg(long, default_value_t = 5.0)]
    pub rr_rot_deg: f64,
    #[arg(long, default_value_t = 0.05)]
    pub rr_trans: f64,
}

impl From<&ThresholdArgs> for MetricThresholds {
    fn from(a: &ThresholdArgs) -> Self {
        MetricThresholds { tau_ir: a.tau_ir, tau_fmr: a.tau_fmr, rr_rot_deg: a.rr_rot_deg, rr_trans: a.rr_trans }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    pub manifest: PathBuf,
    pub results_dir: PathBuf,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Report path; defaults to `<results_dir>/report.json`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub points: usize,
    #[arg(long, default_value_t = 120)]
    pub images: usize,
    /// Gaussian jitter on point positions, in scene units.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}
