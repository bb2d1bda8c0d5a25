use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use anyhow::{anyhow, Context as _};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sfmreg_core::dataset::{
    generate_dataset, read_manifest, write_dataset, DatasetError, DatasetParams, GtTransform, ManifestParams,
    PartialReconstruction, Retriangulate, TrajectoryParams,
};
use sfmreg_core::features::{import_features, SuperpointSet};
use sfmreg_core::geometry::{estimate_normals, orient_normals};
use sfmreg_core::matching::MatchingError;
use sfmreg_core::metrics::{aggregate, evaluate_pair, MetricThresholds, PairEvaluation};
use sfmreg_core::ransac::RansacError;
use sfmreg_core::recon::{
    export_cloud_ply, export_matches_json, extract_cloud, parse_colmap_text, read_cloud_ply, write_colmap_text,
    MatchesFile,
};
use sfmreg_core::register::{register_pair, ImportedDescriptors, RegisterError, RegistrationConfig, RegistrationOutput};
use sfmreg_core::rng::derive_seed;
use sfmreg_core::synthetic::{synthetic_scene, SceneParams};
use sfmreg_core::{CorrespondenceSet, OrientedCloud};

use crate::args::{EvalArgs, GenDatasetArgs, IngestArgs, PipelineArgs, RegisterArgs, RegisterDatasetArgs, SynthArgs};
use crate::run_config::Context;
use crate::{input, Failure};

pub const RESULT_SCHEMA: u32 = 1;
pub const SIDECAR_SCHEMA: u32 = 1;

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display())).map_err(input)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(input)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(input)
}

pub fn ingest(ctx: &Context, a: &IngestArgs) -> Result<(), Failure> {
    let recon = parse_colmap_text(&a.colmap_dir).map_err(input)?;
    let raw = extract_cloud(&recon).map_err(input)?;
    let normals_seed = derive_seed(ctx.seed, "ingest-normals", 0);
    let cloud = orient_normals(&recon, &estimate_normals(&raw, a.normal_k.min(raw.len())).map_err(input)?, normals_seed)
        .map_err(input)?;
    export_cloud_ply(&cloud, &a.out_cloud).map_err(input)?;
    let sidecar = json!({
        "schema": SIDECAR_SCHEMA,
        "config": ctx.config_value(a, json!({ "normal_k": a.normal_k })),
        "points": cloud.len(),
        "point_ids": cloud.source_point_ids,
        "normals_seed": normals_seed,
    });
    write_json(&a.out_cloud.with_extension("json"), &sidecar)?;
    println!("{} points, {} images -> {}", cloud.len(), recon.images.len(), a.out_cloud.display());
    Ok(())
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn run_triangulator(cmd: &str, root: &Path, k: usize, p: &PartialReconstruction) -> Result<sfmreg_core::Reconstruction, DatasetError> {
    let dir = root.join("triangulation").join(format!("partial_{k:03}"));
    let (src, dst) = (dir.join("input"), dir.join("output"));
    write_colmap_text(&p.model, &src)?;
    std::fs::create_dir_all(&dst).map_err(|source| DatasetError::Io { path: dst.clone(), source })?;
    let status = Process::new("sh")
        .arg("-c")
        .arg(format!("{cmd} {} {}", shell_quote(&src), shell_quote(&dst)))
        .status()
        .map_err(|source| DatasetError::Io { path: PathBuf::from(cmd), source })?;
    if !status.success() {
        return Err(DatasetError::InvalidParameter(format!("external triangulator failed on partial {k} ({status})")));
    }
    Ok(parse_colmap_text(&dst)?)
}

pub fn gen_dataset(ctx: &Context, a: &GenDatasetArgs) -> Result<(), Failure> {
    if a.n_low == 0 || a.n_low > a.n_high {
        return Err(input(anyhow!("need 1 ≤ --n-low ≤ --n-high, got {}..{}", a.n_low, a.n_high)));
    }
    let recon = parse_colmap_text(&a.colmap_dir).map_err(input)?;
    let params = DatasetParams {
        trajectory: TrajectoryParams { n_low: a.n_low, n_high: a.n_high },
        random_partials: a.random_partials,
        random_target_images: a.random_target_images,
        min_track: a.min_track,
        manifest: ManifestParams {
            min_overlap: a.min_overlap,
            overlap_tau: a.overlap_tau,
            mode: a.mode.into(),
            scale_range: (a.scale_min, a.scale_max),
            translation_extent: a.translation_extent,
            seed: ctx.seed,
        },
    };
    let config = ctx.config_value(a, serde_json::to_value(params).map_err(input)?);
    let t0 = Instant::now();
    let hook = a
        .external_triangulator
        .as_deref()
        .map(|cmd| move |k: usize, p: &PartialReconstruction| run_triangulator(cmd, &a.out_dir, k, p));
    let data = generate_dataset(&recon, &params, config, hook.as_ref().map(|f| f as &Retriangulate<'_>)).map_err(input)?;
    write_dataset(&a.out_dir, &data.partials, &data.manifest).map_err(input)?;
    if data.manifest.pairs.is_empty() {
        eprintln!("warning: no partial pair overlaps by more than {}", a.min_overlap);
    }
    println!(
        "trajectories {}  partials {}  pairs {}  mean overlap {}",
        data.trajectories.len(),
        data.partials.len(),
        data.manifest.pairs.len(),
        data.mean_overlap().map_or("n/a".to_string(), |o| format!("{o:.3}"))
    );
    eprintln!("gen-dataset: {:.2}s", t0.elapsed().as_secs_f64());
    Ok(())
}

/// One registration as written to disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationRecord {
    pub schema: u32,
    pub config: Value,
    pub registered: bool,
    pub error: Option<String>,
    /// Maps cloud a onto cloud b in input coordinates.
    pub transform: Option<GtTransform>,
    pub inliers: usize,
    pub used_correspondences: usize,
    pub ransac_iterations: usize,
    pub superpoints: [usize; 2],
    pub matches: MatchesFile,
}

impl RegistrationRecord {
    fn from_output(config: Value, out: &RegistrationOutput) -> Self {
        Self {
            schema: RESULT_SCHEMA,
            config,
            registered: true,
            error: None,
            transform: Some(GtTransform::from(&out.transform)),
            inliers: out.ransac.inlier_count(),
            used_correspondences: out.ransac.used_correspondence_indices.len(),
            ransac_iterations: out.ransac.iterations,
            superpoints: [out.superpoints.0.len(), out.superpoints.1.len()],
            matches: MatchesFile::from(&out.correspondences),
        }
    }

    fn failed(config: Value, error: &RegisterError) -> Self {
        Self {
            schema: RESULT_SCHEMA,
            config,
            registered: false,
            error: Some(error.to_string()),
            transform: None,
            inliers: 0,
            used_correspondences: 0,
            ransac_iterations: 0,
            superpoints: [0, 0],
            matches: MatchesFile::from(&CorrespondenceSet::default()),
        }
    }
}

/// Whether an error means "no transform could be estimated" rather than bad input.
fn is_registration_failure(e: &RegisterError) -> bool {
    match e {
        RegisterError::Ransac(RansacError::InvalidParameter(_)) => false,
        RegisterError::Ransac(_) => true,
        RegisterError::Matching(MatchingError::NoSurvivingPairs | MatchingError::Empty(_)) => true,
        _ => false,
    }
}

fn feature_dir(source: &str) -> Result<Option<PathBuf>, Failure> {
    match source {
        "ppf" => Ok(None),
        s => match s.strip_prefix("import:") {
            Some(dir) if !dir.is_empty() => Ok(Some(PathBuf::from(dir))),
            _ => Err(input(anyhow!("--features must be `ppf` or `import:<dir>`, got `{s}`"))),
        },
    }
}

fn run_pipeline(
    a: &OrientedCloud,
    b: &OrientedCloud,
    pipeline: &PipelineArgs,
    config: &RegistrationConfig,
) -> Result<Result<RegistrationOutput, RegisterError>, Failure> {
    let dir = feature_dir(&pipeline.features)?;
    let loader = dir.map(|d| {
        move |sa: &SuperpointSet, sb: &SuperpointSet| Ok((import_features(d.join("a.feat"), sa)?, import_features(d.join("b.feat"), sb)?))
    });
    let out = register_pair(a, b, config, loader.as_ref().map(|f| f as &ImportedDescriptors<'_>));
    match out {
        Err(e) if !is_registration_failure(&e) => Err(input(e)),
        other => Ok(other),
    }
}

fn effective(config: &RegistrationConfig) -> Value {
    serde_json::to_value(config).expect("config serializes")
}

pub fn register(ctx: &Context, a: &RegisterArgs) -> Result<(), Failure> {
    let ca = read_cloud_ply(&a.cloud_a).map_err(input)?;
    let cb = read_cloud_ply(&a.cloud_b).map_err(input)?;
    let config = a.pipeline.config(ctx.seed);
    let cfg_value = ctx.config_value(a, effective(&config));
    let t0 = Instant::now();
    match run_pipeline(&ca, &cb, &a.pipeline, &config)? {
        Ok(out) => {
            write_json(&a.out, &RegistrationRecord::from_output(cfg_value, &out))?;
            if let Some(path) = &a.matches {
                export_matches_json(&out.correspondences, path).map_err(input)?;
            }
            if let Some(path) = &a.superpoints_out {
                write_json(path, &json!({ "a": out.superpoints.0.indices, "b": out.superpoints.1.indices }))?;
            }
            let t = &out.transform;
            println!("s = {:.6}", t.scale);
            println!("R = {:?}", t.rotation_row_major());
            println!("t = [{:.6}, {:.6}, {:.6}]", t.translation.x, t.translation.y, t.translation.z);
            println!(
                "inliers {} / {} used ({} matches, {} coarse)",
                out.ransac.inlier_count(),
                out.ransac.used_correspondence_indices.len(),
                out.correspondences.len(),
                out.coarse.len()
            );
            for (name, d) in &out.timings.stages {
                eprintln!("timing {name}: {:.3}s", d.as_secs_f64());
            }
            eprintln!("timing total: {:.3}s", t0.elapsed().as_secs_f64());
            Ok(())
        }
        Err(e) => {
            write_json(&a.out, &RegistrationRecord::failed(cfg_value, &e))?;
            Err(Failure::Registration(e.into()))
        }
    }
}

pub fn result_file(results_dir: &Path, index: usize) -> PathBuf {
    results_dir.join(format!("pair_{index:04}.json"))
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn register_dataset(ctx: &Context, a: &RegisterDatasetArgs) -> Result<(), Failure> {
    let manifest = read_manifest(&a.manifest).map_err(input)?;
    let base = base_dir(&a.manifest);
    let config = a.pipeline.config(ctx.seed);
    let cfg_value = ctx.config_value(a, effective(&config));
    std::fs::create_dir_all(&a.results_dir).with_context(|| format!("creating {}", a.results_dir.display())).map_err(input)?;
    let t0 = Instant::now();
    let outcomes: Vec<bool> = manifest
        .pairs
        .par_iter()
        .enumerate()
        .map(|(k, e)| {
            let ca = read_cloud_ply(base.join(&e.a)).map_err(input)?;
            let cb = read_cloud_ply(base.join(&e.b)).map_err(input)?;
            let (record, ok) = match run_pipeline(&ca, &cb, &a.pipeline, &config)? {
                Ok(out) => (RegistrationRecord::from_output(cfg_value.clone(), &out), true),
                Err(err) => {
                    eprintln!("pair {k}: {err}");
                    (RegistrationRecord::failed(cfg_value.clone(), &err), false)
                }
            };
            write_json(&result_file(&a.results_dir, k), &record)?;
            Ok(ok)
        })
        .collect::<Result<_, Failure>>()?;
    println!("registered {} / {} pairs", outcomes.iter().filter(|&&ok| ok).count(), outcomes.len());
    eprintln!("register-dataset: {:.2}s", t0.elapsed().as_secs_f64());
    Ok(())
}

fn evaluate_one(base: &Path, results_dir: &Path, k: usize, e: &sfmreg_core::dataset::PairEntry, thr: &MetricThresholds) -> Result<PairEvaluation, Failure> {
    let path = result_file(results_dir, k);
    let text = std::fs::read_to_string(&path).map_err(|err| Failure::Evaluation(anyhow!("pair {k}: {}: {err}", path.display())))?;
    let record: RegistrationRecord =
        serde_json::from_str(&text).map_err(|err| Failure::Evaluation(anyhow!("pair {k}: {}: {err}", path.display())))?;
    let ca = read_cloud_ply(base.join(&e.a)).map_err(input)?;
    let cb = read_cloud_ply(base.join(&e.b)).map_err(input)?;
    if record.matches.pairs.len() != record.matches.scores.len() {
        return Err(Failure::Evaluation(anyhow!("pair {k}: matches and scores differ in length")));
    }
    let corrs = CorrespondenceSet { pairs: record.matches.pairs, scores: record.matches.scores };
    if corrs.pairs.iter().any(|&[i, j]| i >= ca.len() || j >= cb.len()) {
        return Err(Failure::Evaluation(anyhow!("pair {k}: match index out of range")));
    }
    let estimate = record.transform.map(|t| t.to_transform());
    let label = format!("pair_{k:04}");
    evaluate_pair(&label, &ca, &cb, e.mode, Some(&e.gt.to_transform()), &corrs, estimate.as_ref(), thr)
        .map_err(|err| Failure::Evaluation(anyhow!("pair {k}: {err}")))
}

pub fn eval(ctx: &Context, a: &EvalArgs) -> Result<(), Failure> {
    let manifest = read_manifest(&a.manifest).map_err(input)?;
    let base = base_dir(&a.manifest);
    let thr = MetricThresholds::from(&a.thresholds);
    let missing: Vec<String> =
        (0..manifest.pairs.len()).filter(|&k| !result_file(&a.results_dir, k).is_file()).map(|k| k.to_string()).collect();
    if !missing.is_empty() {
        return Err(Failure::Evaluation(anyhow!(
            "missing result for pair {} in {}",
            missing.join(", "),
            a.results_dir.display()
        )));
    }
    let evals: Vec<PairEvaluation> = manifest
        .pairs
        .par_iter()
        .enumerate()
        .map(|(k, e)| evaluate_one(&base, &a.results_dir, k, e, &thr))
        .collect::<Result<_, _>>()?;
    let config = ctx.config_value(a, serde_json::to_value(thr).map_err(input)?);
    let report = aggregate(evals, &thr, config).map_err(|e| Failure::Evaluation(e.into()))?;
    let out = a.out.clone().unwrap_or_else(|| a.results_dir.join("report.json"));
    write_json(&out, &report)?;
    let g = &report.aggregates;
    println!("{:>6} {:>7} {:>7} {:>7} {:>10}", "pairs", "IR", "FMR", "RR", "IR pooled");
    println!(
        "{:>6} {:>7.1} {:>7.1} {:>7.1} {:>10.1}",
        report.pairs.len(),
        100.0 * g.ir_mean,
        100.0 * g.fmr,
        100.0 * g.rr,
        100.0 * g.ir_pooled
    );
    Ok(())
}

pub fn synth(ctx: &Context, a: &SynthArgs) -> Result<(), Failure> {
    let params = SceneParams { num_points: a.points, num_images: a.images, point_noise: a.noise, ..SceneParams::default() };
    let scene = synthetic_scene(&params, ctx.seed).map_err(input)?;
    write_colmap_text(&scene, &a.out_dir).map_err(input)?;
    let config = ctx.config_value(a, serde_json::to_value(params).map_err(input)?);
    write_json(&a.out_dir.join("synth.json"), &json!({ "schema": 1, "config": config }))?;
    println!("{} points, {} images -> {}", scene.points.len(), scene.images.len(), a.out_dir.display());
    Ok(())
}
