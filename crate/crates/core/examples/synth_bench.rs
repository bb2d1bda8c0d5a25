//! Registers the pairs of a synthetic benchmark and prints per-pair errors.
//!
//! `cargo run --release --example synth_bench -- [se3|sim3] [pairs]`

use std::time::Instant;

use sfmreg_core::dataset::{generate_dataset, perturbed_cloud};
use sfmreg_core::metrics::{aggregate_rows, evaluate_pair, MetricThresholds};
use sfmreg_core::register::{register_pair, RegistrationConfig};
use sfmreg_core::synthetic::{benchmark_dataset_params, synthetic_scene, SceneParams};
use sfmreg_core::NormalizationMode;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = match args.get(1).map(String::as_str) {
        Some("se3") => NormalizationMode::Se3,
        _ => NormalizationMode::Sim3,
    };
    let npairs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let t0 = Instant::now();
    let scene = synthetic_scene(&SceneParams::default(), 7).unwrap();
    let data = generate_dataset(&scene, &benchmark_dataset_params(mode, 7), serde_json::Value::Null, None).unwrap();
    eprintln!(
        "{} points, {} partials, {} pairs, {:.1}s",
        scene.points.len(),
        data.partials.len(),
        data.manifest.pairs.len(),
        t0.elapsed().as_secs_f64()
    );
    let cfg = RegistrationConfig::for_mode(mode).with_seed(1);
    let thresholds = MetricThresholds::default();
    let mut evals = Vec::new();
    for (k, e) in data.manifest.pairs.iter().take(npairs).enumerate() {
        let a = &data.partials[e.a_partial].cloud;
        let b = perturbed_cloud(e, &data.partials);
        let out = register_pair(a, &b, &cfg, None);
        let (corrs, est) = match &out {
            Ok(o) => (o.correspondences.clone(), Some(o.transform)),
            Err(err) => {
                eprintln!("pair {k}: {err}");
                (Default::default(), None)
            }
        };
        let ev = evaluate_pair(&k.to_string(), a, &b, mode, Some(&e.gt.to_transform()), &corrs, est.as_ref(), &thresholds).unwrap();
        eprintln!(
            "pair {k:2} overlap {:.2} matches {:4} IR {:.3} rot {:?} trans {:?} registered {}",
            e.overlap,
            ev.num_matches,
            ev.inlier_ratio,
            ev.rot_error_rad.map(f64::to_degrees),
            ev.trans_error,
            ev.registered
        );
        evals.push(ev);
    }
    let agg = aggregate_rows(&evals, &thresholds).unwrap();
    println!("{mode:?} {agg:?} total {:.1}s", t0.elapsed().as_secs_f64());
}
