use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use fepe_core::container::{read_detections, read_score_map, write_detections, write_labelset, META_FILE};
use fepe_core::evalkit::{evaluate as run_eval, EvalConfig, IgnoreOverlap};
use fepe_core::ingest::{load_dataset, load_ground_truth, AnnotationFormat, LoadOptions};
use fepe_core::labelgen::{gen_labelset, LabelGenConfig};
use fepe_core::losses::{gradcheck as run_gradcheck, LossKind};
use fepe_core::perf::{run_bench, BenchConfig};
use fepe_core::postproc::{reconstruct as run_reconstruct, PostprocConfig};
use fepe_core::Error;
use log::{info, warn};
use rayon::prelude::*;

use crate::{
    BenchArgs, EvaluateArgs, Failure, GenLabelsArgs, GradcheckArgs, IgnoreRuleArg, LossArg, ReconstructArgs,
};

/// Relative-error bar for `gradcheck`.
const GRADCHECK_TOL: f64 = 1e-4;

fn require_dir(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} directory not found: {}", path.display())))
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Data(format!("cannot start worker pool: {e}")))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

pub fn gen_labels(args: GenLabelsArgs) -> Result<ExitCode, Failure> {
    let cfg = LabelGenConfig {
        delta: args.delta,
        a_min: args.min_area,
        mu: args.mu,
        target_size: args.size,
    };
    cfg.validate()?;
    require_dir(&args.gts, "annotation")?;
    if let Some(images) = &args.images {
        require_dir(images, "image")?;
    }
    let pool = pool(args.pool.workers)?;
    let start = Instant::now();

    let opts = LoadOptions {
        images_dir: args.images.clone(),
        strict: args.strict,
        ..Default::default()
    };
    let dataset = load_dataset(&args.gts, AnnotationFormat::from(args.ann_format), &opts)?;
    create_dir(&args.out)?;

    let results: Vec<Result<usize, Error>> = pool.install(|| {
        dataset
            .items
            .par_iter()
            .map(|img| {
                let labels = gen_labelset(img, &cfg)?;
                write_labelset(
                    &args.out.join(&img.image_id),
                    &img.image_id,
                    &labels,
                    &cfg,
                    Some((img.height, img.width)),
                )?;
                Ok(img.instances.len())
            })
            .collect()
    });

    let (mut written, mut instances, mut skipped) = (0, 0, 0);
    for (img, res) in dataset.items.iter().zip(results) {
        match res {
            Ok(n) => {
                written += 1;
                instances += n;
            }
            Err(e @ Error::Io { .. }) => return Err(Failure::Data(e.to_string())),
            Err(e) if args.strict => return Err(Failure::Data(format!("{}: {e}", img.image_id))),
            Err(e) => {
                warn!("{}: {e}; image skipped", img.image_id);
                skipped += 1;
            }
        }
    }
    println!(
        "gen-labels: {written} containers, {instances} instances, {} warnings, {skipped} skipped in {:.1} ms",
        dataset.warnings.len(),
        start.elapsed().as_secs_f64() * 1e3
    );
    Ok(ExitCode::SUCCESS)
}

/// `dir` itself if it is a container, else its container subdirectories.
fn containers(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    if dir.join(META_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = fs::read_dir(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    for p in &out {
        if !p.join(META_FILE).is_file() {
            warn!("{}: no {META_FILE}; not a container", p.display());
        }
    }
    out.retain(|p| p.join(META_FILE).is_file());
    Ok(out)
}

pub fn reconstruct(args: ReconstructArgs) -> Result<ExitCode, Failure> {
    let cfg = PostprocConfig {
        bin_thresh: args.bin_thresh,
        expand_ratio: args.expand_ratio,
        min_kernel_area: args.min_area,
        score_thresh: args.score_thresh,
    };
    cfg.validate()?;
    require_dir(&args.maps, "score map")?;
    let pool = pool(args.pool.workers)?;
    let dirs = containers(&args.maps)?;
    create_dir(&args.out)?;

    let results: Vec<Result<usize, Error>> = pool.install(|| {
        dirs.par_iter()
            .map(|dir| {
                let (meta, map) = read_score_map(dir)?;
                let (sx, sy) = meta.source_scale();
                let set = run_reconstruct(&meta.image_id, &map, &cfg)?.rescaled(sx, sy)?;
                write_detections(&args.out.join(format!("{}.json", meta.image_id)), &set)?;
                Ok(set.detections.len())
            })
            .collect()
    });
    let mut failed = 0;
    let mut total = 0;
    for (dir, res) in dirs.iter().zip(results) {
        match res {
            Ok(n) => total += n,
            Err(e) => {
                eprintln!("error: {}: {e}", dir.display());
                failed += 1;
            }
        }
    }
    info!("reconstruct: {} maps, {total} detections", dirs.len() - failed);
    if failed > 0 {
        return Err(Failure::Data(format!("{failed} of {} containers failed", dirs.len())));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(args: EvaluateArgs) -> Result<ExitCode, Failure> {
    let cfg = EvalConfig {
        iou_thresh: args.iou,
        ignore_overlap: match args.ignore_rule {
            IgnoreRuleArg::Iou => IgnoreOverlap::Iou,
            IgnoreRuleArg::DetArea => IgnoreOverlap::DetectionArea,
        },
    };
    cfg.validate()?;
    require_dir(&args.dets, "detection")?;
    require_dir(&args.gts, "annotation")?;

    let entries = fs::read_dir(&args.dets).map_err(|e| Failure::Data(format!("{}: {e}", args.dets.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let dets = files
        .iter()
        .map(|p| read_detections(p))
        .collect::<Result<Vec<_>, _>>()?;

    let opts = LoadOptions {
        strict: args.strict,
        ..Default::default()
    };
    let gts = load_ground_truth(&args.gts, AnnotationFormat::from(args.ann_format), &opts)?;
    let report = run_eval(&dets, &gts.items, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(args: GradcheckArgs) -> Result<ExitCode, Failure> {
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be > 0".into()));
    }
    let kinds: &[LossKind] = match args.loss {
        LossArg::Bce => &[LossKind::Kernel],
        LossArg::Dice => &[LossKind::Text],
        LossArg::Ratio => &[LossKind::Surrounding, LossKind::Scale],
        LossArg::All => &LossKind::ALL,
    };
    let mut ok = true;
    for &kind in kinds {
        let row = run_gradcheck(kind, args.trials, args.seed)?;
        let pass = row.max_rel_err < GRADCHECK_TOL;
        ok &= pass;
        println!(
            "{:<18} trials={} max_rel_err={:.3e} resampled={} {}",
            row.name,
            row.trials,
            row.max_rel_err,
            row.resampled,
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn bench(args: BenchArgs) -> Result<ExitCode, Failure> {
    let cfg = BenchConfig {
        sizes: args.sizes,
        mus: args.mus,
        repetitions: args.reps,
        seed: args.seed,
        parallel: args.parallel,
        ..Default::default()
    };
    let report = run_bench(&cfg)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = &args.out {
        fs::write(path, format!("{json}\n")).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    }
    println!("{json}");
    Ok(ExitCode::SUCCESS)
}
