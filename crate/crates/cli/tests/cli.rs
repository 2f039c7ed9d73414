use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fepe_core::container::{read_detections, read_meta, write_score_map};
use fepe_core::evalkit::EvalReport;
use fepe_core::geometry::{polygon_iou, Polygon, Raster, ScoreMap};
use tempfile::TempDir;

fn fepe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fepe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const GT: [(&str, &str); 3] = [
    ("img_1", "10,10,60,10,60,50,10,50,HELLO\n100,20,150,20,150,50,100,50,###\n"),
    ("img_2", "20,60,80,60,80,110,20,110,WORLD\n"),
    ("img_3", "30,30,90,25,95,75,35,80,TEXT\n130,100,190,100,190,140,130,140,MORE\n"),
];

/// Three ICDAR15-style files; img_1 has a real PNG, the others a sidecar.
/// Boxes are near-square: the shrink/expand pair only inverts exactly for
/// shapes with an incircle, and drifts below IoU 0.9 past aspect ~1.9.
fn toy_dataset() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (id, body) in GT {
        fs::write(dir.path().join(format!("gt_{id}.txt")), body).unwrap();
    }
    image::RgbImage::from_pixel(200, 160, image::Rgb([90, 90, 90]))
        .save(dir.path().join("img_1.png"))
        .unwrap();
    fs::write(
        dir.path().join("sizes.json"),
        r#"{"img_2": {"height": 160, "width": 200}, "img_3": {"height": 160, "width": 200}}"#,
    )
    .unwrap();
    dir
}

fn gen_labels(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["gen-labels", "--gts", p(data), "--out", p(out), "--ann-format", "icdar15"];
    args.extend_from_slice(extra);
    fepe(&args)
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_labels_writes_one_container_per_image() {
    let data = toy_dataset();
    let out = tempfile::tempdir().unwrap();
    let res = gen_labels(data.path(), out.path(), &["--delta", "0.4", "--mu", "5"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for (id, _) in GT {
        let meta = read_meta(&out.path().join(id)).unwrap();
        assert_eq!((meta.height, meta.width, meta.mu), (160, 200, Some(5)));
        assert_eq!(meta.arrays.len(), 5);
    }
    assert!(String::from_utf8_lossy(&res.stdout).contains("3 containers"));
}

#[test]
fn gen_labels_usage_errors() {
    let data = toy_dataset();
    let out = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen_labels(data.path(), out.path(), &["--mu", "4"])), 2);

    let missing = data.path().join("nope");
    let res = gen_labels(&missing, out.path(), &[]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains(p(&missing)), "{}", stderr(&res));
    assert_eq!(code(&fepe(&["gen-labels", "--gts", p(data.path())])), 2);
}

#[test]
fn gen_labels_strict_mode() {
    let data = toy_dataset();
    fs::write(data.path().join("gt_img_4.txt"), "1,2,3,4,5,6,7,8,X\n").unwrap();
    let out = tempfile::tempdir().unwrap();
    // img_4 has no image or size entry: skipped leniently, fatal in strict mode.
    assert_eq!(code(&gen_labels(data.path(), out.path(), &[])), 0);
    assert!(!out.path().join("img_4").exists());
    assert_eq!(code(&gen_labels(data.path(), out.path(), &["--strict"])), 1);
}

#[test]
fn gen_labels_is_idempotent_and_worker_independent() {
    let data = toy_dataset();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen_labels(data.path(), a.path(), &["--workers", "1"])), 0);
    assert_eq!(code(&gen_labels(data.path(), b.path(), &["--workers", "4"])), 0);
    let first = dir_bytes(a.path());
    assert_eq!(first, dir_bytes(b.path()));
    assert_eq!(code(&gen_labels(data.path(), a.path(), &["--workers", "2"])), 0);
    assert_eq!(first, dir_bytes(a.path()));
}

fn gt_polys(id: &str) -> Vec<(Polygon, bool)> {
    let body = GT.iter().find(|(i, _)| *i == id).unwrap().1;
    body.lines()
        .map(|l| {
            let inst = fepe_core::ingest::parse_icdar15_line(l, 1).unwrap();
            (inst.polygon, inst.ignore)
        })
        .collect()
}

#[test]
fn reconstruct_recovers_ground_truth_from_kernel_maps() {
    let data = toy_dataset();
    let labels = tempfile::tempdir().unwrap();
    let dets = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen_labels(data.path(), labels.path(), &["--size", "320x400"])), 0);
    let res = fepe(&["reconstruct", "--maps", p(labels.path()), "--out", p(dets.path())]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for (id, _) in GT {
        let set = read_detections(&dets.path().join(format!("{id}.json"))).unwrap();
        // Ignore regions have no kernel, so only care instances come back.
        let care: Vec<Polygon> = gt_polys(id).into_iter().filter(|g| !g.1).map(|g| g.0).collect();
        assert_eq!(set.detections.len(), care.len(), "{id}");
        for gt in &care {
            let best = set
                .detections
                .iter()
                .map(|d| polygon_iou(&d.polygon, gt).unwrap())
                .fold(0.0, f64::max);
            assert!(best >= 0.9, "{id}: IoU {best}");
        }
    }

    let again = tempfile::tempdir().unwrap();
    fepe(&["reconstruct", "--maps", p(labels.path()), "--out", p(again.path()), "--workers", "3"]);
    assert_eq!(dir_bytes(dets.path()), dir_bytes(again.path()));
}

#[test]
fn reconstruct_zero_map_and_errors() {
    let maps = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let zero = ScoreMap::new(Raster::new(32, 32)).unwrap();
    write_score_map(&maps.path().join("z"), "z", &zero, None).unwrap();
    assert_eq!(code(&fepe(&["reconstruct", "--maps", p(maps.path()), "--out", p(out.path())])), 0);
    assert!(read_detections(&out.path().join("z.json")).unwrap().detections.is_empty());

    let args = ["reconstruct", "--maps", p(maps.path()), "--out", p(out.path()), "--bin-thresh", "1.1"];
    assert_eq!(code(&fepe(&args)), 2);

    fs::write(maps.path().join("z/score_map.f32"), [0u8; 5]).unwrap();
    let res = fepe(&["reconstruct", "--maps", p(maps.path()), "--out", p(out.path())]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("score_map.f32"), "{}", stderr(&res));
}

/// Writes `gts` as detection JSON files with score 1.
fn dets_from_gt(dir: &Path, ids: &[&str], keep: impl Fn(usize) -> bool) {
    for id in ids {
        let detections: Vec<_> = gt_polys(id)
            .into_iter()
            .filter(|g| !g.1)
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, g)| serde_json::json!({"points": g.0, "score": 1.0}))
            .collect();
        let json = serde_json::json!({"image_id": id, "detections": detections});
        fs::write(dir.join(format!("{id}.json")), json.to_string()).unwrap();
    }
}

fn eval(dets: &Path, gts: &Path, extra: &[&str]) -> (i32, Option<EvalReport>) {
    let mut args = vec!["evaluate", "--dets", p(dets), "--gts", p(gts), "--ann-format", "icdar15"];
    args.extend_from_slice(extra);
    let out = fepe(&args);
    (code(&out), serde_json::from_slice(&out.stdout).ok())
}

#[test]
fn evaluate_examples() {
    let data = toy_dataset();
    let ids = ["img_1", "img_2", "img_3"];
    let dets = tempfile::tempdir().unwrap();
    dets_from_gt(dets.path(), &ids, |_| true);
    let (c, r) = eval(dets.path(), data.path(), &[]);
    assert_eq!(c, 0);
    assert_eq!(r.unwrap().fmeasure, 1.0);

    let empty = tempfile::tempdir().unwrap();
    dets_from_gt(empty.path(), &ids, |_| false);
    let r = eval(empty.path(), data.path(), &[]).1.unwrap();
    assert_eq!((r.precision, r.recall, r.fmeasure), (0.0, 0.0, 0.0));

    let missing = tempfile::tempdir().unwrap();
    dets_from_gt(missing.path(), &ids[..2], |_| true);
    assert_eq!(eval(missing.path(), data.path(), &[]).0, 1);
    assert_eq!(eval(dets.path(), data.path(), &["--iou", "0"]).0, 2);
}

#[test]
fn stricter_iou_never_raises_f() {
    let data = toy_dataset();
    let labels = tempfile::tempdir().unwrap();
    let dets = tempfile::tempdir().unwrap();
    gen_labels(data.path(), labels.path(), &[]);
    fepe(&["reconstruct", "--maps", p(labels.path()), "--out", p(dets.path())]);
    let mut last = f64::INFINITY;
    for iou in ["0.5", "0.75", "0.9", "0.99"] {
        let f = eval(dets.path(), data.path(), &["--iou", iou]).1.unwrap().fmeasure;
        assert!(f <= last, "F rose to {f} at {iou}");
        last = f;
    }
}

#[test]
fn gradcheck_rows_and_codes() {
    let out = fepe(&["gradcheck", "--loss", "dice", "--trials", "1000", "--seed", "42"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let out = fepe(&["gradcheck", "--loss", "all", "--trials", "50"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 4);
    assert_eq!(code(&fepe(&["gradcheck", "--trials", "0"])), 2);
    assert_eq!(code(&fepe(&["gradcheck", "--loss", "focal"])), 2);
}

fn pngs(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    v.sort();
    v
}

#[test]
fn viz_outputs() {
    let data = toy_dataset();
    let labels = tempfile::tempdir().unwrap();
    gen_labels(data.path(), labels.path(), &[]);
    let container = labels.path().join("img_1");
    let out = tempfile::tempdir().unwrap();
    let img = data.path().join("img_1.png");
    let res = fepe(&["viz", "--labels", p(&container), "--image", p(&img), "--out", p(out.path())]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(pngs(out.path()), ["kernel.png", "scale.png", "surrounding.png", "text.png"]);
    let tile = image::open(out.path().join("surrounding.png")).unwrap();
    assert_eq!((tile.width(), tile.height()), (400, 320));

    // Detections overlay.
    let dets = tempfile::tempdir().unwrap();
    dets_from_gt(dets.path(), &["img_1"], |_| true);
    let det_file = dets.path().join("img_1.json");
    let out2 = tempfile::tempdir().unwrap();
    let res = fepe(&["viz", "--dets", p(&det_file), "--image", p(&img), "--out", p(out2.path())]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(pngs(out2.path()), ["img_1_overlay.png"]);
    let missing = data.path().join("img_9.png");
    assert_eq!(code(&fepe(&["viz", "--dets", p(&det_file), "--image", p(&missing), "--out", p(out2.path())])), 1);

    // Drop the surrounding array from the container.
    let meta_path = container.join("meta.json");
    let mut meta: serde_json::Value = serde_json::from_slice(&fs::read(&meta_path).unwrap()).unwrap();
    meta["arrays"].as_array_mut().unwrap().retain(|a| a["name"] != "surrounding");
    fs::write(&meta_path, meta.to_string()).unwrap();
    let out3 = tempfile::tempdir().unwrap();
    let res = fepe(&["viz", "--labels", p(&container), "--out", p(out3.path())]);
    assert_eq!(code(&res), 0);
    assert_eq!(pngs(out3.path()), ["kernel.png", "scale.png", "text.png"]);
    assert!(stderr(&res).contains("surrounding"), "{}", stderr(&res));
}

#[test]
fn bench_emits_report() {
    let out = fepe(&["bench", "--sizes", "24x32", "--mus", "3,5", "--reps", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["cases"].as_array().unwrap().len(), 2);
    assert_eq!(code(&fepe(&["bench", "--reps", "2"])), 2);
    assert_eq!(code(&fepe(&["bench", "--mus", "4"])), 2);
}
