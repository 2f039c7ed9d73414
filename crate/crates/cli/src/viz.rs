//! PNG renderings of label containers and detections.

use std::path::Path;
use std::process::ExitCode;

use fepe_core::container::{read_detections, read_labelset};
use fepe_core::geometry::{BinaryMap, Raster};
use image::{imageops, Rgb, RgbImage};
use log::warn;

use crate::{Failure, VizArgs};

const TEXT: [u8; 3] = [40, 220, 80];
const IGNORE: [u8; 3] = [230, 40, 40];
const KERNEL: [u8; 3] = [60, 120, 255];
const STROKE: [u8; 3] = [255, 32, 32];

pub fn run(args: VizArgs) -> Result<ExitCode, Failure> {
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::Data(format!("{}: {e}", args.out.display())))?;
    if let Some(dir) = &args.labels {
        render_labels(dir, args.image.as_deref(), &args.out)?;
    } else if let Some(dets) = &args.dets {
        let image = args.image.as_deref().expect("clap enforces --image with --dets");
        render_detections(dets, image, &args.out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn load_image(path: &Path) -> Result<RgbImage, Failure> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn save(img: &RgbImage, path: &Path) -> Result<(), Failure> {
    img.save(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn blend(base: &mut Rgb<u8>, tint: [u8; 3]) {
    for (b, t) in base.0.iter_mut().zip(tint) {
        *b = ((*b as u16 + t as u16) / 2) as u8;
    }
}

fn tinted(base: &RgbImage, layers: &[(&BinaryMap, [u8; 3])]) -> RgbImage {
    let mut out = base.clone();
    for (y, x, px) in out.enumerate_pixels_mut().map(|(x, y, p)| (y as usize, x as usize, p)) {
        for (map, tint) in layers {
            if map.get(y, x) {
                blend(px, *tint);
            }
        }
    }
    out
}

/// Black → red → yellow → white.
fn heat(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0) * 3.0;
    let ch = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    Rgb([ch(t), ch(t - 1.0), ch(t - 2.0)])
}

fn heat_map(scale: &Raster<f32>) -> RgbImage {
    let max = scale.as_slice().iter().copied().fold(0.0f32, f32::max).max(1.0) as f64;
    RgbImage::from_fn(scale.width() as u32, scale.height() as u32, |x, y| {
        heat(scale.get(y as usize, x as usize) as f64 / max)
    })
}

/// Channels left, right, up, down laid out as a 2×2 grid.
fn surrounding_tile(s: &Raster<u16>, mu: Option<usize>) -> RgbImage {
    let (h, w) = (s.height() as u32, s.width() as u32);
    let max = match mu {
        Some(mu) => (mu * mu) as f64,
        None => s.as_slice().iter().copied().max().unwrap_or(0).max(1) as f64,
    };
    RgbImage::from_fn(2 * w, 2 * h, |x, y| {
        let ch = (y / h) * 2 + x / w;
        let v = s.get_ch((y % h) as usize, (x % w) as usize, ch as usize) as f64 / max;
        let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        Rgb([g, g, g])
    })
}

fn render_labels(dir: &Path, image: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let labels = read_labelset(dir)?;
    let (h, w) = (labels.meta.height as u32, labels.meta.width as u32);
    let base = match image {
        Some(p) => {
            let img = load_image(p)?;
            if img.dimensions() == (w, h) {
                img
            } else {
                imageops::resize(&img, w, h, imageops::FilterType::Triangle)
            }
        }
        None => RgbImage::new(w, h),
    };

    match (&labels.text_map, &labels.ignore_mask) {
        (Some(text), Some(ign)) => save(&tinted(&base, &[(text, TEXT), (ign, IGNORE)]), &out.join("text.png"))?,
        (Some(text), None) => save(&tinted(&base, &[(text, TEXT)]), &out.join("text.png"))?,
        _ => warn!("{}: no text_map; text.png skipped", dir.display()),
    }
    match &labels.kernel_map {
        Some(k) => save(&tinted(&base, &[(k, KERNEL)]), &out.join("kernel.png"))?,
        None => warn!("{}: no kernel_map; kernel.png skipped", dir.display()),
    }
    match &labels.scale_map {
        Some(s) => save(&heat_map(s), &out.join("scale.png"))?,
        None => warn!("{}: no scale_map; scale.png skipped", dir.display()),
    }
    match &labels.surrounding {
        Some(s) => save(&surrounding_tile(s, labels.meta.mu), &out.join("surrounding.png"))?,
        None => warn!("{}: no surrounding array; surrounding.png skipped", dir.display()),
    }
    Ok(())
}

fn stroke(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64)) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let (x, y) = ((x0 + t * (x1 - x0)).floor(), (y0 + t * (y1 - y0)).floor());
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, Rgb(STROKE));
        }
    }
}

fn render_detections(dets: &Path, image: &Path, out: &Path) -> Result<(), Failure> {
    let set = read_detections(dets)?;
    let mut img = load_image(image)?;
    for det in &set.detections {
        let pts = det.polygon.points();
        for (i, a) in pts.iter().enumerate() {
            let b = pts[(i + 1) % pts.len()];
            stroke(&mut img, (a.x, a.y), (b.x, b.y));
        }
    }
    save(&img, &out.join(format!("{}_overlay.png", set.image_id)))
}
