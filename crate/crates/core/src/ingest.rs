//! Benchmark annotation parsers and dataset loading.
//!
//! Parsers never panic: any input yields an instance or [`Error::Parse`].
//! Coordinates are kept exactly as written; rescaling happens in labelgen.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::GroundTruth;
use crate::geometry::{Point, Polygon};
use crate::labelgen::{AnnotatedImage, TextInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnnotationFormat {
    /// `x1,y1,...,x4,y4,transcription` (ICDAR2015).
    Icdar15Quad,
    /// `x1,y1,...,xN,yN[,transcription]` (CTW1500 absolute form, Total-Text).
    PolyCsv,
    /// `index difficulty x y w h angle` (MSRA-TD500).
    Td500RotRect,
}

impl AnnotationFormat {
    pub fn parse_line(self, line: &str, line_no: usize) -> Result<TextInstance> {
        match self {
            AnnotationFormat::Icdar15Quad => parse_icdar15_line(line, line_no),
            AnnotationFormat::PolyCsv => parse_poly_csv_line(line, line_no),
            AnnotationFormat::Td500RotRect => parse_td500_line(line, line_no),
        }
    }
}

impl std::str::FromStr for AnnotationFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "icdar15" => Ok(AnnotationFormat::Icdar15Quad),
            "polycsv" => Ok(AnnotationFormat::PolyCsv),
            "td500" => Ok(AnnotationFormat::Td500RotRect),
            other => Err(Error::Config(format!("unknown annotation format {other:?}"))),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number(field: &str, line: usize) -> Result<f64> {
    let t = field.trim();
    let v: f64 = t
        .parse()
        .map_err(|_| parse_err(line, format!("non-numeric coordinate {t:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite coordinate {t:?}")));
    }
    Ok(v)
}

fn polygon_from(coords: &[f64], line: usize) -> Result<Polygon> {
    let pts = coords.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
    Polygon::new(pts).map_err(|e| parse_err(line, e.to_string()))
}

fn clean(line: &str) -> &str {
    line.trim_start_matches('\u{feff}').trim()
}

/// ICDAR2015 quad. The transcription may itself contain commas.
pub fn parse_icdar15_line(line: &str, line_no: usize) -> Result<TextInstance> {
    let line = clean(line);
    let fields: Vec<&str> = line.splitn(9, ',').collect();
    if fields.len() < 8 {
        return Err(parse_err(line_no, format!("expected 8 coordinates, got {} fields", fields.len())));
    }
    let coords = fields[..8]
        .iter()
        .map(|f| number(f, line_no))
        .collect::<Result<Vec<_>>>()?;
    let transcription = fields.get(8).copied().unwrap_or("");
    Ok(TextInstance::new(polygon_from(&coords, line_no)?, transcription.trim() == "###"))
}

/// Even-length numeric prefix with an optional trailing transcription.
/// A CTW1500-style `####` marker before the transcription is stripped.
pub fn parse_poly_csv_line(line: &str, line_no: usize) -> Result<TextInstance> {
    let line = clean(line);
    let fields: Vec<&str> = line.split(',').collect();
    // A transcription that starts with a number is read as coordinates; the
    // format has no way to tell them apart.
    let n_numeric = fields
        .iter()
        .take_while(|f| f.trim().parse::<f64>().is_ok())
        .count();
    let coords = fields[..n_numeric]
        .iter()
        .map(|f| number(f, line_no))
        .collect::<Result<Vec<_>>>()?;
    if coords.len() % 2 != 0 {
        return Err(parse_err(line_no, format!("odd coordinate count {}", coords.len())));
    }
    if coords.len() < 6 {
        return Err(parse_err(line_no, format!("need at least 3 points, got {}", coords.len() / 2)));
    }
    let rest = fields[n_numeric..].join(",");
    let text = rest.trim();
    let text = text.strip_prefix("####").unwrap_or(text).trim();
    Ok(TextInstance::new(polygon_from(&coords, line_no)?, text == "###" || text == "#"))
}

/// CTW1500's original layout: `xmin,ymin,xmax,ymax` followed by 14 point
/// offsets relative to `(xmin, ymin)`.
pub fn parse_ctw1500_relative_line(line: &str, line_no: usize) -> Result<TextInstance> {
    let line = clean(line);
    let values = line
        .split(',')
        .map(|f| number(f, line_no))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != 32 {
        return Err(parse_err(line_no, format!("expected 32 values, got {}", values.len())));
    }
    let (x0, y0) = (values[0], values[1]);
    let coords: Vec<f64> = values[4..]
        .chunks_exact(2)
        .flat_map(|c| [x0 + c[0], y0 + c[1]])
        .collect();
    Ok(TextInstance::new(polygon_from(&coords, line_no)?, false))
}

/// One MSRA-TD500 record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Td500Record {
    pub index: i64,
    pub difficult: bool,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    /// Radians, rotation about the rectangle center.
    pub angle: f64,
}

impl Td500Record {
    pub fn parse(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = clean(line).split_whitespace().collect();
        if fields.len() != 7 {
            return Err(parse_err(line_no, format!("expected 7 fields, got {}", fields.len())));
        }
        let v = fields
            .iter()
            .map(|f| number(f, line_no))
            .collect::<Result<Vec<_>>>()?;
        let as_int = |x: f64, what: &str| -> Result<i64> {
            if x.fract() != 0.0 || x.abs() > i64::MAX as f64 / 2.0 {
                return Err(parse_err(line_no, format!("{what} must be an integer, got {x}")));
            }
            Ok(x as i64)
        };
        let difficulty = as_int(v[1], "difficulty")?;
        if difficulty != 0 && difficulty != 1 {
            return Err(parse_err(line_no, format!("difficulty must be 0 or 1, got {difficulty}")));
        }
        Ok(Self {
            index: as_int(v[0], "index")?,
            difficult: difficulty == 1,
            x: v[2],
            y: v[3],
            w: v[4],
            h: v[5],
            angle: v[6],
        })
    }

    pub fn corners(&self) -> [Point; 4] {
        let (cx, cy) = (self.x + self.w / 2.0, self.y + self.h / 2.0);
        let (sin, cos) = self.angle.sin_cos();
        let rot = |px: f64, py: f64| {
            let (dx, dy) = (px - cx, py - cy);
            Point::new(cx + dx * cos - dy * sin, cy + dx * sin + dy * cos)
        };
        [
            rot(self.x, self.y),
            rot(self.x + self.w, self.y),
            rot(self.x + self.w, self.y + self.h),
            rot(self.x, self.y + self.h),
        ]
    }

    pub fn to_instance(&self, line_no: usize) -> Result<TextInstance> {
        let poly = Polygon::new(self.corners().to_vec()).map_err(|e| parse_err(line_no, e.to_string()))?;
        Ok(TextInstance::new(poly, self.difficult))
    }
}

impl fmt::Display for Td500Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {}",
            self.index, self.difficult as u8, self.x, self.y, self.w, self.h, self.angle
        )
    }
}

/// MSRA-TD500 rotated rectangle; difficult boxes become ignore instances.
pub fn parse_td500_line(line: &str, line_no: usize) -> Result<TextInstance> {
    Td500Record::parse(line, line_no)?.to_instance(line_no)
}

fn join_coords(poly: &Polygon) -> String {
    poly.points()
        .iter()
        .flat_map(|p| [p.x.to_string(), p.y.to_string()])
        .collect::<Vec<_>>()
        .join(",")
}

/// Serializes a quad back to ICDAR2015 form.
pub fn format_icdar15_line(inst: &TextInstance, transcription: &str) -> Result<String> {
    if inst.polygon.len() != 4 {
        return Err(Error::Input(format!("ICDAR2015 needs 4 points, got {}", inst.polygon.len())));
    }
    let text = if inst.ignore { "###" } else { transcription };
    Ok(format!("{},{}", join_coords(&inst.polygon), text))
}

pub fn format_poly_csv_line(inst: &TextInstance, transcription: &str) -> String {
    let text = if inst.ignore { "###" } else { transcription };
    if text.is_empty() {
        join_coords(&inst.polygon)
    } else {
        format!("{},{}", join_coords(&inst.polygon), text)
    }
}

/// Pairs `<prefix><id><suffix>` annotation files with `<id>.<ext>` images.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingRule {
    pub gt_prefix: String,
    pub gt_suffix: String,
    pub image_exts: Vec<String>,
}

impl Default for PairingRule {
    fn default() -> Self {
        Self {
            gt_prefix: "gt_".into(),
            gt_suffix: ".txt".into(),
            image_exts: ["jpg", "jpeg", "png", "bmp", "JPG", "JPEG", "PNG"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl PairingRule {
    pub fn image_id<'a>(&self, file_name: &'a str) -> Option<&'a str> {
        file_name
            .strip_prefix(self.gt_prefix.as_str())?
            .strip_suffix(self.gt_suffix.as_str())
            .filter(|id| !id.is_empty())
    }
}

/// Name of the optional size sidecar: `{"<id>": {"height": H, "width": W}}`.
pub const SIZE_SIDECAR: &str = "sizes.json";

#[derive(Debug, Clone, Copy, Deserialize)]
struct SidecarSize {
    height: usize,
    width: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub pairing: PairingRule,
    /// Directory holding the images; falls back to the annotation dir.
    pub images_dir: Option<PathBuf>,
    /// Fail on the first malformed line or missing pair instead of skipping.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct LoadReport<T> {
    pub items: Vec<T>,
    pub warnings: Vec<String>,
}

impl<T> Default for LoadReport<T> {
    fn default() -> Self {
        Self {
            items: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

impl<T> LoadReport<T> {
    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }
}

/// Annotation files under `dir` matching the pairing rule, sorted by name.
fn annotation_files(dir: &Path, pairing: &PairingRule) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(id) = pairing.image_id(name) {
            files.push((id.to_string(), path.clone()));
        }
    }
    files.sort();
    Ok(files)
}

/// Parses one annotation file. Malformed lines are skipped with a warning
/// unless `strict`.
pub fn parse_annotation_file(
    path: &Path,
    format: AnnotationFormat,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<TextInstance>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if clean(line).is_empty() {
            continue;
        }
        match format.parse_line(line, i + 1) {
            Ok(inst) => out.push(inst),
            Err(e) if !strict => {
                let msg = format!("{}: {e}; instance skipped", path.display());
                warn!("{msg}");
                warnings.push(msg);
            }
            Err(e) => return Err(Error::format(path, e.to_string())),
        }
    }
    Ok(out)
}

/// Ground truth only (no image sizes), for evaluation.
pub fn load_ground_truth(dir: &Path, format: AnnotationFormat, opts: &LoadOptions) -> Result<LoadReport<GroundTruth>> {
    let mut report = LoadReport::default();
    for (id, path) in annotation_files(dir, &opts.pairing)? {
        let instances = parse_annotation_file(&path, format, opts.strict, &mut report.warnings)?;
        report.items.push(GroundTruth { image_id: id, instances });
    }
    Ok(report)
}

fn read_sidecar(dir: &Path) -> Result<HashMap<String, SidecarSize>> {
    let path = dir.join(SIZE_SIDECAR);
    if !path.is_file() {
        return Ok(HashMap::new());
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, e.to_string()))
}

fn image_size(images_dir: &Path, id: &str, pairing: &PairingRule) -> Option<(usize, usize)> {
    pairing.image_exts.iter().find_map(|ext| {
        let p = images_dir.join(format!("{id}.{ext}"));
        if !p.is_file() {
            return None;
        }
        image::image_dimensions(&p)
            .ok()
            .map(|(w, h)| (h as usize, w as usize))
    })
}

/// One [`AnnotatedImage`] per annotation file under `dir`. Image sizes come
/// from the paired image header, else from a `sizes.json` sidecar in the
/// image or annotation directory.
pub fn load_dataset(dir: &Path, format: AnnotationFormat, opts: &LoadOptions) -> Result<LoadReport<AnnotatedImage>> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "annotation directory not found"),
        ));
    }
    let images_dir = opts.images_dir.as_deref().unwrap_or(dir);
    let mut sizes = read_sidecar(dir)?;
    if images_dir != dir {
        sizes.extend(read_sidecar(images_dir)?);
    }
    let mut report = LoadReport::default();
    for (id, path) in annotation_files(dir, &opts.pairing)? {
        let size = image_size(images_dir, &id, &opts.pairing).or_else(|| sizes.get(&id).map(|s| (s.height, s.width)));
        let Some((height, width)) = size.filter(|&(h, w)| h > 0 && w > 0) else {
            let msg = format!("{}: no image or size entry for id {id:?}", path.display());
            if opts.strict {
                return Err(Error::format(&path, msg));
            }
            report.warn(msg);
            continue;
        };
        let instances = parse_annotation_file(&path, format, opts.strict, &mut report.warnings)?;
        report.items.push(AnnotatedImage::new(id, height, width, instances)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icdar15_examples() {
        let a = parse_icdar15_line("0,0,10,0,10,5,0,5,HELLO", 1).unwrap();
        assert!(!a.ignore);
        assert_eq!(a.polygon.area(), 50.0);
        let b = parse_icdar15_line("0,0,10,0,10,5,0,5,###", 1).unwrap();
        assert!(b.ignore);
        assert!(matches!(parse_icdar15_line("0,0,10,0", 3), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn icdar15_transcription_with_commas_and_bom() {
        let a = parse_icdar15_line("\u{feff}1,1,10,1,10,5,1,5,a,b,c\r", 1).unwrap();
        assert!(!a.ignore);
        assert!(parse_icdar15_line("0,0,x,0,10,5,0,5,HI", 1).is_err());
    }

    #[test]
    fn poly_csv_examples() {
        let coords: Vec<String> = (0..14)
            .flat_map(|i| {
                let t = i as f64 / 13.0 * std::f64::consts::PI;
                [format!("{}", 50.0 + 40.0 * t.cos()), format!("{}", 50.0 + 20.0 * t.sin())]
            })
            .collect();
        let inst = parse_poly_csv_line(&coords.join(","), 1).unwrap();
        assert_eq!(inst.polygon.len(), 14);
        assert_eq!(parse_poly_csv_line("0,0,4,0,0,3", 1).unwrap().polygon.len(), 3);
        assert!(parse_poly_csv_line("0,0,4,0,0,3,7", 1).is_err());
        assert!(parse_poly_csv_line("0,0,4,0,0,3,#", 1).unwrap().ignore);
        assert!(parse_poly_csv_line("0,0,4,0,0,3,#######", 1).unwrap().ignore);
        assert!(!parse_poly_csv_line("0,0,4,0,0,3,####hello", 1).unwrap().ignore);
    }

    #[test]
    fn td500_examples() {
        let a = parse_td500_line("0 0 0 0 10 4 0", 1).unwrap();
        let want = Polygon::from_coords(&[[0.0, 0.0], [10.0, 0.0], [10.0, 4.0], [0.0, 4.0]]).unwrap();
        assert_eq!(a.polygon, want);
        assert!(!a.ignore);
        assert!(parse_td500_line("0 1 0 0 10 4 0", 1).unwrap().ignore);
        assert!(parse_td500_line("0 1 0 0 10 4", 1).is_err());
        assert!(parse_td500_line("0 2 0 0 10 4 0", 1).is_err());
    }

    #[test]
    fn td500_quarter_turn() {
        let r = parse_td500_line(&format!("0 0 0 0 10 4 {}", std::f64::consts::FRAC_PI_2), 1).unwrap();
        let (x0, y0, x1, y1) = r.polygon.bounds();
        for (got, want) in [(x0, 3.0), (y0, -3.0), (x1, 7.0), (y1, 7.0)] {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn ctw_relative_converter() {
        let mut vals = vec!["10".to_string(), "20".into(), "50".into(), "40".into()];
        for i in 0..7 {
            vals.push(format!("{}", i * 5));
            vals.push("0".into());
        }
        for i in (0..7).rev() {
            vals.push(format!("{}", i * 5));
            vals.push("20".into());
        }
        let inst = parse_ctw1500_relative_line(&vals.join(","), 1).unwrap();
        assert_eq!(inst.polygon.bounds(), (10.0, 20.0, 40.0, 40.0));
    }

    #[test]
    fn format_round_trip() {
        let inst = parse_icdar15_line("1.5,2,10,2,10,7.25,1.5,7,WORD", 1).unwrap();
        let line = format_icdar15_line(&inst, "WORD").unwrap();
        assert_eq!(parse_icdar15_line(&line, 1).unwrap(), inst);

        let rec = Td500Record::parse("3 1 10.5 20 30 8 0.25", 1).unwrap();
        assert_eq!(Td500Record::parse(&rec.to_string(), 1).unwrap(), rec);
    }

    #[test]
    fn format_selector() {
        assert_eq!("td500".parse::<AnnotationFormat>().unwrap(), AnnotationFormat::Td500RotRect);
        assert!("coco".parse::<AnnotationFormat>().is_err());
    }
}
