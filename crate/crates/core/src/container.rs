//! On-disk label containers and detection files.
//!
//! A container is a directory holding `meta.json` plus raw row-major
//! little-endian arrays named `<name>.<dtype>`. Label containers and score
//! map containers share the layout; a score map container carries
//! `score_map.f32` (H×W, probabilities) or, failing that, a `kernel_map.u8`
//! read as probability 1.0 / 0.0.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BinaryMap, Raster, ScoreMap};
use crate::labelgen::{LabelGenConfig, LabelSet};
use crate::postproc::DetectionSet;

pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    U16,
    F32,
}

impl Dtype {
    pub fn ext(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
            Dtype::F32 => "f32",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayMeta {
    pub name: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
}

impl ArrayMeta {
    fn file_name(&self) -> String {
        format!("{}.{}", self.name, self.dtype.ext())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerMeta {
    pub image_id: String,
    pub height: usize,
    pub width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_min: Option<f64>,
    /// Original image size when labels were generated at a resized resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_size: Option<(usize, usize)>,
    pub arrays: Vec<ArrayMeta>,
}

impl ContainerMeta {
    pub fn array(&self, name: &str) -> Option<&ArrayMeta> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Factors `(sx, sy)` mapping container pixels to source pixels.
    pub fn source_scale(&self) -> (f64, f64) {
        match self.source_size {
            Some((h, w)) => (w as f64 / self.width as f64, h as f64 / self.height as f64),
            None => (1.0, 1.0),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_meta(dir: &Path, meta: &ContainerMeta) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut json = serde_json::to_string_pretty(meta).expect("meta serializes");
    json.push('\n');
    write_file(&dir.join(META_FILE), json.as_bytes())
}

pub fn read_meta(dir: &Path) -> Result<ContainerMeta> {
    let path = dir.join(META_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let meta: ContainerMeta = serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, e.to_string()))?;
    if meta.height == 0 || meta.width == 0 {
        return Err(Error::format(&path, "height and width must be positive"));
    }
    Ok(meta)
}

trait Element: Copy {
    const DTYPE: Dtype;
    fn put(self, out: &mut Vec<u8>);
    fn take(bytes: &[u8]) -> Self;
}

impl Element for u8 {
    const DTYPE: Dtype = Dtype::U8;
    fn put(self, out: &mut Vec<u8>) {
        out.push(self);
    }
    fn take(bytes: &[u8]) -> Self {
        bytes[0]
    }
}

impl Element for u16 {
    const DTYPE: Dtype = Dtype::U16;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn take(bytes: &[u8]) -> Self {
        u16::from_le_bytes([bytes[0], bytes[1]])
    }
}

impl Element for f32 {
    const DTYPE: Dtype = Dtype::F32;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn take(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

fn shape_of<T: Copy>(r: &Raster<T>) -> Vec<usize> {
    if r.channels() == 1 {
        vec![r.height(), r.width()]
    } else {
        vec![r.height(), r.width(), r.channels()]
    }
}

fn encode<T: Element>(name: &str, r: &Raster<T>) -> (ArrayMeta, Vec<u8>) {
    let mut bytes = Vec::with_capacity(r.as_slice().len() * T::DTYPE.size());
    for &v in r.as_slice() {
        v.put(&mut bytes);
    }
    let meta = ArrayMeta {
        name: name.to_string(),
        dtype: T::DTYPE,
        shape: shape_of(r),
    };
    (meta, bytes)
}

/// Reads array `name` if `meta` lists it; checks dtype, shape and file size.
fn read_array<T: Element>(dir: &Path, meta: &ContainerMeta, name: &str) -> Result<Option<Raster<T>>> {
    let Some(entry) = meta.array(name) else {
        return Ok(None);
    };
    let path = dir.join(entry.file_name());
    if entry.dtype != T::DTYPE {
        return Err(Error::format(
            &path,
            format!("{name}: expected dtype {:?}, got {:?}", T::DTYPE, entry.dtype),
        ));
    }
    let channels = match entry.shape[..] {
        [h, w] if (h, w) == (meta.height, meta.width) => 1,
        [h, w, c] if (h, w) == (meta.height, meta.width) && c > 0 => c,
        _ => {
            return Err(Error::format(
                &path,
                format!("{name}: shape {:?} does not match {}x{}", entry.shape, meta.height, meta.width),
            ))
        }
    };
    let size = T::DTYPE.size();
    let expected = [meta.width, channels, size]
        .iter()
        .try_fold(meta.height, |acc, &x| acc.checked_mul(x))
        .ok_or_else(|| Error::format(&path, format!("{name}: shape overflows")))?;
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() != expected {
        return Err(Error::format(
            &path,
            format!("{name}: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let data = bytes.chunks_exact(size).map(T::take).collect();
    Raster::from_vec(meta.height, meta.width, channels, data).map(Some)
}

fn to_binary(dir: &Path, name: &str, r: Option<Raster<u8>>) -> Result<Option<BinaryMap>> {
    r.map(|r| {
        if r.channels() != 1 {
            return Err(Error::format(dir.join(format!("{name}.u8")), "binary maps must have one channel"));
        }
        let (h, w) = (r.height(), r.width());
        BinaryMap::from_vec(h, w, r.into_vec()).map_err(|e| Error::format(dir.join(format!("{name}.u8")), e.to_string()))
    })
    .transpose()
}

fn write_arrays(dir: &Path, mut meta: ContainerMeta, arrays: Vec<(ArrayMeta, Vec<u8>)>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (entry, bytes) in &arrays {
        write_file(&dir.join(entry.file_name()), bytes)?;
    }
    meta.arrays = arrays.into_iter().map(|(m, _)| m).collect();
    write_meta(dir, &meta)
}

/// Writes a complete label container for one image.
pub fn write_labelset(
    dir: &Path,
    image_id: &str,
    labels: &LabelSet,
    cfg: &LabelGenConfig,
    source_size: Option<(usize, usize)>,
) -> Result<()> {
    let meta = ContainerMeta {
        image_id: image_id.to_string(),
        height: labels.height(),
        width: labels.width(),
        mu: Some(cfg.mu),
        delta: Some(cfg.delta),
        a_min: Some(cfg.a_min),
        source_size: source_size.filter(|&s| s != (labels.height(), labels.width())),
        arrays: Vec::new(),
    };
    let arrays = vec![
        encode("text_map", labels.text_map.raster()),
        encode("kernel_map", labels.kernel_map.raster()),
        encode("ignore_mask", labels.ignore_mask.raster()),
        encode("scale_map", &labels.scale_map),
        encode("surrounding", &labels.surrounding_maps),
    ];
    write_arrays(dir, meta, arrays)
}

/// Contents of a label container; arrays absent from meta.json are `None`.
#[derive(Debug, Clone)]
pub struct StoredLabels {
    pub meta: ContainerMeta,
    pub text_map: Option<BinaryMap>,
    pub kernel_map: Option<BinaryMap>,
    pub ignore_mask: Option<BinaryMap>,
    pub scale_map: Option<Raster<f32>>,
    pub surrounding: Option<Raster<u16>>,
}

pub fn read_labelset(dir: &Path) -> Result<StoredLabels> {
    let meta = read_meta(dir)?;
    let surrounding = read_array::<u16>(dir, &meta, "surrounding")?;
    if let Some(s) = &surrounding {
        if s.channels() != 4 {
            return Err(Error::format(dir.join("surrounding.u16"), "surrounding needs 4 channels"));
        }
    }
    Ok(StoredLabels {
        text_map: to_binary(dir, "text_map", read_array(dir, &meta, "text_map")?)?,
        kernel_map: to_binary(dir, "kernel_map", read_array(dir, &meta, "kernel_map")?)?,
        ignore_mask: to_binary(dir, "ignore_mask", read_array(dir, &meta, "ignore_mask")?)?,
        scale_map: read_array(dir, &meta, "scale_map")?,
        surrounding,
        meta,
    })
}

/// Writes a score map container (`score_map.f32`).
pub fn write_score_map(dir: &Path, image_id: &str, map: &ScoreMap, source_size: Option<(usize, usize)>) -> Result<()> {
    let meta = ContainerMeta {
        image_id: image_id.to_string(),
        height: map.height(),
        width: map.width(),
        mu: None,
        delta: None,
        a_min: None,
        source_size: source_size.filter(|&s| s != (map.height(), map.width())),
        arrays: Vec::new(),
    };
    write_arrays(dir, meta, vec![encode("score_map", map.raster())])
}

/// Reads `score_map.f32`, or a label container's `kernel_map.u8` as a 0/1 map.
pub fn read_score_map(dir: &Path) -> Result<(ContainerMeta, ScoreMap)> {
    let meta = read_meta(dir)?;
    if let Some(r) = read_array::<f32>(dir, &meta, "score_map")? {
        let path = dir.join("score_map.f32");
        let map = ScoreMap::new(r).map_err(|e| Error::format(path, e.to_string()))?;
        return Ok((meta, map));
    }
    if let Some(k) = to_binary(dir, "kernel_map", read_array(dir, &meta, "kernel_map")?)? {
        return Ok((meta, ScoreMap::from_binary(&k)));
    }
    Err(Error::format(dir.join(META_FILE), "container has neither score_map nor kernel_map"))
}

pub fn write_detections(path: &Path, set: &DetectionSet) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut json = serde_json::to_string_pretty(set).expect("detections serialize");
    json.push('\n');
    write_file(path, json.as_bytes())
}

pub fn read_detections(path: &Path) -> Result<DetectionSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}
