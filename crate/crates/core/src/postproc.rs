//! Kernel-to-text reconstruction at inference time.
//!
//! The predicted kernel probability map is binarized, kernels are extracted
//! as contours, and each kernel is pushed outward by `D' = A' * r' / L'`
//! (kernel area, expand ratio, kernel perimeter).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clip_to_rect, offset_polygon, trace_components, BinaryMap, Polygon, ScoreMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocConfig {
    pub bin_thresh: f64,
    pub expand_ratio: f64,
    /// Kernels with polygon area at or below this (px²) are dropped.
    pub min_kernel_area: f64,
    pub score_thresh: f64,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        Self {
            bin_thresh: 0.3,
            expand_ratio: 1.45,
            min_kernel_area: 16.0,
            score_thresh: 0.7,
        }
    }
}

impl PostprocConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_thresh > 0.0 && self.bin_thresh < 1.0) {
            return Err(Error::Config(format!("bin_thresh must be in (0, 1), got {}", self.bin_thresh)));
        }
        if !(self.expand_ratio > 0.0 && self.expand_ratio.is_finite()) {
            return Err(Error::Config(format!("expand_ratio must be > 0, got {}", self.expand_ratio)));
        }
        if !(self.min_kernel_area >= 0.0 && self.min_kernel_area.is_finite()) {
            return Err(Error::Config(format!(
                "min_kernel_area must be >= 0, got {}",
                self.min_kernel_area
            )));
        }
        if !(0.0..=1.0).contains(&self.score_thresh) {
            return Err(Error::Config(format!("score_thresh must be in [0, 1], got {}", self.score_thresh)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "points")]
    pub polygon: Polygon,
    /// Mean kernel probability over the kernel component.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub image_id: String,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    /// Maps detections from label resolution back to source pixels.
    pub fn rescaled(&self, sx: f64, sy: f64) -> Result<DetectionSet> {
        let detections = self
            .detections
            .iter()
            .map(|d| {
                Ok(Detection {
                    polygon: d.polygon.scale(sx, sy)?,
                    score: d.score,
                })
            })
            .collect::<Result<_>>()?;
        Ok(DetectionSet {
            image_id: self.image_id.clone(),
            detections,
        })
    }
}

/// Cell is 1 iff its probability is `>= thresh`.
pub fn binarize(map: &ScoreMap, thresh: f64) -> BinaryMap {
    let data = map.raster().as_slice().iter().map(|&p| (p as f64 >= thresh) as u8).collect();
    BinaryMap::from_vec(map.height(), map.width(), data).expect("cells are 0 or 1")
}

/// Expansion distance `area * ratio / perimeter`.
pub fn expand_distance(kernel: &Polygon, ratio: f64) -> f64 {
    kernel.area() * ratio / kernel.perimeter()
}

fn largest(polys: Vec<Polygon>) -> Option<Polygon> {
    polys.into_iter().max_by(|a, b| a.area().total_cmp(&b.area()))
}

pub fn reconstruct(image_id: &str, map: &ScoreMap, cfg: &PostprocConfig) -> Result<DetectionSet> {
    cfg.validate()?;
    let binary = binarize(map, cfg.bin_thresh);
    let probs = map.raster().as_slice();
    let (h, w) = (map.height() as f64, map.width() as f64);
    let mut detections = Vec::new();
    for comp in trace_components(&binary) {
        let kernel = comp.polygon;
        if kernel.area() <= cfg.min_kernel_area {
            continue;
        }
        let score = comp.pixels.iter().map(|&i| probs[i] as f64).sum::<f64>() / comp.pixels.len() as f64;
        if score < cfg.score_thresh {
            continue;
        }
        let distance = expand_distance(&kernel, cfg.expand_ratio);
        let Some(expanded) = largest(offset_polygon(&kernel, distance)?) else {
            continue;
        };
        let Some(clipped) = largest(clip_to_rect(&expanded, h, w)) else {
            continue;
        };
        detections.push(Detection {
            polygon: clipped,
            score,
        });
    }
    Ok(DetectionSet {
        image_id: image_id.to_string(),
        detections,
    })
}
