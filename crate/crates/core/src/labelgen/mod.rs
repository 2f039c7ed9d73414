//! Supervision targets: text map, kernel map, scale map and the
//! four-direction surrounding maps.

mod surrounding;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::contour::label_components;
use crate::geometry::{fill_polygon, offset_polygon, BinaryMap, Polygon, Raster};

pub use surrounding::{
    gen_surrounding_maps, gen_surrounding_maps_naive, DirectionOffsets, IntegralImage, DIRECTIONS,
};
pub(crate) use surrounding::validate_mu;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextInstance {
    #[serde(rename = "points")]
    pub polygon: Polygon,
    pub ignore: bool,
}

impl TextInstance {
    pub fn new(polygon: Polygon, ignore: bool) -> Self {
        Self { polygon, ignore }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    pub image_id: String,
    pub height: usize,
    pub width: usize,
    pub instances: Vec<TextInstance>,
}

impl AnnotatedImage {
    pub fn new(image_id: impl Into<String>, height: usize, width: usize, instances: Vec<TextInstance>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Input(format!("image size {height}x{width} is empty")));
        }
        Ok(Self {
            image_id: image_id.into(),
            height,
            width,
            instances,
        })
    }

    /// Rescales the canvas and every polygon to `height x width`.
    pub fn resized(&self, height: usize, width: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        let instances = self
            .instances
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                Ok(TextInstance::new(
                    inst.polygon.scale(sx, sy).map_err(|e| e.in_instance(i))?,
                    inst.ignore,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        AnnotatedImage::new(self.image_id.clone(), height, width, instances)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelGenConfig {
    /// Shrink ratio; the kernel offset is `area / perimeter * (1 - delta^2)`.
    pub delta: f64,
    /// Kernels with area at or below this (px², label resolution) are dropped.
    pub a_min: f64,
    /// Side of the surrounding-map window; odd.
    pub mu: usize,
    /// Optional `(height, width)` every image is rescaled to before labeling.
    pub target_size: Option<(usize, usize)>,
}

impl Default for LabelGenConfig {
    fn default() -> Self {
        Self {
            delta: 0.4,
            a_min: 16.0,
            mu: 5,
            target_size: None,
        }
    }
}

impl LabelGenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        if !(self.a_min >= 0.0 && self.a_min.is_finite()) {
            return Err(Error::Config(format!("a_min must be >= 0, got {}", self.a_min)));
        }
        surrounding::validate_mu(self.mu)?;
        if let Some((h, w)) = self.target_size {
            if h == 0 || w == 0 {
                return Err(Error::Config(format!("target size {h}x{w} is empty")));
            }
        }
        Ok(())
    }

    /// Inward offset for a polygon of the given area and perimeter.
    pub fn shrink_offset(&self, area: f64, perimeter: f64) -> f64 {
        area / perimeter * (1.0 - self.delta * self.delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelPolygon {
    pub instance: usize,
    pub polygon: Polygon,
}

#[derive(Debug, Clone)]
pub struct LabelSet {
    pub text_map: BinaryMap,
    pub kernel_map: BinaryMap,
    /// 1 where supervision is excluded.
    pub ignore_mask: BinaryMap,
    /// Kernel pixel count of the pixel's kernel component, 0 elsewhere.
    pub scale_map: Raster<f32>,
    /// `H x W x 4` counts, channels left, right, up, down.
    pub surrounding_maps: Raster<u16>,
    pub kernel_polygons: Vec<KernelPolygon>,
}

impl LabelSet {
    pub fn height(&self) -> usize {
        self.text_map.height()
    }

    pub fn width(&self) -> usize {
        self.text_map.width()
    }
}

/// Text map from non-ignore instances; ignore instances go to the mask only.
pub fn gen_text_map(img: &AnnotatedImage) -> Result<(BinaryMap, BinaryMap)> {
    let mut text = BinaryMap::new(img.height, img.width);
    let mut ignore = BinaryMap::new(img.height, img.width);
    for inst in &img.instances {
        let target = if inst.ignore { &mut ignore } else { &mut text };
        fill_polygon(target, &inst.polygon);
    }
    Ok((text, ignore))
}

/// Shrinks each non-ignore instance by `(S / L)(1 - delta^2)` and draws the
/// kernels whose area exceeds `a_min`. Collapsed kernels are dropped.
pub fn gen_kernel_map(img: &AnnotatedImage, cfg: &LabelGenConfig) -> Result<(BinaryMap, Vec<KernelPolygon>)> {
    cfg.validate()?;
    let mut map = BinaryMap::new(img.height, img.width);
    let mut kernels = Vec::new();
    for (i, inst) in img.instances.iter().enumerate() {
        if inst.ignore {
            continue;
        }
        let poly = &inst.polygon;
        let offset = cfg.shrink_offset(poly.area(), poly.perimeter());
        let pieces = offset_polygon(poly, -offset).map_err(|e| e.in_instance(i))?;
        for piece in pieces {
            if piece.area() > cfg.a_min {
                fill_polygon(&mut map, &piece);
                kernels.push(KernelPolygon {
                    instance: i,
                    polygon: piece,
                });
            }
        }
    }
    Ok((map, kernels))
}

/// Each pixel of an 8-connected kernel component holds that component's
/// pixel count; background holds 0.
pub fn gen_scale_map(kernel_map: &BinaryMap) -> Raster<f32> {
    let (_, components) = label_components(kernel_map);
    let mut out = Raster::new(kernel_map.height(), kernel_map.width());
    let data = out.as_mut_slice();
    for comp in components {
        let sigma = comp.len() as f32;
        for idx in comp {
            data[idx] = sigma;
        }
    }
    out
}

/// Full pipeline: optional rescale, text/ignore maps, kernels, scale and
/// surrounding maps.
pub fn gen_labelset(img: &AnnotatedImage, cfg: &LabelGenConfig) -> Result<LabelSet> {
    cfg.validate()?;
    let resized;
    let img = match cfg.target_size {
        Some((h, w)) if (h, w) != (img.height, img.width) => {
            resized = img.resized(h, w)?;
            &resized
        }
        _ => img,
    };
    let (text_map, ignore_mask) = gen_text_map(img)?;
    let (mut kernel_map, kernel_polygons) = gen_kernel_map(img, cfg)?;
    // A kernel center on a text boundary can flip under rounding.
    kernel_map.and_assign(&text_map);
    let scale_map = gen_scale_map(&kernel_map);
    let surrounding_maps = gen_surrounding_maps(&kernel_map, cfg.mu, &DirectionOffsets::abutting(cfg.mu))?;
    Ok(LabelSet {
        text_map,
        kernel_map,
        ignore_mask,
        scale_map,
        surrounding_maps,
        kernel_polygons,
    })
}
