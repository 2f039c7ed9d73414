use serde::{Deserialize, Serialize};

use super::Polygon;
use crate::error::{Error, Result};

/// Dense row-major raster with an optional trailing channel axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Raster<T> {
    pub fn new(height: usize, width: usize) -> Self {
        Self::with_channels(height, width, 1)
    }

    pub fn with_channels(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![T::default(); height * width * channels],
        }
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            channels: 1,
            data: vec![value; height * width],
        }
    }
}

impl<T: Copy> Raster<T> {
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Input(format!(
                "raster {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[(row * self.width + col) * self.channels]
    }

    #[inline]
    pub fn get_ch(&self, row: usize, col: usize, ch: usize) -> T {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[(row * self.width + col) * self.channels] = value;
    }

    #[inline]
    pub fn set_ch(&mut self, row: usize, col: usize, ch: usize, value: T) {
        self.data[(row * self.width + col) * self.channels + ch] = value;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Raster whose cells are exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMap(Raster<u8>);

impl BinaryMap {
    pub fn new(height: usize, width: usize) -> Self {
        BinaryMap(Raster::new(height, width))
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::Input(format!("binary map cell holds {v}")));
        }
        Ok(BinaryMap(Raster::from_vec(height, width, 1, data)?))
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.0.get(row, col) != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.0.set(row, col, on as u8)
    }

    pub fn as_slice(&self) -> &[u8] {
        self.0.as_slice()
    }

    pub fn raster(&self) -> &Raster<u8> {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.data.iter().filter(|&&v| v != 0).count()
    }

    /// Cellwise AND with another map of the same size.
    pub fn and_assign(&mut self, other: &BinaryMap) {
        for (a, &b) in self.0.data.iter_mut().zip(&other.0.data) {
            *a &= b;
        }
    }

    pub fn or_assign(&mut self, other: &BinaryMap) {
        for (a, &b) in self.0.data.iter_mut().zip(&other.0.data) {
            *a |= b;
        }
    }
}

/// Predicted probability raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap(Raster<f32>);

impl ScoreMap {
    pub fn new(raster: Raster<f32>) -> Result<Self> {
        if raster.channels != 1 {
            return Err(Error::Input(format!(
                "score map must have one channel, got {}",
                raster.channels
            )));
        }
        if let Some(v) = raster
            .data
            .iter()
            .find(|v| !v.is_finite() || !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Input(format!("score map value {v} outside [0, 1]")));
        }
        Ok(ScoreMap(raster))
    }

    pub fn from_binary(map: &BinaryMap) -> Self {
        ScoreMap(map.raster().map(|v| v as f32))
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.0.get(row, col)
    }

    pub fn raster(&self) -> &Raster<f32> {
        &self.0
    }
}

/// Sets every cell whose center lies inside `poly` (even-odd rule).
/// Parts of the polygon outside the canvas are ignored.
pub fn fill_polygon(map: &mut BinaryMap, poly: &Polygon) {
    let (h, w) = (map.height(), map.width());
    let (_, min_y, _, max_y) = poly.bounds();
    let r0 = (min_y - 0.5).ceil().max(0.0) as usize;
    let r1 = ((max_y - 0.5).floor().min(h as f64 - 1.0)).max(-1.0);
    if r1 < 0.0 {
        return;
    }
    let r1 = r1 as usize;
    let mut xs: Vec<f64> = Vec::new();
    for row in r0..=r1 {
        let y = row as f64 + 0.5;
        xs.clear();
        for (a, b) in poly.edges() {
            // Half-open in y so a vertex on the scanline is counted once.
            if (a.y <= y) != (b.y <= y) {
                xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        for pair in xs.chunks_exact(2) {
            // Columns whose center x satisfies x0 <= c + 0.5 < x1.
            let c0 = (pair[0] - 0.5).ceil().max(0.0);
            let c1 = (pair[1] - 0.5).ceil().min(w as f64);
            if c1 <= c0 {
                continue;
            }
            for col in c0 as usize..c1 as usize {
                map.set(row, col, true);
            }
        }
    }
}

/// Rasterizes a single polygon onto a fresh `height x width` canvas.
pub fn rasterize(poly: &Polygon, height: usize, width: usize) -> Result<BinaryMap> {
    if height == 0 || width == 0 {
        return Err(Error::Input(format!("canvas {height}x{width} is empty")));
    }
    let mut map = BinaryMap::new(height, width);
    fill_polygon(&mut map, poly);
    Ok(map)
}
