//! Four-direction surrounding-map counts.
//!
//! For every pixel and each direction, a `mu x mu` window is centered at the
//! pixel displaced by that direction's offset, clipped to the canvas, and the
//! kernel pixels inside it are counted.

use crate::error::{Error, Result};
use crate::geometry::{BinaryMap, Raster};

pub const DIRECTIONS: [&str; 4] = ["left", "right", "up", "down"];

/// Window-center displacements `(dx, dy)`, in the order left, right, up, down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionOffsets([(i32, i32); 4]);

impl DirectionOffsets {
    pub fn new(offsets: [(i32, i32); 4]) -> Result<Self> {
        let [l, r, u, d] = offsets;
        if l.0 != -r.0 || l.1 != r.1 || u.1 != -d.1 || u.0 != d.0 {
            return Err(Error::Config(format!(
                "direction offsets {offsets:?} are not mirror pairs"
            )));
        }
        Ok(Self(offsets))
    }

    /// Displacement `ceil((mu + 1) / 2)` along each axis: the window abuts
    /// the target pixel without containing it.
    pub fn abutting(mu: usize) -> Self {
        let s = (mu + 1).div_ceil(2) as i32;
        Self([(-s, 0), (s, 0), (0, -s), (0, s)])
    }

    pub fn as_array(&self) -> [(i32, i32); 4] {
        self.0
    }
}

pub(crate) fn validate_mu(mu: usize) -> Result<()> {
    if mu == 0 || mu.is_multiple_of(2) {
        return Err(Error::Config(format!("window side mu must be odd and >= 1, got {mu}")));
    }
    // Counts are stored as u16; mu^2 must fit.
    if mu > 255 {
        return Err(Error::Config(format!("window side mu must be <= 255, got {mu}")));
    }
    Ok(())
}

/// Summed-area table with a zero top row and left column.
pub struct IntegralImage {
    width: usize,
    sums: Vec<u32>,
}

impl IntegralImage {
    pub fn new(map: &BinaryMap) -> Self {
        let (h, w) = (map.height(), map.width());
        let stride = w + 1;
        let mut sums = vec![0u32; (h + 1) * stride];
        let cells = map.as_slice();
        for r in 0..h {
            let mut row_sum = 0u32;
            for c in 0..w {
                row_sum += cells[r * w + c] as u32;
                sums[(r + 1) * stride + c + 1] = sums[r * stride + c + 1] + row_sum;
            }
        }
        Self { width: w, sums }
    }

    /// Sum over rows `r0..r1`, cols `c0..c1` (half-open).
    #[inline]
    pub fn sum(&self, r0: usize, c0: usize, r1: usize, c1: usize) -> u32 {
        let s = self.width + 1;
        self.sums[r1 * s + c1] + self.sums[r0 * s + c0] - self.sums[r0 * s + c1] - self.sums[r1 * s + c0]
    }
}

/// Half-open clipped range `[center - radius, center + radius]` on `0..len`.
#[inline]
fn window(center: i64, radius: i64, len: usize) -> (usize, usize) {
    let lo = (center - radius).clamp(0, len as i64) as usize;
    let hi = (center + radius + 1).clamp(0, len as i64) as usize;
    (lo, hi)
}

/// Surrounding maps via an integral image; O(H·W) regardless of `mu`.
/// Output is `H x W x 4` with channels left, right, up, down.
pub fn gen_surrounding_maps(
    kernel_map: &BinaryMap,
    mu: usize,
    offsets: &DirectionOffsets,
) -> Result<Raster<u16>> {
    validate_mu(mu)?;
    let (h, w) = (kernel_map.height(), kernel_map.width());
    let integral = IntegralImage::new(kernel_map);
    let radius = (mu / 2) as i64;
    let mut out = Raster::with_channels(h, w, 4);
    let data = out.as_mut_slice();
    for r in 0..h {
        for c in 0..w {
            let base = (r * w + c) * 4;
            for (n, &(dx, dy)) in offsets.0.iter().enumerate() {
                let (r0, r1) = window(r as i64 + dy as i64, radius, h);
                let (c0, c1) = window(c as i64 + dx as i64, radius, w);
                if r0 < r1 && c0 < c1 {
                    data[base + n] = integral.sum(r0, c0, r1, c1) as u16;
                }
            }
        }
    }
    Ok(out)
}

/// Direct O(H·W·mu²) window count, the reference the integral-image path
/// is benchmarked against.
pub fn gen_surrounding_maps_naive(
    kernel_map: &BinaryMap,
    mu: usize,
    offsets: &DirectionOffsets,
) -> Result<Raster<u16>> {
    validate_mu(mu)?;
    let (h, w) = (kernel_map.height(), kernel_map.width());
    let radius = (mu / 2) as i64;
    let cells = kernel_map.as_slice();
    let mut out = Raster::with_channels(h, w, 4);
    for r in 0..h {
        for c in 0..w {
            for (n, &(dx, dy)) in offsets.0.iter().enumerate() {
                let (r0, r1) = window(r as i64 + dy as i64, radius, h);
                let (c0, c1) = window(c as i64 + dx as i64, radius, w);
                let mut count = 0u16;
                for rr in r0..r1 {
                    for cc in c0..c1 {
                        count += cells[rr * w + cc] as u16;
                    }
                }
                out.set_ch(r, c, n, count);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: enumerate every kernel pixel and test membership
    /// in each displaced window by coordinate comparison.
    fn oracle(map: &BinaryMap, mu: usize, offsets: [(i32, i32); 4]) -> Vec<u16> {
        let (h, w) = (map.height() as i64, map.width() as i64);
        let half = (mu / 2) as i64;
        let mut out = vec![0u16; (h * w * 4) as usize];
        for r in 0..h {
            for c in 0..w {
                for (n, (dx, dy)) in offsets.iter().enumerate() {
                    let (cy, cx) = (r + *dy as i64, c + *dx as i64);
                    let mut count = 0;
                    for pr in 0..h {
                        for pc in 0..w {
                            if map.get(pr as usize, pc as usize)
                                && (pr - cy).abs() <= half
                                && (pc - cx).abs() <= half
                            {
                                count += 1;
                            }
                        }
                    }
                    out[((r * w + c) * 4) as usize + n] = count;
                }
            }
        }
        out
    }

    #[test]
    fn abutting_offsets() {
        assert_eq!(DirectionOffsets::abutting(5).as_array(), [(-3, 0), (3, 0), (0, -3), (0, 3)]);
        assert_eq!(DirectionOffsets::abutting(3).as_array()[1], (2, 0));
        assert_eq!(DirectionOffsets::abutting(7).as_array()[3], (0, 4));
        assert_eq!(DirectionOffsets::abutting(1).as_array()[0], (-1, 0));
    }

    #[test]
    fn offsets_must_mirror() {
        assert!(DirectionOffsets::new([(-3, 0), (2, 0), (0, -3), (0, 3)]).is_err());
    }

    #[test]
    fn single_pixel_example() {
        let mut m = BinaryMap::new(32, 32);
        m.set(10, 10, true);
        let offs = DirectionOffsets::new([(-3, 0), (3, 0), (0, -3), (0, 3)]).unwrap();
        let s = gen_surrounding_maps(&m, 5, &offs).unwrap();
        assert_eq!(s.get_ch(10, 13, 0), 1);
        assert_eq!(s.get_ch(10, 10, 0), 0);
        assert_eq!(s.as_slice(), oracle(&m, 5, offs.as_array()).as_slice());
    }

    #[test]
    fn all_zero_and_saturated() {
        let offs = DirectionOffsets::abutting(5);
        let zero = gen_surrounding_maps(&BinaryMap::new(20, 20), 5, &offs).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0));
        let ones = BinaryMap::from_vec(20, 20, vec![1; 400]).unwrap();
        let full = gen_surrounding_maps(&ones, 5, &offs).unwrap();
        for r in 8..12 {
            for c in 8..12 {
                for n in 0..4 {
                    assert_eq!(full.get_ch(r, c, n), 25);
                }
            }
        }
    }

    #[test]
    fn fast_naive_and_oracle_agree() {
        let mut m = BinaryMap::new(13, 17);
        let mut state = 0x9e3779b97f4a7c15u64;
        for r in 0..13 {
            for c in 0..17 {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                m.set(r, c, state.is_multiple_of(3));
            }
        }
        for mu in [1, 3, 5, 7] {
            let offs = DirectionOffsets::abutting(mu);
            let fast = gen_surrounding_maps(&m, mu, &offs).unwrap();
            let naive = gen_surrounding_maps_naive(&m, mu, &offs).unwrap();
            assert_eq!(fast, naive);
            assert_eq!(fast.as_slice(), oracle(&m, mu, offs.as_array()).as_slice());
        }
    }

    #[test]
    fn even_mu_rejected() {
        assert!(gen_surrounding_maps(&BinaryMap::new(4, 4), 4, &DirectionOffsets::abutting(4)).is_err());
        assert!(gen_surrounding_maps(&BinaryMap::new(4, 4), 0, &DirectionOffsets::abutting(1)).is_err());
    }
}
