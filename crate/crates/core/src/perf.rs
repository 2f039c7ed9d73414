//! Micro-benchmarks: naive vs integral-image surrounding maps, and
//! end-to-end label generation throughput.
//!
//! Every case first checks that both surrounding-map paths produce the same
//! checksum; timings are only reported once that holds.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fill_polygon, BinaryMap, Point, Polygon, Raster};
use crate::labelgen::{
    gen_labelset, gen_surrounding_maps, gen_surrounding_maps_naive, validate_mu, AnnotatedImage, DirectionOffsets,
    LabelGenConfig, TextInstance,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// `(height, width)` per case.
    pub sizes: Vec<(usize, usize)>,
    pub mus: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    /// Also time the fast path across `parallel_images` maps on all cores.
    pub parallel: bool,
    pub parallel_images: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![(256, 256), (512, 512)],
            mus: vec![3, 5, 7],
            repetitions: 5,
            seed: 0,
            parallel: false,
            parallel_images: 16,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 3 {
            return Err(Error::Config(format!("repetitions must be >= 3, got {}", self.repetitions)));
        }
        if self.sizes.is_empty() || self.mus.is_empty() {
            return Err(Error::Config("need at least one size and one mu".into()));
        }
        if let Some(&(h, w)) = self.sizes.iter().find(|&&(h, w)| h == 0 || w == 0) {
            return Err(Error::Config(format!("empty bench size {h}x{w}")));
        }
        for &mu in &self.mus {
            validate_mu(mu)?;
        }
        if self.parallel && self.parallel_images == 0 {
            return Err(Error::Config("parallel_images must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub height: usize,
    pub width: usize,
    pub mu: usize,
    pub naive_ms: f64,
    pub fast_ms: f64,
    /// `naive_ms / fast_ms`.
    pub speedup: f64,
    /// FNV-1a over the little-endian surrounding-map bytes.
    pub checksum: u64,
    /// Full `gen_labelset` on a random layout of this size.
    pub labelgen_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel_ms_per_image: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub seed: u64,
    pub threads: usize,
    pub cases: Vec<BenchCase>,
}

impl BenchReport {
    pub fn case(&self, height: usize, width: usize, mu: usize) -> Option<&BenchCase> {
        self.cases
            .iter()
            .find(|c| (c.height, c.width, c.mu) == (height, width, mu))
    }
}

pub fn checksum(maps: &Raster<u16>) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    maps.as_slice()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Random axis-aligned and rotated rectangles, roughly what a text kernel
/// map looks like.
pub fn random_layout(height: usize, width: usize, rng: &mut impl Rng) -> Vec<Polygon> {
    let n = rng.gen_range(1..=12);
    let (hf, wf) = (height as f64, width as f64);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = rng.gen_range(4.0..(wf / 2.0).max(5.0));
        let h = rng.gen_range(3.0..(hf / 4.0).max(4.0));
        let cx = rng.gen_range(0.0..wf);
        let cy = rng.gen_range(0.0..hf);
        let theta: f64 = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(-0.6..0.6) };
        let (s, c) = theta.sin_cos();
        let pts = [(-w, -h), (w, -h), (w, h), (-w, h)]
            .iter()
            .map(|&(dx, dy)| Point::new(cx + 0.5 * (dx * c - dy * s), cy + 0.5 * (dx * s + dy * c)))
            .collect();
        if let Ok(p) = Polygon::new(pts) {
            out.push(p);
        }
    }
    out
}

pub fn random_kernel_map(height: usize, width: usize, rng: &mut impl Rng) -> BinaryMap {
    let mut map = BinaryMap::new(height, width);
    for p in random_layout(height, width, rng) {
        fill_polygon(&mut map, &p);
    }
    map
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median wall time in ms over `reps` runs after one discarded run.
fn time_ms<T>(reps: usize, mut f: impl FnMut() -> T) -> f64 {
    std::hint::black_box(f());
    let samples = (0..reps)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    median(samples)
}

fn threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn parallel_fast(maps: &[BinaryMap], mu: usize, offsets: &DirectionOffsets) -> Result<()> {
    let n = threads().min(maps.len()).max(1);
    let chunk = maps.len().div_ceil(n);
    std::thread::scope(|s| {
        let handles: Vec<_> = maps
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    for m in part {
                        std::hint::black_box(gen_surrounding_maps(m, mu, offsets)?);
                    }
                    Ok::<_, Error>(())
                })
            })
            .collect();
        handles
            .into_iter()
            .try_for_each(|h| h.join().expect("bench worker panicked"))
    })
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cases = Vec::new();
    for &(h, w) in &cfg.sizes {
        let map = random_kernel_map(h, w, &mut rng);
        let instances = random_layout(h, w, &mut rng)
            .into_iter()
            .map(|p| TextInstance::new(p, false))
            .collect();
        let layout = AnnotatedImage::new("bench", h, w, instances)?;
        let batch: Vec<BinaryMap> = if cfg.parallel {
            (0..cfg.parallel_images).map(|_| random_kernel_map(h, w, &mut rng)).collect()
        } else {
            Vec::new()
        };
        for &mu in &cfg.mus {
            let offsets = DirectionOffsets::abutting(mu);
            let naive = checksum(&gen_surrounding_maps_naive(&map, mu, &offsets)?);
            let fast = checksum(&gen_surrounding_maps(&map, mu, &offsets)?);
            if naive != fast {
                return Err(Error::ChecksumMismatch {
                    case: format!("{h}x{w} mu={mu}"),
                    naive,
                    fast,
                });
            }
            let naive_ms = time_ms(cfg.repetitions, || gen_surrounding_maps_naive(&map, mu, &offsets));
            let fast_ms = time_ms(cfg.repetitions, || gen_surrounding_maps(&map, mu, &offsets));
            let lcfg = LabelGenConfig {
                mu,
                ..Default::default()
            };
            let labelgen_ms = time_ms(cfg.repetitions, || gen_labelset(&layout, &lcfg));
            let parallel_ms_per_image = if cfg.parallel {
                parallel_fast(&batch, mu, &offsets)?;
                Some(time_ms(cfg.repetitions, || parallel_fast(&batch, mu, &offsets)) / batch.len() as f64)
            } else {
                None
            };
            cases.push(BenchCase {
                height: h,
                width: w,
                mu,
                naive_ms,
                fast_ms,
                speedup: naive_ms / fast_ms,
                checksum: fast,
                labelgen_ms,
                parallel_ms_per_image,
            });
        }
    }
    Ok(BenchReport {
        repetitions: cfg.repetitions,
        seed: cfg.seed,
        threads: threads(),
        cases,
    })
}
