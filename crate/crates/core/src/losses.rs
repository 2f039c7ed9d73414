//! Supervision losses with analytic gradients w.r.t. the prediction.
//!
//! Every loss reduces by the mean over its supervised pixel set and sums in
//! ascending row-major order, so results are bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BinaryMap, Raster};

/// Clamp margin for BCE and the floor used by dice and ratio losses.
pub const EPS: f64 = 1e-6;

/// Negatives kept per positive by hard negative mining.
pub const OHEM_NEG_RATIO: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub gradient: Raster<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossWeights {
    pub kernel: f64,
    pub text: f64,
    pub surrounding: f64,
    pub scale: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            kernel: 6.0,
            text: 3.0,
            surrounding: 1.0,
            scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TotalLoss {
    pub value: f64,
    /// Weighted terms in the order kernel, text, surrounding, scale.
    pub breakdown: [f64; 4],
}

fn check_shapes(pred: &Raster<f64>, gt: &Raster<f64>, mask: Option<&BinaryMap>) -> Result<()> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            expected: pred.shape(),
            actual: gt.shape(),
        });
    }
    if let Some(m) = mask {
        if (m.height(), m.width()) != (pred.height(), pred.width()) {
            return Err(Error::ShapeMismatch {
                expected: (pred.height(), pred.width(), 1),
                actual: (m.height(), m.width(), 1),
            });
        }
    }
    if let Some(v) = pred.as_slice().iter().chain(gt.as_slice()).find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite value {v}")));
    }
    Ok(())
}

/// Per-element validity, broadcasting an `H x W` mask over channels.
fn valid_at(mask: Option<&BinaryMap>, channels: usize) -> impl Fn(usize) -> bool + '_ {
    move |i| mask.is_none_or(|m| m.as_slice()[i / channels] != 0)
}

/// Supervised set chosen by hard negative mining, ascending indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OhemSelection {
    pub positives: usize,
    pub negatives: usize,
    pub indices: Vec<usize>,
}

/// Binary cross-entropy with hard negative mining at `1 : neg_ratio`.
///
/// All valid positives are kept, plus the `min(neg_ratio * #pos, #neg)`
/// valid negatives with the highest loss (ties by row-major index). With no
/// valid positive, every valid pixel is supervised.
pub fn bce_ohem(
    pred: &Raster<f64>,
    gt: &Raster<f64>,
    valid: Option<&BinaryMap>,
    neg_ratio: usize,
) -> Result<LossOutput> {
    bce_ohem_with_selection(pred, gt, valid, neg_ratio).map(|(out, _)| out)
}

pub fn bce_ohem_with_selection(
    pred: &Raster<f64>,
    gt: &Raster<f64>,
    valid: Option<&BinaryMap>,
    neg_ratio: usize,
) -> Result<(LossOutput, OhemSelection)> {
    check_shapes(pred, gt, valid)?;
    if let Some(y) = gt.as_slice().iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Domain(format!("kernel ground truth must be 0 or 1, got {y}")));
    }
    let is_valid = valid_at(valid, pred.channels());
    let x = pred.as_slice();
    let y = gt.as_slice();
    let pixel_loss = |i: usize| {
        let xi = x[i].clamp(EPS, 1.0 - EPS);
        -(y[i] * xi.ln() + (1.0 - y[i]) * (1.0 - xi).ln())
    };

    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in (0..x.len()).filter(|&i| is_valid(i)) {
        if y[i] == 1.0 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    let (n_pos, n_neg) = (pos.len(), neg.len());
    let mut selected = if pos.is_empty() {
        let mut all = neg;
        all.extend(pos);
        all
    } else {
        let k = (neg_ratio * n_pos).min(n_neg);
        let mut ranked: Vec<(f64, usize)> = neg.into_iter().map(|i| (pixel_loss(i), i)).collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        pos.extend(ranked.into_iter().take(k).map(|(_, i)| i));
        pos
    };
    selected.sort_unstable();
    let n_neg_selected = selected.iter().filter(|&&i| y[i] == 0.0).count();

    let mut grad = Raster::with_channels(pred.height(), pred.width(), pred.channels());
    let mut value = 0.0;
    if !selected.is_empty() {
        let scale = 1.0 / selected.len() as f64;
        let g = grad.as_mut_slice();
        for &i in &selected {
            value += pixel_loss(i);
            if x[i] > EPS && x[i] < 1.0 - EPS {
                g[i] = (-(y[i] / x[i]) + (1.0 - y[i]) / (1.0 - x[i])) * scale;
            }
        }
        value *= scale;
    }
    let selection = OhemSelection {
        positives: n_pos,
        negatives: n_neg_selected,
        indices: selected,
    };
    Ok((LossOutput { value, gradient: grad }, selection))
}

/// `1 - 2 Σ(y·x) / (Σy + Σx + eps)` over valid pixels.
pub fn dice_loss(pred: &Raster<f64>, gt: &Raster<f64>, valid: Option<&BinaryMap>, eps: f64) -> Result<LossOutput> {
    check_shapes(pred, gt, valid)?;
    if let Some(v) = pred.as_slice().iter().chain(gt.as_slice()).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("dice inputs must lie in [0, 1], got {v}")));
    }
    let is_valid = valid_at(valid, pred.channels());
    let x = pred.as_slice();
    let y = gt.as_slice();
    let (mut inter, mut sum_y, mut sum_x) = (0.0, 0.0, 0.0);
    for i in (0..x.len()).filter(|&i| is_valid(i)) {
        inter += x[i] * y[i];
        sum_y += y[i];
        sum_x += x[i];
    }
    let denom = sum_y + sum_x + eps;
    let value = 1.0 - 2.0 * inter / denom;
    let mut grad = Raster::with_channels(pred.height(), pred.width(), pred.channels());
    let g = grad.as_mut_slice();
    for i in (0..x.len()).filter(|&i| is_valid(i)) {
        g[i] = -(2.0 * y[i] * denom - 2.0 * inter) / (denom * denom);
    }
    Ok(LossOutput { value, gradient: grad })
}

/// Mean of `|ln(x + eps) - ln(y + eps)|` over valid elements with `y > 0`.
/// A `H x W` mask applies to every channel.
pub fn ratio_loss(pred: &Raster<f64>, gt: &Raster<f64>, valid: Option<&BinaryMap>, eps: f64) -> Result<LossOutput> {
    check_shapes(pred, gt, valid)?;
    if let Some(v) = pred.as_slice().iter().chain(gt.as_slice()).find(|&&v| v < 0.0) {
        return Err(Error::Domain(format!("ratio loss needs non-negative inputs, got {v}")));
    }
    let is_valid = valid_at(valid, pred.channels());
    let x = pred.as_slice();
    let y = gt.as_slice();
    let supervised: Vec<usize> = (0..x.len()).filter(|&i| y[i] > 0.0 && is_valid(i)).collect();
    let mut grad = Raster::with_channels(pred.height(), pred.width(), pred.channels());
    if supervised.is_empty() {
        return Ok(LossOutput { value: 0.0, gradient: grad });
    }
    let scale = 1.0 / supervised.len() as f64;
    let g = grad.as_mut_slice();
    let mut value = 0.0;
    for &i in &supervised {
        let diff = (x[i] + eps).ln() - (y[i] + eps).ln();
        value += diff.abs();
        if diff != 0.0 {
            g[i] = diff.signum() / (x[i] + eps) * scale;
        }
    }
    Ok(LossOutput {
        value: value * scale,
        gradient: grad,
    })
}

/// `λ1·L_k + λ2·L_t + λ3·L_su + λ4·L_sc`.
pub fn total_loss(kernel: f64, text: f64, surrounding: f64, scale: f64, w: &LossWeights) -> Result<TotalLoss> {
    let parts = [kernel, text, surrounding, scale];
    if let Some(v) = parts.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("loss component {v} is not finite")));
    }
    let weights = [w.kernel, w.text, w.surrounding, w.scale];
    if let Some(v) = weights.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!("loss weight {v} must be finite and >= 0")));
    }
    let breakdown = [
        weights[0] * parts[0],
        weights[1] * parts[1],
        weights[2] * parts[2],
        weights[3] * parts[3],
    ];
    Ok(TotalLoss {
        value: breakdown.iter().sum(),
        breakdown,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// BCE with hard negative mining on the kernel map.
    Kernel,
    /// Dice on the text map.
    Text,
    /// Ratio loss on the 4-channel surrounding map.
    Surrounding,
    /// Ratio loss on the scale map.
    Scale,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Kernel, LossKind::Text, LossKind::Surrounding, LossKind::Scale];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Kernel => "kernel_bce_ohem",
            LossKind::Text => "text_dice",
            LossKind::Surrounding => "surrounding_ratio",
            LossKind::Scale => "scale_ratio",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckRow {
    pub loss: LossKind,
    pub name: &'static str,
    pub trials: usize,
    pub max_rel_err: f64,
    /// Draws rejected because the finite-difference stencil crossed a
    /// non-differentiable point (OHEM re-selection or the ratio kink).
    pub resampled: usize,
}

/// Finite-difference step.
pub const GRADCHECK_STEP: f64 = 1e-4;

/// Compares the analytic gradient with central differences at `trials`
/// random supervised elements of random small rasters.
pub fn gradcheck(kind: LossKind, trials: usize, seed: u64) -> Result<GradCheckRow> {
    if trials == 0 {
        return Err(Error::Config("trials must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let h = GRADCHECK_STEP;
    let mut max_rel = 0.0f64;
    let mut done = 0;
    let mut resampled = 0;
    while done < trials {
        let rows = rng.gen_range(3..=8);
        let cols = rng.gen_range(3..=8);
        let channels = if kind == LossKind::Surrounding { 4 } else { 1 };
        let n = rows * cols * channels;
        let mask = BinaryMap::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_bool(0.9) as u8).collect())?;
        let (pred, gt): (Vec<f64>, Vec<f64>) = match kind {
            LossKind::Kernel | LossKind::Text => (0..n)
                .map(|_| (rng.gen_range(0.05..0.95), rng.gen_bool(0.3) as u8 as f64))
                .unzip(),
            LossKind::Surrounding => (0..n)
                .map(|_| {
                    let y = if rng.gen_bool(0.7) { rng.gen_range(1..=25) as f64 } else { 0.0 };
                    (rng.gen_range(0.1..30.0), y)
                })
                .unzip(),
            LossKind::Scale => (0..n)
                .map(|_| {
                    let y = if rng.gen_bool(0.7) { rng.gen_range(17..=2000) as f64 } else { 0.0 };
                    (rng.gen_range(1.0..2500.0), y)
                })
                .unzip(),
        };
        let pred = Raster::from_vec(rows, cols, channels, pred)?;
        let gt = Raster::from_vec(rows, cols, channels, gt)?;

        let eval = |p: &Raster<f64>| -> Result<(LossOutput, Option<Vec<usize>>)> {
            Ok(match kind {
                LossKind::Kernel => {
                    let (out, sel) = bce_ohem_with_selection(p, &gt, Some(&mask), OHEM_NEG_RATIO)?;
                    (out, Some(sel.indices))
                }
                LossKind::Text => (dice_loss(p, &gt, Some(&mask), EPS)?, None),
                LossKind::Surrounding | LossKind::Scale => (ratio_loss(p, &gt, Some(&mask), EPS)?, None),
            })
        };
        let (base, base_sel) = eval(&pred)?;
        let candidates: Vec<usize> = (0..n).filter(|&i| base.gradient.as_slice()[i] != 0.0).collect();
        if candidates.is_empty() {
            resampled += 1;
            continue;
        }
        let i = candidates[rng.gen_range(0..candidates.len())];
        let xi = pred.as_slice()[i];
        if matches!(kind, LossKind::Surrounding | LossKind::Scale) {
            let gap = ((xi + EPS).ln() - (gt.as_slice()[i] + EPS).ln()).abs();
            if gap < 10.0 * h / (xi + EPS) {
                resampled += 1;
                continue;
            }
        }
        let mut plus = pred.clone();
        plus.as_mut_slice()[i] = xi + h;
        let mut minus = pred.clone();
        minus.as_mut_slice()[i] = xi - h;
        let (up, up_sel) = eval(&plus)?;
        let (down, down_sel) = eval(&minus)?;
        if up_sel != base_sel || down_sel != base_sel {
            resampled += 1;
            continue;
        }
        let numeric = (up.value - down.value) / (2.0 * h);
        let analytic = base.gradient.as_slice()[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
        max_rel = max_rel.max(rel);
        done += 1;
    }
    Ok(GradCheckRow {
        loss: kind,
        name: kind.name(),
        trials,
        max_rel_err: max_rel,
        resampled,
    })
}
