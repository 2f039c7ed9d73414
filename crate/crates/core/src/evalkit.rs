//! IoU-based detection evaluation: one-to-one matching, ignore handling,
//! dataset-level precision / recall / F-measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersection_area, polygon_iou, Polygon};
use crate::labelgen::TextInstance;
use crate::postproc::DetectionSet;

/// How a detection's overlap with an ignore region is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IgnoreOverlap {
    #[default]
    Iou,
    /// Intersection area divided by the detection's area.
    DetectionArea,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_thresh: f64,
    pub ignore_overlap: IgnoreOverlap,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresh: 0.5,
            ignore_overlap: IgnoreOverlap::Iou,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_thresh > 0.0 && self.iou_thresh <= 1.0) {
            return Err(Error::Config(format!("iou_thresh must be in (0, 1], got {}", self.iou_thresh)));
        }
        Ok(())
    }
}

/// Ground truth for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub instances: Vec<TextInstance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub det: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub matches: Vec<Match>,
    /// Detections removed because they cover an ignore region.
    pub ignored_dets: Vec<usize>,
    pub num_dets: usize,
    pub num_gts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub fmeasure: f64,
    pub tp: usize,
    pub num_dets: usize,
    pub num_gts: usize,
    pub per_image: Vec<ImageRecord>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn ignore_overlap(det: &Polygon, ign: &Polygon, rule: IgnoreOverlap) -> Result<f64> {
    match rule {
        IgnoreOverlap::Iou => polygon_iou(det, ign),
        IgnoreOverlap::DetectionArea => Ok(intersection_area(det, ign) / det.area()),
    }
}

/// Matches one image's detections against its ground truth.
pub fn evaluate_image(dets: &[Polygon], gts: &[TextInstance], cfg: &EvalConfig) -> Result<ImageRecord> {
    let care: Vec<usize> = (0..gts.len()).filter(|&g| !gts[g].ignore).collect();
    let ignores: Vec<&Polygon> = gts.iter().filter(|g| g.ignore).map(|g| &g.polygon).collect();

    let mut kept = Vec::new();
    let mut ignored_dets = Vec::new();
    for (d, det) in dets.iter().enumerate() {
        let mut drop = false;
        for ign in &ignores {
            if ignore_overlap(det, ign, cfg.ignore_overlap)? > cfg.iou_thresh {
                drop = true;
                break;
            }
        }
        if drop {
            ignored_dets.push(d);
        } else {
            kept.push(d);
        }
    }

    let mut pairs = Vec::new();
    for &d in &kept {
        for &g in &care {
            let iou = polygon_iou(&dets[d], &gts[g].polygon)?;
            if iou >= cfg.iou_thresh {
                pairs.push(Match { det: d, gt: g, iou });
            }
        }
    }
    // Descending IoU; ties by gt then det index.
    pairs.sort_by(|a, b| b.iou.total_cmp(&a.iou).then(a.gt.cmp(&b.gt)).then(a.det.cmp(&b.det)));
    let mut det_used = vec![false; dets.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut matches = Vec::new();
    for m in pairs {
        if !det_used[m.det] && !gt_used[m.gt] {
            det_used[m.det] = true;
            gt_used[m.gt] = true;
            matches.push(m);
        }
    }
    Ok(ImageRecord {
        image_id: String::new(),
        matches,
        ignored_dets,
        num_dets: kept.len(),
        num_gts: care.len(),
    })
}

/// Evaluates a dataset. Image ids of `dets` and `gts` must be the same set;
/// counts are aggregated globally before computing P, R and F.
pub fn evaluate(dets: &[DetectionSet], gts: &[GroundTruth], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let mut det_ids: Vec<&str> = dets.iter().map(|d| d.image_id.as_str()).collect();
    let mut gt_ids: Vec<&str> = gts.iter().map(|g| g.image_id.as_str()).collect();
    det_ids.sort_unstable();
    gt_ids.sort_unstable();
    if let Some(w) = det_ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Input(format!("duplicate detection image id {:?}", w[0])));
    }
    if det_ids != gt_ids {
        let missing: Vec<&&str> = gt_ids.iter().filter(|id| det_ids.binary_search(id).is_err()).collect();
        let extra: Vec<&&str> = det_ids.iter().filter(|id| gt_ids.binary_search(id).is_err()).collect();
        return Err(Error::Input(format!(
            "image ids differ: no detections for {missing:?}, no ground truth for {extra:?}"
        )));
    }

    let mut per_image = Vec::with_capacity(gts.len());
    let (mut tp, mut n_det, mut n_gt) = (0, 0, 0);
    for gt in gts {
        let set = dets.iter().find(|d| d.image_id == gt.image_id).expect("ids checked above");
        let polys: Vec<Polygon> = set.detections.iter().map(|d| d.polygon.clone()).collect();
        let mut rec = evaluate_image(&polys, &gt.instances, cfg)?;
        rec.image_id = gt.image_id.clone();
        tp += rec.matches.len();
        n_det += rec.num_dets;
        n_gt += rec.num_gts;
        per_image.push(rec);
    }
    let precision = ratio(tp, n_det);
    let recall = ratio(tp, n_gt);
    let fmeasure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport {
        precision,
        recall,
        fmeasure,
        tp,
        num_dets: n_det,
        num_gts: n_gt,
        per_image,
    })
}
