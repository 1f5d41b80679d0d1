//! Detection evaluation: IoU, greedy matching, per-class AP, mAP and the
//! class-agnostic tracking AP.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundingBox, FrameRecord, SwimmerClass};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Intersection over union of two boxes; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.x_max().min(b.x_max()) - a.x_min().max(b.x_min());
    let ih = a.y_max().min(b.y_max()) - a.y_min().max(b.y_min());
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// One box reported by an external detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame_id: String,
    pub swimmer_class: SwimmerClass,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

impl DetectionRecord {
    pub fn new(frame_id: &str, swimmer_class: SwimmerClass, confidence: f64, bbox: BoundingBox) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::arg("confidence", format!("{confidence} outside [0, 1]")));
        }
        Ok(Self {
            frame_id: frame_id.to_string(),
            swimmer_class,
            confidence,
            bbox,
        })
    }
}

/// Parses a detections file: one tab-separated record per line,
/// `frame_id class confidence x_min y_min x_max y_max`.
///
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            location: format!("line {}", lineno + 1),
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 tab-separated fields, got {}", fields.len())));
        }
        let class: SwimmerClass = fields[1].parse().map_err(|e: Error| err(e.to_string()))?;
        let mut nums = [0.0f64; 5];
        for (slot, text) in nums.iter_mut().zip(&fields[2..]) {
            *slot = text
                .trim()
                .parse()
                .map_err(|e| err(format!("bad number `{text}`: {e}")))?;
        }
        let bbox = BoundingBox::new(nums[1], nums[2], nums[3], nums[4]).map_err(|e| err(e.to_string()))?;
        out.push(DetectionRecord::new(fields[0], class, nums[0], bbox).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn format_detections(dets: &[DetectionRecord]) -> String {
    let mut out = String::new();
    for d in dets {
        let b = &d.bbox;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.frame_id,
            d.swimmer_class,
            d.confidence,
            b.x_min(),
            b.y_min(),
            b.x_max(),
            b.y_max()
        );
    }
    out
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}:{location}", path.display()),
            message,
        },
        other => other,
    })
}

/// How the precision envelope is integrated over recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Area under the full envelope.
    #[default]
    AllPoint,
    /// Mean of the envelope sampled at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            interpolation: Interpolation::AllPoint,
        }
    }
}

impl EvalOptions {
    pub fn with_threshold(iou_threshold: f64) -> Self {
        Self {
            iou_threshold,
            ..Self::default()
        }
    }
}

/// Average precision from detection outcomes ranked by descending confidence.
///
/// `None` when there is no ground truth to recall.
pub fn average_precision(ranked_hits: &[bool], n_groundtruth: usize, interpolation: Interpolation) -> Option<f64> {
    if n_groundtruth == 0 {
        return None;
    }
    let mut recall = Vec::with_capacity(ranked_hits.len());
    let mut precision = Vec::with_capacity(ranked_hits.len());
    let mut tp = 0usize;
    for (i, &hit) in ranked_hits.iter().enumerate() {
        tp += usize::from(hit);
        recall.push(tp as f64 / n_groundtruth as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    let ap = match interpolation {
        Interpolation::AllPoint => {
            let mut mrec = Vec::with_capacity(recall.len() + 2);
            mrec.push(0.0);
            mrec.extend_from_slice(&recall);
            mrec.push(1.0);
            let mut mpre = Vec::with_capacity(precision.len() + 2);
            mpre.push(0.0);
            mpre.extend_from_slice(&precision);
            mpre.push(0.0);
            for i in (0..mpre.len() - 1).rev() {
                mpre[i] = mpre[i].max(mpre[i + 1]);
            }
            (1..mrec.len())
                .filter(|&i| mrec[i] != mrec[i - 1])
                .map(|i| (mrec[i] - mrec[i - 1]) * mpre[i])
                .sum()
        }
        Interpolation::ElevenPoint => {
            (0..=10)
                .map(|k| {
                    let t = k as f64 / 10.0;
                    recall
                        .iter()
                        .zip(&precision)
                        .filter(|(r, _)| **r >= t - 1e-12)
                        .map(|(_, p)| *p)
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
                / 11.0
        }
    };
    Some(ap.clamp(0.0, 1.0))
}

/// Matching counts and AP for one class (or for all classes pooled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    /// `None` for the class-agnostic pool.
    pub swimmer_class: Option<SwimmerClass>,
    /// `None` when the class has no ground truth.
    pub ap: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub groundtruth: usize,
    pub detections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub interpolation: Interpolation,
    pub per_class: Vec<ClassEval>,
    /// Mean AP over the classes that have ground truth; 0 when none do.
    pub map: f64,
    pub tracking: ClassEval,
}

impl EvalReport {
    pub fn class(&self, c: SwimmerClass) -> &ClassEval {
        &self.per_class[c.index()]
    }

    pub fn tracking_ap(&self) -> f64 {
        self.tracking.ap.unwrap_or(0.0)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<12} {:>8} {:>6} {:>6} {:>6} {:>6}\n",
            "class", "AP", "GT", "TP", "FP", "FN"
        );
        let fmt_ap = |ap: Option<f64>| ap.map_or("-".to_string(), |v| format!("{v:.4}"));
        for c in self.per_class.iter().chain(std::iter::once(&self.tracking)) {
            let name = c.swimmer_class.map_or("tracking", SwimmerClass::name);
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>6} {:>6} {:>6} {:>6}",
                name,
                fmt_ap(c.ap),
                c.groundtruth,
                c.tp,
                c.fp,
                c.fn_
            );
        }
        let _ = writeln!(out, "mAP@{}: {:.4}", self.iou_threshold, self.map);
        out
    }
}

struct Candidate<'a> {
    frame: usize,
    frame_id: &'a str,
    order: usize,
    confidence: f64,
    bbox: BoundingBox,
}

fn match_pool(
    groundtruth: &HashMap<usize, Vec<BoundingBox>>,
    mut candidates: Vec<Candidate<'_>>,
    options: &EvalOptions,
    swimmer_class: Option<SwimmerClass>,
) -> ClassEval {
    candidates.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.frame_id.cmp(b.frame_id))
            .then(a.order.cmp(&b.order))
    });
    let mut matched: HashMap<usize, Vec<bool>> = groundtruth.iter().map(|(&k, v)| (k, vec![false; v.len()])).collect();
    let mut hits = Vec::with_capacity(candidates.len());
    for c in &candidates {
        let mut best: Option<(usize, f64)> = None;
        if let (Some(boxes), Some(used)) = (groundtruth.get(&c.frame), matched.get(&c.frame)) {
            for (j, g) in boxes.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let o = iou(&c.bbox, g);
                if o >= options.iou_threshold && best.is_none_or(|(_, b)| o > b) {
                    best = Some((j, o));
                }
            }
        }
        match best {
            Some((j, _)) => {
                matched.get_mut(&c.frame).unwrap()[j] = true;
                hits.push(true);
            }
            None => hits.push(false),
        }
    }
    let n_gt: usize = groundtruth.values().map(Vec::len).sum();
    let tp = hits.iter().filter(|&&h| h).count();
    ClassEval {
        swimmer_class,
        ap: average_precision(&hits, n_gt, options.interpolation),
        tp,
        fp: hits.len() - tp,
        fn_: n_gt - tp,
        groundtruth: n_gt,
        detections: hits.len(),
    }
}

/// Scores `detections` against the annotations of `groundtruth`.
///
/// Per class, detections are taken by descending confidence (ties by frame
/// id, then input order); each claims the unmatched same-class box in its
/// frame with the highest IoU at or above the threshold, or counts as a
/// false positive. The tracking pool repeats the procedure with every class
/// merged into one.
pub fn evaluate(
    groundtruth: &[FrameRecord],
    detections: &[DetectionRecord],
    options: &EvalOptions,
) -> Result<EvalReport> {
    if !(options.iou_threshold > 0.0 && options.iou_threshold < 1.0) {
        return Err(Error::arg(
            "iou_threshold",
            format!("{} outside (0, 1)", options.iou_threshold),
        ));
    }
    let frame_pos: HashMap<&str, usize> = groundtruth
        .iter()
        .enumerate()
        .map(|(i, f)| (f.frame_id.as_str(), i))
        .collect();
    let mut resolved = Vec::with_capacity(detections.len());
    for d in detections {
        let pos = *frame_pos
            .get(d.frame_id.as_str())
            .ok_or_else(|| Error::UnknownFrame(d.frame_id.clone()))?;
        resolved.push(pos);
    }

    let mut gt_by_class: Vec<HashMap<usize, Vec<BoundingBox>>> = vec![HashMap::new(); SwimmerClass::COUNT];
    let mut gt_all: HashMap<usize, Vec<BoundingBox>> = HashMap::new();
    for (i, f) in groundtruth.iter().enumerate() {
        for a in &f.annotations {
            gt_by_class[a.swimmer_class.index()].entry(i).or_default().push(a.bbox);
            gt_all.entry(i).or_default().push(a.bbox);
        }
    }

    let candidates = |filter: Option<SwimmerClass>| -> Vec<Candidate<'_>> {
        detections
            .iter()
            .zip(&resolved)
            .enumerate()
            .filter(|(_, (d, _))| filter.is_none_or(|c| d.swimmer_class == c))
            .map(|(order, (d, &frame))| Candidate {
                frame,
                frame_id: d.frame_id.as_str(),
                order,
                confidence: d.confidence,
                bbox: d.bbox,
            })
            .collect()
    };

    let per_class: Vec<ClassEval> = SwimmerClass::ALL
        .iter()
        .map(|&c| match_pool(&gt_by_class[c.index()], candidates(Some(c)), options, Some(c)))
        .collect();
    let aps: Vec<f64> = per_class.iter().filter_map(|c| c.ap).collect();
    let map = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };
    let tracking = match_pool(&gt_all, candidates(None), options, None);
    Ok(EvalReport {
        iou_threshold: options.iou_threshold,
        interpolation: options.interpolation,
        per_class,
        map,
        tracking,
    })
}
