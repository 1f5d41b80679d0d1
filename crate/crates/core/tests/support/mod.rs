//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swimset_core::model::*;
use swimset_core::transitions::successors;
use swimset_core::DatasetManifest;

pub fn race(video_id: &str, venue: &str) -> RaceMetadata {
    RaceMetadata {
        video_id: video_id.into(),
        venue_name: venue.into(),
        course: Course::Lcm,
        lane_count: 8,
        lighting: Lighting::Indoor,
        bulkhead_present: false,
        block_style: "track-start".into(),
        pool_depth: None,
        camera_height: CameraHeight::PoolLevel,
        camera_position: CameraPosition::DiveView,
        stroke: Stroke::Freestyle,
        race_distance_m: 100,
        nominal_duration_s: None,
        gender: Gender::Female,
        age_group: "open".into(),
        flags_present: true,
        fps: 30.0,
        race_start_frame: Some(0),
        dive_ranges: vec![FrameRange::new(0, 90)],
    }
}

/// `n_frames` valid frames spread over three videos, eight lanes each.
///
/// Every lane follows a random legal class walk from the blocks, so the result
/// passes both annotation and track validation.
pub fn synthetic_manifest(n_frames: usize, seed: u64) -> DatasetManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DatasetManifest::new(&format!("synthetic-{seed}"));
    let videos = 3;
    for v in 0..videos {
        m.videos
            .push(race(&format!("race-{v}"), ["Bloomington", "Indianapolis", "Austin"][v]));
    }
    let per_video = n_frames.div_ceil(videos);
    let (w, h) = (1920u32, 1080u32);
    for v in 0..videos {
        let mut state = [SwimmerClass::OnBlocks; 8];
        let count = per_video.min(n_frames - v * per_video);
        for i in 0..count {
            let frame_index = i as u64 * 3;
            let id = format!("race-{v}/frame-{frame_index:06}");
            let mut f = FrameRecord::new(&id, &format!("race-{v}"), frame_index, w, h);
            f.timestamp_s = frame_index as f64 / 30.0;
            for lane in 0..8u32 {
                if !rng.random_bool(0.8) {
                    continue;
                }
                let s = &mut state[lane as usize];
                if i > 0 && rng.random_bool(0.15) {
                    let next = successors(*s);
                    *s = next[rng.random_range(0..next.len())];
                }
                let bw = rng.random_range(8.0..160.0);
                let bh = rng.random_range(8.0..90.0);
                let x = rng.random_range(0.0..(w as f64 - bw));
                let y = rng.random_range(0.0..(h as f64 - bh));
                let mut a = Annotation::new(
                    BoundingBox::new(x, y, x + bw, y + bh).unwrap(),
                    *s,
                    lane,
                    &format!("lane-{lane}"),
                );
                a.visible_fraction = 0.1 + 0.9 * rng.random::<f64>();
                a.truncated_by_camera = rng.random_bool(0.05);
                f.annotations.push(a);
            }
            m.frames.push(f);
        }
    }
    m
}

/// IoU of integer boxes by counting covered unit cells.
pub fn raster_iou(a: [u32; 4], b: [u32; 4]) -> f64 {
    let covers = |r: [u32; 4], x: u32, y: u32| r[0] <= x && x < r[2] && r[1] <= y && y < r[3];
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..=a[3].max(b[3]) {
        for x in 0..=a[2].max(b[2]) {
            let (ia, ib) = (covers(a, x, y), covers(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Detection for the brute-force oracle: frame index, confidence, box.
pub type OracleDet = (usize, f64, BoundingBox);

fn overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.x_max().min(b.x_max()) - a.x_min().max(b.x_min())).max(0.0);
    let h = (a.y_max().min(b.y_max()) - a.y_min().max(b.y_min())).max(0.0);
    let i = w * h;
    let u = a.area() + b.area() - i;
    if u > 0.0 {
        i / u
    } else {
        0.0
    }
}

/// True positives when only detections with confidence >= `t` are kept.
fn true_positives_at(gt: &[Vec<BoundingBox>], dets: &[OracleDet], t: f64, thr: f64) -> (usize, usize) {
    let mut kept: Vec<&OracleDet> = dets.iter().filter(|d| d.1 >= t).collect();
    kept.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let mut used: Vec<Vec<bool>> = gt.iter().map(|g| vec![false; g.len()]).collect();
    let mut tp = 0;
    for (frame, _, b) in &kept {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt[*frame].iter().enumerate() {
            let o = overlap(b, g);
            if !used[*frame][j] && o >= thr && best.is_none_or(|(_, bo)| o > bo) {
                best = Some((j, o));
            }
        }
        if let Some((j, _)) = best {
            used[*frame][j] = true;
            tp += 1;
        }
    }
    (tp, kept.len())
}

/// AP as the area under the precision envelope, sweeping every distinct
/// confidence as an operating threshold and re-running the matching at each.
pub fn brute_force_ap(gt: &[Vec<BoundingBox>], dets: &[OracleDet], thr: f64) -> Option<f64> {
    let n_gt: usize = gt.iter().map(Vec::len).sum();
    if n_gt == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = dets.iter().map(|d| d.1).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let (tp, kept) = true_positives_at(gt, dets, t, thr);
            (tp as f64 / n_gt as f64, tp as f64 / kept as f64)
        })
        .collect();
    let mut recalls: Vec<f64> = points.iter().map(|p| p.0).filter(|&r| r > 0.0).collect();
    recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    recalls.dedup();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for r in recalls {
        let envelope = points.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max);
        ap += (r - prev) * envelope;
        prev = r;
    }
    Some(ap)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// A small random scoring problem: up to five ground-truth boxes over two
/// frames and up to ten detections with distinct confidences.
pub struct ApInstance {
    pub frames: Vec<FrameRecord>,
    pub detections: Vec<swimset_core::metrics::DetectionRecord>,
}

pub const AP_CLASSES: [SwimmerClass; 2] = [SwimmerClass::Swimming, SwimmerClass::Turning];

pub fn random_ap_instance(rng: &mut impl Rng) -> ApInstance {
    fn random_box(rng: &mut impl Rng) -> BoundingBox {
        let x = rng.random_range(0..20) as f64;
        let y = rng.random_range(0..20) as f64;
        let w = rng.random_range(2..8) as f64;
        let h = rng.random_range(2..8) as f64;
        BoundingBox::new(x, y, x + w, y + h).unwrap()
    }
    let mut frames = vec![
        FrameRecord::new("a", "v", 0, 64, 64),
        FrameRecord::new("b", "v", 1, 64, 64),
    ];
    for i in 0..rng.random_range(0..=5) {
        let f = rng.random_range(0..2);
        let c = AP_CLASSES[rng.random_range(0..2)];
        let b = random_box(rng);
        frames[f].annotations.push(Annotation::new(b, c, i, &format!("t{i}")));
    }
    let n_det = rng.random_range(0..=10);
    let mut confidences: Vec<f64> = Vec::new();
    while confidences.len() < n_det {
        let c = rng.random_range(1..1000) as f64 / 1000.0;
        if !confidences.contains(&c) {
            confidences.push(c);
        }
    }
    let mut detections = Vec::new();
    for conf in confidences {
        let f = rng.random_range(0..2);
        let c = AP_CLASSES[rng.random_range(0..2)];
        // half the detections perturb a ground-truth box so matches are common
        let b = match frames[f].annotations.get(rng.random_range(0..6)) {
            Some(a) if rng.random_bool(0.5) => {
                let dx = rng.random_range(-1..=1) as f64;
                let x0 = (a.bbox.x_min() + dx).max(0.0);
                BoundingBox::new(x0, a.bbox.y_min(), x0 + a.bbox.width(), a.bbox.y_max()).unwrap()
            }
            _ => random_box(rng),
        };
        detections.push(swimset_core::metrics::DetectionRecord::new(&frames[f].frame_id, c, conf, b).unwrap());
    }
    ApInstance { frames, detections }
}

impl ApInstance {
    /// Oracle AP for one class, or for all classes pooled when `class` is `None`.
    pub fn oracle_ap(&self, class: Option<SwimmerClass>, thr: f64) -> Option<f64> {
        let keep = |c: SwimmerClass| class.is_none_or(|k| k == c);
        let gt: Vec<Vec<BoundingBox>> = self
            .frames
            .iter()
            .map(|f| {
                f.annotations
                    .iter()
                    .filter(|a| keep(a.swimmer_class))
                    .map(|a| a.bbox)
                    .collect()
            })
            .collect();
        let dets: Vec<OracleDet> = self
            .detections
            .iter()
            .filter(|d| keep(d.swimmer_class))
            .map(|d| {
                let f = self.frames.iter().position(|f| f.frame_id == d.frame_id).unwrap();
                (f, d.confidence, d.bbox)
            })
            .collect();
        brute_force_ap(&gt, &dets, thr)
    }
}
