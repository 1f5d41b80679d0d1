//! Annotation workload projection and per-class dataset statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrameRecord, SwimmerClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadEstimate {
    pub boxes: u64,
    pub total_seconds: f64,
}

impl WorkloadEstimate {
    pub fn total_days(&self) -> f64 {
        self.total_seconds / 86_400.0
    }
}

/// Boxes needed to annotate every frame of a video, and the time that takes.
pub fn estimate_workload(duration_s: f64, fps: f64, swimmers: u32, seconds_per_box: f64) -> Result<WorkloadEstimate> {
    for (name, v) in [
        ("duration_s", duration_s),
        ("fps", fps),
        ("seconds_per_box", seconds_per_box),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::arg(name, format!("must be positive, got {v}")));
        }
    }
    if swimmers == 0 {
        return Err(Error::arg("swimmers", "must be positive"));
    }
    let frames = (duration_s * fps).round() as u64;
    let boxes = frames * swimmers as u64;
    Ok(WorkloadEstimate {
        boxes,
        total_seconds: boxes as f64 * seconds_per_box,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub swimmer_class: SwimmerClass,
    pub count: u64,
    pub exact_fraction: f64,
    pub rounded_percent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub classes: Vec<ClassShare>,
    pub total: u64,
}

impl DatasetStats {
    pub fn from_counts(counts: [u64; SwimmerClass::COUNT]) -> Self {
        let total: u64 = counts.iter().sum();
        let classes = SwimmerClass::ALL
            .iter()
            .map(|&c| {
                let count = counts[c.index()];
                let (exact_fraction, rounded_percent) = if total == 0 {
                    (0.0, 0)
                } else {
                    // half-up rounding in integers: floor((200 c + t) / 2t)
                    (count as f64 / total as f64, (200 * count + total) / (2 * total))
                };
                ClassShare {
                    swimmer_class: c,
                    count,
                    exact_fraction,
                    rounded_percent,
                }
            })
            .collect();
        Self { classes, total }
    }

    pub fn get(&self, class: SwimmerClass) -> &ClassShare {
        &self.classes[class.index()]
    }

    pub fn counts(&self) -> [u64; SwimmerClass::COUNT] {
        let mut out = [0; SwimmerClass::COUNT];
        for share in &self.classes {
            out[share.swimmer_class.index()] = share.count;
        }
        out
    }

    /// Plain-text table in the layout of a class count summary.
    pub fn render(&self) -> String {
        let mut out = format!("{:<12} {:>12} {:>8}\n", "class", "annotations", "percent");
        for s in &self.classes {
            out.push_str(&format!(
                "{:<12} {:>12} {:>7}%\n",
                s.swimmer_class.name(),
                s.count,
                s.rounded_percent
            ));
        }
        let pct = if self.total == 0 { 0 } else { 100 };
        out.push_str(&format!("{:<12} {:>12} {:>7}%\n", "total", self.total, pct));
        out
    }
}

pub fn dataset_stats(frames: &[FrameRecord]) -> DatasetStats {
    let mut counts = [0u64; SwimmerClass::COUNT];
    for a in frames.iter().flat_map(|f| &f.annotations) {
        counts[a.swimmer_class.index()] += 1;
    }
    DatasetStats::from_counts(counts)
}
