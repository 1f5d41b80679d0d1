//! Annotation validity rules.
//!
//! Only machine-checkable rules live here: frame bounds, positive area, the
//! visibility cut-off and per-frame track uniqueness. The annotator guidance
//! that a box be the tightest one containing the swimmer (allowing roughly 5%
//! slack for stray pixels) cannot be checked without pixel masks and is left
//! to the annotator.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Annotation, BoundingBox, FrameRecord, SwimmerClass, TrackId};
use crate::transitions::{collect_tracks, validate_track};

/// Swimmers with less than this share visible are not boxed.
pub const DEFAULT_MIN_VISIBLE_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationRules {
    pub min_visible_fraction: f64,
}

impl Default for ValidationRules {
    fn default() -> Self {
        Self {
            min_visible_fraction: DEFAULT_MIN_VISIBLE_FRACTION,
        }
    }
}

/// Which part of the race graph a bad transition breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionRule {
    Relation,
    OnBlocksFirst,
    FinishingLast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutOfBounds {
        track_id: TrackId,
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        width_px: u32,
        height_px: u32,
    },
    NonPositiveArea {
        track_id: TrackId,
    },
    NonFiniteCoordinate {
        track_id: TrackId,
    },
    BelowVisibilityThreshold {
        track_id: TrackId,
        visible_fraction: f64,
        threshold: f64,
    },
    InvalidVisibleFraction {
        track_id: TrackId,
        visible_fraction: f64,
    },
    DuplicateTrack {
        track_id: TrackId,
    },
    IllegalTransition {
        track_id: TrackId,
        from_frame: u64,
        to_frame: u64,
        from: SwimmerClass,
        to: SwimmerClass,
        rule: TransitionRule,
    },
    FrameOrder {
        track_id: TrackId,
        from_frame: u64,
        to_frame: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfBounds {
                track_id,
                x_min,
                y_min,
                x_max,
                y_max,
                width_px,
                height_px,
            } => write!(
                f,
                "out of bounds: track {track_id} box ({x_min}, {y_min}, {x_max}, {y_max}) outside {width_px}x{height_px} frame"
            ),
            Violation::NonPositiveArea { track_id } => {
                write!(f, "non-positive area: track {track_id}")
            }
            Violation::NonFiniteCoordinate { track_id } => {
                write!(f, "non-finite coordinate: track {track_id}")
            }
            Violation::BelowVisibilityThreshold {
                track_id,
                visible_fraction,
                threshold,
            } => write!(
                f,
                "below visibility threshold: track {track_id} visible {visible_fraction} < {threshold}"
            ),
            Violation::InvalidVisibleFraction {
                track_id,
                visible_fraction,
            } => write!(
                f,
                "visible fraction {visible_fraction} outside (0, 1]: track {track_id}"
            ),
            Violation::DuplicateTrack { track_id } => {
                write!(f, "duplicate track {track_id} in frame")
            }
            Violation::IllegalTransition {
                track_id,
                from_frame,
                to_frame,
                from,
                to,
                rule,
            } => {
                let why = match rule {
                    TransitionRule::Relation => "illegal transition",
                    TransitionRule::OnBlocksFirst => "illegal transition (on_blocks must come first)",
                    TransitionRule::FinishingLast => "illegal transition (finishing must come last)",
                };
                write!(
                    f,
                    "{why}: track {track_id} {from} at frame {from_frame} -> {to} at frame {to_frame}"
                )
            }
            Violation::FrameOrder {
                track_id,
                from_frame,
                to_frame,
            } => write!(
                f,
                "frame indices not increasing: track {track_id} {from_frame} -> {to_frame}"
            ),
        }
    }
}

/// Unvalidated annotation as submitted by a client, with raw box corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDraft {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub swimmer_class: SwimmerClass,
    pub lane: u32,
    pub track_id: TrackId,
    pub visible_fraction: f64,
    #[serde(default)]
    pub truncated_by_camera: bool,
}

impl From<&Annotation> for AnnotationDraft {
    fn from(a: &Annotation) -> Self {
        Self {
            x_min: a.bbox.x_min(),
            y_min: a.bbox.y_min(),
            x_max: a.bbox.x_max(),
            y_max: a.bbox.y_max(),
            swimmer_class: a.swimmer_class,
            lane: a.lane,
            track_id: a.track_id.clone(),
            visible_fraction: a.visible_fraction,
            truncated_by_camera: a.truncated_by_camera,
        }
    }
}

impl AnnotationDraft {
    /// Converts to a typed annotation, reporting box problems as violations.
    pub fn check_box(&self, frame: &FrameRecord) -> Result<Annotation, Violation> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        let track_id = self.track_id.clone();
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Violation::NonFiniteCoordinate { track_id });
        }
        if self.x_min < 0.0
            || self.y_min < 0.0
            || self.x_max > frame.width_px as f64
            || self.y_max > frame.height_px as f64
        {
            return Err(Violation::OutOfBounds {
                track_id,
                x_min: self.x_min,
                y_min: self.y_min,
                x_max: self.x_max,
                y_max: self.y_max,
                width_px: frame.width_px,
                height_px: frame.height_px,
            });
        }
        match BoundingBox::new(self.x_min, self.y_min, self.x_max, self.y_max) {
            Ok(bbox) => Ok(Annotation {
                bbox,
                swimmer_class: self.swimmer_class,
                lane: self.lane,
                track_id,
                visible_fraction: self.visible_fraction,
                truncated_by_camera: self.truncated_by_camera,
            }),
            Err(_) => Err(Violation::NonPositiveArea { track_id }),
        }
    }
}

fn visibility_violation(track_id: &TrackId, visible_fraction: f64, rules: &ValidationRules) -> Option<Violation> {
    if !(visible_fraction > 0.0 && visible_fraction <= 1.0) {
        Some(Violation::InvalidVisibleFraction {
            track_id: track_id.clone(),
            visible_fraction,
        })
    } else if visible_fraction < rules.min_visible_fraction {
        Some(Violation::BelowVisibilityThreshold {
            track_id: track_id.clone(),
            visible_fraction,
            threshold: rules.min_visible_fraction,
        })
    } else {
        None
    }
}

/// Checks one annotation against its frame.
///
/// The duplicate-track check compares against the other annotations already
/// stored in `frame`; an annotation is not a duplicate of itself.
pub fn validate_annotation(a: &Annotation, frame: &FrameRecord, rules: &ValidationRules) -> Vec<Violation> {
    let mut out = Vec::new();
    let b = &a.bbox;
    if !b.within(frame.width_px as f64, frame.height_px as f64) {
        out.push(Violation::OutOfBounds {
            track_id: a.track_id.clone(),
            x_min: b.x_min(),
            y_min: b.y_min(),
            x_max: b.x_max(),
            y_max: b.y_max(),
            width_px: frame.width_px,
            height_px: frame.height_px,
        });
    }
    if b.area() <= 0.0 {
        out.push(Violation::NonPositiveArea {
            track_id: a.track_id.clone(),
        });
    }
    out.extend(visibility_violation(&a.track_id, a.visible_fraction, rules));
    let same_track = frame
        .annotations
        .iter()
        .filter(|other| other.track_id == a.track_id)
        .count();
    let stored = frame.annotations.iter().any(|other| std::ptr::eq(other, a));
    if same_track > usize::from(stored) {
        out.push(Violation::DuplicateTrack {
            track_id: a.track_id.clone(),
        });
    }
    out
}

/// All per-annotation checks for a frame, with each duplicate reported once.
pub fn validate_frame(frame: &FrameRecord, rules: &ValidationRules) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut reported = HashSet::new();
    for a in &frame.annotations {
        for v in validate_annotation(a, frame, rules) {
            if let Violation::DuplicateTrack { track_id } = &v {
                if !reported.insert(track_id.clone()) {
                    continue;
                }
            }
            out.push(v);
        }
    }
    out
}

/// Frame checks plus track checks across every video in `frames`.
pub fn validate_frames(frames: &[FrameRecord], rules: &ValidationRules) -> Vec<Violation> {
    let mut out: Vec<Violation> = frames.iter().flat_map(|f| validate_frame(f, rules)).collect();
    for track in collect_tracks(frames).values() {
        // tracks built from annotations are never empty
        out.extend(validate_track(track).unwrap_or_default());
    }
    out
}
