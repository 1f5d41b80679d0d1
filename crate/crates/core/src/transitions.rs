//! The race state machine over [`SwimmerClass`] and per-swimmer track checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrameRecord, SwimmerClass, TrackId};
use crate::validation::{TransitionRule, Violation};

use SwimmerClass::*;

/// Cross-class edges of the race graph. Every class may also persist into itself.
pub const CROSS_EDGES: [(SwimmerClass, SwimmerClass); 8] = [
    (OnBlocks, Diving),
    (Diving, Underwater),
    // failed submersion after the dive
    (Diving, Swimming),
    (Underwater, Swimming),
    (Swimming, Turning),
    (Swimming, Finishing),
    (Turning, Underwater),
    // failed submersion after the touch
    (Turning, Swimming),
];

pub fn is_legal_transition(from: SwimmerClass, to: SwimmerClass) -> bool {
    from == to || CROSS_EDGES.contains(&(from, to))
}

/// Classes reachable in one step from `from`, in listing order.
pub fn successors(from: SwimmerClass) -> Vec<SwimmerClass> {
    SwimmerClass::ALL
        .into_iter()
        .filter(|&to| is_legal_transition(from, to))
        .collect()
}

/// Observation history of one swimmer within one race.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track_id: TrackId,
    pub lane: u32,
    pub observations: Vec<(u64, SwimmerClass)>,
}

impl Track {
    pub fn new(track_id: &str, lane: u32, observations: Vec<(u64, SwimmerClass)>) -> Self {
        Self {
            track_id: TrackId(track_id.to_string()),
            lane,
            observations,
        }
    }

    /// Builds a track from a bare class sequence, numbering frames 0, 1, 2, ...
    pub fn from_classes(track_id: &str, classes: &[SwimmerClass]) -> Self {
        let observations = classes.iter().enumerate().map(|(i, &c)| (i as u64, c)).collect();
        Self::new(track_id, 0, observations)
    }

    pub fn last_class_before(&self, frame_index: u64) -> Option<SwimmerClass> {
        self.observations
            .iter()
            .take_while(|(idx, _)| *idx < frame_index)
            .last()
            .map(|&(_, c)| c)
    }
}

/// Checks ordering and every consecutive class pair of `track`.
///
/// One violation is reported per offending pair. Because `OnBlocks` has no
/// incoming cross edge and `Finishing` no outgoing one, the prefix and
/// suffix rules surface as transition violations tagged with the rule broken.
pub fn validate_track(track: &Track) -> Result<Vec<Violation>> {
    if track.observations.is_empty() {
        return Err(Error::EmptyTrack);
    }
    let mut violations = Vec::new();
    for pair in track.observations.windows(2) {
        let (from_frame, from) = pair[0];
        let (to_frame, to) = pair[1];
        if to_frame <= from_frame {
            violations.push(Violation::FrameOrder {
                track_id: track.track_id.clone(),
                from_frame,
                to_frame,
            });
        }
        if !is_legal_transition(from, to) {
            let rule = if to == OnBlocks {
                TransitionRule::OnBlocksFirst
            } else if from == Finishing {
                TransitionRule::FinishingLast
            } else {
                TransitionRule::Relation
            };
            violations.push(Violation::IllegalTransition {
                track_id: track.track_id.clone(),
                from_frame,
                to_frame,
                from,
                to,
                rule,
            });
        }
    }
    Ok(violations)
}

/// Groups the annotations of `frames` into tracks keyed by `(video_id, track_id)`.
///
/// Observations are ordered by frame index; the lane is taken from the first
/// observation.
pub fn collect_tracks<'a>(frames: impl IntoIterator<Item = &'a FrameRecord>) -> BTreeMap<(String, TrackId), Track> {
    let mut tracks: BTreeMap<(String, TrackId), Track> = BTreeMap::new();
    let mut sorted: Vec<&FrameRecord> = frames.into_iter().collect();
    sorted.sort_by_key(|f| f.frame_index);
    for frame in sorted {
        for ann in &frame.annotations {
            tracks
                .entry((frame.video_id.clone(), ann.track_id.clone()))
                .or_insert_with(|| Track {
                    track_id: ann.track_id.clone(),
                    lane: ann.lane,
                    observations: Vec::new(),
                })
                .observations
                .push((frame.frame_index, ann.swimmer_class));
        }
    }
    tracks
}

/// Classes an annotator may assign to a track at `frame_index`.
///
/// With a prior observation the answer follows the transition relation. A new
/// track at or before the race start frame must be on the blocks; any other
/// new track entered mid-race and may take any class.
pub fn legal_next_classes(track: Option<&Track>, frame_index: u64, race_start_frame: Option<u64>) -> Vec<SwimmerClass> {
    match track.and_then(|t| t.last_class_before(frame_index)) {
        Some(prior) => successors(prior),
        None => match race_start_frame {
            Some(start) if frame_index <= start => vec![OnBlocks],
            _ => SwimmerClass::ALL.to_vec(),
        },
    }
}
