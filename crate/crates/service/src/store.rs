//! The annotation store: read queries over immutable snapshots, and the
//! single mutation (`put_annotations`) that validates before it persists.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use swimset_core::model::{FrameRecord, RaceMetadata, SwimmerClass, TrackId};
use swimset_core::sampler::check_ranges;
use swimset_core::stats::{dataset_stats, estimate_workload, DatasetStats};
use swimset_core::storage::save_manifest;
use swimset_core::transitions::{collect_tracks, legal_next_classes, validate_track};
use swimset_core::validation::{validate_frame, AnnotationDraft, Violation};
use swimset_core::DatasetManifest;

use crate::config::Config;
use crate::error::{PutError, ServiceError, ServiceResult};

#[derive(Debug, Clone, Copy)]
pub struct Session {
    pub started: Instant,
    pub boxes_added: u64,
}

/// An immutable view of the dataset, shared with readers.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub manifest: Arc<DatasetManifest>,
    pub session: Session,
}

#[derive(Debug, Clone, Serialize)]
pub struct VideoSummary {
    #[serde(flatten)]
    pub metadata: RaceMetadata,
    pub frame_count: usize,
    pub annotated_frames: usize,
    pub annotation_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Progress {
    pub boxes_done: u64,
    pub boxes_estimated: u64,
    pub frames_to_annotate: u64,
    pub estimated_seconds: f64,
    pub seconds_per_box_assumed: f64,
    pub elapsed_seconds: f64,
    pub boxes_added_this_session: u64,
    /// Wall-clock seconds per box added this session; absent until a box is added.
    pub elapsed_seconds_per_box: Option<f64>,
    pub classes: DatasetStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegalNext {
    pub track_id: TrackId,
    pub video_id: String,
    pub frame_index: u64,
    pub prior: Option<SwimmerClass>,
    pub classes: Vec<SwimmerClass>,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("unknown video `{0}`")]
    UnknownVideo(String),
    #[error(transparent)]
    Core(#[from] swimset_core::Error),
}

impl Snapshot {
    pub fn videos(&self) -> Vec<VideoSummary> {
        self.manifest
            .videos
            .iter()
            .map(|v| {
                let frames = self.frames_of(&v.video_id);
                VideoSummary {
                    metadata: v.clone(),
                    frame_count: frames.len(),
                    annotated_frames: frames.iter().filter(|f| !f.annotations.is_empty()).count(),
                    annotation_count: frames.iter().map(|f| f.annotations.len()).sum(),
                }
            })
            .collect()
    }

    pub fn frame(&self, frame_id: &str) -> Option<&FrameRecord> {
        self.manifest.frame(frame_id)
    }

    fn video(&self, video_id: &str) -> Result<&RaceMetadata, QueryError> {
        self.manifest
            .video(video_id)
            .ok_or_else(|| QueryError::UnknownVideo(video_id.to_string()))
    }

    /// Frames of one video in frame-index order.
    fn frames_of(&self, video_id: &str) -> Vec<&FrameRecord> {
        let mut v: Vec<&FrameRecord> = self.manifest.frames.iter().filter(|f| f.video_id == video_id).collect();
        v.sort_by_key(|f| f.frame_index);
        v
    }

    /// The first frame after `after` (or the first frame when `None`) selected
    /// by the sampling policy, honouring the video's dive ranges.
    pub fn next_frame(
        &self,
        video_id: &str,
        after: Option<u64>,
        config: &Config,
    ) -> Result<Option<&FrameRecord>, QueryError> {
        let video = self.video(video_id)?;
        let policy = config.policy()?;
        let ranges = check_ranges(&video.dive_ranges)?;
        Ok(self
            .frames_of(video_id)
            .into_iter()
            .filter(|f| after.is_none_or(|a| f.frame_index > a))
            .find(|f| policy.selects(f.frame_index, &ranges)))
    }

    pub fn progress(&self, config: &Config) -> Progress {
        let policy = config.policy().unwrap_or_default();
        let mut boxes_estimated = 0;
        let mut frames_to_annotate = 0;
        for v in &self.manifest.videos {
            let ranges = check_ranges(&v.dive_ranges).unwrap_or_default();
            let n = self
                .frames_of(&v.video_id)
                .iter()
                .filter(|f| policy.selects(f.frame_index, &ranges))
                .count() as u64;
            if n == 0 {
                continue;
            }
            frames_to_annotate += n;
            if let Ok(w) = estimate_workload(n as f64 / v.fps, v.fps, v.lane_count, config.seconds_per_box) {
                boxes_estimated += w.boxes;
            }
        }
        let classes = dataset_stats(&self.manifest.frames);
        let elapsed = self.session.started.elapsed().as_secs_f64();
        let added = self.session.boxes_added;
        Progress {
            boxes_done: classes.total,
            boxes_estimated,
            frames_to_annotate,
            estimated_seconds: boxes_estimated as f64 * config.seconds_per_box,
            seconds_per_box_assumed: config.seconds_per_box,
            elapsed_seconds: elapsed,
            boxes_added_this_session: added,
            elapsed_seconds_per_box: (added > 0).then(|| elapsed / added as f64),
            classes,
        }
    }

    pub fn legal_next(&self, video_id: &str, track_id: &TrackId, frame_index: u64) -> Result<LegalNext, QueryError> {
        let video = self.video(video_id)?;
        let tracks = collect_tracks(self.frames_of(video_id));
        let track = tracks.get(&(video_id.to_string(), track_id.clone()));
        Ok(LegalNext {
            track_id: track_id.clone(),
            video_id: video_id.to_string(),
            frame_index,
            prior: track.and_then(|t| t.last_class_before(frame_index)),
            classes: legal_next_classes(track, frame_index, video.race_start_frame),
        })
    }
}

/// Owner of the authoritative manifest. Only one exists per dataset; the
/// server gives it to a single writer task.
#[derive(Debug)]
pub struct AnnotationStore {
    manifest: Arc<DatasetManifest>,
    path: Option<PathBuf>,
    config: Config,
    session: Session,
}

impl AnnotationStore {
    /// Takes ownership of a manifest, which must already satisfy every
    /// annotation and track rule. `path`, when given, receives every accepted write.
    pub fn new(manifest: DatasetManifest, path: Option<PathBuf>, config: Config) -> ServiceResult<Self> {
        config.validate()?;
        let rules = config.rules();
        manifest.validate(&rules)?;
        let mut track_violations = manifest.track_violations(&rules);
        if !track_violations.is_empty() {
            return Err(ServiceError::Core(swimset_core::Error::InvalidManifest {
                path: "frames".into(),
                count: track_violations.len(),
                first: track_violations.swap_remove(0),
            }));
        }
        Ok(Self {
            manifest: Arc::new(manifest.canonical()),
            path,
            config,
            session: Session {
                started: Instant::now(),
                boxes_added: 0,
            },
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            manifest: Arc::clone(&self.manifest),
            session: self.session,
        }
    }

    /// Replaces every annotation of a frame.
    ///
    /// Checks, in order: the frame exists, the caller saw the current
    /// version, each box and the frame as a whole, then every track the
    /// frame touches across the rest of its video. Nothing is stored unless
    /// all pass and the manifest is written.
    pub fn put_annotations(
        &mut self,
        frame_id: &str,
        drafts: &[AnnotationDraft],
        expected_version: u64,
    ) -> Result<FrameRecord, PutError> {
        let pos = self
            .manifest
            .frames
            .iter()
            .position(|f| f.frame_id == frame_id)
            .ok_or_else(|| PutError::NotFound(frame_id.to_string()))?;
        let current = &self.manifest.frames[pos];
        if current.version != expected_version {
            return Err(PutError::Conflict {
                expected: expected_version,
                current_version: current.version,
            });
        }

        let rules = self.config.rules();
        let mut violations = Vec::new();
        let mut candidate = current.clone();
        candidate.annotations = drafts
            .iter()
            .filter_map(|d| d.check_box(current).map_err(|v| violations.push(v)).ok())
            .collect();
        candidate.annotations.sort_by(|a, b| a.track_id.cmp(&b.track_id));
        violations.extend(validate_frame(&candidate, &rules));
        if violations.is_empty() {
            violations.extend(self.track_violations(pos, &candidate));
        }
        if !violations.is_empty() {
            return Err(PutError::Invalid(violations));
        }

        let added = candidate.annotations.len().saturating_sub(current.annotations.len()) as u64;
        candidate.version += 1;
        let mut next = (*self.manifest).clone();
        next.frames[pos] = candidate.clone();
        if let Some(path) = &self.path {
            save_manifest(&next, path).map_err(PutError::Storage)?;
        }
        self.manifest = Arc::new(next);
        self.session.boxes_added += added;
        Ok(candidate)
    }

    /// Track violations for every track id present before or after the edit.
    fn track_violations(&self, pos: usize, candidate: &FrameRecord) -> Vec<Violation> {
        let old = &self.manifest.frames[pos];
        let touched: BTreeSet<&TrackId> = old
            .annotations
            .iter()
            .chain(&candidate.annotations)
            .map(|a| &a.track_id)
            .collect();
        let video_frames = self
            .manifest
            .frames
            .iter()
            .enumerate()
            .filter(|(i, f)| *i != pos && f.video_id == candidate.video_id)
            .map(|(_, f)| f)
            .chain(std::iter::once(candidate));
        let tracks = collect_tracks(video_frames);
        touched
            .into_iter()
            .filter_map(|id| tracks.get(&(candidate.video_id.clone(), id.clone())))
            .flat_map(|t| validate_track(t).unwrap_or_default())
            .collect()
    }
}
