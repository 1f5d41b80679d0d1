//! Variety audit of race metadata against the footage checklists.
//!
//! Observations are counted per video. Dataset-wide gaps only ever shrink as
//! manifests are added; per-venue gaps are kept in a separate list so that a
//! newly added venue cannot grow the dataset-wide one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{CameraHeight, CameraPosition, Course, Gender, Lighting, RaceMetadata, Stroke};
use crate::storage::DatasetManifest;

/// Nominal durations at or below this are sprints.
pub const SPRINT_MAX_S: f64 = 60.0;
/// Nominal durations at or above this are distance races.
pub const DISTANCE_MIN_S: f64 = 480.0;

/// The three camera placements that footage is commonly available for.
pub const TYPICAL_CAMERAS: [(CameraHeight, CameraPosition); 3] = [
    (CameraHeight::PoolLevel, CameraPosition::DiveView),
    (CameraHeight::ViewingLevel, CameraPosition::MidPoolView),
    (CameraHeight::PoolLevel, CameraPosition::TurnView),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceType {
    Sprint,
    Middle,
    Distance,
}

impl RaceType {
    pub fn as_str(self) -> &'static str {
        match self {
            RaceType::Sprint => "sprint",
            RaceType::Middle => "middle",
            RaceType::Distance => "distance",
        }
    }
}

/// Classifies by nominal duration, falling back to distance when unknown:
/// 100 and shorter are sprints, 800 and longer are distance races.
pub fn race_type(meta: &RaceMetadata) -> RaceType {
    match meta.nominal_duration_s {
        Some(d) if d <= SPRINT_MAX_S => RaceType::Sprint,
        Some(d) if d >= DISTANCE_MIN_S => RaceType::Distance,
        Some(_) => RaceType::Middle,
        None if meta.race_distance_m <= 100 => RaceType::Sprint,
        None if meta.race_distance_m >= 800 => RaceType::Distance,
        None => RaceType::Middle,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Required,
    Advisory,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Gap {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    pub dimension: String,
    pub value: String,
    pub severity: Severity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub videos: usize,
    pub venues: Vec<String>,
    /// dimension -> observed value -> number of videos
    pub observed: BTreeMap<String, BTreeMap<String, usize>>,
    pub gaps: Vec<Gap>,
    pub venue_gaps: Vec<Gap>,
}

impl CoverageReport {
    pub fn required_gaps(&self) -> impl Iterator<Item = &Gap> {
        self.gaps.iter().filter(|g| g.severity == Severity::Required)
    }

    pub fn gaps_for_venue<'a>(&'a self, venue: &'a str) -> impl Iterator<Item = &'a Gap> + 'a {
        self.venue_gaps
            .iter()
            .filter(move |g| g.venue.as_deref() == Some(venue))
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "videos: {}  venues: {}", self.videos, self.venues.len());
        for (dim, values) in &self.observed {
            let listed: Vec<String> = values.iter().map(|(v, n)| format!("{v}={n}")).collect();
            let _ = writeln!(out, "  {dim}: {}", listed.join(", "));
        }
        let mut section = |title: &str, gaps: &[Gap]| {
            let _ = writeln!(out, "{title} ({}):", gaps.len());
            for g in gaps {
                let venue = g.venue.as_deref().map(|v| format!("[{v}] ")).unwrap_or_default();
                let sev = match g.severity {
                    Severity::Required => "required",
                    Severity::Advisory => "advisory",
                };
                let note = g.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
                let _ = writeln!(out, "  {venue}{sev}: {} missing {}{note}", g.dimension, g.value);
            }
        };
        section("dataset gaps", &self.gaps);
        section("venue gaps", &self.venue_gaps);
        out
    }

    /// CSV with header `kind,venue,dimension,value,count,severity`.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("kind,venue,dimension,value,count,severity\n");
        for (dim, values) in &self.observed {
            for (v, n) in values {
                let _ = writeln!(out, "observed,,{},{},{n},", csv_field(dim), csv_field(v));
            }
        }
        for g in self.gaps.iter().chain(&self.venue_gaps) {
            let sev = match g.severity {
                Severity::Required => "required",
                Severity::Advisory => "advisory",
            };
            let _ = writeln!(
                out,
                "gap,{},{},{},0,{sev}",
                csv_field(g.venue.as_deref().unwrap_or("")),
                csv_field(&g.dimension),
                csv_field(&g.value)
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Default)]
struct Tally(BTreeMap<String, BTreeMap<String, usize>>);

impl Tally {
    fn add(&mut self, dim: &str, value: impl Into<String>) {
        *self
            .0
            .entry(dim.to_string())
            .or_default()
            .entry(value.into())
            .or_default() += 1;
    }

    fn has(&self, dim: &str, value: &str) -> bool {
        self.0.get(dim).is_some_and(|m| m.contains_key(value))
    }

    fn distinct(&self, dim: &str) -> usize {
        self.0.get(dim).map_or(0, BTreeMap::len)
    }
}

fn camera_key(h: CameraHeight, p: CameraPosition) -> String {
    format!("{h}@{p}")
}

fn gap(venue: Option<&str>, dimension: &str, value: &str, severity: Severity, note: Option<&str>) -> Gap {
    Gap {
        venue: venue.map(str::to_string),
        dimension: dimension.to_string(),
        value: value.to_string(),
        severity,
        note: note.map(str::to_string),
    }
}

fn bool_tag(present: bool) -> &'static str {
    if present {
        "present"
    } else {
        "absent"
    }
}

pub fn coverage_report(manifests: &[DatasetManifest]) -> CoverageReport {
    let videos: Vec<&RaceMetadata> = manifests.iter().flat_map(|m| &m.videos).collect();
    let mut t = Tally::default();
    let mut per_venue: BTreeMap<&str, Tally> = BTreeMap::new();
    for v in &videos {
        t.add("course", v.course.as_str());
        t.add("lighting", v.lighting.as_str());
        t.add("bulkhead", bool_tag(v.bulkhead_present));
        t.add("block_style", v.block_style.clone());
        if let Some(depth) = &v.pool_depth {
            t.add("pool_depth", depth.clone());
        }
        t.add("lane_count", v.lane_count.to_string());
        t.add("flags", bool_tag(v.flags_present));
        t.add("camera_height", v.camera_height.as_str());
        t.add("camera_position", v.camera_position.as_str());
        t.add("camera", camera_key(v.camera_height, v.camera_position));
        t.add("stroke", v.stroke.as_str());
        t.add("race_type", race_type(v).as_str());
        t.add("gender", v.gender.as_str());
        t.add("age_group", v.age_group.clone());

        let vt = per_venue.entry(v.venue_name.as_str()).or_default();
        vt.add("stroke", v.stroke.as_str());
        vt.add("race_type", race_type(v).as_str());
        vt.add("camera", camera_key(v.camera_height, v.camera_position));
    }

    use Severity::*;
    let mut gaps = Vec::new();
    for c in Course::ALL {
        if !t.has("course", c.as_str()) {
            gaps.push(gap(None, "course", c.as_str(), Required, None));
        }
    }
    for l in Lighting::ALL {
        if !t.has("lighting", l.as_str()) {
            gaps.push(gap(None, "lighting", l.as_str(), Advisory, None));
        }
    }
    for b in ["present", "absent"] {
        if !t.has("bulkhead", b) {
            gaps.push(gap(None, "bulkhead", b, Advisory, None));
        }
    }
    for (dim, what) in [
        ("block_style", "second block style"),
        ("pool_depth", "second pool depth"),
        ("lane_count", "second lane count"),
        ("age_group", "second age group"),
    ] {
        if t.distinct(dim) < 2 {
            gaps.push(gap(None, dim, what, Advisory, None));
        }
    }
    for f in ["present", "absent"] {
        if !t.has("flags", f) {
            gaps.push(gap(
                None,
                "flags",
                f,
                Advisory,
                Some("not every competition moves the flags"),
            ));
        }
    }
    for (h, p) in TYPICAL_CAMERAS {
        let key = camera_key(h, p);
        if !t.has("camera", &key) {
            gaps.push(gap(None, "camera", &key, Required, Some("typical camera placement")));
        }
    }
    for s in Stroke::FOUR {
        if !t.has("stroke", s.as_str()) {
            gaps.push(gap(None, "stroke", s.as_str(), Required, None));
        }
    }
    for r in [RaceType::Sprint, RaceType::Distance] {
        if !t.has("race_type", r.as_str()) {
            gaps.push(gap(None, "race_type", r.as_str(), Required, None));
        }
    }
    for g in [Gender::Female, Gender::Male] {
        if !t.has("gender", g.as_str()) {
            gaps.push(gap(None, "gender", g.as_str(), Required, None));
        }
    }

    let mut venue_gaps = Vec::new();
    for (venue, vt) in &per_venue {
        for s in Stroke::FOUR {
            if !vt.has("stroke", s.as_str()) {
                venue_gaps.push(gap(Some(venue), "stroke", s.as_str(), Required, None));
            }
        }
        for r in [RaceType::Sprint, RaceType::Distance] {
            if !vt.has("race_type", r.as_str()) {
                venue_gaps.push(gap(Some(venue), "race_type", r.as_str(), Required, None));
            }
        }
        for (h, p) in TYPICAL_CAMERAS {
            let key = camera_key(h, p);
            if !vt.has("camera", &key) {
                venue_gaps.push(gap(
                    Some(venue),
                    "camera",
                    &key,
                    Advisory,
                    Some("use every camera angle the venue offers"),
                ));
            }
        }
    }

    CoverageReport {
        videos: videos.len(),
        venues: per_venue.keys().map(|v| v.to_string()).collect(),
        observed: t.0,
        gaps,
        venue_gaps,
    }
}
