//! Domain types shared by every part of the toolkit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Box coordinates are stored on a 1/1024 pixel grid.
///
/// Every value on this grid is exactly representable, so reflections such as
/// `W - (W - x)` reproduce `x` bit for bit.
pub const SUBPIXEL_STEPS: f64 = 1024.0;

/// The six annotated swimmer states, in race order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwimmerClass {
    OnBlocks,
    Diving,
    Underwater,
    Swimming,
    Turning,
    Finishing,
}

impl SwimmerClass {
    pub const ALL: [SwimmerClass; 6] = [
        SwimmerClass::OnBlocks,
        SwimmerClass::Diving,
        SwimmerClass::Underwater,
        SwimmerClass::Swimming,
        SwimmerClass::Turning,
        SwimmerClass::Finishing,
    ];

    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SwimmerClass::OnBlocks => "on_blocks",
            SwimmerClass::Diving => "diving",
            SwimmerClass::Underwater => "underwater",
            SwimmerClass::Swimming => "swimming",
            SwimmerClass::Turning => "turning",
            SwimmerClass::Finishing => "finishing",
        }
    }
}

impl fmt::Display for SwimmerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SwimmerClass {
    type Err = Error;

    /// Accepts `on_blocks`, `on-blocks`, `OnBlocks` and friends.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' ' | '"' | '\''))
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match key.as_str() {
            "onblocks" => SwimmerClass::OnBlocks,
            "diving" => SwimmerClass::Diving,
            "underwater" => SwimmerClass::Underwater,
            "swimming" => SwimmerClass::Swimming,
            "turning" => SwimmerClass::Turning,
            "finishing" | "finish" => SwimmerClass::Finishing,
            _ => return Err(Error::UnknownClass(s.to_string())),
        })
    }
}

/// Axis-aligned box in frame pixels, origin top-left, y down.
///
/// Construction validates `0 <= min < max` on both axes and snaps each
/// coordinate to the [`SUBPIXEL_STEPS`] grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoundingBox::new(raw.x_min, raw.y_min, raw.x_max, raw.y_max)
    }
}

impl From<BoundingBox> for RawBox {
    fn from(b: BoundingBox) -> Self {
        RawBox {
            x_min: b.x_min,
            y_min: b.y_min,
            x_max: b.x_max,
            y_max: b.y_max,
        }
    }
}

pub fn snap(v: f64) -> f64 {
    (v * SUBPIXEL_STEPS).round() / SUBPIXEL_STEPS
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite coordinate in {coords:?}")));
        }
        let [x_min, y_min, x_max, y_max] = coords.map(snap);
        if x_min < 0.0 || y_min < 0.0 {
            return Err(Error::InvalidBox(format!(
                "negative coordinate in ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidBox(format!(
                "non-positive area ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        ]
    }

    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x_max <= width && self.y_max <= height
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackId(pub String);

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TrackId {
    fn from(s: &str) -> Self {
        TrackId(s.to_string())
    }
}

/// One boxed swimmer in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub swimmer_class: SwimmerClass,
    pub lane: u32,
    pub track_id: TrackId,
    /// Annotator's estimate of the unoccluded, untruncated share of the swimmer.
    pub visible_fraction: f64,
    #[serde(default)]
    pub truncated_by_camera: bool,
}

impl Annotation {
    pub fn new(bbox: BoundingBox, swimmer_class: SwimmerClass, lane: u32, track_id: &str) -> Self {
        Self {
            bbox,
            swimmer_class,
            lane,
            track_id: TrackId(track_id.to_string()),
            visible_fraction: 1.0,
            truncated_by_camera: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    /// Key into the manifest's per-video race metadata.
    pub video_id: String,
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub image_path: String,
    pub width_px: u32,
    pub height_px: u32,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub version: u64,
}

impl FrameRecord {
    pub fn new(frame_id: &str, video_id: &str, frame_index: u64, width_px: u32, height_px: u32) -> Self {
        Self {
            frame_id: frame_id.to_string(),
            video_id: video_id.to_string(),
            frame_index,
            timestamp_s: 0.0,
            image_path: format!("{frame_id}.jpg"),
            width_px,
            height_px,
            annotations: Vec::new(),
            version: 0,
        }
    }
}

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().eq_ignore_ascii_case(s))
                    .ok_or_else(|| Error::arg(stringify!($name), format!("unknown value `{s}`")))
            }
        }
    };
}

vocabulary!(
    /// Pool course.
    Course { Lcm => "LCM", Scm => "SCM", Scy => "SCY" }
);
vocabulary!(Lighting {
    Indoor => "indoor",
    OutdoorDay => "outdoor_day",
    OutdoorNight => "outdoor_night",
});
vocabulary!(CameraHeight {
    PoolLevel => "pool_level",
    ViewingLevel => "viewing_level",
});
vocabulary!(CameraPosition {
    DiveView => "dive_view",
    MidPoolView => "mid_pool_view",
    TurnView => "turn_view",
});
vocabulary!(Stroke {
    Freestyle => "freestyle",
    Backstroke => "backstroke",
    Breaststroke => "breaststroke",
    Butterfly => "butterfly",
    Medley => "medley",
});
vocabulary!(Gender {
    Female => "female",
    Male => "male",
    Mixed => "mixed",
});

impl Stroke {
    /// The four competitive strokes; medley is a combination of them.
    pub const FOUR: [Stroke; 4] = [
        Stroke::Freestyle,
        Stroke::Backstroke,
        Stroke::Breaststroke,
        Stroke::Butterfly,
    ];
}

/// Inclusive range of frame indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameRange {
    pub start: u64,
    pub end: u64,
}

impl FrameRange {
    pub fn new(start: u64, end: u64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, index: u64) -> bool {
        self.start <= index && index <= self.end
    }
}

/// Descriptors of one race video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceMetadata {
    pub video_id: String,
    pub venue_name: String,
    pub course: Course,
    pub lane_count: u32,
    pub lighting: Lighting,
    pub bulkhead_present: bool,
    pub block_style: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_depth: Option<String>,
    pub camera_height: CameraHeight,
    pub camera_position: CameraPosition,
    pub stroke: Stroke,
    pub race_distance_m: u32,
    /// Typical race duration; when absent it is inferred from the distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_duration_s: Option<f64>,
    pub gender: Gender,
    pub age_group: String,
    pub flags_present: bool,
    pub fps: f64,
    /// Frame index of the start signal; tracks that begin at or before it start on the blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub race_start_frame: Option<u64>,
    /// Intervals containing dive footage, annotated at the dive stride.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dive_ranges: Vec<FrameRange>,
}

impl RaceMetadata {
    pub fn validate(&self) -> Result<()> {
        if self.lane_count < 1 {
            return Err(Error::arg("lane_count", "must be at least 1"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::arg("fps", "must be positive"));
        }
        if self.race_distance_m == 0 {
            return Err(Error::arg("race_distance_m", "must be positive"));
        }
        Ok(())
    }
}
