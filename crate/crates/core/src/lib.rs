//! Toolkit for building and evaluating annotated swimmer-detection datasets
//! from competition race footage.
//!
//! * [`model`]: boxes, annotations, frames and race metadata
//! * [`transitions`] and [`validation`]: the six-class race state machine and annotation rules
//! * [`stats`]: workload projection and per-class counts
//! * [`sampler`]: stride sampling and subset generation
//! * [`augment`]: flip, perspective and photometric transforms with box propagation
//! * [`metrics`] and [`sweep`]: IoU, AP/mAP, tracking AP and the subset-size sweep
//! * [`storage`]: native manifest, Darknet and VOC interchange
//! * [`coverage`]: checklist audit of footage variety

pub mod augment;
pub mod coverage;
pub mod error;
pub mod metrics;
pub mod model;
pub mod sampler;
pub mod stats;
pub mod storage;
pub mod sweep;
pub mod transitions;
pub mod validation;

pub use error::{Error, Result};
pub use model::{
    Annotation, BoundingBox, CameraHeight, CameraPosition, Course, FrameRange, FrameRecord, Gender, Lighting,
    RaceMetadata, Stroke, SwimmerClass, TrackId,
};
pub use storage::DatasetManifest;
