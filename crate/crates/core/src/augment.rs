//! Training-time augmentation with exact box propagation.
//!
//! Every transform comes as a pair: one function rewrites a [`FrameRecord`]'s
//! annotations and one rewrites the decoded image. Sources are never mutated;
//! the outputs are new records meant for export.

use image::{imageops, Rgb, RgbImage};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundingBox, FrameRecord};
use crate::validation::ValidationRules;

/// Mirrors the frame across its vertical axis.
///
/// When `lane_count` is given, lanes are renumbered from the other side.
pub fn flip_horizontal(frame: &FrameRecord, lane_count: Option<u32>) -> FrameRecord {
    let w = frame.width_px as f64;
    let mut out = frame.clone();
    for a in &mut out.annotations {
        let b = a.bbox;
        // The reflected box is in range whenever the source box was.
        a.bbox = BoundingBox::new(w - b.x_max(), b.y_min(), w - b.x_min(), b.y_max()).unwrap_or(b);
        if let Some(n) = lane_count {
            if a.lane < n {
                a.lane = n - 1 - a.lane;
            }
        }
    }
    out
}

pub fn flip_image(image: &RgbImage) -> RgbImage {
    imageops::flip_horizontal(image)
}

/// Invertible projective map of the image plane, acting on column vectors `(x, y, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Homography {
    m: Matrix3<f64>,
    inv: Matrix3<f64>,
}

impl TryFrom<[f64; 9]> for Homography {
    type Error = Error;

    fn try_from(v: [f64; 9]) -> Result<Self> {
        Homography::from_row_major(v)
    }
}

impl From<Homography> for [f64; 9] {
    fn from(h: Homography) -> Self {
        h.row_major()
    }
}

impl Homography {
    pub fn from_row_major(v: [f64; 9]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::arg("homography", "entries must be finite"));
        }
        let m = Matrix3::from_row_slice(&v);
        let scale = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if scale == 0.0 || m.determinant().abs() <= 1e-12 * scale.powi(3) {
            return Err(Error::SingularHomography);
        }
        let inv = m.try_inverse().ok_or(Error::SingularHomography)?;
        Ok(Self { m, inv })
    }

    /// Parses 9 comma-separated entries in row-major order, or 6 for an
    /// affine map whose last row is `0,0,1`.
    pub fn parse(text: &str) -> Result<Self> {
        let vals: Vec<f64> = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::arg("homography", format!("`{t}`: {e}")))
            })
            .collect::<Result<_>>()?;
        match vals.len() {
            9 => Self::from_row_major(vals.try_into().unwrap()),
            6 => Self::from_row_major([vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], 0.0, 0.0, 1.0]),
            n => Err(Error::arg("homography", format!("expected 6 or 9 entries, got {n}"))),
        }
    }

    pub fn identity() -> Self {
        Self::from_row_major([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::from_row_major([1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0]).unwrap()
    }

    /// `x' = x + k y`.
    pub fn shear_x(k: f64) -> Self {
        Self::from_row_major([1.0, k, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    pub fn row_major(&self) -> [f64; 9] {
        let m = &self.m;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    fn project(m: &Matrix3<f64>, x: f64, y: f64) -> (f64, f64, f64) {
        let p = m * Vector3::new(x, y, 1.0);
        (p.x / p.z, p.y / p.z, p.z)
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v, _) = Self::project(&self.m, x, y);
        (u, v)
    }

    pub fn apply_inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v, _) = Self::project(&self.inv, x, y);
        (u, v)
    }

    /// The frame rectangle must stay on one side of the line at infinity.
    fn check_frame(&self, width: f64, height: f64) -> Result<()> {
        let ws: Vec<f64> = [(0.0, 0.0), (width, 0.0), (width, height), (0.0, height)]
            .iter()
            .map(|&(x, y)| Self::project(&self.m, x, y).2)
            .collect();
        let all_pos = ws.iter().all(|&w| w > 1e-12);
        let all_neg = ws.iter().all(|&w| w < -1e-12);
        if all_pos || all_neg {
            Ok(())
        } else {
            Err(Error::UnboundedHomography)
        }
    }

    /// Axis-aligned hull of the four mapped corners of `b`, as raw extents.
    pub fn hull(&self, b: &BoundingBox) -> [f64; 4] {
        let mut ext = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (x, y) in b.corners() {
            let (u, v) = self.apply(x, y);
            ext[0] = ext[0].min(u);
            ext[1] = ext[1].min(v);
            ext[2] = ext[2].max(u);
            ext[3] = ext[3].max(v);
        }
        ext
    }
}

/// Warps annotations through `h`.
///
/// Each box becomes the hull of its mapped corners clipped to the frame.
/// Annotations keeping less than `rules.min_visible_fraction` of their hull
/// area after clipping are dropped; clipped survivors are marked as
/// truncated by the camera.
pub fn shear_perspective(frame: &FrameRecord, h: &Homography, rules: &ValidationRules) -> Result<FrameRecord> {
    let (w, ht) = (frame.width_px as f64, frame.height_px as f64);
    h.check_frame(w, ht)?;
    let mut out = frame.clone();
    out.annotations.clear();
    for a in &frame.annotations {
        let [x0, y0, x1, y1] = h.hull(&a.bbox);
        let hull_area = (x1 - x0) * (y1 - y0);
        let (cx0, cy0, cx1, cy1) = (x0.max(0.0), y0.max(0.0), x1.min(w), y1.min(ht));
        if cx1 <= cx0 || cy1 <= cy0 {
            continue;
        }
        let clipped_area = (cx1 - cx0) * (cy1 - cy0);
        if hull_area.is_nan() || hull_area <= 0.0 || clipped_area < rules.min_visible_fraction * hull_area {
            continue;
        }
        let Ok(bbox) = BoundingBox::new(cx0, cy0, cx1, cy1) else {
            continue;
        };
        let mut moved = a.clone();
        moved.bbox = bbox;
        moved.truncated_by_camera |= clipped_area < hull_area;
        out.annotations.push(moved);
    }
    Ok(out)
}

/// Inverse-mapped nearest-neighbour warp; pixels sourced from outside the
/// input are black.
pub fn warp_image(image: &RgbImage, h: &Homography) -> Result<RgbImage> {
    let (w, ht) = image.dimensions();
    h.check_frame(w as f64, ht as f64)?;
    let mut out = RgbImage::new(w, ht);
    for (u, v, px) in out.enumerate_pixels_mut() {
        let (sx, sy, sw) = Homography::project(&h.inv, u as f64 + 0.5, v as f64 + 0.5);
        if !(sw.is_finite() && sx.is_finite() && sy.is_finite()) {
            continue;
        }
        let (fx, fy) = (sx.floor(), sy.floor());
        if fx >= 0.0 && fy >= 0.0 && fx < w as f64 && fy < ht as f64 {
            *px = *image.get_pixel(fx as u32, fy as u32);
        }
    }
    Ok(out)
}

/// Photometric adjustment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Added to every channel on a 0..1 scale, in `[-1, 1]`.
    pub brightness: f64,
    /// Hue rotation in degrees, in `[-180, 180]`.
    pub hue_deg: f64,
    /// Gain about mid-grey, `> 0`.
    pub contrast: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            brightness: 0.0,
            hue_deg: 0.0,
            contrast: 1.0,
        }
    }
}

impl Jitter {
    pub fn new(brightness: f64, hue_deg: f64, contrast: f64) -> Result<Self> {
        let j = Self {
            brightness,
            hue_deg,
            contrast,
        };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.brightness) {
            return Err(Error::arg("brightness", format!("{} outside [-1, 1]", self.brightness)));
        }
        if !(-180.0..=180.0).contains(&self.hue_deg) {
            return Err(Error::arg("hue", format!("{} outside [-180, 180]", self.hue_deg)));
        }
        if !(self.contrast.is_finite() && self.contrast > 0.0) {
            return Err(Error::arg("contrast", format!("{} must be positive", self.contrast)));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.brightness == 0.0 && self.hue_deg == 0.0 && self.contrast == 1.0
    }
}

/// Annotations are untouched by pixel adjustments; this only checks parameters.
pub fn photometric_jitter(frame: &FrameRecord, jitter: &Jitter) -> Result<FrameRecord> {
    jitter.validate()?;
    Ok(frame.clone())
}

/// Brightness, then contrast, then hue, clamping to the displayable range
/// after each step. Clamping is lossy: `+b` followed by `-b` does not restore
/// a pixel that saturated.
pub fn jitter_image(image: &RgbImage, jitter: &Jitter) -> Result<RgbImage> {
    jitter.validate()?;
    if jitter.is_identity() {
        return Ok(image.clone());
    }
    let mut out = image.clone();
    for px in out.pixels_mut() {
        let mut c = px.0.map(|v| v as f64 / 255.0);
        for v in &mut c {
            *v = (*v + jitter.brightness).clamp(0.0, 1.0);
            *v = ((*v - 0.5) * jitter.contrast + 0.5).clamp(0.0, 1.0);
        }
        if jitter.hue_deg != 0.0 {
            c = rotate_hue(c, jitter.hue_deg);
        }
        *px = Rgb(c.map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    Ok(out)
}

fn rotate_hue([r, g, b]: [f64; 3], degrees: f64) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta == 0.0 {
        return [r, g, b];
    }
    let hue = if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = delta / max;
    let h = (hue + degrees).rem_euclid(360.0) / 60.0;
    let c = max * sat;
    let x = c * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
    let m = max - c;
    let (r1, g1, b1) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r1 + m, g1 + m, b1 + m]
}

/// A chain of augmentations applied in the order flip, warp, jitter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    pub flip: bool,
    pub homography: Option<Homography>,
    pub jitter: Option<Jitter>,
}

impl AugmentPlan {
    pub fn apply_frame(
        &self,
        frame: &FrameRecord,
        lane_count: Option<u32>,
        rules: &ValidationRules,
    ) -> Result<FrameRecord> {
        let mut out = if self.flip {
            flip_horizontal(frame, lane_count)
        } else {
            frame.clone()
        };
        if let Some(h) = &self.homography {
            out = shear_perspective(&out, h, rules)?;
        }
        if let Some(j) = &self.jitter {
            out = photometric_jitter(&out, j)?;
        }
        Ok(out)
    }

    pub fn apply_image(&self, image: &RgbImage) -> Result<RgbImage> {
        let mut out = if self.flip { flip_image(image) } else { image.clone() };
        if let Some(h) = &self.homography {
            out = warp_image(&out, h)?;
        }
        if let Some(j) = &self.jitter {
            out = jitter_image(&out, j)?;
        }
        Ok(out)
    }
}
