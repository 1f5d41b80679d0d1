//! Native manifest persistence and Darknet / VOC interchange.
//!
//! The native manifest is pretty-printed JSON with an explicit
//! `format_version`. Saving is canonical (videos by id, frames by video then
//! frame index, annotations by track id) so identical datasets produce
//! identical bytes.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Annotation, BoundingBox, FrameRecord, RaceMetadata, SwimmerClass, TrackId};
use crate::validation::{validate_annotation, validate_frames, ValidationRules, Violation};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: String,
    pub dataset_id: String,
    #[serde(default)]
    pub checklist_tags: Vec<String>,
    pub videos: Vec<RaceMetadata>,
    pub frames: Vec<FrameRecord>,
}

impl DatasetManifest {
    pub fn new(dataset_id: &str) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            dataset_id: dataset_id.to_string(),
            checklist_tags: Vec::new(),
            videos: Vec::new(),
            frames: Vec::new(),
        }
    }

    pub fn canonicalize(&mut self) {
        self.videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        self.frames
            .sort_by(|a, b| (&a.video_id, a.frame_index, &a.frame_id).cmp(&(&b.video_id, b.frame_index, &b.frame_id)));
        for f in &mut self.frames {
            f.annotations.sort_by(|a, b| a.track_id.cmp(&b.track_id));
        }
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn video(&self, video_id: &str) -> Option<&RaceMetadata> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn frame(&self, frame_id: &str) -> Option<&FrameRecord> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn annotation_count(&self) -> usize {
        self.frames.iter().map(|f| f.annotations.len()).sum()
    }

    /// Structural checks plus every per-annotation rule.
    pub fn validate(&self, rules: &ValidationRules) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Schema {
                path: "format_version".into(),
                message: format!("unsupported version `{}`", self.format_version),
            });
        }
        let mut videos = HashSet::new();
        for (i, v) in self.videos.iter().enumerate() {
            if !videos.insert(v.video_id.as_str()) {
                return Err(Error::Schema {
                    path: format!("videos[{i}].video_id"),
                    message: format!("duplicate video id `{}`", v.video_id),
                });
            }
            v.validate().map_err(|e| Error::Schema {
                path: format!("videos[{i}]"),
                message: e.to_string(),
            })?;
        }
        let mut ids = HashSet::new();
        let mut bad: Option<(String, Violation)> = None;
        let mut count = 0;
        for (i, f) in self.frames.iter().enumerate() {
            if !ids.insert(f.frame_id.as_str()) {
                return Err(Error::Schema {
                    path: format!("frames[{i}].frame_id"),
                    message: format!("duplicate frame id `{}`", f.frame_id),
                });
            }
            if !videos.contains(f.video_id.as_str()) {
                return Err(Error::Schema {
                    path: format!("frames[{i}].video_id"),
                    message: format!("unknown video `{}`", f.video_id),
                });
            }
            if f.width_px == 0 || f.height_px == 0 {
                return Err(Error::Schema {
                    path: format!("frames[{i}]"),
                    message: "frame dimensions must be positive".into(),
                });
            }
            for (j, a) in f.annotations.iter().enumerate() {
                for v in validate_annotation(a, f, rules) {
                    count += 1;
                    bad.get_or_insert_with(|| (format!("frames[{i}].annotations[{j}]"), v));
                }
            }
        }
        match bad {
            Some((path, first)) => Err(Error::InvalidManifest { path, count, first }),
            None => Ok(()),
        }
    }

    /// Track-level violations (illegal class transitions) across the manifest.
    pub fn track_violations(&self, rules: &ValidationRules) -> Vec<Violation> {
        validate_frames(&self.frames, rules)
    }
}

pub fn manifest_to_string(manifest: &DatasetManifest) -> String {
    let canonical = manifest.clone().canonical();
    let mut text = serde_json::to_string_pretty(&canonical).expect("manifest serializes");
    text.push('\n');
    text
}

pub fn manifest_from_str(text: &str, rules: &ValidationRules) -> Result<DatasetManifest> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let manifest: DatasetManifest = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    manifest.validate(rules)?;
    Ok(manifest.canonical())
}

/// Writes atomically through a temporary sibling file.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    write_atomic(path, manifest_to_string(manifest).as_bytes())
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    load_manifest_with(path, &ValidationRules::default())
}

pub fn load_manifest_with(path: &Path, rules: &ValidationRules) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    manifest_from_str(&text, rules)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// A permutation of the six classes giving each its Darknet index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassOrder(Vec<SwimmerClass>);

impl Default for ClassOrder {
    fn default() -> Self {
        Self(SwimmerClass::ALL.to_vec())
    }
}

impl ClassOrder {
    pub fn new(order: Vec<SwimmerClass>) -> Result<Self> {
        let distinct: HashSet<_> = order.iter().collect();
        if order.len() != SwimmerClass::COUNT || distinct.len() != SwimmerClass::COUNT {
            return Err(Error::arg(
                "class_order",
                "must list each of the six classes exactly once",
            ));
        }
        Ok(Self(order))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(text.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?)
    }

    pub fn index_of(&self, c: SwimmerClass) -> usize {
        self.0
            .iter()
            .position(|&x| x == c)
            .expect("permutation holds every class")
    }

    pub fn class_at(&self, i: usize) -> Option<SwimmerClass> {
        self.0.get(i).copied()
    }

    pub fn classes(&self) -> &[SwimmerClass] {
        &self.0
    }
}

/// File-name-safe stem for per-frame outputs.
pub fn frame_stem(frame_id: &str) -> String {
    frame_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn check_dims(frame: &FrameRecord) -> Result<(f64, f64)> {
    if frame.width_px == 0 || frame.height_px == 0 {
        return Err(Error::ZeroDimensionFrame(frame.frame_id.clone()));
    }
    Ok((frame.width_px as f64, frame.height_px as f64))
}

pub fn darknet_names(order: &ClassOrder) -> String {
    order.classes().iter().map(|c| format!("{c}\n")).collect()
}

/// One `class cx cy w h` line per annotation, normalized by the frame size.
pub fn darknet_labels(frame: &FrameRecord, order: &ClassOrder) -> Result<String> {
    let (w, h) = check_dims(frame)?;
    let mut out = String::new();
    for a in &frame.annotations {
        let b = &a.bbox;
        let (cx, cy) = b.center();
        let _ = writeln!(
            out,
            "{} {:.6} {:.6} {:.6} {:.6}",
            order.index_of(a.swimmer_class),
            cx / w,
            cy / h,
            b.width() / w,
            b.height() / h
        );
    }
    Ok(out)
}

pub fn parse_darknet_labels(
    text: &str,
    frame: &FrameRecord,
    order: &ClassOrder,
) -> Result<Vec<(SwimmerClass, BoundingBox)>> {
    let (w, h) = check_dims(frame)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            location: format!("{} line {}", frame.frame_id, lineno + 1),
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, got {}", fields.len())));
        }
        let k: usize = fields[0].parse().map_err(|e| err(format!("class index: {e}")))?;
        let class = order
            .class_at(k)
            .ok_or_else(|| err(format!("class index {k} out of range")))?;
        let mut v = [0.0f64; 4];
        for (slot, t) in v.iter_mut().zip(&fields[1..]) {
            *slot = t.parse().map_err(|e| err(format!("bad number `{t}`: {e}")))?;
        }
        let [cx, cy, bw, bh] = v;
        let bbox = BoundingBox::new(
            ((cx - bw / 2.0) * w).clamp(0.0, w),
            ((cy - bh / 2.0) * h).clamp(0.0, h),
            ((cx + bw / 2.0) * w).clamp(0.0, w),
            ((cy + bh / 2.0) * h).clamp(0.0, h),
        )
        .map_err(|e| err(e.to_string()))?;
        out.push((class, bbox));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportSummary {
    pub files: Vec<PathBuf>,
    pub annotations: usize,
}

/// Writes `<dir>/labels/<frame>.txt` per frame, `<dir>/classes.names` and an
/// `<dir>/images.txt` list of image paths for the trainer.
pub fn export_darknet(manifest: &DatasetManifest, order: &ClassOrder, dir: &Path) -> Result<ExportSummary> {
    let labels = dir.join("labels");
    std::fs::create_dir_all(&labels).map_err(|e| Error::io(&labels, e))?;
    let canonical = manifest.clone().canonical();
    let mut files = Vec::new();
    let mut images = String::new();
    for f in &canonical.frames {
        let path = labels.join(format!("{}.txt", frame_stem(&f.frame_id)));
        write_file(&path, &darknet_labels(f, order)?)?;
        files.push(path);
        let _ = writeln!(images, "{}", f.image_path);
    }
    let names = dir.join("classes.names");
    write_file(&names, &darknet_names(order))?;
    files.push(names);
    let list = dir.join("images.txt");
    write_file(&list, &images)?;
    files.push(list);
    Ok(ExportSummary {
        files,
        annotations: canonical.annotation_count(),
    })
}

/// Reads labels written by [`export_darknet`] back onto the frames of `manifest`.
///
/// Darknet keeps only class and box, so imported annotations get lanes and
/// track ids from their line position and full visibility.
pub fn import_darknet(manifest: &DatasetManifest, order: &ClassOrder, dir: &Path) -> Result<Vec<FrameRecord>> {
    let mut out = Vec::with_capacity(manifest.frames.len());
    for f in &manifest.frames {
        let path = dir.join("labels").join(format!("{}.txt", frame_stem(&f.frame_id)));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut g = f.clone();
        g.annotations = parse_darknet_labels(&text, f, order)?
            .into_iter()
            .enumerate()
            .map(|(i, (c, b))| Annotation::new(b, c, i as u32, &format!("darknet-{i}")))
            .collect();
        out.push(g);
    }
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// 1-indexed inclusive pixel span covering `[lo, hi)` on an axis of `size` pixels.
fn voc_span(lo: f64, hi: f64, size: u32) -> (u32, u32) {
    let size_f = size as f64;
    let mut first = lo.round().clamp(0.0, size_f - 1.0) as u32 + 1;
    let mut last = hi.round().clamp(1.0, size_f) as u32;
    if last < first {
        // sub-pixel box that rounding collapsed
        let base = lo.floor().clamp(0.0, size_f - 1.0) as u32;
        first = base + 1;
        last = base + 1;
    }
    (first, last)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocObject {
    pub name: String,
    pub truncated: bool,
    pub difficult: bool,
    pub xmin: u32,
    pub ymin: u32,
    pub xmax: u32,
    pub ymax: u32,
}

impl VocObject {
    /// Back to continuous coordinates: `[xmin - 1, xmax)`.
    pub fn to_box(&self) -> Result<BoundingBox> {
        BoundingBox::new(
            self.xmin as f64 - 1.0,
            self.ymin as f64 - 1.0,
            self.xmax as f64,
            self.ymax as f64,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocDocument {
    pub folder: String,
    pub filename: String,
    pub width: u32,
    pub height: u32,
    pub depth: u32,
    pub objects: Vec<VocObject>,
}

pub fn voc_objects(frame: &FrameRecord) -> Result<Vec<VocObject>> {
    check_dims(frame)?;
    Ok(frame
        .annotations
        .iter()
        .map(|a| {
            let b = &a.bbox;
            let (xmin, xmax) = voc_span(b.x_min(), b.x_max(), frame.width_px);
            let (ymin, ymax) = voc_span(b.y_min(), b.y_max(), frame.height_px);
            VocObject {
                name: a.swimmer_class.name().to_string(),
                truncated: a.truncated_by_camera,
                difficult: false,
                xmin,
                ymin,
                xmax,
                ymax,
            }
        })
        .collect())
}

pub fn voc_xml(frame: &FrameRecord, folder: &str) -> Result<String> {
    let objects = voc_objects(frame)?;
    let filename = Path::new(&frame.image_path)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| frame.image_path.clone());
    let mut out = String::new();
    out.push_str("<annotation>\n");
    let _ = writeln!(out, "\t<folder>{}</folder>", xml_escape(folder));
    let _ = writeln!(out, "\t<filename>{}</filename>", xml_escape(&filename));
    let _ = writeln!(out, "\t<path>{}</path>", xml_escape(&frame.image_path));
    out.push_str("\t<source>\n\t\t<database>Unknown</database>\n\t</source>\n");
    let _ = writeln!(
        out,
        "\t<size>\n\t\t<width>{}</width>\n\t\t<height>{}</height>\n\t\t<depth>3</depth>\n\t</size>",
        frame.width_px, frame.height_px
    );
    out.push_str("\t<segmented>0</segmented>\n");
    for o in &objects {
        out.push_str("\t<object>\n");
        let _ = writeln!(out, "\t\t<name>{}</name>", xml_escape(&o.name));
        out.push_str("\t\t<pose>Unspecified</pose>\n");
        let _ = writeln!(out, "\t\t<truncated>{}</truncated>", u8::from(o.truncated));
        let _ = writeln!(out, "\t\t<difficult>{}</difficult>", u8::from(o.difficult));
        let _ = writeln!(
            out,
            "\t\t<bndbox>\n\t\t\t<xmin>{}</xmin>\n\t\t\t<ymin>{}</ymin>\n\t\t\t<xmax>{}</xmax>\n\t\t\t<ymax>{}</ymax>\n\t\t</bndbox>",
            o.xmin, o.ymin, o.xmax, o.ymax
        );
        out.push_str("\t</object>\n");
    }
    out.push_str("</annotation>\n");
    Ok(out)
}

pub fn parse_voc_xml(text: &str) -> Result<VocDocument> {
    let err = |message: String| Error::Parse {
        location: "voc xml".into(),
        message,
    };
    let doc = roxmltree::Document::parse(text).map_err(|e| err(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "annotation" {
        return Err(err(format!("root element is <{}>", root.tag_name().name())));
    }
    fn child<'a, 'i>(n: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
        n.children().find(|c| c.has_tag_name(name))
    }
    let text_of = |n: roxmltree::Node, name: &str| -> String {
        child(n, name).and_then(|c| c.text()).unwrap_or("").trim().to_string()
    };
    let num = |n: roxmltree::Node, name: &str| -> Result<u32> {
        let t = text_of(n, name);
        // some tools write pixel corners as decimals
        t.parse::<u32>()
            .or_else(|_| t.parse::<f64>().map(|v| v.round() as u32))
            .map_err(|_| err(format!("<{name}> is not a number: `{t}`")))
    };
    let size = child(root, "size").ok_or_else(|| err("missing <size>".into()))?;
    let mut objects = Vec::new();
    for o in root.children().filter(|c| c.has_tag_name("object")) {
        let bb = child(o, "bndbox").ok_or_else(|| err("object without <bndbox>".into()))?;
        let flag = |name: &str| text_of(o, name) == "1";
        objects.push(VocObject {
            name: text_of(o, "name"),
            truncated: flag("truncated"),
            difficult: flag("difficult"),
            xmin: num(bb, "xmin")?,
            ymin: num(bb, "ymin")?,
            xmax: num(bb, "xmax")?,
            ymax: num(bb, "ymax")?,
        });
    }
    Ok(VocDocument {
        folder: text_of(root, "folder"),
        filename: text_of(root, "filename"),
        width: num(size, "width")?,
        height: num(size, "height")?,
        depth: num(size, "depth").unwrap_or(3),
        objects,
    })
}

/// Writes `<dir>/<frame>.xml` for every frame.
pub fn export_voc(manifest: &DatasetManifest, dir: &Path) -> Result<ExportSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let canonical = manifest.clone().canonical();
    let mut files = Vec::new();
    for f in &canonical.frames {
        let path = dir.join(format!("{}.xml", frame_stem(&f.frame_id)));
        write_file(&path, &voc_xml(f, &canonical.dataset_id)?)?;
        files.push(path);
    }
    Ok(ExportSummary {
        files,
        annotations: canonical.annotation_count(),
    })
}

/// Reads VOC files written by [`export_voc`] back onto the frames of `manifest`.
pub fn import_voc(manifest: &DatasetManifest, dir: &Path) -> Result<Vec<FrameRecord>> {
    let mut out = Vec::with_capacity(manifest.frames.len());
    for f in &manifest.frames {
        let path = dir.join(format!("{}.xml", frame_stem(&f.frame_id)));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let doc = parse_voc_xml(&text)?;
        let mut g = f.clone();
        g.annotations = doc
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let mut a = Annotation::new(o.to_box()?, o.name.parse()?, i as u32, &format!("voc-{i}"));
                a.truncated_by_camera = o.truncated;
                a.track_id = TrackId(format!("voc-{i}"));
                Ok(a)
            })
            .collect::<Result<_>>()?;
        out.push(g);
    }
    Ok(out)
}
