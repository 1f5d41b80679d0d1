mod support;

use std::path::Path;

use swimset_core::model::*;
use swimset_core::storage::*;
use swimset_core::validation::ValidationRules;
use swimset_core::Error;

fn golden_frame() -> FrameRecord {
    let mut f = FrameRecord::new("race-7/frame-000042", "race-7", 42, 1920, 1080);
    f.image_path = "frames/race-7/frame-000042.jpg".into();
    let rows = [
        (SwimmerClass::Diving, 100.4, 200.6, 180.2, 260.0, 3, false),
        (SwimmerClass::Underwater, 0.0, 500.0, 64.5, 540.25, 4, true),
        (SwimmerClass::Swimming, 1800.0, 1000.0, 1920.0, 1080.0, 5, false),
    ];
    for (c, x0, y0, x1, y1, lane, trunc) in rows {
        let mut a = Annotation::new(
            BoundingBox::new(x0, y0, x1, y1).unwrap(),
            c,
            lane,
            &format!("lane-{lane}"),
        );
        a.truncated_by_camera = trunc;
        f.annotations.push(a);
    }
    f
}

#[test]
fn voc_matches_golden_file() {
    let golden =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/frame-000042.xml")).unwrap();
    assert_eq!(voc_xml(&golden_frame(), "race-7").unwrap(), golden);
    let doc = parse_voc_xml(&golden).unwrap();
    assert_eq!((doc.width, doc.height, doc.depth), (1920, 1080, 3));
    assert_eq!(doc.objects.len(), 3);
    assert_eq!(doc.objects[1].name, "underwater");
    assert!(doc.objects[1].truncated);
    assert_eq!((doc.objects[2].xmin, doc.objects[2].xmax), (1801, 1920));
}

#[test]
fn native_manifest_round_trip_is_identity() {
    let m = support::synthetic_manifest(600, 11).canonical();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    save_manifest(&m, &path).unwrap();
    let loaded = load_manifest(&path).unwrap();
    assert_eq!(loaded, m);
    save_manifest(&loaded, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), manifest_to_string(&m));
}

#[test]
fn saving_is_order_independent() {
    let m = support::synthetic_manifest(90, 3);
    let mut shuffled = m.clone();
    shuffled.frames.reverse();
    shuffled.videos.reverse();
    for f in &mut shuffled.frames {
        f.annotations.reverse();
    }
    assert_eq!(manifest_to_string(&m), manifest_to_string(&shuffled));
}

#[test]
fn darknet_round_trip_within_normalized_tolerance() {
    let m = support::synthetic_manifest(300, 5).canonical();
    let order = ClassOrder::parse("swimming,turning,underwater,diving,finishing,on_blocks").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = export_darknet(&m, &order, dir.path()).unwrap();
    assert_eq!(summary.annotations, m.annotation_count());
    let names = std::fs::read_to_string(dir.path().join("classes.names")).unwrap();
    assert_eq!(names.lines().next(), Some("swimming"));
    let back = import_darknet(&m, &order, dir.path()).unwrap();
    for (f, g) in m.frames.iter().zip(&back) {
        assert_eq!(f.annotations.len(), g.annotations.len());
        let (w, h) = (f.width_px as f64, f.height_px as f64);
        for (a, b) in f.annotations.iter().zip(&g.annotations) {
            assert_eq!(a.swimmer_class, b.swimmer_class);
            for (x, y, s) in [
                (a.bbox.x_min(), b.bbox.x_min(), w),
                (a.bbox.y_min(), b.bbox.y_min(), h),
                (a.bbox.x_max(), b.bbox.x_max(), w),
                (a.bbox.y_max(), b.bbox.y_max(), h),
            ] {
                assert!((x / s - y / s).abs() <= 1e-4, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn voc_round_trip_within_a_pixel() {
    let m = support::synthetic_manifest(300, 6).canonical();
    let dir = tempfile::tempdir().unwrap();
    export_voc(&m, dir.path()).unwrap();
    let back = import_voc(&m, dir.path()).unwrap();
    for (f, g) in m.frames.iter().zip(&back) {
        for (a, b) in f.annotations.iter().zip(&g.annotations) {
            assert_eq!(a.swimmer_class, b.swimmer_class);
            assert_eq!(a.truncated_by_camera, b.truncated_by_camera);
            assert!((a.bbox.x_min() - b.bbox.x_min()).abs() <= 1.0);
            assert!((a.bbox.y_min() - b.bbox.y_min()).abs() <= 1.0);
            assert!((a.bbox.x_max() - b.bbox.x_max()).abs() <= 1.0);
            assert!((a.bbox.y_max() - b.bbox.y_max()).abs() <= 1.0);
        }
    }
}

#[test]
fn schema_errors_carry_the_field_path() {
    let m = support::synthetic_manifest(3, 1);
    let text =
        manifest_to_string(&m).replacen("\"swimmer_class\": \"on_blocks\"", "\"swimmer_class\": \"floating\"", 1);
    match manifest_from_str(&text, &ValidationRules::default()) {
        Err(Error::Schema { path, .. }) => assert!(path.starts_with("frames[0].annotations[")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_box_on_load_reports_location() {
    let mut m = support::synthetic_manifest(3, 1).canonical();
    m.frames[1].annotations[0].visible_fraction = 0.05;
    let text = manifest_to_string(&m);
    match manifest_from_str(&text, &ValidationRules::default()) {
        Err(Error::InvalidManifest { path, count, .. }) => {
            assert_eq!(path, "frames[1].annotations[0]");
            assert_eq!(count, 1);
        }
        other => panic!("{other:?}"),
    }
}
