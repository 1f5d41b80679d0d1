mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{random_ap_instance, raster_iou, AP_CLASSES};
use swimset_core::metrics::{evaluate, iou, EvalOptions};
use swimset_core::BoundingBox;

fn int_box() -> impl Strategy<Value = [u32; 4]> {
    (0u32..100, 0u32..100, 1u32..=100, 1u32..=100).prop_map(|(x, y, w, h)| {
        let x = x.min(99);
        let y = y.min(99);
        [x, y, (x + w).min(100), (y + h).min(100)]
    })
}

fn to_box(r: [u32; 4]) -> BoundingBox {
    BoundingBox::new(r[0] as f64, r[1] as f64, r[2] as f64, r[3] as f64).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn iou_matches_pixel_counting(a in int_box(), b in int_box()) {
        let got = iou(&to_box(a), &to_box(b));
        prop_assert!((got - raster_iou(a, b)).abs() < 1e-6);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in int_box(), b in int_box()) {
        let (x, y) = (iou(&to_box(a), &to_box(b)), iou(&to_box(b), &to_box(a)));
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn ap_matches_threshold_sweep(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_ap_instance(&mut rng);
        let r = evaluate(&inst.frames, &inst.detections, &EvalOptions::default()).unwrap();
        for c in AP_CLASSES {
            let (got, want) = (r.class(c).ap, inst.oracle_ap(Some(c), 0.5));
            prop_assert_eq!(got.is_some(), want.is_some());
            if let (Some(g), Some(w)) = (got, want) {
                prop_assert!((g - w).abs() < 1e-9, "class {c}: {g} vs {w}");
            }
        }
        let want = inst.oracle_ap(None, 0.5).unwrap_or(0.0);
        prop_assert!((r.tracking_ap() - want).abs() < 1e-9);
    }

    #[test]
    fn ap_oracle_agrees_at_other_thresholds(seed in any::<u64>(), thr in 0.1f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_ap_instance(&mut rng);
        let r = evaluate(&inst.frames, &inst.detections, &EvalOptions::with_threshold(thr)).unwrap();
        let want = inst.oracle_ap(None, thr).unwrap_or(0.0);
        prop_assert!((r.tracking_ap() - want).abs() < 1e-9);
    }
}

#[test]
fn one_third_overlap_is_exact() {
    let a = to_box([0, 0, 10, 10]);
    let b = to_box([5, 0, 15, 10]);
    assert_eq!(iou(&a, &b), 1.0 / 3.0);
    assert_eq!(raster_iou([0, 0, 10, 10], [5, 0, 15, 10]), 1.0 / 3.0);
}
