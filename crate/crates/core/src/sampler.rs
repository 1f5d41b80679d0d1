//! Frame sampling for annotation and subset generation for data-reduction runs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrameRange, FrameRecord, SwimmerClass};

/// Annotate every `base_stride`-th frame, and every `dive_stride`-th frame
/// inside declared dive intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub base_stride: u64,
    pub dive_stride: u64,
    #[serde(default)]
    pub seed: u64,
}

impl SamplingPolicy {
    pub fn new(base_stride: u64, dive_stride: u64) -> Result<Self> {
        let p = Self {
            base_stride,
            dive_stride,
            seed: 0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_stride == 0 || self.dive_stride == 0 {
            return Err(Error::arg("stride", "strides must be at least 1"));
        }
        if self.dive_stride > self.base_stride {
            return Err(Error::arg(
                "dive_stride",
                format!(
                    "dive stride {} exceeds base stride {}",
                    self.dive_stride, self.base_stride
                ),
            ));
        }
        Ok(())
    }

    pub fn selects(&self, index: u64, dive_ranges: &[FrameRange]) -> bool {
        let stride = if dive_ranges.iter().any(|r| r.contains(index)) {
            self.dive_stride
        } else {
            self.base_stride
        };
        index.is_multiple_of(stride)
    }
}

impl Default for SamplingPolicy {
    /// Every fifteenth frame, every fifth during dives.
    fn default() -> Self {
        Self {
            base_stride: 15,
            dive_stride: 5,
            seed: 0,
        }
    }
}

/// Sorts `ranges` and rejects inverted or overlapping intervals.
pub fn check_ranges(ranges: &[FrameRange]) -> Result<Vec<FrameRange>> {
    let mut sorted = ranges.to_vec();
    sorted.sort();
    for r in &sorted {
        if r.start > r.end {
            return Err(Error::MalformedRanges(format!(
                "range [{}, {}] is inverted",
                r.start, r.end
            )));
        }
    }
    for w in sorted.windows(2) {
        if w[1].start <= w[0].end {
            return Err(Error::MalformedRanges(format!(
                "ranges [{}, {}] and [{}, {}] overlap",
                w[0].start, w[0].end, w[1].start, w[1].end
            )));
        }
    }
    Ok(sorted)
}

/// Frame indices to annotate, sorted and deduplicated.
pub fn select_frames(frame_indices: &[u64], policy: &SamplingPolicy, dive_ranges: &[FrameRange]) -> Result<Vec<u64>> {
    policy.validate()?;
    let ranges = check_ranges(dive_ranges)?;
    let mut out: Vec<u64> = frame_indices
        .iter()
        .copied()
        .filter(|&i| policy.selects(i, &ranges))
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMethod {
    /// Uniform sample of frames.
    RandomFrames,
    /// Same sampled share of every dominant-class stratum.
    StratifiedByClass,
}

impl SubsetMethod {
    pub const ALL: [SubsetMethod; 2] = [SubsetMethod::RandomFrames, SubsetMethod::StratifiedByClass];

    pub fn tag(self) -> &'static str {
        match self {
            SubsetMethod::RandomFrames => "random",
            SubsetMethod::StratifiedByClass => "stratified",
        }
    }
}

impl fmt::Display for SubsetMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SubsetMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "random_frames" => Ok(SubsetMethod::RandomFrames),
            "stratified" | "stratified_by_class" => Ok(SubsetMethod::StratifiedByClass),
            _ => Err(Error::arg("method", format!("unknown subset method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub method: SubsetMethod,
    pub fraction: f64,
    pub seed: u64,
}

impl SubsetSpec {
    pub fn new(method: SubsetMethod, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::arg("fraction", format!("{fraction} outside (0, 1]")));
        }
        Ok(Self { method, fraction, seed })
    }
}

/// `round(fraction * n)` with halves rounded up.
///
/// The small tolerance absorbs products such as `0.1 * 25 = 2.5000000000000004`
/// or `0.3 * 5 = 1.4999999999999998` landing beside the half.
pub fn sample_size(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    ((exact + 0.5 + 1e-9).floor() as usize).min(n)
}

/// Stratum key of a frame: its dominant class, or `None` for frames without annotations.
pub type Stratum = Option<SwimmerClass>;

/// Assigns each frame to the most frequent class among its annotations.
///
/// Ties go to the class with fewer annotations across the whole input, then
/// to the earlier class in race order.
pub fn assign_strata(frames: &[FrameRecord]) -> Vec<Stratum> {
    let mut global = [0u64; SwimmerClass::COUNT];
    for a in frames.iter().flat_map(|f| &f.annotations) {
        global[a.swimmer_class.index()] += 1;
    }
    frames
        .iter()
        .map(|f| {
            let mut local = [0u64; SwimmerClass::COUNT];
            for a in &f.annotations {
                local[a.swimmer_class.index()] += 1;
            }
            SwimmerClass::ALL
                .into_iter()
                .filter(|c| local[c.index()] > 0)
                .max_by(|a, b| {
                    local[a.index()]
                        .cmp(&local[b.index()])
                        .then(global[b.index()].cmp(&global[a.index()]))
                        .then(b.index().cmp(&a.index()))
                })
        })
        .collect()
}

/// Frame ids of a seeded subset, in input order.
pub fn make_subset(frames: &[FrameRecord], spec: &SubsetSpec) -> Result<Vec<String>> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("make_subset needs at least one frame"));
    }
    let spec = SubsetSpec::new(spec.method, spec.fraction, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen: Vec<usize> = match spec.method {
        SubsetMethod::RandomFrames => {
            let k = sample_size(spec.fraction, frames.len());
            index::sample(&mut rng, frames.len(), k).into_vec()
        }
        SubsetMethod::StratifiedByClass => {
            let mut strata: BTreeMap<Stratum, Vec<usize>> = BTreeMap::new();
            for (i, s) in assign_strata(frames).into_iter().enumerate() {
                strata.entry(s).or_default().push(i);
            }
            let mut out = Vec::new();
            for members in strata.values() {
                let k = sample_size(spec.fraction, members.len());
                out.extend(
                    index::sample(&mut rng, members.len(), k)
                        .into_iter()
                        .map(|j| members[j]),
                );
            }
            out
        }
    };
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| frames[i].frame_id.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Annotation, BoundingBox};
    use proptest::prelude::*;

    fn frames_with_classes(classes: &[Vec<SwimmerClass>]) -> Vec<FrameRecord> {
        classes
            .iter()
            .enumerate()
            .map(|(i, cs)| {
                let mut f = FrameRecord::new(&format!("f{i:05}"), "v", i as u64, 640, 480);
                for (j, c) in cs.iter().enumerate() {
                    let b = BoundingBox::new(j as f64 * 10.0, 0.0, j as f64 * 10.0 + 5.0, 5.0).unwrap();
                    f.annotations.push(Annotation::new(b, *c, j as u32, &format!("t{j}")));
                }
                f
            })
            .collect()
    }

    #[test]
    fn every_third_frame() {
        let idx: Vec<u64> = (0..30).collect();
        let p = SamplingPolicy::new(3, 1).unwrap();
        let got = select_frames(&idx, &p, &[]).unwrap();
        assert_eq!(got, (0..30).step_by(3).collect::<Vec<u64>>());
        assert_eq!(got.len(), 10);
    }

    #[test]
    fn fifteen_with_five_inside_dive_range() {
        let idx: Vec<u64> = (0..30).collect();
        let p = SamplingPolicy::new(15, 5).unwrap();
        // hand enumeration: inside [0,9] multiples of 5 are 0 and 5;
        // outside, multiples of 15 in [10,29] are 15 only.
        let got = select_frames(&idx, &p, &[FrameRange::new(0, 9)]).unwrap();
        assert_eq!(got, vec![0, 5, 15]);
    }

    #[test]
    fn stride_one_is_identity() {
        let idx = vec![0, 1, 2, 7, 8, 100];
        let p = SamplingPolicy::new(1, 1).unwrap();
        assert_eq!(select_frames(&idx, &p, &[]).unwrap(), idx);
    }

    #[test]
    fn malformed_ranges_and_policies() {
        let p = SamplingPolicy::new(3, 1).unwrap();
        assert!(select_frames(&[0, 1], &p, &[FrameRange::new(5, 2)]).is_err());
        assert!(select_frames(&[0, 1], &p, &[FrameRange::new(0, 5), FrameRange::new(5, 9)]).is_err());
        assert!(select_frames(&[0, 1], &p, &[FrameRange::new(6, 9), FrameRange::new(0, 5)]).is_ok());
        assert!(SamplingPolicy::new(0, 0).is_err());
        assert!(SamplingPolicy::new(3, 5).is_err());
    }

    #[test]
    fn sample_size_rounds_half_up() {
        assert_eq!(sample_size(0.1, 3000), 300);
        assert_eq!(sample_size(0.5, 7), 4);
        assert_eq!(sample_size(0.5, 4), 2);
        assert_eq!(sample_size(0.3, 5), 2);
        assert_eq!(sample_size(0.01, 10), 0);
        assert_eq!(sample_size(1.0, 13), 13);
    }

    #[test]
    fn random_subset_size_and_determinism() {
        let frames = frames_with_classes(&vec![vec![SwimmerClass::Swimming]; 3000]);
        let spec = SubsetSpec::new(SubsetMethod::RandomFrames, 0.10, 7).unwrap();
        let a = make_subset(&frames, &spec).unwrap();
        assert_eq!(a.len(), 300);
        assert_eq!(a, make_subset(&frames, &spec).unwrap());
        let other = SubsetSpec { seed: 8, ..spec };
        assert_ne!(a, make_subset(&frames, &other).unwrap());
    }

    #[test]
    fn full_fraction_returns_everything() {
        let frames = frames_with_classes(&[
            vec![SwimmerClass::Diving],
            vec![],
            vec![SwimmerClass::Swimming, SwimmerClass::Turning],
        ]);
        let all: Vec<String> = frames.iter().map(|f| f.frame_id.clone()).collect();
        for method in SubsetMethod::ALL {
            let spec = SubsetSpec::new(method, 1.0, 1).unwrap();
            assert_eq!(make_subset(&frames, &spec).unwrap(), all);
        }
    }

    #[test]
    fn stratified_ten_and_four() {
        let mut classes = vec![vec![SwimmerClass::Swimming]; 10];
        classes.extend(vec![vec![SwimmerClass::Diving]; 4]);
        let frames = frames_with_classes(&classes);
        for seed in 0..50 {
            let spec = SubsetSpec::new(SubsetMethod::StratifiedByClass, 0.5, seed).unwrap();
            let ids = make_subset(&frames, &spec).unwrap();
            assert_eq!(ids.len(), 7);
            let swimming = ids.iter().filter(|id| id.as_str() < "f00010").count();
            assert_eq!((swimming, ids.len() - swimming), (5, 2));
        }
    }

    #[test]
    fn dominant_class_tie_goes_to_rarer_class() {
        let frames = frames_with_classes(&[
            vec![SwimmerClass::Swimming, SwimmerClass::Diving],
            vec![SwimmerClass::Swimming, SwimmerClass::Swimming, SwimmerClass::Diving],
            vec![],
        ]);
        assert_eq!(
            assign_strata(&frames),
            vec![Some(SwimmerClass::Diving), Some(SwimmerClass::Swimming), None]
        );
    }

    #[test]
    fn subset_errors() {
        assert!(make_subset(&[], &SubsetSpec::new(SubsetMethod::RandomFrames, 0.5, 0).unwrap()).is_err());
        assert!(SubsetSpec::new(SubsetMethod::RandomFrames, 0.0, 0).is_err());
        assert!(SubsetSpec::new(SubsetMethod::RandomFrames, 1.01, 0).is_err());
    }

    proptest! {
        #[test]
        fn selection_is_subset_and_keeps_zero(
            len in 1u64..300, base in 1u64..20, dive in 1u64..20, a in 0u64..300, w in 0u64..50
        ) {
            prop_assume!(dive <= base);
            let idx: Vec<u64> = (0..len).collect();
            let p = SamplingPolicy::new(base, dive).unwrap();
            let got = select_frames(&idx, &p, &[FrameRange::new(a, a + w)]).unwrap();
            prop_assert!(got.iter().all(|i| idx.contains(i)));
            prop_assert_eq!(got.first(), Some(&0));
            prop_assert!(got.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
