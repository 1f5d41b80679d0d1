//! Subset-size sweep: scores one detection run per (subset method, training
//! fraction, test pool) and tabulates AP against the share of data used.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, read_detections, DetectionRecord, EvalOptions};
use crate::model::{FrameRecord, SwimmerClass};
use crate::sampler::SubsetMethod;

/// Training shares of the data-reduction experiment.
pub const DEFAULT_FRACTIONS: [f64; 8] = [0.01, 0.02, 0.05, 0.10, 0.25, 0.50, 0.75, 1.0];

pub const CSV_HEADER: &str = "method,fraction,test_pool,class,AP";

/// Canonical text for a fraction, used in file paths and CSV rows.
pub fn fraction_tag(fraction: f64) -> String {
    format!("{fraction}")
}

/// Ground truth for one held-out test set, e.g. same-pool or cross-pool footage.
#[derive(Debug, Clone)]
pub struct TestPool {
    pub tag: String,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub method: SubsetMethod,
    pub fraction: String,
    pub test_pool: String,
}

impl RunKey {
    pub fn new(method: SubsetMethod, fraction: f64, test_pool: &str) -> Self {
        Self {
            method,
            fraction: fraction_tag(fraction),
            test_pool: test_pool.to_string(),
        }
    }

    /// `<runs>/<method>/<fraction>/<test_pool>.tsv`
    pub fn path_in(&self, runs_dir: &Path) -> PathBuf {
        runs_dir
            .join(self.method.tag())
            .join(&self.fraction)
            .join(format!("{}.tsv", self.test_pool))
    }

    fn describe(&self) -> String {
        format!("({}, {}, {})", self.method, self.fraction, self.test_pool)
    }
}

pub type RunSet = HashMap<RunKey, Vec<DetectionRecord>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: SubsetMethod,
    pub fraction: f64,
    pub test_pool: String,
    /// Indexed by [`SwimmerClass::index`]; `None` where the pool has no ground truth.
    pub class_ap: Vec<Option<f64>>,
    pub map: f64,
    pub tracking_ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Long-format CSV: one line per row and AP column (six classes, tracking, mAP).
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        let ap = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        for r in &self.rows {
            let prefix = format!("{},{},{}", r.method, fraction_tag(r.fraction), r.test_pool);
            for c in SwimmerClass::ALL {
                let _ = writeln!(out, "{prefix},{c},{}", ap(r.class_ap[c.index()]));
            }
            let _ = writeln!(out, "{prefix},tracking,{}", r.tracking_ap);
            let _ = writeln!(out, "{prefix},mAP,{}", r.map);
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<11} {:>8} {:<18}", "method", "fraction", "test_pool");
        for c in SwimmerClass::ALL {
            let _ = write!(out, " {:>10}", c.name());
        }
        out.push_str(&format!(" {:>10} {:>10}\n", "tracking", "mAP"));
        for r in &self.rows {
            let _ = write!(
                out,
                "{:<11} {:>8} {:<18}",
                r.method.tag(),
                fraction_tag(r.fraction),
                r.test_pool
            );
            for v in &r.class_ap {
                let _ = write!(out, " {:>10}", v.map_or("-".to_string(), |x| format!("{x:.4}")));
            }
            let _ = writeln!(out, " {:>10.4} {:>10.4}", r.tracking_ap, r.map);
        }
        out
    }
}

/// Evaluates every (method, fraction, pool) cell in parallel.
///
/// Rows come out ordered by pool, method, then fraction as given. Missing
/// runs are all reported together.
pub fn run_sweep(
    pools: &[TestPool],
    fractions: &[f64],
    methods: &[SubsetMethod],
    runs: &RunSet,
    options: &EvalOptions,
) -> Result<SweepTable> {
    let mut cells = Vec::new();
    let mut missing = Vec::new();
    for pool in pools {
        for &method in methods {
            for &fraction in fractions {
                let key = RunKey::new(method, fraction, &pool.tag);
                match runs.get(&key) {
                    Some(dets) => cells.push((pool, method, fraction, dets)),
                    None => missing.push(key.describe()),
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingRuns(missing));
    }
    let rows = cells
        .par_iter()
        .map(|(pool, method, fraction, dets)| {
            let report = evaluate(&pool.frames, dets, options)?;
            Ok(SweepRow {
                method: *method,
                fraction: *fraction,
                test_pool: pool.tag.clone(),
                class_ap: report.per_class.iter().map(|c| c.ap).collect(),
                map: report.map,
                tracking_ap: report.tracking_ap(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

/// Loads `<runs>/<method>/<fraction>/<pool>.tsv` for every expected cell,
/// failing with the full list of absent files.
pub fn load_runs(runs_dir: &Path, pools: &[TestPool], fractions: &[f64], methods: &[SubsetMethod]) -> Result<RunSet> {
    let mut runs = RunSet::new();
    let mut missing = Vec::new();
    for pool in pools {
        for &method in methods {
            for &fraction in fractions {
                let key = RunKey::new(method, fraction, &pool.tag);
                let path = key.path_in(runs_dir);
                if !path.is_file() {
                    missing.push(format!("{} at {}", key.describe(), path.display()));
                    continue;
                }
                let dets = read_detections(&path)?;
                runs.insert(key, dets);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingRuns(missing));
    }
    Ok(runs)
}
