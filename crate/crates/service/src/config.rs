use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swimset_core::metrics::{EvalOptions, DEFAULT_IOU_THRESHOLD};
use swimset_core::sampler::SamplingPolicy;
use swimset_core::validation::{ValidationRules, DEFAULT_MIN_VISIBLE_FRACTION};

use crate::error::{ServiceError, ServiceResult};

/// Environment variable naming the directory relative paths are resolved against.
pub const DATA_ROOT_ENV: &str = "SWIMSET_DATA_ROOT";

/// Tunable thresholds, read from a TOML file. Missing keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub iou_threshold: f64,
    pub min_visible_fraction: f64,
    pub base_stride: u64,
    pub dive_stride: u64,
    pub seconds_per_box: f64,
}

impl Default for Config {
    fn default() -> Self {
        let policy = SamplingPolicy::default();
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            min_visible_fraction: DEFAULT_MIN_VISIBLE_FRACTION,
            base_stride: policy.base_stride,
            dive_stride: policy.dive_stride,
            seconds_per_box: 2.0,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> ServiceResult<Self> {
        let c: Config = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> ServiceResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> ServiceResult<()> {
        let bad = |m: String| Err(ServiceError::Config(m));
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return bad(format!("iou_threshold {} outside (0, 1)", self.iou_threshold));
        }
        if !(self.min_visible_fraction > 0.0 && self.min_visible_fraction <= 1.0) {
            return bad(format!(
                "min_visible_fraction {} outside (0, 1]",
                self.min_visible_fraction
            ));
        }
        if !(self.seconds_per_box.is_finite() && self.seconds_per_box > 0.0) {
            return bad(format!("seconds_per_box {} must be positive", self.seconds_per_box));
        }
        self.policy()?;
        Ok(())
    }

    pub fn rules(&self) -> ValidationRules {
        ValidationRules {
            min_visible_fraction: self.min_visible_fraction,
        }
    }

    pub fn policy(&self) -> swimset_core::Result<SamplingPolicy> {
        SamplingPolicy::new(self.base_stride, self.dive_stride)
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions::with_threshold(self.iou_threshold)
    }
}

/// Resolves `path` against the data root when it is relative and the root is set.
pub fn resolve(path: &Path, data_root: Option<&Path>) -> PathBuf {
    match data_root {
        Some(root) if path.is_relative() => root.join(path),
        _ => path.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c = Config::from_toml("iou_threshold = 0.75\nbase_stride = 30\n").unwrap();
        assert_eq!(c.iou_threshold, 0.75);
        assert_eq!(c.base_stride, 30);
        assert_eq!(c.dive_stride, 5);
        assert_eq!(c.min_visible_fraction, 0.10);
    }

    #[test]
    fn rejects_bad_values_and_unknown_keys() {
        assert!(Config::from_toml("iou_threshold = 1.5").is_err());
        assert!(Config::from_toml("base_stride = 5\ndive_stride = 10").is_err());
        assert!(Config::from_toml("iou = 0.5").is_err());
    }

    #[test]
    fn relative_paths_use_the_root() {
        let root = Path::new("/data");
        assert_eq!(resolve(Path::new("m.json"), Some(root)), PathBuf::from("/data/m.json"));
        assert_eq!(resolve(Path::new("/x/m.json"), Some(root)), PathBuf::from("/x/m.json"));
        assert_eq!(resolve(Path::new("m.json"), None), PathBuf::from("m.json"));
    }
}
