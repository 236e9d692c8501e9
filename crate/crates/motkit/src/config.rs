//! Configuration profiles: named presets plus a flat `key = value` override
//! file with dotted keys (`model.d`, `train.lr`, `assoc.iou_threshold`, ...).

use crate::assoc::CostWeights;
use crate::model::EncoderConfig;
use crate::tracker::{AssocConfig, LifecycleConfig, OcclusionHistory};
use crate::train::TrainConfig;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown profile '{0}' (expected 'paper', 'toy', or a file path)")]
    UnknownProfile(String),
    #[error("config file {file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("io error on {file}: {source}")]
    Io { file: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    Kalman,
    Transformer,
}

impl PredictorKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "kalman" => Some(Self::Kalman),
            "transformer" => Some(Self::Transformer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigProfile {
    pub name: String,
    pub model: EncoderConfig,
    pub train: TrainConfig,
    pub assoc: AssocConfig,
    pub lifecycle: LifecycleConfig,
    pub predictor: PredictorKind,
}

impl ConfigProfile {
    pub fn paper() -> Self {
        Self {
            name: "paper".into(),
            model: EncoderConfig::paper(),
            train: TrainConfig::paper(),
            assoc: AssocConfig::default(),
            lifecycle: LifecycleConfig::default(),
            predictor: PredictorKind::Transformer,
        }
    }

    pub fn toy() -> Self {
        Self {
            name: "toy".into(),
            model: EncoderConfig::toy(),
            train: TrainConfig::toy(),
            assoc: AssocConfig::default(),
            lifecycle: LifecycleConfig::default(),
            predictor: PredictorKind::Transformer,
        }
    }

    /// Resolve a profile argument: a built-in name or a path to an override
    /// file (which starts from the toy profile).
    pub fn resolve(arg: &str) -> Result<Self, ConfigError> {
        match arg {
            "paper" => Ok(Self::paper()),
            "toy" => Ok(Self::toy()),
            other => {
                let path = Path::new(other);
                if path.exists() {
                    Self::from_file(path)
                } else {
                    Err(ConfigError::UnknownProfile(other.into()))
                }
            }
        }
    }

    /// Parse a flat override file on top of the toy profile. A `base = paper`
    /// line switches the starting point.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { file: file.clone(), source })?;
        Self::from_str(&text, &file)
    }

    pub fn from_str(text: &str, file: &str) -> Result<Self, ConfigError> {
        let mut profile = if let Some(base_line) = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .find(|l| l.starts_with("base"))
        {
            let value = base_line.split('=').nth(1).map(str::trim).unwrap_or("");
            match value {
                "paper" => Self::paper(),
                "toy" | "" => Self::toy(),
                other => return Err(ConfigError::UnknownProfile(other.into())),
            }
        } else {
            Self::toy()
        };
        profile.name = file.to_string();

        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ConfigError::Parse { file: file.into(), line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected 'key = value'".into()))?;
            let key = key.trim();
            let value = value.trim();
            let fnum = || value.parse::<f64>().map_err(|_| err(format!("bad number '{value}'")));
            let unum = || value.parse::<usize>().map_err(|_| err(format!("bad integer '{value}'")));
            match key {
                "base" => {}
                "name" => profile.name = value.into(),
                "model.d" => profile.model.d = unum()?,
                "model.layers" => profile.model.n_layers = unum()?,
                "model.heads" => profile.model.n_heads = unum()?,
                "model.ffn_dim" => profile.model.ffn_dim = unum()?,
                "model.head_hidden" => profile.model.head_hidden = unum()?,
                "model.t" => profile.model.t = unum()?,
                "model.spatial_scale" => profile.model.spatial_scale = fnum()?,
                "train.lr" => profile.train.lr = fnum()?,
                "train.epochs" => profile.train.epochs = unum()?,
                "train.batch_size" => profile.train.batch_size = unum()?,
                "train.mask_prob" => profile.train.mask_prob = fnum()?,
                "train.seed" => {
                    profile.train.seed =
                        value.parse().map_err(|_| err(format!("bad seed '{value}'")))?
                }
                "train.clip_norm" => {
                    profile.train.clip_norm = if value == "off" { None } else { Some(fnum()?) }
                }
                "assoc.w_iou" => profile.assoc.weights.w_iou = fnum()?,
                "assoc.w_l1" => profile.assoc.weights.w_l1 = fnum()?,
                "assoc.w_dtheta" => profile.assoc.weights.w_dtheta = fnum()?,
                "assoc.cost_profile" => {
                    profile.assoc.weights = CostWeights::by_name(value)
                        .ok_or_else(|| err(format!("unknown cost profile '{value}'")))?
                }
                "assoc.iou_threshold" => profile.assoc.iou_threshold = fnum()?,
                "lifecycle.min_hits" => profile.lifecycle.min_hits = unum()? as u32,
                "lifecycle.max_age" => profile.lifecycle.max_age = unum()? as u32,
                "lifecycle.conf_gate" => profile.lifecycle.confidence_gate = fnum()?,
                "lifecycle.occlusion_history" => {
                    profile.lifecycle.occlusion_history = match value {
                        "mask" => OcclusionHistory::MaskSlot,
                        "prediction" => OcclusionHistory::Prediction,
                        other => return Err(err(format!("unknown occlusion_history '{other}'"))),
                    }
                }
                "predictor" => {
                    profile.predictor = PredictorKind::parse(value)
                        .ok_or_else(|| err(format!("unknown predictor '{value}'")))?
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.train.lr <= 0.0 && self.train.epochs > 0 {
            // lr = 0 is allowed (frozen runs) but negative is not
            if self.train.lr < 0.0 {
                return Err(ConfigError::Invalid("train.lr must be >= 0".into()));
            }
        }
        if !(0.0..1.0).contains(&self.train.mask_prob) {
            return Err(ConfigError::Invalid(format!(
                "train.mask_prob {} outside [0, 1)",
                self.train.mask_prob
            )));
        }
        if !(0.0..1.0).contains(&self.assoc.iou_threshold) {
            return Err(ConfigError::Invalid(format!(
                "assoc.iou_threshold {} outside [0, 1)",
                self.assoc.iou_threshold
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pins every paper-profile constant.
    #[test]
    fn paper_profile_constants() {
        let p = ConfigProfile::paper();
        assert_eq!(p.model.d, 512);
        assert_eq!(p.model.n_layers, 6);
        assert_eq!(p.model.n_heads, 8);
        assert_eq!(p.model.t, 30);
        assert_eq!(p.train.mask_prob, 0.1);
        assert_eq!(p.train.lr, 1e-4);
        assert_eq!(p.train.epochs, 50);
        assert_eq!(p.train.batch_size, 512);
        // best-performing association cost pairs IoU with L1
        assert_eq!(p.assoc.weights, CostWeights::iou_l1());
    }

    #[test]
    fn toy_profile_is_ci_scale() {
        let p = ConfigProfile::toy();
        assert!(p.model.d <= 64);
        assert!(p.model.n_layers <= 2);
        assert_eq!(p.model.t, 10);
        p.validate().unwrap();
    }

    #[test]
    fn file_overrides_on_toy_base() {
        let text = "model.t = 20\ntrain.epochs = 4\nassoc.cost_profile = iou\npredictor = kalman\n";
        let p = ConfigProfile::from_str(text, "inline").unwrap();
        assert_eq!(p.model.t, 20);
        assert_eq!(p.model.d, 64); // toy base preserved
        assert_eq!(p.train.epochs, 4);
        assert_eq!(p.assoc.weights, CostWeights::iou_only());
        assert_eq!(p.predictor, PredictorKind::Kalman);
    }

    #[test]
    fn paper_base_selectable() {
        let p = ConfigProfile::from_str("base = paper\nmodel.t = 40\n", "inline").unwrap();
        assert_eq!(p.model.d, 512);
        assert_eq!(p.model.t, 40);
    }

    #[test]
    fn bad_keys_and_values_are_rejected_with_position() {
        let err = ConfigProfile::from_str("model.q = 3\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("cfg:1"), "{err}");
        let err = ConfigProfile::from_str("model.d = many\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("bad integer"), "{err}");
        assert!(ConfigProfile::from_str("train.mask_prob = 1.5\n", "cfg").is_err());
        assert!(ConfigProfile::resolve("nonsense").is_err());
    }
}
