use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::cells::CellKind;
use crate::error::{Error, Result};
use crate::metrics::Reference;
use crate::perception::ConvHeadConfig;
use crate::simulator::{CameraConfig, DatasetConfig, ExecutionNoise, RoadConfig, Season};
use crate::training::TrainingConfig;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Everything needed to reproduce one experiment. Every top-level key is
/// required; nested sections fall back to their documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    /// Cell kinds trained and evaluated, in order.
    pub kinds: Vec<CellKind>,
    pub m: usize,
    /// Feature size; must equal `head.features`.
    pub n: usize,
    pub dt: f64,
    pub training: TrainingConfig,
    pub road: RoadConfig,
    pub road_seeds: Vec<u64>,
    /// Held-out roads used only for closed-loop evaluation.
    pub eval_road_seeds: Vec<u64>,
    pub seasons: Vec<Season>,
    pub execution_noise: ExecutionNoise,
    pub dataset: DatasetConfig,
    pub camera: CameraConfig,
    pub head: ConvHeadConfig,
    pub noise_variances: Vec<f64>,
    /// Frames per (model, season) used for the SSIM distributions.
    pub ssim_frames: usize,
    /// Saliency images written per (model, season).
    pub saliency_images: usize,
    pub reference: Reference,
    pub output_dir: PathBuf,
}

/// Parses `key.path=value`; the value is read as JSON when possible and as
/// a bare string otherwise.
pub fn parse_override(text: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{text}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{text}` has an empty key segment")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok((path, value))
}

fn apply_override(root: &mut Value, path: &[String], value: Value) -> Result<()> {
    let mut cur = root;
    for (i, seg) in path.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not an object", path[..i].join("."))))?;
        if i + 1 == path.len() {
            obj.insert(seg.clone(), value);
            return Ok(());
        }
        cur = obj.entry(seg.clone()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with_overrides(text, &[])
    }

    /// Parses `text`, applies `key=value` overrides, then validates.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut root: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut root, &path, value)?;
        }
        let cfg: ExperimentConfig = serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.format_version != CONFIG_FORMAT_VERSION {
            return bad(format!("format_version {} is not supported", self.format_version));
        }
        if self.kinds.is_empty() {
            return bad("kinds must list at least one cell kind".into());
        }
        if self.m == 0 {
            return bad("m must be positive".into());
        }
        if self.n != self.head.features {
            return bad(format!("n = {} but head.features = {}", self.n, self.head.features));
        }
        if (self.head.height, self.head.width, self.head.in_channels) != (self.camera.height, self.camera.width, 1) {
            return bad("head input shape must match the single-channel camera frame".into());
        }
        self.head.shapes().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive".into());
        }
        self.training.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.training.sequence_length != self.dataset.window {
            return bad(format!(
                "training.sequence_length = {} but dataset.window = {}",
                self.training.sequence_length, self.dataset.window
            ));
        }
        if self.road_seeds.is_empty() || self.eval_road_seeds.is_empty() || self.seasons.is_empty() {
            return bad("road_seeds, eval_road_seeds and seasons must be non-empty".into());
        }
        if let Some(s) = self.eval_road_seeds.iter().find(|s| self.road_seeds.contains(s)) {
            return bad(format!("evaluation road seed {s} is also a training road"));
        }
        if self.noise_variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("noise_variances must be finite and non-negative".into());
        }
        if self.ssim_frames == 0 {
            return bad("ssim_frames must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> String {
        serde_json::json!({
            "format_version": 1,
            "kinds": ["CTRNN", "LRC_SA"],
            "m": 19,
            "n": 64,
            "dt": 1.0,
            "training": {"epochs": 2},
            "road": {"length": 300.0, "kappa_max": 0.05, "smoothness": 1.0},
            "road_seeds": [0, 1],
            "eval_road_seeds": [100],
            "seasons": ["summer", "winter"],
            "execution_noise": {"std": 0.2, "correlation": 0.95, "guard": 0.4},
            "dataset": {"window": 32, "stride": 16, "train_fraction": 0.7, "validation_fraction": 0.15},
            "camera": CameraConfig::default(),
            "head": ConvHeadConfig::default(),
            "noise_variances": [0.0, 0.1, 0.2],
            "ssim_frames": 100,
            "saliency_images": 4,
            "reference": "prediction",
            "output_dir": "out"
        })
        .to_string()
    }

    #[test]
    fn parses_and_hashes_deterministically() {
        let a = ExperimentConfig::from_json(&base()).unwrap();
        assert_eq!(a.training.epochs, 2);
        assert_eq!(a.training.batch_size, TrainingConfig::default().batch_size);
        assert_eq!(a.hash().unwrap(), ExperimentConfig::from_json(&a.to_json().unwrap()).unwrap().hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn overrides() {
        let o = vec![
            "training.epochs=7".to_string(),
            "kinds=[\"LTC\"]".to_string(),
            "output_dir=elsewhere".to_string(),
            "road.length=120".to_string(),
        ];
        let c = ExperimentConfig::from_json_with_overrides(&base(), &o).unwrap();
        assert_eq!(c.training.epochs, 7);
        assert_eq!(c.kinds, vec![CellKind::Ltc]);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(c.road.length, 120.0);
        assert!(matches!(
            ExperimentConfig::from_json_with_overrides(&base(), &["nonsense".into()]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn schema_errors_name_the_key() {
        let mut v: Value = serde_json::from_str(&base()).unwrap();
        v.as_object_mut().unwrap().remove("road_seeds");
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("road_seeds")), "{err}");

        let err = ExperimentConfig::from_json_with_overrides(&base(), &["training.learning_rat=1".into()]).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("learning_rat")), "{err}");

        let err = ExperimentConfig::from_json_with_overrides(&base(), &["n=32".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = ExperimentConfig::from_json_with_overrides(&base(), &["eval_road_seeds=[1]".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
