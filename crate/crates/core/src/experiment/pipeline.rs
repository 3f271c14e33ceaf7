use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{sha256_hex, ExperimentConfig};
use crate::cells::CellKind;
use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic};
use crate::metrics::{
    correlation_table, ssim_robustness, MetricsReport, ModelReport, ReportMetadata, SeasonReport, ValidationSummary,
};
use crate::perception::{saliency, write_png, Frame};
use crate::simulator::{
    build_dataset, expert_rollout, generate_road, rollout_closed_loop, write_trace, Dataset, EpisodeTrace,
    RolloutConfig, Season, Split,
};
use crate::training::{history_csv, train, Checkpoint, DatasetSplit, EpochRecord, ModelPolicy, PolicyModel, TrainOutcome};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FILE: &str = "dataset.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Checksums of the files a command wrote. `created` is the only field that
/// differs between two runs of the same command and config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub command: String,
    pub config_hash: String,
    pub counts: BTreeMap<String, usize>,
    /// Path relative to the manifest's directory -> SHA-256.
    pub files: BTreeMap<String, String>,
    /// Seconds since the Unix epoch.
    pub created: u64,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Manifest {
            format_version: 1,
            command: command.to_string(),
            config_hash: cfg.hash()?,
            counts: BTreeMap::new(),
            files: BTreeMap::new(),
            created: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        })
    }

    /// Writes `bytes` under `dir` and records its checksum.
    pub fn put(&mut self, dir: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&dir.join(rel), bytes)?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_to_string(&dir.join(MANIFEST_FILE))?)?)
    }

    /// Recomputes every recorded checksum.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (rel, sum) in &self.files {
            let path = dir.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if &sha256_hex(&bytes) != sum {
                return Err(Error::Format(format!("checksum mismatch for {}", path.display())));
            }
        }
        Ok(())
    }
}

/// Seed of the demonstration noise on one training road.
pub fn rollout_seed(road_seed: u64, season: Season) -> u64 {
    road_seed.wrapping_mul(0xD134_2543_DE82_EF95) ^ if season == Season::Winter { 0x5EA5_0000 } else { 0 }
}

pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut rollouts = Vec::with_capacity(cfg.road_seeds.len() * cfg.seasons.len());
    for &seed in &cfg.road_seeds {
        for &season in &cfg.seasons {
            let road = generate_road(seed, season, &cfg.road)?;
            rollouts.push(expert_rollout(&road, cfg.execution_noise, rollout_seed(seed, season))?);
        }
    }
    build_dataset(rollouts, cfg.dataset, cfg.camera)
}

pub fn write_dataset(dir: &Path, cfg: &ExperimentConfig, ds: &Dataset) -> Result<Manifest> {
    let mut man = Manifest::new("generate", cfg)?;
    man.put(dir, CONFIG_FILE, cfg.to_json()?.as_bytes())?;
    man.put(dir, DATASET_FILE, serde_json::to_string(ds)?.as_bytes())?;
    man.counts.insert("rollouts".into(), ds.rollouts.len());
    for split in Split::ALL {
        man.counts.insert(format!("{}_windows", split.name()), ds.windows(split).len());
    }
    man.save(dir)?;
    Ok(man)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    Manifest::load(dir)?.verify(dir)?;
    Ok(serde_json::from_str(&read_to_string(&dir.join(DATASET_FILE))?)?)
}

/// Seed for a model's initial parameters.
pub fn model_seed(cfg: &ExperimentConfig, kind: CellKind) -> u64 {
    cfg.training.seed ^ kind_salt(kind)
}

/// FNV-1a of the kind's name.
fn kind_salt(kind: CellKind) -> u64 {
    kind.name().bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSummary {
    pub kind: CellKind,
    pub best_epoch: usize,
    pub val_mse: f64,
    pub val_weighted: f64,
    /// Validation MSE of the constant training-mean predictor.
    pub baseline_mse: f64,
    pub epochs_run: usize,
    pub diverged: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub kind: CellKind,
    pub outcome: TrainOutcome<f64>,
    pub summary: TrainingSummary,
}

pub fn train_kind(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    kind: CellKind,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainedModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(model_seed(cfg, kind));
    let model = PolicyModel::<f64>::init(kind, cfg.m, Some(cfg.head.clone()), cfg.n, cfg.dt, &mut rng)?;
    let outcome = train(
        model,
        &DatasetSplit::new(ds, Split::Train),
        &DatasetSplit::new(ds, Split::Validation),
        &cfg.training,
        on_epoch,
    )?;
    let best = outcome.history.iter().find(|r| r.epoch == outcome.best_epoch);
    let summary = TrainingSummary {
        kind,
        best_epoch: outcome.best_epoch,
        val_mse: best.map_or(f64::NAN, |r| r.val_mse),
        val_weighted: best.map_or(f64::NAN, |r| r.val_weighted),
        baseline_mse: ds.constant_mse(Split::Validation, ds.train_label_mean()),
        epochs_run: outcome.history.len(),
        diverged: outcome.diverged,
    };
    Ok(TrainedModel { kind, outcome, summary })
}

pub fn model_dir(root: &Path, kind: CellKind) -> PathBuf {
    root.join("models").join(kind.name())
}

/// Writes the best checkpoint, the history and the summary, also when
/// training diverged.
pub fn save_trained(root: &Path, cfg: &ExperimentConfig, t: &TrainedModel) -> Result<Manifest> {
    let dir = model_dir(root, t.kind);
    let mut man = Manifest::new("train", cfg)?;
    let mut ck = Checkpoint::from_model(&t.outcome.best, None);
    if t.outcome.best_epoch > 0 {
        ck.epoch = Some(t.outcome.best_epoch);
        ck.val_mse = Some(t.outcome.best_val_mse);
    }
    man.put(&dir, CHECKPOINT_FILE, ck.to_json()?.as_bytes())?;
    man.put(&dir, HISTORY_FILE, history_csv(&t.outcome.history, t.outcome.best_epoch)?.as_bytes())?;
    man.put(&dir, SUMMARY_FILE, serde_json::to_string_pretty(&t.summary)?.as_bytes())?;
    man.counts.insert("epochs".into(), t.outcome.history.len());
    man.save(&dir)?;
    Ok(man)
}

pub fn load_trained(root: &Path, kind: CellKind) -> Result<(PolicyModel<f64>, TrainingSummary)> {
    let dir = model_dir(root, kind);
    let ck = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
    let summary = serde_json::from_str(&read_to_string(&dir.join(SUMMARY_FILE))?)?;
    Ok((ck.model()?, summary))
}

/// Evenly spaced picks of `count` items out of `len`.
fn spread(len: usize, count: usize) -> Vec<usize> {
    let count = count.min(len);
    (0..count).map(|k| k * len / count).collect()
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: ModelReport,
    pub traces: Vec<EpisodeTrace>,
}

/// Closed-loop rollouts on the held-out roads of every season, then the
/// correlation table and SSIM distributions. With `out`, traces and sample
/// saliency images are written below `out/eval/<kind>/<season>/`.
pub fn evaluate_kind(
    cfg: &ExperimentConfig,
    kind: CellKind,
    model: &PolicyModel<f64>,
    summary: Option<&TrainingSummary>,
    out: Option<&Path>,
) -> Result<Evaluation> {
    let head = model
        .head
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("evaluation needs a model with a convolutional head".into()))?;
    let rollout_cfg = RolloutConfig {
        camera: cfg.camera,
        noise_variance: 0.0,
        keep_frames: true,
    };
    let mut seasons = Vec::new();
    let mut all = Vec::new();
    for &season in &cfg.seasons {
        let mut traces = Vec::new();
        for &seed in &cfg.eval_road_seeds {
            let road = generate_road(seed, season, &cfg.road)?;
            let mut policy = ModelPolicy::new(model.clone());
            traces.push(rollout_closed_loop(&mut policy, &road, &rollout_cfg, seed)?);
        }
        let frames: Vec<&Frame<f64>> = traces.iter().flat_map(|t| &t.frames).collect();
        let picked: Vec<Frame<f64>> = spread(frames.len(), cfg.ssim_frames).into_iter().map(|i| frames[i].clone()).collect();
        let ssim = ssim_robustness(head, &picked, &cfg.noise_variances, cfg.training.seed)?;
        let correlation = correlation_table(&traces, cfg.reference)?;
        if let Some(root) = out {
            let dir = root.join("eval").join(kind.name()).join(season.name());
            for t in &traces {
                write_trace(&dir.join(format!("road_{}", t.road_seed)), t, false)?;
            }
            for (k, i) in spread(picked.len(), cfg.saliency_images).into_iter().enumerate() {
                let f = &picked[i];
                let s = saliency(head, f)?;
                write_png(&dir.join("saliency").join(format!("{k:03}_frame.png")), f.height, f.width, &f.data)?;
                write_png(&dir.join("saliency").join(format!("{k:03}_saliency.png")), s.height, s.width, &s.data)?;
            }
        }
        seasons.push(SeasonReport {
            season,
            completion: traces.iter().map(EpisodeTrace::completion).collect(),
            correlation,
            ssim,
        });
        all.extend(traces);
    }
    Ok(Evaluation {
        report: ModelReport {
            model: kind.name().to_string(),
            kind,
            validation: summary.map(|s| ValidationSummary {
                best_epoch: s.best_epoch,
                val_mse: s.val_mse,
                val_weighted: s.val_weighted,
                baseline_mse: s.baseline_mse,
            }),
            seasons,
        },
        traces: all,
    })
}

pub fn report_metadata(cfg: &ExperimentConfig) -> Result<ReportMetadata> {
    let mut seeds = vec![cfg.training.seed];
    seeds.extend(&cfg.eval_road_seeds);
    Ok(ReportMetadata {
        seeds,
        config_hash: cfg.hash()?,
        reference: cfg.reference,
    })
}

/// Builds the report over every configured kind found under `root`.
pub fn evaluate_all(cfg: &ExperimentConfig, root: &Path) -> Result<MetricsReport> {
    let mut report = MetricsReport::new(report_metadata(cfg)?);
    for &kind in &cfg.kinds {
        let (model, summary) = load_trained(root, kind)?;
        report.models.push(evaluate_kind(cfg, kind, &model, Some(&summary), Some(root))?.report);
    }
    report.verify()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_is_even_and_bounded() {
        assert_eq!(spread(10, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(spread(3, 10), vec![0, 1, 2]);
        assert!(spread(0, 4).is_empty());
    }

    #[test]
    fn seeds_differ_per_kind_and_season() {
        assert_ne!(rollout_seed(3, Season::Summer), rollout_seed(3, Season::Winter));
        let kinds: std::collections::HashSet<u64> = CellKind::ALL.iter().map(|&k| kind_salt(k)).collect();
        assert_eq!(kinds.len(), CellKind::ALL.len());
    }
}
