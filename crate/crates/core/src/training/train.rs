//! Open-loop imitation training with best-epoch selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backprop::bptt_loss_and_gradients;
use super::loss::{mse_loss, weighted_loss, Loss};
use super::model::{PolicyModel, Sequence};
use super::optim::{adamw_step, clip_global_norm, AdamState, AdamWConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub sequence_length: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub clip_norm: f64,
    /// Parameter-array name prefixes excluded from updates.
    pub frozen: Vec<String>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 100,
            batch_size: 32,
            sequence_length: 32,
            learning_rate: 5e-4,
            weight_decay: 1e-6,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            clip_norm: 10.0,
            frozen: Vec::new(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("training config: {what}")));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.sequence_length < 1 {
            return bad("sequence_length must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a non-negative number");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2)) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) || !(self.clip_norm > 0.0) {
            return bad("adam_eps and clip_norm must be positive");
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Random access to training sequences, materialized on demand.
pub trait SequenceSet<T>: Sync {
    fn len(&self) -> usize;
    fn get(&self, index: usize) -> Result<Sequence<T>>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: Scalar> SequenceSet<T> for [Sequence<T>] {
    fn len(&self) -> usize {
        <[Sequence<T>]>::len(self)
    }

    fn get(&self, index: usize) -> Result<Sequence<T>> {
        Ok(self[index].clone())
    }
}

impl<T: Scalar> SequenceSet<T> for Vec<Sequence<T>> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn get(&self, index: usize) -> Result<Sequence<T>> {
        Ok(self[index].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub val_weighted: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Model after the epoch with the lowest validation MSE.
    pub best: PolicyModel<T>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    /// Model and optimizer state after the last finite epoch.
    pub last: PolicyModel<T>,
    pub optimizer: AdamState<T>,
    pub history: Vec<EpochRecord>,
    /// Epoch at which a non-finite loss or update stopped training.
    pub diverged: Option<usize>,
}

/// Mean per-sequence MSE and turn-weighted loss over a set.
pub fn evaluate<T: Scalar, S: SequenceSet<T> + ?Sized>(model: &PolicyModel<T>, set: &S) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let parts: Vec<Result<(f64, f64)>> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let seq = set.get(i)?;
            let pred = model.predict(&seq.inputs)?;
            Ok((
                mse_loss(&pred, &seq.targets)?.as_f64(),
                weighted_loss(&pred, &seq.targets)?.as_f64(),
            ))
        })
        .collect();
    let (mut a, mut b) = (0.0, 0.0);
    for p in parts {
        let (x, y) = p?;
        a += x;
        b += y;
    }
    let n = set.len() as f64;
    Ok((a / n, b / n))
}

enum EpochEnd {
    Finished(f64),
    Diverged,
}

fn run_epoch<T: Scalar, S: SequenceSet<T> + ?Sized>(
    model: &mut PolicyModel<T>,
    opt: &mut AdamState<T>,
    train_set: &S,
    order: &[usize],
    config: &TrainingConfig,
) -> Result<EpochEnd> {
    let adam = config.optimizer();
    let clip = T::lit(config.clip_norm);
    let mut sum = 0.0;
    for chunk in order.chunks(config.batch_size) {
        let batch = chunk
            .par_iter()
            .map(|&i| train_set.get(i))
            .collect::<Result<Vec<_>>>()?;
        let (value, mut grads) = match bptt_loss_and_gradients(model, &batch, Loss::Mse) {
            Ok(v) => v,
            Err(e) if e.is_numeric() => return Ok(EpochEnd::Diverged),
            Err(e) => return Err(e),
        };
        if !value.is_finite() {
            return Ok(EpochEnd::Diverged);
        }
        sum += value.as_f64() * chunk.len() as f64;
        clip_global_norm(&mut grads, clip);
        let mut next = model.clone();
        match adamw_step(&mut next, &grads, opt, &adam, &config.frozen) {
            Ok(()) => *model = next,
            Err(e) if e.is_numeric() => return Ok(EpochEnd::Diverged),
            Err(e) => return Err(e),
        }
    }
    Ok(EpochEnd::Finished(sum / order.len() as f64))
}

/// Trains with plain MSE, shuffling the training set each epoch with a
/// generator seeded from `config.seed`. The returned best model is the one
/// with the lowest validation MSE over all epochs (no early stopping).
pub fn train<T: Scalar, S: SequenceSet<T> + ?Sized, V: SequenceSet<T> + ?Sized>(
    model: PolicyModel<T>,
    train_set: &S,
    val_set: &V,
    config: &TrainingConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    model.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut opt = AdamState::new(&model);
    let mut out = TrainOutcome {
        best: model.clone(),
        best_epoch: 0,
        best_val_mse: f64::INFINITY,
        last: model,
        optimizer: opt.clone(),
        history: Vec::with_capacity(config.epochs),
        diverged: None,
    };
    let mut current = out.last.clone();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let train_mse = match run_epoch(&mut current, &mut opt, train_set, &order, config)? {
            EpochEnd::Finished(v) => v,
            EpochEnd::Diverged => {
                out.diverged = Some(epoch);
                break;
            }
        };
        let (val_mse, val_weighted) = match evaluate(&current, val_set) {
            Ok(v) if v.0.is_finite() && v.1.is_finite() => v,
            Ok(_) => {
                out.diverged = Some(epoch);
                break;
            }
            Err(e) if e.is_numeric() => {
                out.diverged = Some(epoch);
                break;
            }
            Err(e) => return Err(e),
        };
        let rec = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            val_weighted,
        };
        log::info!(
            "epoch {epoch}: train_mse {train_mse:.6} val_mse {val_mse:.6} val_weighted {val_weighted:.6}"
        );
        on_epoch(&rec);
        out.history.push(rec);
        if val_mse < out.best_val_mse {
            out.best_val_mse = val_mse;
            out.best_epoch = epoch;
            out.best = current.clone();
        }
        out.last = current.clone();
        out.optimizer = opt.clone();
    }
    Ok(out)
}

pub const HISTORY_HEADER: [&str; 5] = ["epoch", "train_mse", "val_mse", "val_weighted", "best"];

/// History as CSV; the `best` column is 1 on the selected epoch, 0 elsewhere.
pub fn history_csv(history: &[EpochRecord], best_epoch: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HISTORY_HEADER)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_mse.to_string(),
            r.val_mse.to_string(),
            r.val_weighted.to_string(),
            u8::from(r.epoch == best_epoch).to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Parses [`history_csv`] output back into records and the marked epoch.
pub fn parse_history_csv(text: &str) -> Result<(Vec<EpochRecord>, Option<usize>)> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != HISTORY_HEADER {
        return Err(Error::Format(format!("unexpected history header {header:?}")));
    }
    let mut out = Vec::new();
    let mut best = None;
    for rec in rd.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|e| Error::Format(format!("{}: {e}", HISTORY_HEADER[i]))) };
        let epoch: usize = rec[0].parse().map_err(|e| Error::Format(format!("epoch: {e}")))?;
        match &rec[4] {
            "1" => best = Some(epoch),
            "0" => {}
            other => return Err(Error::Format(format!("best marker {other:?}"))),
        }
        out.push(EpochRecord {
            epoch,
            train_mse: f(1)?,
            val_mse: f(2)?,
            val_weighted: f(3)?,
        });
    }
    Ok((out, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellKind;
    use rand::Rng;

    fn data(seed: u64, count: usize, m: &PolicyModel<f64>) -> Vec<Sequence<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let inputs: Vec<Vec<f64>> = (0..8)
                    .map(|_| (0..m.n()).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let targets = inputs.iter().map(|x| 0.5 * x[0] - 0.2 * x[1]).collect();
                Sequence { inputs, targets }
            })
            .collect()
    }

    fn model(kind: CellKind) -> PolicyModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        PolicyModel::init(kind, 4, None, 2, 1.0, &mut rng).unwrap()
    }

    fn cfg(epochs: usize, lr: f64) -> TrainingConfig {
        TrainingConfig {
            epochs,
            batch_size: 4,
            learning_rate: lr,
            seed: 3,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initial_model() {
        let m = model(CellKind::LrcSa);
        let (tr, va) = (data(1, 8, &m), data(2, 4, &m));
        let out = train(m.clone(), &tr, &va, &cfg(1, 0.0), |_| {}).unwrap();
        assert_eq!(out.best, m);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn same_seed_same_history() {
        let m = model(CellKind::LcNa);
        let (tr, va) = (data(1, 12, &m), data(2, 4, &m));
        let a = train(m.clone(), &tr, &va, &cfg(3, 1e-2), |_| {}).unwrap();
        let b = train(m, &tr, &va, &cfg(3, 1e-2), |_| {}).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn best_epoch_is_history_minimum() {
        let m = model(CellKind::Gru);
        let (tr, va) = (data(1, 12, &m), data(2, 4, &m));
        let out = train(m, &tr, &va, &cfg(6, 2e-2), |_| {}).unwrap();
        let min = out.history.iter().map(|r| r.val_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_val_mse, min);
        assert_eq!(out.history[out.best_epoch - 1].val_mse, min);
        assert_eq!(out.history.len(), 6);
    }

    #[test]
    fn frozen_cell_readout_fit_improves_monotonically() {
        // The readout sees the (fixed) hidden state, so with the cell frozen
        // the problem is a convex least-squares fit.
        let m = model(CellKind::CtRnn);
        let teacher = {
            let mut t = m.clone();
            t.readout_w = vec![0.8, -0.5, 0.3, 0.1];
            t.readout_b = vec![0.05];
            t
        };
        let relabel = |mut s: Vec<Sequence<f64>>| {
            for q in &mut s {
                q.targets = teacher.predict(&q.inputs).unwrap();
            }
            s
        };
        let (tr, va) = (relabel(data(5, 32, &m)), relabel(data(6, 8, &m)));
        let config = TrainingConfig {
            frozen: vec!["cell.".into()],
            batch_size: 32,
            ..cfg(20, 3e-3)
        };
        let out = train(m.clone(), &tr, &va, &config, |_| {}).unwrap();
        assert_eq!(out.best.cell, m.cell);
        for w in out.history.windows(2) {
            assert!(w[1].val_mse < w[0].val_mse, "{:?}", out.history);
        }
        assert!(out.history[19].val_mse < 0.5 * out.history[0].val_mse);
    }

    #[test]
    fn empty_sets_are_rejected() {
        let m = model(CellKind::Mgu);
        let tr = data(1, 4, &m);
        let empty: Vec<Sequence<f64>> = Vec::new();
        assert!(matches!(train(m.clone(), &empty, &tr, &cfg(1, 1e-3), |_| {}), Err(Error::Empty(_))));
        assert!(matches!(train(m, &tr, &empty, &cfg(1, 1e-3), |_| {}), Err(Error::Empty(_))));
    }

    #[test]
    fn divergence_stops_with_last_finite_model() {
        let mut m = model(CellKind::CtRnn);
        let tr = data(1, 4, &m);
        let mut bad = tr.clone();
        bad[0].targets[0] = f64::NAN;
        m.readout_b[0] = 0.0;
        let out = train(m.clone(), &bad, &tr, &cfg(3, 1e-2), |_| {}).unwrap();
        assert_eq!(out.diverged, Some(1));
        assert!(out.history.is_empty());
        assert_eq!(out.last, m);
    }

    #[test]
    fn history_csv_round_trip() {
        let h = vec![
            EpochRecord {
                epoch: 1,
                train_mse: 0.5,
                val_mse: 0.25,
                val_weighted: 0.125,
            },
            EpochRecord {
                epoch: 2,
                train_mse: 0.1,
                val_mse: 0.3,
                val_weighted: 1.0 / 3.0,
            },
        ];
        let text = history_csv(&h, 1).unwrap();
        assert!(text.starts_with("epoch,train_mse,val_mse,val_weighted,best\n1,0.5,0.25,0.125,1\n"));
        assert_eq!(parse_history_csv(&text).unwrap(), (h, Some(1)));
    }
}
