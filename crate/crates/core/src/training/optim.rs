//! AdamW with decoupled weight decay and global-norm clipping.

use serde::{Deserialize, Serialize};

use super::model::{is_weight_matrix, GradientSet, PolicyModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 5e-4,
            weight_decay: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    /// Number of completed steps.
    pub t: u64,
    pub m: GradientSet<T>,
    pub v: GradientSet<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &PolicyModel<T>) -> Self {
        AdamState {
            t: 0,
            m: GradientSet::zeros_like(model),
            v: GradientSet::zeros_like(model),
        }
    }
}

/// Rescales `grads` so its global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut GradientSet<T>, max_norm: T) -> T {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// One AdamW update. Arrays whose name starts with any entry of `frozen`
/// are left untouched (their moments too). Weight decay applies to weight
/// matrices only.
pub fn adamw_step<T: Scalar>(
    model: &mut PolicyModel<T>,
    grads: &GradientSet<T>,
    state: &mut AdamState<T>,
    config: &AdamWConfig,
    frozen: &[String],
) -> Result<()> {
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::lit(config.beta1);
    let b2 = T::lit(config.beta2);
    let one = T::one();
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr = T::lit(config.learning_rate);
    let eps = T::lit(config.eps);
    let wd = T::lit(config.weight_decay);
    let params = model.tensors_mut();
    let g = grads.arrays();
    let ms = state.m.arrays_mut();
    let vs = state.v.arrays_mut();
    for ((((name, p), (_, g)), (_, m)), (_, v)) in params.into_iter().zip(g).zip(ms).zip(vs) {
        if frozen.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let decay = if is_weight_matrix(&name) { wd } else { T::zero() };
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (one - b1) * g[k];
            v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
            let mh = m[k] / c1;
            let vh = v[k] / c2;
            let pk = p[k];
            p[k] = pk - lr * (mh / (vh.sqrt() + eps) + decay * pk);
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { array: name });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> PolicyModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        PolicyModel::init(CellKind::LrcSa, 2, None, 1, 1.0, &mut rng).unwrap()
    }

    fn cfg(lr: f64, wd: f64) -> AdamWConfig {
        AdamWConfig {
            learning_rate: lr,
            weight_decay: wd,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut m = model();
        let before = m.clone();
        let g = GradientSet::zeros_like(&m);
        let mut st = AdamState::new(&m);
        adamw_step(&mut m, &g, &mut st, &cfg(0.1, 0.0), &[]).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut m = model();
        m.readout_b[0] = 0.0;
        let mut g = GradientSet::zeros_like(&m);
        g.0.readout_b[0] = 1.0;
        let mut st = AdamState::new(&m);
        adamw_step(&mut m, &g, &mut st, &cfg(0.1, 0.0), &[]).unwrap();
        // m_hat = 1, v_hat = 1: -0.1 * 1 / (1 + 1e-8)
        assert!((m.readout_b[0] + 0.1).abs() < 1e-8);
        assert_eq!(m.readout_b[0], -0.1 / (1.0 + 1e-8));
    }

    #[test]
    fn decay_shrinks_weight_matrices_only() {
        let mut m = model();
        m.readout_w = vec![0.5, 0.5];
        m.readout_b = vec![0.5];
        let g = GradientSet::zeros_like(&m);
        let mut st = AdamState::new(&m);
        adamw_step(&mut m, &g, &mut st, &cfg(0.1, 0.01), &[]).unwrap();
        assert_eq!(m.readout_w[0], 0.5 - 0.1 * 0.01 * 0.5);
        assert_eq!(m.readout_b[0], 0.5);
    }

    #[test]
    fn frozen_arrays_do_not_move() {
        let mut m = model();
        let before = m.clone();
        let mut g = GradientSet::zeros_like(&m);
        for (_, a) in g.arrays_mut() {
            a.iter_mut().for_each(|v| *v = 1.0);
        }
        let mut st = AdamState::new(&m);
        adamw_step(&mut m, &g, &mut st, &cfg(0.1, 0.0), &["cell.".to_string()]).unwrap();
        assert_eq!(m.cell, before.cell);
        assert_ne!(m.readout_w, before.readout_w);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let m = model();
        let mut g = GradientSet::zeros_like(&m);
        g.0.readout_w = vec![30.0, 40.0];
        assert_eq!(clip_global_norm(&mut g, 10.0), 50.0);
        assert!((g.global_norm() - 10.0).abs() < 1e-12);
        let before = g.clone();
        clip_global_norm(&mut g, 100.0);
        assert_eq!(g, before);
    }

    /// Textbook Adam on a flat vector.
    fn reference_adam(theta: &mut [f64], grads: &[Vec<f64>], lr: f64) {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let mut m = vec![0.0; theta.len()];
        let mut v = vec![0.0; theta.len()];
        for (t, g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            for k in 0..theta.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let mh = m[k] / (1.0 - b1.powi(t));
                let vh = v[k] / (1.0 - b2.powi(t));
                theta[k] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }

    #[test]
    fn no_decay_reproduces_adam() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = model();
        let mut flat: Vec<f64> = m.tensors().iter().flat_map(|(_, t)| t.iter().copied()).collect();
        let sizes: Vec<usize> = m.tensors().iter().map(|(_, t)| t.len()).collect();
        let grads: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..flat.len()).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let mut st = AdamState::new(&m);
        for g in &grads {
            let mut gs = GradientSet::zeros_like(&m);
            let mut off = 0;
            for ((_, a), len) in gs.arrays_mut().into_iter().zip(&sizes) {
                a.copy_from_slice(&g[off..off + len]);
                off += len;
            }
            adamw_step(&mut m, &gs, &mut st, &cfg(1e-2, 0.0), &[]).unwrap();
        }
        reference_adam(&mut flat, &grads, 1e-2);
        let got: Vec<f64> = m.tensors().iter().flat_map(|(_, t)| t.iter().copied()).collect();
        for (a, b) in got.iter().zip(&flat) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
