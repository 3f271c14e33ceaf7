//! Reverse-mode differentiation through the unrolled cell, the readout and
//! the conv head, plus a central-difference oracle.

use ndarray::Array2;
use rayon::prelude::*;

use super::loss::Loss;
use super::model::{GradientSet, PolicyModel, Sequence};
use crate::cells::{bio_tape, gated_tape, BioTape, Cell, CellKind, CellParameters, GatedParameters, GatedTape, HiddenState};
use crate::cells::{ActivationLayout, Synapse};
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::perception::HeadTape;
use crate::scalar::{sigmoid, Scalar};

enum StepTape<T> {
    Bio(BioTape<T>),
    Gated(GatedTape<T>),
}

struct SequenceTape<T> {
    head: Option<HeadTape<T>>,
    /// `states[t]` is the state before step `t`; `states[T]` is final.
    states: Vec<HiddenState<T>>,
    steps: Vec<StepTape<T>>,
    preds: Vec<T>,
}

fn bio_forward<T: Scalar>(
    p: &CellParameters<T>,
    prev: &HiddenState<T>,
    x: &[T],
) -> Result<(BioTape<T>, HiddenState<T>)> {
    let tape = bio_tape(p, &prev.h, x, false)?;
    let dt = p.dt;
    let h: Vec<T> = (0..p.m)
        .map(|i| {
            let e = tape.eps[i];
            (T::one() - tape.sf[i] * e * dt) * prev.h[i] + tape.tu[i] * e * p.e_l[i] * dt
        })
        .collect();
    if let Some(i) = h.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow { neuron: i });
    }
    Ok((tape, HiddenState::from_h(h)))
}

fn forward_tape<T: Scalar>(model: &PolicyModel<T>, inputs: &[Vec<T>]) -> Result<SequenceTape<T>> {
    let (head, feats) = match &model.head {
        Some(h) => {
            let tape = h.forward_batch(inputs)?;
            let feats = (0..inputs.len()).map(|f| tape.feature(f)).collect();
            (Some(tape), feats)
        }
        None => (None, model.features(inputs)?),
    };
    let mut states = vec![model.cell.zero_state()];
    let mut steps = Vec::with_capacity(feats.len());
    let mut preds = Vec::with_capacity(feats.len());
    for (t, x) in feats.iter().enumerate() {
        let prev = states.last().unwrap();
        let at = |e| Error::AtStep {
            t,
            source: Box::new(e),
        };
        let (tape, next) = match &model.cell {
            Cell::Bio(p) => bio_forward(p, prev, x).map(|(a, b)| (StepTape::Bio(a), b)),
            Cell::Gated(p) => gated_tape(p, prev, x).map(|(a, b)| (StepTape::Gated(a), b)),
        }
        .map_err(at)?;
        preds.push(model.readout(&next.h));
        steps.push(tape);
        states.push(next);
    }
    Ok(SequenceTape {
        head,
        states,
        steps,
        preds,
    })
}

fn dsig<T: Scalar>(s: T) -> T {
    s * (T::one() - s)
}

/// Backward through one bio step. Accumulates into `g` and returns the
/// gradients with respect to the previous state and the input.
fn bio_vjp<T: Scalar>(
    p: &CellParameters<T>,
    tape: &BioTape<T>,
    h_prev: &[T],
    gh: &[T],
    g: &mut CellParameters<T>,
) -> (Vec<T>, Vec<T>) {
    let (m, n, dt) = (p.m, p.n, p.dt);
    let y = &tape.y;
    let mut gy = vec![T::zero(); m + n];
    let mut gh_prev = vec![T::zero(); m];
    let mut gf = vec![T::zero(); m];
    let mut gu = vec![T::zero(); m];
    let liquid = p.kind.has_liquid_capacitance();
    for i in 0..m {
        let (e, sf, tu) = (tape.eps[i], tape.sf[i], tape.tu[i]);
        gh_prev[i] = gh[i] * (T::one() - sf * e * dt);
        gf[i] = -gh[i] * e * dt * h_prev[i] * dsig(sf);
        gu[i] = gh[i] * e * p.e_l[i] * dt * (T::one() - tu * tu);
        g.e_l[i] += gh[i] * tu * e * dt;
        if liquid {
            let geps = gh[i] * dt * (tu * p.e_l[i] - sf * h_prev[i]);
            let kr = p.kappa_raw[i];
            let k = kr.abs();
            let sp = sigmoid(tape.w[i] + k);
            let sm = sigmoid(tape.w[i] - k);
            let gw = geps * (dsig(sp) - dsig(sm));
            let gk = geps * (dsig(sp) + dsig(sm));
            let sign = if kr > T::zero() {
                T::one()
            } else if kr < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            g.kappa_raw[i] += gk * sign;
            g.p[i] += gw;
            for j in 0..m + n {
                let q = j * m + i;
                g.o[q] += gw * y[j];
                gy[j] += p.o[q] * gw;
            }
        }
        g.g_l[i] += gf[i] + gu[i];
    }
    let chemical = p.kind.synapse() == Some(Synapse::Chemical);
    match p.kind.activation_layout() {
        ActivationLayout::Absent => {
            for j in 0..m + n {
                let row = j * m;
                let mut acc = T::zero();
                for i in 0..m {
                    g.g[row + i] += gf[i];
                    g.k[row + i] += gu[i] * y[j];
                    acc += p.k[row + i] * gu[i];
                }
                gy[j] += acc;
            }
        }
        ActivationLayout::PerSource => {
            for j in 0..m + n {
                let row = j * m;
                let phi = tape.phi[j];
                let mut gphi = T::zero();
                for i in 0..m {
                    if chemical {
                        g.g[row + i] += gf[i] * phi;
                        gphi += p.g[row + i] * gf[i];
                    } else {
                        g.g[row + i] += gf[i];
                    }
                    g.k[row + i] += gu[i] * phi;
                    gphi += p.k[row + i] * gu[i];
                }
                let gz = gphi * dsig(phi);
                g.a[j] += gz * y[j];
                g.b[j] += gz;
                gy[j] += gz * p.a[j];
            }
        }
        ActivationLayout::PerSynapse => {
            for j in 0..m + n {
                let row = j * m;
                for i in 0..m {
                    let q = row + i;
                    let phi = tape.phi[q];
                    let mut gphi = p.k[q] * gu[i];
                    g.k[q] += gu[i] * phi;
                    if chemical {
                        g.g[q] += gf[i] * phi;
                        gphi += p.g[q] * gf[i];
                    } else {
                        g.g[q] += gf[i];
                    }
                    let gz = gphi * dsig(phi);
                    g.a[q] += gz * y[j];
                    g.b[q] += gz;
                    gy[j] += gz * p.a[q];
                }
            }
        }
    }
    for i in 0..m {
        gh_prev[i] += gy[i];
    }
    (gh_prev, gy.split_off(m))
}

/// Backward through `z = b_blk + W_blk^T input`.
fn block_vjp<T: Scalar>(p: &GatedParameters<T>, g: &mut GatedParameters<T>, blk: usize, input: &[T], z: &[T], gin: &mut [T]) {
    let m = p.m;
    for i in 0..m {
        g.bias[blk * m + i] += z[i];
    }
    let base = blk * p.block_len();
    for (j, &v) in input.iter().enumerate() {
        let row = base + j * m;
        let mut acc = T::zero();
        for i in 0..m {
            g.w[row + i] += v * z[i];
            acc += p.w[row + i] * z[i];
        }
        gin[j] += acc;
    }
}

/// Backward through one gated step; `gc` is the memory-cell gradient (LSTM).
fn gated_vjp<T: Scalar>(
    p: &GatedParameters<T>,
    tape: &GatedTape<T>,
    prev: &HiddenState<T>,
    gh: &[T],
    gc: Option<&[T]>,
    g: &mut GatedParameters<T>,
) -> (Vec<T>, Option<Vec<T>>, Vec<T>) {
    let (m, n) = (p.m, p.n);
    let one = T::one();
    let h = &prev.h;
    let mut gy = vec![T::zero(); m + n];
    match p.kind {
        CellKind::Lstm => {
            let c = prev.aux.as_ref().expect("LSTM state carries a memory cell");
            let (ig, fg, og) = (&tape.gates[0], &tape.gates[1], &tape.gates[3]);
            let mut gc_prev = vec![T::zero(); m];
            let mut zs = vec![vec![T::zero(); m]; 4];
            for i in 0..m {
                let tc = tape.tanh_c[i];
                let gct = gc.map_or(T::zero(), |v| v[i]) + gh[i] * og[i] * (one - tc * tc);
                zs[0][i] = gct * tape.cand[i] * dsig(ig[i]);
                zs[1][i] = gct * c[i] * dsig(fg[i]);
                zs[2][i] = gct * ig[i] * (one - tape.cand[i] * tape.cand[i]);
                zs[3][i] = gh[i] * tc * dsig(og[i]);
                gc_prev[i] = gct * fg[i];
            }
            for (blk, z) in zs.iter().enumerate() {
                block_vjp(p, g, blk, &tape.y, z, &mut gy);
            }
            let gx = gy.split_off(m);
            (gy, Some(gc_prev), gx)
        }
        CellKind::Gru => {
            let (zg, rg) = (&tape.gates[0], &tape.gates[1]);
            let mut gh_prev: Vec<T> = (0..m).map(|i| gh[i] * zg[i]).collect();
            let zc: Vec<T> = (0..m)
                .map(|i| gh[i] * (one - zg[i]) * (one - tape.cand[i] * tape.cand[i]))
                .collect();
            let mut gyc = vec![T::zero(); m + n];
            block_vjp(p, g, 2, &tape.y_cand, &zc, &mut gyc);
            let zz: Vec<T> = (0..m).map(|i| gh[i] * (h[i] - tape.cand[i]) * dsig(zg[i])).collect();
            let zr: Vec<T> = (0..m).map(|i| gyc[i] * h[i] * dsig(rg[i])).collect();
            block_vjp(p, g, 0, &tape.y, &zz, &mut gy);
            block_vjp(p, g, 1, &tape.y, &zr, &mut gy);
            for i in 0..m {
                gh_prev[i] += gyc[i] * rg[i] + gy[i];
            }
            let gx = (0..n).map(|j| gy[m + j] + gyc[m + j]).collect();
            (gh_prev, None, gx)
        }
        CellKind::Mgu => {
            let fg = &tape.gates[0];
            let zc: Vec<T> = (0..m)
                .map(|i| gh[i] * fg[i] * (one - tape.cand[i] * tape.cand[i]))
                .collect();
            let mut gyc = vec![T::zero(); m + n];
            block_vjp(p, g, 1, &tape.y_cand, &zc, &mut gyc);
            let zf: Vec<T> = (0..m)
                .map(|i| (gh[i] * (tape.cand[i] - h[i]) + gyc[i] * h[i]) * dsig(fg[i]))
                .collect();
            block_vjp(p, g, 0, &tape.y, &zf, &mut gy);
            let gh_prev = (0..m)
                .map(|i| gh[i] * (one - fg[i]) + gyc[i] * fg[i] + gy[i])
                .collect();
            let gx = (0..n).map(|j| gy[m + j] + gyc[m + j]).collect();
            (gh_prev, None, gx)
        }
        _ => unreachable!("gated tape for a bio kind"),
    }
}

/// Loss of one sequence and its gradient, accumulated into `grad`.
fn sequence_gradients<T: Scalar>(
    model: &PolicyModel<T>,
    seq: &Sequence<T>,
    loss: Loss,
    grad: &mut PolicyModel<T>,
) -> Result<T> {
    if seq.inputs.len() != seq.targets.len() {
        return Err(Error::LengthMismatch {
            left: seq.inputs.len(),
            right: seq.targets.len(),
        });
    }
    let tape = forward_tape(model, &seq.inputs)?;
    let value = loss.value(&tape.preds, &seq.targets)?;
    let gpred = loss.grad(&tape.preds, &seq.targets)?;
    let (m, n, steps) = (model.m(), model.n(), seq.len());
    let mut gh = vec![T::zero(); m];
    let mut gc: Option<Vec<T>> = (model.cell.kind() == CellKind::Lstm).then(|| vec![T::zero(); m]);
    let mut gx_all = Array2::<T>::zeros((n, steps));
    for t in (0..steps).rev() {
        let gp = gpred[t];
        let h_t = &tape.states[t + 1].h;
        for i in 0..m {
            gh[i] += gp * model.readout_w[i];
            grad.readout_w[i] += gp * h_t[i];
        }
        grad.readout_b[0] += gp;
        let prev = &tape.states[t];
        let (gh_prev, gc_prev, gx) = match (&model.cell, &tape.steps[t], &mut grad.cell) {
            (Cell::Bio(p), StepTape::Bio(st), Cell::Bio(g)) => {
                let (a, b) = bio_vjp(p, st, &prev.h, &gh, g);
                (a, None, b)
            }
            (Cell::Gated(p), StepTape::Gated(st), Cell::Gated(g)) => gated_vjp(p, st, prev, &gh, gc.as_deref(), g),
            _ => unreachable!("gradient container mirrors the model"),
        };
        for (j, v) in gx.into_iter().enumerate() {
            gx_all[[j, t]] = v;
        }
        gh = gh_prev;
        gc = gc_prev;
    }
    if let (Some(head), Some(ht), Some(gh)) = (&model.head, &tape.head, &mut grad.head) {
        head.backward(ht, &gx_all, gh)?;
    }
    Ok(value)
}

/// Mean batch loss and its gradient. Sequences are processed in parallel
/// and reduced in order, so the result does not depend on the thread count.
pub fn bptt_loss_and_gradients<T: Scalar>(
    model: &PolicyModel<T>,
    batch: &[Sequence<T>],
    loss: Loss,
) -> Result<(T, GradientSet<T>)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let len = batch[0].len();
    if let Some(s) = batch.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch {
            left: len,
            right: s.len(),
        });
    }
    let parts: Vec<Result<(T, PolicyModel<T>)>> = batch
        .par_iter()
        .map(|seq| {
            let mut g = model.zeros_like();
            sequence_gradients(model, seq, loss, &mut g).map(|v| (v, g))
        })
        .collect();
    let mut total = GradientSet::zeros_like(model);
    let mut value = T::zero();
    for part in parts {
        let (v, g) = part?;
        value += v;
        total.add_assign(&GradientSet(g));
    }
    let inv = T::one() / T::lit(batch.len() as f64);
    total.scale(inv);
    total.check_finite()?;
    Ok((value * inv, total))
}

pub fn bptt_gradients<T: Scalar>(model: &PolicyModel<T>, batch: &[Sequence<T>], loss: Loss) -> Result<GradientSet<T>> {
    bptt_loss_and_gradients(model, batch, loss).map(|(_, g)| g)
}

/// Mean loss over a batch (forward only).
pub fn batch_loss<T: Scalar>(model: &PolicyModel<T>, batch: &[Sequence<T>], loss: Loss) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut total = T::zero();
    for seq in batch {
        total += loss.value(&model.predict(&seq.inputs)?, &seq.targets)?;
    }
    Ok(total / T::lit(batch.len() as f64))
}

/// `(f(theta + h e_k) - f(theta - h e_k)) / 2h` for every coordinate.
pub fn central_difference<T: Scalar, F: FnMut(&[T]) -> T>(mut f: F, theta: &[T], step: T) -> Vec<T> {
    let mut work = theta.to_vec();
    let two = T::lit(2.0);
    (0..theta.len())
        .map(|k| {
            work[k] = theta[k] + step;
            let plus = f(&work);
            work[k] = theta[k] - step;
            let minus = f(&work);
            work[k] = theta[k];
            (plus - minus) / (two * step)
        })
        .collect()
}

/// Central-difference estimate of the batch-loss gradient.
pub fn finite_difference_gradients<T: Scalar>(
    model: &PolicyModel<T>,
    batch: &[Sequence<T>],
    loss: Loss,
    step: T,
) -> Result<GradientSet<T>> {
    if !(step > T::zero()) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    batch_loss(model, batch, loss)?;
    let mut out = GradientSet::zeros_like(model);
    let mut work = model.clone();
    let count = model.tensors().len();
    for a in 0..count {
        let len = model.tensors()[a].1.len();
        for c in 0..len {
            let orig = model.tensors()[a].1[c];
            let mut eval = |v: T| -> T {
                work.tensors_mut()[a].1[c] = v;
                batch_loss(&work, batch, loss).unwrap_or_else(|_| T::nan())
            };
            let plus = eval(orig + step);
            let minus = eval(orig - step);
            work.tensors_mut()[a].1[c] = orig;
            out.arrays_mut()[a].1[c] = (plus - minus) / (T::lit(2.0) * step);
        }
    }
    Ok(out)
}

/// Finite-difference reference evaluated in double-double arithmetic.
///
/// Central differences at `step` and `step / 2` are combined by Richardson
/// extrapolation, so both the `f64` roundoff floor and the `O(step^2)`
/// truncation term drop well below the tolerances used in gradient checks.
pub fn extended_finite_difference_gradients<T: Scalar>(
    model: &PolicyModel<T>,
    batch: &[Sequence<T>],
    loss: Loss,
    step: f64,
) -> Result<GradientSet<T>> {
    let wide: PolicyModel<Dd> = model.cast();
    let batch: Vec<Sequence<Dd>> = batch.iter().map(Sequence::cast).collect();
    let coarse = finite_difference_gradients(&wide, &batch, loss, Dd::from(step))?;
    let fine = finite_difference_gradients(&wide, &batch, loss, Dd::from(step / 2.0))?;
    let mut out = fine;
    for ((_, f), (_, c)) in out.arrays_mut().into_iter().zip(coarse.arrays()) {
        for (a, &b) in f.iter_mut().zip(c.iter()) {
            *a = (Dd::from(4.0) * *a - b) / Dd::from(3.0);
        }
    }
    Ok(GradientSet(out.0.cast()))
}

/// Per-array comparison of two gradient sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientComparison {
    pub array: String,
    /// Largest relative error among coordinates above the absolute floor.
    pub max_relative: f64,
    /// Largest absolute error among coordinates below the floor.
    pub max_absolute: f64,
    pub passed: bool,
}

/// Relative error `|a-b| / max(|a|,|b|)` where either magnitude exceeds
/// `floor`, absolute error elsewhere.
pub fn compare_gradients<T: Scalar>(
    analytic: &GradientSet<T>,
    numeric: &GradientSet<T>,
    rel_tol: f64,
    floor: f64,
) -> Vec<GradientComparison> {
    analytic
        .arrays()
        .into_iter()
        .zip(numeric.arrays())
        .map(|((name, a), (_, b))| {
            let (mut rel, mut abs) = (0.0f64, 0.0f64);
            for (&x, &y) in a.iter().zip(b) {
                let (x, y) = (x.as_f64(), y.as_f64());
                let scale = x.abs().max(y.abs());
                if scale < floor {
                    abs = abs.max((x - y).abs());
                } else {
                    rel = rel.max((x - y).abs() / scale);
                }
            }
            GradientComparison {
                passed: rel <= rel_tol && abs <= floor,
                array: name,
                max_relative: rel,
                max_absolute: abs,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{ConvHeadConfig, ConvLayerSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_batch(m: &PolicyModel<f64>, len: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Sequence<f64>> {
        (0..count)
            .map(|_| Sequence {
                inputs: (0..len)
                    .map(|_| (0..m.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect(),
                targets: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect()
    }

    fn check(kind: CellKind, head: Option<ConvHeadConfig>, n: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = PolicyModel::init(kind, 4, head, n, 1.0, &mut rng).unwrap();
        // Zero biases put empty ReLU patches exactly on the kink, where the
        // one-sided derivatives disagree.
        if let Some(h) = model.head.as_mut() {
            for (_, t) in h.tensors_mut() {
                t.iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
            }
        }
        let batch = toy_batch(&model, 7, 2, &mut rng);
        let g = bptt_gradients(&model, &batch, Loss::Mse).unwrap();
        let fd = extended_finite_difference_gradients(&model, &batch, Loss::Mse, 1e-5).unwrap();
        for c in compare_gradients(&g, &fd, 1e-5, 1e-8) {
            assert!(c.passed, "{kind} {c:?}");
        }
    }

    #[test]
    fn every_kind_matches_finite_differences() {
        for kind in CellKind::ALL {
            check(kind, None, 3, 17);
        }
    }

    #[test]
    fn conv_head_gradients_match() {
        let cfg = ConvHeadConfig {
            in_channels: 1,
            height: 9,
            width: 11,
            layers: vec![
                ConvLayerSpec {
                    out_channels: 2,
                    kernel: 3,
                    stride: 2,
                },
                ConvLayerSpec {
                    out_channels: 3,
                    kernel: 2,
                    stride: 1,
                },
            ],
            features: 3,
        };
        check(CellKind::LrcSa, Some(cfg.clone()), 3, 5);
        check(CellKind::Gru, Some(cfg), 3, 6);
    }

    #[test]
    fn weighted_loss_gradients_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = PolicyModel::init(CellKind::LcSa, 3, None, 2, 0.5, &mut rng).unwrap();
        let batch = toy_batch(&model, 5, 3, &mut rng);
        let g = bptt_gradients(&model, &batch, Loss::Weighted).unwrap();
        let fd = extended_finite_difference_gradients(&model, &batch, Loss::Weighted, 1e-5).unwrap();
        assert!(compare_gradients(&g, &fd, 1e-5, 1e-8).iter().all(|c| c.passed));
    }

    #[test]
    fn zero_residual_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = PolicyModel::<f64>::init(CellKind::Ltc, 1, None, 0, 1.0, &mut rng).unwrap();
        model.readout_b[0] = 0.3;
        let inputs = vec![Vec::new(); 6];
        let targets = model.predict(&inputs).unwrap();
        let batch = [Sequence { inputs, targets }];
        let (v, g) = bptt_loss_and_gradients(&model, &batch, Loss::Mse).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.global_norm() <= 1e-10);
    }

    #[test]
    fn duplicated_sequence_leaves_mean_gradient_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = PolicyModel::init(CellKind::LrcNa, 3, None, 2, 1.0, &mut rng).unwrap();
        let one = toy_batch(&model, 6, 1, &mut rng);
        let two = vec![one[0].clone(), one[0].clone()];
        let a = bptt_gradients(&model, &one, Loss::Mse).unwrap();
        let b = bptt_gradients(&model, &two, Loss::Mse).unwrap();
        for ((_, x), (_, y)) in a.arrays().into_iter().zip(b.arrays()) {
            for (p, q) in x.iter().zip(y) {
                assert!((p - q).abs() <= 1e-15 * p.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn central_difference_toys() {
        let g = central_difference(|t: &[f64]| t[0] * t[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-9);
        let f = |t: &[f64]| (t[0]).sin() * t[1].exp();
        let a = central_difference(f, &[0.4, -0.2], 1e-4);
        let b = central_difference(f, &[0.4, -0.2], 0.5e-4);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = PolicyModel::init(CellKind::Mgu, 2, None, 1, 1.0, &mut rng).unwrap();
        let mut batch = toy_batch(&model, 4, 2, &mut rng);
        batch[1].targets.pop();
        batch[1].inputs.pop();
        assert!(bptt_gradients(&model, &batch, Loss::Mse).is_err());
        assert!(bptt_gradients(&model, &[], Loss::Mse).is_err());
    }
}
