//! Gated baselines: LSTM, GRU and MGU in their textbook forms.
//!
//! LSTM: `c' = f*c + i*g`, `h' = o * tanh(c')`.
//! GRU:  `h' = z*h + (1-z) * tanh(W_c [r*h, x] + b_c)`.
//! MGU:  `h' = (1-f)*h + f * tanh(W_c [f*h, x] + b_c)`.

use super::kind::CellKind;
use super::params::{GatedParameters, HiddenState};
use crate::error::{check_len, Error, Result};
use crate::scalar::{sigmoid, Scalar};

/// `b_blk + W_blk^T y` for one block.
pub(crate) fn affine<T: Scalar>(p: &GatedParameters<T>, blk: usize, y: &[T]) -> Vec<T> {
    let m = p.m;
    let mut z = p.bias[blk * m..(blk + 1) * m].to_vec();
    let base = blk * p.block_len();
    for (j, &yj) in y.iter().enumerate() {
        let row = &p.w[base + j * m..base + (j + 1) * m];
        for (zi, &w) in z.iter_mut().zip(row) {
            *zi += w * yj;
        }
    }
    z
}

/// Gate activations recorded during a forward step.
#[derive(Debug, Clone)]
pub(crate) struct GatedTape<T> {
    pub y: Vec<T>,
    /// Sigmoid gates in block order (candidate slot left empty).
    pub gates: Vec<Vec<T>>,
    pub cand: Vec<T>,
    /// Input to the candidate block for GRU/MGU (`[r*h, x]` or `[f*h, x]`).
    pub y_cand: Vec<T>,
    /// `tanh(c')` for LSTM.
    pub tanh_c: Vec<T>,
}

pub(crate) fn gated_tape<T: Scalar>(
    p: &GatedParameters<T>,
    prev: &HiddenState<T>,
    x: &[T],
) -> Result<(GatedTape<T>, HiddenState<T>)> {
    let (m, n) = (p.m, p.n);
    check_len("hidden state", m, prev.h.len())?;
    check_len("input", n, x.len())?;
    let mut y = prev.h.clone();
    y.extend_from_slice(x);
    let sig = |v: Vec<T>| v.into_iter().map(sigmoid).collect::<Vec<T>>();
    let tanh = |v: Vec<T>| v.into_iter().map(|z| z.tanh()).collect::<Vec<T>>();
    let out = match p.kind {
        CellKind::Lstm => {
            let c = prev.aux.as_ref().ok_or_else(|| {
                Error::InvalidArgument("LSTM state requires a memory cell".into())
            })?;
            check_len("memory cell", m, c.len())?;
            let i_g = sig(affine(p, 0, &y));
            let f_g = sig(affine(p, 1, &y));
            let g = tanh(affine(p, 2, &y));
            let o_g = sig(affine(p, 3, &y));
            let c_new: Vec<T> = (0..m).map(|i| f_g[i] * c[i] + i_g[i] * g[i]).collect();
            let tanh_c: Vec<T> = c_new.iter().map(|v| v.tanh()).collect();
            let h: Vec<T> = (0..m).map(|i| o_g[i] * tanh_c[i]).collect();
            let tape = GatedTape {
                y,
                gates: vec![i_g, f_g, Vec::new(), o_g],
                cand: g,
                y_cand: Vec::new(),
                tanh_c,
            };
            (tape, HiddenState { h, aux: Some(c_new) })
        }
        CellKind::Gru => {
            let z = sig(affine(p, 0, &y));
            let r = sig(affine(p, 1, &y));
            let mut y_c: Vec<T> = (0..m).map(|i| r[i] * prev.h[i]).collect();
            y_c.extend_from_slice(x);
            let cand = tanh(affine(p, 2, &y_c));
            let h = (0..m)
                .map(|i| z[i] * prev.h[i] + (T::one() - z[i]) * cand[i])
                .collect();
            let tape = GatedTape {
                y,
                gates: vec![z, r, Vec::new()],
                cand,
                y_cand: y_c,
                tanh_c: Vec::new(),
            };
            (tape, HiddenState::from_h(h))
        }
        CellKind::Mgu => {
            let f = sig(affine(p, 0, &y));
            let mut y_c: Vec<T> = (0..m).map(|i| f[i] * prev.h[i]).collect();
            y_c.extend_from_slice(x);
            let cand = tanh(affine(p, 1, &y_c));
            let h = (0..m)
                .map(|i| (T::one() - f[i]) * prev.h[i] + f[i] * cand[i])
                .collect();
            let tape = GatedTape {
                y,
                gates: vec![f, Vec::new()],
                cand,
                y_cand: y_c,
                tanh_c: Vec::new(),
            };
            (tape, HiddenState::from_h(h))
        }
        kind => {
            return Err(Error::UnsupportedKind {
                op: "step_gated",
                kind,
            })
        }
    };
    if let Some(i) = out.1.h.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow { neuron: i });
    }
    Ok(out)
}

/// One step of a gated baseline.
pub fn step_gated<T: Scalar>(p: &GatedParameters<T>, prev: &HiddenState<T>, x: &[T]) -> Result<HiddenState<T>> {
    gated_tape(p, prev, x).map(|(_, s)| s)
}
