use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kind::{ActivationLayout, CellKind};
use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

/// Learnable parameters of one liquid/bio cell (CT-RNN, LTC, LC-*, LRC-*).
///
/// Matrices are stored row-major with shape `(m + n) x m`: the entry for
/// source `j` and target neuron `i` lives at `j * m + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParameters<T> {
    pub kind: CellKind,
    pub m: usize,
    pub n: usize,
    pub dt: T,
    /// Leak conductance per neuron.
    pub g_l: Vec<T>,
    /// Resting (reversal) potential per neuron.
    pub e_l: Vec<T>,
    /// Forget conductances.
    pub g: Vec<T>,
    /// Update conductances.
    pub k: Vec<T>,
    /// Activation slopes, layout given by [`CellKind::activation_layout`].
    pub a: Vec<T>,
    /// Activation offsets, same layout as `a`.
    pub b: Vec<T>,
    /// Elastance input weights; empty for fixed-capacitance kinds.
    pub o: Vec<T>,
    /// Elastance bias per neuron; empty for fixed-capacitance kinds.
    pub p: Vec<T>,
    /// Unconstrained elastance spread; the effective spread is `|kappa_raw|`.
    pub kappa_raw: Vec<T>,
}

/// Expected lengths of every array for a given kind and size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellShape {
    pub leak: usize,
    pub matrix: usize,
    pub activation: usize,
    pub elastance_matrix: usize,
    pub elastance_vector: usize,
}

impl CellShape {
    pub fn of(kind: CellKind, m: usize, n: usize) -> Self {
        let matrix = (m + n) * m;
        let activation = match kind.activation_layout() {
            ActivationLayout::Absent => 0,
            ActivationLayout::PerSource => m + n,
            ActivationLayout::PerSynapse => matrix,
        };
        let liquid = kind.has_liquid_capacitance();
        CellShape {
            leak: m,
            matrix,
            activation,
            elastance_matrix: if liquid { matrix } else { 0 },
            elastance_vector: if liquid { m } else { 0 },
        }
    }
}

impl<T: Scalar> CellParameters<T> {
    /// All-zero parameters with the right shapes.
    pub fn zeros(kind: CellKind, m: usize, n: usize, dt: T) -> Result<Self> {
        if kind.is_gated() {
            return Err(Error::UnsupportedKind {
                op: "CellParameters::zeros",
                kind,
            });
        }
        let s = CellShape::of(kind, m, n);
        Ok(CellParameters {
            kind,
            m,
            n,
            dt,
            g_l: vec![T::zero(); s.leak],
            e_l: vec![T::zero(); s.leak],
            g: vec![T::zero(); s.matrix],
            k: vec![T::zero(); s.matrix],
            a: vec![T::zero(); s.activation],
            b: vec![T::zero(); s.activation],
            o: vec![T::zero(); s.elastance_matrix],
            p: vec![T::zero(); s.elastance_vector],
            kappa_raw: vec![T::zero(); s.elastance_vector],
        })
    }

    /// Random initialization.
    ///
    /// `e_l ~ U[-1,1]`, `g_l ~ U[0,1]`, `g, k, o ~ U[-s,s]` with
    /// `s = (m+n)^{-1/2}`, `a ~ U[0.5,1.5]`, `b, p, kappa_raw ~ U[-0.5,0.5]`.
    pub fn init<R: Rng + ?Sized>(kind: CellKind, m: usize, n: usize, dt: T, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(kind, m, n, dt)?;
        let s = 1.0 / ((m + n).max(1) as f64).sqrt();
        let mut fill = |v: &mut Vec<T>, lo: f64, hi: f64| {
            for x in v.iter_mut() {
                *x = T::lit(rng.random_range(lo..hi));
            }
        };
        fill(&mut p.g_l, 0.0, 1.0);
        fill(&mut p.e_l, -1.0, 1.0);
        fill(&mut p.g, -s, s);
        fill(&mut p.k, -s, s);
        fill(&mut p.a, 0.5, 1.5);
        fill(&mut p.b, -0.5, 0.5);
        fill(&mut p.o, -s, s);
        fill(&mut p.p, -0.5, 0.5);
        fill(&mut p.kappa_raw, -0.5, 0.5);
        Ok(p)
    }

    pub fn shape(&self) -> CellShape {
        CellShape::of(self.kind, self.m, self.n)
    }

    /// Checks array lengths, finiteness and `dt > 0`.
    pub fn validate(&self) -> Result<()> {
        if self.kind.is_gated() {
            return Err(Error::UnsupportedKind {
                op: "CellParameters",
                kind: self.kind,
            });
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        let expected = Self::zeros(self.kind, self.m, self.n, self.dt)?;
        for ((name, have), (_, want)) in self.tensors().into_iter().zip(expected.tensors()) {
            if have.len() != want.len() {
                return Err(Error::Format(format!(
                    "array `{name}` has length {}, expected {}",
                    have.len(),
                    want.len()
                )));
            }
            if !all_finite(have) {
                return Err(Error::NonFinite { array: name.to_string() });
            }
        }
        Ok(())
    }

    /// Named parameter arrays, in a fixed order. Empty arrays are included.
    pub fn tensors(&self) -> Vec<(&'static str, &Vec<T>)> {
        vec![
            ("g_l", &self.g_l),
            ("e_l", &self.e_l),
            ("g", &self.g),
            ("k", &self.k),
            ("a", &self.a),
            ("b", &self.b),
            ("o", &self.o),
            ("p", &self.p),
            ("kappa_raw", &self.kappa_raw),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<T>)> {
        vec![
            ("g_l", &mut self.g_l),
            ("e_l", &mut self.e_l),
            ("g", &mut self.g),
            ("k", &mut self.k),
            ("a", &mut self.a),
            ("b", &mut self.b),
            ("o", &mut self.o),
            ("p", &mut self.p),
            ("kappa_raw", &mut self.kappa_raw),
        ]
    }

    /// Index of synapse `j -> i` in the `(m + n) x m` matrices.
    #[inline]
    pub fn idx(&self, j: usize, i: usize) -> usize {
        j * self.m + i
    }
}

/// Weights of a gated baseline: `blocks` stacked `(m + n) x m` matrices and biases.
///
/// Block order: LSTM `[input, forget, candidate, output]`, GRU
/// `[update, reset, candidate]`, MGU `[forget, candidate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedParameters<T> {
    pub kind: CellKind,
    pub m: usize,
    pub n: usize,
    pub w: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> GatedParameters<T> {
    pub fn zeros(kind: CellKind, m: usize, n: usize) -> Result<Self> {
        let blocks = kind.gate_blocks().ok_or(Error::UnsupportedKind {
            op: "GatedParameters::zeros",
            kind,
        })?;
        Ok(GatedParameters {
            kind,
            m,
            n,
            w: vec![T::zero(); blocks * (m + n) * m],
            bias: vec![T::zero(); blocks * m],
        })
    }

    /// Weights `~ U[-s,s]` with `s = (m+n)^{-1/2}`; biases zero.
    pub fn init<R: Rng + ?Sized>(kind: CellKind, m: usize, n: usize, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(kind, m, n)?;
        let s = 1.0 / ((m + n).max(1) as f64).sqrt();
        for x in p.w.iter_mut() {
            *x = T::lit(rng.random_range(-s..s));
        }
        Ok(p)
    }

    pub fn blocks(&self) -> usize {
        self.kind.gate_blocks().unwrap_or(0)
    }

    #[inline]
    pub fn block_len(&self) -> usize {
        (self.m + self.n) * self.m
    }

    /// Weight for block `blk`, source `j`, target `i`.
    #[inline]
    pub fn widx(&self, blk: usize, j: usize, i: usize) -> usize {
        blk * self.block_len() + j * self.m + i
    }

    pub fn validate(&self) -> Result<()> {
        let want = Self::zeros(self.kind, self.m, self.n)?;
        for ((name, have), (_, want)) in self.tensors().into_iter().zip(want.tensors()) {
            if have.len() != want.len() {
                return Err(Error::Format(format!(
                    "array `{name}` has length {}, expected {}",
                    have.len(),
                    want.len()
                )));
            }
            if !all_finite(have) {
                return Err(Error::NonFinite { array: name.to_string() });
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Vec<T>)> {
        vec![("w", &self.w), ("bias", &self.bias)]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<T>)> {
        vec![("w", &mut self.w), ("bias", &mut self.bias)]
    }
}

/// Membrane potentials plus the LSTM memory cell when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenState<T> {
    pub h: Vec<T>,
    pub aux: Option<Vec<T>>,
}

impl<T: Scalar> HiddenState<T> {
    pub fn zeros(kind: CellKind, m: usize) -> Self {
        HiddenState {
            h: vec![T::zero(); m],
            aux: (kind == CellKind::Lstm).then(|| vec![T::zero(); m]),
        }
    }

    pub fn from_h(h: Vec<T>) -> Self {
        HiddenState { h, aux: None }
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.h) && self.aux.as_deref().map_or(true, all_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_follow_the_kind() {
        let (m, n) = (3, 2);
        let s = CellShape::of(CellKind::LrcSa, m, n);
        assert_eq!((s.matrix, s.activation, s.elastance_matrix, s.elastance_vector), (15, 15, 15, 3));
        let s = CellShape::of(CellKind::LrcNa, m, n);
        assert_eq!(s.activation, 5);
        let s = CellShape::of(CellKind::CtRnn, m, n);
        assert_eq!((s.activation, s.elastance_matrix, s.elastance_vector), (0, 0, 0));
        let s = CellShape::of(CellKind::Ltc, m, n);
        assert_eq!((s.activation, s.elastance_matrix), (15, 0));
        let s = CellShape::of(CellKind::LcNa, m, n);
        assert_eq!((s.activation, s.elastance_matrix), (0, 15));
    }

    #[test]
    fn init_respects_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = CellParameters::<f64>::init(CellKind::LrcSa, 5, 4, 1.0, &mut rng).unwrap();
        p.validate().unwrap();
        let s = 1.0 / 3.0;
        assert!(p.g_l.iter().all(|&x| (0.0..1.0).contains(&x)));
        assert!(p.e_l.iter().all(|&x| (-1.0..1.0).contains(&x)));
        assert!(p.g.iter().chain(&p.k).chain(&p.o).all(|&x| x.abs() <= s));
        assert!(p.a.iter().all(|&x| (0.5..1.5).contains(&x)));
        assert!(p.b.iter().chain(&p.p).chain(&p.kappa_raw).all(|&x| x.abs() <= 0.5));
    }

    #[test]
    fn gated_kinds_are_rejected_for_bio_parameters() {
        assert!(matches!(
            CellParameters::<f64>::zeros(CellKind::Gru, 2, 2, 1.0),
            Err(Error::UnsupportedKind { .. })
        ));
        assert!(GatedParameters::<f64>::zeros(CellKind::Ltc, 2, 2).is_err());
        let g = GatedParameters::<f64>::zeros(CellKind::Lstm, 2, 3).unwrap();
        assert_eq!(g.w.len(), 4 * 5 * 2);
        assert_eq!(g.bias.len(), 8);
    }

    #[test]
    fn validate_catches_bad_dt_and_nan() {
        let mut p = CellParameters::<f64>::zeros(CellKind::LcNa, 2, 1, 1.0).unwrap();
        p.validate().unwrap();
        p.dt = 0.0;
        assert!(p.validate().is_err());
        p.dt = 1.0;
        p.o[1] = f64::NAN;
        assert!(matches!(p.validate(), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn aux_only_for_lstm() {
        assert!(HiddenState::<f64>::zeros(CellKind::Lstm, 3).aux.is_some());
        assert!(HiddenState::<f64>::zeros(CellKind::Gru, 3).aux.is_none());
        assert!(HiddenState::<f64>::zeros(CellKind::LrcSa, 3).aux.is_none());
    }
}
