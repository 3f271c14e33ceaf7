//! Conv head -> recurrent cell -> affine readout.

use rand::Rng;

use crate::cells::{Cell, CellKind, HiddenState};
use crate::error::{Error, Result};
use crate::perception::{ConvHead, ConvHeadConfig};
use crate::scalar::{sum, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel<T> {
    /// Absent when the cell consumes feature vectors directly.
    pub head: Option<ConvHead<T>>,
    pub cell: Cell<T>,
    /// Readout weights, length m.
    pub readout_w: Vec<T>,
    /// Readout bias, length 1.
    pub readout_b: Vec<T>,
}

/// One training sample: per-step inputs (frames when the model has a head,
/// feature vectors otherwise) and steering targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<T> {
    pub inputs: Vec<Vec<T>>,
    pub targets: Vec<T>,
}

impl<T: Scalar> Sequence<T> {
    pub fn cast<U: Scalar>(&self) -> Sequence<U> {
        Sequence {
            inputs: self.inputs.iter().map(|x| x.iter().map(|v| U::lit(v.as_f64())).collect()).collect(),
            targets: self.targets.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Names of parameter arrays whose entries couple units (weight matrices);
/// only these receive weight decay.
pub fn is_weight_matrix(name: &str) -> bool {
    matches!(name, "cell.g" | "cell.k" | "cell.o" | "cell.w" | "readout.w") || name.ends_with(".weight")
}

impl<T: Scalar> PolicyModel<T> {
    pub fn init<R: Rng + ?Sized>(
        kind: CellKind,
        m: usize,
        head: Option<ConvHeadConfig>,
        n: usize,
        dt: T,
        rng: &mut R,
    ) -> Result<Self> {
        let head = match head {
            Some(cfg) => {
                if cfg.features != n {
                    return Err(Error::Dimension {
                        context: "conv head features vs cell input",
                        expected: n,
                        actual: cfg.features,
                    });
                }
                Some(ConvHead::init(cfg, rng)?)
            }
            None => None,
        };
        let cell = Cell::init(kind, m, n, dt, rng)?;
        let bound = 1.0 / (m.max(1) as f64).sqrt();
        let readout_w = (0..m).map(|_| T::lit(rng.random_range(-bound..bound))).collect();
        Ok(PolicyModel {
            head,
            cell,
            readout_w,
            readout_b: vec![T::zero()],
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
        z
    }

    pub fn m(&self) -> usize {
        self.cell.m()
    }

    pub fn n(&self) -> usize {
        self.cell.n()
    }

    /// Length of one raw input vector.
    pub fn input_len(&self) -> usize {
        match &self.head {
            Some(h) => h.config.input_len(),
            None => self.n(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cell.validate()?;
        if let Some(h) = &self.head {
            if h.features() != self.n() {
                return Err(Error::Dimension {
                    context: "conv head features vs cell input",
                    expected: self.n(),
                    actual: h.features(),
                });
            }
        }
        if self.readout_w.len() != self.m() || self.readout_b.len() != 1 {
            return Err(Error::Dimension {
                context: "readout",
                expected: self.m(),
                actual: self.readout_w.len(),
            });
        }
        Ok(())
    }

    /// All parameter arrays with stable dotted names.
    pub fn tensors(&self) -> Vec<(String, &Vec<T>)> {
        let mut out = Vec::new();
        if let Some(h) = &self.head {
            out.extend(h.tensors().into_iter().map(|(n, t)| (format!("head.{n}"), t)));
        }
        out.extend(self.cell.tensors().into_iter().map(|(n, t)| (format!("cell.{n}"), t)));
        out.push(("readout.w".to_string(), &self.readout_w));
        out.push(("readout.b".to_string(), &self.readout_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<T>)> {
        let mut out = Vec::new();
        if let Some(h) = &mut self.head {
            out.extend(h.tensors_mut().into_iter().map(|(n, t)| (format!("head.{n}"), t)));
        }
        out.extend(self.cell.tensors_mut().into_iter().map(|(n, t)| (format!("cell.{n}"), t)));
        out.push(("readout.w".to_string(), &mut self.readout_w));
        out.push(("readout.b".to_string(), &mut self.readout_b));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn readout(&self, h: &[T]) -> T {
        self.readout_b[0] + sum(h.iter().zip(&self.readout_w).map(|(&a, &b)| a * b))
    }

    /// Cell inputs for every step of a sequence.
    pub fn features<X: AsRef<[T]>>(&self, inputs: &[X]) -> Result<Vec<Vec<T>>> {
        match &self.head {
            Some(h) => {
                let tape = h.forward_batch(inputs)?;
                Ok((0..inputs.len()).map(|f| tape.feature(f)).collect())
            }
            None => inputs
                .iter()
                .map(|x| {
                    let x = x.as_ref();
                    if x.len() != self.n() {
                        return Err(Error::Dimension {
                            context: "input",
                            expected: self.n(),
                            actual: x.len(),
                        });
                    }
                    Ok(x.to_vec())
                })
                .collect(),
        }
    }

    /// Predictions for one sequence from a zero initial state.
    pub fn predict<X: AsRef<[T]>>(&self, inputs: &[X]) -> Result<Vec<T>> {
        let feats = self.features(inputs)?;
        let mut state = self.cell.zero_state();
        let mut out = Vec::with_capacity(feats.len());
        for (t, x) in feats.iter().enumerate() {
            state = self.cell.step(&state, x).map_err(|e| Error::AtStep {
                t,
                source: Box::new(e),
            })?;
            out.push(self.readout(&state.h));
        }
        Ok(out)
    }

    /// Advances a running state by one input and returns the prediction.
    pub fn step(&self, state: &HiddenState<T>, input: &[T]) -> Result<(HiddenState<T>, T)> {
        let x = self.features(&[input])?.pop().expect("one step");
        let next = self.cell.step(state, &x)?;
        let pred = self.readout(&next.h);
        Ok((next, pred))
    }

    pub fn cast<U: Scalar>(&self) -> PolicyModel<U> {
        let mut out = PolicyModel::<U> {
            head: self.head.as_ref().map(|h| ConvHead::zeros(h.config.clone()).expect("valid config")),
            cell: match &self.cell {
                Cell::Bio(p) => Cell::zeros(p.kind, p.m, p.n, U::lit(p.dt.as_f64())).expect("valid shape"),
                Cell::Gated(p) => Cell::zeros(p.kind, p.m, p.n, U::one()).expect("valid shape"),
            },
            readout_w: Vec::new(),
            readout_b: Vec::new(),
        };
        out.readout_w = vec![U::zero(); self.readout_w.len()];
        out.readout_b = vec![U::zero(); 1];
        for ((_, dst), (_, src)) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.iter().map(|v| U::lit(v.as_f64())).collect();
        }
        out
    }
}

/// Gradient of a scalar loss with respect to every parameter array of a
/// model, stored in a model-shaped container.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T>(pub PolicyModel<T>);

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(model: &PolicyModel<T>) -> Self {
        GradientSet(model.zeros_like())
    }

    pub fn arrays(&self) -> Vec<(String, &Vec<T>)> {
        self.0.tensors()
    }

    pub fn arrays_mut(&mut self) -> Vec<(String, &mut Vec<T>)> {
        self.0.tensors_mut()
    }

    pub fn get(&self, name: &str) -> Option<&Vec<T>> {
        self.arrays().into_iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn add_assign(&mut self, other: &GradientSet<T>) {
        for ((_, a), (_, b)) in self.arrays_mut().into_iter().zip(other.arrays()) {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: T) {
        for (_, a) in self.arrays_mut() {
            a.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn global_norm(&self) -> T {
        sum(self.arrays().iter().flat_map(|(_, a)| a.iter()).map(|&x| x * x)).sqrt()
    }

    /// Fails with the name of the first array holding a non-finite entry.
    pub fn check_finite(&self) -> Result<()> {
        match self.arrays().into_iter().find(|(_, a)| a.iter().any(|v| !v.is_finite())) {
            Some((name, _)) => Err(Error::NonFinite { array: name }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_and_decay_flags() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = PolicyModel::<f64>::init(CellKind::LrcSa, 3, None, 2, 1.0, &mut rng).unwrap();
        let names: Vec<String> = m.tensors().into_iter().map(|(n, _)| n).collect();
        assert!(names.contains(&"cell.kappa_raw".to_string()));
        assert_eq!(names.last().unwrap(), "readout.b");
        assert!(is_weight_matrix("cell.g") && is_weight_matrix("head.conv1.weight"));
        assert!(!is_weight_matrix("cell.e_l") && !is_weight_matrix("head.fc.bias") && !is_weight_matrix("cell.bias"));
        assert!(!is_weight_matrix("cell.kappa_raw") && !is_weight_matrix("readout.b"));
    }

    #[test]
    fn head_feature_count_must_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(PolicyModel::<f64>::init(CellKind::CtRnn, 4, Some(ConvHeadConfig::default()), 10, 1.0, &mut rng).is_err());
    }

    #[test]
    fn step_matches_predict() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = PolicyModel::<f64>::init(CellKind::Lstm, 3, None, 2, 1.0, &mut rng).unwrap();
        let xs = vec![vec![0.1, 0.2], vec![-0.3, 0.5], vec![0.0, 1.0]];
        let preds = m.predict(&xs).unwrap();
        let mut s = m.cell.zero_state();
        for (x, p) in xs.iter().zip(&preds) {
            let (n, q) = m.step(&s, x).unwrap();
            assert_eq!(q, *p);
            s = n;
        }
    }

    #[test]
    fn cast_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = PolicyModel::<f64>::init(CellKind::LcNa, 2, None, 2, 0.5, &mut rng).unwrap();
        assert_eq!(m.cast::<f64>(), m);
        let f: PolicyModel<f32> = m.cast();
        assert_eq!(f.num_parameters(), m.num_parameters());
    }
}
