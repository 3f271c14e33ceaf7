//! The unified cell family: liquid/bio cells sharing one recurrence, plus
//! the gated baselines they are compared against.

mod dynamics;
mod gated;
mod kind;
mod params;
mod serial;

pub use dynamics::{
    concat_inputs, elastance, elastance_from, forget_floor, forget_update, ode_rhs, state_bound, step,
    step_unit_capacitance,
};
pub(crate) use dynamics::{bio_tape, BioTape};
pub use gated::step_gated;
pub(crate) use gated::{gated_tape, GatedTape};
pub use kind::{Activation, ActivationLayout, Capacitance, CellKind, Family, Synapse};
pub use params::{CellParameters, CellShape, GatedParameters, HiddenState};
pub use serial::{CellDocument, FORMAT_VERSION};

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Any cell of the family, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell<T> {
    Bio(CellParameters<T>),
    Gated(GatedParameters<T>),
}

impl<T: Scalar> Cell<T> {
    pub fn init<R: Rng + ?Sized>(kind: CellKind, m: usize, n: usize, dt: T, rng: &mut R) -> Result<Self> {
        if kind.is_gated() {
            GatedParameters::init(kind, m, n, rng).map(Cell::Gated)
        } else {
            CellParameters::init(kind, m, n, dt, rng).map(Cell::Bio)
        }
    }

    pub fn zeros(kind: CellKind, m: usize, n: usize, dt: T) -> Result<Self> {
        if kind.is_gated() {
            GatedParameters::zeros(kind, m, n).map(Cell::Gated)
        } else {
            CellParameters::zeros(kind, m, n, dt).map(Cell::Bio)
        }
    }

    /// Same shapes, all entries zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
        z
    }

    pub fn kind(&self) -> CellKind {
        match self {
            Cell::Bio(p) => p.kind,
            Cell::Gated(p) => p.kind,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Cell::Bio(p) => p.m,
            Cell::Gated(p) => p.m,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Cell::Bio(p) => p.n,
            Cell::Gated(p) => p.n,
        }
    }

    /// Integration step; gated cells have none and report 1.
    pub fn dt(&self) -> T {
        match self {
            Cell::Bio(p) => p.dt,
            Cell::Gated(_) => T::one(),
        }
    }

    pub fn zero_state(&self) -> HiddenState<T> {
        HiddenState::zeros(self.kind(), self.m())
    }

    pub fn step(&self, prev: &HiddenState<T>, x: &[T]) -> Result<HiddenState<T>> {
        match self {
            Cell::Bio(p) => step(p, prev, x),
            Cell::Gated(p) => step_gated(p, prev, x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Cell::Bio(p) => p.validate(),
            Cell::Gated(p) => p.validate(),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Vec<T>)> {
        match self {
            Cell::Bio(p) => p.tensors(),
            Cell::Gated(p) => p.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<T>)> {
        match self {
            Cell::Bio(p) => p.tensors_mut(),
            Cell::Gated(p) => p.tensors_mut(),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn as_bio(&self) -> Option<&CellParameters<T>> {
        match self {
            Cell::Bio(p) => Some(p),
            Cell::Gated(_) => None,
        }
    }
}

/// Runs the cell over `inputs` starting at `h0`; element `t` is the state
/// after consuming `inputs[t]`.
pub fn unroll<T: Scalar, X: AsRef<[T]>>(
    cell: &Cell<T>,
    h0: &HiddenState<T>,
    inputs: &[X],
) -> Result<Vec<HiddenState<T>>> {
    let mut out: Vec<HiddenState<T>> = Vec::with_capacity(inputs.len());
    for (t, x) in inputs.iter().enumerate() {
        let prev = out.last().unwrap_or(h0);
        let next = cell.step(prev, x.as_ref()).map_err(|e| Error::AtStep {
            t,
            source: Box::new(e),
        })?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unroll_lengths_and_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for kind in CellKind::ALL {
            let cell = Cell::<f64>::init(kind, 3, 2, 1.0, &mut rng).unwrap();
            let h0 = cell.zero_state();
            let none: Vec<Vec<f64>> = Vec::new();
            assert!(unroll(&cell, &h0, &none).unwrap().is_empty());

            let xs: Vec<Vec<f64>> = (0..5)
                .map(|t| vec![(t as f64 * 0.7).sin(), (t as f64).cos()])
                .collect();
            let one = unroll(&cell, &h0, &xs[..1]).unwrap();
            assert_eq!(one, vec![cell.step(&h0, &xs[0]).unwrap()]);

            let all = unroll(&cell, &h0, &xs).unwrap();
            let mut s = h0.clone();
            for x in &xs {
                s = cell.step(&s, x).unwrap();
            }
            assert_eq!(all.last().unwrap(), &s);
        }
    }

    #[test]
    fn unroll_reports_the_failing_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = Cell::<f64>::init(CellKind::CtRnn, 2, 1, 1.0, &mut rng).unwrap();
        let xs = vec![vec![0.1], vec![0.2], vec![f64::NAN]];
        let err = unroll(&cell, &cell.zero_state(), &xs).unwrap_err();
        assert!(matches!(err, Error::AtStep { t: 2, .. }), "{err}");
    }
}
