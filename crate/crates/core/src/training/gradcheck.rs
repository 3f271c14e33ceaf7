use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::backprop::{bptt_gradients, compare_gradients, extended_finite_difference_gradients};
use super::loss::Loss;
use super::model::{PolicyModel, Sequence};
use crate::cells::CellKind;
use crate::error::Result;

pub const GRADCHECK_M: usize = 4;
pub const GRADCHECK_N: usize = 3;
pub const GRADCHECK_T: usize = 7;
pub const GRADCHECK_REL_TOL: f64 = 1e-5;
/// Coordinates whose gradient magnitude is below this are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-8;
const FD_STEP: f64 = 1e-5;

/// Worst error of one parameter array over all instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayError {
    pub array: String,
    pub max_relative: f64,
    pub max_absolute: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub kind: CellKind,
    pub instances: usize,
    pub arrays: Vec<ArrayError>,
    pub passed: bool,
}

impl GradcheckReport {
    pub fn worst_relative(&self) -> f64 {
        self.arrays.iter().map(|a| a.max_relative).fold(0.0, f64::max)
    }
}

/// BPTT against finite differences on `instances` random models of size
/// `m = 4, n = 3` and sequences of length 7. `inject` is added to every
/// analytic gradient entry before comparison (0 for a real check).
pub fn gradient_check(kind: CellKind, instances: usize, seed: u64, inject: f64) -> Result<GradcheckReport> {
    let mut arrays: Vec<ArrayError> = Vec::new();
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let model = PolicyModel::<f64>::init(kind, GRADCHECK_M, None, GRADCHECK_N, 1.0, &mut rng)?;
        let batch: Vec<Sequence<f64>> = (0..2)
            .map(|_| Sequence {
                inputs: (0..GRADCHECK_T)
                    .map(|_| (0..GRADCHECK_N).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect(),
                targets: (0..GRADCHECK_T).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect();
        let mut g = bptt_gradients(&model, &batch, Loss::Mse)?;
        if inject != 0.0 {
            for (_, a) in g.arrays_mut() {
                a.iter_mut().for_each(|v| *v += inject);
            }
        }
        let fd = extended_finite_difference_gradients(&model, &batch, Loss::Mse, FD_STEP)?;
        for c in compare_gradients(&g, &fd, GRADCHECK_REL_TOL, GRADCHECK_FLOOR) {
            match arrays.iter_mut().find(|a| a.array == c.array) {
                Some(a) => {
                    a.max_relative = a.max_relative.max(c.max_relative);
                    a.max_absolute = a.max_absolute.max(c.max_absolute);
                    a.passed &= c.passed;
                }
                None => arrays.push(ArrayError {
                    array: c.array,
                    max_relative: c.max_relative,
                    max_absolute: c.max_absolute,
                    passed: c.passed,
                }),
            }
        }
    }
    let passed = !arrays.is_empty() && arrays.iter().all(|a| a.passed);
    Ok(GradcheckReport {
        kind,
        instances,
        arrays,
        passed,
    })
}
