//! Shared recurrence of the bio-inspired cells.
//!
//! Every non-gated kind integrates
//! `dh_i/dt = -sigma(f_i) eps_i h_i + tanh(u_i) eps_i e_li`
//! with one explicit Euler step per input frame. Kinds differ only in how
//! the forget term `f`, the update term `u` and the elastance `eps` are formed.

use super::kind::{ActivationLayout, Synapse};
use super::params::{CellParameters, HiddenState};
use crate::error::{check_len, Error, Result};
use crate::scalar::{sigmoid, Scalar};

/// `y = [h, x]`.
pub fn concat_inputs<T: Scalar>(m: usize, n: usize, h: &[T], x: &[T]) -> Result<Vec<T>> {
    check_len("hidden state", m, h.len())?;
    check_len("input", n, x.len())?;
    let mut y = Vec::with_capacity(m + n);
    y.extend_from_slice(h);
    y.extend_from_slice(x);
    Ok(y)
}

/// Elastance from the pre-activation `w` and the signed spread.
///
/// The exact value is below 1 for every finite input; when the difference
/// rounds up to 1 the next representable value below is returned instead.
#[inline]
pub fn elastance_from<T: Scalar>(w: T, kappa_raw: T) -> T {
    let k = kappa_raw.abs();
    let below_one = T::one() - T::epsilon() / T::lit(2.0);
    (sigmoid(w + k) - sigmoid(w - k)).min(below_one)
}

/// Elastance `eps_i = sigma(w_i + k_i) - sigma(w_i - k_i)` of neuron `i`,
/// with `w_i = sum_j o_ji y_j + p_i` and `k_i = |kappa_raw_i|`.
///
/// Fixed-capacitance kinds have no elastance parameters and return 1.
pub fn elastance<T: Scalar>(params: &CellParameters<T>, i: usize, y: &[T]) -> Result<T> {
    check_len("y", params.m + params.n, y.len())?;
    if i >= params.m {
        return Err(Error::InvalidArgument(format!("neuron index {i} out of range")));
    }
    if !params.kind.has_liquid_capacitance() {
        return Ok(T::one());
    }
    Ok(elastance_from(elastance_input(params, i, y), params.kappa_raw[i]))
}

#[inline]
pub(crate) fn elastance_input<T: Scalar>(params: &CellParameters<T>, i: usize, y: &[T]) -> T {
    let mut w = params.p[i];
    for (j, &yj) in y.iter().enumerate() {
        w += params.o[params.idx(j, i)] * yj;
    }
    w
}

/// Forget and update terms `(f, u)` for every neuron.
pub fn forget_update<T: Scalar>(params: &CellParameters<T>, y: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    if params.kind.is_gated() {
        return Err(Error::UnsupportedKind {
            op: "forget_update",
            kind: params.kind,
        });
    }
    check_len("y", params.m + params.n, y.len())?;
    let (f, u, _) = forget_update_raw(params, y);
    Ok((f, u))
}

/// Returns `(f, u, phi)` where `phi` holds the synaptic activations
/// (per source or per synapse, empty for the linear electrical form).
pub(crate) fn forget_update_raw<T: Scalar>(params: &CellParameters<T>, y: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let m = params.m;
    let mut f = params.g_l.clone();
    let mut u = params.g_l.clone();
    let chemical = params.kind.synapse() == Some(Synapse::Chemical);
    let mut phi = Vec::new();
    match params.kind.activation_layout() {
        ActivationLayout::Absent => {
            for (j, &yj) in y.iter().enumerate() {
                let row = j * m;
                for i in 0..m {
                    f[i] += params.g[row + i];
                    u[i] += params.k[row + i] * yj;
                }
            }
        }
        ActivationLayout::PerSource => {
            phi = y
                .iter()
                .enumerate()
                .map(|(j, &yj)| sigmoid(params.a[j] * yj + params.b[j]))
                .collect();
            for (j, &pj) in phi.iter().enumerate() {
                let row = j * m;
                for i in 0..m {
                    let gji = params.g[row + i];
                    f[i] += if chemical { gji * pj } else { gji };
                    u[i] += params.k[row + i] * pj;
                }
            }
        }
        ActivationLayout::PerSynapse => {
            phi = vec![T::zero(); params.g.len()];
            for (j, &yj) in y.iter().enumerate() {
                let row = j * m;
                for i in 0..m {
                    let q = row + i;
                    let s = sigmoid(params.a[q] * yj + params.b[q]);
                    phi[q] = s;
                    f[i] += if chemical { params.g[q] * s } else { params.g[q] };
                    u[i] += params.k[q] * s;
                }
            }
        }
    }
    (f, u, phi)
}

/// Intermediate quantities of one step, reused by the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct BioTape<T> {
    pub y: Vec<T>,
    pub phi: Vec<T>,
    pub sf: Vec<T>,
    pub tu: Vec<T>,
    /// Elastance input `w_i`; empty when capacitance is fixed.
    pub w: Vec<T>,
    pub eps: Vec<T>,
}

pub(crate) fn bio_tape<T: Scalar>(
    params: &CellParameters<T>,
    h: &[T],
    x: &[T],
    unit_capacitance: bool,
) -> Result<BioTape<T>> {
    if params.kind.is_gated() {
        return Err(Error::UnsupportedKind {
            op: "step",
            kind: params.kind,
        });
    }
    let y = concat_inputs(params.m, params.n, h, x)?;
    let (f, u, phi) = forget_update_raw(params, &y);
    let sf = f.into_iter().map(sigmoid).collect();
    let tu = u.into_iter().map(|v| v.tanh()).collect();
    let (w, eps) = if params.kind.has_liquid_capacitance() && !unit_capacitance {
        let w: Vec<T> = (0..params.m).map(|i| elastance_input(params, i, &y)).collect();
        let eps = w
            .iter()
            .zip(&params.kappa_raw)
            .map(|(&wi, &kr)| elastance_from(wi, kr))
            .collect();
        (w, eps)
    } else {
        (Vec::new(), vec![T::one(); params.m])
    };
    Ok(BioTape { y, phi, sf, tu, w, eps })
}

fn finish<T: Scalar>(h: Vec<T>) -> Result<HiddenState<T>> {
    if let Some(i) = h.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow { neuron: i });
    }
    Ok(HiddenState::from_h(h))
}

fn step_impl<T: Scalar>(
    params: &CellParameters<T>,
    prev: &HiddenState<T>,
    x: &[T],
    unit_capacitance: bool,
) -> Result<HiddenState<T>> {
    let tape = bio_tape(params, &prev.h, x, unit_capacitance)?;
    let dt = params.dt;
    let h = (0..params.m)
        .map(|i| {
            let e = tape.eps[i];
            (T::one() - tape.sf[i] * e * dt) * prev.h[i] + tape.tu[i] * e * params.e_l[i] * dt
        })
        .collect();
    finish(h)
}

/// One step of the discrete recurrence
/// `h_t = (1 - sigma(f) eps dt) h_{t-1} + tanh(u) eps e_l dt`.
pub fn step<T: Scalar>(params: &CellParameters<T>, prev: &HiddenState<T>, x: &[T]) -> Result<HiddenState<T>> {
    step_impl(params, prev, x, false)
}

/// [`step`] with the elastance clamped to 1, i.e. the fixed-capacitance
/// ancestor of a liquid kind.
pub fn step_unit_capacitance<T: Scalar>(
    params: &CellParameters<T>,
    prev: &HiddenState<T>,
    x: &[T],
) -> Result<HiddenState<T>> {
    step_impl(params, prev, x, true)
}

/// Right-hand side `-sigma(f) eps h + tanh(u) eps e_l` of the companion ODE.
pub fn ode_rhs<T: Scalar>(params: &CellParameters<T>, h: &[T], x: &[T]) -> Result<Vec<T>> {
    let tape = bio_tape(params, h, x, false)?;
    let d: Vec<T> = (0..params.m)
        .map(|i| -tape.sf[i] * tape.eps[i] * h[i] + tape.tu[i] * tape.eps[i] * params.e_l[i])
        .collect();
    if let Some(i) = d.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow { neuron: i });
    }
    Ok(d)
}

/// Lower bound of `sigma(f_i)` over all inputs: the chemical saturating
/// factor can drop to 0, the electrical one is identically 1.
pub fn forget_floor<T: Scalar>(params: &CellParameters<T>, i: usize) -> T {
    let chemical = params.kind.synapse() == Some(Synapse::Chemical);
    let mut f = params.g_l[i];
    for j in 0..params.m + params.n {
        let gji = params.g[params.idx(j, i)];
        f += if chemical { gji.min(T::zero()) } else { gji };
    }
    sigmoid(f)
}

/// Magnitude no state can leave once `dt sigma(f) eps <= 1`:
/// `max(|h_prev_i|, |e_li| / sigma_lo_i)`.
pub fn state_bound<T: Scalar>(params: &CellParameters<T>, i: usize, h_prev_i: T) -> T {
    h_prev_i.abs().max(params.e_l[i].abs() / forget_floor(params, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellKind;
    use crate::scalar::sigmoid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(kind: CellKind, m: usize, n: usize, seed: u64) -> CellParameters<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CellParameters::init(kind, m, n, 1.0, &mut rng).unwrap()
    }

    #[test]
    fn concat_examples() {
        assert_eq!(concat_inputs(2, 1, &[1.0, 2.0], &[3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(concat_inputs::<f64>(0, 2, &[], &[5.0, 6.0]).unwrap(), vec![5.0, 6.0]);
        assert_eq!(concat_inputs::<f64>(1, 0, &[0.5], &[]).unwrap(), vec![0.5]);
        assert!(matches!(
            concat_inputs(2, 1, &[1.0], &[3.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn elastance_examples() {
        let mut p = CellParameters::<f64>::zeros(CellKind::LrcSa, 1, 1, 1.0).unwrap();
        // k = 0 gives zero elastance for any w.
        p.o = vec![3.0, -1.0];
        p.p = vec![0.7];
        p.kappa_raw = vec![0.0];
        assert_eq!(elastance(&p, 0, &[0.4, 2.0]).unwrap(), 0.0);

        // w = 0: 2 sigma(k) - 1, sign of kappa_raw irrelevant.
        p.o = vec![0.0, 0.0];
        p.p = vec![0.0];
        for k in [0.3, -1.7, 4.0] {
            p.kappa_raw = vec![k];
            let e = elastance(&p, 0, &[0.9, -0.2]).unwrap();
            assert!((e - (2.0 * sigmoid(k.abs()) - 1.0)).abs() < 1e-15);
        }

        // o = [1, 0], p = 0.3, kappa = 1.2, y = [0.5, -2] -> sigma(2.0) - sigma(-0.4).
        // Constant from a 50-digit evaluation: 0.479484738090334444...
        p.o = vec![1.0, 0.0];
        p.p = vec![0.3];
        p.kappa_raw = vec![1.2];
        let e = elastance(&p, 0, &[0.5, -2.0]).unwrap();
        assert!((e - 0.479_484_738_090_334_4).abs() < 1e-15, "{e}");
    }

    #[test]
    fn elastance_stays_below_one() {
        assert!(elastance_from(0.0f64, 40.0) < 1.0);
        assert!(elastance_from(0.0f32, 20.0) < 1.0);
        assert_eq!(elastance_from(3.0f64, 0.0), 0.0);
    }

    #[test]
    fn elastance_of_fixed_kinds_is_one() {
        let p = random(CellKind::Ltc, 2, 1, 1);
        assert_eq!(elastance(&p, 1, &[0.1, 0.2, 0.3]).unwrap(), 1.0);
    }

    #[test]
    fn forget_update_zero_parameters() {
        let p = CellParameters::<f64>::zeros(CellKind::LcNa, 1, 2, 1.0).unwrap();
        let (f, u) = forget_update(&p, &[0.3, -4.0, 2.0]).unwrap();
        assert_eq!((f, u), (vec![0.0], vec![0.0]));
    }

    #[test]
    fn forget_update_lrc_sa_with_zero_activation_params() {
        let mut p = random(CellKind::LrcSa, 3, 2, 9);
        p.a.iter_mut().for_each(|v| *v = 0.0);
        p.b.iter_mut().for_each(|v| *v = 0.0);
        let y = [0.3, -1.0, 2.0, 0.1, 5.0];
        let (f, u) = forget_update(&p, &y).unwrap();
        for i in 0..3 {
            let gsum: f64 = (0..5).map(|j| p.g[p.idx(j, i)]).sum();
            let ksum: f64 = (0..5).map(|j| p.k[p.idx(j, i)]).sum();
            assert!((f[i] - (p.g_l[i] + 0.5 * gsum)).abs() < 1e-14);
            assert!((u[i] - (p.g_l[i] + 0.5 * ksum)).abs() < 1e-14);
        }
    }

    #[test]
    fn lrc_sa_with_tied_activation_matches_lrc_na() {
        let na = random(CellKind::LrcNa, 3, 2, 4);
        let mut sa = CellParameters::zeros(CellKind::LrcSa, 3, 2, 1.0).unwrap();
        sa.g_l = na.g_l.clone();
        sa.e_l = na.e_l.clone();
        sa.g = na.g.clone();
        sa.k = na.k.clone();
        sa.o = na.o.clone();
        sa.p = na.p.clone();
        sa.kappa_raw = na.kappa_raw.clone();
        for j in 0..5 {
            for i in 0..3 {
                sa.a[j * 3 + i] = na.a[j];
                sa.b[j * 3 + i] = na.b[j];
            }
        }
        let y = [0.2, -0.7, 1.1, 3.0, -2.5];
        let (f1, u1) = forget_update(&na, &y).unwrap();
        let (f2, u2) = forget_update(&sa, &y).unwrap();
        for i in 0..3 {
            assert!((f1[i] - f2[i]).abs() <= 1e-12);
            assert!((u1[i] - u2[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn forget_update_rejects_gated() {
        let mut p = random(CellKind::LcNa, 1, 1, 0);
        p.kind = CellKind::Mgu;
        assert!(matches!(forget_update(&p, &[0.0, 0.0]), Err(Error::UnsupportedKind { .. })));
    }

    #[test]
    fn zero_spread_freezes_liquid_state() {
        for kind in [CellKind::LcNa, CellKind::LcSa, CellKind::LrcNa, CellKind::LrcSa] {
            let mut p = random(kind, 3, 2, 11);
            p.kappa_raw = vec![0.0; 3];
            let h = HiddenState::from_h(vec![0.4, -0.3, 0.9]);
            let next = step(&p, &h, &[7.0, -3.0]).unwrap();
            assert_eq!(next, h);
            assert!(ode_rhs(&p, &h.h, &[1.0, 1.0]).unwrap().iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn ctrnn_step_by_substitution() {
        // m = 1, n = 0: f = g_l + g_00, u = g_l + k_00 h.
        let mut p = CellParameters::<f64>::zeros(CellKind::CtRnn, 1, 0, 1.0).unwrap();
        p.g_l = vec![0.2];
        p.g = vec![0.5];
        p.k = vec![-0.8];
        p.e_l = vec![0.6];
        let hp = 0.35;
        let s = sigmoid(0.7);
        let u: f64 = 0.2 - 0.8 * hp;
        let expected = (1.0 - s) * hp + u.tanh() * 0.6;
        let next = step(&p, &HiddenState::from_h(vec![hp]), &[]).unwrap();
        assert!((next.h[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn euler_identity_small_lrc_sa() {
        let mut p = random(CellKind::LrcSa, 3, 2, 21);
        p.dt = 0.01;
        let h = vec![0.3, -0.2, 0.8];
        let x = [0.5, -1.5];
        let next = step(&p, &HiddenState::from_h(h.clone()), &x).unwrap();
        let d = ode_rhs(&p, &h, &x).unwrap();
        for i in 0..3 {
            assert!((next.h[i] - (h[i] + 0.01 * d[i])).abs() <= 1e-14);
        }
    }

    #[test]
    fn fixed_point_has_zero_derivative() {
        // With m = 1, n = 1 and no recurrent coupling, f and u depend on x only.
        let mut p = random(CellKind::LrcSa, 1, 1, 5);
        p.g[0] = 0.0;
        p.k[0] = 0.0;
        let x = [0.8];
        let (f, u) = forget_update(&p, &[0.0, x[0]]).unwrap();
        let h_star = u[0].tanh() * p.e_l[0] / sigmoid(f[0]);
        let d = ode_rhs(&p, &[h_star], &x).unwrap();
        assert!(d[0].abs() < 1e-15);
    }

    #[test]
    fn unit_capacitance_reduces_to_fixed_kind() {
        let pairs = [(CellKind::LcNa, CellKind::CtRnn), (CellKind::LrcSa, CellKind::Ltc)];
        for (liquid, fixed) in pairs {
            let lp = random(liquid, 4, 3, 2);
            let mut fp = CellParameters::zeros(fixed, 4, 3, 1.0).unwrap();
            fp.g_l = lp.g_l.clone();
            fp.e_l = lp.e_l.clone();
            fp.g = lp.g.clone();
            fp.k = lp.k.clone();
            fp.a = lp.a.clone();
            fp.b = lp.b.clone();
            let h = HiddenState::from_h(vec![0.1, 0.2, -0.3, 0.4]);
            let x = [1.0, -2.0, 0.5];
            assert_eq!(
                step_unit_capacitance(&lp, &h, &x).unwrap(),
                step(&fp, &h, &x).unwrap()
            );
        }
    }

    #[test]
    fn overflow_names_the_neuron() {
        let mut p = random(CellKind::CtRnn, 2, 1, 8);
        p.e_l[1] = f64::INFINITY;
        let err = step(&p, &HiddenState::from_h(vec![0.0, 0.0]), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::NumericOverflow { neuron: 1 }), "{err}");
    }

    #[test]
    fn bound_holds_for_unit_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for kind in CellKind::BIO {
            let p = random(kind, 4, 2, rng.random());
            let mut h = HiddenState::from_h(vec![0.0; 4]);
            for _ in 0..200 {
                let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
                let next = step(&p, &h, &x).unwrap();
                for i in 0..4 {
                    assert!(next.h[i].abs() <= state_bound(&p, i, h.h[i]) + 1e-12);
                }
                h = next;
            }
        }
    }
}
