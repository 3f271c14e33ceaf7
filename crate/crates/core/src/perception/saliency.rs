//! VisualBackprop: channel-averaged activation maps multiplied layer by
//! layer from the deepest back to the input resolution.

use super::conv::LayerMaps;
use super::frame::SaliencyMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn channel_mean<T: Scalar>(maps: &LayerMaps<T>) -> Vec<T> {
    let plane = maps.height * maps.width;
    let mut mean = vec![T::zero(); plane];
    for ch in maps.data.chunks(plane) {
        for (m, &v) in mean.iter_mut().zip(ch) {
            *m += v;
        }
    }
    let c = T::lit(maps.channels as f64);
    mean.iter_mut().for_each(|m| *m /= c);
    mean
}

/// Nearest-neighbour resize of a single-channel grid.
pub fn upsample_nearest<T: Scalar>(src: &[T], (sh, sw): (usize, usize), (dh, dw): (usize, usize)) -> Vec<T> {
    let mut out = Vec::with_capacity(dh * dw);
    for y in 0..dh {
        let sy = y * sh / dh;
        for x in 0..dw {
            out.push(src[sy * sw + x * sw / dw]);
        }
    }
    out
}

/// Min-max normalization to `[0, 1]`; a constant grid maps to all zeros.
pub fn normalize_min_max<T: Scalar>(mut data: Vec<T>) -> Vec<T> {
    let lo = data.iter().copied().fold(T::infinity(), T::min);
    let hi = data.iter().copied().fold(T::neg_infinity(), T::max);
    let span = hi - lo;
    if !(span > T::zero()) || !span.is_finite() {
        data.iter_mut().for_each(|v| *v = T::zero());
        return data;
    }
    data.iter_mut().for_each(|v| *v = (*v - lo) / span);
    data
}

/// Saliency at `out_h x out_w` from per-layer activation maps ordered
/// shallow to deep.
pub fn visual_backprop<T: Scalar>(layers: &[LayerMaps<T>], out_h: usize, out_w: usize) -> Result<SaliencyMap<T>> {
    let deepest = layers.last().ok_or(Error::Empty("visual_backprop needs at least one layer"))?;
    let mut cur = channel_mean(deepest);
    let mut dims = (deepest.height, deepest.width);
    for layer in layers[..layers.len() - 1].iter().rev() {
        let target = (layer.height, layer.width);
        let mean = channel_mean(layer);
        cur = upsample_nearest(&cur, dims, target)
            .into_iter()
            .zip(mean)
            .map(|(a, b)| a * b)
            .collect();
        dims = target;
    }
    let full = upsample_nearest(&cur, dims, (out_h, out_w));
    Ok(SaliencyMap {
        height: out_h,
        width: out_w,
        data: normalize_min_max(full),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maps(channels: usize, h: usize, w: usize, data: Vec<f64>) -> LayerMaps<f64> {
        LayerMaps {
            channels,
            height: h,
            width: w,
            data,
        }
    }

    #[test]
    fn empty_is_error() {
        assert!(visual_backprop::<f64>(&[], 4, 4).is_err());
    }

    #[test]
    fn constant_single_layer_is_all_zero() {
        let m = maps(2, 3, 3, vec![0.7; 18]);
        let s = visual_backprop(&[m], 6, 6).unwrap();
        assert!(s.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deep_mask_confines_support() {
        let shallow = maps(1, 4, 4, (1..=16).map(|v| v as f64).collect());
        let deep = maps(1, 2, 2, vec![0.0, 0.0, 0.0, 3.0]);
        let s = visual_backprop(&[shallow, deep], 4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                if y < 2 || x < 2 {
                    assert_eq!(s.at(y, x), 0.0);
                }
            }
        }
        assert_eq!(s.at(3, 3), 1.0);
    }

    #[test]
    fn hand_traced_two_layer_pipeline() {
        // Shallow 4x4 with two channels, deep 2x2 with two channels.
        let c0: Vec<f64> = vec![1., 2., 0., 4., 3., 1., 2., 2., 0., 0., 5., 1., 2., 4., 1., 3.];
        let c1: Vec<f64> = vec![3., 0., 2., 0., 1., 1., 2., 4., 2., 2., 1., 1., 0., 4., 3., 1.];
        let shallow = maps(2, 4, 4, [c0, c1].concat());
        let deep = maps(2, 2, 2, vec![1., 3., 0., 2., 3., 1., 2., 4.]);
        // deep mean: [2, 2, 1, 3]
        // shallow mean: [2,1,1,2, 2,1,2,3, 1,1,3,1, 1,4,2,2]
        // upsampled deep: [2,2,2,2, 2,2,2,2, 1,1,3,3, 1,1,3,3]
        // product: [4,2,2,4, 4,2,4,6, 1,1,9,3, 1,4,6,6]; min 1, max 9.
        let product = [4., 2., 2., 4., 4., 2., 4., 6., 1., 1., 9., 3., 1., 4., 6., 6.];
        let expected: Vec<f64> = product.iter().map(|v| (v - 1.0) / 8.0).collect();
        let s = visual_backprop(&[shallow, deep], 4, 4).unwrap();
        assert_eq!(s.data, expected);
    }

    #[test]
    fn scaling_one_layer_changes_nothing() {
        let shallow = maps(2, 4, 6, (0..48).map(|v| ((v * 7) % 11) as f64 * 0.3).collect());
        let deep = maps(3, 2, 3, (0..18).map(|v| ((v * 5) % 7) as f64 + 0.5).collect());
        let base = visual_backprop(&[shallow.clone(), deep.clone()], 8, 12).unwrap();
        for scale in [0.5, 2.0, 10.0] {
            for which in 0..2 {
                let mut layers = [shallow.clone(), deep.clone()];
                layers[which].data.iter_mut().for_each(|v| *v *= scale);
                let s = visual_backprop(&layers, 8, 12).unwrap();
                for (a, b) in s.data.iter().zip(&base.data) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
        let lo = base.data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = base.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }
}
