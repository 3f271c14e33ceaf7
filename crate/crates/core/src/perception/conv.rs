//! Convolutional feature head: valid (unpadded) strided convolutions with
//! ReLU, followed by an affine map to the feature vector fed to the cell.
//!
//! Batches of frames are lowered to one matrix product per layer (im2col).
//! Activations are kept channel-major across the batch, `[c][frame][y][x]`,
//! which is exactly the row-major layout of `W · col`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::frame::{Frame, FRAME_HEIGHT, FRAME_WIDTH};
use crate::error::{Error, Result};
use crate::scalar::{sum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayerSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvHeadConfig {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub layers: Vec<ConvLayerSpec>,
    pub features: usize,
}

impl Default for ConvHeadConfig {
    /// Three layers (5x5/5x5/3x3, stride 2, 8/16/16 channels) on a 48x160
    /// grayscale frame, 64 output features.
    fn default() -> Self {
        let l = |out_channels, kernel| ConvLayerSpec {
            out_channels,
            kernel,
            stride: 2,
        };
        ConvHeadConfig {
            in_channels: 1,
            height: FRAME_HEIGHT,
            width: FRAME_WIDTH,
            layers: vec![l(8, 5), l(16, 5), l(16, 3)],
            features: 64,
        }
    }
}

impl ConvHeadConfig {
    /// `(channels, height, width)` of the input followed by every layer output.
    pub fn shapes(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut dims = vec![(self.in_channels, self.height, self.width)];
        for (idx, l) in self.layers.iter().enumerate() {
            let &(_, h, w) = dims.last().unwrap();
            if l.kernel == 0 || l.stride == 0 || l.out_channels == 0 || h < l.kernel || w < l.kernel {
                return Err(Error::InvalidArgument(format!(
                    "conv layer {idx} ({}x{} stride {}) does not fit a {h}x{w} input",
                    l.kernel, l.kernel, l.stride
                )));
            }
            dims.push((l.out_channels, (h - l.kernel) / l.stride + 1, (w - l.kernel) / l.stride + 1));
        }
        Ok(dims)
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    pub fn flat_len(&self) -> Result<usize> {
        let &(c, h, w) = self.shapes()?.last().unwrap();
        Ok(c * h * w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub spec: ConvLayerSpec,
    pub in_channels: usize,
    /// `[out][in][ky][kx]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvLayer<T> {
    fn patch_len(&self) -> usize {
        self.in_channels * self.spec.kernel * self.spec.kernel
    }

    fn weight_view(&self) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((self.spec.out_channels, self.patch_len()), &self.weight).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvHead<T> {
    pub config: ConvHeadConfig,
    pub layers: Vec<ConvLayer<T>>,
    /// `[features][flat]`
    pub fc_weight: Vec<T>,
    pub fc_bias: Vec<T>,
}

/// Post-ReLU activations of one layer for one frame, `[c][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMaps<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

/// Everything the backward pass needs from a batched forward pass.
#[derive(Debug, Clone)]
pub struct HeadTape<T> {
    pub frames: usize,
    /// im2col matrix of each layer's input.
    cols: Vec<Array2<T>>,
    /// Post-ReLU output of each layer, `[c][frame][y][x]`.
    outs: Vec<Array2<T>>,
    /// Flattened last-layer activations, `[flat][frame]`.
    flat: Array2<T>,
    /// Features, `[feature][frame]`.
    pub features: Array2<T>,
}

impl<T: Scalar> HeadTape<T> {
    /// Feature vector of frame `f`.
    pub fn feature(&self, f: usize) -> Vec<T> {
        self.features.column(f).to_vec()
    }

    /// Per-layer activation maps of frame `f`.
    pub fn layer_maps(&self, config: &ConvHeadConfig, f: usize) -> Vec<LayerMaps<T>> {
        let shapes = config.shapes().expect("validated config");
        self.outs
            .iter()
            .zip(&shapes[1..])
            .map(|(out, &(c, h, w))| {
                let plane = h * w;
                let mut data = Vec::with_capacity(c * plane);
                for ch in 0..c {
                    let row = out.row(ch);
                    let row = row.as_slice().expect("contiguous");
                    data.extend_from_slice(&row[f * plane..(f + 1) * plane]);
                }
                LayerMaps {
                    channels: c,
                    height: h,
                    width: w,
                    data,
                }
            })
            .collect()
    }
}

fn im2col<T: Scalar>(
    input: &[T],
    (c, h, w): (usize, usize, usize),
    frames: usize,
    spec: &ConvLayerSpec,
    (ho, wo): (usize, usize),
) -> Array2<T> {
    let k = spec.kernel;
    let s = spec.stride;
    let plane_out = ho * wo;
    let mut col = Array2::<T>::zeros((c * k * k, frames * plane_out));
    let col_data = col.as_slice_mut().unwrap();
    let row_len = frames * plane_out;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let q = (ch * k + ky) * k + kx;
                let dst = &mut col_data[q * row_len..(q + 1) * row_len];
                for f in 0..frames {
                    let src = &input[(ch * frames + f) * h * w..(ch * frames + f + 1) * h * w];
                    for oy in 0..ho {
                        let srow = &src[(oy * s + ky) * w..];
                        let drow = &mut dst[f * plane_out + oy * wo..f * plane_out + (oy + 1) * wo];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            *d = srow[ox * s + kx];
                        }
                    }
                }
            }
        }
    }
    col
}

fn col2im_add<T: Scalar>(
    dcol: &Array2<T>,
    dinput: &mut [T],
    (c, h, w): (usize, usize, usize),
    frames: usize,
    spec: &ConvLayerSpec,
    (ho, wo): (usize, usize),
) {
    let k = spec.kernel;
    let s = spec.stride;
    let plane_out = ho * wo;
    let row_len = frames * plane_out;
    let dcol = dcol.as_slice().unwrap();
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let q = (ch * k + ky) * k + kx;
                let src = &dcol[q * row_len..(q + 1) * row_len];
                for f in 0..frames {
                    let dst = &mut dinput[(ch * frames + f) * h * w..(ch * frames + f + 1) * h * w];
                    for oy in 0..ho {
                        let srow = &src[f * plane_out + oy * wo..f * plane_out + (oy + 1) * wo];
                        let base = (oy * s + ky) * w + kx;
                        for (ox, &v) in srow.iter().enumerate() {
                            dst[base + ox * s] += v;
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> ConvHead<T> {
    pub fn zeros(config: ConvHeadConfig) -> Result<Self> {
        let shapes = config.shapes()?;
        if config.features == 0 {
            return Err(Error::InvalidArgument("conv head needs at least one feature".into()));
        }
        let layers = config
            .layers
            .iter()
            .zip(&shapes)
            .map(|(spec, &(cin, _, _))| ConvLayer {
                spec: *spec,
                in_channels: cin,
                weight: vec![T::zero(); spec.out_channels * cin * spec.kernel * spec.kernel],
                bias: vec![T::zero(); spec.out_channels],
            })
            .collect();
        let flat = config.flat_len()?;
        Ok(ConvHead {
            fc_weight: vec![T::zero(); config.features * flat],
            fc_bias: vec![T::zero(); config.features],
            layers,
            config,
        })
    }

    /// He-uniform convolution weights, `U[-sqrt(3/fan_in), sqrt(3/fan_in)]`
    /// for the affine map, zero biases.
    pub fn init<R: Rng + ?Sized>(config: ConvHeadConfig, rng: &mut R) -> Result<Self> {
        let mut head = Self::zeros(config)?;
        for layer in &mut head.layers {
            let bound = (6.0 / layer.patch_len() as f64).sqrt();
            for w in &mut layer.weight {
                *w = T::lit(rng.random_range(-bound..bound));
            }
        }
        let flat = head.config.flat_len()?;
        let bound = (3.0 / flat as f64).sqrt();
        for w in &mut head.fc_weight {
            *w = T::lit(rng.random_range(-bound..bound));
        }
        Ok(head)
    }

    pub fn features(&self) -> usize {
        self.config.features
    }

    pub fn tensors(&self) -> Vec<(String, &Vec<T>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("conv{i}.weight"), &l.weight));
            out.push((format!("conv{i}.bias"), &l.bias));
        }
        out.push(("fc.weight".to_string(), &self.fc_weight));
        out.push(("fc.bias".to_string(), &self.fc_bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<T>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("conv{i}.weight"), &mut l.weight));
            out.push((format!("conv{i}.bias"), &mut l.bias));
        }
        out.push(("fc.weight".to_string(), &mut self.fc_weight));
        out.push(("fc.bias".to_string(), &mut self.fc_bias));
        out
    }

    /// Forward pass over a batch of flattened frames (`[c][y][x]` each).
    pub fn forward_batch<X: AsRef<[T]>>(&self, frames: &[X]) -> Result<HeadTape<T>> {
        let shapes = self.config.shapes()?;
        let nf = frames.len();
        let in_len = self.config.input_len();
        // frame-major -> channel-major
        let (c0, h0, w0) = shapes[0];
        let mut input = vec![T::zero(); in_len * nf];
        for (f, fr) in frames.iter().enumerate() {
            let fr = fr.as_ref();
            if fr.len() != in_len {
                return Err(Error::Dimension {
                    context: "frame",
                    expected: in_len,
                    actual: fr.len(),
                });
            }
            for ch in 0..c0 {
                let plane = h0 * w0;
                input[(ch * nf + f) * plane..(ch * nf + f + 1) * plane]
                    .copy_from_slice(&fr[ch * plane..(ch + 1) * plane]);
            }
        }

        let mut cols = Vec::with_capacity(self.layers.len());
        let mut outs: Vec<Array2<T>> = Vec::with_capacity(self.layers.len());
        for (li, layer) in self.layers.iter().enumerate() {
            let (_, ho, wo) = shapes[li + 1];
            let src: &[T] = if li == 0 {
                &input
            } else {
                outs[li - 1].as_slice().unwrap()
            };
            let col = im2col(src, shapes[li], nf, &layer.spec, (ho, wo));
            let mut out = Array2::<T>::zeros((layer.spec.out_channels, nf * ho * wo));
            general_mat_mul(T::one(), &layer.weight_view(), &col, T::zero(), &mut out);
            for (mut row, &b) in out.rows_mut().into_iter().zip(&layer.bias) {
                row.mapv_inplace(|v| (v + b).max(T::zero()));
            }
            cols.push(col);
            outs.push(out);
        }

        let (cl, hl, wl) = *shapes.last().unwrap();
        let plane = hl * wl;
        let flat_len = cl * plane;
        let mut flat = Array2::<T>::zeros((flat_len, nf));
        match outs.last() {
            Some(last) => {
                let last = last.as_slice().unwrap();
                for ch in 0..cl {
                    for f in 0..nf {
                        for p in 0..plane {
                            flat[[ch * plane + p, f]] = last[(ch * nf + f) * plane + p];
                        }
                    }
                }
            }
            None => {
                for ch in 0..cl {
                    for f in 0..nf {
                        for p in 0..plane {
                            flat[[ch * plane + p, f]] = input[(ch * nf + f) * plane + p];
                        }
                    }
                }
            }
        }
        let fc = ArrayView2::from_shape((self.config.features, flat_len), &self.fc_weight).unwrap();
        let mut features = Array2::<T>::zeros((self.config.features, nf));
        general_mat_mul(T::one(), &fc, &flat, T::zero(), &mut features);
        for (mut row, &b) in features.rows_mut().into_iter().zip(&self.fc_bias) {
            row.mapv_inplace(|v| v + b);
        }
        Ok(HeadTape {
            frames: nf,
            cols,
            outs,
            flat,
            features,
        })
    }

    /// Accumulates parameter gradients into `grad` given `d features`
    /// (`[feature][frame]`).
    pub fn backward(&self, tape: &HeadTape<T>, dfeatures: &Array2<T>, grad: &mut ConvHead<T>) -> Result<()> {
        let shapes = self.config.shapes()?;
        let nf = tape.frames;
        let flat_len = tape.flat.nrows();
        {
            let mut dfc = ArrayViewMut2::from_shape((self.config.features, flat_len), &mut grad.fc_weight).unwrap();
            general_mat_mul(T::one(), dfeatures, &tape.flat.t(), T::one(), &mut dfc);
        }
        for (gb, row) in grad.fc_bias.iter_mut().zip(dfeatures.rows()) {
            *gb += row.sum();
        }
        if self.layers.is_empty() {
            return Ok(());
        }
        let fc = ArrayView2::from_shape((self.config.features, flat_len), &self.fc_weight).unwrap();
        let mut dflat = Array2::<T>::zeros((flat_len, nf));
        general_mat_mul(T::one(), &fc.t(), dfeatures, T::zero(), &mut dflat);

        let (cl, hl, wl) = *shapes.last().unwrap();
        let plane = hl * wl;
        let mut dout = vec![T::zero(); cl * nf * plane];
        for ch in 0..cl {
            for f in 0..nf {
                for p in 0..plane {
                    dout[(ch * nf + f) * plane + p] = dflat[[ch * plane + p, f]];
                }
            }
        }

        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let out = &tape.outs[li];
            let co = layer.spec.out_channels;
            let fp = out.ncols();
            let mut dpre = Array2::from_shape_vec((co, fp), dout).unwrap();
            ndarray::Zip::from(&mut dpre).and(out).for_each(|d, &o| {
                if o <= T::zero() {
                    *d = T::zero();
                }
            });
            let gl = &mut grad.layers[li];
            {
                let mut dw = ArrayViewMut2::from_shape((co, layer.patch_len()), &mut gl.weight).unwrap();
                general_mat_mul(T::one(), &dpre, &tape.cols[li].t(), T::one(), &mut dw);
            }
            for (gb, row) in gl.bias.iter_mut().zip(dpre.rows()) {
                *gb += row.sum();
            }
            if li == 0 {
                break;
            }
            let mut dcol = Array2::<T>::zeros((layer.patch_len(), fp));
            general_mat_mul(T::one(), &layer.weight_view().t(), &dpre, T::zero(), &mut dcol);
            let (ci, hi, wi) = shapes[li];
            let (_, ho, wo) = shapes[li + 1];
            let mut din = vec![T::zero(); ci * nf * hi * wi];
            col2im_add(&dcol, &mut din, (ci, hi, wi), nf, &layer.spec, (ho, wo));
            dout = din;
        }
        Ok(())
    }

    /// Features of a single frame, optionally with every layer's activation maps.
    pub fn conv_forward(&self, frame: &Frame<T>, keep_maps: bool) -> Result<(Vec<T>, Option<Vec<LayerMaps<T>>>)> {
        if (frame.channels, frame.height, frame.width)
            != (self.config.in_channels, self.config.height, self.config.width)
        {
            return Err(Error::InvalidArgument(format!(
                "frame is {}x{}x{}, head expects {}x{}x{}",
                frame.channels,
                frame.height,
                frame.width,
                self.config.in_channels,
                self.config.height,
                self.config.width
            )));
        }
        let tape = self.forward_batch(&[&frame.data])?;
        let maps = keep_maps.then(|| tape.layer_maps(&self.config, 0));
        Ok((tape.feature(0), maps))
    }

    /// Upper bound on the max-norm Lipschitz constant input -> features.
    pub fn lipschitz_bound(&self) -> T {
        let mut bound = T::one();
        for l in &self.layers {
            let pl = l.patch_len();
            let worst = l
                .weight
                .chunks(pl)
                .map(|row| sum(row.iter().map(|w| w.abs())))
                .fold(T::zero(), T::max);
            bound *= worst;
        }
        let flat = self.fc_weight.len() / self.config.features;
        let worst = self
            .fc_weight
            .chunks(flat)
            .map(|row| sum(row.iter().map(|w| w.abs())))
            .fold(T::zero(), T::max);
        bound * worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_config() -> ConvHeadConfig {
        ConvHeadConfig {
            in_channels: 1,
            height: 9,
            width: 11,
            layers: vec![
                ConvLayerSpec { out_channels: 2, kernel: 3, stride: 2 },
                ConvLayerSpec { out_channels: 3, kernel: 2, stride: 1 },
            ],
            features: 4,
        }
    }

    #[test]
    fn default_shapes() {
        let shapes = ConvHeadConfig::default().shapes().unwrap();
        assert_eq!(shapes, vec![(1, 48, 160), (8, 22, 78), (16, 9, 37), (16, 4, 18)]);
    }

    #[test]
    fn zero_frame_zero_bias_gives_zero_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = ConvHead::<f64>::init(ConvHeadConfig::default(), &mut rng).unwrap();
        let (f, maps) = head.conv_forward(&Frame::filled(1, 48, 160, 0.0), true).unwrap();
        assert_eq!(f.len(), 64);
        assert!(f.iter().all(|&v| v == 0.0));
        assert_eq!(maps.unwrap().len(), 3);
    }

    #[test]
    fn identical_frames_identical_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = ConvHead::<f64>::init(tiny_config(), &mut rng).unwrap();
        let data: Vec<f64> = (0..99).map(|i| ((i * 37) % 17) as f64 / 17.0).collect();
        let fr = Frame::grayscale(9, 11, data).unwrap();
        let tape = head.forward_batch(&[&fr.data, &fr.data]).unwrap();
        assert_eq!(tape.feature(0), tape.feature(1));
        assert_eq!(head.conv_forward(&fr, false).unwrap().0, tape.feature(0));
    }

    #[test]
    fn single_kernel_matches_hand_dot_product() {
        let config = ConvHeadConfig {
            in_channels: 1,
            height: 3,
            width: 3,
            layers: vec![ConvLayerSpec { out_channels: 1, kernel: 3, stride: 1 }],
            features: 1,
        };
        let mut head = ConvHead::<f64>::zeros(config).unwrap();
        head.layers[0].weight = vec![0.5, -1.0, 0.25, 2.0, 0.0, -0.5, 1.0, 0.75, -0.25];
        head.layers[0].bias = vec![0.1];
        head.fc_weight = vec![1.0];
        let px = vec![0.2, 0.4, 0.6, 0.8, 1.0, 0.1, 0.3, 0.5, 0.7];
        // 0.1 - 0.4 + 0.15 + 1.6 + 0 - 0.05 + 0.3 + 0.375 - 0.175 + 0.1 (bias)
        let expected = 0.1 - 0.4 + 0.15 + 1.6 - 0.05 + 0.3 + 0.375 - 0.175 + 0.1;
        let (f, _) = head.conv_forward(&Frame::grayscale(3, 3, px).unwrap(), false).unwrap();
        assert!((f[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let head = ConvHead::<f64>::zeros(tiny_config()).unwrap();
        assert!(head.conv_forward(&Frame::filled(1, 9, 10, 0.0), false).is_err());
        assert!(head.forward_batch(&[vec![0.0; 5]]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let head = ConvHead::<f64>::init(tiny_config(), &mut rng).unwrap();
        let frames: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..99).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let coef: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |h: &ConvHead<f64>| {
            let t = h.forward_batch(&frames).unwrap();
            t.features.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>()
        };
        let tape = head.forward_batch(&frames).unwrap();
        let dfeat = Array2::from_shape_vec((4, 3), coef.clone()).unwrap();
        let mut grad = ConvHead::zeros(tiny_config()).unwrap();
        head.backward(&tape, &dfeat, &mut grad).unwrap();
        let eps = 1e-6;
        for (ti, (name, g)) in grad.tensors().into_iter().enumerate() {
            for idx in 0..g.len() {
                let mut hp = head.clone();
                hp.tensors_mut()[ti].1[idx] += eps;
                let mut hm = head.clone();
                hm.tensors_mut()[ti].1[idx] -= eps;
                let fd = (loss(&hp) - loss(&hm)) / (2.0 * eps);
                assert!((fd - g[idx]).abs() < 1e-6, "{name}[{idx}]: {fd} vs {}", g[idx]);
            }
        }
    }

    #[test]
    fn lipschitz_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let head = ConvHead::<f64>::init(tiny_config(), &mut rng).unwrap();
        let lip = head.lipschitz_bound();
        for _ in 0..50 {
            let base: Vec<f64> = (0..99).map(|_| rng.random_range(0.0..1.0)).collect();
            let delta = rng.random_range(1e-4..0.1);
            let pert: Vec<f64> = base.iter().map(|v| v + rng.random_range(-delta..delta)).collect();
            let t = head.forward_batch(&[&base, &pert]).unwrap();
            let change = t
                .feature(0)
                .iter()
                .zip(t.feature(1))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(change <= lip * delta + 1e-12);
        }
    }

    use rand::Rng;
}
