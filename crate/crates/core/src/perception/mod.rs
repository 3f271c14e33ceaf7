//! Camera frames, the convolutional feature head, VisualBackprop saliency
//! and input-noise injection.

mod conv;
mod frame;
pub mod image_io;
mod noise;
mod saliency;

pub use conv::{ConvHead, ConvHeadConfig, ConvLayer, ConvLayerSpec, HeadTape, LayerMaps};
pub use frame::{Frame, SaliencyMap, FRAME_HEIGHT, FRAME_WIDTH};
pub use noise::{add_gaussian_noise, noise_field};
pub use image_io::{write_csv_grid, write_pgm, write_png};
pub use saliency::{normalize_min_max, upsample_nearest, visual_backprop};

use crate::error::Result;
use crate::scalar::Scalar;

/// Saliency of one frame under `head`, at the frame's resolution.
pub fn saliency<T: Scalar>(head: &ConvHead<T>, frame: &Frame<T>) -> Result<SaliencyMap<T>> {
    let (_, maps) = head.conv_forward(frame, true)?;
    visual_backprop(&maps.unwrap_or_default(), frame.height, frame.width)
}
