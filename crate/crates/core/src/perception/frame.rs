use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default camera frame size.
pub const FRAME_HEIGHT: usize = 48;
pub const FRAME_WIDTH: usize = 160;

/// Intensity image stored channel-major (`[c][y][x]`), values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Frame<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        let want = channels * height * width;
        if data.len() != want {
            return Err(Error::Dimension {
                context: "frame data",
                expected: want,
                actual: data.len(),
            });
        }
        Ok(Frame {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: T) -> Self {
        Frame {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn grayscale(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        Self::new(1, height, width, data)
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut T {
        &mut self.data[(c * self.height + y) * self.width + x]
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.max(T::zero()).min(T::one());
        }
    }

    pub fn cast<U: Scalar>(&self) -> Frame<U> {
        Frame {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Single-channel relevance image, normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap<T> {
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> SaliencyMap<T> {
    #[inline]
    pub fn at(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }
}
