//! Flat row-major tensors, generic over the floating-point width.
//!
//! Production inference and training run at `f32`; gradient verification
//! instantiates the same code at `f64` so finite differences have headroom.

use std::fmt;

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating-point scalar a [`Tensor`] can hold.
pub trait Real:
    Float
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Send
    + Sync
    + Default
    + fmt::Debug
    + fmt::Display
    + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major tensor; the product of `shape` always equals `data.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {want} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Flat index of `(c, i, j)` in a rank-3 tensor.
    pub fn idx3(&self, c: usize, i: usize, j: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 3);
        (c * self.shape[1] + i) * self.shape[2] + j
    }

    /// Flat index of `(o, c, i, j)` in a rank-4 tensor.
    pub fn idx4(&self, o: usize, c: usize, i: usize, j: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 4);
        ((o * self.shape[1] + c) * self.shape[2] + i) * self.shape[3] + j
    }

    pub fn at3(&self, c: usize, i: usize, j: usize) -> T {
        self.data[self.idx3(c, i, j)]
    }

    pub fn at4(&self, o: usize, c: usize, i: usize, j: usize) -> T {
        self.data[self.idx4(o, c, i, j)]
    }

    /// Debug-mode hook: panics if any entry is NaN or infinite. Compiled out
    /// of release builds.
    pub fn debug_assert_finite(&self, context: &str) {
        debug_assert!(
            self.data.iter().all(|v| v.is_finite()),
            "non-finite value after {context}"
        );
    }
}
