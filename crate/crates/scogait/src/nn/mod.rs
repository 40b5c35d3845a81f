//! Minimal neural-network building blocks with hand-written backward passes.
//!
//! Everything is generic over [`Scalar`] so training runs in f32 while the
//! finite-difference gradient check instantiates the same code in f64. All
//! operations are deterministic: GEMMs go through `ndarray`'s matrixmultiply
//! backend and reductions run in a fixed order.

mod conv;
mod linear;
mod norm;
mod pool;
mod sgd;

pub use conv::Conv2d;
pub use linear::{LinearInit, PartLinear};
pub use norm::{BatchNorm, BnCache};
pub use pool::{
    horizontal_pool, horizontal_pool_backward, temporal_pool, temporal_pool_backward, HpCache,
    TemporalPooling, TpCache,
};
pub use sgd::Sgd;

use ndarray::{Array2, Array4, ArrayD, ArrayView2};

/// Element type of the network: f32 for speed, f64 for gradient checks.
pub trait Scalar: ndarray::NdFloat + num_traits::FromPrimitive + std::iter::Sum {
    const DTYPE: &'static str;

    fn cast(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn write_le(values: &[Self], out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Option<Vec<Self>>;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    fn cast(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    fn write_le(values: &[Self], out: &mut Vec<u8>) {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn read_le(bytes: &[u8]) -> Option<Vec<Self>> {
        if bytes.len() % 4 != 0 {
            return None;
        }
        Some(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    fn cast(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }

    fn write_le(values: &[Self], out: &mut Vec<u8>) {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn read_le(bytes: &[u8]) -> Option<Vec<Self>> {
        if bytes.len() % 8 != 0 {
            return None;
        }
        Some(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }
}

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param<A> {
    pub name: String,
    pub value: ArrayD<A>,
    pub grad: ArrayD<A>,
    /// Whether weight decay applies (true for conv/linear weights, false for
    /// biases and batch-norm scale/shift).
    pub decay: bool,
}

impl<A: Scalar> Param<A> {
    pub fn new(name: impl Into<String>, value: ArrayD<A>, decay: bool) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Param {
            name: name.into(),
            value,
            grad,
            decay,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(A::zero());
    }
}

/// A non-trainable named tensor (batch-norm running statistics).
#[derive(Debug, Clone)]
pub struct Buffer<A> {
    pub name: String,
    pub value: ArrayD<A>,
}

impl<A: Scalar> Buffer<A> {
    pub fn new(name: impl Into<String>, value: ArrayD<A>) -> Self {
        Buffer {
            name: name.into(),
            value,
        }
    }
}

/// View an NHWC feature map as a (B*H*W, C) matrix.
pub(crate) fn as_rows<A: Scalar>(x: &Array4<A>) -> ArrayView2<'_, A> {
    let (b, h, w, c) = x.dim();
    x.view()
        .into_shape_with_order((b * h * w, c))
        .expect("NHWC maps are standard layout")
}

/// Rebuild an NHWC feature map from its (B*H*W, C) matrix form.
pub(crate) fn from_rows<A: Scalar>(x: Array2<A>, dims: (usize, usize, usize, usize)) -> Array4<A> {
    x.into_shape_with_order(dims)
        .expect("row matrix matches NHWC dims")
}

/// ReLU forward in place; returns the mask-carrying output.
pub(crate) fn relu_inplace<A: Scalar>(x: &mut ArrayD<A>) {
    x.mapv_inplace(|v| if v > A::zero() { v } else { A::zero() });
}

/// ReLU backward: zero the gradient wherever the forward output was zero.
pub(crate) fn relu_backward_inplace<A: Scalar>(grad: &mut Array4<A>, out: &Array4<A>) {
    ndarray::Zip::from(grad).and(out).for_each(|g, &o| {
        if o <= A::zero() {
            *g = A::zero();
        }
    });
}
