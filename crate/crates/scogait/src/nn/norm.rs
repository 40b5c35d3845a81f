//! Batch normalization over (rows, features) matrices.
//!
//! Feature maps normalize per channel by viewing NHWC as (B*H*W, C); the
//! BNNeck normalizes flattened per-part embeddings the same way. Training
//! mode uses biased batch statistics and updates the running estimates;
//! eval mode applies the running affine only.

use ndarray::{Array1, Array2, ArrayView2, Ix1};

use super::{Buffer, Param, Scalar};

pub struct BatchNorm<A> {
    pub gamma: Param<A>,
    pub beta: Param<A>,
    pub running_mean: Buffer<A>,
    pub running_var: Buffer<A>,
    pub momentum: f64,
    pub eps: f64,
}

/// Per-call state needed by the backward pass.
pub struct BnCache<A> {
    xhat: Array2<A>,
    invstd: Array1<A>,
    batch_stats: bool,
}

impl<A: Scalar> BatchNorm<A> {
    pub fn new(name: &str, features: usize) -> Self {
        BatchNorm {
            gamma: Param::new(format!("{name}.gamma"), Array1::ones(features).into_dyn(), false),
            beta: Param::new(format!("{name}.beta"), Array1::zeros(features).into_dyn(), false),
            running_mean: Buffer::new(format!("{name}.running_mean"), Array1::<A>::zeros(features).into_dyn()),
            running_var: Buffer::new(format!("{name}.running_var"), Array1::<A>::ones(features).into_dyn()),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    fn gamma1(&self) -> ndarray::ArrayView1<'_, A> {
        self.gamma.value.view().into_dimensionality::<Ix1>().unwrap()
    }

    fn beta1(&self) -> ndarray::ArrayView1<'_, A> {
        self.beta.value.view().into_dimensionality::<Ix1>().unwrap()
    }

    /// Training forward: batch statistics, running-estimate update.
    pub fn forward_train(&mut self, x: &ArrayView2<'_, A>) -> (Array2<A>, BnCache<A>) {
        let n = x.nrows();
        assert!(n > 1, "batch norm needs more than one row in training mode");
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        let mut var = Array1::<A>::zeros(x.ncols());
        for row in x.rows() {
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j];
                var[j] = var[j] + d * d;
            }
        }
        let nf = A::cast(n as f64);
        var.mapv_inplace(|v| v / nf);

        let eps = A::cast(self.eps);
        let invstd = var.mapv(|v| A::one() / (v + eps).sqrt());

        let mut xhat = x.to_owned();
        for mut row in xhat.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[j]) * invstd[j];
            }
        }
        let y = self.affine(&xhat);

        let m = A::cast(self.momentum);
        let one_m = A::one() - m;
        {
            let mut rm = self.running_mean.value.view_mut().into_dimensionality::<Ix1>().unwrap();
            let mut rv = self.running_var.value.view_mut().into_dimensionality::<Ix1>().unwrap();
            for j in 0..mean.len() {
                rm[j] = one_m * rm[j] + m * mean[j];
                rv[j] = one_m * rv[j] + m * var[j];
            }
        }
        (
            y,
            BnCache {
                xhat,
                invstd,
                batch_stats: true,
            },
        )
    }

    /// Eval forward without cache (prediction path).
    pub fn forward_eval(&self, x: &ArrayView2<'_, A>) -> Array2<A> {
        self.forward_eval_impl(x).0
    }

    /// Eval forward with cache (activation-map path).
    pub fn forward_eval_cached(&self, x: &ArrayView2<'_, A>) -> (Array2<A>, BnCache<A>) {
        let (y, xhat, invstd) = self.forward_eval_impl(x);
        (
            y,
            BnCache {
                xhat,
                invstd,
                batch_stats: false,
            },
        )
    }

    fn forward_eval_impl(&self, x: &ArrayView2<'_, A>) -> (Array2<A>, Array2<A>, Array1<A>) {
        let rm = self.running_mean.value.view().into_dimensionality::<Ix1>().unwrap();
        let rv = self.running_var.value.view().into_dimensionality::<Ix1>().unwrap();
        let eps = A::cast(self.eps);
        let invstd = rv.mapv(|v| A::one() / (v + eps).sqrt());
        let mut xhat = x.to_owned();
        for mut row in xhat.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - rm[j]) * invstd[j];
            }
        }
        let y = self.affine(&xhat);
        (y, xhat, invstd)
    }

    fn affine(&self, xhat: &Array2<A>) -> Array2<A> {
        let g = self.gamma1();
        let b = self.beta1();
        let mut y = xhat.clone();
        for mut row in y.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * g[j] + b[j];
            }
        }
        y
    }

    /// Accumulates gamma/beta gradients; returns dx.
    pub fn backward(&mut self, cache: &BnCache<A>, dy: &ArrayView2<'_, A>) -> Array2<A> {
        let n = dy.nrows();
        let c = dy.ncols();
        let mut dgamma = Array1::<A>::zeros(c);
        let mut dbeta = Array1::<A>::zeros(c);
        for (dy_row, xh_row) in dy.rows().into_iter().zip(cache.xhat.rows()) {
            for j in 0..c {
                dgamma[j] = dgamma[j] + dy_row[j] * xh_row[j];
                dbeta[j] = dbeta[j] + dy_row[j];
            }
        }

        let g = self.gamma1().to_owned();
        let mut dx = Array2::<A>::zeros((n, c));
        if cache.batch_stats {
            let nf = A::cast(n as f64);
            for ((mut dx_row, dy_row), xh_row) in dx
                .rows_mut()
                .into_iter()
                .zip(dy.rows())
                .zip(cache.xhat.rows())
            {
                for j in 0..c {
                    let term = nf * dy_row[j] - dbeta[j] - xh_row[j] * dgamma[j];
                    dx_row[j] = g[j] * cache.invstd[j] / nf * term;
                }
            }
        } else {
            for (mut dx_row, dy_row) in dx.rows_mut().into_iter().zip(dy.rows()) {
                for j in 0..c {
                    dx_row[j] = dy_row[j] * g[j] * cache.invstd[j];
                }
            }
        }

        {
            let mut gg = self.gamma.grad.view_mut().into_dimensionality::<Ix1>().unwrap();
            let mut gb = self.beta.grad.view_mut().into_dimensionality::<Ix1>().unwrap();
            gg += &dgamma;
            gb += &dbeta;
        }
        dx
    }
}
