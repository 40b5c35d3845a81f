//! 2-D convolution over NHWC tensors via im2col + GEMM.

use ndarray::{Array2, Array4, ArrayView2, ArrayView4, Ix2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Param, Scalar};

/// Bias-free 2-D convolution (a batch-norm always follows in this crate).
///
/// Weights are stored as a `(kh*kw*cin, cout)` matrix so forward is a single
/// GEMM against the im2col patch matrix.
pub struct Conv2d<A> {
    pub w: Param<A>,
    pub kh: usize,
    pub kw: usize,
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    pub pad: usize,
}

impl<A: Scalar> Conv2d<A> {
    /// He-normal initialization, deterministic given the rng state.
    pub fn new(
        name: &str,
        (kh, kw): (usize, usize),
        cin: usize,
        cout: usize,
        stride: usize,
        pad: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (kh * kw * cin) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).unwrap();
        let w = Array2::from_shape_fn((kh * kw * cin, cout), |_| {
            A::cast(normal.sample(rng))
        });
        Conv2d {
            w: Param::new(format!("{name}.w"), w.into_dyn(), true),
            kh,
            kw,
            cin,
            cout,
            stride,
            pad,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kh) / self.stride + 1,
            (w + 2 * self.pad - self.kw) / self.stride + 1,
        )
    }

    fn weight(&self) -> ArrayView2<'_, A> {
        self.w.value.view().into_dimensionality::<Ix2>().unwrap()
    }

    pub fn forward(&self, x: &ArrayView4<'_, A>) -> Array4<A> {
        let (b, h, w, cin) = x.dim();
        debug_assert_eq!(cin, self.cin);
        let (ho, wo) = self.out_hw(h, w);
        let cols = self.im2col(x, ho, wo);
        let y = cols.dot(&self.weight());
        super::from_rows(y, (b, ho, wo, self.cout))
    }

    /// Accumulates the weight gradient; returns dx when requested.
    pub fn backward(
        &mut self,
        x: &ArrayView4<'_, A>,
        dy: &Array4<A>,
        need_dx: bool,
    ) -> Option<Array4<A>> {
        let (b, h, w, _) = x.dim();
        let (bo, ho, wo, cout) = dy.dim();
        debug_assert_eq!(b, bo);
        debug_assert_eq!(cout, self.cout);
        let cols = self.im2col(x, ho, wo);
        let dy2 = super::as_rows(dy);

        if need_dx {
            let wt = self.weight();
            let (dw, dcols) =
                rayon::join(|| cols.t().dot(&dy2), || dy2.dot(&wt.t()));
            self.accumulate_dw(dw);
            Some(self.col2im(&dcols, b, h, w, ho, wo))
        } else {
            let dw = cols.t().dot(&dy2);
            self.accumulate_dw(dw);
            None
        }
    }

    fn accumulate_dw(&mut self, dw: Array2<A>) {
        let mut g = self
            .w
            .grad
            .view_mut()
            .into_dimensionality::<Ix2>()
            .unwrap();
        g += &dw;
    }

    /// Patch matrix: row (b, ho, wo), column (kh, kw, cin).
    fn im2col(&self, x: &ArrayView4<'_, A>, ho: usize, wo: usize) -> Array2<A> {
        let (b, h, w, cin) = x.dim();
        let k = self.kh * self.kw * cin;
        let mut cols = Array2::<A>::zeros((b * ho * wo, k));
        let xs = x.as_slice().expect("input map is standard layout");
        let cs = cols.as_slice_mut().unwrap();
        let (stride, pad) = (self.stride, self.pad);
        for bi in 0..b {
            let x_base = bi * h * w * cin;
            for oy in 0..ho {
                for ox in 0..wo {
                    let row = ((bi * ho) + oy) * wo + ox;
                    let row_base = row * k;
                    for ky in 0..self.kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for kx in 0..self.kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            let src = x_base + ((iy as usize * w) + ix as usize) * cin;
                            let dst = row_base + (ky * self.kw + kx) * cin;
                            cs[dst..dst + cin].copy_from_slice(&xs[src..src + cin]);
                        }
                    }
                }
            }
        }
        cols
    }

    /// Scatter-add of the patch-gradient matrix back onto the input grid.
    fn col2im(
        &self,
        dcols: &Array2<A>,
        b: usize,
        h: usize,
        w: usize,
        ho: usize,
        wo: usize,
    ) -> Array4<A> {
        let cin = self.cin;
        let mut dx = Array4::<A>::zeros((b, h, w, cin));
        let ds = dcols.as_slice().unwrap();
        let out = dx.as_slice_mut().unwrap();
        let k = self.kh * self.kw * cin;
        let (stride, pad) = (self.stride, self.pad);
        for bi in 0..b {
            let x_base = bi * h * w * cin;
            for oy in 0..ho {
                for ox in 0..wo {
                    let row = ((bi * ho) + oy) * wo + ox;
                    let row_base = row * k;
                    for ky in 0..self.kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for kx in 0..self.kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            let dst = x_base + ((iy as usize * w) + ix as usize) * cin;
                            let src = row_base + (ky * self.kw + kx) * cin;
                            for c in 0..cin {
                                out[dst + c] = out[dst + c] + ds[src + c];
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}
