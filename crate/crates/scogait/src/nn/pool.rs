//! Temporal set pooling and horizontal part pooling.

use ndarray::{Array3, Array4};

use crate::error::{Error, Result};

use super::Scalar;

/// Order-invariant aggregation over the frame axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalPooling {
    Max,
    Mean,
}

pub enum TpCache {
    /// Winning frame offset per (view, y, x, c).
    Max(Array4<u32>),
    Mean,
}

/// Pool (B*n, H, W, C) frame features down to (B, H, W, C) per view.
pub fn temporal_pool<A: Scalar>(
    x: &Array4<A>,
    n_per_view: usize,
    kind: TemporalPooling,
) -> (Array4<A>, TpCache) {
    let (total, h, w, c) = x.dim();
    assert!(n_per_view >= 1 && total % n_per_view == 0);
    let b = total / n_per_view;
    match kind {
        TemporalPooling::Max => {
            let mut out = Array4::<A>::zeros((b, h, w, c));
            let mut arg = Array4::<u32>::zeros((b, h, w, c));
            for v in 0..b {
                let mut o = out.index_axis_mut(ndarray::Axis(0), v);
                let mut a = arg.index_axis_mut(ndarray::Axis(0), v);
                o.assign(&x.index_axis(ndarray::Axis(0), v * n_per_view));
                for f in 1..n_per_view {
                    let frame = x.index_axis(ndarray::Axis(0), v * n_per_view + f);
                    ndarray::Zip::from(&mut o)
                        .and(&mut a)
                        .and(&frame)
                        .for_each(|best, win, &v2| {
                            if v2 > *best {
                                *best = v2;
                                *win = f as u32;
                            }
                        });
                }
            }
            (out, TpCache::Max(arg))
        }
        TemporalPooling::Mean => {
            let mut out = Array4::<A>::zeros((b, h, w, c));
            for v in 0..b {
                let mut o = out.index_axis_mut(ndarray::Axis(0), v);
                for f in 0..n_per_view {
                    o += &x.index_axis(ndarray::Axis(0), v * n_per_view + f);
                }
            }
            let nf = A::cast(n_per_view as f64);
            out.mapv_inplace(|v| v / nf);
            (out, TpCache::Mean)
        }
    }
}

pub fn temporal_pool_backward<A: Scalar>(
    cache: &TpCache,
    dy: &Array4<A>,
    n_per_view: usize,
) -> Array4<A> {
    let (b, h, w, c) = dy.dim();
    let mut dx = Array4::<A>::zeros((b * n_per_view, h, w, c));
    match cache {
        TpCache::Max(arg) => {
            for v in 0..b {
                let dyv = dy.index_axis(ndarray::Axis(0), v);
                let av = arg.index_axis(ndarray::Axis(0), v);
                for ((y, x2, ch), &g) in dyv.indexed_iter() {
                    let f = av[[y, x2, ch]] as usize;
                    dx[[v * n_per_view + f, y, x2, ch]] = g;
                }
            }
        }
        TpCache::Mean => {
            let nf = A::cast(n_per_view as f64);
            for v in 0..b {
                let dyv = dy.index_axis(ndarray::Axis(0), v).mapv(|g| g / nf);
                for f in 0..n_per_view {
                    dx.index_axis_mut(ndarray::Axis(0), v * n_per_view + f)
                        .assign(&dyv);
                }
            }
        }
    }
    dx
}

pub struct HpCache {
    /// Flat (row-in-strip * W + col) index of the max per (view, part, c).
    argmax: Array3<u32>,
    strip_h: usize,
    width: usize,
}

/// Split the map into `parts` horizontal strips; per strip and channel,
/// global max-pool plus global average-pool, summed.
pub fn horizontal_pool<A: Scalar>(z: &Array4<A>, parts: usize) -> Result<(Array3<A>, HpCache)> {
    let (b, h, w, c) = z.dim();
    if h < parts || h % parts != 0 {
        return Err(Error::Shape(format!(
            "feature height {h} not divisible into {parts} strips"
        )));
    }
    let strip_h = h / parts;
    let area = A::cast((strip_h * w) as f64);
    let mut out = Array3::<A>::zeros((b, parts, c));
    let mut argmax = Array3::<u32>::zeros((b, parts, c));
    for v in 0..b {
        for p in 0..parts {
            for ch in 0..c {
                let mut best = z[[v, p * strip_h, 0, ch]];
                let mut best_i = 0u32;
                let mut sum = A::zero();
                for sy in 0..strip_h {
                    for sx in 0..w {
                        let val = z[[v, p * strip_h + sy, sx, ch]];
                        sum = sum + val;
                        let flat = (sy * w + sx) as u32;
                        if val > best {
                            best = val;
                            best_i = flat;
                        }
                    }
                }
                out[[v, p, ch]] = best + sum / area;
                argmax[[v, p, ch]] = best_i;
            }
        }
    }
    Ok((
        out,
        HpCache {
            argmax,
            strip_h,
            width: w,
        },
    ))
}

pub fn horizontal_pool_backward<A: Scalar>(
    cache: &HpCache,
    dy: &Array3<A>,
    map_dims: (usize, usize, usize, usize),
) -> Array4<A> {
    let (b, parts, c) = dy.dim();
    let (bz, h, w, cz) = map_dims;
    debug_assert_eq!(b, bz);
    debug_assert_eq!(c, cz);
    debug_assert_eq!(h, parts * cache.strip_h);
    debug_assert_eq!(w, cache.width);
    let area = A::cast((cache.strip_h * w) as f64);
    let mut dz = Array4::<A>::zeros(map_dims);
    for v in 0..b {
        for p in 0..parts {
            for ch in 0..c {
                let g = dy[[v, p, ch]];
                let spread = g / area;
                for sy in 0..cache.strip_h {
                    for sx in 0..w {
                        dz[[v, p * cache.strip_h + sy, sx, ch]] = spread;
                    }
                }
                let flat = cache.argmax[[v, p, ch]] as usize;
                let (sy, sx) = (flat / w, flat % w);
                dz[[v, p * cache.strip_h + sy, sx, ch]] =
                    dz[[v, p * cache.strip_h + sy, sx, ch]] + g;
            }
        }
    }
    dz
}
