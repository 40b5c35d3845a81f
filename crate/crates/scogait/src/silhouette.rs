//! Silhouette loading and size normalization.
//!
//! Raw binary masks come in arbitrary sizes with the body anywhere in the
//! frame. Normalization produces fixed-size, body-centered crops: the
//! foreground is cropped to its tight vertical extent, rescaled
//! aspect-preserving to the target height, re-binarized, and shifted so the
//! foreground x-centroid sits on the width midline. The whole pass is
//! iterated to a fixed point, which makes `normalize_silhouette` idempotent.

use std::path::Path;

use image::DynamicImage;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Default normalized frame height in pixels.
pub const DEFAULT_H: usize = 64;
/// Default normalized frame width in pixels.
pub const DEFAULT_W: usize = 44;

/// One raw binary body mask. Values are exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilhouetteFrame {
    pub mask: Array2<u8>,
}

impl SilhouetteFrame {
    /// Wrap a 0/1 mask. Panics on values outside {0, 1}.
    pub fn from_mask(mask: Array2<u8>) -> Self {
        assert!(
            mask.iter().all(|&v| v <= 1),
            "silhouette mask must be binary"
        );
        SilhouetteFrame { mask }
    }

    pub fn height(&self) -> usize {
        self.mask.nrows()
    }

    pub fn width(&self) -> usize {
        self.mask.ncols()
    }

    /// True when the mask has no foreground pixels.
    pub fn is_empty(&self) -> bool {
        self.mask.iter().all(|&v| v == 0)
    }
}

/// A body-centered binary crop of exactly the target size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedFrame {
    pub mask: Array2<u8>,
}

impl NormalizedFrame {
    pub fn height(&self) -> usize {
        self.mask.nrows()
    }

    pub fn width(&self) -> usize {
        self.mask.ncols()
    }
}

/// Load a single-channel 8-bit image as a binary mask: values > 127 map to 1.
///
/// Multi-channel images are accepted only when all color channels agree per
/// pixel; otherwise the file is rejected as a format error.
pub fn load_silhouette(path: &Path) -> Result<SilhouetteFrame> {
    let img = image::open(path).map_err(|source| Error::ImageLoad {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = match &img {
        DynamicImage::ImageLuma8(g) => g.clone(),
        DynamicImage::ImageLumaA8(ga) => {
            let mut g = image::GrayImage::new(img.width(), img.height());
            for (x, y, p) in ga.enumerate_pixels() {
                g.put_pixel(x, y, image::Luma([p.0[0]]));
            }
            g
        }
        other => {
            let rgb = other.to_rgb8();
            for p in rgb.pixels() {
                if p.0[0] != p.0[1] || p.0[1] != p.0[2] {
                    return Err(Error::ImageFormat {
                        path: path.to_path_buf(),
                    });
                }
            }
            DynamicImage::ImageRgb8(rgb).to_luma8()
        }
    };
    let mut mask = Array2::<u8>::zeros((h, w));
    for (x, y, p) in gray.enumerate_pixels() {
        mask[[y as usize, x as usize]] = u8::from(p.0[0] > 127);
    }
    Ok(SilhouetteFrame { mask })
}

/// Normalize one silhouette to a `target_h` x `target_w` body-centered crop.
pub fn normalize_silhouette(
    frame: &SilhouetteFrame,
    target_h: usize,
    target_w: usize,
) -> Result<NormalizedFrame> {
    assert!(target_h >= 2 && target_w >= 2, "degenerate target size");
    if frame.is_empty() {
        return Err(Error::EmptySilhouette);
    }
    // Iterate crop/resize/center to a fixed point. A single pass already
    // lands on the fixed point for well-formed masks; extreme downscales can
    // lose boundary rows to re-binarization, and the extra passes restore the
    // tight-crop and centering invariants.
    let mut cur = normalize_pass(&frame.mask, target_h, target_w)?;
    for _ in 0..3 {
        let next = normalize_pass(&cur, target_h, target_w)?;
        if next == cur {
            break;
        }
        cur = next;
    }
    Ok(NormalizedFrame { mask: cur })
}

/// Normalize every frame, dropping empty ones. Errors if all frames drop.
pub fn normalize_sequence(
    frames: &[SilhouetteFrame],
    target_h: usize,
    target_w: usize,
) -> Result<Vec<NormalizedFrame>> {
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        match normalize_silhouette(frame, target_h, target_w) {
            Ok(n) => out.push(n),
            Err(Error::EmptySilhouette) => {}
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(out)
}

fn normalize_pass(mask: &Array2<u8>, target_h: usize, target_w: usize) -> Result<Array2<u8>> {
    let bbox = foreground_bbox(mask).ok_or(Error::EmptySilhouette)?;
    let (r0, r1, c0, c1) = bbox;
    let crop = mask.slice(ndarray::s![r0..=r1, c0..=c1]);
    let crop_h = crop.nrows();
    let crop_w = crop.ncols();

    // Aspect-preserving rescale to the target height.
    let scale = target_h as f64 / crop_h as f64;
    let out_w = ((crop_w as f64 * scale).round() as usize).max(1);
    let resized = resize_area(&crop.to_owned(), target_h, out_w);

    // Center the foreground x-centroid on the width midline.
    let mut col_sum = 0.0f64;
    let mut n_fg = 0.0f64;
    for ((_, c), &v) in resized.indexed_iter() {
        if v == 1 {
            col_sum += c as f64;
            n_fg += 1.0;
        }
    }
    if n_fg == 0.0 {
        return Err(Error::EmptySilhouette);
    }
    let centroid = col_sum / n_fg;
    let offset = (target_w as f64 / 2.0 - centroid).floor() as isize;

    let mut out = Array2::<u8>::zeros((target_h, target_w));
    let mut clipped = false;
    for ((r, c), &v) in resized.indexed_iter() {
        if v == 0 {
            continue;
        }
        let dest = c as isize + offset;
        if dest >= 0 && (dest as usize) < target_w {
            out[[r, dest as usize]] = 1;
        } else {
            clipped = true;
        }
    }
    if clipped {
        log::warn!(
            "silhouette wider than target after rescale ({out_w} > {target_w}); cropped about centroid"
        );
    }
    Ok(out)
}

/// Tight bounding box of foreground as (row0, row1, col0, col1), inclusive.
fn foreground_bbox(mask: &Array2<u8>) -> Option<(usize, usize, usize, usize)> {
    let mut r0 = usize::MAX;
    let mut r1 = 0usize;
    let mut c0 = usize::MAX;
    let mut c1 = 0usize;
    let mut any = false;
    for ((r, c), &v) in mask.indexed_iter() {
        if v == 1 {
            any = true;
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
        }
    }
    any.then_some((r0, r1, c0, c1))
}

/// Box-filter (area-average) resample of a binary mask, re-binarized at 0.5.
///
/// Exact identity when source and destination sizes match, which is what
/// makes the normalization pass idempotent once the crop spans full height.
fn resize_area(src: &Array2<u8>, dst_h: usize, dst_w: usize) -> Array2<u8> {
    let (sh, sw) = (src.nrows(), src.ncols());
    let rows = overlap_spans(sh, dst_h);
    let cols = overlap_spans(sw, dst_w);

    // Separable two-pass averaging.
    let mut tmp = Array2::<f64>::zeros((dst_h, sw));
    for (di, spans) in rows.iter().enumerate() {
        for &(si, w) in spans {
            for c in 0..sw {
                tmp[[di, c]] += w * f64::from(src[[si, c]]);
            }
        }
    }
    let mut out = Array2::<u8>::zeros((dst_h, dst_w));
    for (dj, spans) in cols.iter().enumerate() {
        for r in 0..dst_h {
            let mut acc = 0.0;
            for &(sj, w) in spans {
                acc += w * tmp[[r, sj]];
            }
            out[[r, dj]] = u8::from(acc >= 0.5);
        }
    }
    out
}

/// For each destination cell, the source cells it overlaps and their
/// normalized weights (weights sum to 1 per destination cell).
fn overlap_spans(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let lo = d as f64 * ratio;
            let hi = (d + 1) as f64 * ratio;
            let first = lo.floor() as usize;
            let last = ((hi - 1e-12).floor() as usize).min(src - 1);
            let mut spans = Vec::with_capacity(last - first + 1);
            for s in first..=last {
                let overlap = (hi.min((s + 1) as f64) - lo.max(s as f64)).max(0.0);
                spans.push((s, overlap / ratio));
            }
            spans
        })
        .collect()
}
