//! Deterministic synthetic walking-silhouette generator.
//!
//! Renders a frontal 2-D articulated figure (ellipse head, trapezoid torso,
//! two 2-segment legs, two arms) swinging sinusoidally. Postural asymmetry is
//! controlled per subject: `shoulder_tilt` rotates the shoulder line,
//! `trunk_lean` shears the torso, `head_offset` translates the head
//! laterally. Classes are separable by construction when the per-class
//! asymmetry intervals are disjoint, which makes desk-scale training and the
//! imbalance study possible without the real dataset.

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, DiagnosticLabel, Manifest, LABELS};
use crate::error::{Error, Result};
use crate::silhouette::SilhouetteFrame;

/// Raw render canvas edge length in pixels.
pub const CANVAS: usize = 128;

/// Full parameter set for one synthetic subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerParams {
    pub torso_height: f64,
    pub torso_width: f64,
    pub leg_length: f64,
    pub arm_length: f64,
    /// Gait phase advance per frame, radians.
    pub cadence: f64,
    /// Maximum limb swing from vertical, radians.
    pub stride_amplitude: f64,
    /// Signed shoulder-line rotation, degrees. Positive raises the right
    /// shoulder.
    pub shoulder_tilt: f64,
    /// Signed lateral torso shear, degrees.
    pub trunk_lean: f64,
    /// Signed lateral head translation, pixels.
    pub head_offset: f64,
    /// Per-pixel salt-noise probability inside the dilated body box.
    pub noise_level: f64,
    /// Initial gait phase, radians. Varies per sequence of a subject.
    pub phase: f64,
    /// Noise stream seed. Varies per sequence of a subject.
    pub seed: u64,
}

impl WalkerParams {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("torso_height", self.torso_height),
            ("torso_width", self.torso_width),
            ("leg_length", self.leg_length),
            ("arm_length", self.arm_length),
        ];
        for (name, v) in lengths {
            if v <= 0.0 {
                return Err(Error::Config(format!("walker {name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=0.05).contains(&self.noise_level) {
            return Err(Error::Config(format!(
                "noise_level {} outside [0, 0.05]",
                self.noise_level
            )));
        }
        if self.shoulder_tilt.abs() > 20.0 {
            return Err(Error::Config(format!(
                "|shoulder_tilt| {} exceeds 20 degrees",
                self.shoulder_tilt
            )));
        }
        if self.trunk_lean.abs() > 15.0 {
            return Err(Error::Config(format!(
                "|trunk_lean| {} exceeds 15 degrees",
                self.trunk_lean
            )));
        }
        Ok(())
    }
}

impl Default for WalkerParams {
    fn default() -> Self {
        WalkerParams {
            torso_height: 33.0,
            torso_width: 26.0,
            leg_length: 46.0,
            arm_length: 27.0,
            cadence: 0.32,
            stride_amplitude: 0.45,
            shoulder_tilt: 0.0,
            trunk_lean: 0.0,
            head_offset: 0.0,
            noise_level: 0.0,
            phase: 0.0,
            seed: 0,
        }
    }
}

/// Inclusive sampling interval.
pub type Interval = [f64; 2];

/// Asymmetry sampling ranges for one diagnostic class. Magnitudes are drawn
/// uniformly from the interval; the sign is random per subject.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AsymmetryRange {
    pub shoulder_tilt: Interval,
    pub trunk_lean: Interval,
    pub head_offset: Interval,
}

/// Specification of a whole synthetic dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    /// Subjects per class, ordered positive/neutral/negative.
    pub subjects: [usize; 3],
    pub sequences_per_subject: usize,
    pub frames_per_sequence: usize,
    pub noise_level: f64,
    pub positive: AsymmetryRange,
    pub neutral: AsymmetryRange,
    pub negative: AsymmetryRange,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            subjects: [20, 20, 160],
            sequences_per_subject: 1,
            frames_per_sequence: 60,
            noise_level: 0.01,
            positive: AsymmetryRange {
                shoulder_tilt: [8.0, 15.0],
                trunk_lean: [3.0, 8.0],
                head_offset: [2.0, 5.0],
            },
            neutral: AsymmetryRange {
                shoulder_tilt: [4.0, 6.0],
                trunk_lean: [1.0, 3.0],
                head_offset: [1.0, 2.5],
            },
            negative: AsymmetryRange {
                shoulder_tilt: [0.0, 2.0],
                trunk_lean: [0.0, 1.0],
                head_offset: [0.0, 1.0],
            },
        }
    }
}

impl SynthSpec {
    pub fn range_for(&self, label: DiagnosticLabel) -> &AsymmetryRange {
        match label {
            DiagnosticLabel::Positive => &self.positive,
            DiagnosticLabel::Neutral => &self.neutral,
            DiagnosticLabel::Negative => &self.negative,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sequences_per_subject == 0 {
            return Err(Error::Config("sequences_per_subject must be >= 1".into()));
        }
        if self.frames_per_sequence == 0 {
            return Err(Error::Config("frames_per_sequence must be >= 1".into()));
        }
        if !(0.0..=0.05).contains(&self.noise_level) {
            return Err(Error::Config(format!(
                "noise_level {} outside [0, 0.05]",
                self.noise_level
            )));
        }
        for r in [&self.positive, &self.neutral, &self.negative] {
            for iv in [r.shoulder_tilt, r.trunk_lean, r.head_offset] {
                if iv[0] > iv[1] || iv[0] < 0.0 {
                    return Err(Error::Config(format!(
                        "asymmetry interval [{}, {}] must satisfy 0 <= lo <= hi",
                        iv[0], iv[1]
                    )));
                }
            }
        }
        // Classes must be separable on the dominant axis.
        let ivs = [
            ("positive", self.positive.shoulder_tilt),
            ("neutral", self.neutral.shoulder_tilt),
            ("negative", self.negative.shoulder_tilt),
        ];
        for i in 0..3 {
            for j in i + 1..3 {
                let (na, a) = ivs[i];
                let (nb, b) = ivs[j];
                if a[0] <= b[1] && b[0] <= a[1] {
                    return Err(Error::Config(format!(
                        "shoulder_tilt intervals of {na} and {nb} overlap"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load_toml(path: &Path) -> Result<SynthSpec> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("read synth spec {}", path.display()), e))?;
        let spec: SynthSpec =
            toml::from_str(&text).map_err(|e| Error::Config(format!("synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save_toml(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Other(format!("serialize synth spec: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io("write synth spec", e))
    }
}

#[derive(Debug, Clone, Copy)]
struct Pt {
    x: f64,
    y: f64,
}

fn pt(x: f64, y: f64) -> Pt {
    Pt { x, y }
}

/// Key joint positions of one rendered frame.
#[derive(Debug, Clone)]
pub struct WalkerGeometry {
    pub shoulder_left: (f64, f64),
    pub shoulder_right: (f64, f64),
    pub head_center: (f64, f64),
    pub head_radii: (f64, f64),
}

/// Joint layout for frame `t` of a walker. Exposed so tests can locate the
/// shoulder band and head extent when measuring rendered output.
pub fn walker_geometry(params: &WalkerParams, t: usize) -> WalkerGeometry {
    let phi = params.phase + t as f64 * params.cadence;
    let bob = 0.8 * (1.0 - (2.0 * phi).cos()) / 2.0;
    let ground = 122.0;
    let hip_y = ground - params.leg_length + bob;
    let cx = 63.5;
    let lean = params.trunk_lean.to_radians();
    let sc = pt(cx + lean.tan() * params.torso_height, hip_y - params.torso_height);
    let tilt = params.shoulder_tilt.to_radians();
    let half_w = params.torso_width / 2.0;
    let u = pt(tilt.cos(), -tilt.sin());
    let shoulder_r = pt(sc.x + half_w * u.x, sc.y + half_w * u.y);
    let shoulder_l = pt(sc.x - half_w * u.x, sc.y - half_w * u.y);
    let head_ry = 7.0;
    let head = pt(sc.x + params.head_offset, sc.y - 3.0 - head_ry);
    WalkerGeometry {
        shoulder_left: (shoulder_l.x, shoulder_l.y),
        shoulder_right: (shoulder_r.x, shoulder_r.y),
        head_center: (head.x, head.y),
        head_radii: (5.5, head_ry),
    }
}

/// Render `n_frames` silhouette frames for one walker.
pub fn render_walker(params: &WalkerParams, n_frames: usize) -> Result<Vec<SilhouetteFrame>> {
    if n_frames < 1 {
        return Err(Error::Config("n_frames must be >= 1".into()));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        frames.push(render_frame(params, t, &mut rng));
    }
    Ok(frames)
}

fn render_frame(params: &WalkerParams, t: usize, noise_rng: &mut ChaCha8Rng) -> SilhouetteFrame {
    let phi = params.phase + t as f64 * params.cadence;
    // Snap near-zero swing so the aligned-leg frames are exactly symmetric.
    let mut swing = phi.sin();
    if swing.abs() < 1e-9 {
        swing = 0.0;
    }
    let bob = 0.8 * (1.0 - (2.0 * phi).cos()) / 2.0;
    let ground = 122.0;
    let hip_y = ground - params.leg_length + bob;
    let cx = 63.5;
    let geo = walker_geometry(params, t);

    let mut mask = Array2::<u8>::zeros((CANVAS, CANVAS));

    // Torso trapezoid: hip line (narrower) to shoulder line.
    let hip_half = params.torso_width * 0.34;
    let hip_l = pt(cx - hip_half, hip_y);
    let hip_r = pt(cx + hip_half, hip_y);
    let sh_l = pt(geo.shoulder_left.0, geo.shoulder_left.1);
    let sh_r = pt(geo.shoulder_right.0, geo.shoulder_right.1);
    fill_quad(&mut mask, [hip_l, hip_r, sh_r, sh_l]);

    // Head.
    fill_ellipse(
        &mut mask,
        pt(geo.head_center.0, geo.head_center.1),
        geo.head_radii.0,
        geo.head_radii.1,
    );
    // Neck.
    let neck_top = pt(geo.head_center.0, geo.head_center.1 + geo.head_radii.1 - 1.0);
    let neck_base = pt((sh_l.x + sh_r.x) / 2.0, (sh_l.y + sh_r.y) / 2.0 + 2.0);
    fill_capsule(&mut mask, neck_top, neck_base, 2.6);

    // Legs: lateral scissor, mirrored. Two segments each.
    let seg = params.leg_length / 2.0;
    let theta = params.stride_amplitude * swing;
    for (hip, sign) in [(hip_l, -1.0), (hip_r, 1.0)] {
        let a = sign * theta.abs().max(0.06) * sign_of(theta, sign);
        let knee = pt(hip.x + seg * a.sin(), hip.y + seg * a.cos());
        let a2 = a * 0.6;
        let ankle = pt(knee.x + seg * a2.sin(), knee.y + seg * a2.cos());
        fill_capsule(&mut mask, hip, knee, 3.4);
        fill_capsule(&mut mask, knee, ankle, 3.0);
    }

    // Arms: attached just below the shoulder tips, swinging opposite the
    // legs with a constant outward splay.
    let splay = 0.20;
    let arm_swing = 0.30 * params.stride_amplitude * -swing;
    for (tip, sign) in [(sh_l, -1.0), (sh_r, 1.0)] {
        let attach = pt(tip.x + sign * -1.0, tip.y + 2.5);
        let delta = splay + sign * arm_swing;
        let hand = pt(
            attach.x + sign * params.arm_length * delta.sin(),
            attach.y + params.arm_length * delta.cos(),
        );
        fill_capsule(&mut mask, attach, hand, 2.6);
    }

    apply_salt_noise(&mut mask, params.noise_level, noise_rng);
    SilhouetteFrame::from_mask(mask)
}

/// Lateral scissor: legs open in opposite directions, swapping sides with
/// the gait phase.
fn sign_of(theta: f64, side: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        (theta * side).signum()
    }
}

fn fill_ellipse(mask: &mut Array2<u8>, c: Pt, rx: f64, ry: f64) {
    let r0 = ((c.y - ry).floor().max(0.0)) as usize;
    let r1 = ((c.y + ry).ceil().min(CANVAS as f64 - 1.0)) as usize;
    let c0 = ((c.x - rx).floor().max(0.0)) as usize;
    let c1 = ((c.x + rx).ceil().min(CANVAS as f64 - 1.0)) as usize;
    for r in r0..=r1 {
        for col in c0..=c1 {
            let dy = (r as f64 - c.y) / ry;
            let dx = (col as f64 - c.x) / rx;
            if dx * dx + dy * dy <= 1.0 {
                mask[[r, col]] = 1;
            }
        }
    }
}

fn fill_capsule(mask: &mut Array2<u8>, a: Pt, b: Pt, radius: f64) {
    let r0 = ((a.y.min(b.y) - radius).floor().max(0.0)) as usize;
    let r1 = ((a.y.max(b.y) + radius).ceil().min(CANVAS as f64 - 1.0)) as usize;
    let c0 = ((a.x.min(b.x) - radius).floor().max(0.0)) as usize;
    let c1 = ((a.x.max(b.x) + radius).ceil().min(CANVAS as f64 - 1.0)) as usize;
    let ab = pt(b.x - a.x, b.y - a.y);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    for r in r0..=r1 {
        for col in c0..=c1 {
            let ap = pt(col as f64 - a.x, r as f64 - a.y);
            let t = if len2 > 0.0 {
                ((ap.x * ab.x + ap.y * ab.y) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let dx = ap.x - t * ab.x;
            let dy = ap.y - t * ab.y;
            if dx * dx + dy * dy <= radius * radius {
                mask[[r, col]] = 1;
            }
        }
    }
}

/// Convex quad fill; vertices in order around the boundary.
fn fill_quad(mask: &mut Array2<u8>, v: [Pt; 4]) {
    let ymin = v.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let ymax = v.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let xmin = v.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let xmax = v.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let r0 = (ymin.floor().max(0.0)) as usize;
    let r1 = (ymax.ceil().min(CANVAS as f64 - 1.0)) as usize;
    let c0 = (xmin.floor().max(0.0)) as usize;
    let c1 = (xmax.ceil().min(CANVAS as f64 - 1.0)) as usize;
    for r in r0..=r1 {
        for col in c0..=c1 {
            let p = pt(col as f64, r as f64);
            let mut pos = 0;
            let mut neg = 0;
            for i in 0..4 {
                let a = v[i];
                let b = v[(i + 1) % 4];
                let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
                if cross >= 0.0 {
                    pos += 1;
                }
                if cross <= 0.0 {
                    neg += 1;
                }
            }
            if pos == 4 || neg == 4 {
                mask[[r, col]] = 1;
            }
        }
    }
}

/// Salt noise scoped to the dilated body bounding box so the tight-crop
/// normalization stays stable.
fn apply_salt_noise(mask: &mut Array2<u8>, level: f64, rng: &mut ChaCha8Rng) {
    if level <= 0.0 {
        return;
    }
    let mut r0 = usize::MAX;
    let mut r1 = 0;
    let mut c0 = usize::MAX;
    let mut c1 = 0;
    for ((r, c), &v) in mask.indexed_iter() {
        if v == 1 {
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
        }
    }
    if r0 == usize::MAX {
        return;
    }
    let dilate = 2usize;
    let r0 = r0.saturating_sub(dilate);
    let c0 = c0.saturating_sub(dilate);
    let r1 = (r1 + dilate).min(CANVAS - 1);
    let c1 = (c1 + dilate).min(CANVAS - 1);
    for r in r0..=r1 {
        for c in c0..=c1 {
            if mask[[r, c]] == 0 && rng.random::<f64>() < level {
                mask[[r, c]] = 1;
            }
        }
    }
}

fn mix_seed(a: u64, b: u64) -> u64 {
    // SplitMix64 step over the combined value; cheap, stable stream split.
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw the fixed per-subject walker parameters. Deterministic in
/// (spec.seed, global subject index); phase and noise seed are filled in per
/// sequence by [`sequence_params`].
pub fn subject_params(spec: &SynthSpec, label: DiagnosticLabel, subject_index: usize) -> WalkerParams {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, subject_index as u64 + 1));
    let range = spec.range_for(label);
    let draw = |rng: &mut ChaCha8Rng, iv: Interval| -> f64 {
        let mag = if iv[1] > iv[0] {
            rng.random_range(iv[0]..=iv[1])
        } else {
            iv[0]
        };
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        mag * sign
    };
    WalkerParams {
        torso_height: rng.random_range(30.0..=36.0),
        torso_width: rng.random_range(24.0..=28.0),
        leg_length: rng.random_range(42.0..=50.0),
        arm_length: rng.random_range(24.0..=30.0),
        cadence: rng.random_range(0.26..=0.38),
        stride_amplitude: rng.random_range(0.35..=0.55),
        shoulder_tilt: draw(&mut rng, range.shoulder_tilt),
        trunk_lean: draw(&mut rng, range.trunk_lean),
        head_offset: draw(&mut rng, range.head_offset),
        noise_level: spec.noise_level,
        phase: 0.0,
        seed: 0,
    }
}

/// Specialize subject parameters for one sequence: fresh phase offset and
/// noise seed, everything else identical (identity consistency).
pub fn sequence_params(
    base: &WalkerParams,
    spec_seed: u64,
    subject_index: usize,
    sequence_index: usize,
) -> WalkerParams {
    let stream = mix_seed(
        mix_seed(spec_seed, 0x5EC0),
        ((subject_index as u64) << 20) | sequence_index as u64,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut p = base.clone();
    p.phase = rng.random_range(0.0..std::f64::consts::TAU);
    p.seed = rng.random::<u64>();
    p
}

/// Generate a full dataset tree under `out_root` in the standard layout and
/// return its manifest. The spec is serialized alongside the data.
pub fn generate_dataset(spec: &SynthSpec, out_root: &Path) -> Result<Manifest> {
    use rayon::prelude::*;
    spec.validate()?;
    std::fs::create_dir_all(out_root)
        .map_err(|e| Error::io(format!("create {}", out_root.display()), e))?;

    let mut jobs = Vec::new();
    let mut global_idx = 0usize;
    for (class, &count) in spec.subjects.iter().enumerate() {
        let label = LABELS[class];
        for _ in 0..count {
            jobs.push((label, global_idx));
            global_idx += 1;
        }
    }

    jobs.par_iter().try_for_each(|&(label, idx)| -> Result<()> {
        let base = subject_params(spec, label, idx);
        let subject_id = format!("subj{idx:04}");
        for q in 0..spec.sequences_per_subject {
            let params = sequence_params(&base, spec.seed, idx, q);
            let frames = render_walker(&params, spec.frames_per_sequence)?;
            let seq_dir = out_root
                .join(label.dir_name())
                .join(&subject_id)
                .join(format!("{subject_id}-seq{q:02}"));
            std::fs::create_dir_all(&seq_dir)
                .map_err(|e| Error::io(format!("create {}", seq_dir.display()), e))?;
            for (i, frame) in frames.iter().enumerate() {
                let img = image::GrayImage::from_fn(
                    frame.width() as u32,
                    frame.height() as u32,
                    |x, y| image::Luma([frame.mask[[y as usize, x as usize]] * 255]),
                );
                let path = seq_dir.join(format!("frame_{i:06}.png"));
                img.save(&path).map_err(|e| Error::ImageLoad {
                    path,
                    source: e,
                })?;
            }
        }
        Ok(())
    })?;

    spec.save_toml(&out_root.join("synth_spec.toml"))?;
    dataset::build_manifest(out_root)
}

/// Least-squares shoulder-line angle (degrees) from rendered pixels.
///
/// Fits the top-edge pixels inside the `include_x` column span (between the
/// shoulder tips) whose y lies inside `y_band`, excluding columns in
/// `exclude_x` (the head). Positive angles mean the right shoulder is
/// higher. Returns None when fewer than 4 edge pixels qualify.
pub fn fit_shoulder_angle(
    mask: &Array2<u8>,
    include_x: (f64, f64),
    exclude_x: (f64, f64),
    y_band: (f64, f64),
) -> Option<f64> {
    let (h, w) = mask.dim();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in 0..w {
        let cf = c as f64;
        if cf < include_x.0 || cf > include_x.1 {
            continue;
        }
        if cf >= exclude_x.0 && cf <= exclude_x.1 {
            continue;
        }
        for r in 0..h {
            if mask[[r, c]] == 1 {
                let rf = r as f64;
                if rf >= y_band.0 && rf <= y_band.1 {
                    xs.push(cf);
                    ys.push(rf);
                }
                break;
            }
        }
    }
    if xs.len() < 4 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((-slope).atan().to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric_params() -> WalkerParams {
        WalkerParams {
            cadence: std::f64::consts::PI / 8.0,
            ..WalkerParams::default()
        }
    }

    /// Measure the shoulder angle of frame `t` using the geometry to place
    /// the measurement window.
    fn measured_angle(p: &WalkerParams, mask: &Array2<u8>, t: usize) -> Option<f64> {
        let geo = walker_geometry(p, t);
        let include = (
            geo.shoulder_left.0.min(geo.shoulder_right.0) + 1.0,
            geo.shoulder_left.0.max(geo.shoulder_right.0) - 1.0,
        );
        let exclude = (
            geo.head_center.0 - geo.head_radii.0 - 2.0,
            geo.head_center.0 + geo.head_radii.0 + 2.0,
        );
        let y_lo = geo.shoulder_left.1.min(geo.shoulder_right.1) - 3.0;
        let y_hi = geo.shoulder_left.1.max(geo.shoulder_right.1) + 3.0;
        fit_shoulder_angle(mask, include, exclude, (y_lo, y_hi))
    }

    #[test]
    fn aligned_leg_frames_are_mirror_symmetric() {
        let frames = render_walker(&symmetric_params(), 9).unwrap();
        // Phase 0 and pi: frames 0 and 8 under cadence pi/8.
        for t in [0usize, 8] {
            let m = &frames[t].mask;
            for ((r, c), &v) in m.indexed_iter() {
                assert_eq!(
                    v,
                    m[[r, CANVAS - 1 - c]],
                    "frame {t} asymmetric at ({r}, {c})"
                );
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut p = WalkerParams::default();
        p.noise_level = 0.03;
        p.seed = 99;
        let a = render_walker(&p, 12).unwrap();
        let b = render_walker(&p, 12).unwrap();
        assert_eq!(a, b);
        assert!(matches!(render_walker(&p, 0), Err(Error::Config(_))));
    }

    #[test]
    fn shoulder_tilt_is_measurable_within_two_degrees() {
        let mut p = WalkerParams::default();
        p.shoulder_tilt = 15.0;
        let frames = render_walker(&p, 10).unwrap();
        for (t, f) in frames.iter().enumerate() {
            let angle = measured_angle(&p, &f.mask, t)
                .expect("shoulder band should contain edge pixels");
            assert!(
                (angle - 15.0).abs() <= 2.0,
                "frame {t}: measured {angle:.2} deg, want 15 +- 2"
            );
        }
    }

    #[test]
    fn class_mean_shoulder_slope_orders_as_severity() {
        let spec = SynthSpec::default();
        let mut means = [0.0f64; 3];
        let per_class = 30;
        for (ci, label) in LABELS.iter().enumerate() {
            let mut total = 0.0;
            for s in 0..per_class {
                let mut p = subject_params(&spec, *label, ci * 1000 + s);
                p.noise_level = 0.0;
                let frames = render_walker(&p, 4).unwrap();
                let mut seq_mean = 0.0;
                for (t, f) in frames.iter().enumerate() {
                    seq_mean += measured_angle(&p, &f.mask, t).unwrap_or(0.0).abs();
                }
                total += seq_mean / frames.len() as f64;
            }
            means[ci] = total / per_class as f64;
        }
        assert!(
            means[0] > means[1] && means[1] > means[2],
            "expected positive > neutral > negative, got {means:?}"
        );
    }

    #[test]
    fn identity_consistency_across_sequences() {
        let spec = SynthSpec::default();
        let base = subject_params(&spec, DiagnosticLabel::Positive, 3);
        let a = sequence_params(&base, spec.seed, 3, 0);
        let b = sequence_params(&base, spec.seed, 3, 1);
        assert_ne!(a.phase, b.phase);
        assert_ne!(a.seed, b.seed);
        let strip = |mut p: WalkerParams| {
            p.phase = 0.0;
            p.seed = 0;
            p
        };
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn generate_dataset_layout_counts_and_determinism() {
        let spec = SynthSpec {
            subjects: [2, 2, 4],
            sequences_per_subject: 2,
            frames_per_sequence: 6,
            noise_level: 0.01,
            ..SynthSpec::default()
        };
        let dir_a = tempfile::tempdir().unwrap();
        let m = generate_dataset(&spec, dir_a.path()).unwrap();
        assert_eq!(m.counts(), [4, 4, 8]);
        assert_eq!(m.total_frames(), 16 * 6);

        let dir_b = tempfile::tempdir().unwrap();
        generate_dataset(&spec, dir_b.path()).unwrap();
        assert_eq!(tree_digest(dir_a.path()), tree_digest(dir_b.path()));

        // Empty spec produces an empty manifest.
        let empty = SynthSpec {
            subjects: [0, 0, 0],
            ..spec.clone()
        };
        let dir_c = tempfile::tempdir().unwrap();
        let m = generate_dataset(&empty, dir_c.path()).unwrap();
        assert!(m.records.is_empty());
    }

    #[test]
    fn overlapping_class_intervals_are_rejected() {
        let mut spec = SynthSpec::default();
        spec.neutral.shoulder_tilt = [1.0, 9.0];
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }

    /// Order-independent digest of every file in a tree (relative path +
    /// contents), used to compare generated datasets.
    fn tree_digest(root: &Path) -> u64 {
        fn walk(dir: &Path, root: &Path, acc: &mut Vec<(String, Vec<u8>)>) {
            let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
            entries.sort();
            for p in entries {
                if p.is_dir() {
                    walk(&p, root, acc);
                } else {
                    let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                    acc.push((rel, std::fs::read(&p).unwrap()));
                }
            }
        }
        let mut acc = Vec::new();
        walk(root, root, &mut acc);
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        acc.hash(&mut h);
        h.finish()
    }
}
