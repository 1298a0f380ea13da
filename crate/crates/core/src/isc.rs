//! Invisible screen-to-camera codec.
//!
//! A frame is split into a rows×cols grid of near-equal pixel segments; each
//! segment carries one bit per data frame. Bit 1 shifts every pixel of the
//! segment by a small per-channel intensity delta (blue gets the largest
//! step), bit 0 leaves the segment untouched. The receiver differences a
//! data frame against its reference frame and thresholds the blue-channel
//! segment means.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IscError {
    #[error("InvalidGrid: {rows}x{cols} grid does not fit a {width}x{height} frame")]
    InvalidGrid {
        rows: u32,
        cols: u32,
        width: u32,
        height: u32,
    },
    #[error("InvalidFrame: {0}")]
    InvalidFrame(String),
    #[error("PayloadSizeMismatch: expected {expected} bits, got {got}")]
    PayloadSizeMismatch { expected: usize, got: usize },
    #[error("DimensionMismatch: frames are {a_width}x{a_height} and {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: u32,
        a_height: u32,
        b_width: u32,
        b_height: u32,
    },
    #[error("InsufficientFrames: need {needed} reference frames, got {got}")]
    InsufficientFrames { needed: usize, got: usize },
    #[error("InvalidProfile: {0}")]
    InvalidProfile(String),
}

/// An 8-bit RGB image, row-major, interleaved samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, samples: Vec<u8>) -> Result<Self, IscError> {
        if width == 0 || height == 0 {
            return Err(IscError::InvalidFrame("zero dimension".into()));
        }
        let expected = width as usize * height as usize * 3;
        if samples.len() != expected {
            return Err(IscError::InvalidFrame(format!(
                "expected {expected} samples, got {}",
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn uniform(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut samples = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            samples.extend_from_slice(&rgb);
        }
        Frame {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.samples[i..i + 3].copy_from_slice(&rgb);
    }

    fn same_size(&self, other: &Frame) -> Result<(), IscError> {
        if self.width != other.width || self.height != other.height {
            return Err(IscError::DimensionMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: other.width,
                b_height: other.height,
            });
        }
        Ok(())
    }
}

/// Grid partition of a frame into near-equal segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentLayout {
    width: u32,
    height: u32,
    rows: u32,
    cols: u32,
}

/// Pixel rectangle of one segment: x in [x0, x1), y in [y0, y1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentRect {
    pub x0: u32,
    pub x1: u32,
    pub y0: u32,
    pub y1: u32,
}

impl SegmentRect {
    pub fn pixel_count(&self) -> usize {
        (self.x1 - self.x0) as usize * (self.y1 - self.y0) as usize
    }
}

impl SegmentLayout {
    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn segment_count(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    /// Segment index is row-major: left to right, then top to bottom.
    pub fn segment(&self, index: usize) -> SegmentRect {
        let r = index as u32 / self.cols;
        let c = index as u32 % self.cols;
        SegmentRect {
            x0: c * self.width / self.cols,
            x1: (c + 1) * self.width / self.cols,
            y0: r * self.height / self.rows,
            y1: (r + 1) * self.height / self.rows,
        }
    }

    pub fn matches(&self, frame: &Frame) -> Result<(), IscError> {
        if frame.width != self.width || frame.height != self.height {
            return Err(IscError::DimensionMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: frame.width,
                b_height: frame.height,
            });
        }
        Ok(())
    }
}

/// Boundaries at floor(i*height/rows) and floor(j*width/cols).
pub fn make_layout(width: u32, height: u32, rows: u32, cols: u32) -> Result<SegmentLayout, IscError> {
    if rows == 0 || cols == 0 || rows > height || cols > width {
        return Err(IscError::InvalidGrid {
            rows,
            cols,
            width,
            height,
        });
    }
    Ok(SegmentLayout {
        width,
        height,
        rows,
        cols,
    })
}

/// Per-channel intensity steps and the decode threshold.
///
/// Blue carries the largest step; decoding thresholds the blue-channel
/// segment mean difference at `decode_threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationProfile {
    pub delta_r: u8,
    pub delta_g: u8,
    pub delta_b: u8,
    pub decode_threshold: f64,
}

impl Default for ModulationProfile {
    fn default() -> Self {
        ModulationProfile {
            delta_r: 2,
            delta_g: 0,
            delta_b: 4,
            decode_threshold: 2.0,
        }
    }
}

impl ModulationProfile {
    pub fn new(delta_r: u8, delta_g: u8, delta_b: u8, decode_threshold: f64) -> Result<Self, IscError> {
        if delta_b < 1 {
            return Err(IscError::InvalidProfile("delta_b must be >= 1".into()));
        }
        if delta_b < delta_r || delta_b < delta_g {
            return Err(IscError::InvalidProfile(
                "blue delta must dominate red and green".into(),
            ));
        }
        if decode_threshold.is_nan() || decode_threshold <= 0.0 {
            return Err(IscError::InvalidProfile(
                "decode_threshold must be > 0".into(),
            ));
        }
        Ok(ModulationProfile {
            delta_r,
            delta_g,
            delta_b,
            decode_threshold,
        })
    }
}

fn segment_channel_mean(frame: &Frame, rect: SegmentRect, channel: usize) -> f64 {
    let mut sum = 0u64;
    for y in rect.y0..rect.y1 {
        for x in rect.x0..rect.x1 {
            sum += frame.pixel(x, y)[channel] as u64;
        }
    }
    sum as f64 / rect.pixel_count() as f64
}

/// Embed one bit per segment: bit 1 shifts the segment by the per-channel
/// deltas (sign +1, or −1 when the segment's channel mean exceeds
/// 255 − delta), bit 0 leaves the segment byte-identical to the reference.
pub fn embed_bits(
    reference: &Frame,
    bits: &[bool],
    layout: &SegmentLayout,
    profile: &ModulationProfile,
) -> Result<Frame, IscError> {
    layout.matches(reference)?;
    if bits.len() != layout.segment_count() {
        return Err(IscError::PayloadSizeMismatch {
            expected: layout.segment_count(),
            got: bits.len(),
        });
    }
    let deltas = [profile.delta_r, profile.delta_g, profile.delta_b];
    let mut out = reference.clone();
    for (i, &bit) in bits.iter().enumerate() {
        if !bit {
            continue;
        }
        let rect = layout.segment(i);
        // headroom rule: subtract on channels whose mean would clip upward
        let mut signed: [i16; 3] = [0; 3];
        for ch in 0..3 {
            let d = deltas[ch] as i16;
            let mean = segment_channel_mean(reference, rect, ch);
            signed[ch] = if mean > 255.0 - deltas[ch] as f64 { -d } else { d };
        }
        for y in rect.y0..rect.y1 {
            for x in rect.x0..rect.x1 {
                let p = out.pixel(x, y);
                let shifted = [
                    (p[0] as i16 + signed[0]).clamp(0, 255) as u8,
                    (p[1] as i16 + signed[1]).clamp(0, 255) as u8,
                    (p[2] as i16 + signed[2]).clamp(0, 255) as u8,
                ];
                out.set_pixel(x, y, shifted);
            }
        }
    }
    Ok(out)
}

/// Recover one bit per segment from the blue-channel mean difference.
pub fn extract_bits(
    reference: &Frame,
    data: &Frame,
    layout: &SegmentLayout,
    profile: &ModulationProfile,
) -> Result<Vec<bool>, IscError> {
    reference.same_size(data)?;
    layout.matches(reference)?;
    let mut bits = Vec::with_capacity(layout.segment_count());
    for i in 0..layout.segment_count() {
        let rect = layout.segment(i);
        let diff = (segment_channel_mean(data, rect, 2)
            - segment_channel_mean(reference, rect, 2))
        .abs();
        bits.push(diff >= profile.decode_threshold);
    }
    Ok(bits)
}

/// Photometric channel distortion: gain, offset, and Gaussian sensor noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub gain: f64,
    pub offset: i32,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ChannelModel {
    pub fn identity() -> Self {
        ChannelModel {
            gain: 1.0,
            offset: 0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

fn round_half_away(v: f64) -> f64 {
    if v >= 0.0 {
        (v + 0.5).floor()
    } else {
        (v - 0.5).ceil()
    }
}

/// Apply `clamp(round(gain·v + offset + N(0, σ)))` to every sample in
/// row-major order; the noise stream is fixed by the model seed.
pub fn distort(frame: &Frame, model: &ChannelModel) -> Result<Frame, IscError> {
    if model.gain.is_nan() || model.gain <= 0.0 {
        return Err(IscError::InvalidProfile("gain must be > 0".into()));
    }
    let mut out = frame.clone();
    if model.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        let normal = Normal::new(0.0, model.noise_sigma)
            .map_err(|e| IscError::InvalidProfile(e.to_string()))?;
        for s in out.samples.iter_mut() {
            let v = model.gain * *s as f64 + model.offset as f64 + normal.sample(&mut rng);
            *s = round_half_away(v).clamp(0.0, 255.0) as u8;
        }
    } else {
        for s in out.samples.iter_mut() {
            let v = model.gain * *s as f64 + model.offset as f64;
            *s = round_half_away(v).clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Per-channel 256-bin histograms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramSet {
    pub red: [u64; 256],
    pub green: [u64; 256],
    pub blue: [u64; 256],
}

pub fn histogram(frame: &Frame) -> HistogramSet {
    let mut h = HistogramSet {
        red: [0; 256],
        green: [0; 256],
        blue: [0; 256],
    };
    for px in frame.samples.chunks_exact(3) {
        h.red[px[0] as usize] += 1;
        h.green[px[1] as usize] += 1;
        h.blue[px[2] as usize] += 1;
    }
    h
}

/// Invisibility summary of a reference/data frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InvisibilityReport {
    /// Largest |mean(data) − mean(reference)| over the three channels.
    pub max_mean_shift: f64,
    pub mse: f64,
    /// `10·log10(255²/MSE)`; +infinity when the frames are identical.
    pub psnr_db: f64,
    pub green_unchanged: bool,
}

pub fn invisibility_report(
    reference: &Frame,
    data: &Frame,
) -> Result<InvisibilityReport, IscError> {
    reference.same_size(data)?;
    let n = reference.samples.len();
    let mut sq_sum = 0.0f64;
    let mut mean_diff = [0.0f64; 3];
    let mut green_unchanged = true;
    for (i, (&a, &b)) in reference.samples.iter().zip(&data.samples).enumerate() {
        let d = b as f64 - a as f64;
        sq_sum += d * d;
        mean_diff[i % 3] += d;
        if i % 3 == 1 && a != b {
            green_unchanged = false;
        }
    }
    let pixels = (n / 3) as f64;
    let mse = sq_sum / n as f64;
    let psnr_db = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    };
    let max_mean_shift = mean_diff
        .iter()
        .map(|d| (d / pixels).abs())
        .fold(0.0, f64::max);
    Ok(InvisibilityReport {
        max_mean_shift,
        mse,
        psnr_db,
        green_unchanged,
    })
}

/// Net data rate: half the frames are references, so `(fps/2) × bits`.
pub fn stream_throughput(fps: f64, bits_per_frame: u32) -> f64 {
    fps / 2.0 * bits_per_frame as f64
}

/// Pack a payload into alternating reference/data frames.
///
/// Even output indices are untouched reference frames, odd indices carry the
/// next `segment_count` payload bits (zero-padded at the tail).
pub fn encode_stream(
    reference_frames: &[Frame],
    payload_bits: &[bool],
    layout: &SegmentLayout,
    profile: &ModulationProfile,
) -> Result<Vec<Frame>, IscError> {
    let seg = layout.segment_count();
    let needed = payload_bits.len().div_ceil(seg);
    if reference_frames.len() < needed {
        return Err(IscError::InsufficientFrames {
            needed,
            got: reference_frames.len(),
        });
    }
    let mut out = Vec::with_capacity(needed * 2);
    for (i, reference) in reference_frames.iter().take(needed).enumerate() {
        let mut chunk: Vec<bool> = payload_bits[i * seg..]
            .iter()
            .take(seg)
            .copied()
            .collect();
        chunk.resize(seg, false);
        let data = embed_bits(reference, &chunk, layout, profile)?;
        out.push(reference.clone());
        out.push(data);
    }
    Ok(out)
}

/// Inverse of [`encode_stream`]: extract from each (reference, data) pair.
/// Returns the zero-padded payload bits.
pub fn decode_stream(
    frames: &[Frame],
    layout: &SegmentLayout,
    profile: &ModulationProfile,
) -> Result<Vec<bool>, IscError> {
    if !frames.len().is_multiple_of(2) {
        return Err(IscError::InvalidFrame(
            "stream must hold an even number of frames".into(),
        ));
    }
    let mut bits = Vec::new();
    for pair in frames.chunks_exact(2) {
        bits.extend(extract_bits(&pair[0], &pair[1], layout, profile)?);
    }
    Ok(bits)
}
