//! Monochrome frame sequences: loading, cropping to the fingertip, and
//! reduction of each frame to one PPG sample.
//!
//! Two on-disk forms are supported:
//!
//! * an image directory of binary PGM (`P5`) files, maxval 255 or 65535,
//!   read in lexicographic filename order (zero-pad frame numbers). An
//!   optional `metadata.json` holding `{ "frame_rate_hz": <real> }` sets
//!   the frame rate;
//! * a `PPGF` raw container: the 4-byte magic `PPGF`, then little-endian
//!   `u32 width`, `u32 height`, `u32 frame_count`, `f64 frame_rate_hz`,
//!   `u8 bit_depth`, then row-major frames (one byte per pixel at depth 8,
//!   little-endian `u16` at depth 16).

use std::fs;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::PpgSignal;

pub const DEFAULT_FRAME_RATE_HZ: f64 = 14.0;
pub const RAW_MAGIC: &[u8; 4] = b"PPGF";
pub const FRAME_METADATA_FILE: &str = "metadata.json";
const RAW_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameFormat {
    ImageDirectory,
    RawContainer,
}

impl FrameFormat {
    /// Directories are image directories; anything else is a raw container.
    pub fn detect(path: &Path) -> FrameFormat {
        if path.is_dir() {
            FrameFormat::ImageDirectory
        } else {
            FrameFormat::RawContainer
        }
    }
}

/// Ordered monochrome frames sharing one geometry. Pixels are stored as
/// `u16` whatever the source depth.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Vec<u16>>,
    width: u32,
    height: u32,
    bit_depth: u8,
    frame_rate_hz: f64,
}

impl FrameSequence {
    pub fn new(
        frames: Vec<Vec<u16>>,
        width: u32,
        height: u32,
        bit_depth: u8,
        frame_rate_hz: f64,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::ZeroFrames);
        }
        if width == 0 || height == 0 {
            return Err(Error::Format(format!("degenerate frame size {width}x{height}")));
        }
        if bit_depth != 8 && bit_depth != 16 {
            return Err(Error::UnsupportedBitDepth(bit_depth as u32));
        }
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        let px = width as usize * height as usize;
        let max = if bit_depth == 8 { 255 } else { u16::MAX };
        for (i, f) in frames.iter().enumerate() {
            if f.len() != px {
                return Err(Error::Format(format!(
                    "frame {i} has {} pixels, expected {px}",
                    f.len()
                )));
            }
            if f.iter().any(|&v| v > max) {
                return Err(Error::Format(format!("frame {i} exceeds {bit_depth}-bit range")));
            }
        }
        Ok(FrameSequence {
            frames,
            width,
            height,
            bit_depth,
            frame_rate_hz,
        })
    }

    pub fn frames(&self) -> &[Vec<u16>] {
        &self.frames
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn full_roi(&self) -> RoiSpec {
        RoiSpec {
            x0: 0,
            y0: 0,
            w: self.width,
            h: self.height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl RoiSpec {
    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.w >= 1
            && self.h >= 1
            && (self.x0 as u64 + self.w as u64) <= width as u64
            && (self.y0 as u64 + self.h as u64) <= height as u64
    }
}

impl std::str::FromStr for RoiSpec {
    type Err = Error;

    /// `x0,y0,w,h`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParameter(format!("roi must be x0,y0,w,h; got `{s}`")))?;
        match parts[..] {
            [x0, y0, w, h] => Ok(RoiSpec { x0, y0, w, h }),
            _ => Err(Error::InvalidParameter(format!("roi must be x0,y0,w,h; got `{s}`"))),
        }
    }
}

/// Intensity reduction per frame. `Sum` is the total pixel intensity;
/// `Mean` divides it by the pixel count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

#[derive(Serialize, Deserialize)]
struct FrameMetadata {
    frame_rate_hz: f64,
}

/// Loads a frame sequence. `frame_rate_hz` overrides any rate stored with
/// the frames; without either the device default of 14 Hz applies.
pub fn load_frames(path: &Path, format: FrameFormat, frame_rate_hz: Option<f64>) -> Result<FrameSequence> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    match format {
        FrameFormat::ImageDirectory => load_image_directory(path, frame_rate_hz),
        FrameFormat::RawContainer => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let mut seq = decode_raw(&bytes)?;
            if let Some(rate) = frame_rate_hz {
                seq = FrameSequence::new(seq.frames, seq.width, seq.height, seq.bit_depth, rate)?;
            }
            Ok(seq)
        }
    }
}

fn load_image_directory(dir: &Path, frame_rate_hz: Option<f64>) -> Result<FrameSequence> {
    if !dir.is_dir() {
        return Err(Error::Format(format!("{} is not a directory", dir.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(Error::ZeroFrames);
    }

    let mut frames = Vec::with_capacity(files.len());
    let mut geometry: Option<(u32, u32, u8)> = None;
    for (index, file) in files.iter().enumerate() {
        let img = image::ImageReader::open(file)
            .map_err(|e| Error::io(file, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(file, e))?
            .decode()
            .map_err(|source| Error::Image {
                path: file.clone(),
                source,
            })?;
        let (w, h) = (img.width(), img.height());
        let (pixels, depth) = match img {
            DynamicImage::ImageLuma8(buf) => (buf.into_raw().into_iter().map(u16::from).collect(), 8u8),
            DynamicImage::ImageLuma16(buf) => (buf.into_raw(), 16u8),
            other => {
                let bits = other.color().bits_per_pixel() as u32;
                return Err(Error::UnsupportedBitDepth(bits));
            }
        };
        match geometry {
            None => geometry = Some((w, h, depth)),
            Some((ew, eh, ed)) => {
                if (w, h) != (ew, eh) {
                    return Err(Error::MixedDimensions {
                        index,
                        expected_width: ew,
                        expected_height: eh,
                        width: w,
                        height: h,
                    });
                }
                if depth != ed {
                    return Err(Error::Format(format!(
                        "frame {index} has bit depth {depth}, expected {ed}"
                    )));
                }
            }
        }
        frames.push(pixels);
    }

    let rate = match frame_rate_hz {
        Some(r) => r,
        None => {
            let meta = dir.join(FRAME_METADATA_FILE);
            if meta.exists() {
                let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
                serde_json::from_str::<FrameMetadata>(&text)?.frame_rate_hz
            } else {
                DEFAULT_FRAME_RATE_HZ
            }
        }
    };
    let (w, h, depth) = geometry.expect("at least one frame decoded");
    FrameSequence::new(frames, w, h, depth, rate)
}

/// Writes one binary PGM per frame (`frame_00000.pgm`, ...) plus
/// `metadata.json`.
pub fn write_image_directory(seq: &FrameSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in seq.frames.iter().enumerate() {
        let path = dir.join(format!("frame_{i:05}.pgm"));
        let maxval = if seq.bit_depth == 8 { 255 } else { 65535 };
        let mut bytes = format!("P5\n{} {}\n{maxval}\n", seq.width, seq.height).into_bytes();
        if seq.bit_depth == 8 {
            bytes.extend(frame.iter().map(|&v| v as u8));
        } else {
            // 16-bit PGM samples are big-endian.
            bytes.extend(frame.iter().flat_map(|v| v.to_be_bytes()));
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    let meta = serde_json::to_string_pretty(&FrameMetadata {
        frame_rate_hz: seq.frame_rate_hz,
    })?;
    let meta_path = dir.join(FRAME_METADATA_FILE);
    fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(meta_path, e))
}

pub fn encode_raw(seq: &FrameSequence) -> Vec<u8> {
    let bytes_per_px = if seq.bit_depth == 8 { 1 } else { 2 };
    let px = seq.width as usize * seq.height as usize;
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + seq.frames.len() * px * bytes_per_px);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&seq.width.to_le_bytes());
    out.extend_from_slice(&seq.height.to_le_bytes());
    out.extend_from_slice(&(seq.frames.len() as u32).to_le_bytes());
    out.extend_from_slice(&seq.frame_rate_hz.to_le_bytes());
    out.push(seq.bit_depth);
    for frame in &seq.frames {
        if seq.bit_depth == 8 {
            out.extend(frame.iter().map(|&v| v as u8));
        } else {
            out.extend(frame.iter().flat_map(|v| v.to_le_bytes()));
        }
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<FrameSequence> {
    if bytes.len() < RAW_HEADER_LEN || &bytes[..4] != RAW_MAGIC {
        return Err(Error::Format("missing PPGF header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let width = u32_at(4);
    let height = u32_at(8);
    let count = u32_at(12) as usize;
    let rate = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let depth = bytes[24];
    let bytes_per_px = match depth {
        8 => 1,
        16 => 2,
        d => return Err(Error::UnsupportedBitDepth(d as u32)),
    };
    if count == 0 {
        return Err(Error::ZeroFrames);
    }
    let frame_bytes = width as usize * height as usize * bytes_per_px;
    let body = &bytes[RAW_HEADER_LEN..];
    if body.len() != frame_bytes * count {
        return Err(Error::Format(format!(
            "PPGF body is {} bytes, header implies {}",
            body.len(),
            frame_bytes * count
        )));
    }
    let frames = body
        .chunks_exact(frame_bytes.max(1))
        .map(|chunk| {
            if depth == 8 {
                chunk.iter().map(|&v| v as u16).collect()
            } else {
                chunk
                    .chunks_exact(2)
                    .map(|b| u16::from_le_bytes([b[0], b[1]]))
                    .collect()
            }
        })
        .collect();
    FrameSequence::new(frames, width, height, depth, rate)
}

pub fn write_raw(seq: &FrameSequence, path: &Path) -> Result<()> {
    fs::write(path, encode_raw(seq)).map_err(|e| Error::io(path, e))
}

pub fn crop(seq: &FrameSequence, roi: RoiSpec) -> Result<FrameSequence> {
    if !roi.fits(seq.width, seq.height) {
        return Err(Error::RoiOutOfBounds {
            x0: roi.x0,
            y0: roi.y0,
            w: roi.w,
            h: roi.h,
            width: seq.width,
            height: seq.height,
        });
    }
    let (x0, y0, w, h) = (roi.x0 as usize, roi.y0 as usize, roi.w as usize, roi.h as usize);
    let stride = seq.width as usize;
    let frames = seq
        .frames
        .iter()
        .map(|f| {
            (y0..y0 + h)
                .flat_map(|y| f[y * stride + x0..y * stride + x0 + w].iter().copied())
                .collect()
        })
        .collect();
    Ok(FrameSequence {
        frames,
        width: roi.w,
        height: roi.h,
        bit_depth: seq.bit_depth,
        frame_rate_hz: seq.frame_rate_hz,
    })
}

/// Temporal mean of every pixel.
pub fn mean_frame(seq: &FrameSequence) -> Vec<f64> {
    let px = seq.width as usize * seq.height as usize;
    let mut acc = vec![0u64; px];
    for f in &seq.frames {
        for (a, &v) in acc.iter_mut().zip(f) {
            *a += v as u64;
        }
    }
    let n = seq.frames.len() as f64;
    acc.into_iter().map(|s| s as f64 / n).collect()
}

/// Otsu threshold over real values: the split between consecutive distinct
/// values that maximizes between-class variance. Values strictly above the
/// returned threshold form the foreground. `None` when all values are equal.
pub fn otsu_threshold(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    let mut best: Option<(f64, f64)> = None;
    let mut below_sum = 0.0;
    for i in 0..v.len().saturating_sub(1) {
        below_sum += v[i];
        if v[i] == v[i + 1] {
            continue;
        }
        let w0 = (i + 1) as f64 / n;
        let w1 = 1.0 - w0;
        let mu0 = below_sum / (i + 1) as f64;
        let mu1 = (total - below_sum) / (n - (i + 1) as f64);
        let between = w0 * w1 * (mu0 - mu1).powi(2);
        if best.is_none_or(|(b, _)| between > b) {
            best = Some((between, v[i]));
        }
    }
    best.map(|(_, t)| t)
}

/// Bounding box of the Otsu foreground of the temporal-mean frame. Falls back
/// to the full frame when the mean frame spans at most one grey level (no
/// contact region to find) or the foreground covers under 1% of the pixels.
pub fn auto_roi(seq: &FrameSequence) -> RoiSpec {
    let mean = mean_frame(seq);
    let lo = mean.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1.0 {
        return seq.full_roi();
    }
    let Some(threshold) = otsu_threshold(&mean) else {
        return seq.full_roi();
    };
    let w = seq.width as usize;
    let mut count = 0usize;
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (usize::MAX, usize::MAX, 0, 0);
    for (i, _) in mean.iter().enumerate().filter(|(_, &v)| v > threshold) {
        let (x, y) = (i % w, i / w);
        count += 1;
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if count == 0 || (count as f64) < 0.01 * mean.len() as f64 {
        return seq.full_roi();
    }
    RoiSpec {
        x0: xmin as u32,
        y0: ymin as u32,
        w: (xmax - xmin + 1) as u32,
        h: (ymax - ymin + 1) as u32,
    }
}

/// One sample per frame. Sums are exact in 64-bit integers; frames are
/// reduced in parallel with order preserved.
pub fn extract_ppg(seq: &FrameSequence, reduction: Reduction) -> Result<PpgSignal> {
    let px = (seq.width as u64 * seq.height as u64) as f64;
    let samples: Vec<f64> = seq
        .frames
        .par_iter()
        .map(|f| {
            let total = f.iter().map(|&v| v as u64).sum::<u64>() as f64;
            match reduction {
                Reduction::Sum => total,
                Reduction::Mean => total / px,
            }
        })
        .collect();
    PpgSignal::new(samples, seq.frame_rate_hz)
}
