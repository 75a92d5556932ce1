//! Frame images, numbered PNG sequences and mean-image background extraction.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("no frames found in {0}")]
    EmptyDirectory(PathBuf),
    #[error("frame {index} is {got:?} but frame 0 is {expected:?}")]
    MixedResolutions { index: usize, expected: (u32, u32), got: (u32, u32) },
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
    #[error("pixel buffer of length {len} does not fit {width}x{height}x{channels}")]
    BadBuffer { len: usize, width: u32, height: u32, channels: usize },
    #[error("frame rate must be positive, got {0}")]
    InvalidFps(f64),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channels {
    Gray = 1,
    Rgb = 3,
}

impl Channels {
    pub fn count(self) -> usize {
        self as usize
    }
}

/// 8-bit image, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: Channels,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: Channels, data: Vec<u8>) -> Result<Self, MediaError> {
        if data.len() != width as usize * height as usize * channels.count() {
            return Err(MediaError::BadBuffer { len: data.len(), width, height, channels: channels.count() });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled_rgb(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self { width, height, channels: Channels::Rgb, data }
    }

    pub fn filled_gray(width: u32, height: u32, value: u8) -> Self {
        Self { width, height, channels: Channels::Gray, data: vec![value; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels.count()
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels.count()]
    }

    pub fn set_rgb(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        match self.channels {
            Channels::Rgb => self.data[o..o + 3].copy_from_slice(&rgb),
            Channels::Gray => self.data[o] = luma(rgb),
        }
    }

    /// Luminance `Y = round(0.299 R + 0.587 G + 0.114 B)`; gray images are
    /// returned unchanged.
    pub fn grayscale(&self) -> Image {
        match self.channels {
            Channels::Gray => self.clone(),
            Channels::Rgb => {
                let data = self.data.chunks_exact(3).map(|p| luma([p[0], p[1], p[2]])).collect();
                Image { width: self.width, height: self.height, channels: Channels::Gray, data }
            }
        }
    }

    /// Luminance as `f32` in `0..=255`.
    pub fn luma_plane(&self) -> Vec<f32> {
        match self.channels {
            Channels::Gray => self.data.iter().map(|&v| v as f32).collect(),
            Channels::Rgb => self.data.chunks_exact(3).map(|p| luma([p[0], p[1], p[2]]) as f32).collect(),
        }
    }

    pub fn load_png(path: &Path) -> Result<Image, MediaError> {
        let unreadable = |reason: String| MediaError::UnreadableFile { path: path.to_path_buf(), reason };
        let img = image::open(path).map_err(|e| unreadable(e.to_string()))?;
        let img = match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Image { width: w, height: h, channels: Channels::Gray, data: g.into_raw() }
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                Image { width: w, height: h, channels: Channels::Rgb, data: rgb.into_raw() }
            }
        };
        Ok(img)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), MediaError> {
        let color = match self.channels {
            Channels::Gray => image::ExtendedColorType::L8,
            Channels::Rgb => image::ExtendedColorType::Rgb8,
        };
        image::save_buffer_with_format(path, &self.data, self.width, self.height, color, image::ImageFormat::Png)
            .map_err(|e| MediaError::Write { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn encode_png(&self) -> Vec<u8> {
        use image::ImageEncoder;
        let color = match self.channels {
            Channels::Gray => image::ExtendedColorType::L8,
            Channels::Rgb => image::ExtendedColorType::Rgb8,
        };
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(&self.data, self.width, self.height, color)
            .expect("in-memory png encoding");
        out
    }
}

fn luma([r, g, b]: [u8; 3]) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

/// Ordered frames sharing one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Image>,
    fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Image>, fps: f64) -> Result<Self, MediaError> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(MediaError::InvalidFps(fps));
        }
        if let Some(first) = frames.first() {
            let expected = first.dims();
            if let Some((index, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != expected) {
                return Err(MediaError::MixedResolutions { index, expected, got: f.dims() });
            }
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Image> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// `(width, height)` of the frames, `(0, 0)` when empty.
    pub fn dims(&self) -> (u32, u32) {
        self.frames.first().map_or((0, 0), |f| f.dims())
    }

    pub fn reversed(&self) -> Self {
        Self { frames: self.frames.iter().rev().cloned().collect(), fps: self.fps }
    }
}

/// Canonical file name of a 1-based frame index.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().rev().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    digits.chars().rev().collect::<String>().parse().ok()
}

/// Loads every numbered `.png` in `dir`, ordered by the trailing frame number.
pub fn load_sequence(dir: &Path, fps: f64) -> Result<FrameSequence, MediaError> {
    let io = |source| MediaError::Io { path: dir.to_path_buf(), source };
    let mut entries: Vec<(u64, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_png = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !is_png {
            continue;
        }
        if let Some(n) = frame_number(&path) {
            entries.push((n, path));
        }
    }
    if entries.is_empty() {
        return Err(MediaError::EmptyDirectory(dir.to_path_buf()));
    }
    entries.sort();
    let frames = entries.par_iter().map(|(_, p)| Image::load_png(p)).collect::<Result<Vec<_>, _>>()?;
    FrameSequence::new(frames, fps)
}

/// Writes frames as `frame_000001.png`, `frame_000002.png`, ...
pub fn save_sequence(seq: &FrameSequence, dir: &Path) -> Result<(), MediaError> {
    std::fs::create_dir_all(dir).map_err(|source| MediaError::Io { path: dir.to_path_buf(), source })?;
    seq.frames().par_iter().enumerate().try_for_each(|(i, f)| f.save_png(&dir.join(frame_file_name(i + 1))))
}

/// Per-pixel, per-channel arithmetic mean over all frames, rounded half up.
///
/// Returns `None` for an empty sequence.
pub fn extract_background(seq: &FrameSequence) -> Option<Image> {
    let first = seq.frames().first()?;
    let n = seq.len() as u64;
    let mut sums = vec![0u64; first.data().len()];
    for f in seq.frames() {
        for (s, &v) in sums.iter_mut().zip(f.data()) {
            *s += v as u64;
        }
    }
    let data = sums.into_iter().map(|s| ((s + n / 2) / n) as u8).collect();
    Some(Image { width: first.width, height: first.height, channels: first.channels, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_values() {
        assert_eq!(luma([0, 0, 0]), 0);
        assert_eq!(luma([255, 255, 255]), 255);
        // 0.299 * 255 = 76.245
        assert_eq!(luma([255, 0, 0]), 76);
        let img = Image::filled_rgb(2, 1, [255, 0, 0]);
        assert_eq!(img.grayscale().data(), &[76, 76]);
    }

    #[test]
    fn background_of_constant_sequence_is_the_frame() {
        let f = Image::filled_rgb(4, 3, [10, 120, 250]);
        let seq = FrameSequence::new(vec![f.clone(); 5], 25.0).unwrap();
        assert_eq!(extract_background(&seq).unwrap(), f);
    }

    #[test]
    fn background_is_the_mean() {
        let seq = FrameSequence::new(vec![Image::filled_gray(2, 2, 10), Image::filled_gray(2, 2, 20)], 25.0).unwrap();
        assert_eq!(extract_background(&seq).unwrap().data(), &[15, 15, 15, 15]);
        // 10 and 11 -> 10.5 rounds up
        let seq = FrameSequence::new(vec![Image::filled_gray(1, 1, 10), Image::filled_gray(1, 1, 11)], 25.0).unwrap();
        assert_eq!(extract_background(&seq).unwrap().data(), &[11]);
    }

    #[test]
    fn moving_blob_fades_out_of_background() {
        let (w, h) = (160u32, 120u32);
        let clean = Image::filled_rgb(w, h, [90, 140, 60]);
        let frames: Vec<Image> = (0..100)
            .map(|t| {
                let mut f = clean.clone();
                // raster path, one blob width per frame
                let x0 = (t % 32) * 5;
                let y0 = 10 + (t / 32) * 5;
                for y in y0..y0 + 5 {
                    for x in x0..x0 + 5 {
                        f.set_rgb(x, y, [250, 10, 200]);
                    }
                }
                f
            })
            .collect();
        let bg = extract_background(&FrameSequence::new(frames, 25.0).unwrap()).unwrap();
        let close = bg
            .data()
            .chunks(3)
            .zip(clean.data().chunks(3))
            .filter(|(a, b)| a.iter().zip(b.iter()).all(|(x, y)| (*x as i32 - *y as i32).abs() <= 2))
            .count();
        assert!(close as f64 >= 0.99 * (w * h) as f64, "{close}");
    }

    #[test]
    fn background_ignores_frame_order() {
        let frames: Vec<Image> = (0..7u8).map(|v| Image::filled_gray(3, 2, v * 31)).collect();
        let seq = FrameSequence::new(frames, 10.0).unwrap();
        assert_eq!(extract_background(&seq), extract_background(&seq.reversed()));
    }

    #[test]
    fn mixed_resolutions_rejected() {
        let r = FrameSequence::new(vec![Image::filled_gray(2, 2, 0), Image::filled_gray(3, 2, 0)], 25.0);
        assert!(matches!(r, Err(MediaError::MixedResolutions { index: 1, .. })));
    }

    #[test]
    fn load_sequence_orders_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        for (i, v) in [(3usize, 30u8), (1, 10), (2, 20)] {
            Image::filled_gray(4, 4, v).save_png(&dir.path().join(frame_file_name(i))).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let seq = load_sequence(dir.path(), 25.0).unwrap();
        assert_eq!(seq.len(), 3);
        let firsts: Vec<u8> = seq.frames().iter().map(|f| f.data()[0]).collect();
        assert_eq!(firsts, vec![10, 20, 30]);

        Image::filled_gray(5, 4, 0).save_png(&dir.path().join(frame_file_name(4))).unwrap();
        assert!(matches!(load_sequence(dir.path(), 25.0), Err(MediaError::MixedResolutions { .. })));

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(load_sequence(empty.path(), 25.0), Err(MediaError::EmptyDirectory(_))));
    }

    #[test]
    fn unreadable_frame_reported() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(frame_file_name(1)), b"not a png").unwrap();
        assert!(matches!(load_sequence(dir.path(), 25.0), Err(MediaError::UnreadableFile { .. })));
    }

    #[test]
    fn save_and_reload_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = Image::filled_rgb(5, 4, [1, 2, 3]);
        f.set_rgb(2, 1, [200, 100, 50]);
        let seq = FrameSequence::new(vec![f.clone(), Image::filled_rgb(5, 4, [9, 9, 9])], 12.5).unwrap();
        save_sequence(&seq, dir.path()).unwrap();
        assert!(dir.path().join("frame_000001.png").exists());
        let back = load_sequence(dir.path(), 12.5).unwrap();
        assert_eq!(back, seq);
    }
}
