//! 8-bit grayscale images and the PGM (binary P5) / PNG codecs.
//!
//! Binary PGM is the canonical interchange format: the header is
//! `P5\n<width> <height>\n255\n` followed by `width * height` raw bytes in
//! row-major order, top to bottom. `#` comments are tolerated when reading
//! headers and never written. PNG is accepted on read (gray, gray+alpha,
//! RGB(A), 8 or 16 bit); only 8-bit gray is ever written.

use std::fs;
use std::io::{BufWriter, ErrorKind, Write};
use std::path::Path;

use crate::error::{Error, Result};

const PNG_MAGIC: &[u8] = &[0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// A rectangular grid of 8-bit intensity values.
///
/// Pixels are stored row-major, top to bottom. Values are immutable after
/// construction, so images can be shared freely across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// Builds an image from raw row-major pixels.
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::MalformedImage(format!(
                "zero dimension: {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::MalformedImage(format!(
                "payload holds {} pixels, {width}x{height} needs {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Constant-valued image.
    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major pixel payload.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Intensity at `(x, y)`. Panics if out of bounds.
    pub fn get(&self, x: u32, y: u32) -> u8 {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// Loads a binary PGM (P5) or PNG file as 8-bit grayscale.
///
/// Color inputs are converted with the integer BT.601 luma
/// `round(0.299 R + 0.587 G + 0.114 B)`; 16-bit samples are right-shifted to
/// 8 bits before conversion; alpha channels are discarded.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            Error::FileNotFound(path.to_path_buf())
        } else {
            Error::Io(e)
        }
    })?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else if bytes.starts_with(PNG_MAGIC) {
        decode_png(&bytes)
    } else {
        Err(Error::UnsupportedFormat(path.display().to_string()))
    }
}

/// Writes `img` as binary PGM (P5) with maxval 255.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write!(w, "P5\n{} {}\n255\n", img.width, img.height)?;
    w.write_all(&img.pixels)?;
    w.flush()?;
    Ok(())
}

/// Writes `img` as an 8-bit grayscale PNG.
pub fn save_image_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    image::save_buffer_with_format(
        path.as_ref(),
        &img.pixels,
        img.width,
        img.height,
        image::ExtendedColorType::L8,
        image::ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::MalformedImage(other.to_string()),
    })
}

/// Integer BT.601 luma, rounded half up. Grayscale inputs are a fixed point.
fn luma(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((weighted + 500) / 1000).min(255) as u8
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 2; // past the "P5" magic
    let width = next_header_value(bytes, &mut pos)?;
    let height = next_header_value(bytes, &mut pos)?;
    let maxval = next_header_value(bytes, &mut pos)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedImage(format!("maxval {maxval} out of range")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::MalformedImage(
                "missing whitespace after maxval".into(),
            ))
        }
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedImage(format!(
            "zero dimension: {width}x{height}"
        )));
    }
    let count = width as usize * height as usize;
    let payload = &bytes[pos..];
    let pixels = if maxval <= 255 {
        if payload.len() < count {
            return Err(Error::MalformedImage(format!(
                "truncated payload: {} of {count} bytes",
                payload.len()
            )));
        }
        payload[..count].to_vec()
    } else {
        // Two bytes per sample, big-endian; downshift to 8 bits.
        if payload.len() < 2 * count {
            return Err(Error::MalformedImage(format!(
                "truncated payload: {} of {} bytes",
                payload.len(),
                2 * count
            )));
        }
        payload[..2 * count].chunks_exact(2).map(|s| s[0]).collect()
    };
    GrayImage::new(width, height, pixels)
}

/// Reads the next unsigned decimal from a PGM header, skipping whitespace and
/// `#` comment lines.
fn next_header_value(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while !matches!(bytes.get(*pos), None | Some(b'\n')) {
                    *pos += 1;
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(b) if b.is_ascii_digit()) {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedImage("expected integer in header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedImage("header value out of range".into()))
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    use image::DynamicImage;

    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::MalformedImage(e.to_string()))?;
    let (width, height) = (decoded.width(), decoded.height());
    let pixels: Vec<u8> = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw(),
        DynamicImage::ImageLumaA8(img) => img.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLuma16(img) => img.pixels().map(|p| (p.0[0] >> 8) as u8).collect(),
        DynamicImage::ImageLumaA16(img) => img.pixels().map(|p| (p.0[0] >> 8) as u8).collect(),
        DynamicImage::ImageRgb8(img) => {
            img.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect()
        }
        DynamicImage::ImageRgba8(img) => {
            img.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect()
        }
        DynamicImage::ImageRgb16(img) => img
            .pixels()
            .map(|p| {
                luma(
                    (p.0[0] >> 8) as u8,
                    (p.0[1] >> 8) as u8,
                    (p.0[2] >> 8) as u8,
                )
            })
            .collect(),
        DynamicImage::ImageRgba16(img) => img
            .pixels()
            .map(|p| {
                luma(
                    (p.0[0] >> 8) as u8,
                    (p.0[1] >> 8) as u8,
                    (p.0[2] >> 8) as u8,
                )
            })
            .collect(),
        other => {
            let rgb = other.into_rgb8();
            rgb.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect()
        }
    };
    GrayImage::new(width, height, pixels)
}
