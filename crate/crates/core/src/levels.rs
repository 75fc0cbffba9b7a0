//! The three-level gradient pyramid: image, gradient, gradient of gradient.
//!
//! Every level lives in the same 0..255 intensity alphabet so the same
//! histogram machinery applies uniformly. The default operator is the
//! forward-difference L1 magnitude `|dx| + |dy|` clamped to 255, which is
//! integer-exact; a Sobel-magnitude alternative (rescaled to 0..255) is
//! available for sensitivity studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::GrayImage;

/// Gradient operator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientKind {
    /// `min(|img(x+1,y) - img(x,y)| + |img(x,y+1) - img(x,y)|, 255)`.
    #[default]
    ForwardDiff,
    /// 3x3 Sobel magnitude with replicated borders, rescaled to 0..255.
    Sobel,
}

/// Image, gradient, and gradient-of-gradient of one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelPyramid {
    l1: GrayImage,
    l2: GrayImage,
    l3: GrayImage,
}

impl LevelPyramid {
    pub fn l1(&self) -> &GrayImage {
        &self.l1
    }

    pub fn l2(&self) -> &GrayImage {
        &self.l2
    }

    pub fn l3(&self) -> &GrayImage {
        &self.l3
    }

    /// Level by 1-based index. Panics unless `level` is 1, 2, or 3.
    pub fn level(&self, level: usize) -> &GrayImage {
        match level {
            1 => &self.l1,
            2 => &self.l2,
            3 => &self.l3,
            _ => panic!("pyramid has levels 1..=3, got {level}"),
        }
    }

    pub fn levels(&self) -> [&GrayImage; 3] {
        [&self.l1, &self.l2, &self.l3]
    }
}

/// Gradient with the default forward-difference operator.
///
/// Output dimensions shrink to `(width - 1) x (height - 1)`.
pub fn gradient(img: &GrayImage) -> Result<GrayImage> {
    gradient_with(img, GradientKind::ForwardDiff)
}

/// Gradient with an explicit operator.
pub fn gradient_with(img: &GrayImage, kind: GradientKind) -> Result<GrayImage> {
    if img.width() < 2 || img.height() < 2 {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: 2,
        });
    }
    match kind {
        GradientKind::ForwardDiff => forward_diff(img),
        GradientKind::Sobel => sobel(img),
    }
}

fn forward_diff(img: &GrayImage) -> Result<GrayImage> {
    GrayImage::from_fn(img.width() - 1, img.height() - 1, |x, y| {
        let here = img.get(x, y);
        let dx = u16::from(img.get(x + 1, y).abs_diff(here));
        let dy = u16::from(img.get(x, y + 1).abs_diff(here));
        (dx + dy).min(255) as u8
    })
}

fn sobel(img: &GrayImage) -> Result<GrayImage> {
    // Largest attainable magnitude: 255 * 4 per axis.
    let scale = 255.0 * 4.0 * std::f64::consts::SQRT_2;
    let sample = |x: i64, y: i64| -> i64 {
        let cx = x.clamp(0, i64::from(img.width()) - 1) as u32;
        let cy = y.clamp(0, i64::from(img.height()) - 1) as u32;
        i64::from(img.get(cx, cy))
    };
    GrayImage::from_fn(img.width() - 1, img.height() - 1, |x, y| {
        let (x, y) = (i64::from(x), i64::from(y));
        let gx = sample(x + 1, y - 1) + 2 * sample(x + 1, y) + sample(x + 1, y + 1)
            - sample(x - 1, y - 1)
            - 2 * sample(x - 1, y)
            - sample(x - 1, y + 1);
        let gy = sample(x - 1, y + 1) + 2 * sample(x, y + 1) + sample(x + 1, y + 1)
            - sample(x - 1, y - 1)
            - 2 * sample(x, y - 1)
            - sample(x + 1, y - 1);
        let mag = ((gx * gx + gy * gy) as f64).sqrt();
        (255.0 * mag / scale).round().clamp(0.0, 255.0) as u8
    })
}

/// Builds the three-level pyramid with the default operator.
///
/// Needs at least a 3x3 input so the third level is nonempty.
pub fn build_pyramid(img: &GrayImage) -> Result<LevelPyramid> {
    build_pyramid_with(img, GradientKind::ForwardDiff)
}

/// Builds the three-level pyramid with an explicit gradient operator.
pub fn build_pyramid_with(img: &GrayImage, kind: GradientKind) -> Result<LevelPyramid> {
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: 3,
        });
    }
    let l2 = gradient_with(img, kind)?;
    let l3 = gradient_with(&l2, kind)?;
    Ok(LevelPyramid {
        l1: img.clone(),
        l2,
        l3,
    })
}
