//! Raster ingestion: channel replication, bilinear resize and dtype-max rescaling.

use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_SIZE: usize = 200;

/// File extensions accepted as dataset images.
pub const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "pgm"];

pub fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Converts a decoded raster to a `(size, size, 3)` tensor in `[0, 1]`.
///
/// Values are divided by the maximum of the source dtype (255 for 8-bit,
/// 65535 for 16-bit); grayscale is replicated across three channels and
/// alpha is dropped.
pub fn preprocess_image(raw: &DynamicImage, size: usize) -> Result<Tensor<f32>> {
    let (w, h) = (raw.width() as usize, raw.height() as usize);
    if w == 0 || h == 0 || size == 0 {
        return Err(Error::invalid(format!("cannot preprocess a {w}x{h} image")));
    }
    let rgb = raw.to_rgb32f();
    let resized = resize_bilinear(rgb.as_raw(), h, w, 3, size, size);
    Tensor::from_vec(&[size, size, 3], resized.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let raw = image::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    preprocess_image(&raw, IMAGE_SIZE).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn resize_bilinear(
    src: &[f32],
    h: usize,
    w: usize,
    c: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f32> {
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f32)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let pos = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, (pos - lo as f64) as f32)
            })
            .collect()
    };
    let ys = axis(out_h, h);
    let xs = axis(out_w, w);
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for ch in 0..c {
                let p = |y: usize, x: usize| src[(y * w + x) * c + ch];
                let top = p(y0, x0) * (1.0 - tx) + p(y0, x1) * tx;
                let bottom = p(y1, x0) * (1.0 - tx) + p(y1, x1) * tx;
                out.push(top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    out
}
