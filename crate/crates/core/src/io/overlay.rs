//! Depth-over-RGB overlay images for qualitative inspection.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};
use crate::projection::{ImageTensor, SparseDepthMap};

/// Fixed blue-to-red colormap over normalized inverse depth.
fn colormap(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * (1.5 - (4.0 * (t - 0.75)).abs()).clamp(0.0, 1.0)).round() as u8;
    let g = (255.0 * (1.5 - (4.0 * (t - 0.5)).abs()).clamp(0.0, 1.0)).round() as u8;
    let b = (255.0 * (1.5 - (4.0 * (t - 0.25)).abs()).clamp(0.0, 1.0)).round() as u8;
    [r, g, b]
}

/// Writes a lossless PNG of the RGB image with measured depth pixels
/// color-mapped by inverse depth (near = red, far = blue). Identical inputs
/// produce byte-identical files.
pub fn emit_overlay(rgb: &ImageTensor, depth: &SparseDepthMap, path: &Path) -> Result<()> {
    if rgb.width != depth.width() || rgb.height != depth.height() || rgb.channels != 3 {
        return Err(Error::ShapeMismatch {
            op: "emit_overlay",
            detail: format!(
                "rgb {}x{}x{} vs depth {}x{}",
                rgb.channels,
                rgb.height,
                rgb.width,
                depth.height(),
                depth.width()
            ),
        });
    }
    let (lo, hi) = depth
        .values()
        .iter()
        .filter(|&&v| v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut img = ImageBuffer::new(rgb.width as u32, rgb.height as u32);
    for y in 0..rgb.height {
        for x in 0..rgb.width {
            let d = depth.get(x, y);
            let px = if d > 0.0 {
                colormap((d - lo) / span)
            } else {
                [
                    (rgb.get(0, y, x).clamp(0.0, 1.0) * 255.0).round() as u8,
                    (rgb.get(1, y, x).clamp(0.0, 1.0) * 255.0).round() as u8,
                    (rgb.get(2, y, x).clamp(0.0, 1.0) * 255.0).round() as u8,
                ]
            };
            img.put_pixel(x as u32, y as u32, Rgb(px));
        }
    }
    img.save(path)
        .map_err(|e| Error::Other(format!("{}: {e}", path.display())))
}
