//! Procedural test images shipped with the crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::phantom::generate_phantom;
use crate::error::Result;
use crate::grid::ImageGrid;

pub const BUNDLED_NAMES: [&str; 2] = ["text", "blobs"];

/// Dark pseudo-glyphs on a light page: 5x7 random stroke bitmaps laid out in lines.
pub fn text_pattern(n: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (n / 64).max(1);
    let (glyph_w, glyph_h) = (6 * scale, 9 * scale);
    let mut img = ImageGrid::filled(n, n, 0.92);
    let margin = 2 * scale;
    let mut top = margin;
    while top + glyph_h <= n - margin {
        let mut left = margin;
        while left + glyph_w <= n - margin {
            // word gaps
            if rng.gen_bool(0.18) {
                left += glyph_w;
                continue;
            }
            let bits: u64 = rng.gen();
            for gr in 0..7 {
                for gc in 0..5 {
                    let on = (bits >> (gr * 5 + gc)) & 1 == 1
                        // vertical and horizontal strokes make the glyphs look letter-like
                        || (gc == 0 && bits & (1 << 40) != 0)
                        || (gr == 6 && bits & (1 << 41) != 0);
                    if !on {
                        continue;
                    }
                    for dr in 0..scale {
                        for dc in 0..scale {
                            img.set(top + gr * scale + dr, left + gc * scale + dc, 0.08);
                        }
                    }
                }
            }
            left += glyph_w;
        }
        top += glyph_h + scale;
    }
    img
}

/// Sum of Gaussian bumps rescaled into `[0.1, 0.9]`.
pub fn smooth_blobs(n: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            (
                rng.gen_range(0.0..nf),
                rng.gen_range(0.0..nf),
                rng.gen_range(0.06..0.2) * nf,
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let raw = ImageGrid::from_fn(n, n, |r, c| {
        bumps
            .iter()
            .map(|&(br, bc, s, a)| {
                let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum()
    });
    let (lo, hi) = (raw.min(), raw.max());
    raw.map(|v| 0.1 + 0.8 * (v - lo) / (hi - lo))
}

/// Concentric rings with a smooth radial falloff.
fn rings(n: usize) -> ImageGrid {
    let c = (n as f64 - 1.0) / 2.0;
    ImageGrid::from_fn(n, n, |r, col| {
        let d = ((r as f64 - c).powi(2) + (col as f64 - c).powi(2)).sqrt() / n as f64;
        0.5 + 0.4 * (d * 40.0).cos() * (-d * 2.0).exp()
    })
}

/// Diagonal ramp with a constant gradient.
fn ramp(n: usize) -> ImageGrid {
    let span = 2.0 * (n as f64 - 1.0);
    ImageGrid::from_fn(n, n, |r, c| 0.1 + 0.8 * (r + c) as f64 / span)
}

fn stripes(n: usize) -> ImageGrid {
    ImageGrid::from_fn(n, n, |r, c| {
        let t = (r as f64 * 0.3 + c as f64 * 0.8) / n as f64 * 12.0;
        0.5 + 0.35 * t.sin()
    })
}

fn disks(n: usize) -> ImageGrid {
    let cell = (n / 4).max(1) as f64;
    ImageGrid::from_fn(n, n, |r, c| {
        let (fr, fc) = ((r as f64 + 0.5) / cell, (c as f64 + 0.5) / cell);
        let (dr, dc) = (fr - fr.floor() - 0.5, fc - fc.floor() - 0.5);
        let level = 0.2 + 0.15 * ((fr.floor() + 2.0 * fc.floor()) % 5.0);
        if dr * dr + dc * dc < 0.12 {
            level + 0.2
        } else {
            0.15
        }
    })
}

/// One of the two bundled deblurring / super-resolution test images.
pub fn bundled_image(name: &str, n: usize) -> Option<ImageGrid> {
    match name {
        "text" => Some(text_pattern(n, 7)),
        "blobs" => Some(smooth_blobs(n, 3)),
        _ => None,
    }
}

/// Nine distinct images used by the input/output correlation study.
pub fn correlation_pool(n: usize) -> Result<Vec<ImageGrid>> {
    Ok(vec![
        generate_phantom(n)?,
        text_pattern(n, 7),
        smooth_blobs(n, 3),
        rings(n),
        ramp(n),
        stripes(n),
        disks(n),
        smooth_blobs(n, 11),
        text_pattern(n, 19),
    ])
}
