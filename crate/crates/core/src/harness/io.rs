//! 8-bit grayscale PNG/PGM reading and writing.

use std::path::Path;

use image::{DynamicImage, GrayImage, Luma};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// ITU-R BT.601 luma weights.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

fn from_dynamic(img: DynamicImage) -> Result<ImageGrid> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        other => other
            .to_rgb32f()
            .pixels()
            .map(|p| (LUMA[0] * p.0[0] as f64 + LUMA[1] * p.0[1] as f64 + LUMA[2] * p.0[2] as f64).clamp(0.0, 1.0))
            .collect(),
    };
    ImageGrid::new(h, w, values)
}

/// Loads an image as grayscale in `[0, 1]`; color is reduced to luma.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let img = image::open(path.as_ref())?;
    from_dynamic(img)
}

/// Decodes in-memory PNG/PGM bytes.
pub fn decode_image(bytes: &[u8]) -> Result<ImageGrid> {
    from_dynamic(image::load_from_memory(bytes)?)
}

fn to_gray(x: &ImageGrid) -> Result<GrayImage> {
    if x.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("image to save"));
    }
    let mut img = GrayImage::new(x.width() as u32, x.height() as u32);
    for (i, p) in img.pixels_mut().enumerate() {
        let v = x.values()[i].clamp(0.0, 1.0);
        *p = Luma([(v * 255.0).round() as u8]);
    }
    Ok(img)
}

/// Writes an 8-bit grayscale image; the format follows the extension (`.png`, `.pgm`).
pub fn save_image(path: impl AsRef<Path>, x: &ImageGrid) -> Result<()> {
    let path = path.as_ref();
    let img = to_gray(x)?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            let encoder = image::codecs::pnm::PnmEncoder::new(&mut file)
                .with_subtype(image::codecs::pnm::PnmSubtype::Graymap(image::codecs::pnm::SampleEncoding::Binary));
            img.write_with_encoder(encoder)?;
        }
        Some("png") => img.save_with_format(path, image::ImageFormat::Png)?,
        other => {
            return Err(Error::invalid(format!(
                "unsupported image extension {:?} (use .png or .pgm)",
                other.unwrap_or("")
            )))
        }
    }
    Ok(())
}
