//! Reconstruction quality and similarity measures.

use crate::error::{Error, Result};
use crate::grid::{dot, ImageGrid};

/// Value reported in place of +infinity dB when the error is exactly zero.
pub const DB_CAP: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    SnrDb,
    PsnrDb,
    Cosine,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub name: MetricName,
    pub value: f64,
}

/// `10 log10(||reference||^2 / ||reference - x||^2)`, capped at [`DB_CAP`].
pub fn snr_db(reference: &ImageGrid, x: &ImageGrid) -> Result<f64> {
    reference.check_same_shape(x)?;
    let signal = dot(reference.values(), reference.values());
    if signal == 0.0 {
        return Err(Error::invalid("SNR reference image is all zero"));
    }
    let error: f64 = reference
        .values()
        .iter()
        .zip(x.values())
        .map(|(r, v)| (r - v) * (r - v))
        .sum();
    Ok(capped_db(signal / error))
}

/// `10 log10(peak^2 / MSE)`, capped at [`DB_CAP`].
pub fn psnr_db(reference: &ImageGrid, x: &ImageGrid, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::invalid(format!("PSNR peak must be positive, got {peak}")));
    }
    let mse = mse(reference, x)?;
    Ok(capped_db(peak * peak / mse))
}

pub fn mse(reference: &ImageGrid, x: &ImageGrid) -> Result<f64> {
    reference.check_same_shape(x)?;
    let sum: f64 = reference
        .values()
        .iter()
        .zip(x.values())
        .map(|(r, v)| (r - v) * (r - v))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// Cosine of the angle between two flattened arrays.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len()));
    }
    let na = dot(a, a);
    let nb = dot(b, b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero-norm vector"));
    }
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): exact 1.0 for identical inputs
    Ok((dot(a, b) / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

fn capped_db(ratio: f64) -> f64 {
    if ratio.is_infinite() {
        DB_CAP
    } else {
        (10.0 * ratio.log10()).min(DB_CAP)
    }
}
