//! Linear forward operators `H` and their exact adjoints.
//!
//! Every operator here is immutable once built, so `apply`/`adjoint` can be called
//! from any number of threads.

mod conv;
mod kernel;
mod radon;

pub use conv::{CircularBlur, Decimation};
pub use kernel::ConvKernel;
pub use radon::{default_detector_count, RadonGeometry, RadonProjector};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Geometry of an operator's range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeLayout {
    Image { rows: usize, cols: usize },
    Sinogram { angles: usize, detectors: usize },
}

impl RangeLayout {
    pub fn len(&self) -> usize {
        match *self {
            RangeLayout::Image { rows, cols } => rows * cols,
            RangeLayout::Sinogram { angles, detectors } => angles * detectors,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for RangeLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RangeLayout::Image { rows, cols } => write!(f, "image {rows}x{cols}"),
            RangeLayout::Sinogram { angles, detectors } => {
                write!(f, "sinogram {angles} angles x {detectors} detectors")
            }
        }
    }
}

/// A vector in an operator's range, e.g. a sinogram or a low-resolution image.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    values: Vec<f64>,
    layout: RangeLayout,
}

impl Measurement {
    pub fn new(values: Vec<f64>, layout: RangeLayout) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::shape(layout, format!("{} values", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measurement"));
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: RangeLayout) -> Self {
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> RangeLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reinterprets an image-shaped measurement as an image.
    pub fn to_image(&self) -> Result<ImageGrid> {
        match self.layout {
            RangeLayout::Image { rows, cols } => ImageGrid::new(rows, cols, self.values.clone()),
            RangeLayout::Sinogram { angles, detectors } => {
                ImageGrid::new(angles, detectors, self.values.clone())
            }
        }
    }

    pub fn from_image(image: &ImageGrid) -> Self {
        Self {
            values: image.values().to_vec(),
            layout: RangeLayout::Image {
                rows: image.height(),
                cols: image.width(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Identity,
    Mask,
    Blur,
    Downsample,
    Radon,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 5] = [
        OperatorKind::Identity,
        OperatorKind::Mask,
        OperatorKind::Blur,
        OperatorKind::Downsample,
        OperatorKind::Radon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Identity => "identity",
            OperatorKind::Mask => "mask",
            OperatorKind::Blur => "blur",
            OperatorKind::Downsample => "downsample",
            OperatorKind::Radon => "radon",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Identity,
    Mask(Vec<f64>),
    Blur(CircularBlur),
    Downsample(Decimation),
    Radon(RadonProjector),
}

/// Forward map `H` between an image domain and a measurement range.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    domain: (usize, usize),
    range: RangeLayout,
    kind: Kind,
}

impl LinearOperator {
    pub fn identity(rows: usize, cols: usize) -> Self {
        Self {
            domain: (rows, cols),
            range: RangeLayout::Image { rows, cols },
            kind: Kind::Identity,
        }
    }

    /// Elementwise multiplication by a {0,1} mask. Self-adjoint.
    pub fn mask(mask: &ImageGrid) -> Result<Self> {
        if mask.values().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        let (rows, cols) = mask.shape();
        Ok(Self {
            domain: (rows, cols),
            range: RangeLayout::Image { rows, cols },
            kind: Kind::Mask(mask.values().to_vec()),
        })
    }

    /// Periodic convolution with a normalized kernel.
    pub fn blur(kernel: ConvKernel, domain: (usize, usize)) -> Result<Self> {
        if !kernel.is_normalized() {
            return Err(Error::invalid(
                "blur kernel is not normalized; use blur_unnormalized to allow it",
            ));
        }
        Self::blur_unnormalized(kernel, domain)
    }

    pub fn blur_unnormalized(kernel: ConvKernel, (rows, cols): (usize, usize)) -> Result<Self> {
        check_kernel_fits(&kernel, rows, cols)?;
        Ok(Self {
            domain: (rows, cols),
            range: RangeLayout::Image { rows, cols },
            kind: Kind::Blur(CircularBlur {
                kernel,
                height: rows,
                width: cols,
            }),
        })
    }

    /// Periodic blur followed by subsampling by `factor` on both axes.
    pub fn downsample(kernel: ConvKernel, factor: usize, (rows, cols): (usize, usize)) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("downsampling factor must be positive"));
        }
        if rows % factor != 0 || cols % factor != 0 {
            return Err(Error::invalid(format!(
                "domain {rows}x{cols} is not divisible by factor {factor}"
            )));
        }
        if !kernel.is_normalized() {
            return Err(Error::invalid("downsampling kernel is not normalized"));
        }
        check_kernel_fits(&kernel, rows, cols)?;
        Ok(Self {
            domain: (rows, cols),
            range: RangeLayout::Image {
                rows: rows / factor,
                cols: cols / factor,
            },
            kind: Kind::Downsample(Decimation {
                blur: CircularBlur {
                    kernel,
                    height: rows,
                    width: cols,
                },
                factor,
            }),
        })
    }

    /// Parallel-beam X-ray transform.
    pub fn radon(geometry: RadonGeometry) -> Self {
        let n = geometry.grid_size();
        Self {
            domain: (n, n),
            range: RangeLayout::Sinogram {
                angles: geometry.angles_deg().len(),
                detectors: geometry.detector_count(),
            },
            kind: Kind::Radon(RadonProjector::new(geometry)),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        match self.kind {
            Kind::Identity => OperatorKind::Identity,
            Kind::Mask(_) => OperatorKind::Mask,
            Kind::Blur(_) => OperatorKind::Blur,
            Kind::Downsample(_) => OperatorKind::Downsample,
            Kind::Radon(_) => OperatorKind::Radon,
        }
    }

    pub fn domain_shape(&self) -> (usize, usize) {
        self.domain
    }

    pub fn domain_len(&self) -> usize {
        self.domain.0 * self.domain.1
    }

    pub fn range_layout(&self) -> RangeLayout {
        self.range
    }

    pub fn range_len(&self) -> usize {
        self.range.len()
    }

    pub fn radon_geometry(&self) -> Option<&RadonGeometry> {
        match &self.kind {
            Kind::Radon(p) => Some(p.geometry()),
            _ => None,
        }
    }

    pub fn apply(&self, x: &ImageGrid) -> Result<Measurement> {
        if x.shape() != self.domain {
            return Err(Error::shape(
                format!("{}x{}", self.domain.0, self.domain.1),
                format!("{}x{}", x.height(), x.width()),
            ));
        }
        let mut out = vec![0.0; self.range_len()];
        self.apply_slice(x.values(), &mut out);
        Measurement::new(out, self.range)
    }

    pub fn adjoint(&self, v: &Measurement) -> Result<ImageGrid> {
        if v.layout() != self.range {
            return Err(Error::shape(self.range, v.layout()));
        }
        let mut out = vec![0.0; self.domain_len()];
        self.adjoint_slice(v.values(), &mut out);
        ImageGrid::new(self.domain.0, self.domain.1, out)
    }

    /// Raw forward map on flat row-major buffers; lengths must match the declared shapes.
    pub fn apply_slice(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.domain_len());
        assert_eq!(out.len(), self.range_len());
        match &self.kind {
            Kind::Identity => out.copy_from_slice(x),
            Kind::Mask(m) => {
                for ((o, xi), mi) in out.iter_mut().zip(x).zip(m) {
                    *o = xi * mi;
                }
            }
            Kind::Blur(b) => b.apply(x, out),
            Kind::Downsample(d) => d.apply(x, out),
            Kind::Radon(r) => r.apply(x, out),
        }
    }

    pub fn adjoint_slice(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.range_len());
        assert_eq!(out.len(), self.domain_len());
        match &self.kind {
            Kind::Identity => out.copy_from_slice(v),
            Kind::Mask(m) => {
                for ((o, vi), mi) in out.iter_mut().zip(v).zip(m) {
                    *o = vi * mi;
                }
            }
            Kind::Blur(b) => b.adjoint(v, out),
            Kind::Downsample(d) => d.adjoint(v, out),
            Kind::Radon(r) => r.adjoint(v, out),
        }
    }

    /// Returns `(H^T (y - H x), ||y - H x||^2)`.
    pub fn backprojected_residual(&self, y: &Measurement, x: &ImageGrid) -> Result<(ImageGrid, f64)> {
        if y.layout() != self.range {
            return Err(Error::shape(self.range, y.layout()));
        }
        let hx = self.apply(x)?;
        let residual: Vec<f64> = y.values().iter().zip(hx.values()).map(|(a, b)| a - b).collect();
        let misfit = crate::grid::dot(&residual, &residual);
        let mut back = vec![0.0; self.domain_len()];
        self.adjoint_slice(&residual, &mut back);
        Ok((ImageGrid::new(self.domain.0, self.domain.1, back)?, misfit))
    }

    /// Data inconsistency `||y - H x||^2`.
    pub fn misfit(&self, y: &Measurement, x: &ImageGrid) -> Result<f64> {
        if y.layout() != self.range {
            return Err(Error::shape(self.range, y.layout()));
        }
        let hx = self.apply(x)?;
        Ok(y
            .values()
            .iter()
            .zip(hx.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

fn check_kernel_fits(kernel: &ConvKernel, rows: usize, cols: usize) -> Result<()> {
    if kernel.rows() > rows || kernel.cols() > cols {
        return Err(Error::invalid(format!(
            "kernel {}x{} does not fit in domain {rows}x{cols}",
            kernel.rows(),
            kernel.cols()
        )));
    }
    Ok(())
}
