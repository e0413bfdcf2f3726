//! Raster masks of annulus-intersection regions.

use num_complex::Complex;
use rayon::prelude::*;

use crate::gains::Gain;
use crate::scalar::{cvt, Scalar};

use super::{membership, GainProfile, SrgError};

/// Axis-aligned window of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T: Scalar> {
    pub re_min: T,
    pub re_max: T,
    pub im_min: T,
    pub im_max: T,
}

impl<T: Scalar> Window<T> {
    pub fn new(re_min: T, re_max: T, im_min: T, im_max: T) -> Result<Self, SrgError> {
        if !(re_min < re_max) || !(im_min < im_max) {
            return Err(SrgError::InvalidWindow(format!(
                "degenerate window [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Self { re_min, re_max, im_min, im_max })
    }

    /// Default square window for a finite outer radius: half-width
    /// `1.2 gamma0`, centered on the real midpoint of the center grid.
    pub fn default_for(gamma0: T, alpha_min: T, alpha_max: T) -> Result<Self, SrgError> {
        let half = gamma0.abs().max(cvt(1e-6)) * cvt(1.2);
        let mid = (alpha_min + alpha_max) / cvt(2.0);
        Window::new(mid - half, mid + half, -half, half)
    }
}

/// Raster dimensions in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub fn new(width: usize, height: usize) -> Result<Self, SrgError> {
        if width == 0 || height == 0 {
            return Err(SrgError::InvalidWindow(format!("empty raster {width}x{height}")));
        }
        Ok(Self { width, height })
    }
}

/// How a cell is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterMode {
    /// Membership of the cell center; matches the figures.
    CellCenter,
    /// A cell is inside when every annulus constraint can hold somewhere
    /// in the cell, with radii widened by the profile tolerance; keeps the
    /// contains-the-true-set guarantee.
    Conservative,
}

/// Boolean raster of the annulus intersection over a window.
///
/// Row 0 is the top of the window (largest imaginary part); the mask is
/// stored row-major. The point at infinity is tracked as a flag, not a
/// cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SrgRegion<T: Scalar> {
    window: Window<T>,
    resolution: Resolution,
    mask: Vec<bool>,
    includes_infinity: bool,
}

impl<T: Scalar> SrgRegion<T> {
    pub fn window(&self) -> &Window<T> {
        &self.window
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.resolution.width
    }

    pub fn height(&self) -> usize {
        self.resolution.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn includes_infinity(&self) -> bool {
        self.includes_infinity
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.resolution.width + col]
    }

    pub fn count_inside(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Cell center; computed symmetrically so that mirrored rows of a
    /// symmetric window get exactly negated imaginary parts.
    pub fn cell_center(&self, row: usize, col: usize) -> (T, T) {
        let w = self.resolution.width as f64;
        let h = self.resolution.height as f64;
        let re_mid = (self.window.re_min + self.window.re_max) / cvt(2.0);
        let im_mid = (self.window.im_min + self.window.im_max) / cvt(2.0);
        let re_step = (self.window.re_max - self.window.re_min) / cvt(w);
        let im_step = (self.window.im_max - self.window.im_min) / cvt(h);
        let re = re_mid + re_step * cvt::<T>((2.0 * col as f64 + 1.0 - w) / 2.0);
        let im = im_mid + im_step * cvt::<T>((h - (2.0 * row as f64 + 1.0)) / 2.0);
        (re, im)
    }

    /// Rectangle spanned by a cell, as (re_lo, re_hi, im_lo, im_hi).
    fn cell_rect(&self, row: usize, col: usize) -> (T, T, T, T) {
        let (re, im) = self.cell_center(row, col);
        let re_step = (self.window.re_max - self.window.re_min)
            / cvt(self.resolution.width as f64);
        let im_step = (self.window.im_max - self.window.im_min)
            / cvt(self.resolution.height as f64);
        let half_re = re_step / cvt(2.0);
        let half_im = im_step / cvt(2.0);
        (re - half_re, re + half_re, im - half_im, im + half_im)
    }
}

/// Distance range from a real point `(alpha, 0)` to an axis-aligned cell.
fn distance_range<T: Scalar>(alpha: T, rect: (T, T, T, T)) -> (T, T) {
    let (re_lo, re_hi, im_lo, im_hi) = rect;
    let dre = if alpha < re_lo {
        re_lo - alpha
    } else if alpha > re_hi {
        alpha - re_hi
    } else {
        T::zero()
    };
    let dim = if T::zero() < im_lo {
        im_lo
    } else if T::zero() > im_hi {
        -im_hi
    } else {
        T::zero()
    };
    let dmin = (dre * dre + dim * dim).sqrt();
    let fre = (alpha - re_lo).abs().max((alpha - re_hi).abs());
    let fim = im_lo.abs().max(im_hi.abs());
    let dmax = (fre * fre + fim * fim).sqrt();
    (dmin, dmax)
}

/// Rasterizes the annulus intersection over a window.
pub fn rasterize<T: Scalar>(
    profile: &GainProfile<T>,
    window: Window<T>,
    resolution: Resolution,
    mode: RasterMode,
) -> SrgRegion<T> {
    let mut region = SrgRegion {
        window,
        resolution,
        mask: vec![false; resolution.width * resolution.height],
        includes_infinity: profile.all_unbounded(),
    };
    let tol = profile.abs_tol();
    let width = resolution.width;
    let shell = region.clone();
    let rows: Vec<Vec<bool>> = (0..resolution.height)
        .into_par_iter()
        .map(|row| {
            let mut out = vec![false; width];
            for (col, slot) in out.iter_mut().enumerate() {
                *slot = match mode {
                    RasterMode::CellCenter => {
                        let (re, im) = shell.cell_center(row, col);
                        membership(Complex::new(re, im), profile)
                    }
                    RasterMode::Conservative => {
                        let rect = shell.cell_rect(row, col);
                        profile.entries().iter().all(|e| {
                            let (dmin, dmax) = distance_range(e.alpha, rect);
                            if dmax < e.zeta - tol {
                                return false;
                            }
                            match e.gamma {
                                Gain::Infinite => true,
                                Gain::Finite(g) => dmin <= g + tol,
                            }
                        })
                    }
                };
            }
            out
        })
        .collect();
    for (row, vals) in rows.into_iter().enumerate() {
        region.mask[row * width..(row + 1) * width].copy_from_slice(&vals);
    }
    region
}

/// Cellwise containment of one region in another.
///
/// Requires exactly matching windows and resolutions; the flag for the
/// point at infinity must also be contained.
pub fn region_contains<T: Scalar>(
    outer: &SrgRegion<T>,
    inner: &SrgRegion<T>,
) -> Result<bool, SrgError> {
    if outer.window != inner.window || outer.resolution != inner.resolution {
        return Err(SrgError::RegionMismatch);
    }
    if inner.includes_infinity && !outer.includes_infinity {
        return Ok(false);
    }
    Ok(inner
        .mask
        .iter()
        .zip(&outer.mask)
        .all(|(&i, &o)| !i || o))
}

/// Number of cells present in exactly one of two compatible regions.
pub fn region_diff_count<T: Scalar>(
    a: &SrgRegion<T>,
    b: &SrgRegion<T>,
) -> Result<usize, SrgError> {
    if a.window != b.window || a.resolution != b.resolution {
        return Err(SrgError::RegionMismatch);
    }
    Ok(a.mask.iter().zip(&b.mask).filter(|(&x, &y)| x != y).count())
}
