//! Phase-shifter beamfocusing weights, spatial gain fields over 2D regions,
//! focal-point extraction, and beam-squint focal curves.
//!
//! Analog phase shifters apply one phase per element to every subcarrier,
//! so a wideband aperture focused at a point at the carrier frequency
//! focuses the other subcarriers elsewhere. [`bse_focal_curve`] traces
//! those per-subcarrier focal points.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{nf_steering, AmplitudeModel, BlockageMask, OfdmGrid};
use crate::geometry::{ArrayGeometry, Position, Region2D, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Analog beamforming weights: one unit-modulus entry per array element.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    entries: Vec<Complex64>,
}

impl WeightVector {
    /// Validates the phase-shifter constraint |w_m| = 1.
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyArray);
        }
        for (index, e) in entries.iter().enumerate() {
            let value = e.norm();
            if (value - 1.0).abs() > 1e-9 {
                return Err(Error::MaskValueOutOfRange { index, value });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rotates every entry by a common phase (physically irrelevant).
    pub fn rotated(&self, phase: f64) -> Self {
        let rot = Complex64::from_polar(1.0, phase);
        Self { entries: self.entries.iter().map(|e| e * rot).collect() }
    }
}

/// Scalar field over a [`Region2D`] grid, linear power scale, row-major
/// (ny, nx) with row iy at `y_coord(iy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainField {
    region: Region2D,
    values: Array2<f64>,
}

impl GainField {
    pub fn new(region: Region2D, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != region.ny() || values.ncols() != region.nx() {
            return Err(Error::DimensionMismatch {
                expected: region.ny() * region.nx(),
                actual: values.nrows() * values.ncols(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite { name: "field values" });
        }
        Ok(Self { region, values })
    }

    pub fn region(&self) -> &Region2D {
        &self.region
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Indices (iy, ix) of the maximum value; ties broken by the lowest
    /// row-major index.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0usize, 0usize);
        let mut best_v = f64::NEG_INFINITY;
        for ((iy, ix), &v) in self.values.indexed_iter() {
            if v > best_v {
                best_v = v;
                best = (iy, ix);
            }
        }
        best
    }

    pub fn argmax_position(&self) -> Position {
        let (iy, ix) = self.argmax();
        self.region.point(iy, ix)
    }

    /// Scales values so the peak equals 1. Errors on an all-zero field.
    pub fn normalized_to_peak(mut self) -> Result<Self> {
        let max = self.max_value();
        if !(max > 0.0) {
            return Err(Error::ConstantField);
        }
        self.values.mapv_inplace(|v| v / max);
        Ok(self)
    }

    /// Number of 4-connected components of the superlevel set
    /// `{value >= frac * max}`. `frac = 0.5` counts half-max blobs, the
    /// resolvability criterion used by the sensing fixtures.
    pub fn connected_components_above(&self, frac: f64) -> usize {
        let threshold = frac * self.max_value();
        let (ny, nx) = (self.region.ny(), self.region.nx());
        let mut seen = vec![false; ny * nx];
        let idx = |iy: usize, ix: usize| iy * nx + ix;
        let mut count = 0usize;
        let mut stack = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                if seen[idx(iy, ix)] || self.values[(iy, ix)] < threshold {
                    continue;
                }
                count += 1;
                stack.push((iy, ix));
                seen[idx(iy, ix)] = true;
                while let Some((cy, cx)) = stack.pop() {
                    let mut visit = |ny_: usize, nx_: usize| {
                        if !seen[idx(ny_, nx_)] && self.values[(ny_, nx_)] >= threshold {
                            seen[idx(ny_, nx_)] = true;
                            stack.push((ny_, nx_));
                        }
                    };
                    if cy > 0 {
                        visit(cy - 1, cx);
                    }
                    if cy + 1 < ny {
                        visit(cy + 1, cx);
                    }
                    if cx > 0 {
                        visit(cy, cx - 1);
                    }
                    if cx + 1 < nx {
                        visit(cy, cx + 1);
                    }
                }
            }
        }
        count
    }
}

/// Conjugate-phase focusing weights: element m gets the conjugate of the
/// unit-amplitude spherical-wave phase towards `target` at
/// `design_frequency`, so the aperture adds coherently at the target.
pub fn conjugate_focus_weights(
    array: &ArrayGeometry,
    target: Position,
    design_frequency: f64,
) -> Result<WeightVector> {
    let steer = nf_steering(array, target, design_frequency, AmplitudeModel::Unit)?;
    WeightVector::new(steer.into_iter().map(|s| s.conj()).collect())
}

/// Radiated power field of `weights` on `array` at `frequency` over the
/// region grid: value at x is `|sum_m mask_m w_m a_m(x)|^2` with unit-
/// amplitude spherical-wave steering (the array-factor reading).
pub fn gain_field(
    weights: &WeightVector,
    array: &ArrayGeometry,
    region: &Region2D,
    frequency: f64,
    mask: Option<&BlockageMask>,
) -> Result<GainField> {
    if weights.len() != array.len() {
        return Err(Error::DimensionMismatch { expected: array.len(), actual: weights.len() });
    }
    if let Some(m) = mask {
        if m.len() != array.len() {
            return Err(Error::DimensionMismatch { expected: array.len(), actual: m.len() });
        }
    }
    if !(frequency > 0.0) {
        return Err(Error::NonPositive { name: "frequency", value: frequency });
    }

    // Fold the mask into the weights once; steering is recomputed per point.
    let eff: Vec<Complex64> = match mask {
        Some(m) => weights.entries().iter().zip(m.factors()).map(|(w, &f)| w * f).collect(),
        None => weights.entries().to_vec(),
    };
    let k = std::f64::consts::TAU * frequency / SPEED_OF_LIGHT;
    let elements = array.elements();

    let rows: Vec<Vec<f64>> = (0..region.ny())
        .into_par_iter()
        .map(|iy| {
            let y = region.y_coord(iy);
            (0..region.nx())
                .map(|ix| {
                    let x = region.x_coord(ix);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (e, w) in elements.iter().zip(&eff) {
                        let dx = x - e.x;
                        let dy = y - e.y;
                        let d = (dx * dx + dy * dy + e.z * e.z).sqrt();
                        acc += w * Complex64::from_polar(1.0, -k * d);
                    }
                    acc.norm_sqr()
                })
                .collect()
        })
        .collect();

    let mut values = Array2::zeros((region.ny(), region.nx()));
    for (iy, row) in rows.into_iter().enumerate() {
        for (ix, v) in row.into_iter().enumerate() {
            values[(iy, ix)] = v;
        }
    }
    GainField::new(*region, values)
}

/// Grid point of maximum gain. Errors when the field is constant to within
/// floating-point noise (no unique focus, e.g. a single-element aperture).
pub fn focal_point(field: &GainField) -> Result<Position> {
    let max = field.max_value();
    let min = field.min_value();
    if max - min <= 1e-12 * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::ConstantField);
    }
    Ok(field.argmax_position())
}

/// Beam-squint focal curve: with weights designed at the carrier, returns
/// `(f_n, focal point)` for every subcarrier of `grid`, in frequency order.
/// Needs at least two subcarriers (a single carrier cannot squint).
pub fn bse_focal_curve(
    array: &ArrayGeometry,
    target: Position,
    grid: &OfdmGrid,
    region: &Region2D,
    mask: Option<&BlockageMask>,
) -> Result<Vec<(f64, Position)>> {
    if grid.n_subcarriers() < 2 {
        return Err(Error::EmptyInput("bse_focal_curve needs >= 2 subcarriers"));
    }
    let weights = conjugate_focus_weights(array, target, grid.fc())?;
    grid.frequencies()
        .into_iter()
        .map(|f| {
            let field = gain_field(&weights, array, region, f, mask)?;
            Ok((f, focal_point(&field)?))
        })
        .collect()
}
