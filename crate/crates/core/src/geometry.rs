//! Coordinate frames, aperture constructors, and near/far-field diagnostics.
//!
//! All geometry values are immutable after construction and safe to share
//! across threads. Lengths are in meters, frequencies in Hz. 2D scenarios
//! put everything at z = 0 unless a scenario declares heights explicitly.

use nalgebra::Vector3;

use crate::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Tolerance for unit-vector checks.
const UNIT_TOL: f64 = 1e-9;

/// A point in 3D space, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Convenience constructor for 2D scenarios (z = 0).
    pub fn xy(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_coords(v: Vector3<f64>) -> Self {
        Self { x: v.x, y: v.y, z: v.z }
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Element positions and orientation of one aperture: an ELAA, a RIS panel,
/// or a single base-station array.
///
/// `wavelength` is the nominal carrier wavelength the aperture was built
/// for; it feeds the Fraunhofer diagnostic and default spacings. Steering
/// responses always use the wavelength of the frequency they are evaluated
/// at, not this field.
#[derive(Debug, Clone)]
pub struct ArrayGeometry {
    elements: Vec<Position>,
    reference_center: Position,
    normal: Vector3<f64>,
    wavelength: f64,
}

impl ArrayGeometry {
    /// Builds an aperture from explicit element positions.
    ///
    /// Requires at least one element, pairwise-distinct finite positions,
    /// a unit normal, and a positive wavelength.
    pub fn new(
        elements: Vec<Position>,
        reference_center: Position,
        normal: Vector3<f64>,
        wavelength: f64,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::EmptyArray);
        }
        for (i, e) in elements.iter().enumerate() {
            if !e.is_finite() {
                return Err(Error::NonFinite { name: "element position" });
            }
            for (j, f) in elements.iter().enumerate().take(i) {
                if e.distance_to(f) < 1e-15 {
                    return Err(Error::DuplicateElements { a: j, b: i });
                }
            }
        }
        if !reference_center.is_finite() {
            return Err(Error::NonFinite { name: "reference_center" });
        }
        let norm = normal.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitVector { name: "normal", norm });
        }
        if !(wavelength > 0.0) {
            return Err(Error::NonPositive { name: "wavelength", value: wavelength });
        }
        Ok(Self { elements, reference_center, normal, wavelength })
    }

    pub fn elements(&self) -> &[Position] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn reference_center(&self) -> Position {
        self.reference_center
    }

    /// Boresight direction (unit vector).
    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Replaces the boresight normal (must be unit length).
    pub fn with_normal(mut self, normal: Vector3<f64>) -> Result<Self> {
        let norm = normal.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitVector { name: "normal", norm });
        }
        self.normal = normal;
        Ok(self)
    }

    /// Replaces the nominal carrier wavelength.
    pub fn with_wavelength(mut self, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(Error::NonPositive { name: "wavelength", value: wavelength });
        }
        self.wavelength = wavelength;
        Ok(self)
    }

    /// Aperture diameter: the maximum pairwise element distance.
    /// Zero for a single-element array.
    pub fn aperture_diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.elements.iter().enumerate() {
            for b in self.elements.iter().skip(i + 1) {
                d = d.max(a.distance_to(b));
            }
        }
        d
    }

    /// Fraunhofer distance 2D²/λ of this aperture at its nominal wavelength.
    /// Zero for a single-element array (no aperture extent).
    pub fn fraunhofer(&self) -> f64 {
        let d = self.aperture_diameter();
        if d == 0.0 {
            0.0
        } else {
            2.0 * d * d / self.wavelength
        }
    }
}

/// Builds a uniform linear array: `n_elements` elements spaced `spacing`
/// apart along `axis` (unit vector), symmetric about `center`.
///
/// Element k sits at `center + (k - (n-1)/2) * spacing * axis`, so the
/// centroid equals `center`. The boresight normal is a deterministic
/// perpendicular of `axis` (`axis × ẑ`, or `axis × ŷ` for a z-aligned
/// array); override with [`ArrayGeometry::with_normal`] if it matters.
/// The nominal wavelength defaults to `2 * spacing` (half-wavelength
/// convention); override with [`ArrayGeometry::with_wavelength`].
pub fn build_ula(
    n_elements: usize,
    spacing: f64,
    center: Position,
    axis: Vector3<f64>,
) -> Result<ArrayGeometry> {
    if n_elements == 0 {
        return Err(Error::EmptyArray);
    }
    if !(spacing > 0.0) {
        return Err(Error::NonPositive { name: "spacing", value: spacing });
    }
    let norm = axis.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitVector { name: "axis", norm });
    }
    let half = (n_elements as f64 - 1.0) / 2.0;
    let elements: Vec<Position> = (0..n_elements)
        .map(|k| Position::from_coords(center.coords() + (k as f64 - half) * spacing * axis))
        .collect();
    let mut normal = axis.cross(&Vector3::z());
    if normal.norm() < 1e-6 {
        normal = axis.cross(&Vector3::y());
    }
    normal.normalize_mut();
    ArrayGeometry::new(elements, center, normal, 2.0 * spacing)
}

/// Fraunhofer distance 2D²/λ: the classical far-field validity boundary
/// for an aperture of diameter `aperture_diameter` at wavelength
/// `wavelength`.
pub fn fraunhofer_distance(aperture_diameter: f64, wavelength: f64) -> Result<f64> {
    if !(aperture_diameter > 0.0) {
        return Err(Error::NonPositive { name: "aperture_diameter", value: aperture_diameter });
    }
    if !(wavelength > 0.0) {
        return Err(Error::NonPositive { name: "wavelength", value: wavelength });
    }
    Ok(2.0 * aperture_diameter * aperture_diameter / wavelength)
}

/// Maximum absolute phase deviation (radians) between the exact spherical
/// wavefront from `source` and the plane wave fitted at the array reference
/// center with the true source direction.
///
/// This is the quantity the Fraunhofer criterion bounds by π/8: large
/// values certify that the source is in the near field of the aperture.
pub fn plane_wave_phase_deviation(
    array: &ArrayGeometry,
    source: Position,
    frequency: f64,
) -> Result<f64> {
    if !(frequency > 0.0) {
        return Err(Error::NonPositive { name: "frequency", value: frequency });
    }
    let center = array.reference_center();
    let to_source = source.coords() - center.coords();
    let range = to_source.norm();
    if range < 1e-12 {
        return Err(Error::CoincidentSourceElement { element: usize::MAX });
    }
    let direction = to_source / range;
    let k = 2.0 * std::f64::consts::PI * frequency / SPEED_OF_LIGHT;
    let mut worst = 0.0f64;
    for (m, e) in array.elements().iter().enumerate() {
        let exact = source.distance_to(e);
        if exact < 1e-12 {
            return Err(Error::CoincidentSourceElement { element: m });
        }
        let offset = e.coords() - center.coords();
        let plane = range - offset.dot(&direction);
        worst = worst.max((k * (exact - plane)).abs());
    }
    Ok(worst)
}

/// An axis-aligned 2D evaluation grid (z = 0 plane by scenario convention).
///
/// Grid point (iy, ix) sits at `(x_min + ix*dx, y_min + iy*dy)` with both
/// endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region2D {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
}

impl Region2D {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::InvalidRegion(format!(
                "bounds must satisfy x_max > x_min and y_max > y_min, got x [{x_min}, {x_max}], y [{y_min}, {y_max}]"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidRegion(format!("grid counts must be >= 2, got nx={nx}, ny={ny}")));
        }
        if ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRegion("bounds must be finite".into()));
        }
        Ok(Self { x_min, x_max, y_min, y_max, nx, ny })
    }

    /// Builds a region with approximately square cells of size `cell`.
    pub fn with_cell_size(x_min: f64, x_max: f64, y_min: f64, y_max: f64, cell: f64) -> Result<Self> {
        if !(cell > 0.0) {
            return Err(Error::NonPositive { name: "cell", value: cell });
        }
        let nx = ((x_max - x_min) / cell).round() as usize + 1;
        let ny = ((y_max - y_min) / cell).round() as usize + 1;
        Self::new(x_min, x_max, y_min, y_max, nx.max(2), ny.max(2))
    }

    /// Like [`Region2D::with_cell_size`] but shifts the grid origin by less
    /// than one cell so that `anchor` falls exactly on the lattice, growing
    /// the bounds as needed.
    ///
    /// Focused apertures have elongated focal ridges; when the design point
    /// is not a lattice point, the discrete argmax can drift several cells
    /// along the ridge. Anchoring the lattice makes the design point the
    /// exact grid maximum.
    pub fn with_cell_size_anchored(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        cell: f64,
        anchor: Position,
    ) -> Result<Self> {
        if !(cell > 0.0) {
            return Err(Error::NonPositive { name: "cell", value: cell });
        }
        let x0 = anchor.x - ((anchor.x - x_min) / cell).ceil() * cell;
        let y0 = anchor.y - ((anchor.y - y_min) / cell).ceil() * cell;
        let nx = ((x_max - x0) / cell).ceil() as usize + 1;
        let ny = ((y_max - y0) / cell).ceil() as usize + 1;
        Self::new(x0, x0 + (nx - 1) as f64 * cell, y0, y0 + (ny - 1) as f64 * cell, nx.max(2), ny.max(2))
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    /// Longest cell diagonal; "within one grid cell" tolerances use this.
    pub fn cell_diagonal(&self) -> f64 {
        (self.dx() * self.dx() + self.dy() * self.dy()).sqrt()
    }

    pub fn x_coord(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx()
    }

    pub fn y_coord(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.dy()
    }

    /// Grid point as a position on the z = 0 plane.
    pub fn point(&self, iy: usize, ix: usize) -> Position {
        Position::xy(self.x_coord(ix), self.y_coord(iy))
    }

    pub fn n_points(&self) -> usize {
        self.nx * self.ny
    }
}
