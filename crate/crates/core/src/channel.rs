//! Spherical-wave (near-field) and plane-wave (far-field) steering over an
//! OFDM grid, per-element blockage, path assembly including RIS cascades,
//! and noisy observation synthesis.
//!
//! Sign convention shared by every module: a propagation delay tau enters
//! the response as `exp(-j 2 pi f tau)`. Steering vectors embed the
//! absolute source-to-element distance phase rather than center-referenced
//! differences, so carrier-phase information stays observable.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::geometry::{ArrayGeometry, Position, SPEED_OF_LIGHT};
use crate::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

/// Per-element steering amplitude law.
///
/// `Unit` reads the array as a pure phase aperture (array-factor studies);
/// `FreeSpace` applies the physical lambda/(4 pi d) spreading loss needed
/// for SNR-faithful bounds and estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeModel {
    Unit,
    FreeSpace,
}

/// Carrier, bandwidth and subcarrier layout of an OFDM pilot comb.
///
/// For `n >= 2` subcarriers the comb spans `[fc - B/2, fc + B/2]` with both
/// edges occupied; a single-subcarrier grid is the narrowband case and
/// requires zero bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmGrid {
    fc: f64,
    bandwidth: f64,
    n_subcarriers: usize,
}

impl OfdmGrid {
    pub fn new(fc: f64, bandwidth: f64, n_subcarriers: usize) -> Result<Self> {
        if !(fc > 0.0) || !fc.is_finite() {
            return Err(Error::NonPositive { name: "fc", value: fc });
        }
        if !(bandwidth >= 0.0) || !bandwidth.is_finite() {
            return Err(Error::NonFinite { name: "bandwidth" });
        }
        if fc <= bandwidth / 2.0 {
            return Err(Error::InvalidRegion(format!(
                "carrier {fc} Hz must exceed half the bandwidth {bandwidth} Hz"
            )));
        }
        if n_subcarriers == 0 {
            return Err(Error::EmptyInput("n_subcarriers"));
        }
        if n_subcarriers == 1 && bandwidth != 0.0 {
            return Err(Error::InvalidRegion(
                "single-subcarrier grid requires zero bandwidth".into(),
            ));
        }
        if n_subcarriers >= 2 && bandwidth == 0.0 {
            return Err(Error::NonPositive { name: "bandwidth", value: bandwidth });
        }
        Ok(Self { fc, bandwidth, n_subcarriers })
    }

    /// Single-subcarrier (narrowband) grid at the carrier.
    pub fn narrowband(fc: f64) -> Result<Self> {
        Self::new(fc, 0.0, 1)
    }

    pub fn fc(&self) -> f64 {
        self.fc
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    /// Frequency of subcarrier `n` (0-based, ascending).
    pub fn frequency(&self, n: usize) -> f64 {
        debug_assert!(n < self.n_subcarriers);
        if self.n_subcarriers == 1 {
            self.fc
        } else {
            let nn = self.n_subcarriers as f64;
            self.fc + (n as f64 - (nn - 1.0) / 2.0) * self.bandwidth / (nn - 1.0)
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_subcarriers).map(|n| self.frequency(n)).collect()
    }

    pub fn f_min(&self) -> f64 {
        self.frequency(0)
    }

    pub fn f_max(&self) -> f64 {
        self.frequency(self.n_subcarriers - 1)
    }
}

/// Per-element amplitude factor in [0, 1]: 1 = fully visible, 0 = blocked.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockageMask {
    factors: Vec<f64>,
}

impl BlockageMask {
    /// All-ones mask (nothing blocked).
    pub fn transparent(n: usize) -> Self {
        Self { factors: vec![1.0; n] }
    }

    pub fn from_factors(factors: Vec<f64>) -> Result<Self> {
        for (index, &value) in factors.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(Error::MaskValueOutOfRange { index, value });
            }
        }
        Ok(Self { factors })
    }

    /// Mask of length `n` with elements in `[start, end)` fully blocked.
    pub fn block_contiguous(n: usize, start: usize, end: usize) -> Result<Self> {
        if start > end || end > n {
            return Err(Error::InvalidRegion(format!(
                "blocked range [{start}, {end}) out of bounds for {n} elements"
            )));
        }
        let mut factors = vec![1.0; n];
        factors[start..end].fill(0.0);
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Sum of the amplitude factors (= visible element count for a binary mask).
    pub fn visible_sum(&self) -> f64 {
        self.factors.iter().sum()
    }
}

/// Geometric nature of one propagation path.
#[derive(Debug, Clone)]
pub enum PathKind {
    /// Direct line of sight from the source.
    Los,
    /// Single-bounce reflection off a point scatterer at `source`.
    Scatterer,
    /// Source -> RIS -> receiver cascade; the RIS applies `profile`
    /// element-wise and `ris_mask` models blocked RIS elements. Free-space
    /// amplitudes are mandatory on both cascade legs.
    RisCascaded {
        ris: ArrayGeometry,
        profile: Vec<Complex64>,
        ris_mask: BlockageMask,
    },
}

/// One geometric path arriving at the receiving array.
///
/// `mask` is the receive-side per-element visibility of this path; spatial
/// non-stationarity is modeled by giving different paths different masks.
#[derive(Debug, Clone)]
pub struct PropagationPath {
    pub source: Position,
    pub complex_gain: Complex64,
    pub mask: BlockageMask,
    pub kind: PathKind,
}

impl PropagationPath {
    pub fn los(source: Position, complex_gain: Complex64, mask: BlockageMask) -> Self {
        Self { source, complex_gain, mask, kind: PathKind::Los }
    }

    pub fn scatterer(source: Position, complex_gain: Complex64, mask: BlockageMask) -> Self {
        Self { source, complex_gain, mask, kind: PathKind::Scatterer }
    }

    pub fn ris_cascaded(
        tx: Position,
        complex_gain: Complex64,
        mask: BlockageMask,
        ris: ArrayGeometry,
        profile: Vec<Complex64>,
        ris_mask: BlockageMask,
    ) -> Result<Self> {
        if profile.len() != ris.len() {
            return Err(Error::DimensionMismatch { expected: ris.len(), actual: profile.len() });
        }
        if ris_mask.len() != ris.len() {
            return Err(Error::DimensionMismatch { expected: ris.len(), actual: ris_mask.len() });
        }
        Ok(Self {
            source: tx,
            complex_gain,
            mask,
            kind: PathKind::RisCascaded { ris, profile, ris_mask },
        })
    }
}

/// Complex channel response indexed (element, subcarrier).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    values: Array2<Complex64>,
}

impl ChannelTensor {
    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn n_elements(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.values.ncols()
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }
}

fn checked_distance(a: &Position, b: &Position, element: usize) -> Result<f64> {
    let d = a.distance_to(b);
    if d < 1e-12 {
        return Err(Error::CoincidentSourceElement { element });
    }
    Ok(d)
}

/// Free-space amplitude lambda/(4 pi d) at frequency `f` and distance `d`.
#[inline]
fn free_space_amplitude(frequency: f64, distance: f64) -> f64 {
    SPEED_OF_LIGHT / frequency / (4.0 * std::f64::consts::PI * distance)
}

/// Exact spherical-wave steering vector of `array` towards `source` at
/// `frequency`.
///
/// Element m carries phase `-2 pi f d_m / c` with `d_m` the exact
/// element-to-source distance, and amplitude 1 (`Unit`) or
/// `lambda / (4 pi d_m)` (`FreeSpace`).
pub fn nf_steering(
    array: &ArrayGeometry,
    source: Position,
    frequency: f64,
    amplitude_model: AmplitudeModel,
) -> Result<Vec<Complex64>> {
    if !(frequency > 0.0) {
        return Err(Error::NonPositive { name: "frequency", value: frequency });
    }
    let k = TAU * frequency / SPEED_OF_LIGHT;
    array
        .elements()
        .iter()
        .enumerate()
        .map(|(m, e)| {
            let d = checked_distance(&source, e, m)?;
            let amp = match amplitude_model {
                AmplitudeModel::Unit => 1.0,
                AmplitudeModel::FreeSpace => free_space_amplitude(frequency, d),
            };
            Ok(Complex64::from_polar(amp, -k * d))
        })
        .collect()
}

/// Plane-wave (far-field) steering vector for a source in `direction`
/// (unit vector pointing from the array toward the source).
///
/// Element m carries phase `+2 pi f <e_m - center, direction> / c` and unit
/// amplitude; this is the limit of [`nf_steering`] after removing the
/// common center-range phase.
pub fn ff_steering(
    array: &ArrayGeometry,
    direction: nalgebra::Vector3<f64>,
    frequency: f64,
) -> Result<Vec<Complex64>> {
    let norm = direction.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitVector { name: "direction", norm });
    }
    if !(frequency > 0.0) {
        return Err(Error::NonPositive { name: "frequency", value: frequency });
    }
    let k = TAU * frequency / SPEED_OF_LIGHT;
    let center = array.reference_center().coords();
    Ok(array
        .elements()
        .iter()
        .map(|e| Complex64::from_polar(1.0, k * (e.coords() - center).dot(&direction)))
        .collect())
}

/// Element-wise product of a steering vector with a blockage mask.
pub fn apply_mask(vector: &[Complex64], mask: &BlockageMask) -> Result<Vec<Complex64>> {
    if vector.len() != mask.len() {
        return Err(Error::DimensionMismatch { expected: vector.len(), actual: mask.len() });
    }
    Ok(vector.iter().zip(mask.factors()).map(|(v, &f)| v * f).collect())
}

/// Scalar response of a source -> RIS -> receiver cascade at `frequency`:
/// sum over RIS elements of `mask_m * profile_m * a_m(tx) * a_m(rx)` with
/// `a_m` the free-space spherical-wave response of RIS element m.
pub fn ris_cascaded_path(
    tx: Position,
    ris: &ArrayGeometry,
    ris_profile: &[Complex64],
    rx: Position,
    frequency: f64,
    mask: &BlockageMask,
) -> Result<Complex64> {
    if ris_profile.len() != ris.len() {
        return Err(Error::DimensionMismatch { expected: ris.len(), actual: ris_profile.len() });
    }
    if mask.len() != ris.len() {
        return Err(Error::DimensionMismatch { expected: ris.len(), actual: mask.len() });
    }
    if !(frequency > 0.0) {
        return Err(Error::NonPositive { name: "frequency", value: frequency });
    }
    let k = TAU * frequency / SPEED_OF_LIGHT;
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, e) in ris.elements().iter().enumerate() {
        let d_tx = checked_distance(&tx, e, m)?;
        let d_rx = checked_distance(&rx, e, m)?;
        let amp = free_space_amplitude(frequency, d_tx) * free_space_amplitude(frequency, d_rx);
        acc += mask.factors()[m]
            * ris_profile[m]
            * Complex64::from_polar(amp, -k * (d_tx + d_rx));
    }
    Ok(acc)
}

/// Sums the per-element responses of all paths into a channel tensor over
/// the receiving `array` and OFDM `grid`.
///
/// Entry (m, n) = sum over paths of
/// `gain * mask_m * response_m(source, f_n)`, with the response given by
/// [`nf_steering`] for LOS/scatterer paths (under `amplitude_model`) and by
/// the per-receive-element [`ris_cascaded_path`] for cascaded paths (always
/// free-space). Steering already embeds the absolute distance phase, so no
/// extra reference-delay factor is applied.
pub fn assemble_channel(
    paths: &[PropagationPath],
    array: &ArrayGeometry,
    grid: &OfdmGrid,
    amplitude_model: AmplitudeModel,
) -> Result<ChannelTensor> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("paths"));
    }
    for p in paths {
        if p.mask.len() != array.len() {
            return Err(Error::DimensionMismatch { expected: array.len(), actual: p.mask.len() });
        }
        if !p.complex_gain.re.is_finite() || !p.complex_gain.im.is_finite() {
            return Err(Error::NonFinite { name: "complex_gain" });
        }
    }
    let n_el = array.len();
    let n_sc = grid.n_subcarriers();
    let freqs = grid.frequencies();

    // One column of the tensor per subcarrier; columns are independent.
    let columns: Result<Vec<Vec<Complex64>>> = freqs
        .par_iter()
        .map(|&f| {
            let mut col = vec![Complex64::new(0.0, 0.0); n_el];
            for p in paths {
                match &p.kind {
                    PathKind::Los | PathKind::Scatterer => {
                        let steer = nf_steering(array, p.source, f, amplitude_model)?;
                        for (m, s) in steer.iter().enumerate() {
                            col[m] += p.complex_gain * p.mask.factors()[m] * s;
                        }
                    }
                    PathKind::RisCascaded { ris, profile, ris_mask } => {
                        for (m, e) in array.elements().iter().enumerate() {
                            let casc = ris_cascaded_path(p.source, ris, profile, *e, f, ris_mask)?;
                            col[m] += p.complex_gain * p.mask.factors()[m] * casc;
                        }
                    }
                }
            }
            Ok(col)
        })
        .collect();
    let columns = columns?;

    let mut values = Array2::zeros((n_el, n_sc));
    for (n, col) in columns.into_iter().enumerate() {
        for (m, v) in col.into_iter().enumerate() {
            values[(m, n)] = v;
        }
    }
    Ok(ChannelTensor { values })
}

/// Applies a per-subcarrier pilot to the channel and adds circularly
/// symmetric complex Gaussian noise with per-component standard deviation
/// `noise_std / sqrt(2)`. Deterministic for a given `seed`.
pub fn synth_observation(
    channel: &ChannelTensor,
    pilot: &[Complex64],
    noise_std: f64,
    seed: u64,
) -> Result<Array2<Complex64>> {
    if pilot.len() != channel.n_subcarriers() {
        return Err(Error::DimensionMismatch {
            expected: channel.n_subcarriers(),
            actual: pilot.len(),
        });
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::NonFinite { name: "noise_std" });
    }
    let mut y = channel.values.clone();
    for ((_, n), v) in y.indexed_iter_mut() {
        *v *= pilot[n];
    }
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std / std::f64::consts::SQRT_2)
            .expect("noise_std validated above");
        // Fixed row-major draw order keeps outputs reproducible.
        for v in y.iter_mut() {
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            *v += Complex64::new(re, im);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_ula;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn lam(f: f64) -> f64 {
        SPEED_OF_LIGHT / f
    }

    #[test]
    fn ofdm_grid_layout() {
        let g = OfdmGrid::new(30e9, 4e9, 3).unwrap();
        assert_relative_eq!(g.frequency(0), 28e9, max_relative = 1e-12);
        assert_relative_eq!(g.frequency(1), 30e9, max_relative = 1e-12);
        assert_relative_eq!(g.frequency(2), 32e9, max_relative = 1e-12);
        assert_relative_eq!(g.f_min(), g.fc() - g.bandwidth() / 2.0, max_relative = 1e-12);
        assert_relative_eq!(g.f_max(), g.fc() + g.bandwidth() / 2.0, max_relative = 1e-12);

        let nb = OfdmGrid::narrowband(3.5e9).unwrap();
        assert_eq!(nb.n_subcarriers(), 1);
        assert_eq!(nb.frequency(0), 3.5e9);

        assert!(OfdmGrid::new(1e9, 3e9, 4).is_err()); // fc <= B/2
        assert!(OfdmGrid::new(1e9, 1e6, 1).is_err()); // N=1 with bandwidth
        assert!(OfdmGrid::new(1e9, 0.0, 4).is_err()); // N>=2 w/o bandwidth
        assert!(OfdmGrid::new(1e9, 1e6, 0).is_err());
    }

    #[test]
    fn ofdm_frequencies_strictly_increasing() {
        let g = OfdmGrid::new(3.5e9, 100e6, 64).unwrap();
        let f = g.frequencies();
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(f.len(), 64);
    }

    #[test]
    fn mask_validation() {
        assert!(BlockageMask::from_factors(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(BlockageMask::from_factors(vec![1.1]).is_err());
        assert!(BlockageMask::from_factors(vec![-0.1]).is_err());
        let m = BlockageMask::block_contiguous(512, 128, 384).unwrap();
        assert_relative_eq!(m.visible_sum(), 256.0);
    }

    #[test]
    fn nf_steering_full_wavelength_phase() {
        // Single element at the origin, f = c Hz so lambda = 1 m, source at
        // 1 m: the phase winds one full turn, the value is back at 1.
        let a = build_ula(1, 0.01, Position::ORIGIN, Vector3::y()).unwrap();
        let v = nf_steering(&a, Position::xy(1.0, 0.0), SPEED_OF_LIGHT, AmplitudeModel::Unit)
            .unwrap();
        assert_relative_eq!(v[0].re, 1.0, epsilon = 1e-9);
        assert_relative_eq!(v[0].im, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn nf_steering_boresight_symmetry() {
        let f = 30e9;
        let a = build_ula(2, lam(f) / 2.0, Position::ORIGIN, Vector3::y()).unwrap();
        for r in [0.05, 1.0, 42.0] {
            let v = nf_steering(&a, Position::xy(r, 0.0), f, AmplitudeModel::Unit).unwrap();
            assert_relative_eq!((v[0] - v[1]).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn nf_steering_matches_brute_force_phases() {
        let f = 30e9;
        let spacing = lam(f) / 2.0;
        let n = 256usize;
        let a = build_ula(n, spacing, Position::ORIGIN, Vector3::y()).unwrap();
        let q = Position::xy(2.898, -0.777);
        let v = nf_steering(&a, q, f, AmplitudeModel::Unit).unwrap();
        for (m, entry) in v.iter().enumerate() {
            // Element-by-element oracle with an independent distance formula.
            let ey = (m as f64 - (n as f64 - 1.0) / 2.0) * spacing;
            let d = f64::hypot(q.x, q.y - ey);
            let oracle = Complex64::from_polar(1.0, -TAU * f * d / SPEED_OF_LIGHT);
            let phase_err = (entry * oracle.conj()).arg().abs();
            assert!(phase_err < 1e-9, "element {m}: phase error {phase_err}");
        }
    }

    #[test]
    fn nf_steering_rejects_coincident_source() {
        let a = build_ula(4, 0.01, Position::ORIGIN, Vector3::y()).unwrap();
        let on_elem = a.elements()[2];
        assert!(nf_steering(&a, on_elem, 30e9, AmplitudeModel::Unit).is_err());
    }

    #[test]
    fn nf_steering_free_space_amplitude() {
        let f = 30e9;
        let a = build_ula(1, 0.01, Position::ORIGIN, Vector3::y()).unwrap();
        let v = nf_steering(&a, Position::xy(2.0, 0.0), f, AmplitudeModel::FreeSpace).unwrap();
        assert_relative_eq!(v[0].norm(), lam(f) / (4.0 * std::f64::consts::PI * 2.0), max_relative = 1e-12);
    }

    #[test]
    fn ff_steering_broadside_all_ones() {
        let f = 30e9;
        let a = build_ula(16, lam(f) / 2.0, Position::ORIGIN, Vector3::y()).unwrap();
        let v = ff_steering(&a, Vector3::x(), f).unwrap();
        for e in v {
            assert_relative_eq!(e.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(e.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ff_steering_endfire_half_wavelength() {
        let f = 30e9;
        let a = build_ula(2, lam(f) / 2.0, Position::ORIGIN, Vector3::y()).unwrap();
        let v = ff_steering(&a, Vector3::y(), f).unwrap();
        let dphi = (v[1] * v[0].conj()).arg();
        assert_relative_eq!(dphi.abs(), std::f64::consts::PI, epsilon = 1e-9);
        assert!(ff_steering(&a, Vector3::new(0.0, 0.5, 0.0), f).is_err());
    }

    #[test]
    fn nf_converges_to_ff_beyond_fraunhofer() {
        let f = 30e9;
        let a = build_ula(64, lam(f) / 2.0, Position::ORIGIN, Vector3::y()).unwrap();
        let rf = a.fraunhofer();
        let dir = Vector3::new(0.6, 0.8, 0.0);

        // At 1e4 x Fraunhofer the NF response matches the plane-wave one to
        // better than 1e-3 rad after common-phase removal.
        let src = Position::from_coords(dir * (1e4 * rf));
        let nf = nf_steering(&a, src, f, AmplitudeModel::Unit).unwrap();
        let ff = ff_steering(&a, dir, f).unwrap();
        let worst = nf
            .iter()
            .zip(&ff)
            .map(|(n, p)| {
                let center_phase = Complex64::from_polar(1.0, -TAU * f * (1e4 * rf) / SPEED_OF_LIGHT);
                ((n * (center_phase * p).conj()).arg()).abs()
            })
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-3, "max phase deviation {worst}");

        // At 100 x Fraunhofer the deviation stays below pi/80.
        let src = Position::from_coords(dir * (100.0 * rf));
        let nf = nf_steering(&a, src, f, AmplitudeModel::Unit).unwrap();
        let worst = nf
            .iter()
            .zip(&ff)
            .map(|(n, p)| {
                let center_phase =
                    Complex64::from_polar(1.0, -TAU * f * (100.0 * rf) / SPEED_OF_LIGHT);
                ((n * (center_phase * p).conj()).arg()).abs()
            })
            .fold(0.0f64, f64::max);
        assert!(worst < std::f64::consts::PI / 80.0, "max phase deviation {worst}");
    }

    #[test]
    fn apply_mask_behaviour() {
        let v = vec![Complex64::new(1.0, 0.0); 512];
        let ones = BlockageMask::transparent(512);
        assert_eq!(apply_mask(&v, &ones).unwrap(), v);

        let zeros = BlockageMask::from_factors(vec![0.0; 512]).unwrap();
        assert!(apply_mask(&v, &zeros).unwrap().iter().all(|e| e.norm() == 0.0));

        // Fig-2(c)-style mask: middle 256 of 512 blocked halves the energy.
        let mid = BlockageMask::block_contiguous(512, 128, 384).unwrap();
        let masked = apply_mask(&v, &mid).unwrap();
        let energy: f64 = masked.iter().map(|e| e.norm_sqr()).sum();
        assert_relative_eq!(energy, 256.0, max_relative = 1e-12);

        let short = BlockageMask::transparent(3);
        assert!(apply_mask(&v, &short).is_err());
    }

    #[test]
    fn assemble_single_los_path_equals_steering() {
        let f = 30e9;
        let a = build_ula(8, lam(f) / 2.0, Position::ORIGIN, Vector3::y()).unwrap();
        let grid = OfdmGrid::narrowband(f).unwrap();
        let src = Position::xy(3.0, 1.0);
        let path = PropagationPath::los(src, Complex64::new(1.0, 0.0), BlockageMask::transparent(8));
        let t = assemble_channel(&[path], &a, &grid, AmplitudeModel::Unit).unwrap();
        let steer = nf_steering(&a, src, f, AmplitudeModel::Unit).unwrap();
        for m in 0..8 {
            assert_relative_eq!((t.values()[(m, 0)] - steer[m]).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn assemble_opposite_gains_cancel() {
        let f = 28e9;
        let a = build_ula(16, lam(f) / 2.0, Position::ORIGIN, Vector3::y()).unwrap();
        let grid = OfdmGrid::new(f, 100e6, 5).unwrap();
        let src = Position::xy(2.0, -1.0);
        let g = Complex64::new(0.3, -1.2);
        let mask = BlockageMask::transparent(16);
        let p1 = PropagationPath::los(src, g, mask.clone());
        let p2 = PropagationPath::los(src, -g, mask);
        let t = assemble_channel(&[p1, p2], &a, &grid, AmplitudeModel::FreeSpace).unwrap();
        assert!(t.values().iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn assemble_ris_path_matches_cascade_composition() {
        // Single-antenna receiver behind a blocked LOS: the tensor entry must
        // equal the scalar cascade response at every subcarrier.
        let f = 28e9;
        let ris = build_ula(64, lam(f) / 2.0, Position::ORIGIN, Vector3::x()).unwrap();
        let bs = Position::xy(-3.0, 2.0);
        let ue = Position::xy(1.0, 4.0);
        let rx = build_ula(1, 0.01, ue, Vector3::x()).unwrap();
        let grid = OfdmGrid::new(f, 250e6, 4).unwrap();
        let profile: Vec<Complex64> = (0..64)
            .map(|m| Complex64::from_polar(1.0, 0.37 * m as f64))
            .collect();
        let ris_mask = BlockageMask::block_contiguous(64, 0, 10).unwrap();
        let gain = Complex64::new(0.8, 0.1);
        let path = PropagationPath::ris_cascaded(
            bs,
            gain,
            BlockageMask::transparent(1),
            ris.clone(),
            profile.clone(),
            ris_mask.clone(),
        )
        .unwrap();
        let t = assemble_channel(&[path], &rx, &grid, AmplitudeModel::FreeSpace).unwrap();
        for (n, &fr) in grid.frequencies().iter().enumerate() {
            let oracle = gain * ris_cascaded_path(bs, &ris, &profile, ue, fr, &ris_mask).unwrap();
            assert_relative_eq!((t.values()[(0, n)] - oracle).norm(), 0.0, epsilon = 1e-18);
        }
    }

    #[test]
    fn ris_cascade_single_element_is_product() {
        let f = 28e9;
        let ris = build_ula(1, 0.01, Position::ORIGIN, Vector3::x()).unwrap();
        let tx = Position::xy(-2.0, 1.0);
        let rx = Position::xy(3.0, 2.0);
        let out = ris_cascaded_path(
            tx,
            &ris,
            &[Complex64::new(1.0, 0.0)],
            rx,
            f,
            &BlockageMask::transparent(1),
        )
        .unwrap();
        let a_tx = nf_steering(&ris, tx, f, AmplitudeModel::FreeSpace).unwrap()[0];
        let a_rx = nf_steering(&ris, rx, f, AmplitudeModel::FreeSpace).unwrap()[0];
        assert!((out - a_tx * a_rx).norm() <= 1e-9 * out.norm());
    }

    fn cascade_fixture() -> (ArrayGeometry, Position, Position, f64) {
        let f = 28e9;
        let ris = build_ula(128, lam(f) / 2.0, Position::ORIGIN, Vector3::x()).unwrap();
        (ris, Position::xy(-3.0, 2.0), Position::xy(1.5, 4.0), f)
    }

    /// Conjugate-phase profile: cancels the cascade phase per element.
    fn conjugate_profile(
        ris: &ArrayGeometry,
        tx: Position,
        rx: Position,
        f: f64,
    ) -> Vec<Complex64> {
        let a_tx = nf_steering(ris, tx, f, AmplitudeModel::Unit).unwrap();
        let a_rx = nf_steering(ris, rx, f, AmplitudeModel::Unit).unwrap();
        a_tx.iter().zip(&a_rx).map(|(t, r)| (t * r).conj()).collect()
    }

    #[test]
    fn ris_conjugate_profile_attains_coherent_maximum() {
        let (ris, tx, rx, f) = cascade_fixture();
        let mask = BlockageMask::transparent(ris.len());
        let profile = conjugate_profile(&ris, tx, rx, f);
        let out = ris_cascaded_path(tx, &ris, &profile, rx, f, &mask).unwrap();

        // Triangle-inequality attainment oracle: |sum| = sum of amplitudes.
        let mut amp_sum = 0.0;
        for e in ris.elements() {
            let d1 = tx.distance_to(e);
            let d2 = rx.distance_to(e);
            amp_sum += free_space_amplitude(f, d1) * free_space_amplitude(f, d2);
        }
        assert_relative_eq!(out.norm(), amp_sum, max_relative = 1e-12);
    }

    #[test]
    fn ris_conjugate_profile_upper_bounds_random_profiles() {
        let (ris, tx, rx, f) = cascade_fixture();
        let mask = BlockageMask::transparent(ris.len());
        let best = ris_cascaded_path(tx, &ris, &conjugate_profile(&ris, tx, rx, f), rx, f, &mask)
            .unwrap()
            .norm();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let uni = rand::distributions::Uniform::new(0.0, TAU);
        for _ in 0..50 {
            let profile: Vec<Complex64> = (0..ris.len())
                .map(|_| Complex64::from_polar(1.0, uni.sample(&mut rng)))
                .collect();
            let v = ris_cascaded_path(tx, &ris, &profile, rx, f, &mask).unwrap().norm();
            assert!(v <= best * (1.0 + 1e-12), "random profile beat conjugate: {v} > {best}");
        }
    }

    #[test]
    fn ris_half_masked_below_unmasked_maximum() {
        let (ris, tx, rx, f) = cascade_fixture();
        let profile = conjugate_profile(&ris, tx, rx, f);
        let full = BlockageMask::transparent(ris.len());
        let half = BlockageMask::block_contiguous(ris.len(), 0, ris.len() / 2).unwrap();
        let v_full = ris_cascaded_path(tx, &ris, &profile, rx, f, &full).unwrap().norm();
        let v_half = ris_cascaded_path(tx, &ris, &profile, rx, f, &half).unwrap().norm();
        assert!(v_half < v_full, "masked {v_half} not below unmasked {v_full}");
    }

    #[test]
    fn synth_noiseless_equals_product() {
        let f = 30e9;
        let a = build_ula(4, lam(f) / 2.0, Position::ORIGIN, Vector3::y()).unwrap();
        let grid = OfdmGrid::new(f, 1e9, 3).unwrap();
        let path =
            PropagationPath::los(Position::xy(2.0, 0.5), Complex64::new(1.0, 0.0), BlockageMask::transparent(4));
        let t = assemble_channel(&[path], &a, &grid, AmplitudeModel::Unit).unwrap();
        let pilot = vec![Complex64::new(2.0, -1.0); 3];
        let y = synth_observation(&t, &pilot, 0.0, 1).unwrap();
        for ((m, n), v) in y.indexed_iter() {
            assert_relative_eq!((v - t.values()[(m, n)] * pilot[n]).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn synth_noise_variance_and_mean() {
        // Monte-Carlo oracle on a zero channel: |y|^2 averages to
        // noise_std^2 within 5% over 1e5 draws, and the mean is near zero.
        let t = ChannelTensor { values: Array2::zeros((100, 1000)) };
        let pilot = vec![Complex64::new(1.0, 0.0); 1000];
        let y = synth_observation(&t, &pilot, 1.0, 99).unwrap();
        let k = y.len() as f64;
        let var = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / k;
        assert!((var - 1.0).abs() < 0.05, "sample variance {var}");
        let mean = y.iter().sum::<Complex64>() / k;
        assert!(mean.norm() < 3.0 / k.sqrt(), "sample mean {}", mean.norm());
    }

    #[test]
    fn synth_is_seed_deterministic() {
        let t = ChannelTensor { values: Array2::from_elem((3, 5), Complex64::new(0.4, -0.2)) };
        let pilot = vec![Complex64::new(1.0, 1.0); 5];
        let y1 = synth_observation(&t, &pilot, 0.5, 1234).unwrap();
        let y2 = synth_observation(&t, &pilot, 0.5, 1234).unwrap();
        assert_eq!(y1, y2);
        let y3 = synth_observation(&t, &pilot, 0.5, 1235).unwrap();
        assert_ne!(y1, y3);
    }

    proptest! {
        #[test]
        fn nf_steering_unit_modulus(x in 0.5f64..20.0, y in -10.0f64..10.0, n in 1usize..65) {
            let f = 30e9;
            let a = build_ula(n, lam(f) / 2.0, Position::ORIGIN, Vector3::y()).unwrap();
            let v = nf_steering(&a, Position::xy(x, y), f, AmplitudeModel::Unit).unwrap();
            for e in v {
                prop_assert!((e.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn assemble_linear_in_gain(re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let f = 30e9;
            let a = build_ula(6, lam(f) / 2.0, Position::ORIGIN, Vector3::y()).unwrap();
            let grid = OfdmGrid::new(f, 400e6, 3).unwrap();
            let mask = BlockageMask::transparent(6);
            let src = Position::xy(1.5, 0.3);
            let unit = PropagationPath::los(src, Complex64::new(1.0, 0.0), mask.clone());
            let alpha = Complex64::new(re, im);
            let scaled = PropagationPath::los(src, alpha, mask);
            let t1 = assemble_channel(&[unit], &a, &grid, AmplitudeModel::Unit).unwrap();
            let t2 = assemble_channel(&[scaled], &a, &grid, AmplitudeModel::Unit).unwrap();
            for (v1, v2) in t1.values().iter().zip(t2.values().iter()) {
                prop_assert!((v1 * alpha - v2).norm() < 1e-12);
            }
        }
    }
}
