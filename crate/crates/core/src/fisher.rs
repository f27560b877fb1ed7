//! Fisher information and position error bounds for uplink localization of
//! a single-antenna UE by distributed base stations.
//!
//! Two processing modes share one observation model and differ only in the
//! nuisance parametrization:
//!
//! - `Noncoherent`: each BS carries its own unknown complex gain (clock
//!   phase and amplitude), so only per-BS geometry (angles, and delay
//!   spread when wideband) informs position.
//! - `Coherent`: the BSs are phase synchronized and share a single unknown
//!   complex gain; inter-BS carrier phase becomes observable and the
//!   deployment acts as one sparse aperture.
//!
//! Per-BS responses carry a 1/sqrt(M) combining normalization so the total
//! collected energy is independent of the per-BS element count M; bound
//! ratios across M then reflect aperture geometry rather than raw element
//! count, and the coherent bound is M-invariant at fixed total energy.

use nalgebra::{DMatrix, DVector, Matrix2, Vector3};
use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::channel::OfdmGrid;
use crate::geometry::{build_ula, ArrayGeometry, Position, SPEED_OF_LIGHT};
use crate::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

/// Nuisance-gain structure of the receiver network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessingMode {
    /// One unknown complex gain shared by all BSs (phase-synchronized).
    Coherent,
    /// One unknown complex gain per BS.
    Noncoherent,
}

/// Parameter layout of [`FisherBlock`] matrices: UE position (x, y) first,
/// then real/imaginary gain pairs — one pair in coherent mode, one pair per
/// BS in noncoherent mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamOrdering {
    pub mode: ProcessingMode,
    pub n_bs: usize,
}

impl ParamOrdering {
    pub fn n_params(&self) -> usize {
        2 + match self.mode {
            ProcessingMode::Coherent => 2,
            ProcessingMode::Noncoherent => 2 * self.n_bs,
        }
    }

    /// Column indices of the (re, im) pair for BS `b`'s gain.
    pub fn gain_cols(&self, b: usize) -> (usize, usize) {
        match self.mode {
            ProcessingMode::Coherent => (2, 3),
            ProcessingMode::Noncoherent => (2 + 2 * b, 3 + 2 * b),
        }
    }
}

/// Uplink D-MIMO snapshot: BS apertures, carrier, UE position, true gains.
///
/// LOS-only observation model with free-space amplitudes; the UE height is
/// known, so the position parameters are (x, y).
#[derive(Debug, Clone)]
pub struct DmimoScenario {
    bs_arrays: Vec<ArrayGeometry>,
    fc: f64,
    ue: Position,
    mode: ProcessingMode,
    gains: Vec<Complex64>,
}

impl DmimoScenario {
    pub fn new(
        bs_arrays: Vec<ArrayGeometry>,
        fc: f64,
        ue: Position,
        mode: ProcessingMode,
        gains: Vec<Complex64>,
    ) -> Result<Self> {
        if bs_arrays.is_empty() {
            return Err(Error::EmptyInput("bs_arrays"));
        }
        if gains.len() != bs_arrays.len() {
            return Err(Error::DimensionMismatch { expected: bs_arrays.len(), actual: gains.len() });
        }
        if !(fc > 0.0) {
            return Err(Error::NonPositive { name: "fc", value: fc });
        }
        if !ue.is_finite() {
            return Err(Error::NonFinite { name: "ue position" });
        }
        for a in &bs_arrays {
            for (m, e) in a.elements().iter().enumerate() {
                if ue.distance_to(e) < 1e-9 {
                    return Err(Error::CoincidentSourceElement { element: m });
                }
            }
        }
        Ok(Self { bs_arrays, fc, ue, mode, gains })
    }

    /// Coherent scenario: one global complex gain.
    pub fn coherent(
        bs_arrays: Vec<ArrayGeometry>,
        fc: f64,
        ue: Position,
        gain: Complex64,
    ) -> Result<Self> {
        let n = bs_arrays.len();
        Self::new(bs_arrays, fc, ue, ProcessingMode::Coherent, vec![gain; n])
    }

    /// Noncoherent scenario: independent per-BS complex gains.
    pub fn noncoherent(
        bs_arrays: Vec<ArrayGeometry>,
        fc: f64,
        ue: Position,
        gains: Vec<Complex64>,
    ) -> Result<Self> {
        Self::new(bs_arrays, fc, ue, ProcessingMode::Noncoherent, gains)
    }

    pub fn bs_arrays(&self) -> &[ArrayGeometry] {
        &self.bs_arrays
    }

    pub fn n_bs(&self) -> usize {
        self.bs_arrays.len()
    }

    pub fn fc(&self) -> f64 {
        self.fc
    }

    pub fn ue(&self) -> Position {
        self.ue
    }

    pub fn mode(&self) -> ProcessingMode {
        self.mode
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn ordering(&self) -> ParamOrdering {
        ParamOrdering { mode: self.mode, n_bs: self.n_bs() }
    }

    pub fn with_ue(&self, ue: Position) -> Result<Self> {
        Self::new(self.bs_arrays.clone(), self.fc, ue, self.mode, self.gains.clone())
    }

    pub fn with_gains(&self, gains: Vec<Complex64>) -> Result<Self> {
        Self::new(self.bs_arrays.clone(), self.fc, self.ue, self.mode, gains)
    }

    pub fn with_mode(&self, mode: ProcessingMode) -> Result<Self> {
        Self::new(self.bs_arrays.clone(), self.fc, self.ue, mode, self.gains.clone())
    }

    /// Total observation entries: sum over BSs of M_b * N.
    pub fn n_observations(&self, grid: &OfdmGrid) -> usize {
        self.bs_arrays.iter().map(|a| a.len() * grid.n_subcarriers()).sum()
    }
}

/// M-element half-wavelength ULAs at the four corners of a `side x side`
/// square deployment at height `bs_height`, each oriented broadside toward
/// the area center (axis perpendicular to the center direction, horizontal).
pub fn corner_bs_arrays(
    side: f64,
    bs_height: f64,
    m_elements: usize,
    fc: f64,
) -> Result<Vec<ArrayGeometry>> {
    let spacing = SPEED_OF_LIGHT / fc / 2.0;
    let half = side / 2.0;
    [(0.0, 0.0), (side, 0.0), (side, side), (0.0, side)]
        .iter()
        .map(|&(x, y)| {
            let ux = half - x;
            let uy = half - y;
            let n = f64::hypot(ux, uy);
            let axis = Vector3::new(-uy / n, ux / n, 0.0);
            build_ula(m_elements, spacing, Position::new(x, y, bs_height), axis)
        })
        .collect()
}

/// Flat pilot spectrum with `total_energy` split evenly across subcarriers.
pub fn flat_pilot(n_subcarriers: usize, total_energy: f64) -> Vec<Complex64> {
    let amp = (total_energy / n_subcarriers as f64).sqrt();
    vec![Complex64::new(amp, 0.0); n_subcarriers]
}

/// Gain-free response of one BS to the UE: entry (m, n) is
/// `pilot_n / sqrt(M) * a_m(ue, f_n)` with free-space spherical-wave
/// steering. Multiply by the BS gain for the mean observation.
pub fn bs_response(
    array: &ArrayGeometry,
    ue: Position,
    grid: &OfdmGrid,
    pilot: &[Complex64],
) -> Result<Array2<Complex64>> {
    if pilot.len() != grid.n_subcarriers() {
        return Err(Error::DimensionMismatch { expected: grid.n_subcarriers(), actual: pilot.len() });
    }
    let m = array.len();
    let norm = 1.0 / (m as f64).sqrt();
    let freqs = grid.frequencies();
    let mut h = Array2::zeros((m, freqs.len()));
    for (mi, e) in array.elements().iter().enumerate() {
        let d = ue.distance_to(e);
        if d < 1e-9 {
            return Err(Error::CoincidentSourceElement { element: mi });
        }
        for (n, &f) in freqs.iter().enumerate() {
            let k = TAU * f / SPEED_OF_LIGHT;
            let amp = SPEED_OF_LIGHT / f / (4.0 * std::f64::consts::PI * d) * norm;
            h[(mi, n)] = pilot[n] * Complex64::from_polar(amp, -k * d);
        }
    }
    Ok(h)
}

/// Noiseless mean observation per BS (gains applied).
pub fn scenario_mean(
    scenario: &DmimoScenario,
    grid: &OfdmGrid,
    pilot: &[Complex64],
) -> Result<Vec<Array2<Complex64>>> {
    scenario
        .bs_arrays
        .iter()
        .zip(&scenario.gains)
        .map(|(a, &g)| {
            let mut h = bs_response(a, scenario.ue, grid, pilot)?;
            h.mapv_inplace(|v| v * g);
            Ok(h)
        })
        .collect()
}

/// One noisy observation set (per-BS element x subcarrier matrices) with
/// circularly symmetric complex Gaussian noise of total per-entry variance
/// `noise_std^2`. Deterministic in `seed`.
pub fn synthesize_observations(
    scenario: &DmimoScenario,
    grid: &OfdmGrid,
    pilot: &[Complex64],
    noise_std: f64,
    seed: u64,
) -> Result<Vec<Array2<Complex64>>> {
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::NonFinite { name: "noise_std" });
    }
    let mut obs = scenario_mean(scenario, grid, pilot)?;
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std / std::f64::consts::SQRT_2).expect("validated");
        for y in &mut obs {
            for v in y.iter_mut() {
                let re: f64 = normal.sample(&mut rng);
                let im: f64 = normal.sample(&mut rng);
                *v += Complex64::new(re, im);
            }
        }
    }
    Ok(obs)
}

/// Analytic derivatives of the noiseless mean with respect to every
/// parameter of the scenario's [`ParamOrdering`].
#[derive(Debug, Clone)]
pub struct ObservationJacobian {
    /// (observation entries) x (parameters); rows BS-major, then element,
    /// then subcarrier.
    pub d_mu: DMatrix<Complex64>,
    /// Flattened mean observation in the same row order.
    pub mu: DVector<Complex64>,
    pub ordering: ParamOrdering,
}

/// Analytic observation Jacobian for a LOS D-MIMO scenario.
///
/// For an entry `mu = g * p_n/sqrt(M) * A(d) exp(-j k d)` the position
/// derivative is `mu * (-1/d - jk) * dd/dp` with `dd/dp` the unit-vector
/// component toward the UE; gain derivatives are the gain-free response
/// and its rotation by j.
pub fn observation_jacobian(
    scenario: &DmimoScenario,
    grid: &OfdmGrid,
    pilot: &[Complex64],
) -> Result<ObservationJacobian> {
    let ordering = scenario.ordering();
    let n_rows = scenario.n_observations(grid);
    let n_cols = ordering.n_params();
    let mut d_mu = DMatrix::zeros(n_rows, n_cols);
    let mut mu = DVector::zeros(n_rows);
    let freqs = grid.frequencies();
    let n_sc = freqs.len();
    let ue = scenario.ue;

    let mut row0 = 0usize;
    for (b, (array, &gain)) in scenario.bs_arrays.iter().zip(&scenario.gains).enumerate() {
        let h = bs_response(array, ue, grid, pilot)?;
        let (re_col, im_col) = ordering.gain_cols(b);
        for (m, e) in array.elements().iter().enumerate() {
            let d = ue.distance_to(e);
            let ddx = (ue.x - e.x) / d;
            let ddy = (ue.y - e.y) / d;
            for n in 0..n_sc {
                let row = row0 + m * n_sc + n;
                let k = TAU * freqs[n] / SPEED_OF_LIGHT;
                let mean = gain * h[(m, n)];
                let dd = Complex64::new(-1.0 / d, -k);
                mu[row] = mean;
                d_mu[(row, 0)] = mean * dd * ddx;
                d_mu[(row, 1)] = mean * dd * ddy;
                d_mu[(row, re_col)] = h[(m, n)];
                d_mu[(row, im_col)] = Complex64::i() * h[(m, n)];
            }
        }
        row0 += array.len() * n_sc;
    }
    Ok(ObservationJacobian { d_mu, mu, ordering })
}

/// Fisher information over a [`ParamOrdering`], with the noise level it
/// was computed at.
#[derive(Debug, Clone)]
pub struct FisherBlock {
    pub matrix: DMatrix<f64>,
    pub noise_variance: f64,
    pub ordering: ParamOrdering,
}

/// Fisher information of complex Gaussian observations with deterministic
/// mean: `J = (2/sigma^2) Re(D^H D)`.
pub fn fim(jacobian: &ObservationJacobian, noise_variance: f64) -> Result<FisherBlock> {
    if !(noise_variance > 0.0) {
        return Err(Error::NonPositive { name: "noise_variance", value: noise_variance });
    }
    let gram = jacobian.d_mu.adjoint() * &jacobian.d_mu;
    let n = gram.nrows();
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            matrix[(i, j)] = 2.0 / noise_variance * gram[(i, j)].re;
        }
    }
    // Enforce exact symmetry against round-off.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = s;
            matrix[(j, i)] = s;
        }
    }
    Ok(FisherBlock { matrix, noise_variance, ordering: jacobian.ordering })
}

/// Position error bound derived from a [`FisherBlock`].
#[derive(Debug, Clone, Copy)]
pub struct PebResult {
    /// sqrt(trace(EFIM^-1)) in meters; +inf when singular.
    pub peb: f64,
    /// 2x2 equivalent Fisher information of the position block.
    pub efim: Matrix2<f64>,
    /// Set when the nuisance block cannot be eliminated or the EFIM
    /// condition number exceeds 1e12.
    pub singular: bool,
}

const EFIM_CONDITION_LIMIT: f64 = 1e12;

/// Schur-complements the nuisance gains out of the Fisher matrix and turns
/// the 2x2 position EFIM into a position error bound. Singularity is a
/// reported state, not an error.
pub fn peb(fisher: &FisherBlock) -> PebResult {
    let j = &fisher.matrix;
    let n = j.nrows();
    let a = Matrix2::new(j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]);
    let efim = if n > 2 {
        let b = j.view((0, 2), (2, n - 2)).into_owned();
        let c = j.view((2, 2), (n - 2, n - 2)).into_owned();
        match c.cholesky() {
            Some(chol) => {
                let cinv_bt = chol.solve(&b.transpose());
                let correction = &b * cinv_bt;
                Matrix2::new(
                    a[(0, 0)] - correction[(0, 0)],
                    a[(0, 1)] - correction[(0, 1)],
                    a[(1, 0)] - correction[(1, 0)],
                    a[(1, 1)] - correction[(1, 1)],
                )
            }
            // Nuisance block singular: the gains themselves are not
            // identifiable, no finite position bound exists.
            None => {
                return PebResult { peb: f64::INFINITY, efim: Matrix2::zeros(), singular: true };
            }
        }
    } else {
        a
    };

    // Closed-form eigenvalues of the symmetric 2x2 EFIM.
    let tr = efim[(0, 0)] + efim[(1, 1)];
    let det = efim[(0, 0)] * efim[(1, 1)] - efim[(0, 1)] * efim[(1, 0)];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let lam_max = 0.5 * tr + disc;
    let lam_min = 0.5 * tr - disc;
    // The Schur subtraction cancels catastrophically when a direction is
    // uninformative; eigenvalues at the round-off floor of the pre-Schur
    // position block are noise, not information.
    let cancellation_floor = 1e-12 * a.norm();
    if !(lam_min > cancellation_floor) || lam_max / lam_min > EFIM_CONDITION_LIMIT {
        return PebResult { peb: f64::INFINITY, efim, singular: true };
    }
    PebResult { peb: (tr / det).sqrt(), efim, singular: false }
}

/// PEB at every bandwidth (Hz, ascending, positive) with a fixed
/// `n_subcarriers` pilot comb carrying total energy `snr_ref` against unit
/// noise variance.
///
/// The frequency spread, not the subcarrier count, sets the delay
/// information at fixed energy, so one comb size serves every bandwidth.
pub fn peb_bandwidth_sweep(
    scenario: &DmimoScenario,
    bandwidths: &[f64],
    n_subcarriers: usize,
    snr_ref: f64,
) -> Result<Vec<(f64, PebResult)>> {
    if bandwidths.is_empty() {
        return Err(Error::EmptyInput("bandwidths"));
    }
    if bandwidths[0] <= 0.0 || bandwidths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidRegion("bandwidths must be positive and ascending".into()));
    }
    if !(snr_ref > 0.0) {
        return Err(Error::NonPositive { name: "snr_ref", value: snr_ref });
    }
    let pilot = flat_pilot(n_subcarriers, snr_ref);
    bandwidths
        .par_iter()
        .map(|&bw| {
            let grid = OfdmGrid::new(scenario.fc(), bw, n_subcarriers)?;
            let jac = observation_jacobian(scenario, &grid, &pilot)?;
            Ok((bw, peb(&fim(&jac, 1.0)?)))
        })
        .collect()
}

/// Total pilot energy (against unit noise variance) that pins the PEB of
/// `scenario` at `grid` to `target_peb`. The bound scales as
/// 1/sqrt(energy), so a single evaluation suffices.
pub fn calibrate_snr_ref(scenario: &DmimoScenario, grid: &OfdmGrid, target_peb: f64) -> Result<f64> {
    if !(target_peb > 0.0) {
        return Err(Error::NonPositive { name: "target_peb", value: target_peb });
    }
    let pilot = flat_pilot(grid.n_subcarriers(), 1.0);
    let jac = observation_jacobian(scenario, grid, &pilot)?;
    let result = peb(&fim(&jac, 1.0)?);
    if result.singular {
        return Err(Error::SingularSystem("cannot calibrate a singular scenario".into()));
    }
    Ok((result.peb / target_peb).powi(2))
}

/// CRLB covariance for 2D position from delay-difference measurements
/// relative to BS 0, with independent Gaussian noise of std `sigma_tau`
/// seconds on each difference. Oracle for TDOA estimators.
pub fn tdoa_position_crlb(
    bs_positions: &[Position],
    ue: Position,
    sigma_tau: f64,
) -> Result<Matrix2<f64>> {
    if bs_positions.len() < 3 {
        return Err(Error::EmptyInput("tdoa needs >= 3 BS positions"));
    }
    if !(sigma_tau > 0.0) {
        return Err(Error::NonPositive { name: "sigma_tau", value: sigma_tau });
    }
    let unit = |b: &Position| {
        let d = ue.distance_to(b);
        ((ue.x - b.x) / d, (ue.y - b.y) / d)
    };
    let u0 = unit(&bs_positions[0]);
    let mut j = Matrix2::zeros();
    let scale = 1.0 / (SPEED_OF_LIGHT * sigma_tau).powi(2);
    for b in &bs_positions[1..] {
        let ui = unit(b);
        let g = (ui.0 - u0.0, ui.1 - u0.1);
        j[(0, 0)] += scale * g.0 * g.0;
        j[(0, 1)] += scale * g.0 * g.1;
        j[(1, 0)] += scale * g.1 * g.0;
        j[(1, 1)] += scale * g.1 * g.1;
    }
    j.try_inverse().ok_or_else(|| Error::SingularSystem("degenerate TDOA geometry".into()))
}
