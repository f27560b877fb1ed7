//! Position estimators: NF-MUSIC spectra, direct maximum-likelihood
//! positioning, TDOA multilateration, and RIS-aided NLOS positioning.
//!
//! The ML-style estimators share a coarse-to-fine pattern: a grid search of
//! a concentrated likelihood (nuisance gains solved in closed form per
//! candidate) followed by derivative-free simplex refinement.

mod ml;
mod music;
mod ris;
mod tdoa;

pub use ml::ml_direct_position;
pub use music::nf_music_spectrum;
pub use ris::{
    focusing_profile, ris_nlos_localize, sweep_schedule, synth_ris_observations, ProfileSchedule,
};
pub use tdoa::tdoa_localize;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::geometry::Position;
use crate::{Error, Result};

/// Result of a position solve.
#[derive(Debug, Clone, Copy)]
pub struct PositionEstimate {
    pub position: Position,
    /// Final objective value (residual energy for ML solvers, weighted
    /// squared residual for TDOA).
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Spatial sample covariance (1/K) sum of y y^H over snapshots.
#[derive(Debug, Clone)]
pub struct SampleCovariance {
    matrix: DMatrix<Complex64>,
    n_snapshots: usize,
}

impl SampleCovariance {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn n_snapshots(&self) -> usize {
        self.n_snapshots
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Wraps an externally built covariance; must be square and Hermitian
    /// to 1e-9 relative.
    pub fn from_matrix(matrix: DMatrix<Complex64>, n_snapshots: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), actual: matrix.ncols() });
        }
        if n_snapshots == 0 {
            return Err(Error::EmptyInput("n_snapshots"));
        }
        let herm_err = (&matrix - matrix.adjoint()).norm();
        if herm_err > 1e-9 * matrix.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian);
        }
        Ok(Self { matrix, n_snapshots })
    }
}

/// Averages snapshot outer products into a [`SampleCovariance`].
pub fn sample_covariance(snapshots: &[Vec<Complex64>]) -> Result<SampleCovariance> {
    let k = snapshots.len();
    if k == 0 {
        return Err(Error::EmptyInput("snapshots"));
    }
    let n = snapshots[0].len();
    if n == 0 {
        return Err(Error::EmptyInput("snapshot length"));
    }
    for s in snapshots {
        if s.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: s.len() });
        }
    }
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for s in snapshots {
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += s[i] * s[j].conj();
            }
        }
    }
    m /= Complex64::new(k as f64, 0.0);
    // The accumulation is Hermitian by construction up to round-off;
    // symmetrize so downstream eigensolvers see an exact Hermitian input.
    let m = (m.clone() + m.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(SampleCovariance { matrix: m, n_snapshots: k })
}

/// Outcome of the simplex refinement stage.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOutcome {
    pub best: (f64, f64),
    pub value: f64,
    pub iterations: usize,
    /// Simplex diameter fell below the tolerance.
    pub converged: bool,
}

/// Minimizes `f` over the plane with a Nelder-Mead simplex started at
/// `start` with edge length `step`. Stops when the simplex diameter drops
/// below `tol` or after `max_iter` reflections.
pub(crate) fn simplex_descent_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    start: (f64, f64),
    step: f64,
    tol: f64,
    max_iter: usize,
) -> SimplexOutcome {
    let mut pts = [
        start,
        (start.0 + step, start.1),
        (start.0 + 0.5 * step, start.1 + 0.866 * step),
    ];
    let mut vals = [f(pts[0].0, pts[0].1), f(pts[1].0, pts[1].1), f(pts[2].0, pts[2].1)];
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..max_iter {
        iterations += 1;
        // Order best -> worst.
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
        let (b, m, w) = (idx[0], idx[1], idx[2]);

        let diameter = pts
            .iter()
            .flat_map(|p| pts.iter().map(move |q| f64::hypot(p.0 - q.0, p.1 - q.1)))
            .fold(0.0f64, f64::max);
        if diameter < tol {
            converged = true;
            break;
        }

        let centroid = (0.5 * (pts[b].0 + pts[m].0), 0.5 * (pts[b].1 + pts[m].1));
        let reflect = (2.0 * centroid.0 - pts[w].0, 2.0 * centroid.1 - pts[w].1);
        let fr = f(reflect.0, reflect.1);

        if fr < vals[b] {
            // Try expansion.
            let expand = (centroid.0 + 2.0 * (reflect.0 - centroid.0), centroid.1 + 2.0 * (reflect.1 - centroid.1));
            let fe = f(expand.0, expand.1);
            if fe < fr {
                pts[w] = expand;
                vals[w] = fe;
            } else {
                pts[w] = reflect;
                vals[w] = fr;
            }
        } else if fr < vals[m] {
            pts[w] = reflect;
            vals[w] = fr;
        } else {
            // Contract toward the better side.
            let (target, ft_base) = if fr < vals[w] { (reflect, fr) } else { (pts[w], vals[w]) };
            let contract = (centroid.0 + 0.5 * (target.0 - centroid.0), centroid.1 + 0.5 * (target.1 - centroid.1));
            let fc = f(contract.0, contract.1);
            if fc < ft_base {
                pts[w] = contract;
                vals[w] = fc;
            } else {
                // Shrink toward the best vertex.
                for i in 0..3 {
                    if i != b {
                        pts[i] = (pts[b].0 + 0.5 * (pts[i].0 - pts[b].0), pts[b].1 + 0.5 * (pts[i].1 - pts[b].1));
                        vals[i] = f(pts[i].0, pts[i].1);
                    }
                }
            }
        }
    }

    let mut best = 0usize;
    for i in 1..3 {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    SimplexOutcome { best: pts[best], value: vals[best], iterations, converged }
}
