//! Multipath geometry, analytic channel covariance and block-fading channel
//! draws.
//!
//! The channel of one user over `N` subcarriers and `M` antennas is stacked
//! subcarrier-major: entry `(n - 1) * M + m` holds antenna `m` on subcarrier
//! `n`, with `m ∈ {0..M-1}` and `n ∈ {1..N}`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::invalid;
use crate::linalg::{complex_normal, hermitian_eigen, hermitian_part, scale_cols};
use crate::{CMatrix, CVector, Result};

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Default subcarrier spacing (LTE numerology), in Hz.
pub const DEFAULT_DELTA_F: f64 = 15e3;

/// Array and OFDM parameters shared by all paths of a geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayParams {
    /// Element spacing in wavelengths.
    pub d_over_lambda: f64,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Largest path delay in seconds.
    pub tau_max: f64,
}

impl ArrayParams {
    /// Half-wavelength array, 15 kHz spacing, and `tau_max = 1 / (delta_f * N)`
    /// so the delay phase wraps at most once across the band.
    pub fn for_subcarriers(n: usize) -> Self {
        ArrayParams {
            d_over_lambda: 0.5,
            delta_f: DEFAULT_DELTA_F,
            tau_max: 1.0 / (DEFAULT_DELTA_F * n as f64),
        }
    }
}

/// Angle of arrival (radians) and delay (seconds) of one propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub theta: f64,
    pub tau: f64,
}

/// Per-user multipath geometry. Fixed across frames; only the path gains are
/// redrawn frame to frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathGeometry {
    paths: Vec<Path>,
    params: ArrayParams,
}

impl MultipathGeometry {
    pub fn new(paths: Vec<Path>, params: ArrayParams) -> Result<Self> {
        if paths.is_empty() {
            return Err(invalid("a geometry needs at least one path"));
        }
        if !(params.tau_max > 0.0) {
            return Err(invalid("tau_max must be positive"));
        }
        for (i, p) in paths.iter().enumerate() {
            if !(-FRAC_PI_2..=FRAC_PI_2).contains(&p.theta) {
                return Err(invalid(format!("path {i}: theta {} outside [-pi/2, pi/2]", p.theta)));
            }
            if !(0.0..=params.tau_max).contains(&p.tau) {
                return Err(invalid(format!("path {i}: tau {} outside [0, tau_max]", p.tau)));
            }
        }
        Ok(MultipathGeometry { paths, params })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn params(&self) -> &ArrayParams {
        &self.params
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }
}

/// Draws `num_paths` paths with uniform angles in `[-pi/2, pi/2]` and uniform
/// delays in `[0, tau_max]`.
pub fn sample_geometry<R: Rng + ?Sized>(
    num_paths: usize,
    params: ArrayParams,
    rng: &mut R,
) -> Result<MultipathGeometry> {
    if num_paths == 0 {
        return Err(invalid("number of paths must be at least 1"));
    }
    if !(params.tau_max > 0.0) {
        return Err(invalid("tau_max must be positive"));
    }
    let angle = Uniform::new_inclusive(-FRAC_PI_2, FRAC_PI_2).expect("valid range");
    let delay = Uniform::new_inclusive(0.0, params.tau_max).expect("valid range");
    let paths = (0..num_paths)
        .map(|_| Path { theta: angle.sample(rng), tau: delay.sample(rng) })
        .collect();
    MultipathGeometry::new(paths, params)
}

/// Space-frequency response of one path, length `M * N`.
pub fn steering_vector(path: &Path, params: &ArrayParams, m: usize, n: usize) -> CVector {
    let spatial = PI * 2.0 * params.d_over_lambda * path.theta.sin();
    let spectral = -2.0 * PI * params.delta_f * path.tau;
    let mut a = CVector::zeros(m * n);
    for sc in 0..n {
        let freq_phase = spectral * (sc + 1) as f64;
        for ant in 0..m {
            a[sc * m + ant] = Complex64::from_polar(1.0, spatial * ant as f64 + freq_phase);
        }
    }
    a
}

/// Channel covariance with its cached low-rank eigensystem.
#[derive(Debug, Clone)]
pub struct Covariance {
    matrix: CMatrix,
    eigvecs: Arc<CMatrix>,
    eigvals: Vec<f64>,
}

impl Covariance {
    /// Covariance `F F^H` of a factor `F` (dim x k), factorized with a thin SVD.
    pub fn from_factor(factor: &CMatrix) -> Self {
        let dim = factor.nrows();
        let svd = factor.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let vals: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
        let vecs = CMatrix::from_fn(dim, order.len(), |r, c| u[(r, order[c])]);
        Self::from_parts(dim, vals, vecs)
    }

    /// Covariance from a dense Hermitian PSD matrix.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("covariance matrix must be square"));
        }
        let matrix = hermitian_part(&matrix);
        let (vals, vecs) = hermitian_eigen(&matrix);
        if let (Some(&max), Some(&min)) = (vals.first(), vals.last()) {
            if min < -1e-9 * max.abs().max(1.0) {
                return Err(invalid(format!("matrix is not PSD (eigenvalue {min})")));
            }
        }
        Ok(Self::from_parts(matrix.nrows(), vals, vecs))
    }

    /// The all-zero covariance of the given dimension (rank 0).
    pub fn zero(dim: usize) -> Self {
        Covariance {
            matrix: CMatrix::zeros(dim, dim),
            eigvecs: Arc::new(CMatrix::zeros(dim, 0)),
            eigvals: Vec::new(),
        }
    }

    /// Keeps the eigenpairs above the rank tolerance. The stored matrix is
    /// rebuilt from them, so the dense and the low-rank views describe the
    /// same Gaussian model.
    fn from_parts(dim: usize, vals: Vec<f64>, vecs: CMatrix) -> Self {
        let max = vals.first().copied().unwrap_or(0.0);
        let rank = vals.iter().take_while(|&&v| max > 0.0 && v > RANK_TOLERANCE * max).count();
        let eigvecs = vecs.columns(0, rank).into_owned();
        let eigvals = vals[..rank].to_vec();
        let matrix = if rank == 0 {
            CMatrix::zeros(dim, dim)
        } else {
            hermitian_part(&(scale_cols(&eigvecs, &eigvals) * eigvecs.adjoint()))
        };
        Covariance { matrix, eigvecs: Arc::new(eigvecs), eigvals }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Column-orthonormal basis `U_h` of the channel subspace (dim x r).
    pub fn eigvecs(&self) -> &CMatrix {
        &self.eigvecs
    }

    pub(crate) fn eigvecs_shared(&self) -> Arc<CMatrix> {
        Arc::clone(&self.eigvecs)
    }

    /// Positive eigenvalues, descending.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn trace(&self) -> f64 {
        self.eigvals.iter().sum()
    }

    /// Channel coordinates in the eigenbasis: `c = Λ^{1/2} g`, `g ~ CN(0, I_r)`.
    pub fn sample_coefficients<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        CVector::from_iterator(
            self.rank(),
            self.eigvals.iter().map(|&l| complex_normal(rng, l)),
        )
    }

    /// Maps eigenbasis coordinates back to the full `MN`-dimensional channel.
    pub fn expand(&self, coefficients: &CVector) -> CVector {
        if self.rank() == 0 {
            return CVector::zeros(self.dim());
        }
        &*self.eigvecs * coefficients
    }

    /// `U_h^H v`.
    pub fn project(&self, v: &CVector) -> CVector {
        self.eigvecs.ad_mul(v)
    }
}

/// `Σ^h = Σ_ℓ a_ℓ a_ℓ^H` for unit-variance path gains, normalized to trace `MN`.
pub fn covariance_from_geometry(geometry: &MultipathGeometry, m: usize, n: usize) -> Result<Covariance> {
    if m == 0 || n == 0 {
        return Err(invalid("M and N must be positive"));
    }
    let dim = m * n;
    let l = geometry.num_paths();
    let mut factor = CMatrix::zeros(dim, l);
    for (i, path) in geometry.paths().iter().enumerate() {
        factor.set_column(i, &steering_vector(path, geometry.params(), m, n));
    }
    let energy = factor.norm_squared();
    factor.scale_mut((dim as f64 / energy).sqrt());
    Ok(Covariance::from_factor(&factor))
}

/// One block-fading channel draw `h ~ CN(0, Σ^h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CVector,
}

impl ChannelRealization {
    /// Antenna coefficients on subcarrier `sc` (0-based).
    pub fn subcarrier(&self, sc: usize, m: usize) -> CVector {
        self.h.rows(sc * m, m).into_owned()
    }
}

pub fn sample_channel<R: Rng + ?Sized>(cov: &Covariance, rng: &mut R) -> ChannelRealization {
    let c = cov.sample_coefficients(rng);
    ChannelRealization { h: cov.expand(&c) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_rel_error;
    use crate::rng::{substream, Stream};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ArrayParams {
        ArrayParams::for_subcarriers(4)
    }

    #[test]
    fn zero_paths_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_geometry(0, params(), &mut rng).is_err());
    }

    #[test]
    fn geometry_in_range_and_deterministic() {
        let g1 = sample_geometry(20, params(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let g2 = sample_geometry(20, params(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(g1, g2);
        for p in g1.paths() {
            assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&p.theta));
            assert!((0.0..=params().tau_max).contains(&p.tau));
        }
        let single = sample_geometry(1, params(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(single.num_paths(), 1);
    }

    #[test]
    fn sampled_angles_have_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let g = sample_geometry(100_000, params(), &mut rng).unwrap();
        let n = g.num_paths() as f64;
        let mean = g.paths().iter().map(|p| p.theta).sum::<f64>() / n;
        // Uniform on [-pi/2, pi/2] has standard deviation pi / sqrt(12).
        let se = PI / 12f64.sqrt() / n.sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn broadside_zero_delay_is_all_ones() {
        let a = steering_vector(&Path { theta: 0.0, tau: 0.0 }, &params(), 3, 4);
        for z in a.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn endfire_two_antennas() {
        let a = steering_vector(&Path { theta: FRAC_PI_2, tau: 0.0 }, &params(), 2, 1);
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_entries_unit_modulus() {
        let g = sample_geometry(3, params(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for p in g.paths() {
            let a = steering_vector(p, &params(), 5, 4);
            assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            assert!((a.norm_squared() - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_path_rank_one() {
        let g = sample_geometry(1, params(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let cov = covariance_from_geometry(&g, 4, 4).unwrap();
        assert_eq!(cov.rank(), 1);
        assert!((cov.eigvals()[0] - 16.0).abs() < 1e-9);
    }

    #[test]
    fn scalar_channel_has_unit_variance() {
        let g = sample_geometry(7, ArrayParams::for_subcarriers(1), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let cov = covariance_from_geometry(&g, 1, 1).unwrap();
        assert_eq!(cov.rank(), 1);
        assert!((cov.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_invariants() {
        for seed in 0..10 {
            let mut rng = substream(seed, Stream::Geometry, &[]);
            let g = sample_geometry(6, ArrayParams::for_subcarriers(3), &mut rng).unwrap();
            let cov = covariance_from_geometry(&g, 4, 3).unwrap();
            let dim = 12.0;
            assert_eq!(cov.rank(), 6);
            let herm = (cov.matrix() - cov.matrix().adjoint()).norm() / cov.matrix().norm();
            assert!(herm < 1e-12);
            assert!((cov.matrix().trace().re - dim).abs() < 1e-9 * dim);
            assert!((cov.trace() - dim).abs() < 1e-9 * dim);
            let lam = CMatrix::from_diagonal(&CVector::from_iterator(
                cov.rank(),
                cov.eigvals().iter().map(|&v| Complex64::new(v, 0.0)),
            ));
            let rec = cov.eigvecs() * lam * cov.eigvecs().adjoint();
            assert!(frobenius_rel_error(&rec, cov.matrix()) < 1e-9);
        }
    }

    #[test]
    fn more_paths_than_dimensions() {
        let g = sample_geometry(10, ArrayParams::for_subcarriers(2), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let cov = covariance_from_geometry(&g, 2, 2).unwrap();
        assert_eq!(cov.rank(), 4);
    }

    #[test]
    fn coincident_paths_reduce_rank() {
        let p = Path { theta: 0.3, tau: 1e-6 };
        let g = MultipathGeometry::new(vec![p, p, Path { theta: -0.2, tau: 0.0 }], params()).unwrap();
        let cov = covariance_from_geometry(&g, 4, 4).unwrap();
        assert_eq!(cov.rank(), 2);
    }

    #[test]
    fn zero_covariance_samples_zero() {
        let cov = Covariance::zero(6);
        let h = sample_channel(&cov, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(h.h, CVector::zeros(6));
    }

    #[test]
    fn samples_in_channel_subspace() {
        let g = sample_geometry(3, params(), &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        let cov = covariance_from_geometry(&g, 4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let h = sample_channel(&cov, &mut rng).h;
            let resid = &h - cov.eigvecs() * cov.project(&h);
            assert!(resid.norm() <= 1e-9 * h.norm());
        }
    }

    #[test]
    fn sample_energy_matches_trace() {
        let g = sample_geometry(5, params(), &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let cov = covariance_from_geometry(&g, 4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let trials = 10_000;
        let mean = (0..trials).map(|_| sample_channel(&cov, &mut rng).h.norm_squared()).sum::<f64>()
            / trials as f64;
        assert!((mean - 16.0).abs() < 0.03 * 16.0, "{mean}");
    }

    #[test]
    fn empirical_covariance_matches() {
        let g = sample_geometry(4, ArrayParams::for_subcarriers(2), &mut ChaCha8Rng::seed_from_u64(31)).unwrap();
        let cov = covariance_from_geometry(&g, 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let trials = 100_000;
        let mut acc = CMatrix::zeros(6, 6);
        for _ in 0..trials {
            let h = sample_channel(&cov, &mut rng).h;
            acc += &h * h.adjoint();
        }
        acc.unscale_mut(trials as f64);
        assert!(frobenius_rel_error(&acc, cov.matrix()) < 0.05);
    }

    #[test]
    fn full_rank_with_probability_one() {
        let mut full = 0;
        for seed in 0..100 {
            let mut rng = substream(seed, Stream::Geometry, &[7]);
            let g = sample_geometry(8, ArrayParams::for_subcarriers(4), &mut rng).unwrap();
            if covariance_from_geometry(&g, 4, 4).unwrap().rank() == 8 {
                full += 1;
            }
        }
        assert!(full >= 99, "{full}");
    }
}
