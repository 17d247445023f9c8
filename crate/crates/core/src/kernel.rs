//! Isotropic squared-exponential kernel and the hyperparameters shared by
//! every covariance evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{LigpError, Result};

/// Kernel hyperparameters plus the diagonal-conditioning jitters.
///
/// `theta` is the squared-distance lengthscale, `g` the nugget. `eps_k` is
/// added to the diagonal of the inducing-point matrix before factorization
/// and `eps_q` to the diagonal of the Woodbury inner matrix, which is more
/// sensitive to conditioning and gets the larger default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub theta: f64,
    pub g: f64,
    pub eps_k: f64,
    pub eps_q: f64,
}

impl KernelConfig {
    pub const DEFAULT_EPS_K: f64 = 1e-6;
    pub const DEFAULT_EPS_Q: f64 = 1e-5;

    /// New config with default jitters.
    pub fn new(theta: f64, g: f64) -> Result<Self> {
        Self::with_jitters(theta, g, Self::DEFAULT_EPS_K, Self::DEFAULT_EPS_Q)
    }

    pub fn with_jitters(theta: f64, g: f64, eps_k: f64, eps_q: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(LigpError::invalid(format!("theta must be positive, got {theta}")));
        }
        if !(g >= 0.0) || !g.is_finite() {
            return Err(LigpError::invalid(format!("nugget g must be nonnegative, got {g}")));
        }
        if !(eps_k > 0.0) || !(eps_q > 0.0) {
            return Err(LigpError::invalid("jitters eps_k and eps_q must be positive"));
        }
        if eps_q < eps_k {
            return Err(LigpError::invalid("eps_q must be at least eps_k"));
        }
        Ok(Self { theta, g, eps_k, eps_q })
    }

    /// Same jitters and nugget, different lengthscale.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::with_jitters(theta, self.g, self.eps_k, self.eps_q)
    }
}

/// Rectangular study region, one `(a_k, b_k)` pair per input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(LigpError::invalid("domain needs at least one dimension"));
        }
        for (k, &(a, b)) in bounds.iter().enumerate() {
            if !(a < b) {
                return Err(LigpError::invalid(format!(
                    "domain bound {k} must satisfy a < b, got ({a}, {b})"
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// Unit hypercube `[0,1]^d`.
    pub fn unit(d: usize) -> Self {
        Self { bounds: vec![(0.0, 1.0); d] }
    }

    /// Axis-aligned bounding box of a set of points (rows of `x`).
    pub fn bounding_box(x: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(LigpError::invalid("cannot bound an empty point set"));
        }
        let bounds = (0..x.ncols())
            .map(|k| {
                let col = x.column(k);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if lo < hi { Ok((lo, hi)) } else { Err(LigpError::DegenerateGeometry(format!("coordinate {k} has zero spread"))) }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|&(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.bounds).all(|(&v, &(a, b))| v >= a && v <= b)
    }

    /// Rescale each bound pair by `1/scale_k` (used after input pre-scaling).
    pub fn scaled(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.dim() {
            return Err(LigpError::invalid("scale length does not match domain dimension"));
        }
        Domain::new(
            self.bounds
                .iter()
                .zip(scale)
                .map(|(&(a, b), &s)| (a / s, b / s))
                .collect(),
        )
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub(crate) fn kernel_unchecked(x: &[f64], z: &[f64], theta: f64) -> f64 {
    (-sq_dist(x, z) / theta).exp()
}

/// Squared-exponential correlation `exp(-||x-z||²/θ)`.
pub fn kernel(x: &[f64], z: &[f64], theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(LigpError::invalid(format!("theta must be positive, got {theta}")));
    }
    if x.len() != z.len() {
        return Err(LigpError::invalid(format!(
            "kernel input dimensions differ: {} vs {}",
            x.len(),
            z.len()
        )));
    }
    Ok(kernel_unchecked(x, z, theta))
}

/// Matrix of kernel evaluations between the rows of `x` (a×d) and `z` (b×d).
pub fn cross_kernel_matrix(x: &DMatrix<f64>, z: &DMatrix<f64>, theta: f64) -> Result<DMatrix<f64>> {
    if !(theta > 0.0) {
        return Err(LigpError::invalid(format!("theta must be positive, got {theta}")));
    }
    if x.ncols() != z.ncols() {
        return Err(LigpError::invalid(format!(
            "cross kernel dimension mismatch: {} vs {} columns",
            x.ncols(),
            z.ncols()
        )));
    }
    let (a, b, d) = (x.nrows(), z.nrows(), x.ncols());
    let mut out = DMatrix::zeros(a, b);
    for j in 0..b {
        for i in 0..a {
            let mut s = 0.0;
            for k in 0..d {
                let diff = x[(i, k)] - z[(j, k)];
                s += diff * diff;
            }
            out[(i, j)] = (-s / theta).exp();
        }
    }
    Ok(out)
}

/// Kernel evaluations between every row of `x` and a single point `z`.
pub(crate) fn kernel_col(x: &DMatrix<f64>, z: &[f64], theta: f64) -> DVector<f64> {
    let (a, d) = (x.nrows(), x.ncols());
    debug_assert_eq!(d, z.len());
    DVector::from_fn(a, |i, _| {
        let mut s = 0.0;
        for k in 0..d {
            let diff = x[(i, k)] - z[k];
            s += diff * diff;
        }
        (-s / theta).exp()
    })
}

/// Row `i` of a matrix as a plain vector.
pub(crate) fn row_vec(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    (0..x.ncols()).map(|k| x[(i, k)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn kernel_zero_distance_is_one() {
        let x = [0.3, -1.2, 4.0];
        assert_eq!(kernel(&x, &x, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn kernel_unit_distance_closed_form() {
        assert_relative_eq!(kernel(&[0.0], &[1.0], 1.0).unwrap(), (-1.0_f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn kernel_symmetry_random_pairs() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..100 {
            let d = rng.gen_range(1..=5);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let theta = rng.gen_range(0.05..4.0);
            assert_eq!(kernel(&x, &z, theta).unwrap(), kernel(&z, &x, theta).unwrap());
        }
    }

    #[test]
    fn kernel_rejects_nonpositive_theta() {
        assert!(kernel(&[0.0], &[1.0], 0.0).is_err());
        assert!(kernel(&[0.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn cross_kernel_single_point() {
        let x = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        let k = cross_kernel_matrix(&x, &x, 1.3).unwrap();
        assert_eq!(k, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn cross_kernel_self_symmetric_unit_diagonal() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(6, 3, |_, _| rng.gen_range(-1.0..1.0));
        let k = cross_kernel_matrix(&x, &x, 0.8).unwrap();
        for i in 0..6 {
            assert_eq!(k[(i, i)], 1.0);
            for j in 0..6 {
                assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
    }

    #[test]
    fn cross_kernel_matches_scalar_kernel() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let x = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-2.0..2.0));
        let z = DMatrix::from_fn(4, 2, |_, _| rng.gen_range(-2.0..2.0));
        let theta = 0.6;
        let k = cross_kernel_matrix(&x, &z, theta).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let expect = kernel(&row_vec(&x, i), &row_vec(&z, j), theta).unwrap();
                assert_eq!(k[(i, j)], expect);
            }
        }
    }

    #[test]
    fn cross_kernel_dimension_mismatch() {
        let x = DMatrix::zeros(2, 2);
        let z = DMatrix::zeros(2, 3);
        assert!(cross_kernel_matrix(&x, &z, 1.0).is_err());
    }

    #[test]
    fn config_invariants() {
        assert!(KernelConfig::new(1.0, 0.0).is_ok());
        assert!(KernelConfig::new(0.0, 0.0).is_err());
        assert!(KernelConfig::new(1.0, -1e-9).is_err());
        assert!(KernelConfig::with_jitters(1.0, 0.0, 1e-6, 1e-7).is_err());
    }

    #[test]
    fn domain_checks() {
        assert!(Domain::new(vec![(0.0, 1.0), (1.0, 1.0)]).is_err());
        let d = Domain::new(vec![(-2.0, 2.0), (0.0, 1.0)]).unwrap();
        assert_eq!(d.volume(), 4.0);
        assert!(d.contains(&[0.0, 0.5]));
        assert!(!d.contains(&[0.0, 1.5]));
    }
}
