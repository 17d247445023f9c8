//! Locally induced GP state: the diagonal-corrected Nyström covariance over a
//! neighborhood, factored through the Woodbury inner matrix so that
//! likelihood and prediction cost O(m²n) and O(m²) instead of O(n³).
//!
//! Writing K̃ₘ for the jittered inducing-point kernel matrix, the cached
//! quantities are
//!
//! ```text
//! ω_i = 1 + g - kₘ(x_i)ᵀ K̃ₘ⁻¹ kₘ(x_i)          (diagonal correction)
//! Q   = Kₘ + eps_q·I + k_nmᵀ Ω⁻¹ k_nm           (Woodbury inner matrix)
//! α   = Q⁻¹ k_nmᵀ Ω⁻¹ y                         (prediction weights)
//! ν̂   = (yᵀΩ⁻¹y - yᵀΩ⁻¹k_nm α) / n              (profiled scale)
//! ```
//!
//! Adding an inducing point reuses the partitioned-inverse structure: the
//! K factor gains one Cholesky column (O(m²)), ω is downdated in O(mn), and
//! only the Woodbury inner matrix is reassembled at the O(m²n) cost that
//! already dominates a from-scratch build.

use nalgebra::{DMatrix, DVector};

use crate::error::{LigpError, Result};
use crate::kernel::{cross_kernel_matrix, kernel_col, row_vec, KernelConfig};
use crate::linalg;

/// Points closer than this (Euclidean, in scaled units) to an existing
/// inducing point are rejected as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-8;

/// Predictive mean and variance at a single location, in response units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Scalars and vectors of the partitioned-inverse update. Exposed so callers
/// can inspect the pivots that decide whether an update was numerically
/// acceptable (`rho` for the kernel matrix, `upsilon` for the inner matrix).
#[derive(Debug, Clone)]
pub struct UpdateWorkspace {
    /// Schur pivot of K̃ₘ₊₁: 1 + eps_k - kₘᵀ K̃ₘ⁻¹ kₘ.
    pub rho: f64,
    /// K̃ₘ⁻¹ kₘ(x̄ₘ₊₁).
    pub eta: DVector<f64>,
    /// k_nm · eta.
    pub zeta: DVector<f64>,
    /// New column of the inner matrix: kₘ(x̄ₘ₊₁) + k_nmᵀ Ω'⁻¹ kₙ(x̄ₘ₊₁).
    pub gamma: DVector<f64>,
    /// New diagonal entry of the inner matrix.
    pub psi: f64,
    /// Schur pivot of the augmented inner matrix.
    pub upsilon: f64,
    /// -upsilon⁻¹ Q⁻¹ gamma.
    pub xi: DVector<f64>,
}

/// Cached factorizations for one neighborhood + inducing set.
///
/// Immutable after construction; shared freely across threads for
/// prediction.
#[derive(Debug, Clone)]
pub struct InducedState {
    x_n: DMatrix<f64>,
    y_n: DVector<f64>,
    x_bar: DMatrix<f64>,
    l_k: DMatrix<f64>,
    k_nm: DMatrix<f64>,
    omega: DVector<f64>,
    l_q: DMatrix<f64>,
    alpha: DVector<f64>,
    nu_hat: f64,
    zero_response: bool,
    config: KernelConfig,
}

/// Factor-level result of augmenting a state by one inducing point, before
/// any response-dependent quantities are recomputed. Shared by the update
/// operation and the design criteria, which only need variances.
pub(crate) struct Augmented {
    pub l_k: DMatrix<f64>,
    pub omega: DVector<f64>,
    pub k_n_new: DVector<f64>,
    pub k_m_new: DVector<f64>,
    pub l_q: DMatrix<f64>,
    pub rho: f64,
    pub eta: DVector<f64>,
    pub zeta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub psi: f64,
    pub upsilon: f64,
}

impl InducedState {
    pub fn m(&self) -> usize {
        self.x_bar.nrows()
    }

    pub fn n(&self) -> usize {
        self.x_n.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x_n.ncols()
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn x_n(&self) -> &DMatrix<f64> {
        &self.x_n
    }

    pub fn y_n(&self) -> &DVector<f64> {
        &self.y_n
    }

    pub fn x_bar(&self) -> &DMatrix<f64> {
        &self.x_bar
    }

    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    pub(crate) fn l_k(&self) -> &DMatrix<f64> {
        &self.l_k
    }

    pub(crate) fn l_q(&self) -> &DMatrix<f64> {
        &self.l_q
    }

    pub(crate) fn k_nm(&self) -> &DMatrix<f64> {
        &self.k_nm
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Profiled scale estimate ν̂; zero (with `zero_response` set) when the
    /// responses are identically zero.
    pub fn nu_hat(&self) -> f64 {
        self.nu_hat
    }

    pub fn zero_response(&self) -> bool {
        self.zero_response
    }
}

fn omega_floor(config: &KernelConfig) -> f64 {
    // Guards against negative diagonal corrections from cancellation.
    config.g + config.eps_k
}

/// Build the cached state for a neighborhood `(x_n, y_n)` and inducing set
/// `x_bar`.
pub fn build_state(
    x_n: &DMatrix<f64>,
    y_n: &DVector<f64>,
    x_bar: &DMatrix<f64>,
    config: &KernelConfig,
) -> Result<InducedState> {
    let (n, m) = (x_n.nrows(), x_bar.nrows());
    if m == 0 || n == 0 {
        return Err(LigpError::invalid("need at least one data point and one inducing point"));
    }
    if n < m {
        return Err(LigpError::invalid(format!("need n >= m, got n={n}, m={m}")));
    }
    if x_n.ncols() != x_bar.ncols() {
        return Err(LigpError::invalid("x_n and x_bar dimension mismatch"));
    }
    if y_n.len() != n {
        return Err(LigpError::invalid("y_n length does not match x_n rows"));
    }
    if x_n.iter().any(|v| !v.is_finite())
        || x_bar.iter().any(|v| !v.is_finite())
        || y_n.iter().any(|v| !v.is_finite())
    {
        return Err(LigpError::invalid("inputs must be finite"));
    }

    let k_raw = cross_kernel_matrix(x_bar, x_bar, config.theta)?;
    let mut k_jit = k_raw.clone();
    for i in 0..m {
        k_jit[(i, i)] += config.eps_k;
    }
    let l_k = linalg::cholesky(&k_jit, "K_m")?;

    let k_nm = cross_kernel_matrix(x_n, x_bar, config.theta)?;
    let omega = omega_from_factors(&l_k, &k_nm, config);
    let l_q = assemble_inner(&k_raw, &k_nm, &omega, config)?;

    let (alpha, nu_hat, zero_response) = weights_and_scale(&k_nm, &omega, y_n, &l_q);

    Ok(InducedState {
        x_n: x_n.clone(),
        y_n: y_n.clone(),
        x_bar: x_bar.clone(),
        l_k,
        k_nm,
        omega,
        l_q,
        alpha,
        nu_hat,
        zero_response,
        config: *config,
    })
}

/// ω_i = 1 + g - ||L⁻¹ kₘ(x_i)||², clamped below at g + eps_k.
fn omega_from_factors(l_k: &DMatrix<f64>, k_nm: &DMatrix<f64>, config: &KernelConfig) -> DVector<f64> {
    let v = linalg::solve_lower_mat(l_k, &k_nm.transpose());
    let floor = omega_floor(config);
    DVector::from_fn(k_nm.nrows(), |i, _| {
        let q = v.column(i).norm_squared();
        (1.0 + config.g - q).max(floor)
    })
}

/// Factor of Q = K_raw + eps_q·I + k_nmᵀ Ω⁻¹ k_nm.
fn assemble_inner(
    k_raw: &DMatrix<f64>,
    k_nm: &DMatrix<f64>,
    omega: &DVector<f64>,
    config: &KernelConfig,
) -> Result<DMatrix<f64>> {
    let (n, m) = k_nm.shape();
    let mut scaled = k_nm.clone();
    for i in 0..n {
        let w = 1.0 / omega[i].sqrt();
        for j in 0..m {
            scaled[(i, j)] *= w;
        }
    }
    let mut q = k_raw.clone();
    q.gemm_tr(1.0, &scaled, &scaled, 1.0);
    for i in 0..m {
        q[(i, i)] += config.eps_q;
    }
    linalg::cholesky(&q, "Q_m")
}

fn weights_and_scale(
    k_nm: &DMatrix<f64>,
    omega: &DVector<f64>,
    y_n: &DVector<f64>,
    l_q: &DMatrix<f64>,
) -> (DVector<f64>, f64, bool) {
    let n = y_n.len();
    let y_over_omega = DVector::from_fn(n, |i, _| y_n[i] / omega[i]);
    let b = k_nm.transpose() * &y_over_omega;
    let alpha = linalg::chol_solve(l_q, &b);
    let ydw: f64 = (0..n).map(|i| y_n[i] * y_over_omega[i]).sum();
    let zero_response = y_n.iter().all(|&v| v == 0.0);
    let nu_hat = if zero_response { 0.0 } else { ((ydw - b.dot(&alpha)) / n as f64).max(0.0) };
    (alpha, nu_hat, zero_response)
}

/// Negative concentrated log-likelihood, up to an additive constant:
/// n·log(n ν̂) + log|Q̃| - log|K̃| + Σ log ω.
pub fn neg_conc_loglik(state: &InducedState) -> f64 {
    let n = state.n() as f64;
    let quad = n * state.nu_hat;
    n * quad.ln() + linalg::chol_log_det(&state.l_q) - linalg::chol_log_det(&state.l_k)
        + state.omega.iter().map(|w| w.ln()).sum::<f64>()
}

/// Recompute Eq.-(6)-style scale from the cached weights. Matches
/// [`InducedState::nu_hat`]; exposed for symmetry with the likelihood.
pub fn nu_hat(state: &InducedState) -> f64 {
    state.nu_hat()
}

/// Predictive moments at `x_star`: mean kₘᵀα and variance
/// ν̂ (1 + g - kₘᵀ(K̃⁻¹ - Q̃⁻¹)kₘ).
pub fn predict(state: &InducedState, x_star: &[f64]) -> PredictiveMoments {
    let k = kernel_col(&state.x_bar, x_star, state.config.theta);
    let mean = k.dot(&state.alpha);
    let qf_k = linalg::solve_lower(&state.l_k, &k).norm_squared();
    let qf_q = linalg::solve_lower(&state.l_q, &k).norm_squared();
    let variance = state.nu_hat * (1.0 + state.config.g - qf_k + qf_q);
    PredictiveMoments { mean, variance }
}

/// De-scaled predictive variance σ²/ν̂ (what the design criteria integrate).
pub fn predict_descaled_variance(state: &InducedState, x_star: &[f64]) -> f64 {
    let k = kernel_col(&state.x_bar, x_star, state.config.theta);
    let qf_k = linalg::solve_lower(&state.l_k, &k).norm_squared();
    let qf_q = linalg::solve_lower(&state.l_q, &k).norm_squared();
    1.0 + state.config.g - qf_k + qf_q
}

/// Factor-level augmentation; the caller decides whether to finish it into a
/// full state (update_add_inducing) or only read off variances (criteria).
pub(crate) fn augment_factors(state: &InducedState, x_new: &[f64]) -> Result<Augmented> {
    let (m, _n) = (state.m(), state.n());
    if x_new.len() != state.dim() {
        return Err(LigpError::invalid("x_new dimension mismatch"));
    }
    if !x_new.iter().all(|v| v.is_finite()) {
        return Err(LigpError::invalid("x_new must be finite"));
    }
    for i in 0..m {
        let d2: f64 =
            (0..state.dim()).map(|k| (state.x_bar[(i, k)] - x_new[k]).powi(2)).sum();
        if d2.sqrt() <= DUPLICATE_TOL {
            return Err(LigpError::DegenerateUpdate);
        }
    }
    let config = &state.config;

    let k_m_new = kernel_col(&state.x_bar, x_new, config.theta);
    // Eq.-(14)-style port: appending the Cholesky column computes the same
    // pivot rho and weight vector eta as the partitioned inverse, in O(m²).
    let (l_k, rho) = linalg::chol_append(&state.l_k, &k_m_new, 1.0 + config.eps_k)?;
    let w = DVector::from_fn(m, |j, _| l_k[(m, j)]);
    let eta = linalg::solve_lower_t(&state.l_k, &w);

    // Diagonal correction downdate in O(mn).
    let k_n_new = kernel_col(&state.x_n, x_new, config.theta);
    let zeta = &state.k_nm * &eta;
    let floor = omega_floor(config);
    let omega = DVector::from_fn(state.n(), |i, _| {
        let s = zeta[i] - k_n_new[i];
        (state.omega[i] - s * s / rho).max(floor)
    });

    // Inner matrix with the updated correction; O(m²n) dominates everything.
    let k_raw = cross_kernel_matrix(&state.x_bar, &state.x_bar, config.theta)?;
    let l_q_star = assemble_inner(&k_raw, &state.k_nm, &omega, config)?;
    let inv_omega_knew = DVector::from_fn(state.n(), |i, _| k_n_new[i] / omega[i]);
    let gamma = &k_m_new + state.k_nm.transpose() * &inv_omega_knew;
    let psi = 1.0 + config.eps_q + k_n_new.dot(&inv_omega_knew);
    let (l_q, upsilon) = linalg::chol_append(&l_q_star, &gamma, psi)?;

    Ok(Augmented { l_k, omega, k_n_new, k_m_new, l_q, rho, eta, zeta, gamma, psi, upsilon })
}

/// Add one inducing point, producing the state over m+1 points plus the
/// partitioned-inverse workspace. Equals a from-scratch build to rounding.
pub fn update_add_inducing(
    state: &InducedState,
    x_new: &[f64],
) -> Result<(InducedState, UpdateWorkspace)> {
    let aug = augment_factors(state, x_new)?;
    let m = state.m();

    let mut x_bar = DMatrix::zeros(m + 1, state.dim());
    x_bar.view_mut((0, 0), (m, state.dim())).copy_from(&state.x_bar);
    for k in 0..state.dim() {
        x_bar[(m, k)] = x_new[k];
    }
    let mut k_nm = DMatrix::zeros(state.n(), m + 1);
    k_nm.view_mut((0, 0), (state.n(), m)).copy_from(&state.k_nm);
    k_nm.set_column(m, &aug.k_n_new);

    let (alpha, nu_hat, zero_response) =
        weights_and_scale(&k_nm, &aug.omega, &state.y_n, &aug.l_q);

    // xi = -upsilon⁻¹ Q⁻¹ gamma, solved against the pre-append inner factor.
    let l_q_star = aug.l_q.view((0, 0), (m, m)).into_owned();
    let xi = -linalg::chol_solve(&l_q_star, &aug.gamma) / aug.upsilon;

    let workspace = UpdateWorkspace {
        rho: aug.rho,
        eta: aug.eta,
        zeta: aug.zeta,
        gamma: aug.gamma,
        psi: aug.psi,
        upsilon: aug.upsilon,
        xi,
    };

    let next = InducedState {
        x_n: state.x_n.clone(),
        y_n: state.y_n.clone(),
        x_bar,
        l_k: aug.l_k,
        k_nm,
        omega: aug.omega,
        l_q: aug.l_q,
        alpha,
        nu_hat,
        zero_response,
        config: state.config,
    };
    Ok((next, workspace))
}

/// Fetch a row of a matrix as an owned Vec; convenience shared by callers
/// iterating prediction sites.
pub fn matrix_row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    row_vec(x, i)
}
