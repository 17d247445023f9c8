//! Small dense Cholesky helpers. Factors are stored as lower-triangular
//! `DMatrix` so a row/column can be appended in O(m²) without refactoring.

use nalgebra::{DMatrix, DVector};

use crate::error::{LigpError, Result};

/// Lower Cholesky factor of a symmetric positive-definite matrix.
/// `name` labels the matrix in the ill-conditioned error.
pub(crate) fn cholesky(a: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let chol = a.clone().cholesky().ok_or(LigpError::IllConditioned { matrix: name })?;
    Ok(chol.unpack())
}

/// Solve L x = b for lower-triangular L.
pub(crate) fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = l.nrows();
    let mut x = b.clone();
    for i in 0..m {
        let mut s = x[i];
        for j in 0..i {
            s -= l[(i, j)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solve Lᵀ x = b for lower-triangular L.
pub(crate) fn solve_lower_t(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = l.nrows();
    let mut x = b.clone();
    for i in (0..m).rev() {
        let mut s = x[i];
        for j in i + 1..m {
            s -= l[(j, i)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solve (L Lᵀ) x = b.
pub(crate) fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    solve_lower_t(l, &solve_lower(l, b))
}

/// Explicit inverse from the lower factor; used where whole-matrix traces
/// against the inverse are needed.
pub(crate) fn chol_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let m = l.nrows();
    let mut inv = DMatrix::zeros(m, m);
    for j in 0..m {
        let e = DVector::from_fn(m, |i, _| if i == j { 1.0 } else { 0.0 });
        inv.set_column(j, &chol_solve(l, &e));
    }
    // Symmetrize against rounding.
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    inv
}

/// log det(L Lᵀ) = 2 Σ log L_ii.
pub(crate) fn chol_log_det(l: &DMatrix<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Append one row/column to a factored matrix: given L with A = L Lᵀ,
/// produce the factor of [[A, b], [bᵀ, c]]. Returns the new factor and the
/// Schur pivot ρ = c - bᵀA⁻¹b; fails when the pivot is nonpositive.
pub(crate) fn chol_append(l: &DMatrix<f64>, b: &DVector<f64>, c: f64) -> Result<(DMatrix<f64>, f64)> {
    let m = l.nrows();
    let w = solve_lower(l, b);
    let pivot = c - w.norm_squared();
    if !(pivot > 0.0) || !pivot.is_finite() {
        return Err(LigpError::DegenerateUpdate);
    }
    let mut out = DMatrix::zeros(m + 1, m + 1);
    out.view_mut((0, 0), (m, m)).copy_from(l);
    for j in 0..m {
        out[(m, j)] = w[j];
    }
    out[(m, m)] = pivot.sqrt();
    Ok((out, pivot))
}

/// tr(A⁻¹ W) from the lower factor of A; O(m³).
pub(crate) fn trace_chol_inv_times(l: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let m = l.nrows();
    let mut tr = 0.0;
    for j in 0..m {
        let col = DVector::from_fn(m, |i, _| w[(i, j)]);
        tr += chol_solve(l, &col)[j];
    }
    tr
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn random_spd(m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let b = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(m, m) * (m as f64)
    }

    #[test]
    fn solves_and_inverse_agree_with_nalgebra() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a = random_spd(8, &mut rng);
        let l = cholesky(&a, "A").unwrap();
        let b = DVector::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
        let x = chol_solve(&l, &b);
        assert_relative_eq!(&a * &x, b, epsilon = 1e-10);
        let inv = chol_inverse(&l);
        assert_relative_eq!(&a * &inv, DMatrix::identity(8, 8), epsilon = 1e-10);
        assert_relative_eq!(chol_log_det(&l), a.determinant().ln(), epsilon = 1e-10);
    }

    #[test]
    fn append_matches_full_factorization() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = random_spd(7, &mut rng);
        let l6 = cholesky(&a.view((0, 0), (6, 6)).into_owned(), "A").unwrap();
        let b = DVector::from_fn(6, |i, _| a[(i, 6)]);
        let (l7, pivot) = chol_append(&l6, &b, a[(6, 6)]).unwrap();
        let full = cholesky(&a, "A").unwrap();
        assert_relative_eq!(l7, full, epsilon = 1e-12);
        assert!(pivot > 0.0);
    }

    #[test]
    fn trace_helper() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = random_spd(6, &mut rng);
        let w = random_spd(6, &mut rng);
        let l = cholesky(&a, "A").unwrap();
        let expect = (a.try_inverse().unwrap() * &w).trace();
        assert_relative_eq!(trace_chol_inv_times(&l, &w), expect, epsilon = 1e-9);
    }
}

/// Solve L X = B for lower-triangular L and matrix RHS (columns solved
/// independently).
pub(crate) fn solve_lower_mat(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, k) = (l.nrows(), b.ncols());
    let mut x = b.clone();
    for c in 0..k {
        for i in 0..m {
            let mut s = x[(i, c)];
            for j in 0..i {
                s -= l[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}
