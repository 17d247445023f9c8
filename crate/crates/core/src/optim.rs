//! In-house optimizers: bounded Brent for the 1-d lengthscale likelihood and
//! a box-constrained limited-memory BFGS (gradient projection + two-loop
//! recursion) for the design criteria.

/// Outcome of a 1-d bounded minimization.
#[derive(Debug, Clone, Copy)]
pub struct ScalarMin {
    pub x: f64,
    pub fx: f64,
    pub evals: u32,
    pub converged: bool,
}

/// Bounded Brent (golden section with parabolic acceleration), after the
/// classic fminbound scheme. `f` may return +inf to veto a point.
pub fn brent_min(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    xatol: f64,
    max_iter: u32,
) -> ScalarMin {
    assert!(a < b, "invalid bracket");
    let golden = 0.5 * (3.0 - 5.0_f64.sqrt());
    let (mut lo, mut hi) = (a, b);
    let mut x = lo + golden * (hi - lo);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut evals = 1;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut converged = false;

    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let tol1 = 1e-11 * x.abs() + xatol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (hi - lo) {
            converged = true;
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            // Parabolic fit through (v, w, x).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_old = e;
            e = d;
            if p.abs() < (0.5 * q * e_old).abs() && p > q * (lo - x) && p < q * (hi - x) {
                d = p / q;
                let u = x + d;
                if (u - lo) < tol2 || (hi - u) < tol2 {
                    d = if mid > x { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < mid { hi - x } else { lo - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + if d > 0.0 { tol1 } else { -tol1 } };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    ScalarMin { x, fx, evals, converged }
}

/// Options for the box-constrained minimizer.
#[derive(Debug, Clone, Copy)]
pub struct BoxOpts {
    /// History size of the limited-memory approximation.
    pub memory: usize,
    /// Stop when the objective decreases by less than this (absolute).
    pub f_abs_tol: f64,
    /// Stop when the projected-gradient sup norm drops below this.
    pub g_tol: f64,
    pub max_iter: u32,
}

impl Default for BoxOpts {
    fn default() -> Self {
        Self { memory: 8, f_abs_tol: 1e-8, g_tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct BoxMin {
    pub x: Vec<f64>,
    pub fx: f64,
    pub grad_inf_norm: f64,
    pub iterations: u32,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, &x| acc.max(x.abs()))
}

/// Box-constrained quasi-Newton minimization of `f` with analytic gradient.
///
/// Active-set handling is the simple projected variant: bound-pinned
/// coordinates are frozen out of the two-loop direction, and the Armijo
/// backtracking line search walks along the projected path.
pub fn minimize_box(
    mut fg: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &BoxOpts,
) -> BoxMin {
    let d = x0.len();
    assert!(lower.len() == d && upper.len() == d);
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = fg(&x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let pg = projected_gradient(&x, &g, lower, upper);
        if inf_norm(&pg) <= opts.g_tol {
            converged = true;
            break;
        }

        // Two-loop recursion over the stored curvature pairs; frozen
        // coordinates contribute nothing.
        let active: Vec<bool> = pg.iter().map(|&v| v != 0.0).collect();
        let mut q: Vec<f64> = pg.clone();
        let pairs = s_hist.len();
        let mut alphas = vec![0.0; pairs];
        for i in (0..pairs).rev() {
            let sy: f64 = s_hist[i].iter().zip(&y_hist[i]).map(|(s, y)| s * y).sum();
            if sy <= 0.0 {
                continue;
            }
            let a = s_hist[i].iter().zip(&q).map(|(s, qi)| s * qi).sum::<f64>() / sy;
            alphas[i] = a;
            for k in 0..d {
                q[k] -= a * y_hist[i][k];
            }
        }
        let scale = if pairs > 0 {
            let sy: f64 =
                s_hist[pairs - 1].iter().zip(&y_hist[pairs - 1]).map(|(s, y)| s * y).sum();
            let yy: f64 = y_hist[pairs - 1].iter().map(|y| y * y).sum();
            if sy > 0.0 && yy > 0.0 {
                sy / yy
            } else {
                1.0
            }
        } else {
            1.0
        };
        for qi in q.iter_mut() {
            *qi *= scale;
        }
        for i in 0..pairs {
            let sy: f64 = s_hist[i].iter().zip(&y_hist[i]).map(|(s, y)| s * y).sum();
            if sy <= 0.0 {
                continue;
            }
            let b = y_hist[i].iter().zip(&q).map(|(y, qi)| y * qi).sum::<f64>() / sy;
            for k in 0..d {
                q[k] += (alphas[i] - b) * s_hist[i][k];
            }
        }
        let mut dir: Vec<f64> = q.iter().zip(&active).map(|(&v, &a)| if a { -v } else { 0.0 }).collect();
        let descent: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();
        if !(descent < 0.0) {
            for k in 0..d {
                dir[k] = -pg[k];
            }
        }

        // Armijo backtracking along the projected path.
        let mut step = 1.0;
        let mut accepted = false;
        let slope: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();
        for _ in 0..40 {
            let mut xt: Vec<f64> = x.iter().zip(&dir).map(|(&xi, &di)| xi + step * di).collect();
            project(&mut xt, lower, upper);
            let (ft, gt) = fg(&xt);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope.min(0.0) {
                let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
                let ss: f64 = s.iter().map(|v| v * v).sum();
                if sy > 1e-12 * ss.sqrt() * yv.iter().map(|v| v * v).sum::<f64>().sqrt() {
                    s_hist.push(s);
                    y_hist.push(yv);
                    if s_hist.len() > opts.memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                }
                let df = fx - ft;
                x = xt;
                fx = ft;
                g = gt;
                accepted = true;
                if df.abs() <= opts.f_abs_tol {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if converged {
            break;
        }
        if !accepted {
            // Line search stalled; call it converged only if the projected
            // gradient is already near zero.
            converged = inf_norm(&projected_gradient(&x, &g, lower, upper)) <= 10.0 * opts.g_tol;
            break;
        }
    }
    let pg = projected_gradient(&x, &g, lower, upper);
    BoxMin { x, fx, grad_inf_norm: inf_norm(&pg), iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn brent_finds_quartic_minimum() {
        let r = brent_min(|x| (x - 1.3).powi(4) + 2.0, -4.0, 4.0, 1e-8, 200);
        assert!(r.converged);
        assert_relative_eq!(r.x, 1.3, epsilon = 1e-3);
        assert_relative_eq!(r.fx, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn brent_walks_to_boundary_when_monotone() {
        let r = brent_min(|x| x, 0.0, 2.0, 1e-9, 300);
        assert!(r.x < 1e-6);
    }

    #[test]
    fn lbfgs_rosenbrock_in_box() {
        let fg = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (f, g)
        };
        let r = minimize_box(fg, &[-1.5, 1.5], &[-2.0, -2.0], &[2.0, 2.0], &BoxOpts {
            f_abs_tol: 1e-14,
            g_tol: 1e-8,
            max_iter: 500,
            ..Default::default()
        });
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(r.x[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn lbfgs_respects_active_bounds() {
        // Unconstrained minimum at (3, -2); box caps both coordinates.
        let fg = |x: &[f64]| {
            let f = (x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2);
            (f, vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 2.0)])
        };
        let r = minimize_box(fg, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], &BoxOpts::default());
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(r.x[1], -1.0, epsilon = 1e-9);
        assert_eq!(r.grad_inf_norm, 0.0);
    }
}
