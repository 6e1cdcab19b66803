//! Dense BFGS minimizer with a strong-Wolfe line search.
//!
//! Built for the low-dimensional likelihood surfaces in this crate
//! (a few dozen parameters at most), so the inverse Hessian approximation
//! is kept as a dense matrix. Objectives report the function value and
//! fill the gradient in one call; non-finite values are treated as
//! out-of-bounds and the line search backs away from them.

/// Line-search parameters follow Nocedal & Wright (c1 = 1e-4, c2 = 0.9).
const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_SEARCH_EVALS: usize = 40;

#[derive(Debug, Clone)]
pub struct OptimOptions {
    /// Euclidean gradient-norm tolerance for convergence.
    pub grad_tol: f64,
    /// Iteration cap per run.
    pub max_iterations: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions { grad_tol: 1e-6, max_iterations: 2000 }
    }
}

/// Result of one minimization run. `converged` is true when the gradient
/// norm dropped below tolerance; otherwise the best point found is still
/// returned.
#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OptimError {
    #[error("objective is not finite at the starting point")]
    BadStart,
    #[error("line search failed before any progress was made")]
    NoProgress,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `objective` starting from `x0`.
///
/// The objective receives the point and a gradient buffer to fill, and
/// returns the function value. It may return a non-finite value to signal
/// an infeasible point.
pub fn minimize<F>(objective: &mut F, x0: &[f64], options: &OptimOptions) -> Result<OptimOutcome, OptimError>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut value = objective(&x, &mut grad);
    let mut evals = 1usize;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(OptimError::BadStart);
    }

    // Inverse Hessian approximation, dense row-major.
    let mut h = eye(n);
    let mut made_progress = false;
    let mut h_is_identity = true;

    for iteration in 0..options.max_iterations {
        let grad_norm = norm(&grad);
        if grad_norm <= options.grad_tol {
            return Ok(OptimOutcome { x, value, grad_norm, iterations: iteration, evals, converged: true });
        }

        // d = -H g, falling back to steepest descent if H lost descent.
        let mut direction = mat_vec(&h, &grad, n);
        for d in direction.iter_mut() {
            *d = -*d;
        }
        let mut slope = dot(&grad, &direction);
        if !(slope < 0.0) {
            h = eye(n);
            h_is_identity = true;
            direction = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &direction);
        }

        // unit-length first trial step while H is untuned; alpha = 1 after
        // the first update so BFGS keeps its superlinear behavior
        let alpha0 = if h_is_identity { (1.0 / norm(&direction)).min(1.0) } else { 1.0 };
        match line_search(objective, &x, value, &direction, slope, alpha0, &mut evals) {
            Some(step) => {
                let y: Vec<f64> = step.grad.iter().zip(&grad).map(|(gn, go)| gn - go).collect();
                let s: Vec<f64> = step.x.iter().zip(&x).map(|(xn, xo)| xn - xo).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * norm(&s) * norm(&y) {
                    if h_is_identity {
                        // scale the initial matrix before the first update
                        let gamma = sy / dot(&y, &y);
                        h = eye(n);
                        for v in h.iter_mut() {
                            *v *= gamma;
                        }
                        h_is_identity = false;
                    }
                    bfgs_update(&mut h, &s, &y, sy, n);
                }
                x = step.x;
                value = step.value;
                grad = step.grad;
                made_progress = true;
            }
            None => {
                if !made_progress {
                    return Err(OptimError::NoProgress);
                }
                // stuck: report the best point reached so far
                return Ok(OptimOutcome {
                    grad_norm: norm(&grad),
                    x,
                    value,
                    iterations: iteration,
                    evals,
                    converged: false,
                });
            }
        }
    }

    Ok(OptimOutcome {
        grad_norm: norm(&grad),
        x,
        value,
        iterations: options.max_iterations,
        evals,
        converged: false,
    })
}

fn eye(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        out[i] = dot(row, v);
    }
    out
}

/// H <- (I - rho s y') H (I - rho y s') + rho s s'
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    // H' = H - rho (s (Hy)' + (Hy) s') + rho^2 yHy s s' + rho s s'
    let coeff = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coeff * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
    }
}

struct StepResult {
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
}

/// Strong-Wolfe line search (bracket + zoom with bisection/interpolation).
fn line_search<F>(
    objective: &mut F,
    x0: &[f64],
    f0: f64,
    direction: &[f64],
    slope0: f64,
    alpha0: f64,
    evals: &mut usize,
) -> Option<StepResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut alpha_prev = 0.0;
    let mut f_prev = f0;
    let mut alpha = alpha0;
    let mut used = 0usize;
    let mut finite_steps = 0usize;

    while used < MAX_LINE_SEARCH_EVALS {
        let x: Vec<f64> = x0.iter().zip(direction).map(|(xi, di)| xi + alpha * di).collect();
        let mut grad = vec![0.0; n];
        let f = objective(&x, &mut grad);
        *evals += 1;
        used += 1;
        if !f.is_finite() {
            // walked out of the feasible region: pull back toward the last
            // good step
            alpha = alpha_prev + 0.1 * (alpha - alpha_prev);
            if alpha - alpha_prev <= f64::EPSILON * (1.0 + alpha_prev) {
                return None;
            }
            continue;
        }
        let budget = MAX_LINE_SEARCH_EVALS - used;
        if f > f0 + C1 * alpha * slope0 || (f >= f_prev && finite_steps > 0) {
            return zoom(objective, x0, f0, slope0, direction, alpha_prev, f_prev, alpha, budget, evals);
        }
        let slope = dot(&grad, direction);
        if slope.abs() <= -C2 * slope0 {
            return Some(StepResult { x, value: f, grad });
        }
        if slope >= 0.0 {
            return zoom(objective, x0, f0, slope0, direction, alpha, f, alpha_prev, budget, evals);
        }
        alpha_prev = alpha;
        f_prev = f;
        finite_steps += 1;
        alpha *= 2.0;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<F>(
    objective: &mut F,
    x0: &[f64],
    f0: f64,
    slope0: f64,
    direction: &[f64],
    mut alpha_lo: f64,
    mut f_lo: f64,
    mut alpha_hi: f64,
    budget: usize,
    evals: &mut usize,
) -> Option<StepResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    for _ in 0..budget {
        let alpha = 0.5 * (alpha_lo + alpha_hi);
        if (alpha_hi - alpha_lo).abs() <= f64::EPSILON * (1.0 + alpha_lo.abs()) {
            return None;
        }
        let x: Vec<f64> = x0.iter().zip(direction).map(|(xi, di)| xi + alpha * di).collect();
        let mut grad = vec![0.0; n];
        let f = objective(&x, &mut grad);
        *evals += 1;
        if !f.is_finite() || f > f0 + C1 * alpha * slope0 || f >= f_lo {
            alpha_hi = alpha;
        } else {
            let slope = dot(&grad, direction);
            if slope.abs() <= -C2 * slope0 {
                return Some(StepResult { x, value: f, grad });
            }
            if slope * (alpha_hi - alpha_lo) >= 0.0 {
                alpha_hi = alpha_lo;
            }
            alpha_lo = alpha;
            f_lo = f;
        }
    }
    None
}
