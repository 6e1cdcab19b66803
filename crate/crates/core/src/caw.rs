//! Diagonal conditional autoregressive Wishart model for the factor
//! covariance series.
//!
//! Observations are conditionally Wishart, `X(t) | F_{t-1} ~ W_r(nu, S(t)/nu)`,
//! and the scale matrix follows the linear recursion
//!
//! ```text
//! S(t) = C C' + sum_i B_i S(t-i) B_i' + sum_j A_j X(t-j) A_j'
//! ```
//!
//! with diagonal coefficient matrices, giving `(p+q+1) r + 1` free
//! parameters. Estimation maximizes the average Wishart log-density by BFGS
//! over log-transformed parameters, restarted from random initial points;
//! the gradient is computed analytically by backward accumulation through
//! the recursion.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::linalg;
use crate::optim::{self, OptimOptions};

/// Margin above the Wishart existence bound: nu > r - 1 + NU_MARGIN.
pub const NU_MARGIN: f64 = 1e-6;

/// Gradient-norm tolerance in transformed space.
pub const GRAD_TOL: f64 = 1e-6;

/// Iteration cap per restart.
pub const MAX_ITERATIONS: usize = 2000;

/// Random-restart box for the log of each positive diagonal entry.
const INIT_LOG_DIAG: (f64, f64) = (-4.605170185988091, -0.05129329438755058); // [ln 0.01, ln 0.95]

#[derive(Debug, Error)]
pub enum CawError {
    #[error("order (p={p}, q={q}) is invalid: q must be at least 1")]
    BadOrder { p: usize, q: usize },
    #[error("observation {index} is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { index: usize, asymmetry: f64 },
    #[error("observation {index} is not positive definite")]
    NotPositiveDefinite { index: usize },
    #[error("degrees of freedom {nu} must exceed {min}")]
    BadDegreesOfFreedom { nu: f64, min: f64 },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("all {0} restarts failed; first failure: {1}")]
    OptimizationFailed(usize, String),
}

/// Recursion order `(p, q)`: `p` lags of the scale matrix, `q` lags of the
/// observation. `q >= 1` so the dynamics are driven by the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CawOrder {
    p: usize,
    q: usize,
}

impl CawOrder {
    pub fn new(p: usize, q: usize) -> Result<Self, CawError> {
        if q < 1 {
            return Err(CawError::BadOrder { p, q });
        }
        Ok(CawOrder { p, q })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of initialization days, `max(p, q)`.
    pub fn init_days(&self) -> usize {
        self.p.max(self.q)
    }
}

impl std::fmt::Display for CawOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.p, self.q)
    }
}

/// Natural parameters of the diagonal CAW model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CawParams {
    /// Wishart degrees of freedom.
    pub nu: f64,
    /// Diagonal of the intercept factor C.
    pub c_diag: Vec<f64>,
    /// Diagonals of B_1..B_p (scale lags).
    pub b_diags: Vec<Vec<f64>>,
    /// Diagonals of A_1..A_q (observation lags).
    pub a_diags: Vec<Vec<f64>>,
}

impl CawParams {
    pub fn rank(&self) -> usize {
        self.c_diag.len()
    }

    /// Validate shape and positivity against an order and rank.
    pub fn validate(&self, r: usize, order: CawOrder) -> Result<(), CawError> {
        let min = r as f64 - 1.0 + NU_MARGIN;
        if !(self.nu > min) {
            return Err(CawError::BadDegreesOfFreedom { nu: self.nu, min });
        }
        if self.c_diag.len() != r {
            return Err(CawError::BadParams(format!(
                "c_diag has length {}, expected {r}",
                self.c_diag.len()
            )));
        }
        if self.b_diags.len() != order.p() || self.a_diags.len() != order.q() {
            return Err(CawError::BadParams(format!(
                "expected {} B and {} A diagonals, got {} and {}",
                order.p(),
                order.q(),
                self.b_diags.len(),
                self.a_diags.len()
            )));
        }
        let all = self
            .c_diag
            .iter()
            .chain(self.b_diags.iter().flatten())
            .chain(self.a_diags.iter().flatten());
        for &v in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CawError::BadParams(format!("diagonal entry {v} is not positive")));
            }
        }
        for diag in self.b_diags.iter().chain(self.a_diags.iter()) {
            if diag.len() != r {
                return Err(CawError::BadParams(format!(
                    "coefficient diagonal has length {}, expected {r}",
                    diag.len()
                )));
            }
        }
        Ok(())
    }

    /// Per-coordinate stationarity diagnostic `sum_j a_j^2 + sum_i b_i^2`.
    /// Values below one indicate a stationary recursion in that coordinate.
    /// Reported, never enforced.
    pub fn stationarity_diagnostic(&self) -> Vec<f64> {
        let r = self.rank();
        (0..r)
            .map(|k| {
                self.a_diags.iter().map(|a| a[k] * a[k]).sum::<f64>()
                    + self.b_diags.iter().map(|b| b[k] * b[k]).sum::<f64>()
            })
            .collect()
    }

    /// Flatten to the transformed (unconstrained) vector.
    fn encode(&self) -> Vec<f64> {
        let r = self.rank();
        let nu_min = r as f64 - 1.0 + NU_MARGIN;
        let mut phi = Vec::with_capacity(1 + (1 + self.b_diags.len() + self.a_diags.len()) * r);
        phi.push((self.nu - nu_min).ln());
        for &c in &self.c_diag {
            phi.push(c.ln());
        }
        for b in &self.b_diags {
            for &v in b {
                phi.push(v.ln());
            }
        }
        for a in &self.a_diags {
            for &v in a {
                phi.push(v.ln());
            }
        }
        phi
    }

    fn decode(phi: &[f64], r: usize, order: CawOrder) -> CawParams {
        let nu_min = r as f64 - 1.0 + NU_MARGIN;
        let nu = nu_min + phi[0].exp();
        let mut at = 1usize;
        let take = |count: usize, at: &mut usize| -> Vec<f64> {
            let out = phi[*at..*at + count].iter().map(|v| v.exp()).collect();
            *at += count;
            out
        };
        let c_diag = take(r, &mut at);
        let b_diags = (0..order.p()).map(|_| take(r, &mut at)).collect();
        let a_diags = (0..order.q()).map(|_| take(r, &mut at)).collect();
        CawParams { nu, c_diag, b_diags, a_diags }
    }
}

/// Number of free parameters of the diagonal CAW(p, q) model with `r`
/// factors: `(p + q + 1) r + 1`.
pub fn count_params(order: CawOrder, r: usize) -> usize {
    (order.p() + order.q() + 1) * r + 1
}

/// Outcome of one optimization restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub loglik: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: Option<f64>,
    pub error: Option<String>,
}

/// Fitted model: best-of-restarts maximum-likelihood parameters.
#[derive(Debug, Clone)]
pub struct CawFit {
    pub params: CawParams,
    pub order: CawOrder,
    /// Average per-day log-likelihood at `params` (initialization days
    /// excluded from the average).
    pub loglik: f64,
    /// Scale series S(t) at the fitted parameters, one per observation day.
    pub scale_series: Vec<DMatrix<f64>>,
    pub restarts_run: usize,
    /// Whether the winning restart met the gradient tolerance.
    pub converged: bool,
    pub restarts: Vec<RestartSummary>,
}

// ---------------------------------------------------------------------------
// Flat likelihood engine
//
// Observations are copied once into a flat row-major buffer; every
// evaluation of the likelihood and its gradient then runs allocation-free
// on preallocated workspaces. Matrices here are tiny (r <= ~6), so the
// Cholesky, inverse and products are hand-rolled.
// ---------------------------------------------------------------------------

struct Engine {
    r: usize,
    p: usize,
    q: usize,
    t_len: usize,
    /// max(p, q): days used to initialize the recursion.
    m: usize,
    /// T x (r*r) observations, row-major.
    obs: Vec<f64>,
    /// sum of ln|X(t)| over the likelihood days t = m..T-1.
    sum_logdet_obs: f64,
}

struct Workspace {
    coef: Vec<f64>,
    dcoef: Vec<f64>,
    s: Vec<f64>,
    gbar: Vec<f64>,
    chol: Vec<f64>,
    sinv: Vec<f64>,
    tmp1: Vec<f64>,
    tmp2: Vec<f64>,
}

impl Engine {
    fn new(observations: &[DMatrix<f64>], order: CawOrder) -> Result<Engine, CawError> {
        let t_len = observations.len();
        let m = order.init_days();
        if t_len < m + 1 {
            return Err(CawError::TooFewObservations { needed: m + 1, got: t_len });
        }
        let r = observations[0].nrows();
        if r == 0 {
            return Err(CawError::InvalidArgument("empty observation matrices".to_string()));
        }
        let rr = r * r;
        let mut obs = vec![0.0; t_len * rr];
        for (t, x) in observations.iter().enumerate() {
            if x.nrows() != r || x.ncols() != r {
                return Err(CawError::InvalidArgument(format!(
                    "observation {t} is {}x{}, expected {r}x{r}",
                    x.nrows(),
                    x.ncols()
                )));
            }
            let asym = linalg::asymmetry(x);
            if asym > 1e-8 * (1.0 + x.amax()) {
                return Err(CawError::NotSymmetric { index: t, asymmetry: asym });
            }
            for k in 0..r {
                for l in 0..r {
                    obs[t * rr + k * r + l] = 0.5 * (x[(k, l)] + x[(l, k)]);
                }
            }
        }
        // SPD check and log-determinants in one Cholesky pass
        let mut chol = vec![0.0; rr];
        let mut sum_logdet_obs = 0.0;
        for t in 0..t_len {
            if !chol_flat(&obs[t * rr..(t + 1) * rr], r, &mut chol) {
                return Err(CawError::NotPositiveDefinite { index: t });
            }
            if t >= m {
                sum_logdet_obs += 2.0 * (0..r).map(|k| chol[k * r + k].ln()).sum::<f64>();
            }
        }
        Ok(Engine { r, p: order.p(), q: order.q(), t_len, m, obs, sum_logdet_obs })
    }

    fn dim(&self) -> usize {
        1 + (1 + self.p + self.q) * self.r
    }

    fn workspace(&self) -> Workspace {
        let rr = self.r * self.r;
        let ncoef = (1 + self.p + self.q) * self.r;
        Workspace {
            coef: vec![0.0; ncoef],
            dcoef: vec![0.0; ncoef],
            s: vec![0.0; self.t_len * rr],
            gbar: vec![0.0; self.t_len * rr],
            chol: vec![0.0; rr],
            sinv: vec![0.0; rr],
            tmp1: vec![0.0; rr],
            tmp2: vec![0.0; rr],
        }
    }

    /// Negative average log-likelihood and its gradient in transformed
    /// space. Returns infinity at infeasible points.
    fn eval(&self, phi: &[f64], grad: &mut [f64], ws: &mut Workspace) -> f64 {
        let (r, p, q) = (self.r, self.p, self.q);
        let rr = r * r;
        let rf = r as f64;
        let nu_min = rf - 1.0 + NU_MARGIN;
        let nu = nu_min + phi[0].exp();
        if !(nu > nu_min) || !nu.is_finite() {
            return f64::INFINITY;
        }
        for (dst, &src) in ws.coef.iter_mut().zip(&phi[1..]) {
            *dst = src.exp();
            if !(*dst > 0.0) || !dst.is_finite() {
                return f64::INFINITY;
            }
        }

        // forward recursion
        for e in 0..self.m * rr {
            ws.s[e] = self.obs[e];
        }
        for t in self.m..self.t_len {
            for k in 0..r {
                for l in 0..=k {
                    let mut v = if k == l { ws.coef[k] * ws.coef[k] } else { 0.0 };
                    for i in 1..=p {
                        let b = &ws.coef[i * r..];
                        v += b[k] * b[l] * ws.s[(t - i) * rr + k * r + l];
                    }
                    for j in 1..=q {
                        let a = &ws.coef[(p + j) * r..];
                        v += a[k] * a[l] * self.obs[(t - j) * rr + k * r + l];
                    }
                    ws.s[t * rr + k * r + l] = v;
                    ws.s[t * rr + l * r + k] = v;
                }
            }
        }

        // per-day terms and the dL/dS adjoint seeds
        let mut sum_logdet_s = 0.0;
        let mut sum_tr = 0.0;
        for e in ws.gbar.iter_mut() {
            *e = 0.0;
        }
        for t in self.m..self.t_len {
            let s_t = &ws.s[t * rr..(t + 1) * rr];
            let x_t = &self.obs[t * rr..(t + 1) * rr];
            if !chol_flat(s_t, r, &mut ws.chol) {
                return f64::INFINITY;
            }
            sum_logdet_s += 2.0 * (0..r).map(|k| ws.chol[k * r + k].ln()).sum::<f64>();
            chol_inverse(&ws.chol, r, &mut ws.sinv, &mut ws.tmp1);
            let mut tr = 0.0;
            for e in 0..rr {
                tr += ws.sinv[e] * x_t[e];
            }
            sum_tr += tr;
            matmul(&ws.sinv, x_t, &mut ws.tmp1, r);
            matmul(&ws.tmp1, &ws.sinv, &mut ws.tmp2, r);
            let g_t = &mut ws.gbar[t * rr..(t + 1) * rr];
            for e in 0..rr {
                g_t[e] = 0.5 * nu * (ws.tmp2[e] - ws.sinv[e]);
            }
        }
        if !(sum_logdet_s.is_finite() && sum_tr.is_finite()) {
            return f64::INFINITY;
        }

        let n_days = (self.t_len - self.m) as f64;
        let mut lngamma_sum = 0.0;
        let mut digamma_sum = 0.0;
        for i in 1..=r {
            let arg = 0.5 * (nu + 1.0 - i as f64);
            lngamma_sum += ln_gamma(arg);
            digamma_sum += digamma(arg);
        }
        let ln2 = std::f64::consts::LN_2;
        let lnpi = std::f64::consts::PI.ln();
        let const_terms =
            -(nu * rf / 2.0) * ln2 - (rf * (rf - 1.0) / 4.0) * lnpi - lngamma_sum + (nu * rf / 2.0) * nu.ln();
        let loglik_total = n_days * const_terms - 0.5 * nu * sum_logdet_s
            + 0.5 * (nu - rf - 1.0) * self.sum_logdet_obs
            - 0.5 * nu * sum_tr;

        // backward pass: finish each adjoint, harvest parameter gradients,
        // then push the B-lag contributions onto earlier scale matrices
        for e in ws.dcoef.iter_mut() {
            *e = 0.0;
        }
        for t in (self.m..self.t_len).rev() {
            for k in 0..r {
                let sbar_kk = ws.gbar[t * rr + k * r + k];
                ws.dcoef[k] += 2.0 * ws.coef[k] * sbar_kk;
                for i in 1..=p {
                    let b = &ws.coef[i * r..(i + 1) * r];
                    let mut acc = 0.0;
                    for l in 0..r {
                        acc += ws.s[(t - i) * rr + k * r + l] * b[l] * ws.gbar[t * rr + l * r + k];
                    }
                    ws.dcoef[i * r + k] += 2.0 * acc;
                }
                for j in 1..=q {
                    let a = &ws.coef[(p + j) * r..(p + j + 1) * r];
                    let mut acc = 0.0;
                    for l in 0..r {
                        acc += self.obs[(t - j) * rr + k * r + l] * a[l] * ws.gbar[t * rr + l * r + k];
                    }
                    ws.dcoef[(p + j) * r + k] += 2.0 * acc;
                }
            }
            for i in 1..=p {
                if t - i >= self.m {
                    let b = &ws.coef[i * r..(i + 1) * r];
                    for k in 0..r {
                        for l in 0..r {
                            let w = b[k] * b[l] * ws.gbar[t * rr + k * r + l];
                            ws.gbar[(t - i) * rr + k * r + l] += w;
                        }
                    }
                }
            }
        }

        let dnu = n_days * (-(rf / 2.0) * ln2 - 0.5 * digamma_sum + (rf / 2.0) * nu.ln() + rf / 2.0)
            - 0.5 * sum_logdet_s
            + 0.5 * self.sum_logdet_obs
            - 0.5 * sum_tr;

        // chain rule to transformed space, flip sign, average
        grad[0] = -dnu * (nu - nu_min) / n_days;
        for idx in 0..ws.coef.len() {
            grad[1 + idx] = -ws.dcoef[idx] * ws.coef[idx] / n_days;
        }
        -loglik_total / n_days
    }
}

/// Cholesky of a flat row-major SPD matrix; returns false when a pivot is
/// not strictly positive.
fn chol_flat(a: &[f64], n: usize, l: &mut [f64]) -> bool {
    for k in 0..n {
        for j in 0..=k {
            let mut sum = a[k * n + j];
            for i in 0..j {
                sum -= l[k * n + i] * l[j * n + i];
            }
            if k == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return false;
                }
                l[k * n + k] = sum.sqrt();
            } else {
                l[k * n + j] = sum / l[j * n + j];
            }
        }
        for j in (k + 1)..n {
            l[k * n + j] = 0.0;
        }
    }
    true
}

/// Inverse from a Cholesky factor: solves L L' out = I column by column.
fn chol_inverse(l: &[f64], n: usize, out: &mut [f64], scratch: &mut [f64]) {
    for col in 0..n {
        for i in 0..n {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l[i * n + k] * scratch[k];
            }
            scratch[i] = sum / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = scratch[i];
            for k in (i + 1)..n {
                sum -= l[k * n + i] * out[k * n + col];
            }
            out[i * n + col] = sum / l[i * n + i];
        }
    }
}

fn matmul(a: &[f64], b: &[f64], out: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

/// Run the scale recursion at fixed parameters.
///
/// The first `max(p, q)` scale matrices are set equal to the corresponding
/// observations; later ones follow the recursion. Every returned matrix
/// dominates `C C'` in the positive-semidefinite order.
pub fn scaling_recursion(
    params: &CawParams,
    observations: &[DMatrix<f64>],
    order: CawOrder,
) -> Result<Vec<DMatrix<f64>>, CawError> {
    let r = params.rank();
    params.validate(r, order)?;
    let m = order.init_days();
    if observations.len() < m + 1 {
        return Err(CawError::TooFewObservations { needed: m + 1, got: observations.len() });
    }
    for (t, x) in observations.iter().enumerate() {
        if x.nrows() != r || x.ncols() != r {
            return Err(CawError::InvalidArgument(format!(
                "observation {t} is {}x{}, expected {r}x{r}",
                x.nrows(),
                x.ncols()
            )));
        }
        if nalgebra::Cholesky::new(linalg::symmetrize(x)).is_none() {
            return Err(CawError::NotPositiveDefinite { index: t });
        }
    }
    let obs = observations;
    let mut scales: Vec<DMatrix<f64>> = Vec::with_capacity(obs.len());
    scales.extend(obs[..m].iter().cloned());
    for t in m..obs.len() {
        let mut s = DMatrix::zeros(r, r);
        for k in 0..r {
            s[(k, k)] = params.c_diag[k] * params.c_diag[k];
        }
        for (i, b) in params.b_diags.iter().enumerate() {
            let lagged = &scales[t - i - 1];
            for k in 0..r {
                for l in 0..r {
                    s[(k, l)] += b[k] * b[l] * lagged[(k, l)];
                }
            }
        }
        for (j, a) in params.a_diags.iter().enumerate() {
            let lagged = &obs[t - j - 1];
            for k in 0..r {
                for l in 0..r {
                    s[(k, l)] += a[k] * a[l] * lagged[(k, l)];
                }
            }
        }
        scales.push(s);
    }
    Ok(scales)
}

/// Average per-day Wishart log-likelihood of the observations under the
/// model, Eq-style: the multivariate-gamma constant, `-(nu/2) ln|S(t)/nu|`,
/// `((nu-r-1)/2) ln|X(t)|` and `-(1/2) tr(nu S(t)^{-1} X(t))` summed over
/// the days past initialization and divided by their count.
pub fn loglik(
    params: &CawParams,
    observations: &[DMatrix<f64>],
    order: CawOrder,
) -> Result<f64, CawError> {
    let r = params.rank();
    params.validate(r, order)?;
    let engine = Engine::new(observations, order)?;
    if engine.r != r {
        return Err(CawError::InvalidArgument(format!(
            "observations are {}x{} but params have rank {r}",
            engine.r, engine.r
        )));
    }
    let phi = params.encode();
    let mut ws = engine.workspace();
    let mut grad = vec![0.0; engine.dim()];
    let value = engine.eval(&phi, &mut grad, &mut ws);
    if !value.is_finite() {
        return Err(CawError::InvalidArgument(
            "likelihood is not finite at the given parameters".to_string(),
        ));
    }
    Ok(-value)
}

/// Analytic gradient of [`loglik`] with respect to the transformed
/// parameter vector `(ln(nu - nu_min), ln c, ln b, ln a)`. Exposed for
/// verification against finite differences.
pub fn loglik_grad_transformed(
    params: &CawParams,
    observations: &[DMatrix<f64>],
    order: CawOrder,
) -> Result<Vec<f64>, CawError> {
    let r = params.rank();
    params.validate(r, order)?;
    let engine = Engine::new(observations, order)?;
    let phi = params.encode();
    let mut ws = engine.workspace();
    let mut grad = vec![0.0; engine.dim()];
    let value = engine.eval(&phi, &mut grad, &mut ws);
    if !value.is_finite() {
        return Err(CawError::InvalidArgument(
            "likelihood is not finite at the given parameters".to_string(),
        ));
    }
    // engine minimizes -loglik; flip to the loglik gradient
    Ok(grad.iter().map(|g| -g).collect())
}

/// Maximum-likelihood fit by BFGS with random restarts.
///
/// Each restart draws its starting point from an independent RNG stream
/// derived from `(seed, restart_index)`, so results are reproducible and
/// independent of scheduling. The best restart by log-likelihood wins,
/// ties broken by index.
pub fn fit(
    observations: &[DMatrix<f64>],
    order: CawOrder,
    restarts: usize,
    seed: u64,
) -> Result<CawFit, CawError> {
    if restarts < 1 {
        return Err(CawError::InvalidArgument("restarts must be at least 1".to_string()));
    }
    let m = order.init_days();
    if observations.len() < m + 2 {
        return Err(CawError::TooFewObservations { needed: m + 2, got: observations.len() });
    }
    // Optimize on diagonal-mean-normalized data so the restart boxes are
    // scale-free; the intercept maps back exactly (c -> c sqrt(scale)) and
    // the reported likelihood is recomputed on the original scale.
    let r_dim = observations[0].nrows();
    let scale = observations
        .iter()
        .map(|x| (0..x.nrows().min(x.ncols())).map(|k| x[(k, k)]).sum::<f64>())
        .sum::<f64>()
        / (observations.len() * r_dim.max(1)) as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(CawError::InvalidArgument(format!(
            "observations have non-positive mean diagonal {scale}"
        )));
    }
    let normalized: Vec<DMatrix<f64>> = observations.iter().map(|x| x / scale).collect();
    let engine = Engine::new(&normalized, order)?;
    let r = engine.r;
    let dim = engine.dim();
    let nu_min = r as f64 - 1.0 + NU_MARGIN;
    let options = OptimOptions { grad_tol: GRAD_TOL, max_iterations: MAX_ITERATIONS };

    let outcomes: Vec<(RestartSummary, Option<(Vec<f64>, f64)>)> = (0..restarts)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let mut phi0 = vec![0.0; dim];
            let nu_init: f64 = rng.random_range(r as f64 + 1.0..r as f64 + 30.0);
            phi0[0] = (nu_init - nu_min).ln();
            for slot in phi0[1..].iter_mut() {
                *slot = rng.random_range(INIT_LOG_DIAG.0..INIT_LOG_DIAG.1);
            }
            let mut ws = engine.workspace();
            let mut objective = |x: &[f64], g: &mut [f64]| engine.eval(x, g, &mut ws);
            match optim::minimize(&mut objective, &phi0, &options) {
                Ok(out) => {
                    let summary = RestartSummary {
                        index,
                        loglik: Some(-out.value),
                        converged: out.converged,
                        iterations: out.iterations,
                        grad_norm: Some(out.grad_norm),
                        error: None,
                    };
                    (summary, Some((out.x, -out.value)))
                }
                Err(err) => {
                    let summary = RestartSummary {
                        index,
                        loglik: None,
                        converged: false,
                        iterations: 0,
                        grad_norm: None,
                        error: Some(err.to_string()),
                    };
                    (summary, None)
                }
            }
        })
        .collect();

    let summaries: Vec<RestartSummary> = outcomes.iter().map(|(s, _)| s.clone()).collect();
    let best = outcomes
        .iter()
        .filter_map(|(s, payload)| payload.as_ref().map(|(x, ll)| (s.index, x, *ll, s.converged)))
        .fold(None::<(usize, &Vec<f64>, f64, bool)>, |acc, cand| match acc {
            None => Some(cand),
            Some(best) if cand.2 > best.2 => Some(cand),
            Some(best) => Some(best),
        });

    let Some((_, best_phi, _, best_converged)) = best else {
        let first_error = summaries
            .iter()
            .find_map(|s| s.error.clone())
            .unwrap_or_else(|| "unknown".to_string());
        return Err(CawError::OptimizationFailed(restarts, first_error));
    };

    let mut params = CawParams::decode(best_phi, r, order);
    for c in params.c_diag.iter_mut() {
        *c *= scale.sqrt();
    }
    let loglik = loglik(&params, observations, order)?;
    let scale_series = scaling_recursion(&params, observations, order)?;
    Ok(CawFit {
        params,
        order,
        loglik,
        scale_series,
        restarts_run: restarts,
        converged: best_converged,
        restarts: summaries,
    })
}

/// Multi-step conditional-expectation forecast.
///
/// One step ahead the forecast is the recursion value `S(T+1)`; further
/// steps substitute earlier forecasts for the unobserved matrices, which is
/// exact because the recursion is linear and `E[X | F] = S`.
pub fn forecast(
    fit: &CawFit,
    observations: &[DMatrix<f64>],
    horizon: usize,
) -> Result<Vec<DMatrix<f64>>, CawError> {
    if horizon < 1 {
        return Err(CawError::InvalidArgument("horizon must be at least 1".to_string()));
    }
    let params = &fit.params;
    let order = fit.order;
    let r = params.rank();
    let scales = scaling_recursion(params, observations, order)?;
    let t_len = observations.len();
    let mut x_ext: Vec<DMatrix<f64>> = observations.to_vec();
    let mut s_ext = scales;
    let mut out = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let t = t_len + step;
        let mut s = DMatrix::zeros(r, r);
        for k in 0..r {
            s[(k, k)] = params.c_diag[k] * params.c_diag[k];
        }
        for (i, b) in params.b_diags.iter().enumerate() {
            let lagged = &s_ext[t - i - 1];
            for k in 0..r {
                for l in 0..r {
                    s[(k, l)] += b[k] * b[l] * lagged[(k, l)];
                }
            }
        }
        for (j, a) in params.a_diags.iter().enumerate() {
            let lagged = &x_ext[t - j - 1];
            for k in 0..r {
                for l in 0..r {
                    s[(k, l)] += a[k] * a[l] * lagged[(k, l)];
                }
            }
        }
        x_ext.push(s.clone());
        s_ext.push(s.clone());
        out.push(s);
    }
    Ok(out)
}
