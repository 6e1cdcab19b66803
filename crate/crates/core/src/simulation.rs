//! Synthetic data generators: the verification oracles for every estimator
//! in the crate.
//!
//! Three levels are provided. `sample_wishart` draws single Wishart
//! matrices by the Bartlett construction; `simulate_caw` iterates the CAW
//! recursion with Wishart feedback; `simulate_panel` wraps a simulated
//! factor series in the factor model plus symmetric observation noise,
//! standing in for realized-covariance estimation error. A tick-level
//! simulator (latent diffusion plus i.i.d. noise on asynchronous stamps)
//! supports end-to-end pipeline tests at small dimension.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caw::{CawError, CawOrder, CawParams};
use crate::linalg;
use crate::market_data::{TickRecord, TickSeries};
use crate::rcov::{psd_repair_matrix, CovMatrix, CovMatrixSeries};
use crate::DayId;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("degrees of freedom {nu} must exceed {min}")]
    BadDegreesOfFreedom { nu: f64, min: f64 },
    #[error("scale matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid scenario: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Caw(#[from] CawError),
}

/// RNG stream tags; every stochastic piece of a scenario owns one.
mod stream {
    pub const FACTOR_SERIES: u64 = 1;
    pub const LOADINGS: u64 = 2;
    pub const SIGMA0: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const TICKS: u64 = 5;
}

fn default_burn_in() -> usize {
    500
}

/// Scenario for panel simulation: a CAW factor process of rank `r` wrapped
/// into `d`-dimensional daily matrices with noise scale `noise_scale`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub d: usize,
    pub r: usize,
    pub t_days: usize,
    pub order: CawOrder,
    pub params: CawParams,
    /// Scale of the symmetric observation noise (epsilon).
    pub noise_scale: f64,
    /// Spectral-norm bound for the residual matrix Sigma_0.
    pub sigma0_scale: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.r < 1 || self.d < self.r {
            return Err(SimError::BadConfig(format!("need d >= r >= 1, got d={} r={}", self.d, self.r)));
        }
        if self.t_days < 1 {
            return Err(SimError::BadConfig("t_days must be positive".to_string()));
        }
        if !(self.noise_scale >= 0.0) || !(self.sigma0_scale >= 0.0) {
            return Err(SimError::BadConfig("noise and sigma0 scales must be non-negative".to_string()));
        }
        self.params.validate(self.r, self.order)?;
        Ok(())
    }
}

/// Draw from `W_r(nu, scale / nu)` so that the mean of the draw is `scale`.
///
/// Bartlett construction: a lower-triangular factor with chi-distributed
/// diagonal (`chi_{nu - i + 1}` for the i-th row, non-integer `nu`
/// supported) and standard-normal subdiagonal, rotated by the Cholesky
/// factor of `scale / nu`.
pub fn sample_wishart<R: Rng + ?Sized>(
    nu: f64,
    scale: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>, SimError> {
    let r = scale.nrows();
    let min = r as f64 - 1.0;
    if !(nu > min) {
        return Err(SimError::BadDegreesOfFreedom { nu, min });
    }
    let chol = nalgebra::Cholesky::new(linalg::symmetrize(scale) / nu)
        .ok_or(SimError::NotPositiveDefinite)?;
    let mut lower = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..i {
            lower[(i, j)] = StandardNormal.sample(rng);
        }
        let dof = nu - i as f64;
        let chi2 = ChiSquared::new(dof).expect("dof checked above");
        lower[(i, i)] = chi2.sample(rng).sqrt();
    }
    let half = chol.l() * lower;
    Ok(linalg::symmetrize(&(&half * half.transpose())))
}

/// Iterate the CAW recursion with Wishart feedback and drop the burn-in.
pub fn simulate_caw(config: &SimConfig) -> Result<Vec<DMatrix<f64>>, SimError> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(stream::FACTOR_SERIES);
    simulate_caw_with_rng(&config.params, config.order, config.t_days, config.burn_in, &mut rng)
}

/// [`simulate_caw`] with a caller-supplied RNG.
pub fn simulate_caw_with_rng<R: Rng + ?Sized>(
    params: &CawParams,
    order: CawOrder,
    t_days: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>, SimError> {
    let r = params.rank();
    params.validate(r, order)?;
    let m = order.init_days();
    let intercept = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        r,
        params.c_diag.iter().map(|c| c * c),
    ));
    // histories start at the intercept; the burn-in washes the choice out
    let mut x_hist: Vec<DMatrix<f64>> = vec![intercept.clone(); m.max(1)];
    let mut s_hist: Vec<DMatrix<f64>> = vec![intercept.clone(); m.max(1)];
    let mut out = Vec::with_capacity(t_days);
    for step in 0..burn_in + t_days {
        let mut s = intercept.clone();
        for (i, b) in params.b_diags.iter().enumerate() {
            let lagged = &s_hist[s_hist.len() - 1 - i];
            for k in 0..r {
                for l in 0..r {
                    s[(k, l)] += b[k] * b[l] * lagged[(k, l)];
                }
            }
        }
        for (j, a) in params.a_diags.iter().enumerate() {
            let lagged = &x_hist[x_hist.len() - 1 - j];
            for k in 0..r {
                for l in 0..r {
                    s[(k, l)] += a[k] * a[l] * lagged[(k, l)];
                }
            }
        }
        let x = sample_wishart(params.nu, &s, rng)?;
        s_hist.remove(0);
        s_hist.push(s);
        x_hist.remove(0);
        x_hist.push(x.clone());
        if step >= burn_in {
            out.push(x);
        }
    }
    Ok(out)
}

/// A simulated panel together with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub series: CovMatrixSeries,
    /// True orthonormal loadings used to build the panel.
    pub loadings: DMatrix<f64>,
    /// True residual matrix.
    pub sigma0: DMatrix<f64>,
    /// True factor covariance series.
    pub factor_series: Vec<DMatrix<f64>>,
}

/// Build a daily covariance panel `A F(t) A' + Sigma_0 + eps * E(t)` from a
/// simulated factor series, with `E(t)` symmetric Gaussian noise, and
/// PSD-repair each day.
///
/// All randomness is drawn from fixed streams of the scenario seed, so two
/// scenarios differing only in `noise_scale` share the identical loadings,
/// residual, factor path and noise directions.
pub fn simulate_panel(config: &SimConfig) -> Result<SimulatedPanel, SimError> {
    config.validate()?;
    let d = config.d;
    let r = config.r;

    let factor_series = simulate_caw(config)?;

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(stream::LOADINGS);
    let loadings = random_orthonormal(d, r, &mut rng);

    rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(stream::SIGMA0);
    let sigma0 = random_spd_bounded(d, config.sigma0_scale, &mut rng);

    rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(stream::NOISE);
    let mut days = Vec::with_capacity(config.t_days);
    for (t, f) in factor_series.iter().enumerate() {
        let mut noise = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                noise[(i, j)] = StandardNormal.sample(&mut rng);
            }
        }
        let noise = linalg::symmetrize(&noise);
        let raw = &loadings * f * loadings.transpose() + &sigma0 + config.noise_scale * noise;
        let repaired = psd_repair_matrix(&linalg::symmetrize(&raw));
        days.push(
            CovMatrix::new(DayId(t as u32 + 1), repaired)
                .expect("simulated matrix is symmetric by construction"),
        );
    }
    let registry = (0..d).map(|i| format!("SIM{i:02}")).collect();
    let series = CovMatrixSeries::new(registry, days).expect("uniform simulated series");
    Ok(SimulatedPanel { series, loadings, sigma0, factor_series })
}

/// Thin orthonormal basis from the QR of a Gaussian matrix, columns
/// sign-fixed to have a positive largest-magnitude entry.
fn random_orthonormal<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(d, r, |_, _| StandardNormal.sample(rng));
    let q = gauss.qr().q();
    let mut out = q.columns(0, r).into_owned();
    for j in 0..r {
        let col: Vec<f64> = out.column(j).iter().copied().collect();
        let lead = linalg::argmax_abs(&col);
        if out[(lead, j)] < 0.0 {
            for i in 0..d {
                out[(i, j)] = -out[(i, j)];
            }
        }
    }
    out
}

/// Random SPD matrix with spectral norm in `[scale/2, scale]`.
fn random_spd_bounded<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let basis = random_orthonormal(d, d, rng);
    let eigs: Vec<f64> = (0..d).map(|_| scale * rng.random_range(0.5..1.0)).collect();
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigs));
    linalg::symmetrize(&(&basis * diag * basis.transpose()))
}

/// Tick-level scenario: latent log-price diffusion observed with noise at
/// asynchronous times. Euler steps of one second across the session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TickSimConfig {
    pub assets: Vec<String>,
    pub day: DayId,
    pub session_open_sec: f64,
    pub session_close_sec: f64,
    /// Integrated covariance of log prices over the whole session,
    /// row-major d x d.
    pub daily_cov: Vec<Vec<f64>>,
    /// Initial log prices, one per asset.
    pub start_log_prices: Vec<f64>,
    /// Per-second probability that an asset trades.
    pub tick_probability: f64,
    /// Standard deviation of the microstructure noise on log prices.
    pub noise_sd: f64,
    pub seed: u64,
}

/// Simulate asynchronous noisy ticks for every asset of the scenario.
pub fn simulate_ticks(config: &TickSimConfig) -> Result<Vec<TickSeries>, SimError> {
    let d = config.assets.len();
    if d == 0 || config.start_log_prices.len() != d {
        return Err(SimError::BadConfig("assets and start prices must align".to_string()));
    }
    if !(config.tick_probability > 0.0 && config.tick_probability <= 1.0) {
        return Err(SimError::BadConfig("tick_probability must lie in (0, 1]".to_string()));
    }
    let seconds = (config.session_close_sec - config.session_open_sec) as usize;
    if seconds < 2 {
        return Err(SimError::BadConfig("session must span at least two seconds".to_string()));
    }
    if config.daily_cov.len() != d || config.daily_cov.iter().any(|row| row.len() != d) {
        return Err(SimError::BadConfig(format!("daily_cov must be {d}x{d}")));
    }
    let cov = DMatrix::from_fn(d, d, |i, j| config.daily_cov[i][j]);
    let step_chol = nalgebra::Cholesky::new(linalg::symmetrize(&cov) / seconds as f64)
        .ok_or(SimError::NotPositiveDefinite)?;

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(stream::TICKS);
    let mut log_prices = nalgebra::DVector::from_vec(config.start_log_prices.clone());
    let mut ticks: Vec<Vec<TickRecord>> = vec![Vec::new(); d];
    for s in 0..=seconds {
        if s > 0 {
            let z = nalgebra::DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            log_prices += step_chol.l() * z;
        }
        let stamp = config.session_open_sec + s as f64;
        for i in 0..d {
            let trades = s == 0 || rng.random::<f64>() < config.tick_probability;
            if trades {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let observed = log_prices[i] + config.noise_sd * eps;
                ticks[i].push(TickRecord { timestamp_sec: stamp, price: observed.exp() });
            }
        }
    }
    Ok(config
        .assets
        .iter()
        .zip(ticks)
        .map(|(asset, t)| TickSeries { asset_id: asset.clone(), day_id: config.day, ticks: t })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stationary_config(seed: u64) -> SimConfig {
        SimConfig {
            d: 6,
            r: 2,
            t_days: 300,
            order: CawOrder::new(1, 1).unwrap(),
            params: CawParams {
                nu: 10.0,
                c_diag: vec![0.3, 0.45],
                b_diags: vec![vec![0.7, 0.65]],
                a_diags: vec![vec![0.5, 0.55]],
            },
            noise_scale: 0.01,
            sigma0_scale: 0.1,
            burn_in: 500,
            seed,
        }
    }

    #[test]
    fn wishart_needs_enough_dof() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let scale = DMatrix::identity(3, 3);
        assert!(matches!(
            sample_wishart(2.0, &scale, &mut rng),
            Err(SimError::BadDegreesOfFreedom { .. })
        ));
        assert!(sample_wishart(2.5, &scale, &mut rng).is_ok());
    }

    #[test]
    fn wishart_draws_are_spd() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let scale = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
        for _ in 0..200 {
            let w = sample_wishart(3.5, &scale, &mut rng).unwrap();
            assert!(nalgebra::Cholesky::new(w).is_some());
        }
    }

    #[test]
    fn wishart_scalar_moments() {
        // r=1, scale s: mean s, variance 2 s^2 / nu
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let scale = DMatrix::from_element(1, 1, 2.0);
        let nu = 5.0;
        let n = 20_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_wishart(nu, &scale, &mut rng).unwrap()[(0, 0)])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (2.0 * 4.0 / nu / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 4.0 * se_mean, "mean {mean}");
        assert_relative_eq!(var, 2.0 * 4.0 / nu, max_relative = 0.1);
    }

    #[test]
    fn caw_series_is_reproducible() {
        let config = stationary_config(7);
        let a = simulate_caw(&config).unwrap();
        let b = simulate_caw(&config).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn caw_long_run_mean_matches_fixed_point() {
        let mut config = stationary_config(11);
        config.t_days = 20_000;
        let series = simulate_caw(&config).unwrap();
        // scalar stationary mean per coordinate: c^2 / (1 - a^2 - b^2)
        let p = &config.params;
        for k in 0..2 {
            let expect = p.c_diag[k].powi(2) / (1.0 - p.a_diags[0][k].powi(2) - p.b_diags[0][k].powi(2));
            let mean: f64 = series.iter().map(|x| x[(k, k)]).sum::<f64>() / series.len() as f64;
            assert_relative_eq!(mean, expect, max_relative = 0.1);
        }
    }

    #[test]
    fn intercept_only_dynamics_center_on_intercept() {
        let mut config = stationary_config(3);
        config.params.a_diags = vec![vec![1e-6, 1e-6]];
        config.params.b_diags = vec![vec![1e-6, 1e-6]];
        config.t_days = 4000;
        let series = simulate_caw(&config).unwrap();
        for k in 0..2 {
            let expect = config.params.c_diag[k].powi(2);
            let mean: f64 = series.iter().map(|x| x[(k, k)]).sum::<f64>() / series.len() as f64;
            assert_relative_eq!(mean, expect, max_relative = 0.05);
        }
    }

    #[test]
    fn panel_reconstructs_exact_model_when_clean() {
        let mut config = stationary_config(5);
        config.noise_scale = 0.0;
        config.t_days = 60;
        let panel = simulate_panel(&config).unwrap();
        // loadings orthonormal
        let gram = panel.loadings.transpose() * &panel.loadings;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-10);
        // each day equals A F A' + Sigma_0 exactly
        for (t, day) in panel.series.days().iter().enumerate() {
            let expect =
                &panel.loadings * &panel.factor_series[t] * panel.loadings.transpose() + &panel.sigma0;
            assert!((day.values() - expect).amax() < 1e-9);
        }
    }

    #[test]
    fn panel_noise_streams_are_shared_across_scales() {
        let mut a = stationary_config(9);
        a.noise_scale = 0.0;
        let mut b = stationary_config(9);
        b.noise_scale = 0.1;
        let pa = simulate_panel(&a).unwrap();
        let pb = simulate_panel(&b).unwrap();
        assert_eq!(pa.loadings, pb.loadings);
        assert_eq!(pa.sigma0, pb.sigma0);
        assert_eq!(pa.factor_series[0], pb.factor_series[0]);
    }

    #[test]
    fn sigma0_respects_norm_bound() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let s = random_spd_bounded(6, 0.25, &mut rng);
        let (vals, _) = linalg::sym_eigen_desc(&s);
        assert!(vals[0] <= 0.25 + 1e-12);
        assert!(vals[5] >= 0.5 * 0.25 - 1e-12);
    }

    #[test]
    fn ticks_cover_all_assets_and_stay_positive() {
        let config = TickSimConfig {
            assets: vec!["AA".into(), "BB".into(), "CC".into()],
            day: DayId(20130503),
            session_open_sec: 34_200.0,
            session_close_sec: 36_000.0,
            daily_cov: vec![
                vec![1e-4, 2e-5, 0.0],
                vec![2e-5, 2e-4, 1e-5],
                vec![0.0, 1e-5, 1.5e-4],
            ],
            start_log_prices: vec![4.0, 3.5, 4.5],
            tick_probability: 0.4,
            noise_sd: 1e-4,
            seed: 77,
        };
        let all = simulate_ticks(&config).unwrap();
        assert_eq!(all.len(), 3);
        for series in &all {
            assert!(series.len() > 100);
            assert!(series.ticks.iter().all(|t| t.price > 0.0));
            assert_eq!(series.ticks[0].timestamp_sec, 34_200.0);
            assert!(series.ticks.windows(2).all(|w| w[0].timestamp_sec < w[1].timestamp_sec));
        }
    }
}
