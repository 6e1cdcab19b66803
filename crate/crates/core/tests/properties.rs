//! Property tests for the structural invariants of the pipeline.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use rcov_core::caw::{self, CawOrder, CawParams};
use rcov_core::evaluation::{frobenius_norm, spectral_norm};
use rcov_core::market_data::{
    build_return_panel, clean_ticks, previous_tick_resample, CleanConfig, TickRecord, TickSeries,
};
use rcov_core::rcov::{realized_cov_day, threshold_regularize, CovMatrix};
use rcov_core::simulation::{sample_wishart, simulate_caw, SimConfig};
use rcov_core::var::{unvech, vech};
use rcov_core::{factor, linalg, DayId};

// --- generators -----------------------------------------------------------

/// Piecewise-constant price levels with isolated spikes. The 3-sigma
/// neighborhood rule is only stable when outliers do not cluster inside one
/// window (clustered spikes mask each other), so spikes are kept at least a
/// window apart and each price level is longer than a window.
fn tick_series_strategy() -> impl Strategy<Value = TickSeries> {
    (
        proptest::collection::vec((10.0f64..100.0, 14usize..40), 2..5),
        proptest::collection::vec(1u8..30, 4),
        proptest::collection::vec(1u8..40, 160),
    )
        .prop_map(|(segments, spike_offsets, gaps)| {
            let mut prices = Vec::new();
            for &(level, len) in &segments {
                prices.extend(std::iter::repeat(level).take(len));
            }
            // spikes separated by more than the window of 10
            let mut pos = 0usize;
            for &off in &spike_offsets {
                pos += 11 + off as usize;
                if pos >= prices.len() {
                    break;
                }
                prices[pos] *= 4.0;
            }
            let mut stamp = 0.0f64;
            let ticks = prices
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    stamp += f64::from(gaps[i % gaps.len()]);
                    TickRecord { timestamp_sec: stamp, price: p }
                })
                .collect();
            TickSeries { asset_id: "P".to_string(), day_id: DayId(1), ticks }
        })
}

fn symmetric_matrix_strategy(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-5.0f64..5.0, d * d)
        .prop_map(move |vals| linalg::symmetrize(&DMatrix::from_vec(d, d, vals)))
}

// --- market data ----------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cleaning_is_idempotent(series in tick_series_strategy()) {
        let config = CleanConfig {
            session_open_sec: 0.0,
            session_close_sec: 1e7,
            trim_minutes: 0,
            outlier_window: 10,
        };
        if let Ok(once) = clean_ticks(&series, &config) {
            let twice = clean_ticks(&once, &config).unwrap();
            prop_assert_eq!(&once.ticks, &twice.ticks);
        }
    }

    #[test]
    fn resample_draws_from_cleaned_prices(series in tick_series_strategy()) {
        let config = CleanConfig {
            session_open_sec: 0.0,
            session_close_sec: 1e7,
            trim_minutes: 0,
            outlier_window: 10,
        };
        if let Ok(cleaned) = clean_ticks(&series, &config) {
            if cleaned.is_empty() {
                return Ok(());
            }
            let last = cleaned.ticks.last().unwrap().timestamp_sec;
            let first = cleaned.ticks[0].timestamp_sec;
            let grid: Vec<f64> = (0..20).map(|i| first + (last - first) * i as f64 / 19.0).collect();
            let resampled = previous_tick_resample(&cleaned, &grid).unwrap();
            // subsequence with repetition: source tick indices are
            // non-decreasing and prices match the cleaned series
            let mut cursor = 0usize;
            for price in resampled {
                let found = cleaned.ticks[cursor..].iter().position(|t| t.price == price);
                prop_assert!(found.is_some(), "resampled price {price} not in cleaned tail");
                cursor += found.unwrap();
            }
        }
    }

    #[test]
    fn panel_rows_telescope(
        prices in proptest::collection::vec(proptest::collection::vec(1.0f64..100.0, 12), 3)
    ) {
        let panel = build_return_panel(&prices, DayId(1), 300).unwrap();
        for (i, asset_prices) in prices.iter().enumerate() {
            let col_sum: f64 = (0..panel.intervals()).map(|j| panel.returns[(j, i)]).sum();
            let expect = asset_prices.last().unwrap().ln() - asset_prices[0].ln();
            prop_assert!((col_sum - expect).abs() < 1e-10);
        }
    }
}

// --- realized covariance ---------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realized_cov_rank_and_trace(
        rows in 1usize..4,
        vals in proptest::collection::vec(-0.05f64..0.05, 4 * 5)
    ) {
        let d = 5usize;
        let returns = DMatrix::from_fn(rows, d, |j, i| vals[j * d + i]);
        let panel = rcov_core::market_data::ReturnPanel { day_id: DayId(1), interval_seconds: 300, returns };
        let cov = realized_cov_day(&panel).unwrap();
        let sumsq: f64 = panel.returns.iter().map(|x| x * x).sum();
        prop_assert!((cov.values().trace() - sumsq).abs() <= 1e-12 * (1.0 + sumsq));
        let (eigs, _) = linalg::sym_eigen_desc(cov.values());
        let scale = eigs[0].abs().max(1e-30);
        for j in rows.min(d)..d {
            prop_assert!(eigs[j].abs() <= 1e-10 * scale, "rank leak: {}", eigs[j]);
        }
    }

    #[test]
    fn threshold_idempotent_and_symmetric(m in symmetric_matrix_strategy(4), fraction in 0.0f64..0.9) {
        let cov = CovMatrix::new(DayId(1), m).unwrap();
        let once = threshold_regularize(&cov, fraction).unwrap();
        let twice = threshold_regularize(&once, fraction).unwrap();
        prop_assert_eq!(once.values(), twice.values());
        prop_assert_eq!(linalg::asymmetry(once.values()), 0.0);
    }
}

// --- factor model -----------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn factor_fit_invariants(seed in 0u64..1000) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let d = 5;
        let days: Vec<CovMatrix> = (0..8)
            .map(|t| {
                let base = sample_wishart(8.0, &DMatrix::identity(d, d), &mut rng).unwrap();
                CovMatrix::new(DayId(t as u32 + 1), base).unwrap()
            })
            .collect();
        let series = rcov_core::rcov::CovMatrixSeries::new(
            (0..d).map(|i| format!("A{i}")).collect(),
            days,
        )
        .unwrap();
        let fit = factor::fit_factor_model(&series, 2).unwrap();
        // orthonormality
        let gram = fit.loadings.transpose() * &fit.loadings;
        prop_assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-10);
        // scree monotone
        for w in fit.eigenvalues.as_slice().windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12);
        }
        // projection-reconstruction identity
        let proj = &fit.loadings * fit.loadings.transpose();
        for (t, m) in series.matrices().enumerate() {
            let lhs = factor::to_asset_space(&fit.factor_series[t], &fit);
            let rhs = &proj * m * &proj + &fit.mean_cov - &proj * &fit.mean_cov * &proj;
            let scale = 1.0 + m.amax();
            prop_assert!((lhs - rhs).amax() < 1e-11 * scale);
        }
        // factor matrices of PSD inputs stay PSD
        for f in &fit.factor_series {
            prop_assert!(linalg::min_eigenvalue(f) > -1e-10);
        }
    }
}

// --- CAW ---------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scale_recursion_dominates_intercept(
        obs_seed in 0u64..500,
        c in 0.05f64..1.0,
        b in 0.05f64..0.9,
        a in 0.05f64..0.9
    ) {
        let r = 2;
        let mut rng = ChaCha12Rng::seed_from_u64(obs_seed);
        let obs: Vec<DMatrix<f64>> = (0..8)
            .map(|_| sample_wishart(6.0, &DMatrix::identity(r, r), &mut rng).unwrap())
            .collect();
        let order = CawOrder::new(1, 1).unwrap();
        let params = CawParams {
            nu: 6.0,
            c_diag: vec![c, 0.5 * c + 0.01],
            b_diags: vec![vec![b, 0.8 * b]],
            a_diags: vec![vec![a, 0.9 * a]],
        };
        let scales = caw::scaling_recursion(&params, &obs, order).unwrap();
        let mut intercept = DMatrix::zeros(r, r);
        for k in 0..r {
            intercept[(k, k)] = params.c_diag[k] * params.c_diag[k];
        }
        for s in &scales[1..] {
            prop_assert!(linalg::min_eigenvalue(&(s - &intercept)) >= -1e-10);
        }
    }

    #[test]
    fn forecast_first_step_is_recursion_value(
        obs_seed in 0u64..500,
        b in 0.05f64..0.9,
        a in 0.05f64..0.9
    ) {
        let r = 2;
        let mut rng = ChaCha12Rng::seed_from_u64(obs_seed);
        let obs: Vec<DMatrix<f64>> = (0..6)
            .map(|_| sample_wishart(6.0, &DMatrix::identity(r, r), &mut rng).unwrap())
            .collect();
        let order = CawOrder::new(1, 1).unwrap();
        let params = CawParams {
            nu: 6.0,
            c_diag: vec![0.3, 0.4],
            b_diags: vec![vec![b, 0.7 * b]],
            a_diags: vec![vec![a, 0.8 * a]],
        };
        let fit = caw::CawFit {
            params: params.clone(),
            order,
            loglik: 0.0,
            scale_series: vec![],
            restarts_run: 0,
            converged: true,
            restarts: vec![],
        };
        let fc = caw::forecast(&fit, &obs, 1).unwrap();
        // S(T+1) by direct application of the recursion to the tail
        let scales = caw::scaling_recursion(&params, &obs, order).unwrap();
        let mut expect = DMatrix::zeros(r, r);
        for k in 0..r {
            expect[(k, k)] = params.c_diag[k] * params.c_diag[k];
            for l in 0..r {
                expect[(k, l)] += params.b_diags[0][k] * params.b_diags[0][l] * scales[5][(k, l)];
                expect[(k, l)] += params.a_diags[0][k] * params.a_diags[0][l] * obs[5][(k, l)];
            }
        }
        prop_assert!((fc[0].clone() - expect).amax() < 1e-12);
    }
}

// --- vech / norms ------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn vech_roundtrip(m in symmetric_matrix_strategy(4)) {
        let back = unvech(&vech(&m).unwrap()).unwrap();
        prop_assert!((back - m).amax() == 0.0);
    }

    #[test]
    fn spectral_le_frobenius(vals in proptest::collection::vec(-10.0f64..10.0, 12)) {
        let m = DMatrix::from_vec(3, 4, vals);
        prop_assert!(spectral_norm(&m) <= frobenius_norm(&m) + 1e-10);
    }

    #[test]
    fn norms_equal_on_rank_one(
        u in proptest::collection::vec(-3.0f64..3.0, 4),
        v in proptest::collection::vec(-3.0f64..3.0, 4)
    ) {
        let u = DVector::from_vec(u);
        let v = DVector::from_vec(v);
        let m = &u * v.transpose();
        let f = frobenius_norm(&m);
        let s = spectral_norm(&m);
        prop_assert!((f - s).abs() <= 1e-9 * (1.0 + f));
    }

    #[test]
    fn norms_absolutely_homogeneous(m in symmetric_matrix_strategy(3), c in -4.0f64..4.0) {
        let scaled = &m * c;
        prop_assert!((frobenius_norm(&scaled) - c.abs() * frobenius_norm(&m)).abs() < 1e-12 * (1.0 + frobenius_norm(&m)));
        prop_assert!((spectral_norm(&scaled) - c.abs() * spectral_norm(&m)).abs() < 1e-10 * (1.0 + spectral_norm(&m)));
    }
}

// --- simulation ---------------------------------------------------------------

#[test]
fn wishart_draws_always_spd() {
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    for i in 0..400 {
        let scale = spd_from_seed(i);
        let w = sample_wishart(3.2, &scale, &mut rng).unwrap();
        assert!(
            nalgebra::Cholesky::new(w.clone()).is_some(),
            "draw {i} not SPD: {w}"
        );
    }
}

fn spd_from_seed(seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let g: DMatrix<f64> = DMatrix::from_fn(3, 3, |_, _| {
        use rand_distr::Distribution;
        rand_distr::StandardNormal.sample(&mut rng)
    });
    let mut m: DMatrix<f64> = &g * g.transpose();
    for k in 0..3 {
        m[(k, k)] += 0.3;
    }
    m
}

#[test]
fn stationary_simulation_never_explodes() {
    let config = SimConfig {
        d: 2,
        r: 2,
        t_days: 10_000,
        order: CawOrder::new(1, 1).unwrap(),
        params: CawParams {
            nu: 8.0,
            c_diag: vec![0.3, 0.4],
            b_diags: vec![vec![0.7, 0.6]],
            a_diags: vec![vec![0.5, 0.55]],
        },
        noise_scale: 0.0,
        sigma0_scale: 0.0,
        burn_in: 500,
        seed: 123,
    };
    let series = simulate_caw(&config).unwrap();
    // stationary means per coordinate: c^2 / (1 - a^2 - b^2)
    let mean0: f64 = 0.09 / (1.0 - 0.25 - 0.49);
    let mean1: f64 = 0.16 / (1.0 - 0.3025 - 0.36);
    let bound = 1e6 * mean0.max(mean1);
    let max_entry = series
        .iter()
        .map(|x| x.amax())
        .fold(0.0f64, f64::max);
    assert!(max_entry.is_finite() && max_entry < bound, "max entry {max_entry}");
}
