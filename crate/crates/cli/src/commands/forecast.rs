//! `forecast`: roll a fitted CAW or VAR model forward and map the factor
//! forecasts back to asset space through the factor fit.
//!
//! Forecast day labels continue the series numerically from the last
//! observed day id; they order the horizon steps and are not calendar
//! arithmetic.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use serde::Serialize;

use rcov_core::caw;
use rcov_core::factor::to_asset_space;
use rcov_core::linalg;
use rcov_core::var::{var_forecast, VechSeries};

use crate::formats::{self, CawFitDoc, FactorFitDoc, VarFitDoc};
use crate::manifest::ManifestBuilder;
use crate::Context;

#[derive(ClapArgs)]
pub struct Args {
    /// Factor directory holding `factor_fit.json` and `factor_series/`.
    #[arg(long)]
    factor_dir: Option<PathBuf>,
    /// Path to a fit document written by fit-caw or fit-var.
    #[arg(long)]
    fit: PathBuf,
    /// Which kind of fit document that is.
    #[arg(long, value_parser = ["caw", "var"])]
    model: String,
    /// Forecast horizon in days.
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    /// Output directory (overrides the config).
    #[arg(long)]
    forecasts: Option<PathBuf>,
}

#[derive(Serialize)]
struct PsdFlags {
    /// Per-horizon PSD flag of the factor-space forecast.
    factor_psd: Vec<bool>,
}

pub fn run(ctx: &Context, args: Args) -> Result<()> {
    let paths = &ctx.config.paths;
    let factor_dir = args.factor_dir.unwrap_or_else(|| paths.resolve(&paths.factor_dir));
    let out_dir = args.forecasts.unwrap_or_else(|| paths.resolve(&paths.forecast_dir));
    if args.horizon < 1 {
        bail!("horizon must be at least 1");
    }

    let mut manifest = ManifestBuilder::new("forecast", ctx.seed, ctx.threads);
    let series_dir = factor_dir.join("factor_series");
    manifest.input_dir(&series_dir)?;
    let fit_doc_path = factor_dir.join("factor_fit.json");
    manifest.input(&fit_doc_path)?;
    manifest.input(&args.fit)?;

    let factor_doc: FactorFitDoc = formats::read_json(&fit_doc_path)?;
    let projection = factor_doc.to_projection_fit();
    let series = formats::read_matrix_series(&series_dir)?;
    let observations: Vec<_> = series.matrices().cloned().collect();
    let last_day = series.days().last().map(|d| d.day_id().0).unwrap_or(0);

    let (factor_forecasts, factor_psd): (Vec<nalgebra::DMatrix<f64>>, Vec<bool>) =
        match args.model.as_str() {
            "caw" => {
                let doc: CawFitDoc = formats::read_json(&args.fit)?;
                let fit = caw::CawFit {
                    params: doc.params(),
                    order: doc.order()?,
                    loglik: doc.loglik,
                    scale_series: vec![],
                    restarts_run: doc.restarts_run,
                    converged: doc.converged,
                    restarts: vec![],
                };
                let fc = caw::forecast(&fit, &observations, args.horizon)?;
                let flags = vec![true; fc.len()];
                (fc, flags)
            }
            "var" => {
                let doc: VarFitDoc = formats::read_json(&args.fit)?;
                let fit = doc.to_fit();
                let vech_series = VechSeries::from_matrices(&observations)?;
                let fc = var_forecast(&fit, &vech_series, args.horizon)?;
                let flags = fc.iter().map(|f| f.is_psd).collect();
                (fc.into_iter().map(|f| f.matrix).collect(), flags)
            }
            other => bail!("unknown model kind {other}"),
        };

    let days: Vec<u32> = (1..=args.horizon as u32).map(|h| last_day + h).collect();
    let factor_series = formats::series_from_matrices(
        formats::factor_registry(series.dim()),
        &days,
        &factor_forecasts,
    )?;
    let mut written = formats::write_matrix_series(&out_dir.join("factor_space"), &factor_series)?;

    let asset_forecasts: Vec<nalgebra::DMatrix<f64>> = factor_forecasts
        .iter()
        .map(|f| linalg::symmetrize(&to_asset_space(f, &projection)))
        .collect();
    let asset_series =
        formats::series_from_matrices(factor_doc.registry.clone(), &days, &asset_forecasts)?;
    written.extend(formats::write_matrix_series(&out_dir.join("asset_space"), &asset_series)?);

    let flags_path = formats::write_json(&out_dir.join("psd_flags.json"), &PsdFlags { factor_psd })?;
    written.push(flags_path);
    manifest.outputs(&written);
    manifest.note(format!("model={}, horizon={}", args.model, args.horizon));
    manifest.finish(&out_dir)?;
    println!(
        "forecast: {} steps from day {last_day} ({}) -> {}",
        args.horizon,
        args.model,
        out_dir.display()
    );
    Ok(())
}
