//! `fit-var`: order-selection criteria and least-squares VAR fit on the
//! half-vectorized factor series; emits the fit document, the criteria
//! table, residuals for ACF plotting and the sparsity profile of the first
//! lag matrix.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args as ClapArgs;

use rcov_core::var::{fit_var, order_criteria, sparsity_measure, VechSeries};

use crate::formats::{self, VarFitDoc};
use crate::manifest::ManifestBuilder;
use crate::Context;

/// Exponent grid for the sparsity profile.
const SPARSITY_EXPONENTS: [f64; 7] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];

#[derive(ClapArgs)]
pub struct Args {
    /// Factor directory holding `factor_series/` (overrides the config).
    #[arg(long)]
    factor_dir: Option<PathBuf>,
    /// Fit output directory (overrides the config).
    #[arg(long)]
    fits: Option<PathBuf>,
    /// VAR order to fit (overrides the config).
    #[arg(long)]
    order: Option<usize>,
    /// Maximum order for the criteria table (overrides the config).
    #[arg(long)]
    max_order: Option<usize>,
}

pub fn run(ctx: &Context, args: Args) -> Result<()> {
    let paths = &ctx.config.paths;
    let factor_dir = args.factor_dir.unwrap_or_else(|| paths.resolve(&paths.factor_dir));
    let fit_dir = args.fits.unwrap_or_else(|| paths.resolve(&paths.fit_dir));
    let series_dir = factor_dir.join("factor_series");
    let order = args.order.unwrap_or(ctx.config.var.order);
    let max_order = args.max_order.unwrap_or(ctx.config.var.max_order);

    let mut manifest = ManifestBuilder::new("fit-var", ctx.seed, ctx.threads);
    manifest.input_dir(&series_dir)?;
    let series = formats::read_matrix_series(&series_dir)?;
    let matrices: Vec<_> = series.matrices().cloned().collect();
    let vech_series = VechSeries::from_matrices(&matrices)?;

    let criteria = order_criteria(&vech_series, max_order)?;
    let mut fit = fit_var(&vech_series, order)?;
    fit.criteria = Some(criteria.clone());

    std::fs::create_dir_all(&fit_dir)?;
    let sparsity = sparsity_measure(&fit.coefficients[0], &SPARSITY_EXPONENTS);
    let doc = VarFitDoc::from_fit(&fit, sparsity);
    let fit_path = formats::write_json(&fit_dir.join(format!("var_{order}.json")), &doc)?;
    manifest.output(&fit_path);

    let criteria_path = fit_dir.join("var_criteria.csv");
    formats::write_criteria_csv(&criteria_path, &criteria)?;
    manifest.output(&criteria_path);

    // residual series for external ACF/PACF plotting
    let resid_path = fit_dir.join("var_residuals.csv");
    let mut out = String::from("t,component,residual\n");
    let rows = vech_series.rows();
    for t in order..vech_series.len() {
        let mut pred = fit.intercept.clone();
        for (lag, coeff) in fit.coefficients.iter().enumerate() {
            pred += coeff * rows.row(t - lag - 1).transpose();
        }
        for c in 0..vech_series.k() {
            out.push_str(&format!("{t},{c},{}\n", rows[(t, c)] - pred[c]));
        }
    }
    std::fs::write(&resid_path, out)?;
    manifest.output(&resid_path);

    manifest.note(format!(
        "order={order}, selected: aic={} hq={} sc={} fpe={}, radius={:.4}",
        criteria.selected_aic,
        criteria.selected_hq,
        criteria.selected_sc,
        criteria.selected_fpe,
        doc.spectral_radius
    ));
    manifest.finish(&fit_dir)?;
    println!(
        "fit-var: order {order} on K={} (criteria pick aic={} hq={} sc={} fpe={}) -> {}",
        vech_series.k(),
        criteria.selected_aic,
        criteria.selected_hq,
        criteria.selected_sc,
        criteria.selected_fpe,
        fit_path.display()
    );
    Ok(())
}
