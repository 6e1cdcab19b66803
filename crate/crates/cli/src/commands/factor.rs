//! `factor`: fit the matrix factor model to a covariance series; emit the
//! fit document, the factor covariance series (standard matrix-series
//! layout), the eigenvalue scree and a tidy factor-series CSV for plotting.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args as ClapArgs;

use rcov_core::factor::fit_factor_model;

use crate::formats::{self, FactorFitDoc};
use crate::manifest::ManifestBuilder;
use crate::Context;

#[derive(ClapArgs)]
pub struct Args {
    /// Matrix-series input directory (overrides the config).
    #[arg(long)]
    matrices: Option<PathBuf>,
    /// Factor output directory (overrides the config).
    #[arg(long)]
    factor_dir: Option<PathBuf>,
    /// Factor rank r (overrides the config).
    #[arg(long)]
    rank: Option<usize>,
}

pub fn run(ctx: &Context, args: Args) -> Result<()> {
    let paths = &ctx.config.paths;
    let matrix_dir = args.matrices.unwrap_or_else(|| paths.resolve(&paths.matrix_dir));
    let factor_dir = args.factor_dir.unwrap_or_else(|| paths.resolve(&paths.factor_dir));
    let rank = args.rank.unwrap_or(ctx.config.factor.rank);

    let mut manifest = ManifestBuilder::new("factor", ctx.seed, ctx.threads);
    manifest.input_dir(&matrix_dir)?;
    let series = formats::read_matrix_series(&matrix_dir)?;
    let fit = fit_factor_model(&series, rank)?;

    std::fs::create_dir_all(&factor_dir)?;
    let doc = FactorFitDoc::from_fit(&fit, series.registry());
    let fit_path = formats::write_json(&factor_dir.join("factor_fit.json"), &doc)?;
    manifest.output(&fit_path);

    let days: Vec<u32> = series.days().iter().map(|d| d.day_id().0).collect();
    let factor_series = formats::series_from_matrices(
        formats::factor_registry(rank),
        &days,
        &fit.factor_series,
    )?;
    let written = formats::write_matrix_series(&factor_dir.join("factor_series"), &factor_series)?;
    manifest.outputs(&written);

    let scree_path = factor_dir.join("scree.csv");
    formats::write_scree_csv(&scree_path, fit.eigenvalues.as_slice())?;
    manifest.output(&scree_path);

    let tidy_path = factor_dir.join("factor_series_tidy.csv");
    formats::write_tidy_series(&tidy_path, &days, &fit.factor_series)?;
    manifest.output(&tidy_path);

    manifest.note(format!("rank={rank}, suggested_rank={}", doc.suggested_rank));
    manifest.finish(&factor_dir)?;
    println!(
        "factor: rank {rank} fit on {} days (scree suggests {}) -> {}",
        series.len(),
        doc.suggested_rank,
        factor_dir.display()
    );
    Ok(())
}
