//! `rcov`: realized covariance matrices from return panels, with optional
//! threshold regularization and PSD repair, plus descriptive statistics of
//! every variance and covariance series.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;

use rcov_core::evaluation::descriptive_stats;
use rcov_core::rcov::{psd_repair, realized_cov_day, threshold_regularize, CovMatrixSeries};

use crate::formats;
use crate::manifest::ManifestBuilder;
use crate::Context;

#[derive(ClapArgs)]
pub struct Args {
    /// Panel input directory (overrides the config).
    #[arg(long)]
    panels: Option<PathBuf>,
    /// Matrix-series output directory (overrides the config).
    #[arg(long)]
    matrices: Option<PathBuf>,
    /// Threshold fraction (overrides the config).
    #[arg(long)]
    threshold: Option<f64>,
    /// Apply PSD repair after thresholding (overrides the config).
    #[arg(long)]
    psd_repair: bool,
}

pub fn run(ctx: &Context, args: Args) -> Result<()> {
    let paths = &ctx.config.paths;
    let panel_dir = args.panels.unwrap_or_else(|| paths.resolve(&paths.panel_dir));
    let matrix_dir = args.matrices.unwrap_or_else(|| paths.resolve(&paths.matrix_dir));
    let fraction = args.threshold.unwrap_or(ctx.config.rcov.threshold_fraction);
    let repair = args.psd_repair || ctx.config.rcov.psd_repair;

    let mut manifest = ManifestBuilder::new("rcov", ctx.seed, ctx.threads);
    manifest.input_dir(&panel_dir)?;
    let (registry, panels) = formats::read_panels(&panel_dir)?;
    if panels.is_empty() {
        bail!("no panels under {}", panel_dir.display());
    }

    let mut days = Vec::with_capacity(panels.len());
    for panel in &panels {
        let mut cov = realized_cov_day(panel)?;
        if fraction > 0.0 {
            cov = threshold_regularize(&cov, fraction)?;
        }
        if repair {
            cov = psd_repair(&cov)?;
        }
        days.push(cov);
    }
    let series = CovMatrixSeries::new(registry, days)?;
    let written = formats::write_matrix_series(&matrix_dir, &series)?;
    manifest.outputs(&written);

    // descriptive statistics of each entry series across days
    let stats_path = matrix_dir.join("descriptive_stats.csv");
    let mut out = String::from("asset_i,asset_j,mean,max,min,sd,skewness,kurtosis\n");
    let d = series.dim();
    for i in 0..d {
        for j in i..d {
            let values: Vec<f64> = series.matrices().map(|m| m[(i, j)]).collect();
            let s = descriptive_stats(&values)?;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                series.registry()[i],
                series.registry()[j],
                s.mean,
                s.max,
                s.min,
                s.sd,
                s.skewness.map(|v| v.to_string()).unwrap_or_default(),
                s.kurtosis.map(|v| v.to_string()).unwrap_or_default(),
            ));
        }
    }
    std::fs::write(&stats_path, out)?;
    manifest.output(&stats_path);
    manifest.note(format!("threshold_fraction={fraction}, psd_repair={repair}"));
    manifest.finish(&matrix_dir)?;
    println!("rcov: {} days of {}x{} -> {}", series.len(), d, d, matrix_dir.display());
    Ok(())
}
