//! `evaluate`: rolling out-of-sample comparison of the configured models
//! over a covariance series, emitting one error-table CSV per horizon and
//! per-window details as JSON lines.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;

use rcov_core::derive_seed;
use rcov_core::evaluation::{rolling_compare, RollingSpec};

use crate::formats;
use crate::manifest::ManifestBuilder;
use crate::Context;

#[derive(ClapArgs)]
pub struct Args {
    /// Matrix-series input directory (overrides the config).
    #[arg(long)]
    matrices: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    eval_dir: Option<PathBuf>,
    /// Factor rank (overrides the config).
    #[arg(long)]
    rank: Option<usize>,
}

pub fn run(ctx: &Context, args: Args) -> Result<()> {
    let paths = &ctx.config.paths;
    let matrix_dir = args.matrices.unwrap_or_else(|| paths.resolve(&paths.matrix_dir));
    let eval_dir = args.eval_dir.unwrap_or_else(|| paths.resolve(&paths.eval_dir));
    let rank = args.rank.unwrap_or(ctx.config.factor.rank);

    let rolling = &ctx.config.rolling;
    let spec = RollingSpec {
        k_min: rolling.k_min,
        k_max: rolling.k_max,
        horizons: rolling.horizons.clone(),
        models: rolling.model_specs()?,
        caw_restarts: rolling.caw_restarts,
        inverse_ridge: rolling.inverse_ridge,
    };

    let mut manifest = ManifestBuilder::new("evaluate", ctx.seed, ctx.threads);
    manifest.input_dir(&matrix_dir)?;
    let series = formats::read_matrix_series(&matrix_dir)?;

    // validate the window plan against the series before any model work
    let max_h = spec.horizons.iter().copied().max().unwrap_or(1);
    if spec.k_max + max_h > series.len() {
        bail!(
            "rolling spec needs day k_max + horizon = {} but the series has {} days",
            spec.k_max + max_h,
            series.len()
        );
    }

    let outcome = rolling_compare(&series, &spec, rank, derive_seed(ctx.seed, &[b'e' as u64]))?;

    std::fs::create_dir_all(&eval_dir)?;
    for table in &outcome.tables {
        let path = eval_dir.join(format!("errors_h{}.csv", table.horizon));
        formats::write_error_table_csv(&path, table)?;
        manifest.output(&path);
    }
    let windows_path = eval_dir.join("windows.jsonl");
    let mut file = std::fs::File::create(&windows_path)?;
    for record in &outcome.windows {
        serde_json::to_writer(&mut file, record)?;
        file.write_all(b"\n")?;
    }
    manifest.output(&windows_path);
    manifest.note(format!(
        "windows {}..={}, horizons {:?}, models {:?}",
        spec.k_min, spec.k_max, spec.horizons, rolling.models
    ));
    manifest.finish(&eval_dir)?;

    for table in &outcome.tables {
        println!("horizon {}:", table.horizon);
        for row in &table.rows {
            println!(
                "  {:<18} params {:>4}  FN {:.6e}  SN {:.6e}{}",
                row.model,
                row.n_params,
                row.mean_frobenius,
                row.mean_spectral,
                match (row.mean_frobenius_inv, row.mean_spectral_inv) {
                    (Some(f), Some(s)) => format!("  FN-inv {f:.6e}  SN-inv {s:.6e}"),
                    _ => "  (all inverse errors excluded)".to_string(),
                }
            );
        }
    }
    println!("evaluate -> {}", eval_dir.display());
    Ok(())
}
