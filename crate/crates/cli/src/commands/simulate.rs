//! `simulate`: generate data from a scenario file. Panel scenarios write a
//! matrix-series directory plus the ground truth; tick scenarios write
//! `ASSET_YYYYMMDD.csv` files consumable by `clean`.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args as ClapArgs;
use serde::Serialize;

use rcov_core::simulation::{simulate_panel, simulate_ticks};

use crate::formats::{self, Scenario};
use crate::manifest::ManifestBuilder;
use crate::Context;

#[derive(ClapArgs)]
pub struct Args {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for the generated data (default: the matrix dir
    /// for panel scenarios, the tick dir for tick scenarios).
    #[arg(long)]
    dest: Option<PathBuf>,
}

#[derive(Serialize)]
struct PanelTruth {
    loadings: Vec<Vec<f64>>,
    sigma0: Vec<Vec<f64>>,
}

pub fn run(ctx: &Context, args: Args) -> Result<()> {
    let paths = &ctx.config.paths;
    let mut manifest = ManifestBuilder::new("simulate", ctx.seed, ctx.threads);
    manifest.input(&args.scenario)?;
    let scenario = formats::read_scenario(&args.scenario)?;

    match scenario {
        Scenario::Panel(config) => {
            let dest = args.dest.unwrap_or_else(|| paths.resolve(&paths.matrix_dir));
            let panel = simulate_panel(&config)?;
            let mut written = formats::write_matrix_series(&dest, &panel.series)?;

            // ground truth for verification experiments
            let truth_dir = dest.join("truth");
            std::fs::create_dir_all(&truth_dir)?;
            written.push(formats::write_json(
                &truth_dir.join("model.json"),
                &PanelTruth {
                    loadings: formats::matrix_rows(&panel.loadings),
                    sigma0: formats::matrix_rows(&panel.sigma0),
                },
            )?);
            let days: Vec<u32> = (1..=config.t_days as u32).collect();
            let factor_truth = formats::series_from_matrices(
                formats::factor_registry(config.r),
                &days,
                &panel.factor_series,
            )?;
            written.extend(formats::write_matrix_series(&truth_dir.join("factor_series"), &factor_truth)?);

            manifest.outputs(&written);
            manifest.note(format!(
                "panel: d={} r={} T={} noise={} seed={}",
                config.d, config.r, config.t_days, config.noise_scale, config.seed
            ));
            manifest.finish(&dest)?;
            println!(
                "simulate: panel d={} r={} T={} -> {}",
                config.d,
                config.r,
                config.t_days,
                dest.display()
            );
        }
        Scenario::Ticks(config) => {
            let dest = args.dest.unwrap_or_else(|| paths.resolve(&paths.tick_dir));
            let all = simulate_ticks(&config)?;
            std::fs::create_dir_all(&dest)?;
            let mut total = 0usize;
            for series in &all {
                total += series.len();
                let path = formats::write_tick_file(&dest, series)?;
                manifest.output(&path);
            }
            manifest.note(format!(
                "ticks: {} assets, day {}, {} ticks total",
                config.assets.len(),
                config.day,
                total
            ));
            manifest.finish(&dest)?;
            println!(
                "simulate: {} tick series ({} ticks) -> {}",
                all.len(),
                total,
                dest.display()
            );
        }
    }
    Ok(())
}
