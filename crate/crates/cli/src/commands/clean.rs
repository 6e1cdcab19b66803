//! `clean`: tick files in, synchronized daily return panels out.
//!
//! Days are kept only when every asset in the registry yields a usable
//! cleaned series (enough ticks and an opening price for the grid);
//! skipped days are listed in the run manifest.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::Args as ClapArgs;

use rcov_core::market_data::{
    build_return_panel, clean_ticks, previous_tick_resample, session_grid, CleanConfig,
};
use rcov_core::DayId;

use crate::formats;
use crate::manifest::ManifestBuilder;
use crate::Context;

#[derive(ClapArgs)]
pub struct Args {
    /// Tick directory (overrides the config).
    #[arg(long)]
    ticks: Option<PathBuf>,
    /// Panel output directory (overrides the config).
    #[arg(long)]
    panels: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: Args) -> Result<()> {
    let paths = &ctx.config.paths;
    let tick_dir = args.ticks.unwrap_or_else(|| paths.resolve(&paths.tick_dir));
    let panel_dir = args.panels.unwrap_or_else(|| paths.resolve(&paths.panel_dir));

    let clean_config = CleanConfig {
        session_open_sec: ctx.config.session_open_sec()?,
        session_close_sec: ctx.config.session_close_sec()?,
        trim_minutes: ctx.config.session.trim_minutes,
        outlier_window: ctx.config.session.outlier_window,
    };
    let grid = session_grid(
        clean_config.retained_open(),
        clean_config.retained_close(),
        ctx.config.grid.interval_seconds,
    );
    if grid.len() < 2 {
        bail!("session and interval leave no complete interval");
    }

    let mut manifest = ManifestBuilder::new("clean", ctx.seed, ctx.threads);
    let files = formats::scan_tick_dir(&tick_dir)?;
    if files.is_empty() {
        bail!("no tick files matching ASSET_YYYYMMDD.csv under {}", tick_dir.display());
    }

    // registry = all assets seen; a day must cover the whole registry
    let mut registry: Vec<String> = files.iter().map(|(a, _, _)| a.clone()).collect();
    registry.sort();
    registry.dedup();
    let mut by_day: BTreeMap<DayId, BTreeMap<String, PathBuf>> = BTreeMap::new();
    for (asset, day, path) in files {
        by_day.entry(day).or_default().insert(asset, path);
    }

    let mut panels = Vec::new();
    let mut total_parse_failures = 0usize;
    for (day, assets) in &by_day {
        if assets.len() != registry.len() {
            manifest.note(format!("day {day}: skipped, covers {}/{} assets", assets.len(), registry.len()));
            continue;
        }
        let mut per_asset = Vec::with_capacity(registry.len());
        let mut failure: Option<String> = None;
        for asset in &registry {
            let path = &assets[asset];
            manifest.input(path)?;
            let (series, parse_failures) = formats::read_tick_file(path, asset, *day)
                .with_context(|| format!("reading {}", path.display()))?;
            total_parse_failures += parse_failures;
            // Trimming removes every tick before the first grid point, so
            // the previous-tick rule has nothing to carry into the opening
            // price; the first retained trade stands in for it.
            match clean_ticks(&series, &clean_config).and_then(|mut cleaned| {
                if let Some(first) = cleaned.ticks.first().copied() {
                    if first.timestamp_sec > grid[0] {
                        cleaned.ticks.insert(
                            0,
                            rcov_core::market_data::TickRecord {
                                timestamp_sec: grid[0],
                                price: first.price,
                            },
                        );
                    }
                }
                previous_tick_resample(&cleaned, &grid)
            }) {
                Ok(prices) => per_asset.push(prices),
                Err(err) => {
                    failure = Some(format!("day {day}: skipped, asset {asset}: {err}"));
                    break;
                }
            }
        }
        match failure {
            Some(note) => manifest.note(note),
            None => panels.push(build_return_panel(&per_asset, *day, ctx.config.grid.interval_seconds)?),
        }
    }
    if panels.is_empty() {
        bail!("no day survived cleaning");
    }

    let written = formats::write_panels(&panel_dir, &registry, &panels)?;
    manifest.outputs(&written);
    manifest.note(format!("rows with parse failures: {total_parse_failures}"));
    manifest.note(format!("days kept: {}/{}", panels.len(), by_day.len()));
    manifest.finish(&panel_dir)?;
    println!(
        "clean: {} assets, {} days -> {}",
        registry.len(),
        panels.len(),
        panel_dir.display()
    );
    Ok(())
}
