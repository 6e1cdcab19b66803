//! `fit-caw`: maximum-likelihood diagonal CAW fit on the factor series.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args as ClapArgs;

use rcov_core::caw;
use rcov_core::derive_seed;

use crate::formats::{self, CawFitDoc};
use crate::manifest::ManifestBuilder;
use crate::Context;

#[derive(ClapArgs)]
pub struct Args {
    /// Factor directory holding `factor_series/` (overrides the config).
    #[arg(long)]
    factor_dir: Option<PathBuf>,
    /// Fit output directory (overrides the config).
    #[arg(long)]
    fits: Option<PathBuf>,
    /// Order p (overrides the config).
    #[arg(long)]
    p: Option<usize>,
    /// Order q (overrides the config).
    #[arg(long)]
    q: Option<usize>,
    /// Restart count (overrides the config and its rank-based default).
    #[arg(long)]
    restarts: Option<usize>,
}

pub fn run(ctx: &Context, args: Args) -> Result<()> {
    let paths = &ctx.config.paths;
    let factor_dir = args.factor_dir.unwrap_or_else(|| paths.resolve(&paths.factor_dir));
    let fit_dir = args.fits.unwrap_or_else(|| paths.resolve(&paths.fit_dir));
    let series_dir = factor_dir.join("factor_series");

    let mut manifest = ManifestBuilder::new("fit-caw", ctx.seed, ctx.threads);
    manifest.input_dir(&series_dir)?;
    let series = formats::read_matrix_series(&series_dir)?;
    let observations: Vec<_> = series.matrices().cloned().collect();
    let rank = series.dim();

    let order = match (args.p, args.q) {
        (Some(p), Some(q)) => caw::CawOrder::new(p, q)?,
        (None, None) => ctx.config.caw.order()?,
        _ => anyhow::bail!("--p and --q must be given together"),
    };
    let restarts = args
        .restarts
        .or(ctx.config.caw.restarts)
        .unwrap_or_else(|| ctx.config.caw.restarts_for_rank(rank));

    let fit = caw::fit(&observations, order, restarts, derive_seed(ctx.seed, &[b'c' as u64]))?;
    std::fs::create_dir_all(&fit_dir)?;
    let doc = CawFitDoc::from_fit(&fit);
    let path = formats::write_json(&fit_dir.join(format!("caw_{}_{}.json", order.p(), order.q())), &doc)?;
    manifest.output(&path);
    manifest.note(format!(
        "order={order}, restarts={restarts}, loglik={}, converged={}",
        fit.loglik, fit.converged
    ));
    manifest.finish(&fit_dir)?;
    println!(
        "fit-caw: order {order} on r={rank}, loglik {:.6} ({} restarts) -> {}",
        fit.loglik,
        restarts,
        path.display()
    );
    Ok(())
}
