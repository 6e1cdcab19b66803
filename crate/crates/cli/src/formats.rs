//! On-disk formats.
//!
//! The central interchange format is the *matrix series directory*: one
//! `manifest.json` naming the asset registry and day order, plus one
//! headerless CSV of the d x d matrix per day, named `{day}.csv`. All
//! pipeline stages read and write this shape, so simulated and real data
//! flow through identical code. Fits are persisted as JSON documents,
//! tables as CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use rcov_core::caw::{CawFit, CawOrder, CawParams, RestartSummary};
use rcov_core::market_data::{ReturnPanel, TickSeries};
use rcov_core::rcov::{CovMatrix, CovMatrixSeries};
use rcov_core::simulation::{SimConfig, TickSimConfig};
use rcov_core::var::{CriteriaTable, VarFit};
use rcov_core::DayId;

#[derive(Debug, Serialize, Deserialize)]
struct SeriesManifest {
    registry: Vec<String>,
    days: Vec<u32>,
    dim: usize,
}

/// Write a covariance series as a matrix-series directory.
pub fn write_matrix_series(dir: &Path, series: &CovMatrixSeries) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let manifest = SeriesManifest {
        registry: series.registry().to_vec(),
        days: series.days().iter().map(|d| d.day_id().0).collect(),
        dim: series.dim(),
    };
    let mut written = vec![write_json(&dir.join("manifest.json"), &manifest)?];
    for day in series.days() {
        let path = dir.join(format!("{}.csv", day.day_id()));
        write_matrix_csv(&path, day.values())?;
        written.push(path);
    }
    Ok(written)
}

/// Read a matrix-series directory back.
pub fn read_matrix_series(dir: &Path) -> Result<CovMatrixSeries> {
    let manifest: SeriesManifest = read_json(&dir.join("manifest.json"))?;
    let mut days = Vec::with_capacity(manifest.days.len());
    for day in &manifest.days {
        let path = dir.join(format!("{day}.csv"));
        let values = read_matrix_csv(&path, manifest.dim, manifest.dim)?;
        days.push(CovMatrix::new(DayId(*day), values).with_context(|| format!("{}", path.display()))?);
    }
    CovMatrixSeries::new(manifest.registry, days).context("inconsistent matrix series")
}

/// Convenience for factor-space series: registry `f1..fr`.
pub fn factor_registry(r: usize) -> Vec<String> {
    (1..=r).map(|i| format!("f{i}")).collect()
}

/// Wrap raw symmetric matrices into a series with the given registry and
/// day labels.
pub fn series_from_matrices(
    registry: Vec<String>,
    days: &[u32],
    matrices: &[DMatrix<f64>],
) -> Result<CovMatrixSeries> {
    if days.len() != matrices.len() {
        bail!("{} day labels for {} matrices", days.len(), matrices.len());
    }
    let mut out = Vec::with_capacity(matrices.len());
    for (day, m) in days.iter().zip(matrices) {
        out.push(CovMatrix::new(DayId(*day), m.clone())?);
    }
    Ok(CovMatrixSeries::new(registry, out)?)
}

// --- return panels -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct PanelManifest {
    registry: Vec<String>,
    days: Vec<u32>,
    interval_seconds: u32,
}

pub fn write_panels(dir: &Path, registry: &[String], panels: &[ReturnPanel]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let manifest = PanelManifest {
        registry: registry.to_vec(),
        days: panels.iter().map(|p| p.day_id.0).collect(),
        interval_seconds: panels.first().map(|p| p.interval_seconds).unwrap_or(300),
    };
    let mut written = vec![write_json(&dir.join("manifest.json"), &manifest)?];
    for panel in panels {
        let path = dir.join(format!("{}.csv", panel.day_id));
        write_matrix_csv(&path, &panel.returns)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_panels(dir: &Path) -> Result<(Vec<String>, Vec<ReturnPanel>)> {
    let manifest: PanelManifest = read_json(&dir.join("manifest.json"))?;
    let d = manifest.registry.len();
    let mut panels = Vec::with_capacity(manifest.days.len());
    for day in &manifest.days {
        let path = dir.join(format!("{day}.csv"));
        let returns = read_matrix_csv_any_rows(&path, d)?;
        panels.push(ReturnPanel {
            day_id: DayId(*day),
            interval_seconds: manifest.interval_seconds,
            returns,
        });
    }
    Ok((manifest.registry, panels))
}

// --- tick files ---------------------------------------------------------------

/// Tick file name convention: `{ASSET}_{YYYYMMDD}.csv` with a
/// `timestamp,price` header.
pub fn tick_file_name(asset: &str, day: DayId) -> String {
    format!("{asset}_{day}.csv")
}

pub fn parse_tick_file_name(name: &str) -> Option<(String, DayId)> {
    let stem = name.strip_suffix(".csv")?;
    let (asset, day) = stem.rsplit_once('_')?;
    if asset.is_empty() {
        return None;
    }
    Some((asset.to_string(), DayId::parse(day)?))
}

pub fn write_tick_file(dir: &Path, series: &TickSeries) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(tick_file_name(&series.asset_id, series.day_id));
    let mut out = String::from("timestamp,price\n");
    for tick in &series.ticks {
        out.push_str(&format!("{},{}\n", tick.timestamp_sec, tick.price));
    }
    fs::write(&path, out)?;
    Ok(path)
}

/// Read one tick CSV; returns the parsed series and the malformed-row count.
pub fn read_tick_file(path: &Path, asset: &str, day: DayId) -> Result<(TickSeries, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows: Vec<(String, String)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let ts = record.get(0).unwrap_or("").to_string();
        let px = record.get(1).unwrap_or("").to_string();
        rows.push((ts, px));
    }
    let parsed = rcov_core::market_data::parse_ticks(
        rows.iter().map(|(a, b)| (a.as_str(), b.as_str())),
        day,
        asset,
    )?;
    Ok((parsed.series, parsed.parse_failures))
}

/// Scan a tick directory, grouping files by day and asset.
pub fn scan_tick_dir(dir: &Path) -> Result<Vec<(String, DayId, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))? {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some((asset, day)) = parse_tick_file_name(name) {
            out.push((asset, day, entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

// --- fits ----------------------------------------------------------------------

/// Persisted factor-model fit: loadings row-major, residual matrix, scree.
#[derive(Debug, Serialize, Deserialize)]
pub struct FactorFitDoc {
    pub registry: Vec<String>,
    pub r: usize,
    /// d rows of r entries each.
    pub loadings: Vec<Vec<f64>>,
    pub sigma0: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Largest consecutive-eigenvalue ratio drop; a suggestion only.
    pub suggested_rank: usize,
}

impl FactorFitDoc {
    pub fn from_fit(fit: &rcov_core::factor::FactorModelFit, registry: &[String]) -> Self {
        FactorFitDoc {
            registry: registry.to_vec(),
            r: fit.rank(),
            loadings: matrix_rows(&fit.loadings),
            sigma0: matrix_rows(&fit.sigma0),
            eigenvalues: fit.eigenvalues.iter().copied().collect(),
            suggested_rank: rcov_core::factor::suggest_rank(&fit.eigenvalues),
        }
    }

    pub fn loadings_matrix(&self) -> DMatrix<f64> {
        rows_matrix(&self.loadings)
    }

    pub fn sigma0_matrix(&self) -> DMatrix<f64> {
        rows_matrix(&self.sigma0)
    }

    /// Rebuild enough of the fit to map factor matrices to asset space.
    pub fn to_projection_fit(&self) -> rcov_core::factor::FactorModelFit {
        let d = self.registry.len();
        rcov_core::factor::FactorModelFit {
            loadings: self.loadings_matrix(),
            sigma0: self.sigma0_matrix(),
            factor_series: Vec::new(),
            eigenvalues: DVector::from_vec(self.eigenvalues.clone()),
            mean_cov: DMatrix::zeros(d, d),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CawFitDoc {
    pub order: [usize; 2],
    pub r: usize,
    pub nu: f64,
    pub c_diag: Vec<f64>,
    pub b_diags: Vec<Vec<f64>>,
    pub a_diags: Vec<Vec<f64>>,
    /// Unconstrained optimizer coordinates of the winning restart.
    pub transformed: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub restarts_run: usize,
    /// Per-coordinate `sum a^2 + sum b^2`; below one indicates stationary
    /// dynamics in that coordinate. Reported, not enforced.
    pub stationarity: Vec<f64>,
    pub restarts: Vec<RestartSummary>,
}

impl CawFitDoc {
    pub fn from_fit(fit: &CawFit) -> Self {
        let r = fit.params.rank();
        let nu_min = r as f64 - 1.0 + rcov_core::caw::NU_MARGIN;
        let mut transformed = vec![(fit.params.nu - nu_min).ln()];
        transformed.extend(fit.params.c_diag.iter().map(|v| v.ln()));
        for b in &fit.params.b_diags {
            transformed.extend(b.iter().map(|v| v.ln()));
        }
        for a in &fit.params.a_diags {
            transformed.extend(a.iter().map(|v| v.ln()));
        }
        CawFitDoc {
            order: [fit.order.p(), fit.order.q()],
            r,
            nu: fit.params.nu,
            c_diag: fit.params.c_diag.clone(),
            b_diags: fit.params.b_diags.clone(),
            a_diags: fit.params.a_diags.clone(),
            transformed,
            loglik: fit.loglik,
            converged: fit.converged,
            restarts_run: fit.restarts_run,
            stationarity: fit.params.stationarity_diagnostic(),
            restarts: fit.restarts.clone(),
        }
    }

    pub fn params(&self) -> CawParams {
        CawParams {
            nu: self.nu,
            c_diag: self.c_diag.clone(),
            b_diags: self.b_diags.clone(),
            a_diags: self.a_diags.clone(),
        }
    }

    pub fn order(&self) -> Result<CawOrder> {
        Ok(CawOrder::new(self.order[0], self.order[1])?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VarFitDoc {
    pub order: usize,
    pub k: usize,
    pub intercept: Vec<f64>,
    /// Coefficient matrices, each K rows of K entries.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    pub resid_cov: Vec<Vec<f64>>,
    pub resid_cov_ml: Vec<Vec<f64>>,
    pub effective_rows: usize,
    pub n_params: usize,
    pub spectral_radius: f64,
    pub stationary: bool,
    /// `(exponent, (1/K^2) sum |a_ij|^m)` pairs for the first lag matrix.
    pub sparsity: Vec<(f64, f64)>,
    pub criteria: Option<CriteriaTable>,
}

impl VarFitDoc {
    pub fn from_fit(fit: &VarFit, sparsity: Vec<(f64, f64)>) -> Self {
        let (radius, stationary) = rcov_core::var::stationarity_check(fit);
        VarFitDoc {
            order: fit.order,
            k: fit.intercept.len(),
            intercept: fit.intercept.iter().copied().collect(),
            coefficients: fit.coefficients.iter().map(matrix_rows).collect(),
            resid_cov: matrix_rows(&fit.resid_cov),
            resid_cov_ml: matrix_rows(&fit.resid_cov_ml),
            effective_rows: fit.effective_rows,
            n_params: fit.param_count(),
            spectral_radius: radius,
            stationary,
            sparsity,
            criteria: fit.criteria.clone(),
        }
    }

    pub fn to_fit(&self) -> VarFit {
        VarFit {
            order: self.order,
            intercept: DVector::from_vec(self.intercept.clone()),
            coefficients: self.coefficients.iter().map(|c| rows_matrix(c)).collect(),
            resid_cov: rows_matrix(&self.resid_cov),
            resid_cov_ml: rows_matrix(&self.resid_cov_ml),
            effective_rows: self.effective_rows,
            criteria: self.criteria.clone(),
        }
    }
}

// --- scenarios -------------------------------------------------------------------

/// Simulation scenario file: a panel-level or tick-level generator.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Panel(SimConfig),
    Ticks(TickSimConfig),
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    read_json(path)
}

// --- tables -----------------------------------------------------------------------

pub fn write_criteria_csv(path: &Path, table: &CriteriaTable) -> Result<()> {
    let mut out = String::from("order,aic,hq,sc,fpe\n");
    for row in &table.rows {
        out.push_str(&format!("{},{},{},{},{}\n", row.order, row.aic, row.hq, row.sc, row.fpe));
    }
    out.push_str(&format!(
        "# selected,aic={},hq={},sc={},fpe={}\n",
        table.selected_aic, table.selected_hq, table.selected_sc, table.selected_fpe
    ));
    fs::write(path, out)?;
    Ok(())
}

pub fn write_error_table_csv(path: &Path, table: &rcov_core::evaluation::ErrorTable) -> Result<()> {
    let mut out = String::from(
        "model,n_params,mean_frobenius,mean_spectral,mean_frobenius_inv,mean_spectral_inv,windows,inverse_excluded\n",
    );
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.model,
            row.n_params,
            row.mean_frobenius,
            row.mean_spectral,
            opt(row.mean_frobenius_inv),
            opt(row.mean_spectral_inv),
            row.windows,
            row.inverse_excluded
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Tidy CSV of a matrix sequence: `day,row,col,value`.
pub fn write_tidy_series(path: &Path, days: &[u32], matrices: &[DMatrix<f64>]) -> Result<()> {
    let mut out = String::from("day,row,col,value\n");
    for (day, m) in days.iter().zip(matrices) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.push_str(&format!("{day},{i},{j},{}\n", m[(i, j)]));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_scree_csv(path: &Path, eigenvalues: &[f64]) -> Result<()> {
    let mut out = String::from("index,eigenvalue\n");
    for (i, v) in eigenvalues.iter().enumerate() {
        out.push_str(&format!("{},{v}\n", i + 1));
    }
    fs::write(path, out)?;
    Ok(())
}

// --- matrices as CSV -----------------------------------------------------------------

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let m = read_matrix_csv_any_rows(path, cols)?;
    if m.nrows() != rows {
        bail!("{} has {} rows, expected {rows}", path.display(), m.nrows());
    }
    Ok(m)
}

fn read_matrix_csv_any_rows(path: &Path, cols: usize) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            bail!("{} row {rows} has {} fields, expected {cols}", path.display(), fields.len());
        }
        for f in fields {
            values.push(f.trim().parse::<f64>().with_context(|| {
                format!("{}: bad numeric field {f:?}", path.display())
            })?);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

// --- json helpers -------------------------------------------------------------------

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(path.to_path_buf())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn rows_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_file_names_roundtrip() {
        assert_eq!(
            parse_tick_file_name("MMM_20130503.csv"),
            Some(("MMM".to_string(), DayId(20130503)))
        );
        assert_eq!(
            parse_tick_file_name("BRK_B_20130503.csv"),
            Some(("BRK_B".to_string(), DayId(20130503)))
        );
        assert_eq!(parse_tick_file_name("garbage.csv"), None);
        assert_eq!(parse_tick_file_name("MMM_2013.csv"), None);
    }

    #[test]
    fn matrix_csv_roundtrip() {
        let dir = std::env::temp_dir().join(format!("rcovkit-fmt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let m = DMatrix::from_row_slice(2, 3, &[1.5, -2.0, 0.25, 1e-12, 3.0, -0.5]);
        let path = dir.join("m.csv");
        write_matrix_csv(&path, &m).unwrap();
        let back = read_matrix_csv(&path, 2, 3).unwrap();
        assert_eq!(m, back);
        fs::remove_dir_all(&dir).unwrap();
    }
}
