//! Run configuration: a TOML file with nested sections, overridable by
//! command-line flags (flags win).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rcov_core::caw::CawOrder;
use rcov_core::evaluation::ModelSpec;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Top-level seed; every stochastic step derives a named stream from it.
    pub seed: Option<u64>,
    /// Rayon thread count; 0 or absent keeps the default.
    pub threads: Option<usize>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub session: Session,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub rcov: Rcov,
    #[serde(default)]
    pub factor: Factor,
    #[serde(default)]
    pub caw: Caw,
    #[serde(default)]
    pub var: Var,
    #[serde(default)]
    pub rolling: Rolling,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Root for all relative paths below.
    pub out_dir: PathBuf,
    pub tick_dir: PathBuf,
    pub panel_dir: PathBuf,
    pub matrix_dir: PathBuf,
    pub factor_dir: PathBuf,
    pub fit_dir: PathBuf,
    pub forecast_dir: PathBuf,
    pub eval_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            out_dir: PathBuf::from("out"),
            tick_dir: PathBuf::from("ticks"),
            panel_dir: PathBuf::from("panels"),
            matrix_dir: PathBuf::from("rcov"),
            factor_dir: PathBuf::from("factor"),
            fit_dir: PathBuf::from("fits"),
            forecast_dir: PathBuf::from("forecasts"),
            eval_dir: PathBuf::from("eval"),
        }
    }
}

impl Paths {
    /// Resolve a section path against the output root unless it is absolute.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub open: String,
    pub close: String,
    pub trim_minutes: u32,
    pub outlier_window: usize,
}

impl Default for Session {
    fn default() -> Self {
        Session {
            open: "09:30:00".to_string(),
            close: "16:00:00".to_string(),
            trim_minutes: 30,
            outlier_window: 30,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub interval_seconds: u32,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { interval_seconds: 300 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rcov {
    /// Off-diagonal entries below this fraction of the largest absolute
    /// entry are zeroed; 0 disables thresholding.
    pub threshold_fraction: f64,
    /// Clip negative eigenvalues after thresholding.
    pub psd_repair: bool,
}

impl Default for Rcov {
    fn default() -> Self {
        Rcov { threshold_fraction: 0.05, psd_repair: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factor {
    pub rank: usize,
}

impl Default for Factor {
    fn default() -> Self {
        Factor { rank: 3 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caw {
    /// Recursion order `[p, q]`.
    pub order: [usize; 2],
    /// Multistart count; absent uses 160 for rank <= 3 and 60 above.
    pub restarts: Option<usize>,
}

impl Default for Caw {
    fn default() -> Self {
        Caw { order: [1, 1], restarts: None }
    }
}

impl Caw {
    pub fn order(&self) -> Result<CawOrder> {
        CawOrder::new(self.order[0], self.order[1]).context("invalid CAW order in config")
    }

    pub fn restarts_for_rank(&self, rank: usize) -> usize {
        self.restarts.unwrap_or(if rank <= 3 { 160 } else { 60 })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Var {
    pub order: usize,
    pub max_order: usize,
}

impl Default for Var {
    fn default() -> Self {
        Var { order: 1, max_order: 5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rolling {
    pub k_min: usize,
    pub k_max: usize,
    pub horizons: Vec<usize>,
    /// Model labels like "caw(1,1)" or "var(1)".
    pub models: Vec<String>,
    /// Restarts per CAW fit inside the rolling harness.
    pub caw_restarts: usize,
    /// Optional ridge added before inverting matrices for the inverse
    /// errors; absent means exclusion-with-count.
    #[serde(default)]
    pub inverse_ridge: Option<f64>,
}

impl Default for Rolling {
    fn default() -> Self {
        Rolling {
            k_min: 80,
            k_max: 98,
            horizons: vec![1, 2, 3, 4, 5],
            models: vec!["caw(0,1)".into(), "caw(1,1)".into(), "var(1)".into()],
            caw_restarts: 20,
            inverse_ridge: None,
        }
    }
}

impl Rolling {
    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        self.models.iter().map(|s| parse_model(s)).collect()
    }
}

/// Parse a model label: `caw(p,q)`, `var(n)` or `perfect-foresight`.
pub fn parse_model(label: &str) -> Result<ModelSpec> {
    let label = label.trim().to_ascii_lowercase();
    if label == "perfect-foresight" {
        return Ok(ModelSpec::PerfectForesight);
    }
    if let Some(body) = label.strip_prefix("caw(").and_then(|s| s.strip_suffix(')')) {
        let parts: Vec<&str> = body.split(',').collect();
        if parts.len() == 2 {
            let p: usize = parts[0].trim().parse().context("bad p in caw(p,q)")?;
            let q: usize = parts[1].trim().parse().context("bad q in caw(p,q)")?;
            return Ok(ModelSpec::Caw { order: CawOrder::new(p, q)? });
        }
    }
    if let Some(body) = label.strip_prefix("var(").and_then(|s| s.strip_suffix(')')) {
        let n: usize = body.trim().parse().context("bad order in var(n)")?;
        if n < 1 {
            bail!("var order must be at least 1");
        }
        return Ok(ModelSpec::Var { order: n });
    }
    bail!("unrecognized model label {label:?}; expected caw(p,q), var(n) or perfect-foresight")
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("cannot parse config {}", p.display()))
            }
            None => Ok(RunConfig::default()),
        }
    }

    pub fn session_open_sec(&self) -> Result<f64> {
        parse_clock(&self.session.open)
    }

    pub fn session_close_sec(&self) -> Result<f64> {
        parse_clock(&self.session.close)
    }
}

fn parse_clock(text: &str) -> Result<f64> {
    rcov_core::market_data::parse_timestamp(text)
        .with_context(|| format!("invalid clock time {text:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_session() {
        let config = RunConfig::default();
        assert_eq!(config.session_open_sec().unwrap(), 34_200.0);
        assert_eq!(config.session_close_sec().unwrap(), 57_600.0);
        assert_eq!(config.grid.interval_seconds, 300);
        assert_eq!(config.rcov.threshold_fraction, 0.05);
        assert_eq!(config.caw.restarts_for_rank(3), 160);
        assert_eq!(config.caw.restarts_for_rank(4), 60);
    }

    #[test]
    fn parses_model_labels() {
        assert!(matches!(parse_model("caw(2,1)"), Ok(ModelSpec::Caw { .. })));
        assert!(matches!(parse_model("VAR(1)"), Ok(ModelSpec::Var { order: 1 })));
        assert!(matches!(parse_model("perfect-foresight"), Ok(ModelSpec::PerfectForesight)));
        assert!(parse_model("caw(1,0)").is_err());
        assert!(parse_model("garch").is_err());
    }

    #[test]
    fn parses_nested_toml() {
        let text = r#"
            seed = 7
            [factor]
            rank = 4
            [caw]
            order = [2, 2]
            restarts = 12
            [rolling]
            k_min = 10
            k_max = 12
            horizons = [1]
            models = ["caw(1,1)"]
            caw_restarts = 4
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(config.seed, Some(7));
        assert_eq!(config.factor.rank, 4);
        assert_eq!(config.caw.order, [2, 2]);
        assert_eq!(config.rolling.k_min, 10);
    }
}
