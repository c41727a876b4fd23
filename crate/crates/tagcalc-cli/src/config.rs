//! Key-value configuration file, overridden by command-line flags.
//!
//! Format: one `key = value` pair per line, `#` comments. Keys:
//!
//! ```text
//! grid.n = 512            # sample count, power of two
//! grid.l = 20.0           # grid extent
//! normalize.mode = distributional | paper-faithful
//! normalize.step_budget = 100000
//! output = text | json | csv
//! seed = 7
//! ```
//!
//! The file is found via `--config PATH` or the `TAGCALC_CONFIG` variable.

use tagcalc_core::rewrite::{NormalizeMode, DEFAULT_STEP_BUDGET};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub grid_n: usize,
    pub grid_l: f64,
    pub mode: NormalizeMode,
    pub step_budget: usize,
    pub output: OutputFormat,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
    /// Tabular output for the check report and Wigner maps; commands
    /// without a tabular form fall back to text.
    Csv,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            grid_n: 512,
            grid_l: 20.0,
            mode: NormalizeMode::Distributional,
            step_budget: DEFAULT_STEP_BUDGET,
            output: OutputFormat::Text,
            seed: 7,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl Config {
    pub fn load(path: Option<&str>) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let env_path = std::env::var("TAGCALC_CONFIG").ok();
        let chosen = path.map(str::to_string).or(env_path);
        if let Some(p) = chosen {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| ConfigError(format!("cannot read {p}: {e}")))?;
            cfg.apply_text(&text)?;
        }
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!("line {}: expected key = value", lineno + 1)));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| ConfigError(format!("line {}: {}", lineno + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "grid.n" => {
                self.grid_n = value
                    .parse()
                    .map_err(|_| ConfigError(format!("grid.n: bad integer `{value}`")))?
            }
            "grid.l" => {
                self.grid_l = value
                    .parse()
                    .map_err(|_| ConfigError(format!("grid.l: bad number `{value}`")))?
            }
            "normalize.mode" => self.mode = parse_mode(value)?,
            "normalize.step_budget" => {
                self.step_budget = value
                    .parse()
                    .map_err(|_| ConfigError(format!("step_budget: bad integer `{value}`")))?
            }
            "output" => {
                self.output = match value {
                    "text" => OutputFormat::Text,
                    "json" => OutputFormat::Json,
                    "csv" => OutputFormat::Csv,
                    other => return Err(ConfigError(format!("output: unknown format `{other}`"))),
                }
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| ConfigError(format!("seed: bad integer `{value}`")))?
            }
            other => return Err(ConfigError(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid_n < 8 || !self.grid_n.is_power_of_two() {
            return Err(ConfigError(format!(
                "grid.n = {} must be a power of two, at least 8",
                self.grid_n
            )));
        }
        if !(self.grid_l.is_finite() && self.grid_l > 0.0) {
            return Err(ConfigError("grid.l must be positive".into()));
        }
        if self.step_budget == 0 {
            return Err(ConfigError("normalize.step_budget must be positive".into()));
        }
        Ok(())
    }
}

pub fn parse_mode(value: &str) -> Result<NormalizeMode, ConfigError> {
    match value {
        "distributional" => Ok(NormalizeMode::Distributional),
        "paper-faithful" | "paperfaithful" => Ok(NormalizeMode::PaperFaithful),
        other => Err(ConfigError(format!("unknown normalize mode `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let mut cfg = Config::default();
        cfg.apply_text("grid.n = 256\n# comment\ngrid.l = 16.0\nnormalize.mode = paper-faithful\n")
            .unwrap();
        assert_eq!(cfg.grid_n, 256);
        assert_eq!(cfg.grid_l, 16.0);
        assert_eq!(cfg.mode, NormalizeMode::PaperFaithful);
        cfg.validate().unwrap();
        cfg.grid_n = 96;
        assert!(cfg.validate().is_err());
    }
}
