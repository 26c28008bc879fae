//! Flat `key = value` experiment configs, one experiment per file.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use skewlab_core::engine::default_steps;
use skewlab_core::{GridSpec, ModelSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: cannot parse `{value}` as {what}")]
    Parse {
        key: &'static str,
        value: String,
        what: &'static str,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Price,
    Smile,
    Swaps,
    ApproxCheck,
    LimitLadder,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Price => "price",
            Experiment::Smile => "smile",
            Experiment::Swaps => "swaps",
            Experiment::ApproxCheck => "approx_check",
            Experiment::LimitLadder => "limit_ladder",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

const KEYS: [&str; 15] = [
    "experiment",
    "spot",
    "sigma0",
    "alpha",
    "rho",
    "tau",
    "steps",
    "paths",
    "seed",
    "antithetic",
    "taus",
    "strikes",
    "output_path",
    "output_format",
    "plot_path",
];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelSpec,
    pub grid: GridSpec,
    /// Steps as given; `None` means the per-maturity default rule.
    pub steps: Option<usize>,
    pub taus: Vec<f64>,
    pub strikes: Vec<f64>,
    pub output_path: Option<PathBuf>,
    pub output_format: Format,
    pub plot_path: Option<PathBuf>,
}

struct Raw {
    values: BTreeMap<&'static str, String>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (k, v) = t.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                text: t.to_string(),
            })?;
            let k = k.trim();
            let key =
                KEYS.iter()
                    .find(|&&known| known == k)
                    .ok_or_else(|| ConfigError::UnknownKey {
                        line: line_no,
                        key: k.to_string(),
                    })?;
            if values.insert(*key, v.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate {
                    line: line_no,
                    key: k.to_string(),
                });
            }
        }
        Ok(Self { values })
    }

    fn get(&self, key: &'static str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn require(&self, key: &'static str) -> Result<&str, ConfigError> {
        self.get(key).ok_or(ConfigError::Missing(key))
    }

    fn parse_as<T: std::str::FromStr>(
        &self,
        key: &'static str,
        what: &'static str,
    ) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::Parse {
                    key,
                    value: v.to_string(),
                    what,
                })
            })
            .transpose()
    }

    fn real(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.parse_as(key, "a real number")?;
        match v {
            Some(x) if !x.is_finite() => Err(ConfigError::Parse {
                key,
                value: self.get(key).unwrap_or_default().to_string(),
                what: "a finite real number",
            }),
            v => Ok(v),
        }
    }

    fn list(&self, key: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ConfigError::Parse {
                        key,
                        value: item.to_string(),
                        what: "a list of real numbers",
                    })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw = Raw::parse(text)?;
        let experiment = match raw.require("experiment")? {
            "price" => Experiment::Price,
            "smile" => Experiment::Smile,
            "swaps" => Experiment::Swaps,
            "approx_check" => Experiment::ApproxCheck,
            "limit_ladder" => Experiment::LimitLadder,
            other => {
                return Err(ConfigError::Parse {
                    key: "experiment",
                    value: other.to_string(),
                    what: "one of price, smile, swaps, approx_check, limit_ladder",
                })
            }
        };
        let need = |key: &'static str| raw.real(key)?.ok_or(ConfigError::Missing(key));

        let spot = raw.real("spot")?.unwrap_or(1.0);
        let sigma0 = need("sigma0")?;
        let alpha = need("alpha")?;
        let rho = need("rho")?;
        let taus = raw.list("taus")?.unwrap_or_default();
        let strikes = raw.list("strikes")?.unwrap_or_default();
        let tau = match experiment {
            Experiment::LimitLadder => {
                if raw.get("taus").is_none() {
                    return Err(ConfigError::Missing("taus"));
                }
                if taus.is_empty() {
                    return Err(ConfigError::Invalid("`taus` must not be empty".into()));
                }
                if !strikes.is_empty() {
                    return Err(ConfigError::Invalid(
                        "`strikes` is not used by limit_ladder (each maturity uses its own grid)"
                            .into(),
                    ));
                }
                match raw.real("tau")? {
                    Some(t) => t,
                    None => taus[0],
                }
            }
            _ => {
                if raw.get("taus").is_some() {
                    return Err(ConfigError::Invalid(format!(
                        "`taus` is only used by limit_ladder, not {}",
                        experiment.name()
                    )));
                }
                need("tau")?
            }
        };
        let model = ModelSpec::new(spot, sigma0, alpha, rho, tau)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if experiment == Experiment::LimitLadder {
            skewlab_core::lab::validate_ladder(&taus)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if strikes.iter().any(|&k| !(k > 0.0)) {
            return Err(ConfigError::Invalid("strikes must be positive".into()));
        }
        if strikes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ConfigError::Invalid(
                "strikes must be strictly increasing".into(),
            ));
        }

        let steps: Option<usize> = raw.parse_as("steps", "a positive integer")?;
        let paths: usize = raw
            .parse_as("paths", "a positive integer")?
            .ok_or(ConfigError::Missing("paths"))?;
        let seed: u64 = raw
            .parse_as("seed", "an unsigned 64-bit integer")?
            .ok_or(ConfigError::Missing("seed"))?;
        let antithetic: bool = raw.parse_as("antithetic", "true or false")?.unwrap_or(true);
        let grid = GridSpec::new(
            steps.unwrap_or_else(|| default_steps(tau)),
            paths,
            seed,
            antithetic,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let output_format = match raw.get("output_format") {
            None => Format::Csv,
            Some(f) => Format::parse(f).ok_or_else(|| ConfigError::Parse {
                key: "output_format",
                value: f.to_string(),
                what: "csv or json",
            })?,
        };
        let path = |key| raw.get(key).filter(|p| !p.is_empty()).map(PathBuf::from);

        Ok(Self {
            experiment,
            model,
            grid,
            steps,
            taus,
            strikes,
            output_path: path("output_path"),
            output_format,
            plot_path: path("plot_path"),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LADDER: &str = "
# slope limit ladder
experiment = limit_ladder
sigma0 = 0.2
alpha = 0.6
rho = -0.7
taus = 0.0833333333, 0.0384615385, 0.0192307692
paths = 1000
seed = 42
";

    #[test]
    fn parses_ladder_with_defaults() {
        let c = ExperimentConfig::parse(LADDER).unwrap();
        assert_eq!(c.experiment, Experiment::LimitLadder);
        assert_eq!(c.taus.len(), 3);
        assert_eq!(c.model.spot, 1.0);
        assert_eq!(c.model.tau, c.taus[0]);
        assert!(c.grid.antithetic);
        assert_eq!(c.steps, None);
        assert_eq!(c.output_format, Format::Csv);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            LADDER.replace("rho = -0.7", "rho = 1.5"),
            LADDER.replace("seed = 42", ""),
            LADDER.replace("taus = 0.0833333333, 0.0384615385, 0.0192307692", "taus ="),
            LADDER.replace(
                "taus = 0.0833333333, 0.0384615385, 0.0192307692",
                "taus = 0.01, 0.02",
            ),
            LADDER.replace("paths = 1000", "paths = many"),
            format!("{LADDER}\nvolatility = 3"),
            format!("{LADDER}\nseed = 1"),
            format!("{LADDER}\nnot a pair"),
            LADDER.replace("limit_ladder", "price"),
        ];
        for text in bad {
            assert!(ExperimentConfig::parse(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn price_needs_tau() {
        let text = "experiment=price\nsigma0=0.2\nalpha=0\nrho=0\npaths=10\nseed=1\n";
        assert!(matches!(
            ExperimentConfig::parse(text),
            Err(ConfigError::Missing("tau"))
        ));
        let c = ExperimentConfig::parse(&format!("{text}tau=0.5\nstrikes=0.9,1.1\n")).unwrap();
        assert_eq!(c.strikes, vec![0.9, 1.1]);
        assert_eq!(c.grid.steps, 256);
    }
}
