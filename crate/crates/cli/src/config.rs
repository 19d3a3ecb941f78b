//! Flat key=value experiment configuration with command-line overrides.
//!
//! One experiment is one config file and one output directory. Lines are
//! `key = value`; `#` starts a comment; lists are comma-separated; booleans
//! are `true`/`false`; `auto` selects the derived default where noted.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pilotcluster_core::game::Budget;
use pilotcluster_core::utility::CombiningScheme;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected key=value, got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("bad value for '{key}': {reason}")]
    BadValue { key: String, reason: String },
    #[error("missing required key '{0}'")]
    Missing(String),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

/// The variable swept by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Cells,
    Antennas,
    KMax,
    Alpha,
    Budget,
}

impl SweepVar {
    pub fn key(&self) -> &'static str {
        match self {
            SweepVar::Cells => "L",
            SweepVar::Antennas => "M",
            SweepVar::KMax => "K_max",
            SweepVar::Alpha => "alpha",
            SweepVar::Budget => "q",
        }
    }
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "L" => Ok(SweepVar::Cells),
            "M" => Ok(SweepVar::Antennas),
            "K_max" | "k_max" => Ok(SweepVar::KMax),
            "alpha" => Ok(SweepVar::Alpha),
            "q" => Ok(SweepVar::Budget),
            other => Err(format!("unknown sweep variable '{other}' (L|M|K_max|alpha|q)")),
        }
    }
}

/// One point of the sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Count(usize),
    Fraction(f64),
    Budget(Budget),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Count(v) => write!(f, "{v}"),
            SweepValue::Fraction(v) => write!(f, "{v}"),
            SweepValue::Budget(b) => write!(f, "{b}"),
        }
    }
}

/// `auto` or an explicit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutoOr {
    Auto,
    Value(usize),
}

/// Parsed experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub schemes: Vec<CombiningScheme>,
    pub sweep: SweepVar,
    pub values: Vec<SweepValue>,
    pub cells: usize,
    pub antennas: usize,
    pub frame_symbols: usize,
    pub alpha: f64,
    pub snr_db: f64,
    pub density: f64,
    pub gamma: f64,
    pub d_min: f64,
    pub k_max: AutoOr,
    pub budget: Budget,
    pub n_deployments: usize,
    pub mu_samples: usize,
    pub init_singletons: bool,
    pub init_random: bool,
    pub baselines: bool,
    pub exhaustive: bool,
    pub max_rounds: AutoOr,
    pub target_avg_size: AutoOr,
    pub out_dir: PathBuf,
    // validate-subcommand extras
    pub val_structure: String,
    pub n_position_draws: usize,
    pub n_channel_draws: usize,
    pub max_rel_gap: f64,
}

impl ExperimentConfig {
    /// Reads a config file and applies `key=value` overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: 0,
                text: item.clone(),
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Self::from_map(map)
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        fn take<T: FromStr>(
            map: &mut BTreeMap<String, String>,
            key: &str,
            default: Option<T>,
        ) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            match map.remove(key) {
                Some(text) => text.parse().map_err(|e: T::Err| ConfigError::BadValue {
                    key: key.into(),
                    reason: e.to_string(),
                }),
                None => default.ok_or_else(|| ConfigError::Missing(key.into())),
            }
        }

        fn take_auto(map: &mut BTreeMap<String, String>, key: &str) -> Result<AutoOr> {
            match map.remove(key).as_deref() {
                None | Some("auto") => Ok(AutoOr::Auto),
                Some(text) => text
                    .parse()
                    .map(AutoOr::Value)
                    .map_err(|_| ConfigError::BadValue {
                        key: key.into(),
                        reason: format!("expected 'auto' or an integer, got '{text}'"),
                    }),
            }
        }

        let seed = take(&mut map, "seed", None)?;
        let schemes_text: String = take(&mut map, "schemes", Some("mrc,zfc".into()))?;
        let schemes = schemes_text
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| ConfigError::BadValue {
                    key: "schemes".into(),
                    reason: format!("unknown scheme '{s}'"),
                })
            })
            .collect::<Result<Vec<CombiningScheme>>>()?;

        let sweep: SweepVar = map
            .remove("sweep")
            .ok_or_else(|| ConfigError::Missing("sweep".into()))?
            .parse()
            .map_err(|reason| ConfigError::BadValue {
                key: "sweep".into(),
                reason,
            })?;

        let values_text = map
            .remove("values")
            .ok_or_else(|| ConfigError::Missing("values".into()))?;
        let values = values_text
            .split(',')
            .map(|raw| parse_sweep_value(sweep, raw.trim()))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(ConfigError::BadValue {
                key: "values".into(),
                reason: "need at least one sweep value".into(),
            });
        }

        let inits_text: String = take(&mut map, "inits", Some("singletons,random".into()))?;
        let mut init_singletons = false;
        let mut init_random = false;
        for init in inits_text.split(',') {
            match init.trim() {
                "singletons" => init_singletons = true,
                "random" => init_random = true,
                "" => {}
                other => {
                    return Err(ConfigError::BadValue {
                        key: "inits".into(),
                        reason: format!("unknown initialization '{other}'"),
                    })
                }
            }
        }

        let budget_text: String = take(&mut map, "q", Some("inf".into()))?;
        let budget = budget_text.parse().map_err(|_| ConfigError::BadValue {
            key: "q".into(),
            reason: format!("expected 'inf' or an integer, got '{budget_text}'"),
        })?;

        let config = Self {
            seed,
            schemes,
            sweep,
            values,
            cells: take(&mut map, "L", Some(16))?,
            antennas: take(&mut map, "M", Some(500))?,
            frame_symbols: take(&mut map, "S", Some(400))?,
            alpha: take(&mut map, "alpha", Some(0.5))?,
            snr_db: take(&mut map, "snr_db", Some(5.0))?,
            density: take(&mut map, "density", Some(25.0))?,
            gamma: take(&mut map, "gamma", Some(3.0))?,
            d_min: take(&mut map, "d_min", Some(10.0))?,
            k_max: take_auto(&mut map, "k_max")?,
            budget,
            n_deployments: take(&mut map, "n_deployments", Some(100))?,
            mu_samples: take(&mut map, "mu_samples", Some(10_000))?,
            init_singletons,
            init_random,
            baselines: take(&mut map, "baselines", Some(true))?,
            exhaustive: take(&mut map, "exhaustive", Some(false))?,
            max_rounds: take_auto(&mut map, "max_rounds")?,
            target_avg_size: take_auto(&mut map, "target_avg_size")?,
            out_dir: PathBuf::from(take::<String>(&mut map, "out_dir", Some("out".into()))?),
            val_structure: take(&mut map, "val_structure", Some("random".into()))?,
            n_position_draws: take(&mut map, "n_position_draws", Some(100))?,
            n_channel_draws: take(&mut map, "n_channel_draws", Some(40))?,
            max_rel_gap: take(&mut map, "max_rel_gap", Some(0.05))?,
        };

        if let Some(unknown) = map.into_keys().next() {
            return Err(ConfigError::UnknownKey(unknown));
        }
        if config.schemes.is_empty() {
            return Err(ConfigError::BadValue {
                key: "schemes".into(),
                reason: "need at least one combining scheme".into(),
            });
        }
        Ok(config)
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

fn parse_sweep_value(sweep: SweepVar, raw: &str) -> Result<SweepValue> {
    let bad = |reason: String| ConfigError::BadValue {
        key: "values".into(),
        reason,
    };
    match sweep {
        SweepVar::Cells | SweepVar::Antennas | SweepVar::KMax => raw
            .parse()
            .map(SweepValue::Count)
            .map_err(|_| bad(format!("expected an integer, got '{raw}'"))),
        SweepVar::Alpha => raw
            .parse()
            .map(SweepValue::Fraction)
            .map_err(|_| bad(format!("expected a fraction, got '{raw}'"))),
        SweepVar::Budget => raw
            .parse::<Budget>()
            .map(SweepValue::Budget)
            .map_err(|_| bad(format!("expected 'inf' or an integer, got '{raw}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write;

    fn write_config(content: &str) -> tempdir::TempConfig {
        tempdir::TempConfig::new(content)
    }

    mod tempdir {
        use std::path::{Path, PathBuf};

        pub struct TempConfig {
            path: PathBuf,
        }

        impl TempConfig {
            pub fn new(content: &str) -> Self {
                let path = std::env::temp_dir().join(format!(
                    "pilotcluster-config-{}-{}.txt",
                    std::process::id(),
                    content.len()
                ));
                std::fs::write(&path, content).unwrap();
                Self { path }
            }

            pub fn path(&self) -> &Path {
                &self.path
            }
        }

        impl Drop for TempConfig {
            fn drop(&mut self) {
                let _ = std::fs::remove_file(&self.path);
            }
        }
    }

    #[test]
    fn parses_a_minimal_config() {
        let cfg = write_config("seed = 7\nsweep = L\nvalues = 4,5,6\n");
        let parsed = ExperimentConfig::load(cfg.path(), &[]).unwrap();
        assert_eq!(parsed.seed, 7);
        assert_eq!(parsed.sweep, SweepVar::Cells);
        assert_eq!(parsed.values.len(), 3);
        assert_eq!(parsed.antennas, 500);
        assert!(parsed.init_singletons && parsed.init_random);
        assert_eq!(parsed.schemes.len(), 2);
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = write_config("seed = 7\nsweep = L\nvalues = 4\nM = 100\n");
        let parsed =
            ExperimentConfig::load(cfg.path(), &["M=250".into(), "seed=9".into()]).unwrap();
        assert_eq!(parsed.antennas, 250);
        assert_eq!(parsed.seed, 9);
    }

    #[test]
    fn budget_sweep_accepts_inf() {
        let cfg = write_config("seed = 1\nsweep = q\nvalues = 0,1,2,inf\n");
        let parsed = ExperimentConfig::load(cfg.path(), &[]).unwrap();
        assert_eq!(parsed.values[3], SweepValue::Budget(Budget::Infinite));
        assert_eq!(parsed.values[0], SweepValue::Budget(Budget::Finite(0)));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let cfg = write_config("seed = 1\nsweep = L\nvalues = 4\nbogus = 1\n");
        assert!(matches!(
            ExperimentConfig::load(cfg.path(), &[]),
            Err(ConfigError::UnknownKey(_))
        ));
        let cfg = write_config("seed = 1\nsweep = L\nvalues = x\n");
        assert!(matches!(
            ExperimentConfig::load(cfg.path(), &[]),
            Err(ConfigError::BadValue { .. })
        ));
        let cfg = write_config("sweep = L\nvalues = 4\n");
        assert!(matches!(
            ExperimentConfig::load(cfg.path(), &[]),
            Err(ConfigError::Missing(_))
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut content = String::new();
        writeln!(content, "# experiment").unwrap();
        writeln!(content).unwrap();
        writeln!(content, "seed = 3  # master seed").unwrap();
        writeln!(content, "sweep = M").unwrap();
        writeln!(content, "values = 100, 200").unwrap();
        let cfg = write_config(&content);
        let parsed = ExperimentConfig::load(cfg.path(), &[]).unwrap();
        assert_eq!(parsed.seed, 3);
        assert_eq!(parsed.values, vec![SweepValue::Count(100), SweepValue::Count(200)]);
    }
}
