//! Experiment configuration: profile defaults, TOML files, manifest replay.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beam_design::{ScaOptions, Weights};
use crate::channel::ChannelConfig;
use crate::eh_model::RectennaParams;
use crate::error::{Error, Result};
use crate::region::{GridSpec, SweepConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Full-size experiment settings.
    Paper,
    /// Coarse grid and few realizations; runs in minutes.
    Desk,
}

/// Either an explicit list or an inclusive `start..=stop` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum WeightSpec {
    List { list: Vec<f64> },
    Range { start: f64, stop: f64, step: f64 },
}

impl WeightSpec {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        let values = match *self {
            WeightSpec::List { ref list } => list.clone(),
            WeightSpec::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) {
                    return Err(Error::Config(format!("weights range needs step > 0 and stop >= start, got {start}..{stop} by {step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                // snap to 12 decimals so 0.05-steps print cleanly
                (0..=n).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect()
            }
        };
        for &xi in &values {
            Weights::new(xi).map_err(|_| Error::Config(format!("weight {xi} outside [0, 1]")))?;
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Average transmit power budget, W.
    pub p_x: f64,
    pub n_realizations: usize,
    pub output_dir: PathBuf,
    pub rectenna: RectennaParams,
    pub channel: ChannelConfig,
    pub grid: GridSpec,
    pub sca: ScaOptions,
    pub weights: WeightSpec,
}

impl ExperimentConfig {
    pub fn profile(profile: Profile) -> Self {
        let base = Self {
            seed: 1,
            p_x: 5.0,
            n_realizations: 100,
            output_dir: PathBuf::from("out"),
            rectenna: RectennaParams::default(),
            channel: ChannelConfig { n_t: 4, d1: 10.0, d2: 25.0, rician_k: 1.0, seed: 1 },
            grid: GridSpec { delta_rho: 0.1, n_rho: 1000 },
            sca: ScaOptions::default(),
            weights: WeightSpec::Range { start: 0.0, stop: 1.0, step: 0.05 },
        };
        match profile {
            Profile::Paper => base,
            Profile::Desk => Self {
                n_realizations: 10,
                grid: GridSpec { delta_rho: 0.25, n_rho: 200 },
                weights: WeightSpec::Range { start: 0.0, stop: 1.0, step: 0.25 },
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rectenna.validate()?;
        self.channel.validate()?;
        self.grid.validate()?;
        self.sca.validate()?;
        self.weights.resolve()?;
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be at least 1".into()));
        }
        if !(self.p_x.is_finite() && self.p_x > 0.0) {
            return Err(Error::Config(format!("p_x must be positive, got {}", self.p_x)));
        }
        if self.p_x > self.grid.last() + 1e-12 {
            return Err(Error::Config(format!(
                "p_x = {} W exceeds the grid end delta_rho * n_rho = {} W",
                self.p_x,
                self.grid.last()
            )));
        }
        Ok(())
    }

    pub fn sweep(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            params: self.rectenna,
            channel: self.channel,
            grid: self.grid,
            sca: self.sca,
            weights: self.weights.resolve()?,
            n_realizations: self.n_realizations,
            seed: self.seed,
        })
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub p_x: Option<f64>,
    pub n_t: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // weight specs replace wholesale: list and range do not mix
                    Some(slot) if k != "weights" => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Profile defaults, then the config file (TOML, or a `manifest.json` from an
/// earlier run), then command-line overrides.
///
/// A file that sets `seed` but not `channel.seed` draws channels from `seed`.
pub fn load(profile: Profile, path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut value = toml::Value::try_from(ExperimentConfig::profile(profile))
        .map_err(|e| Error::Config(format!("cannot encode defaults: {e}")))?;
    let mut channel_seed_given = false;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: toml::Value = if path.extension().is_some_and(|e| e == "json") {
            let manifest: Manifest = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: not a manifest: {e}", path.display())))?;
            toml::Value::try_from(manifest.config).map_err(|e| Error::Config(e.to_string()))?
        } else {
            text.parse::<toml::Table>()
                .map(toml::Value::Table)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        channel_seed_given = file.get("channel").and_then(|c| c.get("seed")).is_some();
        merge(&mut value, file);
    }
    let mut config: ExperimentConfig =
        value.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    if !channel_seed_given {
        config.channel.seed = config.seed;
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
        config.channel.seed = seed;
    }
    if let Some(p) = overrides.p_x {
        config.p_x = p;
    }
    if let Some(n) = overrides.n_t {
        config.channel.n_t = n;
    }
    if let Some(dir) = &overrides.output_dir {
        config.output_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Written next to every output; feeding it back through `--config`
/// reproduces the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn weight_ranges() {
        let w = WeightSpec::Range { start: 0.0, stop: 1.0, step: 0.05 }.resolve().unwrap();
        assert_eq!(w.len(), 21);
        assert_eq!(w[3], 0.15);
        assert_eq!(*w.last().unwrap(), 1.0);
        let w = WeightSpec::Range { start: 0.0, stop: 1.0, step: 0.25 }.resolve().unwrap();
        assert_eq!(w, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(WeightSpec::List { list: vec![1.2] }.resolve().is_err());
        assert!(WeightSpec::List { list: vec![] }.resolve().unwrap().is_empty());
    }

    #[test]
    fn one_line_config_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.toml", "seed = 9\n");
        let cfg = load(Profile::Desk, Some(&p), &Overrides::default()).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.channel.seed, 9);
        assert_eq!(cfg.grid, GridSpec { delta_rho: 0.25, n_rho: 200 });
        let ov = Overrides { seed: Some(3), p_x: Some(30.0), n_t: Some(2), output_dir: None };
        let cfg = load(Profile::Paper, Some(&p), &ov).unwrap();
        assert_eq!((cfg.seed, cfg.channel.seed, cfg.p_x, cfg.channel.n_t), (3, 3, 30.0, 2));
        assert_eq!(cfg.grid.n_rho, 1000);
    }

    #[test]
    fn sections_merge_field_by_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.toml", "[channel]\nd2 = 40.0\nseed = 77\n[weights]\nlist = [0.5]\n");
        let cfg = load(Profile::Desk, Some(&p), &Overrides::default()).unwrap();
        assert_eq!(cfg.channel.d2, 40.0);
        assert_eq!(cfg.channel.d1, 10.0);
        assert_eq!(cfg.channel.seed, 77);
        assert_eq!(cfg.weights.resolve().unwrap(), vec![0.5]);
    }

    #[test]
    fn bad_configs_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for text in ["bogus = 1\n", "p_x = -1.0\n", "p_x = 500.0\n", "[grid]\ndelta_rho = 0.0\n", "seed = \n"] {
            let p = write(dir.path(), "c.toml", text);
            assert!(matches!(load(Profile::Desk, Some(&p), &Overrides::default()), Err(Error::Config(_))), "{text}");
        }
        assert!(load(Profile::Desk, Some(Path::new("/nonexistent.toml")), &Overrides::default()).is_err());
    }

    #[test]
    fn manifest_replays() {
        let dir = tempfile::tempdir().unwrap();
        let ov = Overrides { seed: Some(5), p_x: Some(30.0), n_t: Some(1), output_dir: Some("x".into()) };
        let cfg = load(Profile::Desk, None, &ov).unwrap();
        let m = Manifest::new("region", &cfg);
        let p = write(dir.path(), "manifest.json", &serde_json::to_string(&m).unwrap());
        let again = load(Profile::Paper, Some(&p), &Overrides::default()).unwrap();
        assert_eq!(again, cfg);
    }
}
