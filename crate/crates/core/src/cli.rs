//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::beam_design::Weights;
use crate::channel::{self, ChannelDump};
use crate::config::{self, ExperimentConfig, Manifest, Overrides, Profile};
use crate::error::{Error, Result};
use crate::output::{self, CellChannels, PoliciesFile};
use crate::region::{self, RegionPoint, TwoPointPolicy};

#[derive(Debug, Parser)]
#[command(name = "wpt-region", version, about = "Harvested-power region of two-user MISO wireless power transfer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for channel draws and solver starts.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Average transmit power budget, W.
    #[arg(long)]
    pub px: Option<f64>,
    /// Number of transmit antennas.
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long, value_enum, default_value_t = Profile::Paper)]
    pub profile: Profile,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the rectenna transfer function.
    EhCurve {
        #[arg(long, default_value_t = 0.0)]
        p_min: f64,
        #[arg(long, default_value_t = 50e-6)]
        p_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Best harvested power and beamformer over the power grid for one channel draw.
    PhiCurve {
        #[arg(long, default_value_t = 0.5)]
        xi1: f64,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Two-point policy and average powers for one (weight, channel draw) cell.
    Point {
        #[arg(long, default_value_t = 0.5)]
        xi1: f64,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Full weight and channel sweep.
    Region {
        #[command(flatten)]
        common: Common,
    },
    /// Dump the channel draws.
    Channels {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::EhCurve { .. } => "eh-curve",
            Command::PhiCurve { .. } => "phi-curve",
            Command::Point { .. } => "point",
            Command::Region { .. } => "region",
            Command::Channels { .. } => "channels",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::EhCurve { common, .. }
            | Command::PhiCurve { common, .. }
            | Command::Point { common, .. }
            | Command::Region { common }
            | Command::Channels { common } => common,
        }
    }
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let overrides = Overrides { seed: common.seed, p_x: common.px, n_t: common.nt, output_dir: common.out.clone() };
    config::load(common.profile, common.config.as_deref(), &overrides)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Serialize)]
struct PointReport {
    xi1: f64,
    realization: u64,
    p_x: f64,
    policy: TwoPointPolicy,
    e1: f64,
    e2: f64,
    baseline_linear: RegionPoint,
    baseline_single_beam: RegionPoint,
}

pub fn run(cli: Cli) -> Result<()> {
    let command = cli.command;
    let cfg = resolve(command.common())?;
    let dir = cfg.output_dir.clone();
    prepare_dir(&dir)?;
    output::write_json(&dir.join("manifest.json"), &Manifest::new(command.name(), &cfg))?;

    match command {
        Command::EhCurve { p_min, p_max, points, .. } => {
            if !(p_min >= 0.0 && p_max > p_min) || points < 2 {
                return Err(Error::Config(format!(
                    "eh-curve needs 0 <= p_min < p_max and at least 2 points, got {p_min}, {p_max}, {points}"
                )));
            }
            let mut text = String::from("p_watts,phi_watts,phi_prime\n");
            for k in 0..points {
                let p = p_min + (p_max - p_min) * k as f64 / (points - 1) as f64;
                writeln!(text, "{},{},{}", p, cfg.rectenna.phi(p)?, cfg.rectenna.phi_prime(p)?).unwrap();
            }
            output::write_text(&dir.join("eh_curve.csv"), &text)?;
        }
        Command::PhiCurve { xi1, realization, .. } => {
            let channels = channel::draw_channel_pair(&cfg.channel, realization)?;
            let weights = Weights::new(xi1)?;
            let seed = region::cell_seed(cfg.seed, xi1, realization);
            let curve = region::build_phi_curve(&channels, weights, &cfg.rectenna, &cfg.grid, &cfg.sca, seed)?;
            log::info!("phi-curve: {} points, saturated={}, repairs={}", curve.points.len(), curve.saturated, curve.repairs);
            output::write_text(&dir.join("phi_curve.csv"), &output::phi_curve_csv(&curve))?;
            output::write_json(&dir.join("phi_curve.json"), &curve)?;
        }
        Command::Point { xi1, realization, .. } => {
            let sweep = cfg.sweep()?;
            let cell = region::solve_cell(&sweep, xi1, realization, &[cfg.p_x])?;
            let schemes = &cell.by_budget[0];
            let report = PointReport {
                xi1,
                realization,
                p_x: cfg.p_x,
                policy: schemes.proposed.policy.clone(),
                e1: schemes.proposed.e1,
                e2: schemes.proposed.e2,
                baseline_linear: schemes.baseline_linear.clone(),
                baseline_single_beam: schemes.baseline_single_beam.clone(),
            };
            output::write_json(&dir.join("point.json"), &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Region { .. } => {
            let sweep = cfg.sweep()?;
            let result = region::sweep_region(&sweep, &[cfg.p_x])?;
            if !result.failures.is_empty() {
                log::warn!("{} cells failed and were excluded", result.failures.len());
            }
            let channels = (0..cfg.n_realizations as u64)
                .map(|r| Ok(CellChannels { realization: r, channels: channel::draw_channel_pair(&cfg.channel, r)? }))
                .collect::<Result<Vec<_>>>()?;
            output::write_text(&dir.join("region.csv"), &output::region_csv(&result.rows[0]))?;
            output::write_json(&dir.join("policies.json"), &PoliciesFile::from_sweep(&result, 0, channels))?;
        }
        Command::Channels { .. } => {
            let realizations = (0..cfg.n_realizations as u64)
                .map(|r| channel::draw_channel_pair(&cfg.channel, r))
                .collect::<Result<Vec<_>>>()?;
            channel::save_channels(&dir.join("channels.json"), &ChannelDump { config: cfg.channel, realizations })?;
        }
    }
    Ok(())
}
