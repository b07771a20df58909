//! Run configuration: command-line flags merged over an optional
//! `key = value` file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "torus-billiard", version, about = "Billiards on the 3-torus with cylindrical scatterers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate random orbits and write a summary table.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write one event file per orbit under `<out-dir>/records`.
        #[arg(long)]
        records: bool,
    },
    /// Build, minimize and validate the admissible orbit of a word.
    Construct {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        word: Option<String>,
        #[arg(long)]
        target_speed: Option<f64>,
        /// Close the orbit periodically instead of anchoring its ends.
        #[arg(long)]
        periodic: bool,
        /// Leave crossing compartments through the alternative exit edge.
        #[arg(long)]
        alt_cross_exit: bool,
    },
    /// Sample rotation vectors and aggregate them into a prefix tree.
    RotationSet {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        prefix_len: Option<usize>,
        /// Comma-separated words whose constructed orbits are added.
        #[arg(long)]
        words: Option<String>,
    },
    /// Count partition itineraries and compare with the entropy bounds.
    Entropy {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated increasing times; defaults to `--T`.
        #[arg(long)]
        grid: Option<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long = "T")]
    pub duration: Option<f64>,
    #[arg(long = "n")]
    pub n_orbits: Option<usize>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for output files; without it the main table goes to stdout.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub r0: f64,
    pub duration: f64,
    pub n_orbits: usize,
    pub eps0: f64,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub word: Option<String>,
    pub target_speed: Option<f64>,
    pub periodic: bool,
    pub alt_cross_exit: bool,
    pub records: bool,
    pub prefix_len: usize,
    pub words: Vec<String>,
    pub grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            r0: 0.1,
            duration: 100.0,
            n_orbits: 100,
            eps0: 0.1,
            seed: 0,
            jobs: None,
            out_dir: None,
            word: None,
            target_speed: None,
            periodic: false,
            alt_cross_exit: false,
            records: false,
            prefix_len: torus_billiard::rotation::DEFAULT_PREFIX_LEN,
            words: Vec::new(),
            grid: Vec::new(),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "r0",
    "T",
    "n",
    "eps0",
    "seed",
    "jobs",
    "out_dir",
    "word",
    "target_speed",
    "periodic",
    "alt_cross_exit",
    "records",
    "prefix_len",
    "words",
    "grid",
];

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("config line {}: expected key = value", no + 1)));
        };
        let k = k.trim();
        if !KNOWN_KEYS.contains(&k) {
            return Err(CliError::Config(format!("config line {}: unknown key {k:?}", no + 1)));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_text(&text)
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("invalid value {v:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_value(key, s)).collect()
}

/// Flags from one subcommand, all optional so that the file can fill gaps.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub common: CommonArgs,
    pub word: Option<String>,
    pub target_speed: Option<f64>,
    pub periodic: bool,
    pub alt_cross_exit: bool,
    pub records: bool,
    pub prefix_len: Option<usize>,
    pub words: Option<String>,
    pub grid: Option<String>,
}

impl RunConfig {
    /// File values over defaults, flags over both.
    pub fn resolve(flags: &Overrides) -> Result<RunConfig, CliError> {
        let file = match &flags.common.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        let mut cfg = RunConfig::default();
        for (k, v) in &file {
            match k.as_str() {
                "r0" => cfg.r0 = parse_value(k, v)?,
                "T" => cfg.duration = parse_value(k, v)?,
                "n" => cfg.n_orbits = parse_value(k, v)?,
                "eps0" => cfg.eps0 = parse_value(k, v)?,
                "seed" => cfg.seed = parse_value(k, v)?,
                "jobs" => cfg.jobs = Some(parse_value(k, v)?),
                "out_dir" => cfg.out_dir = Some(PathBuf::from(v)),
                "word" => cfg.word = Some(v.clone()),
                "target_speed" => cfg.target_speed = Some(parse_value(k, v)?),
                "periodic" => cfg.periodic = parse_value(k, v)?,
                "alt_cross_exit" => cfg.alt_cross_exit = parse_value(k, v)?,
                "records" => cfg.records = parse_value(k, v)?,
                "prefix_len" => cfg.prefix_len = parse_value(k, v)?,
                "words" => cfg.words = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                "grid" => cfg.grid = parse_list(k, v)?,
                _ => unreachable!("keys checked on parse"),
            }
        }
        let c = &flags.common;
        cfg.r0 = c.r0.unwrap_or(cfg.r0);
        cfg.duration = c.duration.unwrap_or(cfg.duration);
        cfg.n_orbits = c.n_orbits.unwrap_or(cfg.n_orbits);
        cfg.eps0 = c.eps0.unwrap_or(cfg.eps0);
        cfg.seed = c.seed.unwrap_or(cfg.seed);
        cfg.jobs = c.jobs.or(cfg.jobs);
        cfg.out_dir = c.out_dir.clone().or(cfg.out_dir);
        cfg.word = flags.word.clone().or(cfg.word);
        cfg.target_speed = flags.target_speed.or(cfg.target_speed);
        cfg.periodic |= flags.periodic;
        cfg.alt_cross_exit |= flags.alt_cross_exit;
        cfg.records |= flags.records;
        cfg.prefix_len = flags.prefix_len.unwrap_or(cfg.prefix_len);
        if let Some(w) = &flags.words {
            cfg.words = w.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
        if let Some(g) = &flags.grid {
            cfg.grid = parse_list("grid", g)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.r0 > 0.0 && self.r0 < 0.5) {
            return Err(CliError::Config(format!("r0 must lie in (0, 0.5), got {}", self.r0)));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 0.5) {
            return Err(CliError::Config(format!("eps0 must lie in (0, 0.5), got {}", self.eps0)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(CliError::Config(format!("T must be positive, got {}", self.duration)));
        }
        if self.n_orbits == 0 {
            return Err(CliError::Config("n must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        if self.prefix_len == 0 {
            return Err(CliError::Config("prefix_len must be at least 1".into()));
        }
        if let Some(s) = self.target_speed {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CliError::Config(format!("target speed must be positive, got {s}")));
            }
        }
        if self.records && self.out_dir.is_none() {
            return Err(CliError::Config("--records needs --out-dir".into()));
        }
        Ok(())
    }

    /// Entropy time grid, `[T]` when none was given.
    pub fn time_grid(&self) -> Vec<f64> {
        if self.grid.is_empty() {
            vec![self.duration]
        } else {
            self.grid.clone()
        }
    }
}

impl Command {
    pub fn overrides(&self) -> Overrides {
        match self {
            Command::Simulate { common, records } => {
                Overrides { common: common.clone(), records: *records, ..Default::default() }
            }
            Command::Construct { common, word, target_speed, periodic, alt_cross_exit } => Overrides {
                common: common.clone(),
                word: word.clone(),
                target_speed: *target_speed,
                periodic: *periodic,
                alt_cross_exit: *alt_cross_exit,
                ..Default::default()
            },
            Command::RotationSet { common, prefix_len, words } => Overrides {
                common: common.clone(),
                prefix_len: *prefix_len,
                words: words.clone(),
                ..Default::default()
            },
            Command::Entropy { common, grid } => {
                Overrides { common: common.clone(), grid: grid.clone(), ..Default::default() }
            }
        }
    }
}
