//! Experiment configuration: a flat key-value map filled from an optional
//! config file and then from command-line flags, parsed into
//! [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bandwigner::ensemble::EntryDistribution;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Moments,
    Critical,
    Ipr,
    Yq,
    Verify,
    Ballchain,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Moments => "moments",
            Command::Critical => "critical",
            Command::Ipr => "ipr",
            Command::Yq => "yq",
            Command::Verify => "verify",
            Command::Ballchain => "ballchain",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Command::Moments => 400,
            Command::Ipr => 50,
            Command::Yq => 800,
            Command::Verify => 100_000,
            Command::Ballchain => 50,
            Command::Critical => 1,
        }
    }

    fn default_ns(self) -> Vec<usize> {
        match self {
            Command::Moments | Command::Yq => vec![100],
            Command::Critical => vec![1_000, 10_000, 100_000, 1_000_000],
            Command::Ipr => vec![500],
            Command::Verify => vec![],
            Command::Ballchain => vec![200],
        }
    }

    fn default_grid(self) -> BandGrid {
        match self {
            Command::Ipr => BandGrid::Alpha(parse_float_grid("0.1:1.0:0.05").expect("valid grid")),
            Command::Verify => BandGrid::Explicit(vec![1, 2, 3, 5, 8]),
            _ => BandGrid::C(parse_float_grid("0.05:0.95:0.05").expect("valid grid")),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(CliError::Usage(format!("unknown format '{other}' (expected csv or json)"))),
        }
    }
}

/// How bandwidths are chosen for each `N`.
#[derive(Clone, Debug, PartialEq)]
pub enum BandGrid {
    Explicit(Vec<usize>),
    /// `b = round(N^alpha)`
    Alpha(Vec<f64>),
    /// `b = round(c N)`
    C(Vec<f64>),
}

/// A realized bandwidth with the grid coordinate that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandPoint {
    pub b: usize,
    pub alpha: Option<f64>,
    pub c: Option<f64>,
}

impl BandGrid {
    /// Realized bandwidths for dimension `n`, clamped to `[1, n]`, in grid order.
    pub fn realize(&self, n: usize) -> Vec<BandPoint> {
        let clamp = |b: f64| (b.round().max(1.0) as usize).min(n);
        match self {
            BandGrid::Explicit(bs) => bs
                .iter()
                .map(|&b| BandPoint { b: b.clamp(1, n), alpha: None, c: None })
                .collect(),
            BandGrid::Alpha(alphas) => alphas
                .iter()
                .map(|&a| BandPoint { b: clamp((n as f64).powf(a)), alpha: Some(a), c: None })
                .collect(),
            BandGrid::C(cs) => cs
                .iter()
                .map(|&c| BandPoint { b: clamp(c * n as f64), alpha: None, c: Some(c) })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub ns: Vec<usize>,
    pub grid: BandGrid,
    pub dist: EntryDistribution,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub workers: Option<usize>,
    /// Moment orders for `moments`.
    pub ks: Vec<usize>,
    /// Fixed coupling for `ballchain`; drawn per trial when absent.
    pub coupling: Option<f64>,
    /// Eigenvalue bin width for `ballchain` mass summaries.
    pub bin_width: f64,
    /// Check name whose expected value `verify` deliberately corrupts.
    pub inject_fault: Option<String>,
    /// Every key-value pair that went into this config, for the output header.
    pub echo: BTreeMap<String, String>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

const KNOWN_KEYS: &[&str] = &[
    "n", "b", "alpha-grid", "c-grid", "dist", "trials", "seed", "format", "out", "workers", "k",
    "coupling", "bin-width", "inject-fault",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key '{key}'", lineno + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}

fn parse_num<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--{key}: cannot parse '{s}'")))
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_float_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step): (f64, f64, f64) =
                (parse_num("grid", start)?, parse_num("grid", stop)?, parse_num("grid", step)?);
            if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
                return Err(CliError::Usage(format!("invalid grid range '{s}'")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // round away the accumulated binary error so 0.05*3 prints as 0.15
            (0..count)
                .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        [_] => s
            .split(',')
            .map(|v| parse_num::<f64>("grid", v))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(CliError::Usage(format!("invalid grid '{s}'"))),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("invalid grid '{s}'")));
    }
    Ok(values)
}

/// Comma-separated positive integers; `start:stop:step` is also accepted.
pub fn parse_usize_list(key: &str, s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    let values: Vec<usize> = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step): (usize, usize, usize) =
                (parse_num(key, start)?, parse_num(key, stop)?, parse_num(key, step)?);
            if step == 0 || stop < start {
                return Err(CliError::Usage(format!("--{key}: invalid range '{s}'")));
            }
            (start..=stop).step_by(step).collect()
        }
        [_] => s.split(',').map(|v| parse_num(key, v)).collect::<Result<_>>()?,
        _ => return Err(CliError::Usage(format!("--{key}: invalid list '{s}'"))),
    };
    if values.is_empty() || values.contains(&0) {
        return Err(CliError::Usage(format!("--{key}: values must be positive, got '{s}'")));
    }
    Ok(values)
}

impl ExperimentConfig {
    /// Builds a config from merged key-value settings.
    pub fn from_map(command: Command, map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(key) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown setting '{key}'")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);

        let ns = match get("n") {
            Some(s) => parse_usize_list("n", s)?,
            None => command.default_ns(),
        };
        let grids: Vec<&str> = ["b", "alpha-grid", "c-grid"]
            .into_iter()
            .filter(|k| map.contains_key(*k))
            .collect();
        if grids.len() > 1 {
            return Err(CliError::Usage(format!(
                "choose one of --b, --alpha-grid, --c-grid (got {})",
                grids.join(", ")
            )));
        }
        let grid = if let Some(s) = get("b") {
            BandGrid::Explicit(parse_usize_list("b", s)?)
        } else if let Some(s) = get("alpha-grid") {
            BandGrid::Alpha(parse_float_grid(s)?)
        } else if let Some(s) = get("c-grid") {
            let cs = parse_float_grid(s)?;
            if cs.iter().any(|&c| c <= 0.0) {
                return Err(CliError::Usage("--c-grid values must be positive".into()));
            }
            BandGrid::C(cs)
        } else {
            command.default_grid()
        };
        let dist = match get("dist") {
            Some(s) => s
                .parse::<EntryDistribution>()
                .map_err(|e| CliError::Usage(format!("--dist: {e}")))?,
            None => EntryDistribution::Gaussian,
        };
        let trials = match get("trials") {
            Some(s) => parse_num("trials", s)?,
            None => command.default_trials(),
        };
        if trials == 0 {
            return Err(CliError::Usage("--trials must be at least 1".into()));
        }
        let seed = match get("seed") {
            Some(s) => parse_num("seed", s)?,
            None => DEFAULT_SEED,
        };
        let format = match get("format") {
            Some(s) => s.parse()?,
            None => OutputFormat::Csv,
        };
        let workers = get("workers").map(|s| parse_num::<usize>("workers", s)).transpose()?;
        if workers == Some(0) {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        let ks = match get("k") {
            Some(s) => parse_usize_list("k", s)?,
            None => vec![4],
        };
        if let Some(k) = ks.iter().find(|k| ![2, 4, 6, 8].contains(*k)) {
            return Err(CliError::Usage(format!("--k: unsupported order {k} (allowed: 2, 4, 6, 8)")));
        }
        let coupling = get("coupling").map(|s| parse_num::<f64>("coupling", s)).transpose()?;
        let bin_width = match get("bin-width") {
            Some(s) => parse_num("bin-width", s)?,
            None => 0.5,
        };
        if !(bin_width > 0.0) {
            return Err(CliError::Usage("--bin-width must be positive".into()));
        }
        if command != Command::Verify && command != Command::Critical && ns.is_empty() {
            return Err(CliError::Usage("--n is required".into()));
        }

        let mut echo = map.clone();
        echo.entry("n".into()).or_insert_with(|| {
            ns.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
        });
        echo.entry("trials".into()).or_insert_with(|| trials.to_string());
        echo.entry("seed".into()).or_insert_with(|| seed.to_string());
        echo.entry("dist".into()).or_insert_with(|| dist.name().to_string());

        Ok(Self {
            command,
            ns,
            grid,
            dist,
            trials,
            seed,
            out: get("out").map(PathBuf::from),
            format,
            workers,
            ks,
            coupling,
            bin_width,
            inject_fault: get("inject-fault").map(str::to_string),
            echo,
        })
    }

    /// Config with every setting at its default.
    pub fn defaults(command: Command) -> Self {
        Self::from_map(command, &BTreeMap::new()).expect("defaults are valid")
    }

    pub fn plan(&self, seed: u64, trials: usize) -> bandwigner::montecarlo::TrialPlan {
        let plan = bandwigner::montecarlo::TrialPlan::new(seed, trials);
        match self.workers {
            Some(w) => plan.with_workers(w),
            None => plan,
        }
    }
}
