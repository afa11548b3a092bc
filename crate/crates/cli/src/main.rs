use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use bandwigner_cli::config::{read_config_file, Command};
use bandwigner_cli::{run, CliError, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bandwigner", version, about = "Spectral statistics of banded Wigner ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Normalized spectral moments m_k against bandwidth
    Moments(Common),
    /// Critical bandwidths of the fourth moment
    Critical(Common),
    /// Total inverse participation ratio of the eigenvectors
    Ipr(Common),
    /// Boundary statistic Y(Q) of the eigenvector matrix
    Yq(Common),
    /// Monte-Carlo verification of the closed-form traces
    Verify(Common),
    /// Perturbation of a thin block coupled to a full block
    Ballchain(Common),
}

#[derive(Args)]
struct Common {
    /// Matrix dimension(s): comma list or start:stop:step
    #[arg(long)]
    n: Option<String>,
    /// Explicit half-bandwidths
    #[arg(long)]
    b: Option<String>,
    /// Exponent grid, b = round(N^alpha)
    #[arg(long = "alpha-grid")]
    alpha_grid: Option<String>,
    /// Fraction grid, b = round(c N)
    #[arg(long = "c-grid")]
    c_grid: Option<String>,
    /// Entry law: gaussian or discrete
    #[arg(long)]
    dist: Option<String>,
    /// Trials per grid point
    #[arg(long)]
    trials: Option<String>,
    /// Master seed
    #[arg(long)]
    seed: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    workers: Option<String>,
    /// Moment orders for `moments` (subset of 2,4,6,8)
    #[arg(long)]
    k: Option<String>,
    /// Fixed coupling p for `ballchain`
    #[arg(long, allow_hyphen_values = true)]
    coupling: Option<String>,
    /// Eigenvalue bin width for `ballchain`
    #[arg(long = "bin-width")]
    bin_width: Option<String>,
    /// Key-value config file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "inject-fault", hide = true)]
    inject_fault: Option<String>,
}

impl Common {
    fn settings(self) -> Result<BTreeMap<String, String>, CliError> {
        let mut map = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        let flags = [
            ("n", self.n),
            ("b", self.b),
            ("alpha-grid", self.alpha_grid),
            ("c-grid", self.c_grid),
            ("dist", self.dist),
            ("trials", self.trials),
            ("seed", self.seed),
            ("format", self.format),
            ("out", self.out.map(|p| p.display().to_string())),
            ("workers", self.workers),
            ("k", self.k),
            ("coupling", self.coupling),
            ("bin-width", self.bin_width),
            ("inject-fault", self.inject_fault),
        ];
        let grid_flag = flags[1..4].iter().any(|(_, v)| v.is_some());
        if grid_flag {
            // a grid flag replaces whichever grid the file chose
            for key in ["b", "alpha-grid", "c-grid"] {
                map.remove(key);
            }
        }
        for (key, value) in flags {
            if let Some(v) = value {
                map.insert(key.to_string(), v);
            }
        }
        Ok(map)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, common) = match cli.command {
        Sub::Moments(c) => (Command::Moments, c),
        Sub::Critical(c) => (Command::Critical, c),
        Sub::Ipr(c) => (Command::Ipr, c),
        Sub::Yq(c) => (Command::Yq, c),
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Ballchain(c) => (Command::Ballchain, c),
    };
    let result = common
        .settings()
        .and_then(|map| ExperimentConfig::from_map(command, &map))
        .and_then(|cfg| run(&cfg, &mut std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bandwigner {command}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
