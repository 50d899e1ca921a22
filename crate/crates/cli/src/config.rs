//! Run configuration: `key = value` files merged with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fradi::{Grid, ProblemSpec, ScalarField, WindowRadius};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Case {
    Kappa,
    Beta,
    Nonsym,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Solver {
    Dense,
    Tlr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Converge,
    ConvergeNonsym,
    TlrReport,
    FactorBench,
    Solve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Converge => "converge",
            Command::ConvergeNonsym => "converge-nonsym",
            Command::TlrReport => "tlr-report",
            Command::FactorBench => "factor-bench",
            Command::Solve => "solve",
        }
    }
}

/// Values given on the command line or in a config file; `None` means unset.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Config file with `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dim: Option<u8>,
    #[arg(long, value_enum)]
    pub case: Option<Case>,
    /// Comma-separated grid sizes: cells per axis for the convergence
    /// commands, interior points per axis otherwise.
    #[arg(long, value_delimiter = ',')]
    pub grids: Option<Vec<usize>>,
    /// Tile accuracy (absolute Frobenius norm per tile).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Points per tile; 0 picks √N rounded to a multiple of 32.
    #[arg(long, value_name = "M")]
    pub tile: Option<usize>,
    /// Window radius in cell widths.
    #[arg(long)]
    pub delta_mult: Option<f64>,
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Output directory; CSV goes to stdout when absent.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Print floats with 17 significant digits.
    #[arg(long)]
    pub full_precision: bool,
    /// Constant fractional order for the kappa case.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Offset of the order field `beta0 + 0.1x` for the nonsym case.
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
}

impl Overrides {
    /// Fields set in `self` win over those in `base`.
    fn over(self, base: Overrides) -> Overrides {
        Overrides {
            config: self.config.or(base.config),
            dim: self.dim.or(base.dim),
            case: self.case.or(base.case),
            grids: self.grids.or(base.grids),
            eps: self.eps.or(base.eps),
            tile: self.tile.or(base.tile),
            delta_mult: self.delta_mult.or(base.delta_mult),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            full_precision: self.full_precision || base.full_precision,
            beta: self.beta.or(base.beta),
            beta0: self.beta0.or(base.beta0),
            solver: self.solver.or(base.solver),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}"))
}

fn parse_enum<T: clap::ValueEnum>(key: &str, v: &str) -> Result<T> {
    T::from_str(v, true).map_err(|_| anyhow!("{key}: unknown value {v:?}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got {v:?}"),
    }
}

/// Parses `key = value` lines; `#` starts a comment. Keys may use `-` or `_`.
pub fn parse_config(text: &str) -> Result<Overrides> {
    let mut o = Overrides::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        let at = |e: anyhow::Error| e.context(format!("line {}", lineno + 1));
        match key.as_str() {
            "dim" => o.dim = Some(parse_value(&key, v).map_err(at)?),
            "case" => o.case = Some(parse_enum(&key, v).map_err(at)?),
            "grids" => {
                o.grids = Some(
                    v.split(',')
                        .map(|g| parse_value(&key, g.trim()))
                        .collect::<Result<Vec<usize>>>()
                        .map_err(at)?,
                )
            }
            "eps" => o.eps = Some(parse_value(&key, v).map_err(at)?),
            "tile" => o.tile = Some(parse_value(&key, v).map_err(at)?),
            "delta_mult" => o.delta_mult = Some(parse_value(&key, v).map_err(at)?),
            "seed" => o.seed = Some(parse_value(&key, v).map_err(at)?),
            "out" => o.out = Some(PathBuf::from(v)),
            "full_precision" => o.full_precision = parse_bool(&key, v).map_err(at)?,
            "beta" => o.beta = Some(parse_value(&key, v).map_err(at)?),
            "beta0" => o.beta0 = Some(parse_value(&key, v).map_err(at)?),
            "solver" => o.solver = Some(parse_enum(&key, v).map_err(at)?),
            _ => bail!("line {}: unknown key {key:?}", lineno + 1),
        }
    }
    Ok(o)
}

/// Fully resolved and validated settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    pub case: Case,
    pub grids: Vec<usize>,
    pub eps: f64,
    pub tile: usize,
    pub delta_mult: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub full_precision: bool,
    pub beta: f64,
    pub beta0: f64,
    pub solver: Solver,
}

fn default_grids(command: Command, dim: usize) -> Vec<usize> {
    match (command, dim) {
        (Command::Converge | Command::ConvergeNonsym, 1) => vec![64, 128, 256, 512, 1024, 2048],
        (Command::Converge | Command::ConvergeNonsym, _) => vec![16, 32, 64, 128],
        (Command::Solve, 1) => vec![256],
        (Command::Solve, _) => vec![64],
        (_, 1) => vec![1024, 2048, 4096],
        _ => vec![32, 64, 128],
    }
}

impl RunConfig {
    pub fn resolve(command: Command, flags: Overrides) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => read_config(path)?,
            None => Overrides::default(),
        };
        let o = flags.over(file);
        let case = o.case.unwrap_or(if command == Command::ConvergeNonsym { Case::Nonsym } else { Case::Kappa });
        let dim = o.dim.map(usize::from).unwrap_or(if case == Case::Nonsym { 1 } else { 2 });
        let cfg = RunConfig {
            command,
            dim,
            case,
            grids: o.grids.unwrap_or_else(|| default_grids(command, dim)),
            eps: o.eps.unwrap_or(1e-6),
            tile: o.tile.unwrap_or(0),
            delta_mult: o.delta_mult.unwrap_or(4.0),
            seed: o.seed.unwrap_or(1),
            out: o.out,
            full_precision: o.full_precision,
            beta: o.beta.unwrap_or(0.75),
            beta0: o.beta0.unwrap_or(0.5),
            solver: o.solver.unwrap_or(if case != Case::Nonsym && dim == 2 { Solver::Tlr } else { Solver::Dense }),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        let spec = match (self.case, self.dim) {
            (Case::Kappa, 1) => {
                let mut s = ProblemSpec::kappa_1d();
                s.beta = ScalarField::constant(self.beta);
                s
            }
            (Case::Kappa, _) => ProblemSpec::kappa_2d(self.beta),
            (Case::Beta, 1) => ProblemSpec::beta_1d(),
            (Case::Beta, _) => ProblemSpec::beta_2d(),
            (Case::Nonsym, 1) => ProblemSpec::nonsym_1d(self.beta0),
            (Case::Nonsym, d) => bail!("case nonsym is one-dimensional, got dim {d}"),
        };
        let spec = spec.with_window(WindowRadius::CellMultiple(self.delta_mult));
        spec.validate()?;
        Ok(spec)
    }

    /// Grid for one entry of `grids`.
    pub fn grid(&self, spec: &ProblemSpec, g: usize) -> Result<Grid> {
        Ok(match self.command {
            Command::Converge | Command::ConvergeNonsym | Command::Solve => Grid::new(spec, g)?,
            Command::TlrReport | Command::FactorBench => Grid::with_points_per_axis(spec, g)?,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            bail!("eps must be positive, got {}", self.eps);
        }
        if !(self.delta_mult > 0.0 && self.delta_mult.is_finite()) {
            bail!("delta-mult must be positive, got {}", self.delta_mult);
        }
        if self.tile == 1 {
            bail!("tile must be 0 (automatic) or at least 2");
        }
        if self.grids.is_empty() {
            bail!("grids must not be empty");
        }
        match self.command {
            Command::Converge | Command::ConvergeNonsym => {
                if self.grids.len() < 3 {
                    bail!("a convergence study needs at least 3 grids, got {}", self.grids.len());
                }
                if let Some(w) = self.grids.windows(2).find(|w| w[1] != 2 * w[0]) {
                    bail!("grids must double in size: {} is followed by {}", w[0], w[1]);
                }
            }
            Command::TlrReport | Command::FactorBench => {
                if self.case == Case::Nonsym {
                    bail!("{} needs a symmetric case (kappa or beta)", self.command.name());
                }
            }
            Command::Solve => {}
        }
        if self.command == Command::ConvergeNonsym && self.case != Case::Nonsym {
            bail!("converge-nonsym needs case nonsym");
        }
        if self.solver == Solver::Tlr && self.case == Case::Nonsym {
            bail!("the TLR solver needs a symmetric case");
        }
        let spec = self.spec()?;
        for &g in &self.grids {
            let grid = self.grid(&spec, g)?;
            spec.check_window(spec.window.resolve(grid.h))?;
        }
        Ok(())
    }
}

fn read_config(path: &Path) -> Result<Overrides> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("config {}", path.display()))
}

/// Worker cap from `FRADI_THREADS`.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("FRADI_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| anyhow!("FRADI_THREADS must be a positive integer, got {v:?}"))?;
            if n == 0 {
                bail!("FRADI_THREADS must be a positive integer, got 0");
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => bail!("FRADI_THREADS: {e}"),
    }
}
