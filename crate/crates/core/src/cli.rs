//! The `walras` command line.
//!
//! Every command writes `report.txt` into the output directory, plus
//!
//! * `solve`, `perturb`: `equilibria.csv`
//! * `decompose`: `witness.csv`
//! * `realize`: `economy.toml`, `witness.csv`
//! * `experiment`: `experiment.csv`
//!
//! Exit status is 0 on success, 1 for bad input and 2 when an internal
//! invariant fails (e.g. the canonical family does not positively span).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::cobb_douglas::Economy;
use crate::equilibrium::{find_equilibria, start_lattice, SolverConfig};
use crate::error::{Error, Result};
use crate::field::ExcessDemand;
use crate::genericity::{
    build_continuum_economy, continuum_chart_field, genericity_experiment, perturb,
    PerturbationBasis, PerturbationSpec, CONTINUUM_GRID,
};
use crate::geometry::PricePoint;
use crate::io::{economy_to_toml, parse_dataset, read_economy, witnesses_to_csv};
use crate::revealed_preference::{sarp_check, scaled_field_audit};
use crate::smd::{decompose_field, realize_economy_with_witnesses, CanonicalFamily};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_BASIS: &str = "fourier:5";
/// Lattice density for decompose/realize/audit when ℓ ≥ 3.
const MULTI_GOOD_GRID: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Find and classify the equilibria of an economy file.
    Solve,
    /// Decompose the economy's excess demand over the canonical family.
    Decompose,
    /// Realize the economy's excess demand (or a continuum field, with
    /// --interval) as a canonical-family economy.
    Realize,
    /// Solve a seeded perturbation of the economy.
    Perturb,
    /// Run a batch of seeded perturbations and tally the outcomes.
    Experiment,
    /// Check an observation dataset (CSV) for SARP violations.
    Sarp,
    /// Audit each consumer's rescaled excess demand on a price lattice.
    Audit,
}

#[derive(Debug, Parser)]
#[command(name = "walras", version, about = "Exchange economy toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Economy file (TOML) or, for `sarp`, observation dataset (CSV).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Solver start density, or realization grid size for decompose/realize.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Newton residual tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long = "k-max", global = true)]
    pub k_max: Option<u32>,
    /// linear-tilt, polynomial:D or fourier:K.
    #[arg(long, global = true)]
    pub basis: Option<String>,
    /// Chart interval `a,b` for `realize` without an input file.
    #[arg(long, global = true, value_parser = parse_interval)]
    pub interval: Option<(f64, f64)>,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub trials: Option<usize>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub k_max: Option<u32>,
    pub basis: Option<String>,
    pub interval: Option<(f64, f64)>,
}

impl From<Cli> for RunConfig {
    fn from(c: Cli) -> Self {
        Self {
            command: c.command,
            input: c.input,
            output_dir: c.out,
            seed: c.seed,
            epsilon: c.epsilon,
            trials: c.trials,
            grid: c.grid,
            tol: c.tol,
            k_max: c.k_max,
            basis: c.basis,
            interval: c.interval,
        }
    }
}

impl RunConfig {
    pub fn new(command: Command, input: Option<PathBuf>, output_dir: PathBuf) -> Self {
        Self {
            command,
            input,
            output_dir,
            seed: DEFAULT_SEED,
            epsilon: None,
            trials: None,
            grid: None,
            tol: None,
            k_max: None,
            basis: None,
            interval: None,
        }
    }

    fn solver(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(g) = self.grid {
            cfg.grid_density = g;
        }
        if let Some(t) = self.tol {
            cfg.newton_tol = t;
        }
        if let Some(k) = self.k_max {
            cfg.k_max = k;
        }
        cfg
    }

    fn spec(&self) -> Result<PerturbationSpec> {
        let basis = PerturbationBasis::parse(self.basis.as_deref().unwrap_or(DEFAULT_BASIS))?;
        PerturbationSpec::new(self.epsilon.unwrap_or(DEFAULT_EPSILON), basis, self.seed)
    }

    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--input is required".into()))
    }

    fn economy(&self) -> Result<Economy> {
        let path = self.input()?;
        read_economy(path).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Summary text and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: String,
    pub files: Vec<PathBuf>,
}

pub fn exit_code(r: &Result<RunOutcome>) -> i32 {
    match r {
        Ok(_) => 0,
        Err(e) if e.is_internal() => 2,
        Err(_) => 1,
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

/// Realization / decomposition grid: nodes k/(n+1) for two goods, the
/// interior chart lattice otherwise.
fn price_grid(goods: usize, n: Option<usize>) -> Result<Vec<PricePoint>> {
    if goods == 2 {
        let n = n.unwrap_or(CONTINUUM_GRID);
        (1..=n)
            .map(|k| {
                let x = k as f64 / (n + 1) as f64;
                PricePoint::simplex(vec![x, 1.0 - x])
            })
            .collect()
    } else {
        start_lattice(goods - 1, n.unwrap_or(MULTI_GOOD_GRID), 1e-3)
            .into_iter()
            .map(|mut c| {
                c.push(1.0 - c.iter().sum::<f64>());
                PricePoint::from_positive(&c)
            })
            .collect()
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut w = Writer {
        dir: &cfg.output_dir,
        files: Vec::new(),
    };
    let mut report = String::new();
    let _ = writeln!(report, "command: {:?}", cfg.command);
    if let Some(p) = &cfg.input {
        let _ = writeln!(report, "input: {}", p.display());
    }
    match cfg.command {
        Command::Solve => {
            let e = cfg.economy()?;
            let r = find_equilibria(&e, &cfg.solver())?;
            report.push_str(&r.summary());
            w.write("equilibria.csv", &r.to_csv())?;
        }
        Command::Perturb => {
            let e = cfg.economy()?;
            let spec = cfg.spec()?;
            let _ = writeln!(
                report,
                "perturbation: {} epsilon {:e} seed {}",
                spec.basis.label(),
                spec.epsilon,
                spec.seed
            );
            let r = find_equilibria(&perturb(e, &spec)?, &cfg.solver())?;
            report.push_str(&r.summary());
            w.write("equilibria.csv", &r.to_csv())?;
        }
        Command::Experiment => {
            let e = cfg.economy()?;
            let spec = cfg.spec()?;
            let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
            let _ = writeln!(
                report,
                "perturbation: {} epsilon {:e} base seed {}",
                spec.basis.label(),
                spec.epsilon,
                spec.seed
            );
            let r = genericity_experiment(&e, &spec, trials, &cfg.solver())?;
            report.push_str(&r.summary());
            w.write("experiment.csv", &r.to_csv())?;
        }
        Command::Decompose => {
            let e = cfg.economy()?;
            let family = CanonicalFamily::symmetric(e.goods())?;
            let grid = price_grid(e.goods(), cfg.grid)?;
            let ws = decompose_field(&family, &e, &grid)?;
            let max_res = ws.iter().map(|w| w.residual).fold(0.0, f64::max);
            let min_mu = ws
                .iter()
                .flat_map(|w| w.mu.iter().copied())
                .fold(f64::INFINITY, f64::min);
            let _ = writeln!(
                report,
                "grid points: {}\nmax residual: {max_res:.3e}\nmin mu: {min_mu:.6}",
                ws.len()
            );
            w.write("witness.csv", &witnesses_to_csv(&ws))?;
        }
        Command::Realize => {
            let (economy, ws) = match (cfg.interval, &cfg.input) {
                (Some((a, b)), None) => {
                    let grid = cfg.grid.unwrap_or(CONTINUUM_GRID);
                    // validates the interval
                    build_continuum_economy(a, b, grid)?;
                    let _ = writeln!(report, "target: continuum field on [{a}, {b}]");
                    realize_economy_with_witnesses(
                        &CanonicalFamily::symmetric(2)?,
                        &continuum_chart_field(a, b),
                        &price_grid(2, Some(grid))?,
                    )?
                }
                (None, Some(_)) => {
                    let e = cfg.economy()?;
                    realize_economy_with_witnesses(
                        &CanonicalFamily::symmetric(e.goods())?,
                        &e,
                        &price_grid(e.goods(), cfg.grid)?,
                    )?
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "realize needs exactly one of --input or --interval".into(),
                    ))
                }
            };
            let _ = writeln!(
                report,
                "realized {} consumers over {} grid points",
                economy.consumers().len(),
                ws.len()
            );
            w.write("economy.toml", &economy_to_toml(&economy))?;
            w.write("witness.csv", &witnesses_to_csv(&ws))?;
        }
        Command::Sarp => {
            let path = cfg.input()?;
            let text = std::fs::read_to_string(path)?;
            let d = parse_dataset(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let _ = writeln!(report, "observations: {}", d.len());
            let _ = writeln!(report, "{}", sarp_check(&d).describe());
        }
        Command::Audit => {
            let e = cfg.economy()?;
            let grid = price_grid(e.goods(), cfg.grid.or(Some(MULTI_GOOD_GRID)))?;
            for (i, c) in e.consumers().iter().enumerate() {
                let a = scaled_field_audit(c, &grid)?;
                let _ = writeln!(report, "consumer {}:", i + 1);
                for line in a.summary().lines() {
                    let _ = writeln!(report, "  {line}");
                }
            }
        }
    }
    w.write("report.txt", &report)?;
    Ok(RunOutcome {
        report,
        files: w.files,
    })
}
