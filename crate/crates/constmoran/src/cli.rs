//! Argument parsing and command dispatch.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use constmoran_core::graph::IsolatedSites;
use constmoran_core::moran::moran_i;
use constmoran_core::significance::{
    calibrate, estimate_pvalue, estimate_variance, CalibrationConfig, MethodKind, NullMethod, Pairing,
    SignificanceConfig, Tail,
};
use constmoran_core::stats::naive_t_pvalue;
use constmoran_core::synth::{generate_field, SynthConfig};
use constmoran_core::{ResampleConfig, ResampleMode, StatKind};

use crate::io::{field_csv, load_dataset, Dataset, GridSpec, Topology};
use crate::report::{self, MoranBody, MoranRow, SynthBody, TestBody, VarianceBody};

#[derive(Debug, Parser)]
#[command(name = "constmoran", version, about = "Significance tests for spatially autocorrelated data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Moran's I of one or more variables.
    Moran(MoranArgs),
    /// Synthesize a power-law random field on a grid.
    Synth(SynthArgs),
    /// Test the association between two variables.
    Test(TestArgs),
    /// False-positive calibration on independent synthetic fields.
    Calibrate(CalibrateArgs),
    /// Resampled distribution of the mean site-wise ratio of two variables.
    Variance(VarianceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Swap,
    Replace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Perm,
    ConstantI,
    Generator,
}

impl From<MethodArg> for MethodKind {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Perm => MethodKind::RandomPermutation,
            MethodArg::ConstantI => MethodKind::ConstantI,
            MethodArg::Generator => MethodKind::KnownGenerator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    Pearson,
    Spearman,
    Kendall,
    Ks,
}

impl From<StatArg> for StatKind {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Pearson => StatKind::Pearson,
            StatArg::Spearman => StatKind::Spearman,
            StatArg::Kendall => StatKind::Kendall,
            StatArg::Ks => StatKind::Ks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailArg {
    TwoSided,
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    Cross,
    Matched,
}

#[derive(Debug, Clone, Args)]
pub struct TopologyArgs {
    /// Queen-contiguity grid `ROWSxCOLS`; site ids are row-major cell indices.
    #[arg(long, conflicts_with = "adjacency", required_unless_present = "adjacency")]
    pub grid: Option<GridSpec>,
    /// Edge-list file with two site ids per line.
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    /// Keep sites without neighbours instead of rejecting them.
    #[arg(long)]
    pub allow_isolated: bool,
}

impl TopologyArgs {
    fn topology(&self) -> Topology {
        match (&self.grid, &self.adjacency) {
            (Some(g), _) => Topology::Grid(*g),
            (None, Some(p)) => Topology::Adjacency(p.clone()),
            (None, None) => unreachable!("clap requires one of --grid/--adjacency"),
        }
    }

    fn isolated(&self) -> IsolatedSites {
        if self.allow_isolated {
            IsolatedSites::Allow
        } else {
            IsolatedSites::Reject
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ResampleArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Resamples per field.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Convergence tolerance on Moran's I.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Pre-freeze plateau tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Swap)]
    pub mode: ModeArg,
    #[arg(long)]
    pub no_prefreeze: bool,
    /// Proposal budget per resample (default 2000 per site).
    #[arg(long)]
    pub max_proposals: Option<u64>,
    /// Fail when any resample misses the target.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_enum, default_value_t = TailArg::TwoSided)]
    pub tail: TailArg,
    #[arg(long, value_enum, default_value_t = PairingArg::Cross)]
    pub pairing: PairingArg,
}

impl ResampleArgs {
    fn resample_config(&self) -> ResampleConfig {
        ResampleConfig {
            mode: match self.mode {
                ModeArg::Swap => ResampleMode::Swap,
                ModeArg::Replace => ResampleMode::Replace,
            },
            epsilon: self.epsilon,
            eta: self.eta,
            prefreeze: !self.no_prefreeze,
            max_proposals: self.max_proposals,
            resync_interval: None,
            seed: self.seed,
            strict: self.strict,
        }
    }

    fn tail(&self) -> Tail {
        match self.tail {
            TailArg::TwoSided => Tail::TwoSided,
            TailArg::Greater => Tail::Greater,
        }
    }

    fn pairing(&self) -> Pairing {
        match self.pairing {
            PairingArg::Cross => Pairing::CrossPairs,
            PairingArg::Matched => Pairing::Matched,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MoranArgs {
    /// Values CSV; first column holds site ids.
    pub values: PathBuf,
    /// Variables to report (default: all).
    pub variables: Vec<String>,
    #[command(flatten)]
    pub topology: TopologyArgs,
    /// Replace each variable by its average ranks first.
    #[arg(long)]
    pub rank: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "40x40")]
    pub grid: GridSpec,
    /// Spectral exponent.
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Field CSV destination (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    pub values: PathBuf,
    pub x: String,
    pub y: String,
    #[command(flatten)]
    pub topology: TopologyArgs,
    #[arg(long, value_enum, default_value_t = StatArg::Pearson)]
    pub stat: StatArg,
    #[arg(long, value_enum, default_value_t = MethodArg::ConstantI)]
    pub method: MethodArg,
    /// Spectral exponent of x, for `--method generator`.
    #[arg(long)]
    pub beta_x: Option<f64>,
    /// Spectral exponent of y, for `--method generator`.
    #[arg(long)]
    pub beta_y: Option<f64>,
    #[arg(long)]
    pub rank: bool,
    #[command(flatten)]
    pub resample: ResampleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub beta_x: f64,
    #[arg(long)]
    pub beta_y: f64,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub grid: Option<GridSpec>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Perm, MethodArg::Generator, MethodArg::ConstantI])]
    pub methods: Vec<MethodArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [StatArg::Pearson])]
    pub stats: Vec<StatArg>,
    /// Nominal levels (default: 0.001 to 0.5).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Use 1000 trials, 100 samples and a 40x40 grid unless given explicitly.
    #[arg(long)]
    pub full_scale: bool,
    #[command(flatten)]
    pub resample: ResampleArgs,
    /// CSV destination; the JSON report goes next to it with a `.json` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of CSV on standard output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VarianceArgs {
    pub values: PathBuf,
    pub numerator: String,
    pub denominator: String,
    #[command(flatten)]
    pub topology: TopologyArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::ConstantI)]
    pub method: MethodArg,
    #[command(flatten)]
    pub resample: ResampleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load(values: &Path, topology: &TopologyArgs) -> Result<Dataset> {
    load_dataset(values, &topology.topology()).with_context(|| format!("loading {}", values.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Moran(a) => run_moran(a),
        Command::Synth(a) => run_synth(a),
        Command::Test(a) => run_test(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Variance(a) => run_variance(a),
    }
}

fn run_moran(a: MoranArgs) -> Result<()> {
    let data = load(&a.values, &a.topology)?;
    let weights = data.weights(a.topology.isolated())?;
    let names: Vec<String> = if a.variables.is_empty() {
        data.variable_names().map(str::to_string).collect()
    } else {
        a.variables.clone()
    };
    let mut results = Vec::with_capacity(names.len());
    for name in names {
        let field = data.field(&name, a.rank)?;
        let moran_i = moran_i(&field, &weights).with_context(|| format!("variable `{name}`"))?;
        results.push(MoranRow { variable: name, moran_i });
    }
    let body = MoranBody {
        n_sites: data.n_sites(),
        ranked: a.rank,
        results,
    };
    let text = if a.output.json {
        report::to_json("moran", &body)?
    } else {
        report::moran_text(&body)
    };
    emit(a.output.out.as_deref(), &text)
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let config = SynthConfig::new(a.grid.rows, a.grid.cols, a.beta, a.seed);
    let field = generate_field(&config)?;
    let weights = constmoran_core::graph::row_normalize(&constmoran_core::graph::build_grid_queen(
        a.grid.rows,
        a.grid.cols,
    )?)?;
    let moran_i = moran_i(&field, &weights)?;
    let body = SynthBody {
        rows: a.grid.rows,
        cols: a.grid.cols,
        beta: a.beta,
        seed: a.seed,
        moran_i,
    };
    let summary = if a.json {
        report::to_json("synth", &body)?
    } else {
        format!("moran_i\t{moran_i:.6}\n")
    };
    let csv = field_csv(&field, "value");
    match &a.out {
        Some(path) => {
            emit(Some(path), &csv)?;
            emit(None, &summary)
        }
        None => {
            // The field owns standard output here, so the summary goes to stderr.
            emit(None, &csv)?;
            eprint!("{summary}");
            Ok(())
        }
    }
}

fn null_method(method: MethodArg, beta_x: Option<f64>, beta_y: Option<f64>, data: &Dataset) -> Result<NullMethod> {
    let kind = MethodKind::from(method);
    if kind != MethodKind::KnownGenerator {
        return Ok(kind.for_synthetic(0.0, 0.0, 0, 0));
    }
    let (Some(bx), Some(by)) = (beta_x, beta_y) else {
        bail!("--method generator needs --beta-x and --beta-y");
    };
    let Some(grid) = data.grid else {
        bail!("--method generator needs --grid topology");
    };
    Ok(kind.for_synthetic(bx, by, grid.rows, grid.cols))
}

fn run_test(a: TestArgs) -> Result<()> {
    let data = load(&a.values, &a.topology)?;
    let weights = data.weights(a.topology.isolated())?;
    let x = data.field(&a.x, a.rank)?;
    let y = data.field(&a.y, a.rank)?;
    let mut config = SignificanceConfig::new(null_method(a.method, a.beta_x, a.beta_y, &data)?, a.stat.into());
    if let Some(n) = a.resample.samples {
        config.n_samples = n;
    }
    config.tail = a.resample.tail();
    config.pairing = a.resample.pairing();
    config.resample = a.resample.resample_config();
    config.seed = a.resample.seed;
    let report = estimate_pvalue(&x, &y, &weights, &config)?;
    if report.non_converged > 0 {
        log::warn!("{} resamples did not reach the target Moran's I", report.non_converged);
    }
    let naive_p_value = match config.stat {
        StatKind::Pearson => naive_t_pvalue(report.observed_stat, data.n_sites()).ok(),
        _ => None,
    };
    let body = TestBody {
        x: a.x,
        y: a.y,
        n_sites: data.n_sites(),
        ranked: a.rank,
        naive_p_value,
        report,
    };
    let text = if a.output.json {
        report::to_json("test", &body)?
    } else {
        report::test_text(&body)
    };
    emit(a.output.out.as_deref(), &text)
}

fn run_calibrate(a: CalibrateArgs) -> Result<()> {
    let (default_trials, default_samples, default_grid) = if a.full_scale {
        (1000, 100, GridSpec { rows: 40, cols: 40 })
    } else {
        (200, 50, GridSpec { rows: 20, cols: 20 })
    };
    let trials = a.trials.unwrap_or(default_trials);
    let grid = a.grid.unwrap_or(default_grid);
    let mut config = CalibrationConfig {
        methods: a.methods.iter().map(|&m| m.into()).collect(),
        stats: a.stats.iter().map(|&s| s.into()).collect(),
        n_samples: a.resample.samples.unwrap_or(default_samples),
        tail: a.resample.tail(),
        pairing: a.resample.pairing(),
        resample: a.resample.resample_config(),
        bootstrap: a.bootstrap,
        seed: a.resample.seed,
        ..CalibrationConfig::default()
    };
    if !a.alphas.is_empty() {
        config.alphas = a.alphas.clone();
    }
    let report = calibrate(a.beta_x, a.beta_y, trials, (grid.rows, grid.cols), &config)?;
    if report.non_converged > 0 {
        log::warn!("{} resamples did not reach the target Moran's I", report.non_converged);
    }
    let json = report::to_json("calibrate", &report)?;
    let csv = report::calibration_csv(&report)?;
    match &a.out {
        Some(path) => {
            emit(Some(path), &csv)?;
            emit(Some(&path.with_extension("json")), &json)
        }
        None if a.json => emit(None, &json),
        None => emit(None, &csv),
    }
}

fn run_variance(a: VarianceArgs) -> Result<()> {
    let data = load(&a.values, &a.topology)?;
    let weights = data.weights(a.topology.isolated())?;
    let numerator = data.field(&a.numerator, false)?;
    let denominator = data.field(&a.denominator, false)?;
    let method = null_method(a.method, None, None, &data)?;
    let mut config = SignificanceConfig::new(method, StatKind::Pearson);
    if let Some(n) = a.resample.samples {
        config.n_samples = n;
    }
    config.pairing = a.resample.pairing();
    config.resample = a.resample.resample_config();
    config.seed = a.resample.seed;
    let report = estimate_variance(&numerator, &denominator, &weights, &config)?;
    let body = VarianceBody {
        numerator: a.numerator,
        denominator: a.denominator,
        n_sites: data.n_sites(),
        report,
    };
    let text = if a.output.json {
        report::to_json("variance", &body)?
    } else {
        report::variance_text(&body)
    };
    emit(a.output.out.as_deref(), &text)
}
