use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spikerank::experiment::{
    self, BudgetMechanism, GridSpec, MeasurementForm, SceneSource, SpikeSweepConfig, SvpDemoConfig, TemSweepConfig,
};
use spikerank::fourier_model::random_ensemble;
use spikerank::recon_known::InitMode;
use spikerank::scene::{gram_check, mixing_from_grid_2d, uniform_grid, SceneDims, SceneSpec};
use spikerank::svp::{StepRule, SvpConfig};
use spikerank::tem::{read_spike_csv, write_spike_csv};
use spikerank::{
    assemble_system, feasibility, interpolate_patch, solve, svp_recover, BasisSet, CoefficientMatrix, Execution,
    MixingMatrix, SensingOperator, SignalEnsemble, TemParams, VideoPatch,
};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spikerank", version, about = "Time encoding of low-rank signal ensembles and recovery from spikes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a scene or random ensemble into spike trains.
    Encode(EncodeArgs),
    /// Reconstruct coefficients from spike trains.
    Decode(DecodeArgs),
    /// Error versus per-TEM spike budget on one grid.
    SweepSpikes(SweepSpikesArgs),
    /// Error versus TEM count at fixed budgets.
    SweepTems(SweepTemsArgs),
    /// Compare no-structure, known-mixing and SVP recovery.
    SvpDemo(SvpDemoArgs),
    /// Check the Gram matrix of a uniform sensor grid.
    GramCheck(GramCheckArgs),
}

#[derive(Args, Clone, Default)]
struct SweepOverrides {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds as `a..b`, `a..=b` or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// Budgets as `a..b`, `a..=b` or a comma list.
    #[arg(long)]
    budgets: Option<String>,
    #[arg(long, value_parser = parse_mechanism)]
    mechanism: Option<BudgetMechanism>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepSpikesArgs {
    #[command(flatten)]
    common: SweepOverrides,
    /// Uniform grid as `ROWSxCOLS`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<InitMode>,
    /// Use the 9x9x9 scene.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args)]
struct SweepTemsArgs {
    #[command(flatten)]
    common: SweepOverrides,
    /// Grid rows; the sweep runs `rows x c` for every entry of `--cols`.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<String>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<InitMode>,
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args)]
struct SvpDemoArgs {
    #[command(flatten)]
    common: SweepOverrides,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Video patch (VPF1); replaces the configured scene.
    #[arg(long)]
    patch: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    grid: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    spikes: PathBuf,
    /// JSON with the basis and per-TEM parameters, as written by `encode`.
    #[arg(long)]
    tems: PathBuf,
    /// Known mixing matrix CSV; recovers C(x).
    #[arg(long, conflicts_with = "rank")]
    mixing: Option<PathBuf>,
    /// Unknown mixing of known rank; recovers C(y) by SVP.
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, value_parser = parse_mode, default_value = "known-init")]
    mode: InitMode,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Exit with status 3 when the spikes cannot determine the coefficients.
    #[arg(long)]
    require_feasible: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GramCheckArgs {
    #[arg(long)]
    k1: usize,
    #[arg(long, default_value_t = 0)]
    k2: usize,
    /// Grid as `ROWSxCOLS`; defaults to the sufficient uniform grid.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    d1: f64,
    #[arg(long, default_value_t = 1.0)]
    d2: f64,
    #[arg(long)]
    require_identity: bool,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Infeasible(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::SweepSpikes(a) => cmd_sweep_spikes(a),
        Command::SweepTems(a) => cmd_sweep_tems(a),
        Command::SvpDemo(a) => cmd_svp_demo(a),
        Command::GramCheck(a) => cmd_gram_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Parses a JSON config; serde reports line and column on failure.
fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(config_error)?;
    serde_json::from_str(&text).map_err(|e| config_error(anyhow!("{}: {e}", path.display())))
}

fn parse_list<T: std::str::FromStr + TryFrom<u64>>(s: &str) -> CliResult<Vec<T>> {
    let bad = || config_error(anyhow!("cannot parse list `{s}`"));
    let num = |v: &str| v.trim().parse::<u64>().map_err(|_| bad());
    let convert = |v: u64| T::try_from(v).map_err(|_| bad());
    let values: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<CliResult<_>>()?
    };
    values.into_iter().map(convert).collect()
}

fn parse_grid(s: &str) -> CliResult<GridSpec> {
    let (r, c) = s.split_once('x').ok_or_else(|| config_error(anyhow!("grid must look like ROWSxCOLS, got `{s}`")))?;
    let rows = r.trim().parse().map_err(|_| config_error(anyhow!("bad grid rows `{r}`")))?;
    let cols = c.trim().parse().map_err(|_| config_error(anyhow!("bad grid cols `{c}`")))?;
    Ok(GridSpec::Uniform { rows, cols })
}

fn parse_mechanism(s: &str) -> std::result::Result<BudgetMechanism, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown mechanism `{s}`"))
}

fn parse_mode(s: &str) -> std::result::Result<InitMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown mode `{s}`"))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(config_error)
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Library errors at setup time are configuration problems.
fn setup<T>(r: spikerank::Result<T>) -> CliResult<T> {
    r.map_err(config_error)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SceneConfig {
    dims: Option<SceneDims>,
    /// VPF1 patch; periods default to the patch size.
    patch: Option<PathBuf>,
    full_scale: bool,
}

impl SceneConfig {
    fn source(&self) -> CliResult<SceneSource> {
        if let Some(path) = &self.patch {
            let patch = setup(VideoPatch::read_vpf(open(path)?))?;
            let (t, d1, d2) = match self.dims {
                Some(d) => (d.period, d.d1_period, d.d2_period),
                None => (patch.frames as f64, patch.height as f64, patch.width as f64),
            };
            return Ok(SceneSource::Fixed(setup(interpolate_patch(&patch, t, d1, d2))?));
        }
        let dims = match (self.full_scale, self.dims) {
            (true, _) => experiment::full_scale_dims(),
            (false, Some(d)) => d,
            (false, None) => experiment::desk_dims(),
        };
        Ok(SceneSource::RandomPatch(dims))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SweepSpikesFile {
    scene: SceneConfig,
    grid: GridSpec,
    budgets: Vec<usize>,
    seeds: Vec<u64>,
    mechanism: BudgetMechanism,
    mode: InitMode,
    kappa: f64,
}

impl Default for SweepSpikesFile {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            grid: GridSpec::Uniform { rows: 5, cols: 5 },
            budgets: (0..=12).collect(),
            seeds: (0..10).collect(),
            mechanism: BudgetMechanism::default(),
            mode: InitMode::default(),
            kappa: 1.0,
        }
    }
}

fn apply_common(
    o: &SweepOverrides,
    seeds: &mut Vec<u64>,
    budgets: &mut Vec<usize>,
    mechanism: &mut BudgetMechanism,
    kappa: &mut f64,
) -> CliResult<()> {
    if let Some(s) = &o.seeds {
        *seeds = parse_list(s)?;
    }
    if let Some(b) = &o.budgets {
        *budgets = parse_list(b)?;
    }
    if let Some(m) = o.mechanism {
        *mechanism = m;
    }
    if let Some(k) = o.kappa {
        *kappa = k;
    }
    Ok(())
}

fn cmd_sweep_spikes(a: SweepSpikesArgs) -> CliResult<()> {
    let mut f: SweepSpikesFile = load_config(a.common.config.as_deref())?;
    apply_common(&a.common, &mut f.seeds, &mut f.budgets, &mut f.mechanism, &mut f.kappa)?;
    if let Some(g) = &a.grid {
        f.grid = parse_grid(g)?;
    }
    if let Some(m) = a.mode {
        f.mode = m;
    }
    f.scene.full_scale |= a.full_scale;
    let config = SpikeSweepConfig {
        source: f.scene.source()?,
        grid: f.grid,
        budgets: f.budgets,
        seeds: f.seeds,
        mechanism: f.mechanism,
        mode: f.mode,
        kappa: f.kappa,
    };
    let rows = setup(experiment::sweep_spikes(&config, Execution::Parallel))?;
    experiment::write_sweep_csv(&rows, output(a.common.out.as_deref())?).map_err(anyhow::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SweepTemsFile {
    scene: SceneConfig,
    /// Explicit grids; otherwise `rows x c` for each entry of `cols`.
    grids: Option<Vec<GridSpec>>,
    rows: usize,
    cols: Vec<usize>,
    budgets: Vec<usize>,
    seeds: Vec<u64>,
    mechanism: BudgetMechanism,
    mode: InitMode,
    kappa: f64,
}

impl Default for SweepTemsFile {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            grids: None,
            rows: 5,
            cols: (1..=12).collect(),
            budgets: vec![3, 5, 9],
            seeds: (0..10).collect(),
            mechanism: BudgetMechanism::default(),
            mode: InitMode::default(),
            kappa: 1.0,
        }
    }
}

fn cmd_sweep_tems(a: SweepTemsArgs) -> CliResult<()> {
    let mut f: SweepTemsFile = load_config(a.common.config.as_deref())?;
    apply_common(&a.common, &mut f.seeds, &mut f.budgets, &mut f.mechanism, &mut f.kappa)?;
    if let Some(r) = a.rows {
        f.rows = r;
        f.grids = None;
    }
    if let Some(c) = &a.cols {
        f.cols = parse_list(c)?;
        f.grids = None;
    }
    if let Some(m) = a.mode {
        f.mode = m;
    }
    f.scene.full_scale |= a.full_scale;
    let grids = f.grids.unwrap_or_else(|| f.cols.iter().map(|&cols| GridSpec::Uniform { rows: f.rows, cols }).collect());
    let config = TemSweepConfig {
        source: f.scene.source()?,
        grids,
        budgets: f.budgets,
        seeds: f.seeds,
        mechanism: f.mechanism,
        mode: f.mode,
        kappa: f.kappa,
    };
    let rows = setup(experiment::sweep_tems(&config, Execution::Parallel))?;
    experiment::write_sweep_csv(&rows, output(a.common.out.as_deref())?).map_err(anyhow::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SvpDemoFile {
    channels: usize,
    rank: usize,
    basis_len: usize,
    omega: f64,
    amplitude_bound: f64,
    budgets: Vec<usize>,
    seeds: Vec<u64>,
    mechanism: BudgetMechanism,
    kappa: f64,
    max_iters: usize,
    form: MeasurementForm,
    step_rule: StepRule,
}

impl Default for SvpDemoFile {
    fn default() -> Self {
        let d = SvpDemoConfig::default();
        Self {
            channels: d.channels,
            rank: d.rank,
            basis_len: d.basis_len,
            omega: d.omega,
            amplitude_bound: d.amplitude_bound,
            budgets: d.budgets,
            seeds: d.seeds,
            mechanism: d.mechanism,
            kappa: d.kappa,
            max_iters: d.max_iters,
            form: d.form,
            step_rule: d.step_rule,
        }
    }
}

fn cmd_svp_demo(a: SvpDemoArgs) -> CliResult<()> {
    let mut f: SvpDemoFile = load_config(a.common.config.as_deref())?;
    apply_common(&a.common, &mut f.seeds, &mut f.budgets, &mut f.mechanism, &mut f.kappa)?;
    if let Some(m) = a.max_iters {
        f.max_iters = m;
    }
    let config = SvpDemoConfig {
        channels: f.channels,
        rank: f.rank,
        basis_len: f.basis_len,
        omega: f.omega,
        amplitude_bound: f.amplitude_bound,
        budgets: f.budgets,
        seeds: f.seeds,
        mechanism: f.mechanism,
        kappa: f.kappa,
        max_iters: f.max_iters,
        form: f.form,
        step_rule: f.step_rule,
    };
    let rows = setup(experiment::svp_demo(&config, Execution::Parallel))?;
    experiment::write_svp_csv(&rows, output(a.common.out.as_deref())?).map_err(anyhow::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleConfig {
    channels: usize,
    rank: usize,
    basis: BasisSet,
    amplitude_bound: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EncodeFile {
    scene: SceneConfig,
    /// Random ensemble instead of a scene.
    ensemble: Option<EnsembleConfig>,
    grid: Option<GridSpec>,
    /// Encoding window; defaults to one period or the sinc span.
    window: Option<(f64, f64)>,
    budget: usize,
    mechanism: BudgetMechanism,
    kappa: f64,
    seed: u64,
}

impl Default for EncodeFile {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            ensemble: None,
            grid: None,
            window: None,
            budget: 5,
            mechanism: BudgetMechanism::default(),
            kappa: 1.0,
            seed: 0,
        }
    }
}

/// Basis and TEM parameters shared by encoder and decoder.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemFile {
    basis: BasisSet,
    tems: Vec<TemParams>,
}

fn cmd_encode(a: EncodeArgs) -> CliResult<()> {
    let mut f: EncodeFile = load_config(a.config.as_deref())?;
    if let Some(p) = a.patch {
        f.scene.patch = Some(p);
        f.ensemble = None;
    }
    if let Some(s) = a.seed {
        f.seed = s;
    }
    if let Some(b) = a.budget {
        f.budget = b;
    }
    if let Some(g) = &a.grid {
        f.grid = Some(parse_grid(g)?);
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let (ensemble, scene): (SignalEnsemble, Option<SceneSpec>) = match &f.ensemble {
        Some(e) => (setup(random_ensemble(e.channels, e.rank, e.basis.clone(), e.amplitude_bound, f.seed))?, None),
        None => {
            let scene = f.scene.source()?.scene(f.seed).map_err(config_error)?;
            let d = scene.dims;
            let grid_spec = f.grid.clone().unwrap_or(GridSpec::Uniform { rows: d.n1(), cols: d.n2() });
            let grid = setup(grid_spec.build(&d))?;
            (setup(scene.to_ensemble(&grid))?, Some(scene))
        }
    };
    let window = f.window.unwrap_or_else(|| experiment::sinc_window(ensemble.basis()));
    let (trains, params) =
        setup(experiment::encode_with_budget(&ensemble, f.budget, f.mechanism, f.kappa, window, f.seed))?;

    let out = |name: &str| a.out.join(name);
    write_spike_csv(&trains, create(&out("spikes.csv"))?).map_err(anyhow::Error::from)?;
    let tem_file = TemFile { basis: ensemble.basis().clone(), tems: params };
    let mut w = create(&out("tems.json"))?;
    serde_json::to_writer_pretty(&mut w, &tem_file).map_err(anyhow::Error::from)?;
    w.flush().map_err(anyhow::Error::from)?;
    ensemble.mixing().to_coefficient_matrix().write_csv(create(&out("mixing.csv"))?).map_err(anyhow::Error::from)?;
    ensemble.low_coeffs().write_csv(create(&out("truth_cx.csv"))?).map_err(anyhow::Error::from)?;
    ensemble.observed_coeffs().write_csv(create(&out("truth_cy.csv"))?).map_err(anyhow::Error::from)?;
    if let Some(s) = scene {
        s.write(create(&out("scene.csv"))?, create(&out("scene.json"))?).map_err(anyhow::Error::from)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    rank: usize,
    unknowns: usize,
    residual: f64,
    feasible: bool,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
}

fn cmd_decode(a: DecodeArgs) -> CliResult<()> {
    let tem_file: TemFile = serde_json::from_reader(open(&a.tems)?)
        .map_err(|e| config_error(anyhow!("{}: {e}", a.tems.display())))?;
    let trains = setup(read_spike_csv(open(&a.spikes)?, tem_file.tems.len()))?;
    let counts: Vec<usize> = trains.iter().map(|t| t.len()).collect();
    let k = tem_file.basis.len();
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let (coeffs, diagnostics) = match (&a.mixing, a.rank) {
        (Some(path), _) => {
            let mixing = MixingMatrix::from_coefficient_matrix(setup(CoefficientMatrix::read_csv(open(path)?))?);
            let report = feasibility(&counts, k, mixing.cols(), a.mode);
            let system = setup(assemble_system(&mixing, &tem_file.basis, &trains, &tem_file.tems, a.mode, Execution::Parallel))?;
            let sol = solve(&system);
            let d = sol.diagnostics;
            let status = if d.underdetermined { "underdetermined" } else { "ok" };
            let diag = Diagnostics {
                rank: d.rank,
                unknowns: d.unknowns,
                residual: d.residual,
                feasible: report.feasible,
                status,
                iterations: None,
            };
            (sol.coeffs, diag)
        }
        (None, Some(rank)) => {
            let report = feasibility(&counts, k, rank, InitMode::KnownInit);
            let (op, b) = setup(SensingOperator::from_trains_interspike(&tem_file.basis, &trains, &tem_file.tems))?;
            let mut config = SvpConfig::new(rank);
            config.step_rule = StepRule::Backtracking;
            if let Some(m) = a.max_iters {
                config.max_iters = m;
            }
            let (coeffs, diag) = if op.is_empty() {
                let zero = CoefficientMatrix::zeros(tem_file.tems.len(), k);
                (zero, Diagnostics { rank: 0, unknowns: 0, residual: 0.0, feasible: false, status: "underdetermined", iterations: Some(0) })
            } else {
                let out = setup(svp_recover(&op, &b, &config))?;
                let (rows, cols) = op.shape();
                let diag = Diagnostics {
                    rank,
                    unknowns: rank * (rows + cols - rank),
                    residual: out.residual_sq.sqrt(),
                    feasible: report.feasible,
                    status: if out.converged { "ok" } else { "not-converged" },
                    iterations: Some(out.iterations),
                };
                (setup(CoefficientMatrix::new(out.estimate))?, diag)
            };
            (coeffs, diag)
        }
        (None, None) => return Err(config_error(anyhow!("decode needs --mixing or --rank"))),
    };

    coeffs.write_csv(create(&a.out.join("coefficients.csv"))?).map_err(anyhow::Error::from)?;
    let mut w = create(&a.out.join("diagnostics.json"))?;
    serde_json::to_writer_pretty(&mut w, &diagnostics).map_err(anyhow::Error::from)?;
    w.flush().map_err(anyhow::Error::from)?;
    if a.require_feasible && !diagnostics.feasible {
        return Err(Failure::Infeasible(format!("spike counts {counts:?} do not determine the coefficients")));
    }
    Ok(())
}

fn cmd_gram_check(a: GramCheckArgs) -> CliResult<()> {
    let grid = match &a.grid {
        Some(g) => setup(parse_grid(g)?.build(&SceneDims {
            k0: 0,
            k1: a.k1,
            k2: a.k2,
            period: 1.0,
            d1_period: a.d1,
            d2_period: a.d2,
        }))?,
        None => uniform_grid(a.k1, a.k2, a.d1, a.d2),
    };
    let report = gram_check(&mixing_from_grid_2d(&grid, a.k1, a.k2, a.d1, a.d2));
    println!("{}", serde_json::to_string(&report).map_err(anyhow::Error::from)?);
    if a.require_identity && !report.is_scaled_identity {
        return Err(Failure::Infeasible(format!("Gram deviates from N*I by {:.3e}", report.max_deviation)));
    }
    Ok(())
}
