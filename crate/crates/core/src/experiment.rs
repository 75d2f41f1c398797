//! Sweep harness: spike budgets, TEM counts and the SVP scenario comparison.
//!
//! Every row depends only on its `(config, seed)`: scenes come from a patch
//! drawn with `seed`, and TEM `i` draws its initial integrator from stream
//! `i + 1` of the same seed.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fourier_model::{random_ensemble, BasisSet, Channel, MixingMatrix, SignalEnsemble};
use crate::recon_known::{assemble_system, feasibility, solve, InitMode};
use crate::scene::{interpolate_patch, SceneDims, SceneSpec, SensorGrid, VideoPatch};
use crate::svp::{svp_recover, SensingOperator, StepRule, SvpConfig, DEFAULT_MAX_ITERS};
use crate::tem::{encode, SpikeTrain, TemParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Success threshold on the squared relative error.
pub const EXACT_RECOVERY: f64 = 1e-8;

/// How a TEM is made to emit a target number of spikes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetMechanism {
    /// Threshold chosen from the signal so the machine fires exactly `n` times.
    #[default]
    ThresholdScaling,
    /// Threshold low enough for at least `n` spikes at any admissible input;
    /// the train is then cut to the first `n`.
    Truncation,
}

/// Per-TEM random stream derived from the trial seed.
pub fn tem_rng(seed: u64, tem: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tem as u64 + 1);
    rng
}

/// TEM parameters for `signal` over `[t_start, t_end]` targeting `budget` spikes.
///
/// The initial integrator is `u·δ` with `u` uniform in `[-0.9, 0.9]`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate<C: Channel + ?Sized>(
    signal: &C,
    budget: usize,
    mechanism: BudgetMechanism,
    kappa: f64,
    bias: f64,
    t_start: f64,
    t_end: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TemParams> {
    let u: f64 = rng.random_range(-0.9..=0.9);
    let window = t_end - t_start;
    // G(t_end) − G(t_start), positive because bias > c
    let rise = signal.integral(t_start, t_end) + bias * window;
    if !(rise > 0.0) {
        return Err(Error::BiasTooSmall { bias, bound: signal.amplitude_bound() });
    }
    let delta = if budget == 0 {
        2.0 * rise / kappa
    } else {
        match mechanism {
            // G(t_end) lands on 2nκδ, midway between the n-th and (n+1)-th levels
            BudgetMechanism::ThresholdScaling => rise / (kappa * (2 * budget) as f64 - kappa * u),
            BudgetMechanism::Truncation => (bias - signal.amplitude_bound()) * window / (2.0 * kappa * budget as f64),
        }
    };
    let zeta0 = if budget == 0 { 0.0 } else { u * delta };
    TemParams::new(kappa, delta, bias, zeta0, t_start, t_end)
}

/// Encodes every channel of `ensemble` with `budget` spikes each.
pub fn encode_with_budget(
    ensemble: &SignalEnsemble,
    budget: usize,
    mechanism: BudgetMechanism,
    kappa: f64,
    window: (f64, f64),
    seed: u64,
) -> Result<(Vec<SpikeTrain>, Vec<TemParams>)> {
    let c = ensemble.amplitude_bound();
    let bias = if c > 0.0 { 2.0 * c } else { 1.0 };
    let mut trains = Vec::with_capacity(ensemble.channel_count());
    let mut params = Vec::with_capacity(ensemble.channel_count());
    for i in 0..ensemble.channel_count() {
        let channel = ensemble.channel(i);
        let p = calibrate(&channel, budget, mechanism, kappa, bias, window.0, window.1, &mut tem_rng(seed, i))?;
        let train = encode(i, &channel, &p)?.train;
        trains.push(if mechanism == BudgetMechanism::Truncation { train.truncated(budget) } else { train });
        params.push(p);
    }
    Ok((trains, params))
}

/// `‖est − truth‖²_F / ‖truth‖²_F`; absolute when the truth vanishes.
pub fn squared_relative_error(estimate: &DMatrix<Complex64>, truth: &DMatrix<Complex64>) -> f64 {
    let num = (estimate - truth).norm_squared();
    let den = truth.norm_squared();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    Uniform { rows: usize, cols: usize },
    Explicit { locations: Vec<(f64, f64)> },
}

impl GridSpec {
    pub fn build(&self, dims: &SceneDims) -> Result<SensorGrid> {
        match self {
            GridSpec::Uniform { rows, cols } => {
                if *rows == 0 || *cols == 0 {
                    return Err(Error::InvalidParams("grid needs at least one row and column".into()));
                }
                Ok(SensorGrid::uniform(*rows, *cols, dims.d1_period, dims.d2_period))
            }
            GridSpec::Explicit { locations } => SensorGrid::new(locations.clone(), dims.d1_period, dims.d2_period),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GridSpec::Uniform { rows, cols } => format!("{rows}x{cols}"),
            GridSpec::Explicit { locations } => format!("explicit{}", locations.len()),
        }
    }
}

/// Where trial scenes come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneSource {
    /// A uniform `[0, 1)` patch of the dims' lattice size, drawn per seed.
    RandomPatch(SceneDims),
    /// One fixed scene for every seed.
    Fixed(SceneSpec),
}

impl SceneSource {
    pub fn dims(&self) -> SceneDims {
        match self {
            SceneSource::RandomPatch(d) => *d,
            SceneSource::Fixed(s) => s.dims,
        }
    }

    pub fn scene(&self, seed: u64) -> Result<SceneSpec> {
        match self {
            SceneSource::RandomPatch(d) => {
                let patch = VideoPatch::random(d.n1(), d.n2(), d.n0(), seed)?;
                interpolate_patch(&patch, d.period, d.d1_period, d.d2_period)
            }
            SceneSource::Fixed(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub relative_error: f64,
    pub spike_counts: Vec<usize>,
    pub feasible: bool,
}

/// Encodes `scene` on `grid`, reconstructs the temporal slices and scores them.
///
/// In UnknownInit mode the decoder assumes a zero initial integrator.
pub fn scene_trial(
    scene: &SceneSpec,
    grid: &SensorGrid,
    budget: usize,
    mechanism: BudgetMechanism,
    mode: InitMode,
    kappa: f64,
    seed: u64,
) -> Result<TrialOutcome> {
    let ensemble = scene.to_ensemble(grid)?;
    let (trains, mut params) = encode_with_budget(&ensemble, budget, mechanism, kappa, (0.0, scene.dims.period), seed)?;
    let counts: Vec<usize> = trains.iter().map(SpikeTrain::len).collect();
    let report = feasibility(&counts, ensemble.basis().len(), ensemble.rank(), mode);
    let truth = ensemble.low_coeffs().as_matrix();
    if counts.iter().all(|&n| n == 0) {
        let zero = DMatrix::zeros(truth.nrows(), truth.ncols());
        return Ok(TrialOutcome {
            relative_error: squared_relative_error(&zero, truth),
            spike_counts: counts,
            feasible: report.feasible,
        });
    }
    if mode == InitMode::UnknownInit {
        params.iter_mut().for_each(|p| p.zeta0 = 0.0);
    }
    let system =
        assemble_system(ensemble.mixing(), ensemble.basis(), &trains, &params, mode, Execution::Sequential)?;
    let solution = solve(&system);
    Ok(TrialOutcome {
        relative_error: squared_relative_error(solution.coeffs.as_matrix(), truth),
        spike_counts: counts,
        feasible: report.feasible,
    })
}

/// One CSV row of a spike or TEM sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub sweep_value: f64,
    pub grid: String,
    pub tems: usize,
    pub budget: usize,
    pub seed: u64,
    pub total_spikes: usize,
    pub relative_error: f64,
    pub feasible: bool,
    /// Orange marker; empty when no value on the axis is feasible.
    pub theorem_threshold: Option<f64>,
    /// Green marker: naive constraint count equal to the unknowns.
    pub naive_threshold: f64,
}

/// Smallest per-TEM budget meeting the capped-sum condition for `tems` TEMs.
pub fn budget_threshold(tems: usize, basis_len: usize, rank: usize, mode: InitMode) -> Option<usize> {
    let max_useful = basis_len + usize::from(mode == InitMode::UnknownInit);
    (0..=max_useful).find(|&n| feasibility(&vec![n; tems], basis_len, rank, mode).feasible)
}

/// Smallest TEM count meeting the capped-sum condition at a per-TEM budget.
pub fn tem_threshold(budget: usize, basis_len: usize, rank: usize, mode: InitMode) -> Option<usize> {
    let per = feasibility(&[budget], basis_len, rank, mode).capped_sum;
    if per == 0 {
        return None;
    }
    let required = rank * basis_len;
    let start = required / per;
    (start.max(1)..=start + 1).find(|&i| feasibility(&vec![budget; i], basis_len, rank, mode).feasible)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSweepConfig {
    pub source: SceneSource,
    pub grid: GridSpec,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub mechanism: BudgetMechanism,
    pub mode: InitMode,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemSweepConfig {
    pub source: SceneSource,
    /// Grids in sweep order; the sweep value is each grid's TEM count.
    pub grids: Vec<GridSpec>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub mechanism: BudgetMechanism,
    pub mode: InitMode,
    pub kappa: f64,
}

/// Default desk-scale scene: `K0 = K1 = K2 = 2` with unit lattice spacing.
pub fn desk_dims() -> SceneDims {
    SceneDims { k0: 2, k1: 2, k2: 2, period: 5.0, d1_period: 5.0, d2_period: 5.0 }
}

/// Paper-scale scene: `9 × 9 × 9` coefficients.
pub fn full_scale_dims() -> SceneDims {
    SceneDims { k0: 4, k1: 4, k2: 4, period: 9.0, d1_period: 9.0, d2_period: 9.0 }
}

fn check_common(seeds: &[u64], budgets: &[usize], kappa: f64) -> Result<()> {
    if seeds.is_empty() || budgets.is_empty() {
        return Err(Error::InvalidParams("sweep needs at least one seed and one budget".into()));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParams(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// Error versus per-TEM spike budget on one grid.
pub fn sweep_spikes(config: &SpikeSweepConfig, exec: Execution) -> Result<Vec<SweepResult>> {
    check_common(&config.seeds, &config.budgets, config.kappa)?;
    let dims = config.source.dims();
    let grid = config.grid.build(&dims)?;
    let (tems, k, j) = (grid.len(), dims.n0(), dims.spatial_count());
    let theorem = budget_threshold(tems, k, j, config.mode).map(|n| n as f64);
    let naive = (j * k) as f64 / tems as f64;
    let label = config.grid.label();

    let jobs: Vec<(usize, u64)> =
        config.budgets.iter().flat_map(|&b| config.seeds.iter().map(move |&s| (b, s))).collect();
    let rows = exec.map(jobs, |(budget, seed)| -> Result<SweepResult> {
        let scene = config.source.scene(seed)?;
        let out = scene_trial(&scene, &grid, budget, config.mechanism, config.mode, config.kappa, seed)?;
        Ok(SweepResult {
            sweep_value: budget as f64,
            grid: label.clone(),
            tems,
            budget,
            seed,
            total_spikes: out.spike_counts.iter().sum(),
            relative_error: out.relative_error,
            feasible: out.feasible,
            theorem_threshold: theorem,
            naive_threshold: naive,
        })
    });
    rows.into_iter().collect()
}

/// Error versus TEM count at fixed per-TEM budgets.
pub fn sweep_tems(config: &TemSweepConfig, exec: Execution) -> Result<Vec<SweepResult>> {
    check_common(&config.seeds, &config.budgets, config.kappa)?;
    if config.grids.is_empty() {
        return Err(Error::InvalidParams("TEM sweep needs at least one grid".into()));
    }
    let dims = config.source.dims();
    let grids: Vec<SensorGrid> = config.grids.iter().map(|g| g.build(&dims)).collect::<Result<_>>()?;
    let (k, j) = (dims.n0(), dims.spatial_count());

    let mut jobs = Vec::new();
    for &budget in &config.budgets {
        for g in 0..grids.len() {
            for &seed in &config.seeds {
                jobs.push((budget, g, seed));
            }
        }
    }
    let rows = exec.map(jobs, |(budget, g, seed)| -> Result<SweepResult> {
        let grid = &grids[g];
        let scene = config.source.scene(seed)?;
        let out = scene_trial(&scene, grid, budget, config.mechanism, config.mode, config.kappa, seed)?;
        Ok(SweepResult {
            sweep_value: grid.len() as f64,
            grid: config.grids[g].label(),
            tems: grid.len(),
            budget,
            seed,
            total_spikes: out.spike_counts.iter().sum(),
            relative_error: out.relative_error,
            feasible: out.feasible,
            theorem_threshold: tem_threshold(budget, k, j, config.mode).map(|i| i as f64),
            naive_threshold: if budget == 0 { f64::INFINITY } else { ((j * k) as f64 / budget as f64).ceil() },
        })
    });
    rows.into_iter().collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Every channel treated as independent: identity mixing, `I·K` unknowns.
    S1,
    /// Mixing known: `J·K` unknowns.
    S2,
    /// Mixing unknown, rank known: SVP on `C(y)`.
    S3,
}

/// Which form of the spike constraints SVP descends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementForm {
    /// Integrals from the window start to each spike.
    Cumulative,
    /// Integrals between consecutive spikes.
    #[default]
    InterSpike,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvpDemoConfig {
    pub channels: usize,
    pub rank: usize,
    pub basis_len: usize,
    /// Sinc bandwidth; centers sit on the Nyquist lattice `π/Ω`.
    pub omega: f64,
    pub amplitude_bound: f64,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub mechanism: BudgetMechanism,
    pub kappa: f64,
    pub max_iters: usize,
    pub form: MeasurementForm,
    pub step_rule: StepRule,
}

impl Default for SvpDemoConfig {
    fn default() -> Self {
        Self {
            channels: 8,
            rank: 2,
            basis_len: 9,
            omega: PI,
            amplitude_bound: 1.0,
            budgets: (1..=12).collect(),
            seeds: (0..25).collect(),
            mechanism: BudgetMechanism::ThresholdScaling,
            kappa: 1.0,
            max_iters: DEFAULT_MAX_ITERS,
            form: MeasurementForm::InterSpike,
            step_rule: StepRule::Backtracking,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvpDemoRow {
    pub scenario: Scenario,
    pub budget: usize,
    pub total_spikes: usize,
    pub seed: u64,
    pub relative_error: f64,
    /// SVP iterations; zero for the least-squares scenarios.
    pub iterations: usize,
    pub converged: bool,
    pub jk_threshold: usize,
    pub ik_threshold: usize,
}

/// Encoding window for a sinc basis: the centers padded by half a spacing.
pub fn sinc_window(basis: &BasisSet) -> (f64, f64) {
    match basis {
        BasisSet::Sinc { omega, centers } => {
            let half = 0.5 * PI / omega;
            (centers[0] - half, centers[centers.len() - 1] + half)
        }
        BasisSet::PeriodicExp { period, .. } => (0.0, *period),
    }
}

/// One seed and budget of the scenario comparison; returns S1, S2, S3 rows.
pub fn svp_trial(config: &SvpDemoConfig, budget: usize, seed: u64) -> Result<[SvpDemoRow; 3]> {
    let basis = BasisSet::sinc_nyquist(config.omega, config.basis_len)?;
    let window = sinc_window(&basis);
    let ensemble = random_ensemble(config.channels, config.rank, basis, config.amplitude_bound, seed)?;
    let (trains, params) = encode_with_budget(&ensemble, budget, config.mechanism, config.kappa, window, seed)?;
    let total: usize = trains.iter().map(SpikeTrain::len).sum();
    let truth = ensemble.observed_coeffs().as_matrix();
    let (i, j, k) = (config.channels, config.rank, config.basis_len);
    let row = |scenario, err, iterations, converged| SvpDemoRow {
        scenario,
        budget,
        total_spikes: total,
        seed,
        relative_error: err,
        iterations,
        converged,
        jk_threshold: j * k,
        ik_threshold: i * k,
    };
    if total == 0 {
        let e = squared_relative_error(&DMatrix::zeros(i, k), truth);
        return Ok([row(Scenario::S1, e, 0, false), row(Scenario::S2, e, 0, false), row(Scenario::S3, e, 0, false)]);
    }

    let seq = Execution::Sequential;
    let s1 = solve(&assemble_system(&MixingMatrix::identity(i), ensemble.basis(), &trains, &params, InitMode::KnownInit, seq)?);
    let e1 = squared_relative_error(s1.coeffs.as_matrix(), truth);

    let s2 = solve(&assemble_system(ensemble.mixing(), ensemble.basis(), &trains, &params, InitMode::KnownInit, seq)?);
    let cy = ensemble.mixing().apply(&s2.coeffs)?;
    let e2 = squared_relative_error(cy.as_matrix(), truth);

    let (op, b) = match config.form {
        MeasurementForm::Cumulative => SensingOperator::from_trains(ensemble.basis(), &trains, &params)?,
        MeasurementForm::InterSpike => SensingOperator::from_trains_interspike(ensemble.basis(), &trains, &params)?,
    };
    let mut svp_config = SvpConfig::new(j);
    svp_config.max_iters = config.max_iters;
    svp_config.step_rule = config.step_rule;
    let s3 = svp_recover(&op, &b, &svp_config)?;
    let e3 = squared_relative_error(&s3.estimate, truth);

    Ok([
        row(Scenario::S1, e1, 0, s1.diagnostics.rank == s1.diagnostics.unknowns),
        row(Scenario::S2, e2, 0, s2.diagnostics.rank == s2.diagnostics.unknowns),
        row(Scenario::S3, e3, s3.iterations, s3.converged),
    ])
}

/// Rows ordered by scenario, then budget, then seed.
pub fn svp_demo(config: &SvpDemoConfig, exec: Execution) -> Result<Vec<SvpDemoRow>> {
    check_common(&config.seeds, &config.budgets, config.kappa)?;
    if config.rank == 0 || config.rank > config.channels || config.basis_len == 0 {
        return Err(Error::InvalidParams(format!(
            "need 1 <= J <= I and K >= 1, got I={}, J={}, K={}",
            config.channels, config.rank, config.basis_len
        )));
    }
    let jobs: Vec<(usize, u64)> =
        config.budgets.iter().flat_map(|&b| config.seeds.iter().map(move |&s| (b, s))).collect();
    let trials = exec.map(jobs, |(budget, seed)| svp_trial(config, budget, seed));
    let mut rows = Vec::with_capacity(trials.len() * 3);
    for t in trials {
        rows.extend(t?);
    }
    let order = |s: Scenario| s as u8;
    rows.sort_by_key(|r| order(r.scenario));
    Ok(rows)
}

pub fn write_svp_csv<W: Write>(rows: &[SvpDemoRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Median of the finite values; `NaN` when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tem::encode;

    struct Constant(f64);

    impl Channel for Constant {
        fn value(&self, _: f64) -> f64 {
            self.0
        }
        fn integral(&self, t0: f64, t: f64) -> f64 {
            self.0 * (t - t0)
        }
        fn amplitude_bound(&self) -> f64 {
            self.0.abs()
        }
    }

    #[test]
    fn threshold_scaling_hits_budget() {
        for budget in 0..15 {
            for seed in 0..5 {
                let signal = Constant(0.3);
                let mut rng = tem_rng(seed, 0);
                let p = calibrate(&signal, budget, BudgetMechanism::ThresholdScaling, 1.0, 1.0, 0.0, 4.0, &mut rng)
                    .unwrap();
                assert_eq!(encode(0, &signal, &p).unwrap().train.len(), budget);
            }
        }
    }

    #[test]
    fn truncation_reaches_budget_before_cut() {
        for budget in 1..10 {
            let signal = Constant(-0.4);
            let mut rng = tem_rng(3, 2);
            let p = calibrate(&signal, budget, BudgetMechanism::Truncation, 2.0, 0.8, 1.0, 3.0, &mut rng).unwrap();
            assert!(encode(0, &signal, &p).unwrap().train.len() >= budget);
        }
    }

    #[test]
    fn thresholds_follow_capped_sum() {
        // 25 spatial components, 5 temporal
        assert_eq!(budget_threshold(45, 5, 25, InitMode::KnownInit), Some(3));
        assert_eq!(budget_threshold(25, 5, 25, InitMode::KnownInit), Some(5));
        assert_eq!(budget_threshold(15, 5, 25, InitMode::KnownInit), None);
        assert_eq!(tem_threshold(9, 5, 25, InitMode::KnownInit), Some(25));
        assert_eq!(tem_threshold(3, 5, 25, InitMode::KnownInit), Some(42));
        assert_eq!(tem_threshold(0, 5, 25, InitMode::KnownInit), None);
        assert_eq!(tem_threshold(1, 5, 25, InitMode::UnknownInit), None);
    }

    #[test]
    fn zero_budget_gives_unit_error() {
        let source = SceneSource::RandomPatch(SceneDims { k0: 1, k1: 1, k2: 1, period: 3.0, d1_period: 3.0, d2_period: 3.0 });
        let scene = source.scene(4).unwrap();
        let grid = SensorGrid::uniform(3, 3, 3.0, 3.0);
        let out = scene_trial(&scene, &grid, 0, BudgetMechanism::ThresholdScaling, InitMode::KnownInit, 1.0, 4).unwrap();
        assert_eq!(out.relative_error, 1.0);
        assert!(!out.feasible);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn sweep_rows_reproducible() {
        let config = SpikeSweepConfig {
            source: SceneSource::RandomPatch(SceneDims { k0: 1, k1: 1, k2: 0, period: 3.0, d1_period: 3.0, d2_period: 1.0 }),
            grid: GridSpec::Uniform { rows: 3, cols: 1 },
            budgets: vec![1, 3],
            seeds: vec![7, 8],
            mechanism: BudgetMechanism::ThresholdScaling,
            mode: InitMode::KnownInit,
            kappa: 1.0,
        };
        let a = sweep_spikes(&config, Execution::Parallel).unwrap();
        let b = sweep_spikes(&config, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a[2].relative_error < EXACT_RECOVERY && a[2].feasible);
        let mut buf = Vec::new();
        write_sweep_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "sweep_value,grid,tems,budget,seed,total_spikes,relative_error,feasible,theorem_threshold,naive_threshold\n"
        ));
    }
}
