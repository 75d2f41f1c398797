//! Integrate-and-fire time encoding machines.
//!
//! A machine with parameters `κ, δ, β` integrates `(y(t) + β)/κ` starting
//! from `ζ₀` and emits a spike whenever the integrator reaches `δ`, after
//! which it resets to `−δ`. Rather than simulating resets, spikes are found
//! as the crossings of the monotone cumulative function
//!
//! ```text
//! G(t) = κζ₀ + ∫_{t₀}^{t} y + β(t − t₀)
//! ```
//!
//! through the levels `κδ, 3κδ, 5κδ, …`, with the integral taken in closed
//! form from `t₀` every time so that no error accumulates across spikes.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fourier_model::{Channel, SignalEnsemble};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

/// Absolute time tolerance of each located spike.
pub const SPIKE_TIME_TOLERANCE: f64 = 1e-12;

const MAX_ROOT_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemParams {
    pub kappa: f64,
    pub delta: f64,
    pub bias: f64,
    pub zeta0: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl TemParams {
    pub fn new(kappa: f64, delta: f64, bias: f64, zeta0: f64, t_start: f64, t_end: f64) -> Result<Self> {
        let p = Self { kappa, delta, bias, zeta0, t_start, t_end };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kappa, self.delta, self.bias, self.zeta0, self.t_start, self.t_end]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("TEM parameters must be finite".into()));
        }
        if !(self.kappa > 0.0) || !(self.delta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "kappa and delta must be positive (kappa={}, delta={})",
                self.kappa, self.delta
            )));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidParams(format!(
                "empty encoding window [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.zeta0.abs() > self.delta {
            return Err(Error::InvalidParams(format!(
                "initial integrator {} outside [-delta, delta]",
                self.zeta0
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> f64 {
        self.t_end - self.t_start
    }

    fn require_bias_above(&self, bound: f64) -> Result<()> {
        if self.bias <= bound {
            return Err(Error::BiasTooSmall { bias: self.bias, bound });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeTrain {
    pub tem_id: usize,
    pub times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(tem_id: usize, times: Vec<f64>) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams(format!("spike times of TEM {tem_id} are not strictly increasing")));
        }
        Ok(Self { tem_id, times })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Keeps only the first `n` spikes.
    pub fn truncated(mut self, n: usize) -> Self {
        self.times.truncate(n);
        self
    }

    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub train: SpikeTrain,
    /// Integrator value at `t_end`, for resuming on the next window.
    pub final_integrator: f64,
}

/// Spike times of one machine over its window `(t_start, t_end]`.
pub fn encode<C: Channel + ?Sized>(tem_id: usize, signal: &C, params: &TemParams) -> Result<Encoding> {
    params.validate()?;
    let bound = signal.amplitude_bound();
    params.require_bias_above(bound)?;
    if params.zeta0 >= params.delta {
        return Err(Error::InvalidParams(
            "initial integrator at threshold fires at t_start, outside the window".into(),
        ));
    }
    let TemParams { kappa, delta, bias, zeta0, t_start, t_end } = *params;
    let cumulative = |t: f64| kappa * zeta0 + signal.integral(t_start, t) + bias * (t - t_start);
    let slope = |t: f64| signal.value(t) + bias;
    let min_slope = bias - bound;
    let g_end = cumulative(t_end);

    let mut times = Vec::new();
    let mut lo = t_start;
    let mut g_lo = kappa * zeta0;
    let mut level = kappa * delta;
    while g_end >= level {
        let t = locate_crossing(&cumulative, &slope, level, lo, g_lo, t_end, min_slope);
        times.push(t);
        lo = t;
        g_lo = cumulative(t);
        level += 2.0 * kappa * delta;
        if g_lo >= level {
            // only reachable if rounding put the root past the next level
            break;
        }
    }
    let n = times.len() as f64;
    let final_integrator = (g_end - 2.0 * n * kappa * delta) / kappa;
    Ok(Encoding { train: SpikeTrain { tem_id, times }, final_integrator })
}

/// Root of `G(t) = level` in `(lo, t_end]`, given `G(lo) < level ≤ G(t_end)`.
fn locate_crossing<G, D>(g: &G, dg: &D, level: f64, lo: f64, g_lo: f64, t_end: f64, min_slope: f64) -> f64
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut lo = lo;
    // Bracket from the gap bound: G grows at least at rate β − c.
    let mut hi = (lo + (level - g_lo) / min_slope * (1.0 + 1e-9)).min(t_end);
    let mut g_hi = g(hi);
    while g_hi < level && hi < t_end {
        hi = (hi + (hi - lo)).min(t_end);
        g_hi = g(hi);
    }
    if g_hi == level {
        return hi;
    }
    let mut x = hi;
    for _ in 0..MAX_ROOT_ITERS {
        let fx = g(x) - level;
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let newton = x - fx / d;
        let next = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - x).abs();
        x = next;
        if step < 0.1 * SPIKE_TIME_TOLERANCE || hi - lo < SPIKE_TIME_TOLERANCE {
            break;
        }
    }
    x.min(t_end)
}

/// Encodes every channel of an ensemble with its own machine.
pub fn encode_ensemble(ensemble: &SignalEnsemble, params: &[TemParams], exec: Execution) -> Result<Vec<Encoding>> {
    if params.len() != ensemble.channel_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} TEM parameter sets for {} channels",
            params.len(),
            ensemble.channel_count()
        )));
    }
    exec.map_range(params.len(), |i| encode(i, &ensemble.channel(i), &params[i]))
        .into_iter()
        .collect()
}

/// Upper bound `2κδ/(β − c)` on the delay between consecutive spikes.
pub fn max_gap_bound(params: &TemParams, amplitude_bound: f64) -> Result<f64> {
    params.require_bias_above(amplitude_bound)?;
    Ok(2.0 * params.kappa * params.delta / (params.bias - amplitude_bound))
}

/// Largest bandwidth `π(β − c)/(2κδ)` a single machine can encode.
pub fn single_channel_bandwidth_limit(params: &TemParams, amplitude_bound: f64) -> Result<f64> {
    params.require_bias_above(amplitude_bound)?;
    Ok(PI * (params.bias - amplitude_bound) / (2.0 * params.kappa * params.delta))
}

/// Bandwidth limit of `machines` identical machines encoding one signal.
pub fn multi_channel_bandwidth_limit(params: &TemParams, amplitude_bound: f64, machines: usize) -> Result<f64> {
    Ok(machines as f64 * single_channel_bandwidth_limit(params, amplitude_bound)?)
}

/// `∫_{t_a}^{t_b} y = 2κδ − β(t_b − t_a)` for consecutive spikes.
pub fn inter_spike_integral(params: &TemParams, t_a: f64, t_b: f64) -> Result<f64> {
    if !(t_b > t_a) {
        return Err(Error::InvalidInterval { t0: t_a, t: t_b });
    }
    Ok(2.0 * params.kappa * params.delta - params.bias * (t_b - t_a))
}

/// CSV with header `tem_id,spike_index,time`; spike indices start at 1.
pub fn write_spike_csv<W: Write>(trains: &[SpikeTrain], mut out: W) -> Result<()> {
    writeln!(out, "tem_id,spike_index,time")?;
    for train in trains {
        for (l, t) in train.times.iter().enumerate() {
            writeln!(out, "{},{},{:.16e}", train.tem_id, l + 1, t)?;
        }
    }
    Ok(())
}

/// Reads spike CSV rows back into trains, one per TEM id in `0..tem_count`.
pub fn read_spike_csv<R: Read>(input: R, tem_count: usize) -> Result<Vec<SpikeTrain>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["tem_id", "spike_index", "time"] {
        return Err(Error::Parse(format!("unexpected spike CSV header {headers:?}")));
    }
    let mut trains: Vec<SpikeTrain> = (0..tem_count).map(|i| SpikeTrain { tem_id: i, times: vec![] }).collect();
    for (line, record) in reader.deserialize::<(usize, usize, f64)>().enumerate() {
        let (id, index, t) = record.map_err(|e| Error::Parse(format!("line {}: {e}", line + 2)))?;
        let train = trains
            .get_mut(id)
            .ok_or_else(|| Error::Parse(format!("line {}: tem_id {id} out of range", line + 2)))?;
        if index != train.times.len() + 1 {
            return Err(Error::Parse(format!("line {}: spike_index {index} out of sequence", line + 2)));
        }
        if train.times.last().is_some_and(|&prev| !(t > prev)) {
            return Err(Error::Parse(format!("line {}: spike times not increasing", line + 2)));
        }
        train.times.push(t);
    }
    Ok(trains)
}
