//! Singular Value Projection for recovering `C(y)` when the mixing is
//! unknown but its rank is known.
//!
//! Each spike of machine `i` measures `Re(e_iᵀ M h)` of the unknown
//! `I × K` coefficient matrix `M`, with `h` the basis antiderivatives at
//! the spike. SVP alternates a gradient step on the measurement misfit with
//! truncation to the best rank-`J` approximation.

use crate::error::{Error, Result};
use crate::fourier_model::BasisSet;
use crate::recon_known::cumulative_measurements;
use crate::tem::{SpikeTrain, TemParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const POWER_ITERATIONS: usize = 50;
pub const DEFAULT_MAX_ITERS: usize = 5000;
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SensingOperator {
    rows: Vec<(usize, Vec<Complex64>)>,
    channels: usize,
    basis_len: usize,
}

impl SensingOperator {
    pub fn new(rows: Vec<(usize, Vec<Complex64>)>, channels: usize, basis_len: usize) -> Result<Self> {
        for (i, h) in &rows {
            if *i >= channels {
                return Err(Error::DimensionMismatch(format!("channel {i} out of range for {channels} channels")));
            }
            if h.len() != basis_len {
                return Err(Error::DimensionMismatch(format!("row of length {} for K = {basis_len}", h.len())));
            }
        }
        Ok(Self { rows, channels, basis_len })
    }

    /// Operator and measurement vector for a set of encoded channels.
    pub fn from_trains(basis: &BasisSet, trains: &[SpikeTrain], params: &[TemParams]) -> Result<(Self, Vec<f64>)> {
        if trains.len() != params.len() {
            return Err(Error::DimensionMismatch(format!("{} trains, {} parameter sets", trains.len(), params.len())));
        }
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for (i, (train, p)) in trains.iter().zip(params).enumerate() {
            for ((_, value), &t) in cumulative_measurements(train, p).into_iter().zip(&train.times) {
                rows.push((i, basis.antiderivatives(p.t_start, t)));
                b.push(value);
            }
        }
        Ok((Self::new(rows, trains.len(), basis.len())?, b))
    }

    /// Same constraints as [`Self::from_trains`] in inter-spike form: row
    /// `ℓ ≥ 2` of each train integrates over `[t_{ℓ−1}, t_ℓ]` with value
    /// `2κδ − β(t_ℓ − t_{ℓ−1})`. The per-machine differencing is invertible,
    /// so the solution set is unchanged while the rows decorrelate.
    pub fn from_trains_interspike(
        basis: &BasisSet,
        trains: &[SpikeTrain],
        params: &[TemParams],
    ) -> Result<(Self, Vec<f64>)> {
        let (cumulative, b) = Self::from_trains(basis, trains, params)?;
        let mut rows = Vec::with_capacity(cumulative.rows.len());
        let mut values = Vec::with_capacity(b.len());
        for (n, (i, h)) in cumulative.rows.iter().enumerate() {
            if n > 0 && cumulative.rows[n - 1].0 == *i {
                let prev = &cumulative.rows[n - 1].1;
                rows.push((*i, h.iter().zip(prev).map(|(a, p)| a - p).collect()));
                values.push(b[n] - b[n - 1]);
            } else {
                rows.push((*i, h.clone()));
                values.push(b[n]);
            }
        }
        Ok((Self { rows, ..cumulative }, values))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.basis_len)
    }

    pub fn rows(&self) -> &[(usize, Vec<Complex64>)] {
        &self.rows
    }

    fn check_shape(&self, m: &DMatrix<Complex64>) -> Result<()> {
        if m.shape() != self.shape() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {:?}, operator expects {:?}",
                m.shape(),
                self.shape()
            )));
        }
        Ok(())
    }

    /// `𝒮(M)_n = Re(e_{i_n}ᵀ M h_n)`.
    pub fn apply(&self, m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
        self.check_shape(m)?;
        Ok(self.apply_unchecked(m))
    }

    fn apply_unchecked(&self, m: &DMatrix<Complex64>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(i, h)| h.iter().enumerate().map(|(k, hk)| m[(*i, k)] * hk).sum::<Complex64>().re)
            .collect()
    }

    /// `𝒮ᵀ(r) = Σ_n r_n e_{i_n} h_nᴴ`, the adjoint under `Re⟨·,·⟩`.
    pub fn adjoint(&self, r: &[f64]) -> Result<DMatrix<Complex64>> {
        if r.len() != self.len() {
            return Err(Error::DimensionMismatch(format!("{} residuals for {} rows", r.len(), self.len())));
        }
        Ok(self.adjoint_unchecked(r))
    }

    fn adjoint_unchecked(&self, r: &[f64]) -> DMatrix<Complex64> {
        let mut out = DMatrix::from_element(self.channels, self.basis_len, ZERO);
        for ((i, h), &rn) in self.rows.iter().zip(r) {
            for (k, hk) in h.iter().enumerate() {
                out[(*i, k)] += hk.conj() * rn;
            }
        }
        out
    }

    /// Largest eigenvalue of `𝒮ᵀ𝒮` by power iteration.
    pub fn lipschitz_estimate(&self, iterations: usize) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        // deterministic, generic start: mixes every entry with distinct phases
        let mut x = DMatrix::from_fn(self.channels, self.basis_len, |i, k| {
            let a = 1.0 + 0.37 * i as f64 + 0.11 * k as f64;
            Complex64::new(a.cos(), (1.3 * a).sin())
        });
        x /= Complex64::new(x.norm(), 0.0);
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let y = self.adjoint_unchecked(&self.apply_unchecked(&x));
            let norm = y.norm();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = norm;
            x = y / Complex64::new(norm, 0.0);
        }
        lambda
    }
}

/// Best rank-`rank` factors `(U_J, Σ_J, V_J)` with `M ≈ U_J Σ_J V_Jᴴ`,
/// singular values in non-increasing order.
pub fn top_j_svd(m: &DMatrix<Complex64>, rank: usize) -> Result<(DMatrix<Complex64>, Vec<f64>, DMatrix<Complex64>)> {
    let (rows, cols) = m.shape();
    if rank == 0 || rank > rows.min(cols) {
        return Err(Error::RankOutOfRange { rank, rows, cols });
    }
    let svd = crate::linalg::thin_svd(m);
    let sigma = svd.sigma[..rank].to_vec();
    let u_j = svd.u.columns(0, rank).into_owned();
    let v_j = svd.v.columns(0, rank).into_owned();
    Ok((u_j, sigma, v_j))
}

/// `U Σ Vᴴ` from [`top_j_svd`] factors.
pub fn compose(u: &DMatrix<Complex64>, sigma: &[f64], v: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let scaled = DMatrix::from_fn(u.nrows(), u.ncols(), |r, c| u[(r, c)] * sigma[c]);
    scaled * v.adjoint()
}

/// Growth factor per iteration of a backtracking step.
pub const STEP_GROWTH: f64 = 2.0;
/// Ceiling on a backtracking step, relative to the base step.
pub const MAX_STEP_RATIO: f64 = 1e4;

/// Schedule for the step `η_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// `η_t = η` for every iteration.
    #[default]
    Fixed,
    /// Each iteration first tries `STEP_GROWTH·η_{t−1}` and halves until the
    /// residual does not increase, never going below the base step.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvpConfig {
    pub rank: usize,
    /// Base gradient step; `None` uses `1/L` from power iteration.
    pub step_size: Option<f64>,
    pub step_rule: StepRule,
    /// Stop once the squared residual is at most this; `None` uses
    /// `1e-12·‖b‖²`.
    pub tolerance: Option<f64>,
    pub max_iters: usize,
    pub trace: bool,
}

impl SvpConfig {
    pub fn new(rank: usize) -> Self {
        Self { rank, step_size: None, step_rule: StepRule::Fixed, tolerance: None, max_iters: DEFAULT_MAX_ITERS, trace: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidParams("SVP rank must be at least 1".into()));
        }
        if self.step_size.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::InvalidParams("SVP step size must be positive".into()));
        }
        if self.tolerance.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidParams("SVP tolerance must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("SVP needs at least one iteration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SvpOutcome {
    pub estimate: DMatrix<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_sq: f64,
    pub step_size: f64,
    /// Squared residual after each iteration, when tracing.
    pub trace: Vec<f64>,
}

fn residual_sq(op: &SensingOperator, x: &DMatrix<Complex64>, b: &[f64]) -> (Vec<f64>, f64) {
    let r: Vec<f64> = op.apply_unchecked(x).iter().zip(b).map(|(s, bn)| s - bn).collect();
    let sq = r.iter().map(|v| v * v).sum();
    (r, sq)
}

/// Runs SVP from `X⁰ = 0`; every returned estimate has rank at most `J`.
pub fn svp_recover(op: &SensingOperator, b: &[f64], config: &SvpConfig) -> Result<SvpOutcome> {
    config.validate()?;
    if b.len() != op.len() {
        return Err(Error::DimensionMismatch(format!("{} measurements for {} rows", b.len(), op.len())));
    }
    let (rows, cols) = op.shape();
    if config.rank > rows.min(cols) {
        return Err(Error::RankOutOfRange { rank: config.rank, rows, cols });
    }
    let b_norm_sq: f64 = b.iter().map(|v| v * v).sum();
    let tolerance = config.tolerance.unwrap_or(DEFAULT_RELATIVE_TOLERANCE * b_norm_sq);
    let step = match config.step_size {
        Some(s) => s,
        None => {
            let l = op.lipschitz_estimate(POWER_ITERATIONS);
            if l > 0.0 {
                1.0 / l
            } else {
                1.0
            }
        }
    };

    let mut x = DMatrix::from_element(rows, cols, ZERO);
    let (mut r, mut current_sq) = residual_sq(op, &x, b);
    let mut trace = Vec::new();
    let mut eta = step;
    for iter in 1..=config.max_iters {
        let grad = op.adjoint_unchecked(&r);
        let mut trial = match config.step_rule {
            StepRule::Fixed => step,
            StepRule::Backtracking => (eta * STEP_GROWTH).min(step * MAX_STEP_RATIO),
        };
        let (next_x, next_r, sq) = loop {
            let y = &x - &grad * Complex64::new(trial, 0.0);
            let (u, sigma, v) = top_j_svd(&y, config.rank)?;
            let candidate = compose(&u, &sigma, &v);
            let (cr, csq) = residual_sq(op, &candidate, b);
            if csq <= current_sq || trial <= step {
                break (candidate, cr, csq);
            }
            trial = (0.5 * trial).max(step);
        };
        eta = trial;
        x = next_x;
        r = next_r;
        current_sq = sq;
        if config.trace {
            trace.push(sq);
        }
        if sq <= tolerance {
            return Ok(SvpOutcome { estimate: x, iterations: iter, converged: true, residual_sq: sq, step_size: step, trace });
        }
    }
    Ok(SvpOutcome {
        estimate: x,
        iterations: config.max_iters,
        converged: false,
        residual_sq: current_sq,
        step_size: step,
        trace,
    })
}

/// Convergence trace CSV `iter,residual_sq`.
pub fn write_trace_csv<W: Write>(trace: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "iter,residual_sq")?;
    for (i, v) in trace.iter().enumerate() {
        writeln!(out, "{},{:.16e}", i + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_matrix_senses_zero() {
        let op = SensingOperator::new(vec![(0, vec![c(1.0), c(2.0)]), (1, vec![c(0.5), c(-1.0)])], 2, 2).unwrap();
        let m = DMatrix::from_element(2, 2, ZERO);
        assert_eq!(op.apply(&m).unwrap(), vec![0.0, 0.0]);
        assert_eq!(op.adjoint(&[0.0, 0.0]).unwrap(), m);
    }

    #[test]
    fn self_inner_product() {
        let h = vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25), c(3.0)];
        let op = SensingOperator::new(vec![(0, h.clone())], 2, 3).unwrap();
        let mut m = DMatrix::from_element(2, 3, ZERO);
        for (k, hk) in h.iter().enumerate() {
            m[(0, k)] = hk.conj();
        }
        let norm_sq: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        assert!((op.apply(&m).unwrap()[0] - norm_sq).abs() < 1e-14);
        assert_eq!(op.adjoint(&[1.0]).unwrap(), m);
    }

    #[test]
    fn shape_errors() {
        assert!(SensingOperator::new(vec![(3, vec![c(1.0)])], 2, 1).is_err());
        let op = SensingOperator::new(vec![(0, vec![c(1.0)])], 2, 1).unwrap();
        assert!(op.apply(&DMatrix::from_element(3, 1, ZERO)).is_err());
        assert!(op.adjoint(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn top_j_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(3.0), c(2.0)]));
        let (u, s, v) = top_j_svd(&m, 2).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14);
        let err = (compose(&u, &s, &v) - &m).norm();
        assert!((err - 1.0).abs() < 1e-12);
        assert!(top_j_svd(&m, 4).is_err());
        assert!(top_j_svd(&m, 0).is_err());
    }

    #[test]
    fn zero_measurements_give_zero_in_one_iteration() {
        let op = SensingOperator::new(vec![(0, vec![c(1.0), c(2.0)]), (1, vec![c(0.5), c(-1.0)])], 2, 2).unwrap();
        let out = svp_recover(&op, &[0.0, 0.0], &SvpConfig::new(1)).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.estimate.norm(), 0.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SvpConfig::new(1);
        cfg.step_size = Some(-1.0);
        assert!(cfg.validate().is_err());
        let mut cfg = SvpConfig::new(0);
        assert!(cfg.validate().is_err());
        cfg.rank = 1;
        cfg.max_iters = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn trace_csv_format() {
        let mut buf = Vec::new();
        write_trace_csv(&[2.0, 0.5], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next(), Some("iter,residual_sq"));
        assert_eq!(s.lines().count(), 3);
    }
}
