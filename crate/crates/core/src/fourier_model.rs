//! Parametric signal model: sinc and periodic-exponential bases, coefficient
//! matrices, mixing matrices and low-rank signal ensembles.
//!
//! Basis indices are zero-based. For a periodic basis with half-bandwidth
//! `K₀` the index `k ∈ 0..2K₀+1` carries frequency order `k − K₀`.

use crate::error::{Error, Result};
use crate::special::si;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

/// Tolerance below which the imaginary part of a model evaluation is
/// treated as rounding residue.
pub const REAL_TOLERANCE: f64 = 1e-10;

/// Amplitude grids use this many points per basis function.
pub const GRID_POINTS_PER_BASIS: usize = 64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", try_from = "BasisSpec")]
pub enum BasisSet {
    /// `f_k(t) = sin(Ω(t − τ_k)) / (π(t − τ_k))`
    Sinc { omega: f64, centers: Vec<f64> },
    /// `f_k(t) = exp(j2π·order·t/T)`, orders `−K₀..=K₀`
    PeriodicExp { period: f64, max_order: usize },
}

/// Unvalidated wire form of [`BasisSet`].
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum BasisSpec {
    Sinc { omega: f64, centers: Vec<f64> },
    PeriodicExp { period: f64, max_order: usize },
}

impl TryFrom<BasisSpec> for BasisSet {
    type Error = Error;

    fn try_from(spec: BasisSpec) -> Result<Self> {
        match spec {
            BasisSpec::Sinc { omega, centers } => Self::sinc(omega, centers),
            BasisSpec::PeriodicExp { period, max_order } => Self::periodic(period, max_order),
        }
    }
}

impl BasisSet {
    pub fn sinc(omega: f64, centers: Vec<f64>) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParams(format!("sinc bandwidth must be positive, got {omega}")));
        }
        if centers.is_empty() {
            return Err(Error::InvalidParams("sinc basis needs at least one center".into()));
        }
        if centers.windows(2).any(|w| !(w[1] > w[0])) || centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("sinc centers must be finite and strictly increasing".into()));
        }
        Ok(BasisSet::Sinc { omega, centers })
    }

    /// Sinc basis with `count` centers spaced at the Nyquist interval `π/Ω` starting at 0.
    pub fn sinc_nyquist(omega: f64, count: usize) -> Result<Self> {
        let step = PI / omega;
        Self::sinc(omega, (0..count).map(|k| k as f64 * step).collect())
    }

    pub fn periodic(period: f64, max_order: usize) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParams(format!("period must be positive, got {period}")));
        }
        Ok(BasisSet::PeriodicExp { period, max_order })
    }

    /// Number of basis functions `K`.
    pub fn len(&self) -> usize {
        match self {
            BasisSet::Sinc { centers, .. } => centers.len(),
            BasisSet::PeriodicExp { max_order, .. } => 2 * max_order + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, BasisSet::PeriodicExp { .. })
    }

    /// Frequency order of index `k` for periodic bases.
    pub fn order(&self, k: usize) -> Option<i64> {
        match self {
            BasisSet::PeriodicExp { max_order, .. } if k < self.len() => Some(k as i64 - *max_order as i64),
            _ => None,
        }
    }

    pub fn index_of_order(&self, order: i64) -> Option<usize> {
        match self {
            BasisSet::PeriodicExp { max_order, .. } => {
                let k = order + *max_order as i64;
                (k >= 0 && (k as usize) < self.len()).then_some(k as usize)
            }
            BasisSet::Sinc { .. } => None,
        }
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::IndexOutOfRange { index: k, size: self.len() });
        }
        Ok(())
    }

    /// `f_k(t)`.
    pub fn eval_basis(&self, k: usize, t: f64) -> Result<Complex64> {
        self.check_index(k)?;
        Ok(self.eval_unchecked(k, t))
    }

    fn eval_unchecked(&self, k: usize, t: f64) -> Complex64 {
        match self {
            BasisSet::Sinc { omega, centers } => Complex64::new(sinc_omega(*omega, t - centers[k]), 0.0),
            BasisSet::PeriodicExp { period, max_order } => {
                let order = k as f64 - *max_order as f64;
                Complex64::from_polar(1.0, TAU * order * t / period)
            }
        }
    }

    /// All `f_k(t)` at once.
    pub fn eval_all(&self, t: f64) -> Vec<Complex64> {
        (0..self.len()).map(|k| self.eval_unchecked(k, t)).collect()
    }

    /// `F_k(t) = ∫_{t0}^{t} f_k(u) du`.
    pub fn antiderivative(&self, k: usize, t0: f64, t: f64) -> Result<Complex64> {
        self.check_index(k)?;
        if t < t0 {
            return Err(Error::InvalidInterval { t0, t });
        }
        Ok(self.antiderivative_unchecked(k, t0, t))
    }

    fn antiderivative_unchecked(&self, k: usize, t0: f64, t: f64) -> Complex64 {
        match self {
            BasisSet::Sinc { omega, centers } => {
                let tau = centers[k];
                Complex64::new((si(omega * (t - tau)) - si(omega * (t0 - tau))) / PI, 0.0)
            }
            BasisSet::PeriodicExp { period, max_order } => {
                let order = k as f64 - *max_order as f64;
                if order == 0.0 {
                    return Complex64::new(t - t0, 0.0);
                }
                let w = TAU * order / period;
                let diff = Complex64::from_polar(1.0, w * t) - Complex64::from_polar(1.0, w * t0);
                // diff / (j w)
                Complex64::new(diff.im / w, -diff.re / w)
            }
        }
    }

    /// Vector `F(t)` of all antiderivatives from `t0`.
    pub fn antiderivatives(&self, t0: f64, t: f64) -> Vec<Complex64> {
        (0..self.len()).map(|k| self.antiderivative_unchecked(k, t0, t)).collect()
    }

    /// Interval on which amplitude grids are evaluated: one period, or the
    /// span of the sinc centers padded by two main-lobe widths.
    pub fn amplitude_support(&self) -> (f64, f64) {
        match self {
            BasisSet::Sinc { omega, centers } => {
                let pad = 2.0 * TAU / omega;
                (centers[0] - pad, centers[centers.len() - 1] + pad)
            }
            BasisSet::PeriodicExp { period, .. } => (0.0, *period),
        }
    }

    /// Dense evaluation grid with `points_per_basis · K` points over [`Self::amplitude_support`].
    pub fn amplitude_grid(&self, points_per_basis: usize) -> Vec<f64> {
        let (a, b) = self.amplitude_support();
        let n = (points_per_basis * self.len()).max(2);
        match self {
            BasisSet::PeriodicExp { .. } => (0..n).map(|i| a + (b - a) * i as f64 / n as f64).collect(),
            BasisSet::Sinc { .. } => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// `sin(Ωx)/(πx)` with the removable singularity at 0.
fn sinc_omega(omega: f64, x: f64) -> f64 {
    let y = omega * x;
    if y.abs() < 1e-5 {
        let y2 = y * y;
        omega / PI * (1.0 - y2 / 6.0 + y2 * y2 / 120.0)
    } else {
        y.sin() / (PI * x)
    }
}

/// Complex matrix of parametric coefficients: one row per signal, one
/// column per basis function.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(DMatrix<Complex64>);

impl CoefficientMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParams("coefficient matrix has non-finite entries".into()));
        }
        Ok(Self(entries))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::from_element(rows, cols, ZERO))
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[Complex64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn row(&self, row: usize) -> Vec<Complex64> {
        self.0.row(row).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖self − truth‖_F / ‖truth‖_F`, or the absolute norm when `truth` is zero.
    pub fn relative_error(&self, truth: &CoefficientMatrix) -> f64 {
        let diff: f64 = self.0.iter().zip(truth.0.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        let base = truth.frobenius_norm();
        if base == 0.0 {
            diff.sqrt()
        } else {
            diff.sqrt() / base
        }
    }

    /// Largest `|c_{i,−k} − conj(c_{i,k})|` over all rows, for periodic bases.
    pub fn hermitian_defect(&self, basis: &BasisSet) -> Option<f64> {
        let BasisSet::PeriodicExp { max_order, .. } = basis else {
            return None;
        };
        if self.cols() != basis.len() {
            return None;
        }
        let k0 = *max_order;
        let mut worst = 0.0f64;
        for i in 0..self.rows() {
            for o in 0..=k0 {
                let pos = self.0[(i, k0 + o)];
                let neg = self.0[(i, k0 - o)];
                worst = worst.max((neg - pos.conj()).norm());
            }
        }
        Some(worst)
    }

    /// CSV with header `row,col,re,im`, row-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row,col,re,im")?;
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                let z = self.0[(i, j)];
                writeln!(out, "{i},{j},{:.16e},{:.16e}", z.re, z.im)?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["row", "col", "re", "im"] {
            return Err(Error::Parse(format!("unexpected coefficient CSV header {headers:?}")));
        }
        let mut entries = Vec::new();
        let (mut rows, mut cols) = (0usize, 0usize);
        for (line, record) in reader.deserialize::<(usize, usize, f64, f64)>().enumerate() {
            let (r, c, re, im) = record.map_err(|e| Error::Parse(format!("line {}: {e}", line + 2)))?;
            rows = rows.max(r + 1);
            cols = cols.max(c + 1);
            entries.push((r, c, Complex64::new(re, im)));
        }
        let mut m = DMatrix::from_element(rows, cols, ZERO);
        let mut seen = vec![false; rows * cols];
        for (r, c, z) in entries {
            if std::mem::replace(&mut seen[r * cols + c], true) {
                return Err(Error::Parse(format!("duplicate entry ({r},{c})")));
            }
            m[(r, c)] = z;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parse("coefficient CSV is missing entries".into()));
        }
        Self::new(m)
    }
}

/// Complex `I × J` matrix mapping low-dimensional signals to observed channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix(DMatrix<Complex64>);

impl MixingMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParams("mixing matrix has non-finite entries".into()));
        }
        Ok(Self(entries))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_real(rows: usize, cols: usize, data_row_major: &[f64]) -> Result<Self> {
        if data_row_major.len() != rows * cols {
            return Err(Error::DimensionMismatch("mixing data length".into()));
        }
        Self::new(DMatrix::from_row_iterator(
            rows,
            cols,
            data_row_major.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<Complex64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    /// Keep only the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self(self.0.select_rows(rows.iter()))
    }

    /// `A · C`.
    pub fn apply(&self, coeffs: &CoefficientMatrix) -> Result<CoefficientMatrix> {
        if self.cols() != coeffs.rows() {
            return Err(Error::DimensionMismatch(format!(
                "mixing is {}x{}, coefficients are {}x{}",
                self.rows(),
                self.cols(),
                coeffs.rows(),
                coeffs.cols()
            )));
        }
        CoefficientMatrix::new(&self.0 * coeffs.as_matrix())
    }

    pub fn to_coefficient_matrix(&self) -> CoefficientMatrix {
        CoefficientMatrix(self.0.clone())
    }

    pub fn from_coefficient_matrix(m: CoefficientMatrix) -> Self {
        Self(m.0)
    }
}

/// A continuous-time input that a time encoder can integrate.
pub trait Channel {
    fn value(&self, t: f64) -> f64;
    /// `∫_{t0}^{t} y(u) du`
    fn integral(&self, t0: f64, t: f64) -> f64;
    /// Known bound `c` with `|y(t)| ≤ c`.
    fn amplitude_bound(&self) -> f64;
}

/// One observed signal `Σ_k c_k f_k(t)` of an ensemble.
#[derive(Debug, Clone)]
pub struct ChannelSignal<'a> {
    pub basis: &'a BasisSet,
    pub coeffs: Vec<Complex64>,
    pub bound: f64,
}

impl Channel for ChannelSignal<'_> {
    fn value(&self, t: f64) -> f64 {
        combine(&self.coeffs, &self.basis.eval_all(t)).re
    }

    fn integral(&self, t0: f64, t: f64) -> f64 {
        combine(&self.coeffs, &self.basis.antiderivatives(t0, t)).re
    }

    fn amplitude_bound(&self) -> f64 {
        self.bound
    }
}

fn combine(coeffs: &[Complex64], values: &[Complex64]) -> Complex64 {
    coeffs.iter().zip(values).map(|(c, f)| c * f).sum()
}

/// Signals `y(t) = A·x(t)` with `x` parametrized by `low_coeffs` over `basis`.
#[derive(Debug, Clone)]
pub struct SignalEnsemble {
    basis: BasisSet,
    mixing: MixingMatrix,
    low_coeffs: CoefficientMatrix,
    observed: CoefficientMatrix,
    amplitude_bound: f64,
}

impl SignalEnsemble {
    /// Builds the ensemble and estimates the amplitude bound on the dense grid.
    ///
    /// `I < J` is allowed: under-instrumented scenes are valid inputs whose
    /// coefficients simply cannot be identified.
    pub fn new(basis: BasisSet, mixing: MixingMatrix, low_coeffs: CoefficientMatrix) -> Result<Self> {
        if low_coeffs.cols() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "coefficients have {} columns, basis has {} functions",
                low_coeffs.cols(),
                basis.len()
            )));
        }
        if mixing.rows() == 0 || mixing.cols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "mixing must be non-empty, got {}x{}",
                mixing.rows(),
                mixing.cols()
            )));
        }
        let observed = mixing.apply(&low_coeffs)?;
        let grid = basis.amplitude_grid(GRID_POINTS_PER_BASIS);
        let amplitude_bound = (0..observed.rows())
            .map(|i| grid_sup(&basis, &observed.row(i), &grid))
            .fold(0.0, f64::max);
        Ok(Self { basis, mixing, low_coeffs, observed, amplitude_bound })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn mixing(&self) -> &MixingMatrix {
        &self.mixing
    }

    pub fn low_coeffs(&self) -> &CoefficientMatrix {
        &self.low_coeffs
    }

    /// `C(y) = A·C(x)`.
    pub fn observed_coeffs(&self) -> &CoefficientMatrix {
        &self.observed
    }

    pub fn amplitude_bound(&self) -> f64 {
        self.amplitude_bound
    }

    pub fn channel_count(&self) -> usize {
        self.mixing.rows()
    }

    pub fn rank(&self) -> usize {
        self.mixing.cols()
    }

    /// Real value of channel `i` at `t`; fails if the model evaluates to a
    /// complex number beyond [`REAL_TOLERANCE`].
    pub fn eval_signal(&self, i: usize, t: f64) -> Result<f64> {
        if i >= self.channel_count() {
            return Err(Error::IndexOutOfRange { index: i, size: self.channel_count() });
        }
        let z = combine(&self.observed.row(i), &self.basis.eval_all(t));
        if z.im.abs() >= REAL_TOLERANCE {
            return Err(Error::NotRealValued { residue: z.im.abs() });
        }
        Ok(z.re)
    }

    pub fn channel(&self, i: usize) -> ChannelSignal<'_> {
        ChannelSignal { basis: &self.basis, coeffs: self.observed.row(i), bound: self.amplitude_bound }
    }
}

/// Max of `|Σ c_k f_k(t)|` over the grid.
pub fn grid_sup(basis: &BasisSet, coeffs: &[Complex64], grid: &[f64]) -> f64 {
    grid.iter().map(|&t| combine(coeffs, &basis.eval_all(t)).norm()).fold(0.0, f64::max)
}

/// Random rank-`rank` ensemble of `channels` signals bounded by `amplitude_bound`.
///
/// Low coefficients are i.i.d. standard normal (Hermitian-symmetrized for
/// periodic bases, so every signal is real); the mixing is i.i.d. standard
/// normal, or the identity when `rank == channels`. Each observed signal is
/// then rescaled so its maximum on the dense amplitude grid equals the bound.
pub fn random_ensemble(
    channels: usize,
    rank: usize,
    basis: BasisSet,
    amplitude_bound: f64,
    seed: u64,
) -> Result<SignalEnsemble> {
    if rank == 0 || rank > channels {
        return Err(Error::InvalidParams(format!("need 1 <= J <= I, got J={rank}, I={channels}")));
    }
    if !(amplitude_bound > 0.0) {
        return Err(Error::InvalidParams("amplitude bound must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = basis.len();
    let mut low = DMatrix::from_element(rank, k, ZERO);
    for j in 0..rank {
        match &basis {
            BasisSet::Sinc { .. } => {
                for kk in 0..k {
                    low[(j, kk)] = Complex64::new(StandardNormal.sample(&mut rng), 0.0);
                }
            }
            BasisSet::PeriodicExp { max_order, .. } => {
                let k0 = *max_order;
                low[(j, k0)] = Complex64::new(StandardNormal.sample(&mut rng), 0.0);
                for o in 1..=k0 {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    let z = Complex64::new(re, im) / 2f64.sqrt();
                    low[(j, k0 + o)] = z;
                    low[(j, k0 - o)] = z.conj();
                }
            }
        }
    }
    let identity_mixing = rank == channels;
    let mut mixing = if identity_mixing {
        DMatrix::identity(channels, channels)
    } else {
        DMatrix::from_fn(channels, rank, |_, _| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
    };

    let grid = basis.amplitude_grid(GRID_POINTS_PER_BASIS);
    let observed = &mixing * &low;
    for i in 0..channels {
        let row: Vec<Complex64> = observed.row(i).iter().copied().collect();
        let sup = grid_sup(&basis, &row, &grid);
        if sup > 0.0 {
            let scale = amplitude_bound / sup;
            if identity_mixing {
                low.row_mut(i).iter_mut().for_each(|z| *z *= scale);
            } else {
                mixing.row_mut(i).iter_mut().for_each(|z| *z *= scale);
            }
        }
    }
    let observed = CoefficientMatrix::new(&mixing * &low)?;
    Ok(SignalEnsemble {
        basis,
        mixing: MixingMatrix::new(mixing)?,
        low_coeffs: CoefficientMatrix::new(low)?,
        observed,
        amplitude_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_point_values() {
        let p = BasisSet::periodic(1.0, 2).unwrap();
        assert_eq!(p.eval_basis(2, 0.37).unwrap(), Complex64::new(1.0, 0.0));
        let s = BasisSet::sinc(PI, vec![0.0]).unwrap();
        assert!((s.eval_basis(0, 0.0).unwrap().re - 1.0).abs() < 1e-15);
        assert!(s.eval_basis(0, 1.0).unwrap().re.abs() < 1e-15);
        let wide = BasisSet::sinc(2.5, vec![0.3]).unwrap();
        assert!((wide.eval_basis(0, 0.3).unwrap().re - 2.5 / PI).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_index() {
        let p = BasisSet::periodic(1.0, 1).unwrap();
        assert!(matches!(p.eval_basis(3, 0.0), Err(Error::IndexOutOfRange { index: 3, size: 3 })));
        assert!(p.antiderivative(5, 0.0, 1.0).is_err());
    }

    #[test]
    fn antiderivative_closed_forms() {
        let p = BasisSet::periodic(1.0, 1).unwrap();
        assert_eq!(p.antiderivative(1, 0.0, 2.0).unwrap(), Complex64::new(2.0, 0.0));
        assert!(p.antiderivative(2, 0.0, 1.0).unwrap().norm() < 1e-15);
        assert!(matches!(p.antiderivative(0, 1.0, 0.5), Err(Error::InvalidInterval { .. })));
    }

    #[test]
    fn invalid_bases_rejected() {
        assert!(BasisSet::sinc(0.0, vec![0.0]).is_err());
        assert!(BasisSet::sinc(1.0, vec![1.0, 1.0]).is_err());
        assert!(BasisSet::periodic(-1.0, 2).is_err());
    }

    #[test]
    fn order_mapping() {
        let p = BasisSet::periodic(2.0, 3).unwrap();
        assert_eq!(p.len(), 7);
        assert_eq!(p.order(0), Some(-3));
        assert_eq!(p.order(6), Some(3));
        assert_eq!(p.index_of_order(-3), Some(0));
        assert_eq!(p.index_of_order(4), None);
    }

    #[test]
    fn constant_and_zero_signals() {
        let basis = BasisSet::periodic(1.0, 2).unwrap();
        let zero = CoefficientMatrix::zeros(1, 5);
        let ens = SignalEnsemble::new(basis.clone(), MixingMatrix::identity(1), zero).unwrap();
        assert_eq!(ens.eval_signal(0, 0.3).unwrap(), 0.0);

        let mut c = CoefficientMatrix::zeros(1, 5).into_matrix();
        c[(0, 2)] = Complex64::new(2.5, 0.0);
        let ens = SignalEnsemble::new(basis, MixingMatrix::identity(1), CoefficientMatrix::new(c).unwrap()).unwrap();
        assert!((ens.eval_signal(0, 0.8).unwrap() - 2.5).abs() < 1e-15);
        assert!((ens.amplitude_bound() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_coefficients_rejected() {
        let basis = BasisSet::periodic(1.0, 1).unwrap();
        let mut c = CoefficientMatrix::zeros(1, 3).into_matrix();
        c[(0, 2)] = Complex64::new(1.0, 0.0);
        let ens = SignalEnsemble::new(basis, MixingMatrix::identity(1), CoefficientMatrix::new(c).unwrap()).unwrap();
        assert!(matches!(ens.eval_signal(0, 0.1), Err(Error::NotRealValued { .. })));
    }

    #[test]
    fn random_ensemble_is_deterministic_and_hermitian() {
        let basis = BasisSet::periodic(1.0, 4).unwrap();
        let a = random_ensemble(5, 2, basis.clone(), 0.5, 42).unwrap();
        let b = random_ensemble(5, 2, basis.clone(), 0.5, 42).unwrap();
        assert_eq!(a.observed_coeffs(), b.observed_coeffs());
        assert_eq!(a.mixing(), b.mixing());
        assert!(a.observed_coeffs().hermitian_defect(&basis).unwrap() < 1e-12);
        let c = random_ensemble(5, 2, basis, 0.5, 43).unwrap();
        assert_ne!(a.observed_coeffs(), c.observed_coeffs());
    }

    #[test]
    fn square_ensemble_uses_identity_mixing() {
        let basis = BasisSet::periodic(1.0, 2).unwrap();
        let e = random_ensemble(1, 1, basis, 0.7, 3).unwrap();
        assert_eq!(e.mixing(), &MixingMatrix::identity(1));
        let grid = e.basis().amplitude_grid(GRID_POINTS_PER_BASIS);
        let sup = grid_sup(e.basis(), &e.observed_coeffs().row(0), &grid);
        assert!((sup - 0.7).abs() < 1e-12);
    }

    #[test]
    fn random_ensemble_rejects_bad_rank() {
        let basis = BasisSet::periodic(1.0, 2).unwrap();
        assert!(random_ensemble(2, 3, basis.clone(), 1.0, 0).is_err());
        assert!(random_ensemble(2, 1, basis, 0.0, 0).is_err());
    }

    #[test]
    fn coefficient_csv_round_trip() {
        let basis = BasisSet::periodic(1.0, 2).unwrap();
        let e = random_ensemble(3, 2, basis, 1.0, 9).unwrap();
        let text = e.observed_coeffs().to_csv_string();
        assert!(text.starts_with("row,col,re,im\n0,0,"));
        let back = CoefficientMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(&back, e.observed_coeffs());
    }

    #[test]
    fn coefficient_csv_rejects_bad_header() {
        assert!(CoefficientMatrix::read_csv("a,b,c,d\n".as_bytes()).is_err());
        assert!(CoefficientMatrix::read_csv("row,col,re,im\n0,0,1.0,0.0\n1,1,1,0\n".as_bytes()).is_err());
    }
}
