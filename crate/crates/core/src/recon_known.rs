//! Recovery of the low-dimensional coefficients `C(x)` when the mixing `A`
//! is known.
//!
//! Spike `ℓ` of machine `i` fixes the integral of `y⁽ⁱ⁾` from `t₀` to
//! `t_ℓ`, and since `y⁽ⁱ⁾ = [A]_i C(x) f(t)` that integral is the rank-one
//! measurement `[A]_i C(x) F(t_ℓ)ᵀ`. Stacking one such row per spike gives
//! a complex linear system in `vec(C(x))` (row-major, index `j·K + k`).

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fourier_model::{BasisSet, CoefficientMatrix, MixingMatrix};
use crate::tem::{SpikeTrain, TemParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Initial integrator values are known exactly.
    #[default]
    KnownInit,
    /// Each machine carries an unknown constant offset, solved jointly.
    UnknownInit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneMeasurement {
    pub tem_id: usize,
    /// One-based spike index within its train.
    pub spike_index: usize,
    pub value: f64,
    /// Row `[A]_i` of the mixing.
    pub row_weights: Vec<Complex64>,
    /// `F(t_ℓ)`, the basis antiderivatives from `t₀`.
    pub basis_integrals: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct MeasurementSystem {
    pub measurements: Vec<RankOneMeasurement>,
    pub rank: usize,
    pub basis_len: usize,
    pub mode: InitMode,
    /// Machines with an offset unknown (UnknownInit only), with their `κ`.
    pub offset_tems: Vec<(usize, f64)>,
}

impl MeasurementSystem {
    pub fn unknown_count(&self) -> usize {
        self.rank * self.basis_len + self.offset_tems.len()
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Dense row `vec(g hᵀ)`, followed by the offset indicator columns.
    pub fn dense_row(&self, n: usize) -> Vec<Complex64> {
        let m = &self.measurements[n];
        let mut row = Vec::with_capacity(self.unknown_count());
        for g in &m.row_weights {
            row.extend(m.basis_integrals.iter().map(|h| g * h));
        }
        for &(tem, kappa) in &self.offset_tems {
            row.push(if tem == m.tem_id { Complex64::new(kappa, 0.0) } else { ZERO });
        }
        row
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let cols = self.unknown_count();
        let mut out = DMatrix::from_element(self.len(), cols, ZERO);
        for n in 0..self.len() {
            for (c, v) in self.dense_row(n).into_iter().enumerate() {
                out[(n, c)] = v;
            }
        }
        out
    }

    pub fn rhs(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.len(), self.measurements.iter().map(|m| Complex64::new(m.value, 0.0)))
    }

    /// Debug dump: `tem_id,spike_index,b,r0_re,r0_im,…`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "tem_id,spike_index,b")?;
        for c in 0..self.unknown_count() {
            write!(out, ",r{c}_re,r{c}_im")?;
        }
        writeln!(out)?;
        for (n, m) in self.measurements.iter().enumerate() {
            write!(out, "{},{},{:.16e}", m.tem_id, m.spike_index, m.value)?;
            for z in self.dense_row(n) {
                write!(out, ",{:.16e},{:.16e}", z.re, z.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `b_ℓ = κ(δ − ζ₀) + 2(ℓ − 1)κδ − β(t_ℓ − t₀)`, the signal integral from
/// `t₀` up to each spike.
pub fn cumulative_measurements(train: &SpikeTrain, params: &TemParams) -> Vec<(usize, f64)> {
    let TemParams { kappa, delta, bias, zeta0, t_start, .. } = *params;
    train
        .times
        .iter()
        .enumerate()
        .map(|(l, &t)| {
            let value = kappa * (delta - zeta0) + 2.0 * l as f64 * kappa * delta - bias * (t - t_start);
            (l + 1, value)
        })
        .collect()
}

/// Stacks one rank-one row per spike of every train.
pub fn assemble_system(
    mixing: &MixingMatrix,
    basis: &BasisSet,
    trains: &[SpikeTrain],
    params: &[TemParams],
    mode: InitMode,
    exec: Execution,
) -> Result<MeasurementSystem> {
    if mixing.rows() != trains.len() || params.len() != trains.len() {
        return Err(Error::DimensionMismatch(format!(
            "mixing has {} rows, got {} trains and {} parameter sets",
            mixing.rows(),
            trains.len(),
            params.len()
        )));
    }
    let per_train = exec.map_range(trains.len(), |i| {
        let train = &trains[i];
        let p = &params[i];
        let weights = mixing.row(i);
        cumulative_measurements(train, p)
            .into_iter()
            .zip(&train.times)
            .map(|((spike_index, value), &t)| RankOneMeasurement {
                tem_id: i,
                spike_index,
                value,
                row_weights: weights.clone(),
                basis_integrals: basis.antiderivatives(p.t_start, t),
            })
            .collect::<Vec<_>>()
    });
    let offset_tems = match mode {
        InitMode::KnownInit => Vec::new(),
        InitMode::UnknownInit => (0..trains.len())
            .filter(|&i| !trains[i].is_empty())
            .map(|i| (i, params[i].kappa))
            .collect(),
    };
    Ok(MeasurementSystem {
        measurements: per_train.into_iter().flatten().collect(),
        rank: mixing.cols(),
        basis_len: basis.len(),
        mode,
        offset_tems,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub capped_sum: usize,
    pub required: usize,
    pub feasible: bool,
}

/// Counts the linearly independent constraints the spikes can supply.
///
/// Each machine contributes at most `K` (known start) or `K` beyond its
/// first spike (unknown start); recovery of the `J·K` unknowns needs the
/// capped total to reach `J·K`.
pub fn feasibility(spike_counts: &[usize], basis_len: usize, rank: usize, mode: InitMode) -> FeasibilityReport {
    let capped_sum = spike_counts
        .iter()
        .map(|&n| match mode {
            InitMode::KnownInit => n.min(basis_len),
            InitMode::UnknownInit => n.saturating_sub(1).min(basis_len),
        })
        .sum();
    let required = rank * basis_len;
    FeasibilityReport { capped_sum, required, feasible: capped_sum >= required }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub rank: usize,
    pub unknowns: usize,
    pub residual: f64,
    pub underdetermined: bool,
    pub sigma_max: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// `C(x)`, `J × K`.
    pub coeffs: CoefficientMatrix,
    /// `(tem_id, ζ₀ − ζ̂₀)` for UnknownInit systems.
    pub offsets: Vec<(usize, f64)>,
    pub diagnostics: SolveDiagnostics,
}

/// Minimum-norm least-squares solution through the SVD; returns the
/// solution, the numerical rank and the largest singular value.
pub fn min_norm_least_squares(
    matrix: &DMatrix<Complex64>,
    rhs: &DVector<Complex64>,
    rel_tol: f64,
) -> (DVector<Complex64>, usize, f64) {
    let cols = matrix.ncols();
    if matrix.nrows() == 0 || cols == 0 {
        return (DVector::from_element(cols, ZERO), 0, 0.0);
    }
    let svd = crate::linalg::thin_svd(matrix);
    let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * sigma_max;
    let mut x = DVector::from_element(cols, ZERO);
    let mut rank = 0;
    for (i, &s) in svd.sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let coef = svd.u.column(i).dotc(rhs) / s;
            x += svd.v.column(i) * coef;
        }
    }
    (x, rank, sigma_max)
}

/// Least-squares recovery of `C(x)` (and offsets in UnknownInit mode).
pub fn solve(system: &MeasurementSystem) -> Solution {
    let (j, k) = (system.rank, system.basis_len);
    let unknowns = system.unknown_count();
    let matrix = system.matrix();
    let rhs = system.rhs();
    let (x, rank, sigma_max) = min_norm_least_squares(&matrix, &rhs, RANK_TOLERANCE);
    let residual = if system.is_empty() { 0.0 } else { (&matrix * &x - &rhs).norm() };
    let coeffs = CoefficientMatrix::from_row_major(j, k, &x.as_slice()[..j * k])
        .expect("solution has J*K finite entries");
    let offsets =
        system.offset_tems.iter().enumerate().map(|(n, &(tem, _))| (tem, x[j * k + n].re)).collect();
    Solution {
        coeffs,
        offsets,
        diagnostics: SolveDiagnostics { rank, unknowns, residual, underdetermined: rank < unknowns, sigma_max },
    }
}

/// `C(y) = A·C(x)`.
pub fn recover_cy(mixing: &MixingMatrix, cx: &CoefficientMatrix) -> Result<CoefficientMatrix> {
    mixing.apply(cx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_measurement_direct_formula() {
        let p = TemParams::new(1.0, 0.5, 1.0, -0.5, 0.0, 1.0).unwrap();
        let train = SpikeTrain::new(0, vec![0.2]).unwrap();
        let b = cumulative_measurements(&train, &p);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].0, 1);
        assert!((b[0].1 - 0.8).abs() < 1e-15);
        assert!(cumulative_measurements(&SpikeTrain::default(), &p).is_empty());
    }

    #[test]
    fn zero_signal_measurements_vanish() {
        // spikes of the zero signal at multiples of 2κδ/β = 1
        let p = TemParams::new(1.0, 1.0, 2.0, -1.0, 0.0, 5.0).unwrap();
        let train = SpikeTrain::new(0, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        for (_, b) in cumulative_measurements(&train, &p) {
            assert!(b.abs() < 1e-15);
        }
    }

    #[test]
    fn single_spike_system() {
        // K = 1 periodic basis: F(t) = t - t0 = 2
        let basis = BasisSet::periodic(10.0, 0).unwrap();
        let p = TemParams::new(1.0, 1.0, 1.0, -1.0, 0.0, 5.0).unwrap();
        let train = SpikeTrain::new(0, vec![2.0]).unwrap();
        let sys = assemble_system(
            &MixingMatrix::identity(1),
            &basis,
            &[train],
            &[p],
            InitMode::KnownInit,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(sys.matrix(), DMatrix::from_element(1, 1, Complex64::new(2.0, 0.0)));
        assert_eq!(sys.unknown_count(), 1);
    }

    #[test]
    fn unknown_init_indicator_columns() {
        let basis = BasisSet::periodic(1.0, 1).unwrap();
        let mixing = MixingMatrix::from_real(2, 2, &[1.0, 0.5, -0.3, 2.0]).unwrap();
        let p = TemParams::new(0.7, 1.0, 3.0, 0.0, 0.0, 1.0).unwrap();
        let trains = vec![
            SpikeTrain::new(0, vec![0.1, 0.4, 0.9]).unwrap(),
            SpikeTrain::new(1, vec![0.3, 0.6]).unwrap(),
        ];
        let sys =
            assemble_system(&mixing, &basis, &trains, &[p, p], InitMode::UnknownInit, Execution::Parallel).unwrap();
        assert_eq!(sys.unknown_count(), 2 * 3 + 2);
        let m = sys.matrix();
        for n in 0..sys.len() {
            let tail: Vec<_> = (6..8).filter(|&c| m[(n, c)].norm() > 0.0).collect();
            assert_eq!(tail.len(), 1);
            assert_eq!(tail[0] - 6, sys.measurements[n].tem_id);
            assert_eq!(m[(n, tail[0])], Complex64::new(0.7, 0.0));
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let basis = BasisSet::periodic(1.0, 1).unwrap();
        let p = TemParams::new(1.0, 1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let r = assemble_system(
            &MixingMatrix::identity(2),
            &basis,
            &[SpikeTrain::default()],
            &[p],
            InitMode::KnownInit,
            Execution::Sequential,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn feasibility_examples() {
        let r = feasibility(&[3; 20], 25, 2, InitMode::KnownInit);
        assert_eq!(r, FeasibilityReport { capped_sum: 60, required: 50, feasible: true });
        assert!(!feasibility(&[0; 5], 9, 2, InitMode::KnownInit).feasible);
        let r = feasibility(&[1000, 0, 0, 0, 0], 9, 2, InitMode::KnownInit);
        assert_eq!(r.capped_sum, 9);
        assert!(!r.feasible);
        let r = feasibility(&[4, 4, 4, 3, 3], 9, 2, InitMode::UnknownInit);
        assert_eq!(r.capped_sum, 13);
        assert!(feasibility(&[4, 4, 4, 3, 3], 9, 2, InitMode::KnownInit).feasible);
        assert_eq!(feasibility(&[0, 1], 3, 1, InitMode::UnknownInit).capped_sum, 0);
    }

    #[test]
    fn identity_system_solution() {
        let sys = MeasurementSystem {
            measurements: (0..3)
                .map(|n| RankOneMeasurement {
                    tem_id: 0,
                    spike_index: n + 1,
                    value: if n == 0 { 1.0 } else { 0.0 },
                    row_weights: vec![Complex64::new(1.0, 0.0)],
                    basis_integrals: (0..3)
                        .map(|k| Complex64::new(if k == n { 1.0 } else { 0.0 }, 0.0))
                        .collect(),
                })
                .collect(),
            rank: 1,
            basis_len: 3,
            mode: InitMode::KnownInit,
            offset_tems: vec![],
        };
        let sol = solve(&sys);
        assert_eq!(sol.diagnostics.rank, 3);
        assert!(!sol.diagnostics.underdetermined);
        assert!((sol.coeffs.get(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(sol.coeffs.get(0, 1).norm() < 1e-15);
        assert!(sol.diagnostics.residual < 1e-14);
    }

    #[test]
    fn empty_system_is_underdetermined() {
        let sys = MeasurementSystem {
            measurements: vec![],
            rank: 2,
            basis_len: 3,
            mode: InitMode::KnownInit,
            offset_tems: vec![],
        };
        let sol = solve(&sys);
        assert_eq!(sol.diagnostics.rank, 0);
        assert!(sol.diagnostics.underdetermined);
        assert_eq!(sol.coeffs, CoefficientMatrix::zeros(2, 3));
    }

    #[test]
    fn recover_cy_identity_and_zero() {
        let cx = CoefficientMatrix::from_row_major(2, 2, &[Complex64::new(1.0, 2.0); 4]).unwrap();
        assert_eq!(recover_cy(&MixingMatrix::identity(2), &cx).unwrap(), cx);
        let a = MixingMatrix::from_real(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(recover_cy(&a, &CoefficientMatrix::zeros(2, 4)).unwrap(), CoefficientMatrix::zeros(3, 4));
        assert!(recover_cy(&a, &CoefficientMatrix::zeros(3, 4)).is_err());
    }
}
