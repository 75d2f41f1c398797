//! Periodic bandlimited scenes in one or two spatial dimensions plus time.
//!
//! A scene is the Fourier series
//!
//! ```text
//! y(d1, d2, t) = Σ c[k0,k1,k2] · exp(j2π(t·k0/T + d1·k1/D1 + d2·k2/D2))
//! ```
//!
//! Sampling it at sensor `d⁽ⁱ⁾` gives `y⁽ⁱ⁾(t) = Σ_{k1,k2} A[i,(k1,k2)] x⁽ᵏ¹ᵏ²⁾(t)`,
//! i.e. a low-rank ensemble whose mixing depends only on sensor positions.
//! Spatial orders are flattened k1-major: column `(k1 + K1)(2K2 + 1) + (k2 + K2)`.

use crate::error::{Error, Result};
use crate::fourier_model::{BasisSet, CoefficientMatrix, MixingMatrix, SignalEnsemble, REAL_TOLERANCE};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::{Read, Write};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const GRAM_TOLERANCE: f64 = 1e-10;
pub const PATCH_MAGIC: &[u8; 4] = b"VPF1";

/// Shape and periods of a scene; serialized as the JSON sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneDims {
    #[serde(rename = "K0")]
    pub k0: usize,
    #[serde(rename = "K1")]
    pub k1: usize,
    #[serde(rename = "K2")]
    pub k2: usize,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "D1")]
    pub d1_period: f64,
    #[serde(rename = "D2")]
    pub d2_period: f64,
}

impl SceneDims {
    pub fn n0(&self) -> usize {
        2 * self.k0 + 1
    }
    pub fn n1(&self) -> usize {
        2 * self.k1 + 1
    }
    pub fn n2(&self) -> usize {
        2 * self.k2 + 1
    }
    /// Number of spatial components `J = (2K1+1)(2K2+1)`.
    pub fn spatial_count(&self) -> usize {
        self.n1() * self.n2()
    }
    pub fn coefficient_count(&self) -> usize {
        self.n0() * self.spatial_count()
    }
    pub fn temporal_basis(&self) -> BasisSet {
        BasisSet::PeriodicExp { period: self.period, max_order: self.k0 }
    }
    /// Flattened spatial column of orders `(k1, k2)`.
    pub fn spatial_index(&self, k1: i64, k2: i64) -> usize {
        (k1 + self.k1 as i64) as usize * self.n2() + (k2 + self.k2 as i64) as usize
    }
    fn validate(&self) -> Result<()> {
        for p in [self.period, self.d1_period, self.d2_period] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParams(format!("scene periods must be positive, got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub dims: SceneDims,
    /// `c[k0,k1,k2]` at `((k0+K0)·n1 + (k1+K1))·n2 + (k2+K2)`.
    coeffs: Vec<Complex64>,
    pub real_valued: bool,
}

impl SceneSpec {
    pub fn new(dims: SceneDims, coeffs: Vec<Complex64>, real_valued: bool) -> Result<Self> {
        dims.validate()?;
        if coeffs.len() != dims.coefficient_count() {
            return Err(Error::DimensionMismatch(format!(
                "scene needs {} coefficients, got {}",
                dims.coefficient_count(),
                coeffs.len()
            )));
        }
        let scene = Self { dims, coeffs, real_valued };
        if real_valued {
            let defect = scene.hermitian_defect();
            if defect > HERMITIAN_TOLERANCE {
                return Err(Error::NotRealValued { residue: defect });
            }
        }
        Ok(scene)
    }

    pub fn zeros(dims: SceneDims) -> Self {
        Self { dims, coeffs: vec![ZERO; dims.coefficient_count()], real_valued: true }
    }

    fn flat(&self, k0: i64, k1: i64, k2: i64) -> usize {
        let d = &self.dims;
        ((k0 + d.k0 as i64) as usize * d.n1() + (k1 + d.k1 as i64) as usize) * d.n2() + (k2 + d.k2 as i64) as usize
    }

    pub fn coeff(&self, k0: i64, k1: i64, k2: i64) -> Complex64 {
        self.coeffs[self.flat(k0, k1, k2)]
    }

    pub fn set_coeff(&mut self, k0: i64, k1: i64, k2: i64, value: Complex64) {
        let i = self.flat(k0, k1, k2);
        self.coeffs[i] = value;
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Largest `|c[−k] − conj(c[k])|`.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dims;
        let mut worst = 0.0f64;
        for k0 in -(d.k0 as i64)..=d.k0 as i64 {
            for k1 in -(d.k1 as i64)..=d.k1 as i64 {
                for k2 in -(d.k2 as i64)..=d.k2 as i64 {
                    let a = self.coeff(k0, k1, k2);
                    let b = self.coeff(-k0, -k1, -k2);
                    worst = worst.max((b - a.conj()).norm());
                }
            }
        }
        worst
    }

    fn eval_complex(&self, d1: f64, d2: f64, t: f64) -> Complex64 {
        let d = self.dims;
        let phases = |k: usize, x: f64, period: f64| -> Vec<Complex64> {
            (-(k as i64)..=k as i64).map(|o| Complex64::from_polar(1.0, TAU * o as f64 * x / period)).collect()
        };
        let e0 = phases(d.k0, t, d.period);
        let e1 = phases(d.k1, d1, d.d1_period);
        let e2 = phases(d.k2, d2, d.d2_period);
        let mut sum = ZERO;
        let mut idx = 0;
        for a0 in &e0 {
            for a1 in &e1 {
                let w = a0 * a1;
                let mut inner = ZERO;
                for a2 in &e2 {
                    inner += self.coeffs[idx] * a2;
                    idx += 1;
                }
                sum += w * inner;
            }
        }
        sum
    }

    /// Real value of the scene at `(d1, d2, t)`.
    pub fn scene_eval(&self, d1: f64, d2: f64, t: f64) -> Result<f64> {
        if !self.real_valued {
            return Err(Error::InvalidParams("scene is not flagged real-valued".into()));
        }
        let z = self.eval_complex(d1, d2, t);
        if z.im.abs() >= REAL_TOLERANCE {
            return Err(Error::NotRealValued { residue: z.im.abs() });
        }
        Ok(z.re)
    }

    /// Coefficients of the temporal slices `x⁽ᵏ¹ᵏ²⁾(t)`: one row per spatial
    /// order (k1-major), one column per temporal order.
    pub fn temporal_slices(&self) -> CoefficientMatrix {
        let d = self.dims;
        let mut m = DMatrix::from_element(d.spatial_count(), d.n0(), ZERO);
        for k0 in -(d.k0 as i64)..=d.k0 as i64 {
            for k1 in -(d.k1 as i64)..=d.k1 as i64 {
                for k2 in -(d.k2 as i64)..=d.k2 as i64 {
                    m[(d.spatial_index(k1, k2), (k0 + d.k0 as i64) as usize)] = self.coeff(k0, k1, k2);
                }
            }
        }
        CoefficientMatrix::new(m).expect("scene coefficients are finite")
    }

    /// Inverse of [`Self::temporal_slices`].
    pub fn from_slices(dims: SceneDims, slices: &CoefficientMatrix, real_valued: bool) -> Result<Self> {
        if slices.rows() != dims.spatial_count() || slices.cols() != dims.n0() {
            return Err(Error::DimensionMismatch(format!(
                "slices are {}x{}, scene needs {}x{}",
                slices.rows(),
                slices.cols(),
                dims.spatial_count(),
                dims.n0()
            )));
        }
        let mut scene = Self::zeros(dims);
        scene.real_valued = false;
        for k0 in -(dims.k0 as i64)..=dims.k0 as i64 {
            for k1 in -(dims.k1 as i64)..=dims.k1 as i64 {
                for k2 in -(dims.k2 as i64)..=dims.k2 as i64 {
                    let v = slices.get(dims.spatial_index(k1, k2), (k0 + dims.k0 as i64) as usize);
                    scene.set_coeff(k0, k1, k2, v);
                }
            }
        }
        Self::new(dims, scene.coeffs, real_valued)
    }

    /// Ensemble seen by TEMs at the grid locations: `y = A x` with
    /// `A = mixing_from_grid_2d` and `x` the temporal slices.
    pub fn to_ensemble(&self, grid: &SensorGrid) -> Result<SignalEnsemble> {
        let d = self.dims;
        let mixing = mixing_from_grid_2d(grid, d.k1, d.k2, d.d1_period, d.d2_period);
        SignalEnsemble::new(d.temporal_basis(), mixing, self.temporal_slices())
    }

    /// Writes the slice matrix as coefficient CSV and the dims as JSON.
    pub fn write<W1: Write, W2: Write>(&self, csv_out: W1, sidecar_out: W2) -> Result<()> {
        self.temporal_slices().write_csv(csv_out)?;
        serde_json::to_writer_pretty(sidecar_out, &self.dims)?;
        Ok(())
    }

    pub fn read<R1: Read, R2: Read>(csv_in: R1, sidecar_in: R2) -> Result<Self> {
        let dims: SceneDims = serde_json::from_reader(sidecar_in)?;
        let slices = CoefficientMatrix::read_csv(csv_in)?;
        let probe = Self::from_slices(dims, &slices, false)?;
        let real = probe.hermitian_defect() <= HERMITIAN_TOLERANCE;
        Ok(Self { real_valued: real, ..probe })
    }
}

/// Sensor positions `(d1, d2)` inside one spatial period.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorGrid {
    pub locations: Vec<(f64, f64)>,
}

impl SensorGrid {
    pub fn new(locations: Vec<(f64, f64)>, d1_period: f64, d2_period: f64) -> Result<Self> {
        for &(a, b) in &locations {
            if !(0.0..d1_period).contains(&a) || !(0.0..d2_period.max(f64::MIN_POSITIVE)).contains(&b) {
                return Err(Error::InvalidParams(format!("sensor ({a}, {b}) outside the spatial period")));
            }
        }
        for (i, p) in locations.iter().enumerate() {
            if locations[..i].contains(p) {
                return Err(Error::InvalidParams(format!("duplicate sensor location {p:?}")));
            }
        }
        Ok(Self { locations })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Uniform `rows × cols` lattice over the period, row-major.
    pub fn uniform(rows: usize, cols: usize, d1_period: f64, d2_period: f64) -> Self {
        let locations = (0..rows * cols)
            .map(|i| ((i / cols) as f64 * d1_period / rows as f64, (i % cols) as f64 * d2_period / cols as f64))
            .collect();
        Self { locations }
    }

    /// Each coordinate displaced by a uniform draw in `±amplitude·period`, wrapped.
    pub fn jittered(&self, amplitude: f64, d1_period: f64, d2_period: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locations = self
            .locations
            .iter()
            .map(|&(a, b)| {
                let da = rng.random_range(-amplitude..=amplitude) * d1_period;
                let db = rng.random_range(-amplitude..=amplitude) * d2_period;
                ((a + da).rem_euclid(d1_period), (b + db).rem_euclid(d2_period))
            })
            .collect();
        Self { locations }
    }
}

/// Sufficient uniform gridding: `(2K1+1) × (2K2+1)` sensors over one period.
pub fn uniform_grid(k1: usize, k2: usize, d1_period: f64, d2_period: f64) -> SensorGrid {
    SensorGrid::uniform(2 * k1 + 1, 2 * k2 + 1, d1_period, d2_period)
}

/// `A[i, (k1,k2)] = exp(j2π(d1⁽ⁱ⁾k1/D1 + d2⁽ⁱ⁾k2/D2))`, columns k1-major.
pub fn mixing_from_grid_2d(grid: &SensorGrid, k1: usize, k2: usize, d1_period: f64, d2_period: f64) -> MixingMatrix {
    let n2 = 2 * k2 + 1;
    let cols = (2 * k1 + 1) * n2;
    let m = DMatrix::from_fn(grid.len(), cols, |i, c| {
        let o1 = (c / n2) as f64 - k1 as f64;
        let o2 = (c % n2) as f64 - k2 as f64;
        let (d1, d2) = grid.locations[i];
        Complex64::from_polar(1.0, TAU * (d1 * o1 / d1_period + d2 * o2 / d2_period))
    });
    MixingMatrix::new(m).expect("unit-modulus entries are finite")
}

/// One spatial dimension: `A[i, k1] = exp(j2π k1 d⁽ⁱ⁾/D)`.
pub fn mixing_from_grid_1d(locations: &[f64], k1: usize, period: f64) -> MixingMatrix {
    let m = DMatrix::from_fn(locations.len(), 2 * k1 + 1, |i, c| {
        let o = c as f64 - k1 as f64;
        Complex64::from_polar(1.0, TAU * o * locations[i] / period)
    });
    MixingMatrix::new(m).expect("unit-modulus entries are finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub is_scaled_identity: bool,
    pub max_off_diagonal: f64,
    /// `‖AᴴA − N·I‖_max`.
    pub max_deviation: f64,
}

/// Checks whether `AᴴA = N·I` with `N` the number of rows.
pub fn gram_check(mixing: &MixingMatrix) -> GramReport {
    let a = mixing.as_matrix();
    let gram = a.adjoint() * a;
    let n = a.nrows() as f64;
    let mut max_off = 0.0f64;
    let mut max_dev = 0.0f64;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let v = gram[(r, c)];
            if r == c {
                max_dev = max_dev.max((v - Complex64::new(n, 0.0)).norm());
            } else {
                max_off = max_off.max(v.norm());
                max_dev = max_dev.max(v.norm());
            }
        }
    }
    GramReport { is_scaled_identity: max_dev < GRAM_TOLERANCE, max_off_diagonal: max_off, max_deviation: max_dev }
}

/// Numerical rank with singular values below `rel_tol·σ_max` discarded.
pub fn numerical_rank(m: &DMatrix<Complex64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = crate::linalg::singular_values(m);
    let max = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > rel_tol * max && v > 0.0).count()
}

/// Grayscale `H × W × Nf` video patch.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoPatch {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    /// Index `f·H·W + r·W + c`.
    samples: Vec<f64>,
}

impl VideoPatch {
    pub fn new(height: usize, width: usize, frames: usize, samples: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || frames == 0 {
            return Err(Error::InvalidPatch("patch dimensions must be at least 1".into()));
        }
        if samples.len() != height * width * frames {
            return Err(Error::InvalidPatch(format!(
                "expected {} samples, got {}",
                height * width * frames,
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPatch("non-finite sample".into()));
        }
        Ok(Self { height, width, frames, samples })
    }

    /// Intensities drawn uniformly from `[0, 1)`.
    pub fn random(height: usize, width: usize, frames: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..height * width * frames).map(|_| rng.random::<f64>()).collect();
        Self::new(height, width, frames, samples)
    }

    pub fn get(&self, row: usize, col: usize, frame: usize) -> f64 {
        self.samples[frame * self.height * self.width + row * self.width + col]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Binary `VPF1` format: magic, `H, W, Nf` as little-endian u32, then
    /// little-endian f64 samples.
    pub fn write_vpf<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(PATCH_MAGIC)?;
        for d in [self.height, self.width, self.frames] {
            let d = u32::try_from(d).map_err(|_| Error::InvalidPatch("dimension exceeds u32".into()))?;
            out.write_all(&d.to_le_bytes())?;
        }
        for v in &self.samples {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_vpf<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(|_| Error::InvalidPatch("truncated header".into()))?;
        if &magic != PATCH_MAGIC {
            return Err(Error::InvalidPatch(format!("bad magic {magic:?}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 4];
            input.read_exact(&mut b).map_err(|_| Error::InvalidPatch("truncated header".into()))?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let count = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| Error::InvalidPatch("dimensions overflow".into()))?;
        let mut samples = Vec::with_capacity(count);
        let mut b = [0u8; 8];
        for _ in 0..count {
            input.read_exact(&mut b).map_err(|_| Error::InvalidPatch("truncated sample data".into()))?;
            samples.push(f64::from_le_bytes(b));
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(Error::InvalidPatch("trailing bytes after sample data".into()));
        }
        Self::new(dims[0], dims[1], dims[2], samples)
    }

    /// Samples `scene` on the lattice `d1 = r·D1/H, d2 = c·D2/W, t = f·T/Nf`.
    pub fn sample_scene(scene: &SceneSpec, height: usize, width: usize, frames: usize) -> Result<Self> {
        let d = scene.dims;
        let mut samples = Vec::with_capacity(height * width * frames);
        for f in 0..frames {
            for r in 0..height {
                for c in 0..width {
                    samples.push(scene.scene_eval(
                        r as f64 * d.d1_period / height as f64,
                        c as f64 * d.d2_period / width as f64,
                        f as f64 * d.period / frames as f64,
                    )?);
                }
            }
        }
        Self::new(height, width, frames, samples)
    }
}

/// Fourier-series scene through the patch samples, treating the patch as
/// one period sampled uniformly along every axis.
pub fn interpolate_patch(patch: &VideoPatch, period: f64, d1_period: f64, d2_period: f64) -> Result<SceneSpec> {
    let (h, w, nf) = (patch.height, patch.width, patch.frames);
    if h % 2 == 0 || w % 2 == 0 || nf % 2 == 0 {
        return Err(Error::InvalidPatch(format!("patch dimensions must be odd, got {h}x{w}x{nf}")));
    }
    let dims = SceneDims { k0: nf / 2, k1: h / 2, k2: w / 2, period, d1_period, d2_period };
    dims.validate()?;

    // data[f][r][c], transformed in place along each axis
    let mut data: Vec<Complex64> = patch.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let strides = [(nf, h * w), (h, w), (w, 1)];
    for (axis, &(len, stride)) in strides.iter().enumerate() {
        let fft = planner.plan_fft_forward(len);
        let mut line = vec![ZERO; len];
        for base in 0..data.len() {
            // visit each line once, from its first element
            let first = match axis {
                0 => base < h * w,
                1 => (base / w) % h == 0,
                _ => base % w == 0,
            };
            if !first {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[base + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[base + i * stride] = *v;
            }
        }
    }

    let scale = 1.0 / (h * w * nf) as f64;
    let mut scene = SceneSpec::zeros(dims);
    let wrap = |k: i64, n: usize| k.rem_euclid(n as i64) as usize;
    for k0 in -(dims.k0 as i64)..=dims.k0 as i64 {
        for k1 in -(dims.k1 as i64)..=dims.k1 as i64 {
            for k2 in -(dims.k2 as i64)..=dims.k2 as i64 {
                let v = data[wrap(k0, nf) * h * w + wrap(k1, h) * w + wrap(k2, w)] * scale;
                scene.set_coeff(k0, k1, k2, v);
            }
        }
    }
    symmetrize(&mut scene);
    Ok(scene)
}

/// Replaces each conjugate pair by its average, removing FFT rounding asymmetry.
fn symmetrize(scene: &mut SceneSpec) {
    let d = scene.dims;
    for k0 in -(d.k0 as i64)..=d.k0 as i64 {
        for k1 in -(d.k1 as i64)..=d.k1 as i64 {
            for k2 in -(d.k2 as i64)..=d.k2 as i64 {
                let a = scene.coeff(k0, k1, k2);
                let b = scene.coeff(-k0, -k1, -k2);
                let avg = 0.5 * (a + b.conj());
                scene.set_coeff(k0, k1, k2, avg);
                scene.set_coeff(-k0, -k1, -k2, avg.conj());
            }
        }
    }
    scene.real_valued = true;
}
