//! Discrete analysis of matrix fields on the periodic unit cube: spectral divergence,
//! Leray projection, negative Sobolev norms, distance-to-`K` metrics, coarse averages,
//! surface fluxes and affine conjugation.

mod flux;
pub mod spectral;

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use flux::{cylinder_flux, Cylinder, CylinderFlux};

use crate::error::{Error, Result};
use crate::laminator::{Evaluator, Field, Raster};
use crate::matkit::{AffineReduction, Mat, MatrixSet};
use spectral::{fft_nd, mode_table};

/// Smallest grid extent accepted by the spectral operators.
pub const MIN_SPECTRAL_DIM: usize = 4;

/// Threshold on `|mean|` (relative to `max(1, ‖v‖∞)`) for [`hminus1_norm`].
pub const MEAN_TOL: f64 = 1e-8;

/// Vector field on a periodic grid, `m` components per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct VecField {
    dims: Vec<usize>,
    m: usize,
    data: Vec<f64>,
}

impl VecField {
    pub fn new(dims: Vec<usize>, m: usize, data: Vec<f64>) -> Result<Self> {
        let cells: usize = dims.iter().product();
        if dims.is_empty() || cells == 0 || m == 0 || data.len() != cells * m {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {m} components on {dims:?}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite vector field entry".into()));
        }
        Ok(Self { dims, m, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn cells(&self) -> usize {
        self.data.len() / self.m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn component(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(c).step_by(self.m).copied()
    }

    pub fn mean(&self) -> Vec<f64> {
        let cells = self.cells() as f64;
        (0..self.m).map(|c| self.component(c).sum::<f64>() / cells).collect()
    }

    /// `‖v‖_{L²}` with the cell-average measure.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.cells() as f64).sqrt()
    }
}

fn spectral_raster(field: &Field) -> Result<&Raster> {
    let raster = field.require_raster()?;
    if let Some(&d) = raster.dims().iter().find(|&&d| d < MIN_SPECTRAL_DIM) {
        return Err(Error::Dimension(format!(
            "spectral operators need every grid extent >= {MIN_SPECTRAL_DIM}, got {d}"
        )));
    }
    if raster.dims().len() != raster.shape().1 {
        return Err(Error::Dimension("grid dimension must equal the column count".into()));
    }
    Ok(raster)
}

/// Transform of entry `(row, col)` of every cell.
fn entry_spectrum(raster: &Raster, row: usize, col: usize) -> Vec<Complex64> {
    let (_, n) = raster.shape();
    let len = raster.shape().0 * n;
    let mut buf: Vec<Complex64> = raster
        .data()
        .par_chunks(len)
        .map(|cell| Complex64::new(cell[row * n + col], 0.0))
        .collect();
    fft_nd(&mut buf, raster.dims(), false);
    buf
}

/// Row-wise divergence `(Div B)_r = Σⱼ ∂ⱼ B_{rj}` with Fourier multiplier `2πiκⱼ`.
///
/// The Nyquist frequency of even axes is given derivative multiplier zero; the mean of
/// each output component is exactly zero.
pub fn divergence_spectral(field: &Field) -> Result<VecField> {
    let raster = spectral_raster(field)?;
    let (m, n) = raster.shape();
    let dims = raster.dims();
    let cells = raster.cells();
    let (kappa, _) = mode_table(dims);
    let mut out = vec![0.0; cells * m];
    for r in 0..m {
        let mut acc = vec![Complex64::default(); cells];
        for j in 0..n {
            let spec = entry_spectrum(raster, r, j);
            acc.par_iter_mut().enumerate().for_each(|(i, a)| {
                let mult = Complex64::new(0.0, 2.0 * PI * kappa[i * n + j]);
                *a += mult * spec[i];
            });
        }
        fft_nd(&mut acc, dims, true);
        let scale = 1.0 / cells as f64;
        for (i, v) in acc.iter().enumerate() {
            out[i * m + r] = v.re * scale;
        }
    }
    VecField::new(dims.to_vec(), m, out)
}

/// Projection of every row onto divergence-free fields: at each mode with `κ ≠ 0`,
/// `b̂ ← b̂ - κ(κ·b̂)/|κ|²`. Returns the projected raster field and `‖PB - B‖_{L²}`.
pub fn leray_project_with_gap(field: &Field) -> Result<(Field, f64)> {
    let raster = spectral_raster(field)?;
    let (m, n) = raster.shape();
    let dims = raster.dims();
    let cells = raster.cells();
    let len = m * n;
    let (kappa, _) = mode_table(dims);
    let mut out = vec![0.0; cells * len];
    for r in 0..m {
        let mut specs: Vec<Vec<Complex64>> = (0..n).map(|j| entry_spectrum(raster, r, j)).collect();
        let mut cols: Vec<&mut [Complex64]> = specs.iter_mut().map(|s| s.as_mut_slice()).collect();
        for i in 0..cells {
            let kap = &kappa[i * n..(i + 1) * n];
            let k2: f64 = kap.iter().map(|x| x * x).sum();
            if k2 == 0.0 {
                continue;
            }
            let mut dot = Complex64::default();
            for j in 0..n {
                dot += cols[j][i] * kap[j];
            }
            let coef = dot / k2;
            for j in 0..n {
                cols[j][i] -= coef * kap[j];
            }
        }
        for (j, spec) in specs.iter_mut().enumerate() {
            fft_nd(spec, dims, true);
            let scale = 1.0 / cells as f64;
            for (i, v) in spec.iter().enumerate() {
                out[i * len + r * n + j] = v.re * scale;
            }
        }
    }
    let gap = (out
        .iter()
        .zip(raster.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / cells as f64)
        .sqrt();
    let projected = Raster::new(dims.to_vec(), m, n, out)?;
    Ok((Field::from_raster(projected), gap))
}

pub fn leray_project(field: &Field) -> Result<Field> {
    leray_project_with_gap(field).map(|(f, _)| f)
}

/// Homogeneous `H⁻¹` norm `sqrt(Σ_{k≠0} |v̂(k)|² / (4π²|κ|²))` (Parseval-normalized).
///
/// `κ` is the derivative wave vector of [`spectral::derivative_frequency`]; modes where
/// it vanishes but `k ≠ 0` (pure Nyquist modes) are weighted with `|k|²` instead.
pub fn hminus1_norm(v: &VecField) -> Result<f64> {
    let scale = v.max_abs().max(1.0);
    for (component, mean) in v.mean().into_iter().enumerate() {
        if mean.abs() > MEAN_TOL * scale {
            return Err(Error::NonzeroMean { component, mean });
        }
    }
    let dims = v.dims();
    let n = dims.len();
    let cells = v.cells();
    let (kappa, k2) = mode_table(dims);
    let weights: Vec<f64> = (0..cells)
        .map(|i| {
            let kap2: f64 = kappa[i * n..(i + 1) * n].iter().map(|x| x * x).sum();
            let denom = if kap2 > 0.0 { kap2 } else { k2[i] };
            if denom > 0.0 {
                1.0 / (4.0 * PI * PI * denom)
            } else {
                0.0
            }
        })
        .collect();
    let mut total = 0.0;
    for c in 0..v.components() {
        let mut buf: Vec<Complex64> = v.component(c).map(|x| Complex64::new(x, 0.0)).collect();
        fft_nd(&mut buf, dims, false);
        total += buf
            .iter()
            .zip(&weights)
            .map(|(z, w)| z.norm_sqr() * w)
            .sum::<f64>();
    }
    Ok((total / (cells as f64 * cells as f64)).sqrt())
}

/// Distance-to-`K` statistics of a raster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub l1: f64,
    pub l2: f64,
    pub eps: f64,
    /// Fraction of cells with `dist(B(x), K) > eps`.
    pub measure_above_eps: f64,
}

pub fn dist_to_k(field: &Field, k: &MatrixSet, eps: f64) -> Result<DistanceReport> {
    let raster = field.require_raster()?;
    if raster.shape() != k.shape() {
        return Err(Error::ShapeMismatch("field and K shapes differ".into()));
    }
    let (m, n) = raster.shape();
    let dists: Vec<f64> = raster
        .data()
        .par_chunks(m * n)
        .map(|cell| {
            k.iter()
                .map(|a| {
                    a.as_slice()
                        .iter()
                        .zip(cell)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    let cells = dists.len() as f64;
    Ok(DistanceReport {
        l1: dists.iter().sum::<f64>() / cells,
        l2: (dists.iter().map(|d| d * d).sum::<f64>() / cells).sqrt(),
        eps,
        measure_above_eps: dists.iter().filter(|&&d| d > eps).count() as f64 / cells,
    })
}

/// Global mean and block means of a raster.
#[derive(Clone, Debug)]
pub struct CoarseAverage {
    pub mean: Mat,
    pub blocks: Raster,
}

pub fn coarse_average(field: &Field, block: usize) -> Result<CoarseAverage> {
    let raster = field.require_raster()?;
    let dims = raster.dims();
    if block == 0 {
        return Err(Error::Divisibility { block, dim: dims[0] });
    }
    if let Some(&dim) = dims.iter().find(|&&d| d % block != 0) {
        return Err(Error::Divisibility { block, dim });
    }
    let (m, n) = raster.shape();
    let len = m * n;
    let coarse: Vec<usize> = dims.iter().map(|d| d / block).collect();
    let ncoarse: usize = coarse.iter().product();
    let mut sums = vec![0.0; ncoarse * len];
    let mut idx = vec![0usize; dims.len()];
    for cell in 0..raster.cells() {
        let mut b = 0;
        for (a, &i) in idx.iter().enumerate() {
            b = b * coarse[a] + i / block;
        }
        for (s, v) in sums[b * len..(b + 1) * len].iter_mut().zip(raster.cell(cell)) {
            *s += v;
        }
        for a in (0..dims.len()).rev() {
            idx[a] += 1;
            if idx[a] < dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    let per_block = block.pow(dims.len() as u32) as f64;
    let mut mean = vec![0.0; len];
    for chunk in sums.chunks(len) {
        for (a, s) in mean.iter_mut().zip(chunk) {
            *a += s;
        }
    }
    let total = raster.cells() as f64;
    mean.iter_mut().for_each(|v| *v /= total);
    sums.iter_mut().for_each(|v| *v /= per_block);
    Ok(CoarseAverage {
        mean: Mat::from_row_slice(m, n, &mean)?,
        blocks: Raster::new(coarse, m, n, sums)?,
    })
}

/// Field `y ↦ Rᵀ F (B(R y) + C) R`, evaluated analytically (points `R y` are taken
/// modulo the unit cube).
pub fn conjugate_field(field: &Field, reduction: &AffineReduction) -> Result<Field> {
    let (m, n) = field.shape();
    if reduction.c().shape() != (m, n) || reduction.r().rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "reduction does not act on {m}x{n} fields"
        )));
    }
    Ok(Field::from_evaluator(Evaluator::Conjugated {
        inner: Box::new(field.evaluator().clone()),
        reduction: Arc::new(reduction.clone()),
    }))
}

/// Convergence metrics of a rasterized field against `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub l1_dist_to_k: f64,
    pub l2_dist_to_k: f64,
    pub eps: f64,
    pub measure_above_eps: f64,
    pub hminus1_div: f64,
    pub l2_projection_gap: f64,
    pub mean_matrix: Mat,
}

pub fn metrics(field: &Field, k: &MatrixSet, eps: f64) -> Result<MetricsReport> {
    let dist = dist_to_k(field, k, eps)?;
    let div = divergence_spectral(field)?;
    let hminus1_div = hminus1_norm(&div)?;
    let (_, gap) = leray_project_with_gap(field)?;
    let mean = coarse_average(field, 1)?.mean;
    Ok(MetricsReport {
        l1_dist_to_k: dist.l1,
        l2_dist_to_k: dist.l2,
        eps,
        measure_above_eps: dist.measure_above_eps,
        hminus1_div,
        l2_projection_gap: gap,
        mean_matrix: mean,
    })
}
