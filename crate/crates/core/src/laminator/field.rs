use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::hierarchical::LaminateSchedule;
use super::simple::SimpleLaminate;
use crate::error::{Error, Result};
use crate::matkit::{AffineReduction, Mat};

/// Whether a cell holds one of the target matrices `Aᵢ` or an intermediate `Sᵢ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelKind {
    A,
    S,
    Other,
}

/// Provenance of a field value: which matrix it is (1-based index) and the lamination
/// level that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Label {
    pub kind: LabelKind,
    pub index: u8,
    pub level: u8,
}

/// Byte stored for cells whose value carries no provenance.
pub const LABEL_NONE: u8 = 0x07;

impl Label {
    pub fn a(index: u8, level: u8) -> Self {
        Self {
            kind: LabelKind::A,
            index,
            level,
        }
    }

    pub fn s(index: u8, level: u8) -> Self {
        Self {
            kind: LabelKind::S,
            index,
            level,
        }
    }

    /// Low three bits: `0..=2` for `A₁..A₃`, `3..=5` for `S₁..S₃`, `7` for none.
    /// High five bits: level, saturating at 31.
    pub fn to_byte(self) -> u8 {
        let value = match self.kind {
            LabelKind::A => self.index.saturating_sub(1).min(2),
            LabelKind::S => 3 + self.index.saturating_sub(1).min(2),
            LabelKind::Other => return LABEL_NONE,
        };
        value | (self.level.min(31) << 3)
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        let level = b >> 3;
        match b & 0x07 {
            v @ 0..=2 => Some(Self::a(v + 1, level)),
            v @ 3..=5 => Some(Self::s(v - 2, level)),
            _ => None,
        }
    }

    /// `"A2"`, `"S1"`, ...
    pub fn name(&self) -> String {
        match self.kind {
            LabelKind::A => format!("A{}", self.index),
            LabelKind::S => format!("S{}", self.index),
            LabelKind::Other => "other".to_string(),
        }
    }
}

/// Matrix values on a periodic grid: `m x n` row-major per cell, cells in odometer order
/// with the last dimension fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    dims: Vec<usize>,
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(dims: Vec<usize>, m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Dimension(format!("invalid grid dims {dims:?}")));
        }
        if m == 0 || n == 0 {
            return Err(Error::ShapeMismatch("empty matrix shape".into()));
        }
        let cells: usize = dims.iter().product();
        if data.len() != cells * m * n {
            return Err(Error::ShapeMismatch(format!(
                "raster holds {} values, expected {}",
                data.len(),
                cells * m * n
            )));
        }
        Ok(Self { dims, m, n, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn cell(&self, idx: usize) -> &[f64] {
        let len = self.m * self.n;
        &self.data[idx * len..(idx + 1) * len]
    }

    pub fn cell_mat(&self, idx: usize) -> Mat {
        Mat::from_row_slice(self.m, self.n, self.cell(idx)).expect("raster cell shape")
    }

    /// Cell containing `x` (coordinates taken modulo 1).
    pub fn locate(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for (xi, &d) in x.iter().zip(&self.dims) {
            let t = xi - xi.floor();
            let c = ((t * d as f64) as usize).min(d - 1);
            idx = idx * d + c;
        }
        idx
    }
}

/// Point evaluator on the unit torus `[0, 1)ⁿ`.
#[derive(Clone, Debug)]
pub enum Evaluator {
    Constant { value: Mat, label: Option<Label> },
    Simple(Arc<SimpleLaminate>),
    Hierarchical(Arc<LaminateSchedule>),
    /// Piecewise constant on the cells of a raster.
    Cells(Arc<Raster>),
    Conjugated {
        inner: Box<Evaluator>,
        reduction: Arc<AffineReduction>,
    },
}

impl Evaluator {
    /// `(m, n)` of the values; points live in `ℝⁿ`.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Evaluator::Constant { value, .. } => value.shape(),
            Evaluator::Simple(l) => l.a().shape(),
            Evaluator::Hierarchical(_) => (3, 3),
            Evaluator::Cells(r) => r.shape(),
            Evaluator::Conjugated { reduction, .. } => {
                let n = reduction.r().rows();
                (n, n)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.shape().1
    }

    pub fn has_provenance(&self) -> bool {
        match self {
            Evaluator::Constant { label, .. } => label.is_some(),
            Evaluator::Simple(_) | Evaluator::Hierarchical(_) => true,
            Evaluator::Cells(_) | Evaluator::Conjugated { .. } => false,
        }
    }

    pub fn label(&self, x: &[f64]) -> Option<Label> {
        match self {
            Evaluator::Constant { label, .. } => *label,
            Evaluator::Simple(l) => Some(l.label(x)),
            Evaluator::Hierarchical(s) => Some(s.label(x)),
            Evaluator::Cells(_) | Evaluator::Conjugated { .. } => None,
        }
    }

    /// Writes the `m x n` value at `x` (row-major) into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Evaluator::Constant { value, .. } => out.copy_from_slice(value.as_slice()),
            Evaluator::Simple(l) => out.copy_from_slice(l.value(x).as_slice()),
            Evaluator::Hierarchical(s) => out.copy_from_slice(s.value(s.label(x)).as_slice()),
            Evaluator::Cells(r) => out.copy_from_slice(r.cell(r.locate(x))),
            Evaluator::Conjugated { inner, reduction } => {
                let ry = reduction.r().mul_vec(x);
                let ry: Vec<f64> = ry.iter().map(|t| t - t.floor()).collect();
                let (m, n) = inner.shape();
                let mut buf = vec![0.0; m * n];
                inner.eval_into(&ry, &mut buf);
                let b = Mat::from_row_slice(m, n, &buf).expect("inner shape");
                let v = reduction.apply(&b).expect("reduction shape checked at construction");
                out.copy_from_slice(v.as_slice());
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        let (m, n) = self.shape();
        let mut buf = vec![0.0; m * n];
        self.eval_into(x, &mut buf);
        Mat::from_row_slice(m, n, &buf).expect("evaluator shape")
    }
}

/// Matrix-valued field on the unit torus: an exact evaluator plus an optional cell-center
/// raster and provenance labels.
#[derive(Clone, Debug)]
pub struct Field {
    evaluator: Evaluator,
    raster: Option<Arc<Raster>>,
    labels: Option<Arc<Vec<u8>>>,
}

impl Field {
    pub fn from_evaluator(evaluator: Evaluator) -> Self {
        Self {
            evaluator,
            raster: None,
            labels: None,
        }
    }

    pub fn constant(value: Mat) -> Self {
        Self::from_evaluator(Evaluator::Constant { value, label: None })
    }

    pub fn constant_labeled(value: Mat, label: Label) -> Self {
        Self::from_evaluator(Evaluator::Constant {
            value,
            label: Some(label),
        })
    }

    /// Field known only through a raster; the evaluator is the piecewise-constant
    /// extension over cells.
    pub fn from_raster(raster: Raster) -> Self {
        let raster = Arc::new(raster);
        Self {
            evaluator: Evaluator::Cells(Arc::clone(&raster)),
            raster: Some(raster),
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        let raster = self.raster.as_ref().ok_or(Error::MissingRaster)?;
        if labels.len() != raster.cells() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} cells",
                labels.len(),
                raster.cells()
            )));
        }
        self.labels = Some(Arc::new(labels));
        Ok(self)
    }

    pub(crate) fn with_raster(mut self, raster: Raster, labels: Option<Vec<u8>>) -> Self {
        self.raster = Some(Arc::new(raster));
        self.labels = labels.map(Arc::new);
        self
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn shape(&self) -> (usize, usize) {
        self.evaluator.shape()
    }

    pub fn dim(&self) -> usize {
        self.evaluator.dim()
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        self.evaluator.eval(x)
    }

    pub fn raster(&self) -> Option<&Raster> {
        self.raster.as_deref()
    }

    pub fn require_raster(&self) -> Result<&Raster> {
        self.raster.as_deref().ok_or(Error::MissingRaster)
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref().map(Vec::as_slice)
    }

    /// Schedule behind a hierarchical laminate, if this field is one.
    pub fn schedule(&self) -> Option<&LaminateSchedule> {
        match &self.evaluator {
            Evaluator::Hierarchical(s) => Some(s),
            _ => None,
        }
    }
}
