//! Desk-scale discrete oracles: enumeration of divergence-free `K`-valued fields on small
//! periodic grids, the common-invariant-hyperplane detector, and the 2D div/curl
//! dictionary.

mod hyperplane;
mod search;

pub use hyperplane::{verify_hyperplane_hypothesis, HyperplaneSystem};
pub use search::{enumerate_exact, enumerate_with, SearchOptions, SearchResult, DEFAULT_NODE_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldlab::VecField;
use crate::laminator::{Field, Raster};
use crate::matkit::MatrixSet;

/// A `K`-valued field on a periodic grid, stored as one index into `K` per cell
/// (odometer order, last dimension fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteInclusion {
    k: MatrixSet,
    dims: Vec<usize>,
    assignment: Vec<usize>,
}

impl DiscreteInclusion {
    pub fn new(k: MatrixSet, dims: Vec<usize>, assignment: Vec<usize>) -> Result<Self> {
        check_grid(&k, &dims)?;
        let cells: usize = dims.iter().product();
        if assignment.len() != cells {
            return Err(Error::ShapeMismatch(format!(
                "{} indices for {cells} cells",
                assignment.len()
            )));
        }
        if let Some(&bad) = assignment.iter().find(|&&i| i >= k.len()) {
            return Err(Error::Domain(format!("index {bad} out of range for |K| = {}", k.len())));
        }
        Ok(Self { k, dims, assignment })
    }

    pub fn constant(k: MatrixSet, dims: Vec<usize>, index: usize) -> Result<Self> {
        let cells = dims.iter().product();
        Self::new(k, dims, vec![index; cells])
    }

    pub fn k(&self) -> &MatrixSet {
        &self.k
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Index level sets `{x : B(x) = K[i]}`.
    pub fn level_set(&self, i: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&c| self.assignment[c] == i)
            .collect()
    }

    pub fn to_raster(&self) -> Raster {
        let (m, n) = self.k.shape();
        let mut data = Vec::with_capacity(self.assignment.len() * m * n);
        for &i in &self.assignment {
            data.extend_from_slice(self.k.mats()[i].as_slice());
        }
        Raster::new(self.dims.clone(), m, n, data).expect("shape checked at construction")
    }
}

pub(crate) fn check_grid(k: &MatrixSet, dims: &[usize]) -> Result<()> {
    let n = k.shape().1;
    if dims.len() != n {
        return Err(Error::Dimension(format!(
            "grid has {} dims, matrices have {n} columns",
            dims.len()
        )));
    }
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::Dimension(format!("grid extents must be >= 2, got {dims:?}")));
    }
    Ok(())
}

/// Flat index of the cell one step back along `axis`, with periodic wrap.
pub(crate) fn backward_neighbor(idx: usize, dims: &[usize], axis: usize) -> usize {
    let stride: usize = dims[axis + 1..].iter().product();
    let c = (idx / stride) % dims[axis];
    if c == 0 {
        idx + (dims[axis] - 1) * stride
    } else {
        idx - stride
    }
}

/// Backward-difference divergence `Σ_k (B(x) − B(x − e_k)) e_k` per row, unit spacing.
pub fn fd_divergence(raster: &Raster) -> Result<VecField> {
    let (m, n) = raster.shape();
    let dims = raster.dims();
    if dims.len() != n {
        return Err(Error::Dimension("grid dimension must equal the column count".into()));
    }
    let mut out = vec![0.0; raster.cells() * m];
    for (idx, div) in out.chunks_mut(m).enumerate() {
        let here = raster.cell(idx);
        for (k, _) in dims.iter().enumerate() {
            let back = raster.cell(backward_neighbor(idx, dims, k));
            for (r, d) in div.iter_mut().enumerate() {
                *d += here[r * n + k] - back[r * n + k];
            }
        }
    }
    VecField::new(dims.to_vec(), m, out)
}

pub fn discrete_divergence_fd(inc: &DiscreteInclusion) -> VecField {
    fd_divergence(&inc.to_raster()).expect("grid checked at construction")
}

/// Backward-difference curl `D₁g₂ − D₂g₁` of each row of a 2D raster.
pub fn fd_curl_2d(raster: &Raster) -> Result<VecField> {
    let (m, n) = raster.shape();
    let dims = raster.dims();
    if n != 2 || dims.len() != 2 {
        return Err(Error::Dimension(format!("curl needs a 2D grid and n = 2, got n = {n}")));
    }
    let mut out = vec![0.0; raster.cells() * m];
    for (idx, curl) in out.chunks_mut(m).enumerate() {
        let here = raster.cell(idx);
        let b1 = raster.cell(backward_neighbor(idx, dims, 0));
        let b2 = raster.cell(backward_neighbor(idx, dims, 1));
        for (r, c) in curl.iter_mut().enumerate() {
            *c = (here[2 * r + 1] - b1[2 * r + 1]) - (here[2 * r] - b2[2 * r]);
        }
    }
    VecField::new(dims.to_vec(), m, out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientEquivalenceReport {
    pub max_divergence: f64,
    pub max_curl: f64,
    /// `max |curl(B J) + Div B|`.
    pub max_residual: f64,
}

impl GradientEquivalenceReport {
    pub fn holds(&self) -> bool {
        self.max_residual == 0.0
    }
}

/// Compares the discrete divergence of `B` with the discrete curl of `B J`,
/// `J = [[0, −1], [1, 0]]`. The rows of `B J` are `(B_{r2}, −B_{r1})`, so the two
/// stencils agree up to sign: `curl(B J) = −Div B`, cell by cell.
pub fn gradient_equivalence_2d(field: &Field) -> Result<GradientEquivalenceReport> {
    let raster = field.require_raster()?;
    let (m, n) = raster.shape();
    if n != 2 || raster.dims().len() != 2 {
        return Err(Error::Dimension(format!("gradient equivalence needs n = 2, got {n}")));
    }
    let mut rotated = Vec::with_capacity(raster.data().len());
    for cell in raster.data().chunks(m * n) {
        for row in cell.chunks(2) {
            rotated.extend_from_slice(&[row[1], -row[0]]);
        }
    }
    let rotated = Raster::new(raster.dims().to_vec(), m, n, rotated)?;
    let div = fd_divergence(raster)?;
    let curl = fd_curl_2d(&rotated)?;
    let max_residual = div
        .data()
        .iter()
        .zip(curl.data())
        .fold(0.0f64, |a, (d, c)| a.max((c + d).abs()));
    Ok(GradientEquivalenceReport {
        max_divergence: div.max_abs(),
        max_curl: curl.max_abs(),
        max_residual,
    })
}
