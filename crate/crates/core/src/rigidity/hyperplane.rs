use nalgebra::{Complex, DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::matkit::{is_pairwise_rank_n, numerical_rank, sign_normalize, Mat, MatrixSet, DEFAULT_RANK_TOL};

/// `n − 1` hyperplanes `π_r = v_r^⊥` with `Aᵢ(π_r) ⊆ τ_r` for every `Aᵢ ∈ K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneSystem {
    /// Unit normals `v_r`.
    pub normals: Vec<Vec<f64>>,
    /// Orthonormal bases of `τ_r`, stored as `n × (n−1)` matrices.
    pub targets: Vec<Mat>,
    /// Unit normals of the targets.
    pub target_normals: Vec<Vec<f64>>,
    /// Largest `|w_rᵀ Aᵢ p|` over unit `p ∈ π_r`, relative to `max(1, ‖Aᵢ‖)`.
    pub residual: f64,
    /// Set when `K` is also pairwise rank-`n`, so that no exact solution exists.
    pub rigid: bool,
}

/// Searches for `n − 1` independent hyperplanes mapped by every element of `K` into
/// fixed targets.
///
/// With `D = Aᵢ − Aⱼ` invertible the targets are forced to `τ_r = D π_r`, and the
/// condition becomes common invariance of `π_r` under `D⁻¹ A` for all `A ∈ K`: every `v_r`
/// is a common eigenvector of the transposes `(D⁻¹ A)ᵀ`. Candidates are the joint
/// real eigenspaces, obtained by intersecting eigenspaces one matrix at a time. A
/// returned system has been re-checked against `K` directly at `tol`.
pub fn verify_hyperplane_hypothesis(k: &MatrixSet, tol: f64) -> Option<HyperplaneSystem> {
    let (m, n) = k.shape();
    if m != n || k.len() < 2 || n < 2 {
        return None;
    }
    let mats = k.mats();
    let d = (0..mats.len())
        .flat_map(|i| (i + 1..mats.len()).map(move |j| (i, j)))
        .map(|(i, j)| &mats[i] - &mats[j])
        .find(|d| numerical_rank(d, DEFAULT_RANK_TOL) == n)?;
    let f = d.inverse().ok()?;

    let mut spaces = vec![DMatrix::<f64>::identity(n, n)];
    for a in mats {
        let mt = (&f * a).transpose().to_dmatrix();
        spaces = spaces
            .iter()
            .flat_map(|u| split_by_eigenvalues(&mt, u))
            .collect();
        if spaces.iter().map(|u| u.ncols()).sum::<usize>() < n - 1 {
            return None;
        }
    }

    let mut candidates: Vec<Vec<f64>> = spaces
        .iter()
        .flat_map(|u| {
            u.column_iter()
                .map(|c| {
                    let mut v: Vec<f64> = c.iter().copied().collect();
                    sign_normalize(&mut v);
                    v
                })
                .collect::<Vec<_>>()
        })
        .collect();
    candidates.sort_by_key(|a| dominant(a));
    let normals = independent_subset(&candidates, n - 1)?;

    let ft = f.transpose();
    let mut targets = Vec::with_capacity(n - 1);
    let mut target_normals = Vec::with_capacity(n - 1);
    let mut residual = 0.0f64;
    for v in &normals {
        let mut w = ft.mul_vec(v);
        sign_normalize(&mut w);
        let pi = complement_basis(v);
        let tau = orthonormalize(&(d.to_dmatrix() * &pi));
        for a in mats {
            let image = DVector::from_row_slice(&w).transpose() * a.to_dmatrix() * &pi;
            residual = residual.max(image.norm() / a.frobenius().max(1.0));
        }
        targets.push(Mat::from_dmatrix(&tau));
        target_normals.push(w);
    }
    if residual > tol {
        return None;
    }
    Some(HyperplaneSystem {
        normals,
        targets,
        target_normals,
        residual,
        rigid: is_pairwise_rank_n(k, DEFAULT_RANK_TOL),
    })
}

/// Splits the column space of `u` (orthonormal columns) into the eigenspaces of `m`
/// for its real eigenvalues, keeping the nonempty pieces.
fn split_by_eigenvalues(m: &DMatrix<f64>, u: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let n = m.nrows();
    let scale = m.norm().max(1.0);
    let cluster_tol = 1e-6 * scale;
    let null_tol = 1e-6 * scale;
    let mut real: Vec<f64> = complex_spectrum(m)
        .iter()
        .filter(|z| z.im.abs() <= cluster_tol)
        .map(|z| z.re)
        .collect();
    real.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for x in real {
        match clusters.last_mut() {
            Some(c) if x - c[c.len() - 1] <= cluster_tol => c.push(x),
            _ => clusters.push(vec![x]),
        }
    }
    let mut out = Vec::new();
    for c in clusters {
        let lambda = c.iter().sum::<f64>() / c.len() as f64;
        let shifted = (m - DMatrix::identity(n, n) * lambda) * u;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let kept: Vec<DVector<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= null_tol)
            .map(|(i, _)| u * v_t.row(i).transpose())
            .collect();
        if !kept.is_empty() {
            out.push(DMatrix::from_columns(&kept));
        }
    }
    out
}

fn complex_spectrum(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = m.nrows();
    let scalar = m[(0, 0)];
    if (m - DMatrix::identity(n, n) * scalar).amax() == 0.0 {
        return vec![Complex::new(scalar, 0.0); n];
    }
    Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
        .unwrap_or_default()
}

fn dominant(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map_or(0, |(i, _)| i)
}

/// First `count` vectors of `candidates` that are linearly independent, greedily.
fn independent_subset(candidates: &[Vec<f64>], count: usize) -> Option<Vec<Vec<f64>>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut chosen = Vec::new();
    for v in candidates {
        let mut r = DVector::from_row_slice(v);
        for b in &basis {
            r -= b * b.dot(&r);
        }
        let norm = r.norm();
        if norm > 1e-6 {
            basis.push(r / norm);
            chosen.push(v.clone());
            if chosen.len() == count {
                return Some(chosen);
            }
        }
    }
    None
}

/// Orthonormal basis of `v^⊥`, as columns.
fn complement_basis(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let vv = DVector::from_row_slice(v);
    let proj = DMatrix::identity(n, n) - &vv * vv.transpose();
    let svd = proj.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    DMatrix::from_columns(&order[..n - 1].iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>())
}

fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().qr().q()
}
