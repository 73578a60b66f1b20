//! Rank, kernel and invariant-subspace computations on small dense matrices.

use nalgebra::{Complex, DMatrix, DVector};

use super::mat::{Mat, MatrixSet};
use crate::error::{Error, Result};

/// Default relative threshold for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Singular values in descending order.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    let mut sv: Vec<f64> = a.to_dmatrix().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Number of singular values above `tol * sigma_max`.
pub fn numerical_rank(a: &Mat, tol: f64) -> usize {
    let sv = singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Numerical rank of `a - b`.
pub fn rank_of_difference(a: &Mat, b: &Mat, tol: f64) -> Result<usize> {
    Ok(numerical_rank(&a.try_sub(b)?, tol))
}

/// True iff every unordered pair of distinct elements differs by a matrix of rank `n`
/// (the column count). Vacuously true for singletons.
pub fn is_pairwise_rank_n(k: &MatrixSet, tol: f64) -> bool {
    let n = k.shape().1;
    let mats = k.mats();
    mats.iter().enumerate().all(|(i, a)| {
        mats[i + 1..]
            .iter()
            .all(|b| rank_of_difference(a, b, tol).is_ok_and(|r| r == n))
    })
}

/// Unit vector spanning the (numerical) kernel of a square matrix: the right singular
/// vector of the smallest singular value, with its first nonzero component positive.
pub fn kernel_direction(d: &Mat, tol: f64) -> Result<Vec<f64>> {
    if !d.is_square() {
        return Err(Error::ShapeMismatch("kernel_direction needs a square matrix".into()));
    }
    let n = d.rows();
    let svd = d.to_dmatrix().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let (imin, smin) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty spectrum");
    let smax = svd.singular_values.max();
    if smax > 0.0 && smin > tol * smax {
        return Err(Error::NotSingular { ratio: smin / smax });
    }
    let mut v: Vec<f64> = (0..n).map(|j| v_t[(imin, j)]).collect();
    sign_normalize(&mut v);
    Ok(v)
}

/// Dimension of the numerical kernel of a square matrix.
pub fn kernel_dimension(d: &Mat, tol: f64) -> usize {
    d.cols() - numerical_rank(d, tol)
}

/// Scales `v` to unit length and flips it so the first component that is not
/// negligible is positive.
pub fn sign_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Orthogonal `R` such that the top-right `2 x (n-2)` block of `Rᵀ A R` vanishes.
///
/// The first two columns of `R` span a two-dimensional subspace invariant under `Aᵀ`
/// (equivalently the span of the remaining columns is invariant under `A`). The plane
/// is read off the real Schur form of `Aᵀ`; when the leading Schur vectors would split a
/// complex-conjugate block, the plane is rebuilt from a complex eigenvector instead.
pub fn invariant_block_rotation(a: &Mat, tol: f64) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("invariant_block_rotation needs a square matrix".into()));
    }
    let n = a.rows();
    if n < 3 {
        return Err(Error::Dimension(format!("need n >= 3, got {n}")));
    }
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    let identity = Mat::identity(n);
    if top_right_block_norm(a, &identity) <= tol * scale {
        return Ok(identity);
    }

    let at = a.transpose().to_dmatrix();
    let (q, t) = at.clone().schur().unpack();
    // the first two Schur vectors span an invariant plane unless position 2 continues
    // a 2x2 block that started at position 1
    let splits_block = t[(2, 1)].abs() > f64::EPSILON * t.norm();
    let plane = if !splits_block {
        vec![q.column(0).into_owned(), q.column(1).into_owned()]
    } else {
        complex_pair_plane(&at, &t, q.column(0).as_slice())?
    };
    let r = complete_orthonormal_basis(&plane, n);
    let r = Mat::from_dmatrix(&r);
    Ok(r)
}

/// Frobenius norm of the top-right `2 x (n-2)` block of `Rᵀ A R`.
pub fn top_right_block_norm(a: &Mat, r: &Mat) -> f64 {
    let c = &(&r.transpose() * a) * r;
    let n = c.cols();
    let mut s = 0.0;
    for i in 0..2 {
        for j in 2..n {
            s += c[(i, j)] * c[(i, j)];
        }
    }
    s.sqrt()
}

/// Real basis of the invariant plane of a complex-conjugate eigenpair of `at`.
fn complex_pair_plane(
    at: &DMatrix<f64>,
    t: &DMatrix<f64>,
    q0: &[f64],
) -> Result<Vec<DVector<f64>>> {
    let n = at.nrows();
    // eigenvalues of the 2x2 block occupying positions 1..=2 of the quasi-triangular factor
    let (a, b, c, d) = (t[(1, 1)], t[(1, 2)], t[(2, 1)], t[(2, 2)]);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        // unsplit block with real eigenvalues: pair the leading Schur vector (an
        // eigenvector) with an eigenvector of the block
        let mu = half_tr + disc.sqrt();
        let shifted = at - DMatrix::identity(n, n) * mu;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let imin = svd.singular_values.imin();
        let v = DVector::from_fn(n, |j, _| v_t[(imin, j)]);
        let q0 = DVector::from_fn(n, |j, _| q0[j]);
        return Ok(vec![q0, v]);
    }
    let mu = Complex::new(half_tr, (-disc).sqrt());
    let shifted: DMatrix<Complex<f64>> = DMatrix::from_fn(n, n, |i, j| {
        let v = Complex::new(at[(i, j)], 0.0);
        if i == j {
            v - mu
        } else {
            v
        }
    });
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty spectrum");
    // rows of v_t are conjugated right singular vectors; conjugation does not change the span
    let re = DVector::from_fn(n, |j, _| v_t[(imin, j)].re);
    let im = DVector::from_fn(n, |j, _| v_t[(imin, j)].im);
    Ok(vec![re, im])
}

/// Orthonormal basis of `ℝⁿ` whose leading columns span `leading` (Gram–Schmidt,
/// padded with coordinate vectors).
fn complete_orthonormal_basis(leading: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let candidates = leading
        .iter()
        .cloned()
        .chain((0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })));
    for mut v in candidates {
        if basis.len() == n {
            break;
        }
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    DMatrix::from_columns(&basis)
}
