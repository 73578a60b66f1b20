//! Changes of variables that keep divergence-free fields divergence-free.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{is_pairwise_rank_n, numerical_rank};
use super::mat::{Mat, MatrixSet};
use crate::error::{Error, Result};

/// Attempt cap for the randomized search in [`find_rank_preserving_f`].
pub const MAX_F_ATTEMPTS: usize = 10_000;

/// Transform data for `B̂(y) = Rᵀ F (B(R y) + C) R`: `R` is `n x n` orthogonal,
/// `F` is `n x m` and `C` is `m x n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineReduction {
    r: Mat,
    f: Mat,
    c: Mat,
}

impl AffineReduction {
    pub fn new(r: Mat, f: Mat, c: Mat) -> Result<Self> {
        let n = r.rows();
        if !r.is_square() {
            return Err(Error::ShapeMismatch("R must be square".into()));
        }
        let m = c.rows();
        if c.cols() != n || f.shape() != (n, m) {
            return Err(Error::ShapeMismatch(format!(
                "need R {n}x{n}, F {n}x{m}, C {m}x{n}; got F {}x{}, C {}x{}",
                f.rows(),
                f.cols(),
                c.rows(),
                c.cols()
            )));
        }
        let gram = &r.transpose() * &r;
        let err = gram.distance(&Mat::identity(n));
        if err > 1e-9 {
            return Err(Error::Domain(format!("R is not orthogonal (|RᵀR - I| = {err:e})")));
        }
        Ok(Self { r, f, c })
    }

    /// `R = I`, `F = I`, `C = 0` on `m x n` fields.
    pub fn identity(m: usize, n: usize) -> Self {
        let mut f = Mat::zeros(n, m);
        for i in 0..m.min(n) {
            f[(i, i)] = 1.0;
        }
        Self {
            r: Mat::identity(n),
            f,
            c: Mat::zeros(m, n),
        }
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn f(&self) -> &Mat {
        &self.f
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    /// Image of a single matrix value: `Rᵀ F (X + C) R`.
    pub fn apply(&self, x: &Mat) -> Result<Mat> {
        let shifted = x.try_add(&self.c)?;
        let left = self.r.transpose().try_mul(&self.f)?.try_mul(&shifted)?;
        left.try_mul(&self.r)
    }
}

/// Moves `A₁` to `0` and `A₂` to `I`: `F = (A₂ - A₁)⁻¹`, `C = -A₁`, `R = I`.
pub fn normalize_triple(k: &MatrixSet) -> Result<(AffineReduction, MatrixSet)> {
    let (m, n) = k.shape();
    if m != n {
        return Err(Error::ShapeMismatch("normalize_triple needs square matrices".into()));
    }
    if k.len() < 2 {
        return Err(Error::Precondition("need at least two matrices".into()));
    }
    let a1 = &k.mats()[0];
    let a2 = &k.mats()[1];
    let d = a2 - a1;
    if numerical_rank(&d, super::linalg::DEFAULT_RANK_TOL) < n {
        return Err(Error::Singular("A2 - A1 is not invertible".into()));
    }
    let f = d.inverse()?;
    let red = AffineReduction::new(Mat::identity(n), f, -a1)?;
    let mats = k.iter().map(|a| red.apply(a)).collect::<Result<Vec<_>>>()?;
    Ok((red, MatrixSet::new(mats)?))
}

/// Finds `F` (`n x m`) with `rank(F(Aᵢ - Aⱼ)) = n` for every pair of a pairwise rank-`n`
/// set of `m x n` matrices, `m > n`.
///
/// The first candidate is the left pseudo-inverse of `A₂ - A₁`; later candidates add
/// seeded uniform `[-1, 1]` perturbations to it. Every candidate is checked against all
/// pairs before it is returned.
pub fn find_rank_preserving_f(k: &MatrixSet, seed: u64, tol: f64) -> Result<Mat> {
    let (m, n) = k.shape();
    if m <= n {
        return Err(Error::ShapeMismatch(format!("need m > n, got {m}x{n}")));
    }
    if !is_pairwise_rank_n(k, tol) {
        return Err(Error::Precondition("set is not pairwise rank-n".into()));
    }
    let base = if k.len() >= 2 {
        let d = &k.mats()[1] - &k.mats()[0];
        let dt = d.transpose();
        (&dt * &d).inverse()?.try_mul(&dt)?
    } else {
        let mut f = Mat::zeros(n, m);
        for i in 0..n {
            f[(i, i)] = 1.0;
        }
        f
    };
    let accepts = |f: &Mat| {
        let mats = k.mats();
        mats.iter().enumerate().all(|(i, a)| {
            mats[i + 1..]
                .iter()
                .all(|b| numerical_rank(&(f * &(a - b)), tol) == n)
        })
    };
    if accepts(&base) {
        return Ok(base);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 1..MAX_F_ATTEMPTS {
        let mut f = base.clone();
        for i in 0..n {
            for j in 0..m {
                f[(i, j)] += rng.gen_range(-1.0..=1.0);
            }
        }
        if accepts(&f) {
            return Ok(f);
        }
    }
    Err(Error::Exhausted {
        attempts: MAX_F_ATTEMPTS,
    })
}
