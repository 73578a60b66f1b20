//! Three-matrix sets that admit a closed lamination chain, and their verification.
//!
//! With `A₁ = 0` and `A₂ = I`, a chain `S₂ = q₁A₁ + (1-q₁)S₁`, `S₃ = q₂A₂ + (1-q₂)S₂`,
//! `S₁ = q₃A₃ + (1-q₃)S₃` with `det(Aᵢ - Sᵢ) = 0` exists exactly when `S₁` is conjugate to
//! `diag(λ₁, λ₂, λ₃)` and `A₃` is then determined by the chain. The general instance is
//! the image of that one under `X ↦ N X + M`.

use serde::{Deserialize, Serialize};

use super::linalg::{is_pairwise_rank_n, kernel_dimension, kernel_direction};
use super::mat::{Mat, MatrixSet};
use crate::error::{Error, Result};

/// Relative threshold used when extracting layering normals.
const KERNEL_TOL: f64 = 1e-8;

/// Eigenvalues `(λ₁, λ₂, λ₃)` of `S₁` forced by the determinant conditions.
pub fn eigen_lambda(q: [f64; 3]) -> Result<[f64; 3]> {
    check_fractions(&q)?;
    let [q1, q2, _] = q;
    Ok([0.0, 1.0 / (1.0 - q1), q2 / (q1 + q2 - q1 * q2)])
}

fn check_fractions(q: &[f64; 3]) -> Result<()> {
    for (i, qi) in q.iter().enumerate() {
        if !(qi.is_finite() && *qi > 0.0 && *qi < 1.0) {
            return Err(Error::Domain(format!("q{} = {qi} is not in (0, 1)", i + 1)));
        }
    }
    Ok(())
}

/// Volume fractions, conjugation `G` and the affine transport `X ↦ N X + M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct InstanceParams {
    q: [f64; 3],
    g: Mat,
    m: Mat,
    n: Mat,
}

impl InstanceParams {
    pub fn new(q: [f64; 3], g: Mat, m: Mat, n: Mat) -> Result<Self> {
        check_fractions(&q)?;
        for (name, mat) in [("G", &g), ("M", &m), ("N", &n)] {
            if mat.shape() != (3, 3) {
                return Err(Error::ShapeMismatch(format!("{name} must be 3x3")));
            }
        }
        for (name, mat) in [("G", &g), ("N", &n)] {
            let det = mat.determinant()?;
            if det.abs() <= f64::EPSILON * mat.max_abs().powi(3) || det == 0.0 {
                return Err(Error::Singular(format!("{name} is singular (det = {det:e})")));
            }
        }
        Ok(Self { q, g, m, n })
    }

    /// `G = I`, `M = 0`, `N = I`.
    pub fn with_fractions(q: [f64; 3]) -> Result<Self> {
        Self::new(q, Mat::identity(3), Mat::zeros(3, 3), Mat::identity(3))
    }

    pub fn q(&self) -> [f64; 3] {
        self.q
    }

    pub fn g(&self) -> &Mat {
        &self.g
    }

    pub fn m(&self) -> &Mat {
        &self.m
    }

    pub fn n(&self) -> &Mat {
        &self.n
    }

    /// Same fractions and conjugation, with `M = 0` and `N = I`.
    pub fn untransported(&self) -> Self {
        Self {
            q: self.q,
            g: self.g.clone(),
            m: Mat::zeros(3, 3),
            n: Mat::identity(3),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    q: [f64; 3],
    #[serde(rename = "G")]
    g: Flat9,
    #[serde(rename = "M", default = "Flat9::zero")]
    m: Flat9,
    #[serde(rename = "N", default = "Flat9::identity")]
    n: Flat9,
}

impl TryFrom<ParamsRepr> for InstanceParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        InstanceParams::new(r.q, r.g.to_mat()?, r.m.to_mat()?, r.n.to_mat()?)
    }
}

impl From<InstanceParams> for ParamsRepr {
    fn from(p: InstanceParams) -> Self {
        Self {
            q: p.q,
            g: Flat9::from_mat(&p.g),
            m: Flat9::from_mat(&p.m),
            n: Flat9::from_mat(&p.n),
        }
    }
}

/// 3x3 matrix as a row-major array of nine numbers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub(crate) struct Flat9(Vec<f64>);

impl Flat9 {
    fn zero() -> Self {
        Self(vec![0.0; 9])
    }

    fn identity() -> Self {
        Self::from_mat(&Mat::identity(3))
    }

    pub(crate) fn from_mat(m: &Mat) -> Self {
        Self(m.as_slice().to_vec())
    }

    pub(crate) fn to_mat(&self) -> Result<Mat> {
        if self.0.len() != 9 {
            return Err(Error::ShapeMismatch(format!(
                "expected 9 row-major entries, got {}",
                self.0.len()
            )));
        }
        Mat::from_row_slice(3, 3, &self.0)
    }
}

/// The set `K = {A₁, A₂, A₃}` with its lamination chain `S₁, S₂, S₃` and normals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct LaminationInstance {
    a: [Mat; 3],
    s: [Mat; 3],
    nu: [[f64; 3]; 3],
    lambdas: [f64; 3],
    params: InstanceParams,
}

impl LaminationInstance {
    /// Assembles an instance from explicit parts (no closure checks; see [`verify_conditions`]).
    pub fn from_parts(
        a: [Mat; 3],
        s: [Mat; 3],
        nu: [[f64; 3]; 3],
        lambdas: [f64; 3],
        params: InstanceParams,
    ) -> Result<Self> {
        for m in a.iter().chain(s.iter()) {
            if m.shape() != (3, 3) {
                return Err(Error::ShapeMismatch("instance matrices must be 3x3".into()));
            }
        }
        for v in &nu {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("normal {v:?} is not a unit vector")));
            }
        }
        Ok(Self {
            a,
            s,
            nu,
            lambdas,
            params,
        })
    }

    /// `Aᵢ`, zero-based.
    pub fn a(&self, i: usize) -> &Mat {
        &self.a[i]
    }

    /// `Sᵢ`, zero-based.
    pub fn s(&self, i: usize) -> &Mat {
        &self.s[i]
    }

    pub fn a_all(&self) -> &[Mat; 3] {
        &self.a
    }

    pub fn s_all(&self) -> &[Mat; 3] {
        &self.s
    }

    /// Layering normal spanning `Ker(Aᵢ - Sᵢ)`, zero-based.
    pub fn nu(&self, i: usize) -> [f64; 3] {
        self.nu[i]
    }

    pub fn lambdas(&self) -> [f64; 3] {
        self.lambdas
    }

    pub fn params(&self) -> &InstanceParams {
        &self.params
    }

    pub fn q(&self) -> [f64; 3] {
        self.params.q
    }

    /// `K = {A₁, A₂, A₃}`.
    pub fn k_set(&self) -> Result<MatrixSet> {
        MatrixSet::new(self.a.to_vec())
    }

    /// `∏(1 - qᵢ)`: the fraction of each `S₁` region left unresolved by one cycle.
    pub fn cycle_residual(&self) -> f64 {
        self.params.q.iter().map(|q| 1.0 - q).product()
    }

    /// Half the smallest Frobenius distance from `{Sᵢ}` to `K`.
    pub fn default_eps(&self) -> f64 {
        let mut d = f64::INFINITY;
        for s in &self.s {
            for a in &self.a {
                d = d.min(s.distance(a));
            }
        }
        0.5 * d
    }

    /// Replaces `A₃` (for perturbation experiments); the result is generally not closed.
    pub fn with_a3(mut self, a3: Mat) -> Result<Self> {
        if a3.shape() != (3, 3) {
            return Err(Error::ShapeMismatch("A3 must be 3x3".into()));
        }
        self.a[2] = a3;
        Ok(self)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceRepr {
    #[serde(flatten)]
    params: ParamsRepr,
    #[serde(rename = "A")]
    a: [Flat9; 3],
    #[serde(rename = "S")]
    s: [Flat9; 3],
    nu: [[f64; 3]; 3],
    lambda: [f64; 3],
}

impl TryFrom<InstanceRepr> for LaminationInstance {
    type Error = Error;

    fn try_from(r: InstanceRepr) -> Result<Self> {
        let [a1, a2, a3] = r.a;
        let [s1, s2, s3] = r.s;
        LaminationInstance::from_parts(
            [a1.to_mat()?, a2.to_mat()?, a3.to_mat()?],
            [s1.to_mat()?, s2.to_mat()?, s3.to_mat()?],
            r.nu,
            r.lambda,
            r.params.try_into()?,
        )
    }
}

impl From<LaminationInstance> for InstanceRepr {
    fn from(inst: LaminationInstance) -> Self {
        Self {
            a: inst.a.each_ref().map(Flat9::from_mat),
            s: inst.s.each_ref().map(Flat9::from_mat),
            nu: inst.nu,
            lambda: inst.lambdas,
            params: inst.params.into(),
        }
    }
}

/// Builds the instance for `p`: `A₁ = 0`, `A₂ = I`, `S₁ = G⁻¹ diag(λ) G`, `A₃` and
/// `S₂, S₃` from the chain, all transported by `X ↦ N X + M`.
pub fn build_instance(p: &InstanceParams) -> Result<LaminationInstance> {
    let [q1, q2, q3] = p.q;
    let lambdas = eigen_lambda(p.q)?;
    let g_inv = p.g.inverse()?;
    let s1 = &(&g_inv * &Mat::diag(&lambdas)) * &p.g;
    let id = Mat::identity(3);
    let residual = (1.0 - q1) * (1.0 - q2) * (1.0 - q3);
    let a3 = (&s1.scale(1.0 - residual) - &id.scale(q2 * (1.0 - q3))).scale(1.0 / q3);
    let s2 = s1.scale(1.0 - q1);
    let s3 = &id.scale(q2) + &s2.scale(1.0 - q2);

    let transport = |x: &Mat| &(&p.n * x) + &p.m;
    let a = [transport(&Mat::zeros(3, 3)), transport(&id), transport(&a3)];
    let s = [transport(&s1), transport(&s2), transport(&s3)];

    let mut nu = [[0.0; 3]; 3];
    for i in 0..3 {
        let d = &a[i] - &s[i];
        let dim = kernel_dimension(&d, KERNEL_TOL);
        if dim != 1 {
            return Err(Error::DegenerateKernel { dim });
        }
        let v = kernel_direction(&d, KERNEL_TOL)?;
        nu[i] = [v[0], v[1], v[2]];
    }
    LaminationInstance::from_parts(a, s, nu, lambdas, p.clone())
}

/// Residuals of the closure conditions of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `|det(Aᵢ - Sᵢ)| / ‖Aᵢ - Sᵢ‖³`.
    pub det_residuals: [f64; 3],
    /// `‖Sᵢ - q_{i-1}A_{i-1} - (1 - q_{i-1})S_{i-1}‖_F` with `S₁` closing the cycle.
    pub chain_residuals: [f64; 3],
    /// `‖(Aᵢ - Sᵢ)νᵢ‖ / ‖Aᵢ - Sᵢ‖`.
    pub kernel_residuals: [f64; 3],
    pub pairwise_rank_full: bool,
    pub tol: f64,
    pub pass: bool,
}

impl ConditionReport {
    pub fn max_residual(&self) -> f64 {
        self.det_residuals
            .iter()
            .chain(&self.chain_residuals)
            .chain(&self.kernel_residuals)
            .fold(0.0, |a, b| a.max(*b))
    }
}

pub fn verify_conditions(inst: &LaminationInstance, tol: f64) -> ConditionReport {
    let q = inst.q();
    let mut det_residuals = [0.0; 3];
    let mut chain_residuals = [0.0; 3];
    let mut kernel_residuals = [0.0; 3];
    for i in 0..3 {
        let d = &inst.a[i] - &inst.s[i];
        let norm = d.frobenius();
        let det = d.determinant().expect("3x3");
        det_residuals[i] = if norm > 0.0 { det.abs() / norm.powi(3) } else { 0.0 };

        // S_i is produced from the previous stage: S2 <- (A1, S1), S3 <- (A2, S2), S1 <- (A3, S3)
        let prev = (i + 2) % 3;
        let produced = &inst.a[prev].scale(q[prev]) + &inst.s[prev].scale(1.0 - q[prev]);
        chain_residuals[i] = inst.s[i].distance(&produced);

        let dv = d.mul_vec(&inst.nu[i]);
        let dv_norm = dv.iter().map(|x| x * x).sum::<f64>().sqrt();
        kernel_residuals[i] = if norm > 0.0 { dv_norm / norm } else { 0.0 };
    }
    let pairwise_rank_full = inst
        .k_set()
        .map(|k| is_pairwise_rank_n(&k, super::linalg::DEFAULT_RANK_TOL))
        .unwrap_or(false);
    let mut report = ConditionReport {
        det_residuals,
        chain_residuals,
        kernel_residuals,
        pairwise_rank_full,
        tol,
        pass: false,
    };
    report.pass = pairwise_rank_full && report.max_residual() <= tol;
    report
}
