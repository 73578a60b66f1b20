use std::sync::Arc;

use super::field::{Evaluator, Field, Label};
use crate::error::{Error, Result};
use crate::matkit::Mat;

/// Relative tolerance for the jump condition `(A - S)ν = 0`.
pub const JUMP_TOL: f64 = 1e-9;

/// Two-valued laminate: `A` where `frac(⟨x, ν⟩ / period) < q`, `S` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleLaminate {
    a: Mat,
    s: Mat,
    nu: Vec<f64>,
    q: f64,
    period: f64,
    slot: u8,
}

impl SimpleLaminate {
    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn s(&self) -> &Mat {
        &self.s
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn in_a(&self, x: &[f64]) -> bool {
        let t: f64 = x.iter().zip(&self.nu).map(|(a, b)| a * b).sum::<f64>() / self.period;
        t - t.floor() < self.q
    }

    pub fn value(&self, x: &[f64]) -> &Mat {
        if self.in_a(x) {
            &self.a
        } else {
            &self.s
        }
    }

    pub fn label(&self, x: &[f64]) -> Label {
        if self.in_a(x) {
            Label::a(self.slot, 0)
        } else {
            Label::s(self.slot, 0)
        }
    }
}

/// Laminate of `A` and `S` across layers with unit normal `nu`.
pub fn simple_laminate(a: &Mat, s: &Mat, nu: &[f64], q: f64, period: f64) -> Result<Field> {
    simple_laminate_slot(a, s, nu, q, period, 1)
}

/// As [`simple_laminate`], labelling the two phases `A_slot` and `S_slot`.
pub fn simple_laminate_slot(
    a: &Mat,
    s: &Mat,
    nu: &[f64],
    q: f64,
    period: f64,
    slot: u8,
) -> Result<Field> {
    let jump = a.try_sub(s)?;
    if nu.len() != a.cols() {
        return Err(Error::ShapeMismatch(format!(
            "normal has {} components, matrices have {} columns",
            nu.len(),
            a.cols()
        )));
    }
    let norm = nu.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("normal is not a unit vector (|nu| = {norm})")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("q = {q} is not in (0, 1)")));
    }
    if !(period > 0.0 && period <= 1.0) {
        return Err(Error::Domain(format!("period = {period} is not in (0, 1]")));
    }
    let residual: f64 = jump.mul_vec(nu).iter().map(|x| x * x).sum::<f64>().sqrt();
    if residual > JUMP_TOL * jump.frobenius() {
        return Err(Error::JumpCondition { residual });
    }
    let lam = SimpleLaminate {
        a: a.clone(),
        s: s.clone(),
        nu: nu.to_vec(),
        q,
        period,
        slot,
    };
    Ok(Field::from_evaluator(Evaluator::Simple(Arc::new(lam))))
}

/// Builds a laminate without checking the jump condition, for experiments on
/// inadmissible interfaces.
pub fn unchecked_laminate(a: &Mat, s: &Mat, nu: &[f64], q: f64, period: f64) -> Result<Field> {
    a.try_sub(s)?;
    if nu.len() != a.cols() {
        return Err(Error::ShapeMismatch("normal length".into()));
    }
    let lam = SimpleLaminate {
        a: a.clone(),
        s: s.clone(),
        nu: nu.to_vec(),
        q,
        period,
        slot: 1,
    };
    Ok(Field::from_evaluator(Evaluator::Simple(Arc::new(lam))))
}
