//! Multi-scale laminate built from a closed lamination chain.
//!
//! Starting from the constant field `S₁`, every cycle resolves `S₁` into layers of `A₃`
//! and `S₃` (normal `ν₃`), then `S₃` into `A₂`/`S₂` (normal `ν₂`), then `S₂` into
//! `A₁`/`S₁` (normal `ν₁`). Stage `ℓ` (counted across cycles) uses period
//! `base_period · ratio^{-ℓ}`, and layers are global slabs intersected with the region
//! being refined.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::{Evaluator, Field, Label};
use crate::error::{Error, Result};
use crate::matkit::{verify_conditions, LaminationInstance, Mat};

/// Tolerance applied to the instance's closure conditions before lamination.
pub const SCHEDULE_CONDITION_TOL: f64 = 1e-9;

/// Zero-based chain index refined at each stage of a cycle: `S₁ → (A₃, S₃)`,
/// `S₃ → (A₂, S₂)`, `S₂ → (A₁, S₁)`.
const STAGE_PAIR: [usize; 3] = [2, 1, 0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaminateSchedule {
    instance: LaminationInstance,
    depth: u32,
    ratio: u32,
    base_period: f64,
}

impl LaminateSchedule {
    pub fn new(instance: LaminationInstance, depth: u32, ratio: u32, base_period: f64) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Schedule(format!("depth must be >= 1, got {depth}")));
        }
        if 3 * depth > 32 {
            return Err(Error::Schedule(format!("depth {depth} exceeds the label range")));
        }
        if ratio < 2 {
            return Err(Error::Schedule(format!("ratio must be >= 2, got {ratio}")));
        }
        if !(base_period > 0.0 && base_period <= 1.0) {
            return Err(Error::Schedule(format!("base period {base_period} is not in (0, 1]")));
        }
        let finest = base_period * f64::from(ratio).powi(-(3 * depth as i32 - 1));
        if !(finest.is_normal() && finest > 0.0) {
            return Err(Error::Schedule(format!("finest period {finest:e} is not representable")));
        }
        Ok(Self {
            instance,
            depth,
            ratio,
            base_period,
        })
    }

    pub fn instance(&self) -> &LaminationInstance {
        &self.instance
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn ratio(&self) -> u32 {
        self.ratio
    }

    pub fn base_period(&self) -> f64 {
        self.base_period
    }

    /// Number of lamination stages, `3 · depth`.
    pub fn levels(&self) -> usize {
        3 * self.depth as usize
    }

    pub fn period(&self, level: usize) -> f64 {
        self.base_period * f64::from(self.ratio).powi(-(level as i32))
    }

    /// Zero-based chain index laminated at `level`.
    pub fn pair_at(&self, level: usize) -> usize {
        STAGE_PAIR[level % 3]
    }

    /// Measure of the unresolved `S` region after `level` (inclusive), from the product
    /// of `(1 - qᵢ)` over the stages so far.
    pub fn expected_residual_after(&self, level: usize) -> f64 {
        let q = self.instance.q();
        (0..=level).map(|l| 1.0 - q[self.pair_at(l)]).product()
    }

    /// `(∏(1 - qᵢ))^depth`.
    pub fn expected_residual(&self) -> f64 {
        self.instance.cycle_residual().powi(self.depth as i32)
    }

    pub fn label(&self, x: &[f64]) -> Label {
        for level in 0..self.levels() {
            let i = self.pair_at(level);
            let nu = self.instance.nu(i);
            let t = (x[0] * nu[0] + x[1] * nu[1] + x[2] * nu[2]) / self.period(level);
            if t - t.floor() < self.instance.q()[i] {
                return Label::a(i as u8 + 1, level as u8);
            }
        }
        Label::s(1, (self.levels() - 1) as u8)
    }

    pub fn value(&self, label: Label) -> &Mat {
        let i = usize::from(label.index) - 1;
        match label.kind {
            super::field::LabelKind::A => self.instance.a(i),
            _ => self.instance.s(i),
        }
    }
}

/// The field `B_h` for a schedule; requires the instance to satisfy its closure conditions.
pub fn hierarchical_laminate(schedule: LaminateSchedule) -> Result<Field> {
    let report = verify_conditions(schedule.instance(), SCHEDULE_CONDITION_TOL);
    if !report.pass {
        return Err(Error::Precondition(format!(
            "instance fails its closure conditions (max residual {:e})",
            report.max_residual()
        )));
    }
    Ok(Field::from_evaluator(Evaluator::Hierarchical(Arc::new(schedule))))
}
