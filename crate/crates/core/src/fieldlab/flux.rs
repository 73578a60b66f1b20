use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laminator::Field;

/// Solid cylinder in the unit cube: the disk of `radius` around `center` in the plane
/// orthogonal to `axis`, swept from `center[axis]` to `center[axis] + span`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub axis: usize,
    pub center: [f64; 3],
    pub radius: f64,
    pub span: f64,
}

impl Cylinder {
    pub fn new(axis: usize, center: [f64; 3], radius: f64, span: f64) -> Result<Self> {
        let c = Self {
            axis,
            center,
            radius,
            span,
        };
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        if self.axis > 2 {
            return Err(Error::Geometry(format!("axis {} out of range", self.axis)));
        }
        if !(self.radius > 0.0 && self.span > 0.0) {
            return Err(Error::Geometry("radius and span must be positive".into()));
        }
        let (u, v) = self.transverse();
        let lo = self.center[self.axis];
        let inside = lo >= 0.0
            && lo + self.span <= 1.0
            && [u, v]
                .iter()
                .all(|&a| self.center[a] - self.radius >= 0.0 && self.center[a] + self.radius <= 1.0);
        if !inside {
            return Err(Error::Geometry(format!("{self:?} leaves the unit cube")));
        }
        Ok(())
    }

    /// The two coordinate axes orthogonal to `axis`, in cyclic order.
    pub fn transverse(&self) -> (usize, usize) {
        ((self.axis + 1) % 3, (self.axis + 2) % 3)
    }
}

/// Outward fluxes `∫ B ν dS` through the two bases and the lateral surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderFlux {
    /// Base at `center[axis]`, outward normal `-e_axis`.
    pub base1: Vec<f64>,
    /// Base at `center[axis] + span`, outward normal `+e_axis`.
    pub base2: Vec<f64>,
    pub lateral: Vec<f64>,
}

impl CylinderFlux {
    pub fn total(&self) -> Vec<f64> {
        self.base1
            .iter()
            .zip(&self.base2)
            .zip(&self.lateral)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }

    pub fn total_norm(&self) -> f64 {
        self.total().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Midpoint-rule surface quadrature with `quad_points` radial and axial cells and
/// `4 · quad_points` angular cells.
pub fn cylinder_flux(field: &Field, cyl: &Cylinder, quad_points: usize) -> Result<CylinderFlux> {
    cyl.check()?;
    let (m, n) = field.shape();
    if n != 3 {
        return Err(Error::Dimension(format!("cylinder flux needs n = 3, got {n}")));
    }
    if quad_points == 0 {
        return Err(Error::Precondition("quad_points must be positive".into()));
    }
    let ev = field.evaluator();
    let (u, v) = cyl.transverse();
    let nr = quad_points;
    let nt = 4 * quad_points;
    let nz = quad_points;
    let dr = cyl.radius / nr as f64;
    let dt = 2.0 * PI / nt as f64;
    let dz = cyl.span / nz as f64;

    let mut value = vec![0.0; m * n];
    let mut flux_through = |x: &[f64; 3], normal: &[f64; 3], area: f64, acc: &mut [f64]| {
        ev.eval_into(x, &mut value);
        for (r, a) in acc.iter_mut().enumerate() {
            let row = &value[r * n..(r + 1) * n];
            *a += area * (row[0] * normal[0] + row[1] * normal[1] + row[2] * normal[2]);
        }
    };

    let mut base1 = vec![0.0; m];
    let mut base2 = vec![0.0; m];
    let mut lateral = vec![0.0; m];
    let mut down = [0.0; 3];
    down[cyl.axis] = -1.0;
    let mut up = [0.0; 3];
    up[cyl.axis] = 1.0;
    for i in 0..nr {
        let rho = (i as f64 + 0.5) * dr;
        let area = rho * dr * dt;
        for j in 0..nt {
            let theta = (j as f64 + 0.5) * dt;
            let mut x = cyl.center;
            x[u] += rho * theta.cos();
            x[v] += rho * theta.sin();
            flux_through(&x, &down, area, &mut base1);
            x[cyl.axis] += cyl.span;
            flux_through(&x, &up, area, &mut base2);
        }
    }
    let area = cyl.radius * dt * dz;
    for j in 0..nt {
        let theta = (j as f64 + 0.5) * dt;
        let mut normal = [0.0; 3];
        normal[u] = theta.cos();
        normal[v] = theta.sin();
        for k in 0..nz {
            let mut x = cyl.center;
            x[u] += cyl.radius * theta.cos();
            x[v] += cyl.radius * theta.sin();
            x[cyl.axis] += (k as f64 + 0.5) * dz;
            flux_through(&x, &normal, area, &mut lateral);
        }
    }
    Ok(CylinderFlux {
        base1,
        base2,
        lateral,
    })
}
