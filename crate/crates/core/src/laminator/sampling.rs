//! Rasterization onto periodic grids and Monte-Carlo volume fractions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{Field, Label, LabelKind, Raster, LABEL_NONE};
use crate::error::{Error, Result};
use crate::matkit::Mat;

/// Default cap on raster memory (values only), in bytes.
pub const DEFAULT_RASTER_CAP_BYTES: u128 = 4 << 30;

/// Minimum sample count accepted by [`fraction_report`].
pub const MIN_SAMPLES: usize = 10_000;

const CHUNK: usize = 4096;

/// Samples the evaluator at cell centers of a `dims` grid.
pub fn rasterize(field: &Field, dims: &[usize]) -> Result<Field> {
    rasterize_with_cap(field, dims, DEFAULT_RASTER_CAP_BYTES)
}

pub fn rasterize_with_cap(field: &Field, dims: &[usize], cap_bytes: u128) -> Result<Field> {
    let ev = field.evaluator();
    let (m, n) = ev.shape();
    if dims.len() != n {
        return Err(Error::Dimension(format!(
            "grid has {} dims, field lives in dimension {n}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Dimension(format!("grid dims must be positive, got {dims:?}")));
    }
    let cells: u128 = dims.iter().map(|&d| d as u128).product();
    let requested = cells * (m * n * 8) as u128;
    if requested > cap_bytes {
        return Err(Error::MemoryCap {
            requested,
            cap: cap_bytes,
        });
    }
    let cells = cells as usize;
    let len = m * n;
    let mut data = vec![0.0; cells * len];
    let with_labels = ev.has_provenance();
    let mut labels = vec![LABEL_NONE; if with_labels { cells } else { 0 }];

    let fill = |(chunk_idx, (values, tags)): (usize, (&mut [f64], &mut [u8]))| {
        let mut x = vec![0.0; n];
        let first = chunk_idx * CHUNK;
        for (k, out) in values.chunks_mut(len).enumerate() {
            cell_center(first + k, dims, &mut x);
            ev.eval_into(&x, out);
            if let Some(tag) = tags.get_mut(k) {
                *tag = ev.label(&x).map_or(LABEL_NONE, Label::to_byte);
            }
        }
    };
    if with_labels {
        data.par_chunks_mut(CHUNK * len)
            .zip(labels.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(fill);
    } else {
        data.par_chunks_mut(CHUNK * len)
            .enumerate()
            .for_each(|(i, values)| fill((i, (values, &mut []))));
    }
    let raster = Raster::new(dims.to_vec(), m, n, data)?;
    Ok(field
        .clone()
        .with_raster(raster, with_labels.then_some(labels)))
}

/// Cell averages of the evaluator, approximated by the mean over `sub^n` equally spaced
/// points per cell. Labels (when present) are taken at cell centers; `sub = 1` is
/// [`rasterize`].
pub fn rasterize_supersampled(field: &Field, dims: &[usize], sub: usize) -> Result<Field> {
    if sub == 0 {
        return Err(Error::Precondition("supersampling factor must be positive".into()));
    }
    let centers = rasterize(field, dims)?;
    if sub == 1 {
        return Ok(centers);
    }
    let ev = field.evaluator();
    let (m, n) = ev.shape();
    let len = m * n;
    let subcells = sub.pow(n as u32);
    let mut data = vec![0.0; centers.require_raster()?.data().len()];
    data.par_chunks_mut(CHUNK * len).enumerate().for_each(|(chunk_idx, values)| {
        let mut corner = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; len];
        let sub_dims = vec![sub; n];
        for (k, out) in values.chunks_mut(len).enumerate() {
            cell_center(chunk_idx * CHUNK + k, dims, &mut corner);
            for (a, c) in corner.iter_mut().enumerate() {
                *c -= 0.5 / dims[a] as f64;
            }
            for s in 0..subcells {
                cell_center(s, &sub_dims, &mut x);
                for a in 0..n {
                    x[a] = corner[a] + x[a] / dims[a] as f64;
                }
                ev.eval_into(&x, &mut v);
                out.iter_mut().zip(&v).for_each(|(o, vi)| *o += vi);
            }
            out.iter_mut().for_each(|o| *o /= subcells as f64);
        }
    });
    let raster = Raster::new(dims.to_vec(), m, n, data)?;
    let labels = centers.labels().map(<[u8]>::to_vec);
    Ok(field.clone().with_raster(raster, labels))
}

/// Center of cell `idx` (odometer order, last dimension fastest).
pub fn cell_center(mut idx: usize, dims: &[usize], x: &mut [f64]) {
    for a in (0..dims.len()).rev() {
        let c = idx % dims[a];
        idx /= dims[a];
        x[a] = (c as f64 + 0.5) / dims[a] as f64;
    }
}

/// Monte-Carlo volume fraction of one label value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueFraction {
    pub value: String,
    pub fraction: f64,
    pub std_error: f64,
}

/// Unresolved fraction after a lamination level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResidual {
    pub level: usize,
    pub fraction: f64,
    pub std_error: f64,
    pub expected: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionReport {
    pub samples: usize,
    pub seed: u64,
    /// Fractions per value (`A1`..`A3`, `S1`..`S3`), in label order.
    pub fractions: Vec<ValueFraction>,
    /// Fraction of points not valued in `{A₁, A₂, A₃}`.
    pub residual: f64,
    pub residual_std_error: f64,
    /// Closed-form residual when the field is a hierarchical laminate.
    pub expected_residual: Option<f64>,
    pub per_level: Vec<LevelResidual>,
    pub mean: Mat,
    pub mean_std_error: Mat,
}

impl FractionReport {
    pub fn fraction(&self, value: &str) -> f64 {
        self.fractions
            .iter()
            .find(|f| f.value == value)
            .map_or(0.0, |f| f.fraction)
    }
}

#[derive(Default)]
struct Tally {
    counts: BTreeMap<(LabelKind, u8), usize>,
    terminal_levels: BTreeMap<u8, usize>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
        for (k, v) in other.terminal_levels {
            *self.terminal_levels.entry(k).or_default() += v;
        }
        if self.sum.is_empty() {
            self.sum = other.sum;
            self.sum_sq = other.sum_sq;
        } else {
            for (a, b) in self.sum.iter_mut().zip(other.sum) {
                *a += b;
            }
            for (a, b) in self.sum_sq.iter_mut().zip(other.sum_sq) {
                *a += b;
            }
        }
    }
}

/// Uniform Monte-Carlo estimate of value fractions and of the field mean.
///
/// Sample `i` draws its coordinates from the ChaCha8 stream of `seed` at word offset
/// `2 n i`, so results do not depend on how the samples are split across threads.
pub fn fraction_report(field: &Field, samples: usize, seed: u64) -> Result<FractionReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let ev = field.evaluator();
    let (m, n) = ev.shape();
    let len = m * n;
    let nchunks = samples.div_ceil(CHUNK);
    let partials: Vec<Tally> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(samples);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_word_pos(2 * n as u128 * start as u128);
            let mut t = Tally {
                sum: vec![0.0; len],
                sum_sq: vec![0.0; len],
                ..Tally::default()
            };
            let mut x = vec![0.0; n];
            let mut v = vec![0.0; len];
            for _ in start..end {
                for xi in x.iter_mut() {
                    *xi = rng.gen::<f64>();
                }
                ev.eval_into(&x, &mut v);
                for ((s, s2), vi) in t.sum.iter_mut().zip(t.sum_sq.iter_mut()).zip(&v) {
                    *s += vi;
                    *s2 += vi * vi;
                }
                if let Some(label) = ev.label(&x) {
                    *t.counts.entry((label.kind, label.index)).or_default() += 1;
                    if label.kind == LabelKind::A {
                        *t.terminal_levels.entry(label.level).or_default() += 1;
                    }
                }
            }
            t
        })
        .collect();
    // merge in chunk order for a thread-count independent floating-point sum
    let mut total = Tally::default();
    for p in partials {
        total.merge(p);
    }

    let nf = samples as f64;
    let se = |p: f64| (p * (1.0 - p) / nf).sqrt();
    let fractions: Vec<ValueFraction> = total
        .counts
        .iter()
        .map(|(&(kind, index), &c)| {
            let p = c as f64 / nf;
            ValueFraction {
                value: Label {
                    kind,
                    index,
                    level: 0,
                }
                .name(),
                fraction: p,
                std_error: se(p),
            }
        })
        .collect();
    let in_k: usize = total
        .counts
        .iter()
        .filter(|((kind, _), _)| *kind == LabelKind::A)
        .map(|(_, c)| c)
        .sum();
    let residual = 1.0 - in_k as f64 / nf;

    let schedule = field.schedule();
    let per_level = match schedule {
        Some(s) => {
            let mut terminated = 0;
            (0..s.levels())
                .map(|level| {
                    terminated += total.terminal_levels.get(&(level as u8)).copied().unwrap_or(0);
                    let p = 1.0 - terminated as f64 / nf;
                    LevelResidual {
                        level,
                        fraction: p,
                        std_error: se(p),
                        expected: Some(s.expected_residual_after(level)),
                    }
                })
                .collect()
        }
        None => Vec::new(),
    };

    let mean: Vec<f64> = total.sum.iter().map(|s| s / nf).collect();
    let mean_se: Vec<f64> = total
        .sum_sq
        .iter()
        .zip(&mean)
        .map(|(s2, mu)| ((s2 / nf - mu * mu).max(0.0) / (nf - 1.0)).sqrt())
        .collect();
    Ok(FractionReport {
        samples,
        seed,
        fractions,
        residual,
        residual_std_error: se(residual),
        expected_residual: schedule.map(|s| s.expected_residual()),
        per_level,
        mean: Mat::from_row_slice(m, n, &mean)?,
        mean_std_error: Mat::from_row_slice(m, n, &mean_se)?,
    })
}
