//! n-dimensional FFTs on periodic grids and the wave-vector conventions shared by the
//! spectral operators.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place unnormalized n-dimensional DFT (forward) or its unnormalized inverse.
pub fn fft_nd(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total, "buffer does not match grid");
    let mut planner = FftPlanner::<f64>::new();
    for axis in 0..dims.len() {
        let d = dims[axis];
        if d == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(d)
        } else {
            planner.plan_fft_forward(d)
        };
        let stride: usize = dims[axis + 1..].iter().product();
        let block = d * stride;
        if stride == 1 {
            data.par_chunks_mut(d).for_each(|line| fft.process(line));
            continue;
        }
        data.par_chunks_mut(block).for_each(|blk| {
            let mut line = vec![Complex64::default(); d];
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            for inner in 0..stride {
                for (k, v) in line.iter_mut().enumerate() {
                    *v = blk[k * stride + inner];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    blk[k * stride + inner] = *v;
                }
            }
        });
    }
}

/// Signed integer frequency of index `i` on an axis of length `d`.
pub fn frequency(i: usize, d: usize) -> i64 {
    if i <= d / 2 {
        i as i64
    } else {
        i as i64 - d as i64
    }
}

/// Frequency used by derivative multipliers: the Nyquist mode of an even axis maps to 0
/// so that spectral derivatives of real data stay real.
pub fn derivative_frequency(i: usize, d: usize) -> f64 {
    if d.is_multiple_of(2) && i == d / 2 {
        0.0
    } else {
        frequency(i, d) as f64
    }
}

/// Iterates over all flat indices with their derivative wave vector `κ` and the plain
/// frequency vector `k`, in odometer order.
pub fn for_each_mode(dims: &[usize], mut f: impl FnMut(usize, &[f64], &[f64])) {
    let n = dims.len();
    let total: usize = dims.iter().product();
    let mut idx = vec![0usize; n];
    let mut kappa = vec![0.0; n];
    let mut k = vec![0.0; n];
    for flat in 0..total {
        for a in 0..n {
            kappa[a] = derivative_frequency(idx[a], dims[a]);
            k[a] = frequency(idx[a], dims[a]) as f64;
        }
        f(flat, &kappa, &k);
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] < dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// Wave vectors of every mode, flat, `n` per mode. The second vector holds `|k|²` with
/// the plain frequencies.
pub(crate) fn mode_table(dims: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = dims.len();
    let total: usize = dims.iter().product();
    let mut kappa = Vec::with_capacity(total * n);
    let mut k2 = Vec::with_capacity(total);
    for_each_mode(dims, |_, kap, k| {
        kappa.extend_from_slice(kap);
        k2.push(k.iter().map(|x| x * x).sum());
    });
    (kappa, k2)
}
