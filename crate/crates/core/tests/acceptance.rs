//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use divlam::fieldlab::{
    coarse_average, cylinder_flux, divergence_spectral, hminus1_norm, leray_project, leray_project_with_gap,
    Cylinder,
};
use divlam::laminator::{
    fraction_report, hierarchical_laminate, rasterize, rasterize_supersampled, simple_laminate, unchecked_laminate,
    Field, LaminateSchedule, Raster,
};
use divlam::matkit::{build_instance, verify_conditions, InstanceParams, LaminationInstance, Mat, MatrixSet};
use divlam::rigidity::{enumerate_exact, verify_hyperplane_hypothesis, DEFAULT_NODE_LIMIT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn canonical() -> LaminationInstance {
    build_instance(&InstanceParams::with_fractions([0.5; 3]).unwrap()).unwrap()
}

fn random_mat(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Mat {
    let v: Vec<f64> = (0..9).map(|_| rng.gen_range(lo..hi)).collect();
    Mat::from_row_slice(3, 3, &v).unwrap()
}

/// Random matrix with singular values bounded away from zero.
fn random_invertible(rng: &mut ChaCha8Rng) -> Mat {
    loop {
        let m = random_mat(rng, -1.0, 1.0);
        let sv = divlam::matkit::singular_values(&m);
        if sv[2] > 0.1 * sv[0] {
            return m;
        }
    }
}

fn c1_golden() -> Outcome {
    let mut out = Vec::new();
    let code = divlam::cli::run(
        ["divlam", "construct", "--q", "0.5,0.5,0.5", "--G", "identity"],
        &mut out,
        &mut Vec::new(),
    );
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let get = |key: &str, i: usize| -> Vec<f64> {
        v["instance"][key][i]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect()
    };
    // exact values from the closed forms at q = 1/2
    let expect = [
        ("A", 2, [-0.5, 3.0, 2.0 / 3.0]),
        ("S", 0, [0.0, 2.0, 2.0 / 3.0]),
        ("S", 1, [0.0, 1.0, 1.0 / 3.0]),
        ("S", 2, [0.5, 1.0, 2.0 / 3.0]),
    ];
    let mut err = 0.0f64;
    for (key, i, d) in expect {
        let got = get(key, i);
        for (k, x) in got.iter().enumerate() {
            let want = if k % 4 == 0 { d[k / 4] } else { 0.0 };
            err = err.max((x - want).abs());
        }
    }
    let pass = code == 0 && v["conditions"]["pass"] == serde_json::Value::Bool(true) && err <= 1e-12;
    outcome(pass, format!("exit {code}, max entry error {err:.1e} (tol 1e-12)"))
}

fn c2_condition_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let q = [0.0; 3].map(|_| rng.gen_range(0.05..0.95));
        let g = random_invertible(&mut rng);
        let p = InstanceParams::new(q, g, Mat::zeros(3, 3), Mat::identity(3)).unwrap();
        let r = verify_conditions(&build_instance(&p).unwrap(), 1e-9);
        worst = worst.max(r.max_residual());
        failures += usize::from(!r.pass);
    }
    outcome(failures == 0, format!("1000 instances, {failures} failures, worst residual {worst:.1e}"))
}

fn c3_affine_closure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_det = 0.0f64;
    let mut failures = 0;
    for _ in 0..100 {
        let q = [0.0; 3].map(|_| rng.gen_range(0.05..0.95));
        let g = random_invertible(&mut rng);
        let m = random_mat(&mut rng, -2.0, 2.0);
        let n = random_invertible(&mut rng);
        let inst = build_instance(&InstanceParams::new(q, g, m, n).unwrap()).unwrap();
        let r = verify_conditions(&inst, 1e-9);
        failures += usize::from(!r.pass);
        for i in 0..3 {
            let d = inst.a(i) - inst.s(i);
            worst_det = worst_det.max(d.determinant().unwrap().abs() / d.frobenius().powi(3));
        }
    }
    let pass = failures == 0 && worst_det <= 1e-9;
    outcome(pass, format!("100 instances, {failures} failures, worst normalized det {worst_det:.1e}"))
}

fn c4_residual_decay() -> Outcome {
    let samples = 1_000_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for depth in 1..=3 {
        let schedule = LaminateSchedule::new(canonical(), depth, 4, 1.0).unwrap();
        let field = hierarchical_laminate(schedule).unwrap();
        let r = fraction_report(&field, samples, 4).unwrap();
        let expect = 0.125f64.powi(depth as i32);
        let se = (expect * (1.0 - expect) / samples as f64).sqrt();
        let z = (r.residual - expect) / se;
        pass &= z.abs() <= 3.0 && r.expected_residual == Some(expect);
        parts.push(format!("depth {depth}: {:.6} vs {expect:.6} (z = {z:+.2})", r.residual));
    }
    outcome(pass, parts.join("; "))
}

fn c5_weak_limit() -> Outcome {
    let inst = canonical();
    let s1 = inst.s(0).clone();
    let schedule = LaminateSchedule::new(inst.clone(), 1, 4, 0.25).unwrap();
    let raster = rasterize(&hierarchical_laminate(schedule).unwrap(), &[128, 128, 128]).unwrap();
    let mean = coarse_average(&raster, 1).unwrap().mean;
    let rel = (&mean - &s1).max_abs() / s1.frobenius();
    let gap = (0..3).map(|i| s1.distance(inst.a(i))).fold(f64::INFINITY, f64::min);
    // oracle: |S1 - A3| = |diag(1/2, -1, 0)| = sqrt(5)/2
    let oracle = 5f64.sqrt() / 2.0;
    let pass = rel <= 0.01 && gap >= 1.0 && (gap - oracle).abs() <= 1e-12;
    outcome(
        pass,
        format!("mean error {rel:.1e} of |S1| (tol 1e-2), min |S1 - A_i| = {gap:.4} (oracle {oracle:.4})"),
    )
}

fn smooth_random_field(rng: &mut ChaCha8Rng, d: usize) -> Field {
    let modes: Vec<([f64; 3], f64, f64, usize)> = (0..6)
        .map(|_| {
            let k = [0; 3].map(|_| rng.gen_range(-3i32..=3) as f64);
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0..9))
        })
        .collect();
    let cells = d * d * d;
    let mut data = vec![0.0; cells * 9];
    for c in 0..cells {
        // nodes x = idx / d keep every mode exactly periodic
        let x = [(c / (d * d)) as f64, ((c / d) % d) as f64, (c % d) as f64].map(|i| i / d as f64);
        for (k, a, b, entry) in &modes {
            let phase = 2.0 * PI * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
            data[c * 9 + entry] += a * phase.cos() + b * phase.sin();
        }
    }
    Field::from_raster(Raster::new(vec![d; 3], 3, 3, data).unwrap())
}

fn c6_leray_certificate() -> Outcome {
    let schedule = LaminateSchedule::new(canonical(), 1, 4, 1.0).unwrap();
    let raster = rasterize(&hierarchical_laminate(schedule).unwrap(), &[64, 64, 64]).unwrap();
    let projected = leray_project(&raster).unwrap();
    let max_div = divergence_spectral(&projected).unwrap().max_abs();

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let f = smooth_random_field(&mut rng, 16);
        let (_, gap) = leray_project_with_gap(&f).unwrap();
        let h = hminus1_norm(&divergence_spectral(&f).unwrap()).unwrap();
        worst = worst.max((gap - h).abs() / h.max(f64::MIN_POSITIVE));
    }
    let pass = max_div <= 1e-10 && worst <= 1e-8;
    outcome(
        pass,
        format!("max |Div PB| = {max_div:.1e} (tol 1e-10), worst Parseval mismatch {worst:.1e} (tol 1e-8)"),
    )
}

fn c7_surrogate_decay() -> Outcome {
    let inst = canonical();
    let mut norms = Vec::new();
    for ratio in [2, 4, 8] {
        let schedule = LaminateSchedule::new(inst.clone(), 1, ratio, 1.0).unwrap();
        let raster = rasterize_supersampled(&hierarchical_laminate(schedule).unwrap(), &[64, 64, 64], 4).unwrap();
        norms.push(hminus1_norm(&divergence_spectral(&raster).unwrap()).unwrap());
    }
    let pass = norms.windows(2).all(|w| w[1] <= 0.75 * w[0]);
    let drops: Vec<String> = norms
        .windows(2)
        .map(|w| format!("{:.0}%", 100.0 * (1.0 - w[1] / w[0])))
        .collect();
    outcome(
        pass,
        format!(
            "|Div B|_H-1 at ratio 2,4,8: {:.4}, {:.4}, {:.4}; reductions {} (need >= 25%)",
            norms[0],
            norms[1],
            norms[2],
            drops.join(", ")
        ),
    )
}

fn c8_enumeration() -> Outcome {
    let pair = |b: Mat| MatrixSet::new(vec![Mat::zeros(2, 2), b]).unwrap();
    let inst = canonical();
    let triple = MatrixSet::new(vec![Mat::zeros(3, 3), Mat::identity(3), inst.a(2).clone()]).unwrap();
    let cases = [
        (pair(Mat::identity(2)), vec![4, 4], 2),
        (pair(Mat::diag(&[1.0, 0.0])), vec![4, 4], 16),
        (triple, vec![2, 2, 2], 3),
    ];
    let mut pass = true;
    let mut counts = Vec::new();
    for (k, dims, want) in cases {
        let r = enumerate_exact(&k, &dims, DEFAULT_NODE_LIMIT).unwrap();
        pass &= r.exhausted && r.count == want;
        counts.push(format!("{} (want {want})", r.count));
    }
    outcome(pass, format!("solution counts {}", counts.join(", ")))
}

fn c9_detector() -> Outcome {
    let d = Mat::diag(&[-0.5, 3.0, 2.0 / 3.0]);
    let triple = |a3: Mat| MatrixSet::new(vec![Mat::zeros(3, 3), Mat::identity(3), a3]).unwrap();
    let diagonal = verify_hyperplane_hypothesis(&triple(d.clone()), 1e-9);

    let q = Mat::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.2, 1.0, 0.3, -0.4, 0.1, 1.0]).unwrap();
    let conj = &(&q.inverse().unwrap() * &d) * &q;
    let conjugated = verify_hyperplane_hypothesis(&triple(conj), 1e-9);
    let mut row_err = f64::INFINITY;
    if let Some(sys) = &conjugated {
        row_err = 0.0;
        for v in &sys.normals {
            let best = (0..3)
                .map(|r| {
                    let row: Vec<f64> = (0..3).map(|c| q[(r, c)]).collect();
                    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let sign = if row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
                    row.iter().zip(v).map(|(a, b)| (sign * a / norm - b).abs()).fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            row_err = row_err.max(best);
        }
    }

    let rot = {
        let (c, s) = (PI / 6.0).sin_cos();
        Mat::from_row_slice(2, 2, &[s, -c, c, s]).unwrap()
    };
    let no_common = MatrixSet::new(vec![rot.clone(), &rot - &Mat::identity(2)]).unwrap();
    let none = verify_hyperplane_hypothesis(&no_common, 1e-9);

    let pass = diagonal.as_ref().is_some_and(|s| s.rigid) && conjugated.is_some() && row_err <= 1e-9 && none.is_none();
    outcome(
        pass,
        format!(
            "diagonal: {}, conjugated: {} (normal vs row of Q error {row_err:.1e}), rotation pair: {}",
            if diagonal.is_some() { "found" } else { "none" },
            if conjugated.is_some() { "found" } else { "none" },
            if none.is_some() { "found" } else { "none" },
        ),
    )
}

/// Least-squares slope of `log err` against `log n`.
fn fitted_order(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -sxy / sxx
}

fn c10_gauss_green() -> Outcome {
    let alpha: f64 = 0.7;
    let nu = [alpha.cos(), alpha.sin(), 0.0];
    let perp = [-alpha.sin(), alpha.cos()];
    let mut jump = Mat::zeros(3, 3);
    for (r, (c, z)) in [(1.0, 0.3), (-2.0, 1.0), (0.5, -1.0)].into_iter().enumerate() {
        jump[(r, 0)] = c * perp[0];
        jump[(r, 1)] = c * perp[1];
        jump[(r, 2)] = z;
    }
    let s = Mat::diag(&[1.0, 2.0, 3.0]);
    let (q, period, radius, span) = (0.4, 0.17, 0.3, 0.6);
    let admissible = simple_laminate(&(&s + &jump), &s, &nu, q, period).unwrap();
    let indicator = unchecked_laminate(&Mat::identity(3), &Mat::zeros(3, 3), &nu, q, period).unwrap();

    // exact flux of the indicator laminate: each interface plane cuts the cylinder in a
    // rectangle of width 2 sqrt(R^2 - t^2) at offset t from the axis
    let exact = |center: &[f64; 3]| {
        let c = center[0] * nu[0] + center[1] * nu[1];
        let mut total = 0.0;
        for k in -10..20 {
            for (t, sign) in [(k as f64 * period, 1.0), ((k as f64 + q) * period, -1.0)] {
                let off = t - c;
                if off.abs() < radius {
                    total += sign * 2.0 * (radius * radius - off * off).sqrt() * span;
                }
            }
        }
        [total * nu[0], total * nu[1], 0.0]
    };

    let centers: Vec<[f64; 3]> = (0..8)
        .map(|i| {
            let t = i as f64;
            [0.4 + 0.023 * t, 0.45 + 0.031 * ((1.7 * t) % 3.0), 0.2]
        })
        .collect();
    let ns = [8, 16, 32, 64, 128, 256];
    let mut adm = Vec::new();
    let mut inad = Vec::new();
    let mut limit = 0.0f64;
    for &n in &ns {
        let (mut e1, mut e2) = (0.0, 0.0);
        for c in &centers {
            let cyl = Cylinder::new(2, *c, radius, span).unwrap();
            e1 += cylinder_flux(&admissible, &cyl, n).unwrap().total_norm().powi(2);
            let f = cylinder_flux(&indicator, &cyl, n).unwrap().total();
            let x = exact(c);
            limit = limit.max(x.iter().map(|v| v * v).sum::<f64>().sqrt());
            e2 += f.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        adm.push((e1 / centers.len() as f64).sqrt());
        inad.push((e2 / centers.len() as f64).sqrt());
    }
    let (p_adm, p_inad) = (fitted_order(&ns, &adm), fitted_order(&ns, &inad));
    let last = ns.len() - 1;
    let pass = p_adm >= 0.8 && p_inad >= 0.8 && limit >= 0.05 && inad[last] <= 0.02 * limit;
    outcome(
        pass,
        format!(
            "admissible flux {:.1e} -> {:.1e} (order {p_adm:.2}); inadmissible error {:.1e} -> {:.1e} (order {p_inad:.2}) against |flux| up to {limit:.3}",
            adm[0], adm[last], inad[0], inad[last]
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("golden instance at q = 1/2", Duration::from_secs(1), c1_golden),
        ("condition suite, 1000 random instances", Duration::from_secs(10), c2_condition_suite),
        ("affine closure, 100 transported instances", Duration::from_secs(5), c3_affine_closure),
        ("Monte-Carlo residual decay, depths 1-3", Duration::from_secs(30), c4_residual_decay),
        ("weak-* limit is S1, outside K", Duration::from_secs(60), c5_weak_limit),
        ("Leray certificate and Parseval identity", Duration::from_secs(30), c6_leray_certificate),
        ("H^-1 divergence decay in the scale ratio", Duration::from_secs(60), c7_surrogate_decay),
        ("discrete rigidity enumeration counts", Duration::from_secs(10), c8_enumeration),
        ("invariant hyperplane detector", Duration::from_secs(1), c9_detector),
        ("Gauss-Green cylinder flux", Duration::from_secs(5), c10_gauss_green),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let ok = o.pass && elapsed <= *budget;
        failed += usize::from(!ok);
        println!(
            "criterion {:>2}: {} | {name} | {} | {:.2}s (budget {}s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
