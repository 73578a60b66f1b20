use divlam::fieldlab::{divergence_spectral, hminus1_norm, leray_project, leray_project_with_gap};
use divlam::laminator::{fraction_report, hierarchical_laminate, Field, LaminateSchedule, Raster, MIN_SAMPLES};
use divlam::matkit::{
    build_instance, eigen_lambda, is_pairwise_rank_n, normalize_triple, rank_of_difference, verify_conditions,
    InstanceParams, Mat, MatrixSet, DEFAULT_RANK_TOL,
};
use divlam::rigidity::{enumerate_exact, verify_hyperplane_hypothesis, DEFAULT_NODE_LIMIT};
use proptest::prelude::*;

fn fraction() -> impl Strategy<Value = f64> {
    0.05f64..0.95
}

fn well_conditioned(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-0.4f64..0.4, n * n).prop_map(move |v| {
        let p = Mat::from_row_slice(n, n, &v).unwrap();
        &Mat::identity(n) + &p
    })
}

fn params() -> impl Strategy<Value = InstanceParams> {
    ([fraction(), fraction(), fraction()], well_conditioned(3))
        .prop_map(|(q, g)| InstanceParams::new(q, g, Mat::zeros(3, 3), Mat::identity(3)).unwrap())
}

fn random_raster(dims: Vec<usize>, m: usize, n: usize) -> impl Strategy<Value = Raster> {
    let len = dims.iter().product::<usize>() * m * n;
    prop::collection::vec(-1.0f64..1.0, len).prop_map(move |v| Raster::new(dims.clone(), m, n, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lambdas_are_distinct(q in [fraction(), fraction(), fraction()]) {
        let l = eigen_lambda(q).unwrap();
        prop_assert!(l[0] == 0.0 && 0.0 < l[2] && l[2] < 1.0 && 1.0 < l[1]);
    }

    #[test]
    fn chain_closes(p in params()) {
        let inst = build_instance(&p).unwrap();
        let r = verify_conditions(&inst, 1e-9);
        prop_assert!(r.pass, "{r:?}");
    }

    #[test]
    fn cycle_fixed_point(p in params()) {
        // composing the three chain steps returns to S1
        let inst = build_instance(&p).unwrap();
        let q = p.q();
        let mut s = inst.s(0).clone();
        for (i, &qi) in q.iter().enumerate() {
            s = &inst.a(i).scale(qi) + &s.scale(1.0 - qi);
        }
        prop_assert!(s.distance(inst.s(0)) <= 1e-10 * inst.s(0).frobenius().max(1.0));
    }

    #[test]
    fn affine_covariance(p in params(), n in well_conditioned(3), m in prop::collection::vec(-2.0f64..2.0, 9)) {
        let m = Mat::from_row_slice(3, 3, &m).unwrap();
        let base = build_instance(&p).unwrap();
        let moved = build_instance(&InstanceParams::new(p.q(), p.g().clone(), m.clone(), n.clone()).unwrap()).unwrap();
        for i in 0..3 {
            let a = &(&n * base.a(i)) + &m;
            let s = &(&n * base.s(i)) + &m;
            prop_assert!(moved.a(i).distance(&a) <= 1e-10);
            prop_assert!(moved.s(i).distance(&s) <= 1e-10);
            let d = (moved.a(i) - moved.s(i)).determinant().unwrap();
            prop_assert!(d.abs() <= 1e-9);
        }
        prop_assert!(verify_conditions(&moved, 1e-9).pass);
    }

    #[test]
    fn normalization_preserves_difference_ranks(p in params(), n in well_conditioned(3)) {
        let inst = build_instance(&InstanceParams::new(p.q(), p.g().clone(), Mat::zeros(3, 3), n).unwrap()).unwrap();
        let k = inst.k_set().unwrap();
        let (_, reduced) = normalize_triple(&k).unwrap();
        prop_assert!(reduced.mats()[0].max_abs() <= 1e-12);
        prop_assert!(reduced.mats()[1].distance(&Mat::identity(3)) <= 1e-9);
        for i in 0..3 {
            for j in i + 1..3 {
                let before = rank_of_difference(&k.mats()[i], &k.mats()[j], DEFAULT_RANK_TOL).unwrap();
                let after = rank_of_difference(&reduced.mats()[i], &reduced.mats()[j], DEFAULT_RANK_TOL).unwrap();
                prop_assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn leray_is_idempotent_and_parseval(r in random_raster(vec![4, 6, 4], 2, 3)) {
        let f = Field::from_raster(r);
        let (p, gap) = leray_project_with_gap(&f).unwrap();
        let h = hminus1_norm(&divergence_spectral(&f).unwrap()).unwrap();
        prop_assert!((gap - h).abs() <= 1e-10 * h.max(1e-300));
        prop_assert!(divergence_spectral(&p).unwrap().max_abs() <= 1e-10);
        let pp = leray_project(&p).unwrap();
        let d = pp.raster().unwrap().data().iter().zip(p.raster().unwrap().data())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        prop_assert!(d <= 1e-12);
    }

    #[test]
    fn constants_are_always_solutions(vals in prop::collection::vec(-2i32..3, 12), d1 in 2usize..4, d2 in 2usize..4) {
        let a = Mat::from_row_slice(2, 2, &vals[..4].iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
        let b = Mat::from_row_slice(2, 2, &vals[4..8].iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
        let c = Mat::from_row_slice(2, 2, &vals[8..].iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
        if let Ok(k) = MatrixSet::new(vec![a, b, c]) {
            let r = enumerate_exact(&k, &[d1, d2], DEFAULT_NODE_LIMIT).unwrap();
            prop_assert!(r.exhausted);
            for i in 0..k.len() {
                prop_assert!(r.solutions.contains(&vec![i; d1 * d2]));
            }
        }
    }

    #[test]
    fn rank_n_pairs_are_rigid(vals in prop::collection::vec(-3i32..4, 4), d1 in 2usize..5, d2 in 2usize..5) {
        let b = Mat::from_row_slice(2, 2, &vals.iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
        prop_assume!(b.determinant().unwrap().abs() > 0.5);
        let k = MatrixSet::new(vec![Mat::zeros(2, 2), b]).unwrap();
        let r = enumerate_exact(&k, &[d1, d2], DEFAULT_NODE_LIMIT).unwrap();
        prop_assert!(r.exhausted);
        prop_assert_eq!(r.count, 2);
    }

    #[test]
    fn lattice_kernels_give_stripes(a in 1i32..4, c in -3i32..4, axis in 0usize..2, d1 in 2usize..5, d2 in 2usize..5) {
        // B kills e_axis: the field may vary only along e_axis
        let mut b = Mat::zeros(2, 2);
        b[(0, 1 - axis)] = a as f64;
        b[(1, 1 - axis)] = c as f64;
        let k = MatrixSet::new(vec![Mat::zeros(2, 2), b]).unwrap();
        let dims = [d1, d2];
        let r = enumerate_exact(&k, &dims, DEFAULT_NODE_LIMIT).unwrap();
        prop_assert!(r.exhausted);
        prop_assert_eq!(r.count, 1usize << dims[axis]);
        for s in &r.solutions {
            for c in 0..d1 * d2 {
                let (i, j) = (c / d2, c % d2);
                let rep = if axis == 0 { i * d2 } else { j };
                prop_assert_eq!(s[c], s[rep]);
            }
        }
    }

    #[test]
    fn detector_is_sound_on_conjugated_triples(q in well_conditioned(3), d in prop::collection::vec(-3.0f64..3.0, 3)) {
        let gaps = [(d[0] - d[1]).abs(), (d[1] - d[2]).abs(), (d[0] - d[2]).abs()];
        prop_assume!(gaps.iter().all(|g| *g > 0.1) && d.iter().all(|x| (x - 1.0).abs() > 0.1 && x.abs() > 0.1));
        let a3 = &(&q.inverse().unwrap() * &Mat::diag(&d)) * &q;
        let k = MatrixSet::new(vec![Mat::zeros(3, 3), Mat::identity(3), a3]).unwrap();
        let sys = verify_hyperplane_hypothesis(&k, 1e-9).unwrap();
        prop_assert!(sys.residual <= 1e-9);
        prop_assert_eq!(sys.rigid, is_pairwise_rank_n(&k, DEFAULT_RANK_TOL));
        for v in &sys.normals {
            let matched = (0..3).any(|r| {
                let row: Vec<f64> = (0..3).map(|c| q[(r, c)]).collect();
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                let dot: f64 = row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() / norm;
                (dot.abs() - 1.0).abs() <= 1e-9
            });
            prop_assert!(matched);
        }
    }
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let inst = build_instance(&InstanceParams::with_fractions([0.3, 0.6, 0.45]).unwrap()).unwrap();
    let field = hierarchical_laminate(LaminateSchedule::new(inst, 2, 3, 1.0).unwrap()).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fraction_report(&field, 3 * MIN_SAMPLES + 17, 5).unwrap())
    };
    assert_eq!(run(1), run(4));
}
