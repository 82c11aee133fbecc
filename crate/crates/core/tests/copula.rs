use ibnc_core::copula::{
    apply_projection, copula_correlation, correlation, mgib_solve, normal_cdf, normal_quantile,
    normal_scores, rank_transform, reference_scores, MgibOptions,
};
use ibnc_core::gib::{self, conditional_covariance, Relevance, Target};
use ibnc_core::nc_metrics::ncm_classify;
use ibnc_core::synth::{linear_pair, monotone_warp, sample_mixture, EtfSpec, MixtureSpec, Warp};
use ibnc_core::{Error, RepresentationSet};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normals(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn unlabeled(x: DMatrix<f64>) -> RepresentationSet {
    let n = x.nrows();
    RepresentationSet::new(x, vec![0; n], 1, "x").unwrap()
}

/// `(X, Y)` with `Y = X M + noise`, so the relevance is a noisy linear image.
fn gaussian_pair(n: usize, seed: u64) -> (RepresentationSet, RepresentationSet) {
    let x = normals(n, 3, seed);
    let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 0.7, 0.0, 0.2]);
    let y = &x * m + normals(n, 2, seed + 1) * 0.6;
    (unlabeled(x), unlabeled(y))
}

#[test]
fn rank_examples() {
    let m = DMatrix::from_column_slice(3, 2, &[3.0, 1.0, 2.0, 5.0, 5.0, 1.0]);
    let u = rank_transform(&m);
    assert_eq!(u.column(0).as_slice(), &[0.75, 0.25, 0.5]);
    assert_eq!(u.column(1).as_slice(), &[0.625, 0.625, 0.25]);
    let tied = rank_transform(&DMatrix::from_column_slice(2, 1, &[5.0, 5.0]));
    assert_eq!(tied.as_slice(), &[0.5, 0.5]);
}

#[test]
fn quantile_reference_values() {
    // tabulated standard-normal quantiles
    let table = [
        (0.5, 0.0),
        (0.975, 1.959_963_984_540_054),
        (0.995, 2.575_829_303_548_900_4),
        (0.9, 1.281_551_565_544_600_4),
        (0.841_344_746_068_542_9, 1.0),
        (1e-10, -6.361_340_902_404_056),
    ];
    for (p, z) in table {
        let got = normal_quantile(p).unwrap();
        assert!(
            (got - z).abs() <= 1e-12 * z.abs().max(1.0),
            "{p}: {got} vs {z}"
        );
    }
    for bad in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(matches!(normal_quantile(bad), Err(Error::Domain(_))));
    }
    let u = DMatrix::from_element(1, 1, 1.0);
    assert!(matches!(normal_scores(&u), Err(Error::Domain(_))));
}

#[test]
fn correlation_blocks() {
    let a = normals(500, 3, 1);
    let g = copula_correlation(&a, &a).unwrap();
    assert!((&g.aa - &g.bb).amax() < 1e-15);
    assert!((&g.aa - &g.ab).amax() < 1e-12);

    let n = 100_000;
    let g = copula_correlation(&normals(n, 3, 2), &normals(n, 3, 3)).unwrap();
    assert!(g.ab.amax() <= 0.02);

    let constant = DMatrix::from_element(10, 2, 1.0);
    assert!(matches!(
        correlation(&constant),
        Err(Error::DegenerateColumn { column: 0 })
    ));
}

#[test]
fn mgib_self_relevance_is_lossless() {
    let x = unlabeled(normals(2000, 3, 4));
    let sol = mgib_solve(&x, &x, Target::Rank(3), &MgibOptions::default()).unwrap();
    assert!(sol.spectrum.lambdas.iter().all(|&l| l < 1e-4));
    assert_eq!(sol.compressed.ncols(), 3);
    assert!(sol.info.i_ty >= 0.9 * sol.info.i_tx);
}

#[test]
fn mgib_independent_relevance_is_empty() {
    let x = unlabeled(normals(5000, 3, 5));
    let y = unlabeled(normals(5000, 3, 6));
    let options = MgibOptions::default();
    let probe = mgib_solve(&x, &y, Target::Rank(0), &options).unwrap();
    let first = probe.spectrum.critical_betas()[0];
    let below = mgib_solve(&x, &y, Target::ExplicitBeta(first), &options).unwrap();
    assert_eq!(below.projection.active_rank, 0);
    assert_eq!(below.compressed.ncols(), 0);
    for rank in 0..=3 {
        let sol = mgib_solve(&x, &y, Target::Rank(rank), &options).unwrap();
        assert!(sol.info.i_ty < 0.01, "rank {rank}: {}", sol.info.i_ty);
    }
}

#[test]
fn mgib_on_gaussian_data_matches_gib() {
    let (x, y) = gaussian_pair(20_000, 7);
    let sol = mgib_solve(&x, &y, Target::Rank(2), &MgibOptions::default()).unwrap();
    let joint =
        conditional_covariance(x.features(), Relevance::Continuous(y.features()), 0.0).unwrap();
    let direct = gib::gib_spectrum(&joint).unwrap();
    for (a, b) in sol.spectrum.lambdas.iter().zip(&direct.lambdas) {
        assert!((a - b).abs() < 0.02, "{a} vs {b}");
    }
}

#[test]
fn mgib_is_invariant_to_monotone_warps() {
    let (x, y) = gaussian_pair(3000, 8);
    let options = MgibOptions::default();
    let base = mgib_solve(&x, &y, Target::Rank(2), &options).unwrap();
    for warp in Warp::ALL {
        let wx = monotone_warp(&x, warp).unwrap();
        let wy = monotone_warp(&y, warp).unwrap();
        let sol = mgib_solve(&wx, &wy, Target::Rank(2), &options).unwrap();
        assert_eq!(sol.spectrum.lambdas, base.spectrum.lambdas);
        assert_eq!(sol.compressed, base.compressed);
    }
}

#[test]
fn apply_projection_consistency_and_clamp() {
    let (x, y) = gaussian_pair(1000, 9);
    let sol = mgib_solve(&x, &y, Target::Rank(2), &MgibOptions::default()).unwrap();
    let again = apply_projection(&sol, &x, &x).unwrap();
    assert!((&again - &sol.compressed).amax() < 1e-9);

    let outliers = DMatrix::from_row_slice(2, 3, &[-1e6, 0.0, 1e6, -1e300, 1e300, -1e300]);
    let out = apply_projection(&sol, &unlabeled(outliers), &x).unwrap();
    assert!(out.iter().all(|v| v.is_finite()));
    let scores = reference_scores(
        &DMatrix::from_row_slice(1, 3, &[-1e6, 0.0, 1e6]),
        x.features(),
    )
    .unwrap();
    let clamp = normal_quantile(0.5 / 1001.0).unwrap();
    assert_eq!(scores[(0, 0)], clamp);
    assert_eq!(scores[(0, 2)], normal_quantile(1.0 - 0.5 / 1001.0).unwrap());
}

#[test]
fn etf_pair_compression_keeps_ncm_accuracy() {
    let z2 = sample_mixture(&MixtureSpec {
        etf: EtfSpec::new(10, 64, 1.0),
        within_std: 0.05,
        samples_per_class: 100,
        seed: 1,
    })
    .unwrap();
    let z1 = linear_pair(&z2, 2, 0.01).unwrap();
    let sol = mgib_solve(&z1, &z2, Target::Rank(10), &MgibOptions::default()).unwrap();
    assert_eq!(sol.compressed.ncols(), 10);
    let accuracy = |features: &DMatrix<f64>| {
        let set = z1.with_features(features.clone(), "f").unwrap();
        let pred = ncm_classify(&set, features).unwrap();
        pred.iter().zip(z1.labels()).filter(|(p, t)| p == t).count() as f64 / z1.len() as f64
    };
    let full = accuracy(z1.features());
    let compressed = accuracy(&sol.compressed);
    assert!((full - compressed).abs() <= 0.01, "{full} vs {compressed}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quantile_inverts_cdf(p in 1e-300f64..=0.5) {
        let z = normal_quantile(p).unwrap();
        prop_assert!((normal_cdf(z) / p - 1.0).abs() < 1e-12);
        // 1 - q is exact for q in [1/2, 1), so the reflection is exact too
        let q = 1.0 - p;
        prop_assert_eq!(normal_quantile(q).unwrap(), -normal_quantile(1.0 - q).unwrap());
    }

    #[test]
    fn ranks_without_ties_are_a_permutation(values in proptest::collection::hash_set(-1_000_000i64..1_000_000, 2..40)) {
        let col: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let n = col.len();
        let u = rank_transform(&DMatrix::from_column_slice(n, 1, &col));
        let mut got: Vec<f64> = u.iter().map(|v| v * (n + 1) as f64).collect();
        got.sort_by(f64::total_cmp);
        for (i, g) in got.iter().enumerate() {
            prop_assert!((g - (i + 1) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn copula_correlation_is_valid(seed in any::<u64>()) {
        let x = normals(60, 4, seed);
        let warped = x.map(|v| v * v * v + v);
        let g = correlation(&normal_scores(&rank_transform(&warped)).unwrap()).unwrap();
        prop_assert!((&g - g.transpose()).amax() == 0.0);
        prop_assert!((0..4).all(|i| g[(i, i)] == 1.0));
        let min = g.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-10);
    }
}
