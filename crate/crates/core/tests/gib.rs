use ibnc_core::gib::{
    beta_for_rank, conditional_covariance, gaussian_info, gib_spectrum, information_curve,
    log_grid, projection_matrix, rank_for_target, GaussianJoint, Relevance, Target, ALPHA_MAX,
    DEFAULT_REGULARIZATION,
};
use ibnc_core::info_oracle::gaussian_mi_closed_form;
use ibnc_core::linalg;
use ibnc_core::synth::{sample_mixture, EtfSpec, MixtureSpec};
use ibnc_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn scalar(sx: f64, sxy: f64) -> GaussianJoint {
    GaussianJoint::new(
        DMatrix::from_element(1, 1, sx),
        DMatrix::from_element(1, 1, sxy),
        0.0,
    )
    .unwrap()
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Planted joint: `Sigma_x = B B^T`, `Sigma_x|y = B diag(lambda) B^T`.
fn planted(lambdas: &[f64], seed: u64) -> GaussianJoint {
    let d = lambdas.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gaussian_matrix(d, d, &mut rng) + DMatrix::identity(d, d) * 3.0;
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(lambdas));
    GaussianJoint::new(&b * b.transpose(), &b * diag * b.transpose(), 0.0).unwrap()
}

/// Population `(X, Y)` covariance with `d_x` and `d_y` blocks.
fn random_xy(d_x: usize, d_y: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = d_x + d_y;
    let m = gaussian_matrix(d, d, &mut rng);
    &m * m.transpose() + DMatrix::identity(d, d) * 0.5
}

fn schur_joint(full: &DMatrix<f64>, d_x: usize) -> GaussianJoint {
    let d_y = full.nrows() - d_x;
    let sxx = full.view((0, 0), (d_x, d_x)).into_owned();
    let sxy = full.view((0, d_x), (d_x, d_y)).into_owned();
    let syy = full.view((d_x, d_x), (d_y, d_y)).into_owned();
    let cond = &sxx - &sxy * syy.try_inverse().unwrap() * sxy.transpose();
    GaussianJoint::new(sxx, cond, 0.0).unwrap()
}

#[test]
fn scalar_examples() {
    let joint = scalar(1.0, 0.75);
    let s = gib_spectrum(&joint).unwrap();
    assert_eq!(s.critical_betas(), vec![4.0]);
    assert_eq!(projection_matrix(&s, 4.0 - 1e-9).unwrap().active_rank, 0);
    assert_eq!(projection_matrix(&s, 4.0 + 1e-9).unwrap().active_rank, 1);
    let p = projection_matrix(&s, 8.0).unwrap();
    assert!((p.alphas[0] - 1.154_700_538_379_251_5).abs() < 1e-12);
    let info = gaussian_info(&p, &joint).unwrap();
    assert!((info.i_tx - 0.423_648_930_193_601_6).abs() < 1e-12);
    let far = gaussian_info(&projection_matrix(&s, 1e12).unwrap(), &joint).unwrap();
    assert!((far.i_ty - 0.143_841_036_225_890_1).abs() < 1e-9);

    let zero = gib_spectrum(&scalar(2.0, 0.0)).unwrap();
    assert_eq!(zero.critical_betas(), vec![1.0]);
    let p = projection_matrix(&zero, 3.0).unwrap();
    assert_eq!((p.alphas[0], p.capped.clone()), (ALPHA_MAX, vec![0]));

    let one = gib_spectrum(&scalar(2.0, 2.0)).unwrap();
    assert_eq!(one.critical_betas(), vec![f64::INFINITY]);
    assert_eq!(projection_matrix(&one, 1e300).unwrap().active_rank, 0);
    assert!(matches!(beta_for_rank(&one, 1), Err(Error::Target(_))));
}

#[test]
fn spectrum_matches_nonsymmetric_eigen_oracle() {
    for seed in 0..10 {
        let full = random_xy(5, 3, seed);
        let joint = schur_joint(&full, 5);
        let s = gib_spectrum(&joint).unwrap();
        // eigenvalues of Sigma_x|y Sigma_x^{-1} by real Schur decomposition
        let m = joint.sigma_x_given_y() * joint.sigma_x().clone().try_inverse().unwrap();
        let mut oracle: Vec<f64> = m.eigenvalues().unwrap().iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        for (a, b) in s.lambdas.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        // only d_y = 3 directions carry information about Y
        assert_eq!(s.feasible_rank(), 3);
        assert!(s.max_residual(&joint) < 1e-10);
        for (i, &r) in s.r.iter().enumerate() {
            let v = s.vectors.row(i).transpose();
            assert!(((joint.sigma_x() * &v).dot(&v) - r).abs() < 1e-10 * r);
        }
    }
}

#[test]
fn info_matches_closed_form_of_full_joint() {
    // T = A X + xi with xi ~ N(0, I): build cov(T, X, Y) and read MI off it
    let (d_x, d_y) = (4, 2);
    for seed in 0..6 {
        let full = random_xy(d_x, d_y, 100 + seed);
        let joint = schur_joint(&full, d_x);
        let s = gib_spectrum(&joint).unwrap();
        let beta = 2.0 * s.critical_betas()[1] + 1.0;
        let p = projection_matrix(&s, beta).unwrap();
        let a = &p.matrix_a;
        let k = a.nrows();
        let d = d_x + d_y;
        let mut big = DMatrix::<f64>::zeros(k + d, k + d);
        big.view_mut((k, k), (d, d)).copy_from(&full);
        let top = a * full.view((0, 0), (d_x, d)).into_owned();
        big.view_mut((0, k), (k, d)).copy_from(&top);
        big.view_mut((k, 0), (d, k)).copy_from(&top.transpose());
        let tt = a * full.view((0, 0), (d_x, d_x)) * a.transpose() + DMatrix::identity(k, k);
        big.view_mut((0, 0), (k, k)).copy_from(&tt);
        let t: Vec<usize> = (0..k).collect();
        let x: Vec<usize> = (k..k + d_x).collect();
        let y: Vec<usize> = (k + d_x..k + d).collect();
        let i_tx = gaussian_mi_closed_form(&big, &t, &x).unwrap().nats;
        let i_ty = gaussian_mi_closed_form(&big, &t, &y).unwrap().nats;
        let info = gaussian_info(&p, &joint).unwrap();
        assert!((info.i_tx - i_tx).abs() < 1e-9 * i_tx.max(1.0));
        assert!((info.i_ty - i_ty).abs() < 1e-9 * i_ty.max(1.0));
        let mi =
            gaussian_mi_closed_form(&full, &x.iter().map(|i| i - k).collect::<Vec<_>>(), &[4, 5])
                .unwrap()
                .nats;
        assert!((s.mutual_information() - mi).abs() < 1e-9);
    }
}

#[test]
fn three_dim_interval_gives_rank_two() {
    let joint = planted(&[0.2, 0.5, 0.9], 3);
    let s = gib_spectrum(&joint).unwrap();
    let c = s.critical_betas();
    let p = projection_matrix(&s, 0.5 * (c[1] + c[2])).unwrap();
    assert_eq!(p.active_rank, 2);
    assert_eq!(p.matrix_a.shape(), (2, 3));
}

#[test]
fn conditional_covariance_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 1_000_000;
    let rho: f64 = 0.5;
    let x = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DMatrix::from_fn(n, 1, |i, _| {
        rho * x[(i, 0)] + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal)
    });
    let joint = conditional_covariance(&x, Relevance::Continuous(&y), 0.0).unwrap();
    let ratio = joint.sigma_x_given_y()[(0, 0)] / joint.sigma_x()[(0, 0)];
    assert!((ratio / 0.75 - 1.0).abs() < 0.01, "ratio {ratio}");

    let same = conditional_covariance(&x, Relevance::Continuous(&x), 0.0).unwrap();
    assert!(same.sigma_x_given_y()[(0, 0)].abs() < 1e-9);

    let z = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let indep = conditional_covariance(&x, Relevance::Continuous(&z), 0.0).unwrap();
    let ratio = indep.sigma_x_given_y()[(0, 0)] / indep.sigma_x()[(0, 0)];
    assert!((ratio - 1.0).abs() < 1e-4);

    let short = DMatrix::from_element(3, 1, 1.0);
    assert!(matches!(
        conditional_covariance(&x, Relevance::Continuous(&short), 0.0),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn rank_targets() {
    let joint = planted(&[0.05, 0.3, 0.6, 0.8], 8);
    let s = gib_spectrum(&joint).unwrap();
    for rank in 0..=4 {
        let p = rank_for_target(&s, &joint, Target::Rank(rank)).unwrap();
        assert_eq!(p.active_rank, rank);
    }
    let full = rank_for_target(&s, &joint, Target::RelevanceFraction(1.0 - 1e-9)).unwrap();
    assert_eq!(full.active_rank, 4);
    let half = rank_for_target(&s, &joint, Target::RelevanceFraction(0.5)).unwrap();
    assert!(gaussian_info(&half, &joint).unwrap().i_ty >= 0.5 * s.mutual_information());
    assert!(matches!(
        rank_for_target(&s, &joint, Target::RelevanceFraction(1.0)),
        Err(Error::Target(_))
    ));
}

#[test]
fn etf_rank_ten_keeps_almost_all_label_information() {
    let set = sample_mixture(&MixtureSpec {
        etf: EtfSpec::new(10, 64, 1.0),
        within_std: 0.3,
        samples_per_class: 500,
        seed: 1,
    })
    .unwrap();
    let joint = conditional_covariance(
        set.features(),
        Relevance::Labels(set.labels()),
        DEFAULT_REGULARIZATION,
    )
    .unwrap();
    let s = gib_spectrum(&joint).unwrap();
    let p = rank_for_target(&s, &joint, Target::Rank(10)).unwrap();
    let info = gaussian_info(&p, &joint).unwrap();
    let mi = s.mutual_information();
    assert!(info.i_ty >= 0.99 * mi, "{} of {mi}", info.i_ty);
}

fn planted_strategy() -> impl Strategy<Value = (Vec<f64>, u64)> {
    (2usize..7, any::<u64>()).prop_flat_map(|(d, seed)| {
        (proptest::collection::vec(0.01f64..0.99, d), Just(seed)).prop_map(|(mut l, seed)| {
            l.sort_by(f64::total_cmp);
            l.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            (l, seed)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn active_rank_is_step_function((lambdas, seed) in planted_strategy()) {
        let joint = planted(&lambdas, seed);
        let s = gib_spectrum(&joint).unwrap();
        let c = s.critical_betas();
        for (i, l) in lambdas.iter().enumerate() {
            prop_assert!((s.lambdas[i] - l).abs() < 1e-9);
            let below = projection_matrix(&s, c[i] * (1.0 - 1e-7)).unwrap();
            let above = projection_matrix(&s, c[i] * (1.0 + 1e-7)).unwrap();
            prop_assert_eq!(below.active_rank, i);
            prop_assert_eq!(above.active_rank, i + 1);
            // the newest dimension enters with a vanishing gain
            prop_assert!(above.alphas[i] < 1e-2 * above.alphas[0].max(1.0));
        }
        let grid = log_grid(0.5 * c[0], 4.0 * c[c.len() - 1], 40);
        let curve = information_curve(&s, &joint, &grid).unwrap();
        let mi = s.mutual_information();
        for w in curve.windows(2) {
            prop_assert!(w[1].i_ty >= w[0].i_ty - 1e-12);
            prop_assert!(w[1].i_tx >= w[0].i_tx - 1e-12);
        }
        for point in &curve {
            prop_assert!(0.0 <= point.i_ty && point.i_ty <= point.i_tx);
            prop_assert!(point.i_ty <= mi + 1e-12);
        }
    }

    #[test]
    fn info_is_basis_independent(seed in any::<u64>(), beta_scale in 1.01f64..20.0) {
        let joint = schur_joint(&random_xy(4, 3, seed), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let q = linalg::haar_frame(4, 4, &mut rng);
        let rotated = GaussianJoint::new(
            &q * joint.sigma_x() * q.transpose(),
            &q * joint.sigma_x_given_y() * q.transpose(),
            0.0,
        )
        .unwrap();
        let s = gib_spectrum(&joint).unwrap();
        let sr = gib_spectrum(&rotated).unwrap();
        let beta = s.critical_betas()[0] * beta_scale;
        let a = gaussian_info(&projection_matrix(&s, beta).unwrap(), &joint).unwrap();
        let b = gaussian_info(&projection_matrix(&sr, beta).unwrap(), &rotated).unwrap();
        prop_assert!((a.i_tx - b.i_tx).abs() < 1e-9 * a.i_tx.max(1.0));
        prop_assert!((a.i_ty - b.i_ty).abs() < 1e-9 * a.i_ty.max(1.0));
    }
}
