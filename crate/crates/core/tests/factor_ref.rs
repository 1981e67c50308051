use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectral_copula::copula::{copula_logdensity_ystar, transform_pits};
use spectral_copula::dgp::{simulate_panel, stylized_r, Dgp, EigenPathSpec, StylizedDesign};
use spectral_copula::estimation::rank_pit;
use spectral_copula::factor_ref::{
    compare_first_factor, evaluate_factor_oos, factor_filter, factor_r, first_vector_alignment, fit_factor_copula,
    ClusterAssignment, FactorFitOptions, FactorLoadings, FactorParams,
};
use spectral_copula::{CopulaFamily, CopulaShape, SpectralBasis, SpectralState};

fn static_params(l: &FactorLoadings, nu: f64, gamma: f64) -> FactorParams {
    FactorParams {
        omega_market: l.market.clone(),
        omega_cluster: l.cluster.clone(),
        alpha_market: 0.0,
        beta_market: 0.0,
        alpha_cluster: 0.0,
        beta_cluster: 0.0,
        nu,
        gamma,
    }
}

fn simulate(r: &DMatrix<f64>, shape: &CopulaShape, t: usize, seed: u64) -> DMatrix<f64> {
    let dgp = Dgp::from_correlation(r, EigenPathSpec::Static).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_panel(&mut rng, &dgp, shape, t).unwrap().pits
}

#[test]
fn zero_loadings_give_identity() {
    let a = ClusterAssignment::new(&[1, 2, 2, 3, 1]).unwrap();
    let r = factor_r(&FactorLoadings::zeros(3), &a).unwrap();
    assert_eq!(r, DMatrix::identity(5, 5));
}

#[test]
fn single_group_unit_cluster_loading() {
    let a = ClusterAssignment::new(&[1, 1, 1]).unwrap();
    let l = FactorLoadings { market: vec![0.0], cluster: vec![1.0] };
    let r = factor_r(&l, &a).unwrap();
    assert!((r[(0, 1)] - 0.5).abs() < 1e-15);
    assert!((r[(1, 2)] - 0.5).abs() < 1e-15);
}

#[test]
fn cross_group_uses_market_loadings_only() {
    let a = ClusterAssignment::new(&[1, 1, 2, 2]).unwrap();
    let l = FactorLoadings { market: vec![0.7, -1.3], cluster: vec![2.0, 0.4] };
    let r = factor_r(&l, &a).unwrap();
    let (m1, _) = l.normalized(0);
    let (m2, _) = l.normalized(1);
    assert!((r[(0, 2)] - m1 * m2).abs() < 1e-15);
    assert!((r[(1, 3)] - m1 * m2).abs() < 1e-15);
}

#[test]
fn assignment_rejects_empty_group() {
    assert!(ClusterAssignment::new(&[1, 3, 3]).is_err());
    assert!(ClusterAssignment::new(&[0, 1]).is_err());
    assert!(ClusterAssignment::new(&[]).is_err());
}

#[test]
fn cluster_csv_with_header_and_reordering() {
    let text = "asset_id,group_id\nB,2\nA,1\n# note\nC,2\n";
    let a = ClusterAssignment::from_csv(text, None).unwrap();
    assert_eq!(a.labels(), vec![2, 1, 2]);
    let names: Vec<String> = ["A", "C", "B"].iter().map(|s| s.to_string()).collect();
    let b = ClusterAssignment::from_csv(text, Some(&names)).unwrap();
    assert_eq!(b.labels(), vec![1, 2, 2]);
    let missing: Vec<String> = vec!["Z".into()];
    assert!(ClusterAssignment::from_csv(text, Some(&missing)).is_err());
    assert!(ClusterAssignment::from_csv("A,1\nB,x\n", None).is_err());
}

#[test]
fn alignment_edge_cases() {
    assert!((first_vector_alignment(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
    assert!((first_vector_alignment(&[1.0, 2.0, 3.0], &[-2.0, -4.0, -6.0]) - 1.0).abs() < 1e-15);
    assert_eq!(first_vector_alignment(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factor_r_is_a_correlation_matrix(
        labels in prop::collection::vec(1usize..4, 3..12),
        raw in prop::collection::vec(-3.0f64..3.0, 6),
    ) {
        let mut labels = labels;
        // every group used
        for g in 1..=3 { if !labels.contains(&g) { labels.push(g); } }
        let a = ClusterAssignment::new(&labels).unwrap();
        let l = FactorLoadings { market: raw[..3].to_vec(), cluster: raw[3..].to_vec() };
        let r = factor_r(&l, &a).unwrap();
        for i in 0..r.nrows() {
            prop_assert_eq!(r[(i, i)], 1.0);
            for j in 0..r.ncols() {
                prop_assert_eq!(r[(i, j)], r[(j, i)]);
                if a.group(i) != a.group(j) {
                    let (mi, _) = l.normalized(a.group(i));
                    let (mj, _) = l.normalized(a.group(j));
                    prop_assert!((r[(i, j)] - mi * mj).abs() < 1e-15);
                }
            }
        }
        prop_assert!(r.symmetric_eigenvalues().min() >= -1e-12);
    }
}

#[test]
fn static_filter_matches_dense_density() {
    let a = ClusterAssignment::new(&[1, 1, 2, 2, 2, 3, 3]).unwrap();
    let l = FactorLoadings { market: vec![0.9, 0.5, -0.4], cluster: vec![0.6, 1.2, 0.3] };
    let r = factor_r(&l, &a).unwrap();
    let (basis, lambda) = SpectralBasis::from_symmetric(&r).unwrap();
    let state = SpectralState::from_eigenvalues(Arc::new(basis), &lambda).unwrap();
    for (family, nu, gamma) in
        [(CopulaFamily::Gaussian, f64::INFINITY, 0.0), (CopulaFamily::StudentT, 8.0, 0.0), (CopulaFamily::SkewT, 12.0, -0.3)]
    {
        let p = static_params(&l, nu, gamma);
        let shape = p.shape(family, 7).unwrap();
        let pits = simulate(&r, &shape, 40, 3);
        let panel = transform_pits(&shape, &pits).unwrap();
        let out = factor_filter(&p, &a, &shape, &panel, false, l.clone()).unwrap();
        for t in 0..40 {
            let y = panel.ystar.row(t).transpose();
            let want = copula_logdensity_ystar(&shape, &state, &y, panel.marginal_logpdf[t]).unwrap();
            assert!((out.per_obs_loglik[t] - want).abs() < 1e-9, "{family}: t={t} {} vs {want}", out.per_obs_loglik[t]);
        }
    }
}

#[test]
fn dynamic_filter_with_zero_alpha_is_static() {
    let a = ClusterAssignment::new(&[1, 1, 2, 2]).unwrap();
    let l = FactorLoadings { market: vec![0.8, 0.6], cluster: vec![0.5, 0.9] };
    let beta = 0.9;
    let mut p = static_params(&l, 15.0, -0.2);
    p.omega_market = l.market.iter().map(|v| v * (1.0 - beta)).collect();
    p.omega_cluster = l.cluster.iter().map(|v| v * (1.0 - beta)).collect();
    p.beta_market = beta;
    p.beta_cluster = beta;
    let shape = p.shape(CopulaFamily::SkewT, 4).unwrap();
    let pits = simulate(&factor_r(&l, &a).unwrap(), &shape, 30, 5);
    let panel = transform_pits(&shape, &pits).unwrap();
    let dynamic = factor_filter(&p, &a, &shape, &panel, true, p.unconditional()).unwrap();
    let fixed = factor_filter(&static_params(&l, 15.0, -0.2), &a, &shape, &panel, false, l.clone()).unwrap();
    assert!((dynamic.loglik - fixed.loglik).abs() < 1e-9 * fixed.loglik.abs().max(1.0));
}

#[test]
fn dynamic_loadings_move_with_positive_alpha() {
    let a = ClusterAssignment::new(&[1, 1, 1, 2, 2, 2]).unwrap();
    let l = FactorLoadings { market: vec![0.8, 0.6], cluster: vec![0.5, 0.9] };
    let mut p = static_params(&l, 15.0, 0.0);
    p.alpha_market = 0.05;
    p.alpha_cluster = 0.05;
    p.beta_market = 0.9;
    p.beta_cluster = 0.9;
    p.omega_market = l.market.iter().map(|v| v * 0.1).collect();
    p.omega_cluster = l.cluster.iter().map(|v| v * 0.1).collect();
    let shape = p.shape(CopulaFamily::StudentT, 6).unwrap();
    let pits = simulate(&factor_r(&l, &a).unwrap(), &shape, 50, 8);
    let panel = transform_pits(&shape, &pits).unwrap();
    let out = factor_filter(&p, &a, &shape, &panel, true, p.unconditional()).unwrap();
    assert!(out.state_next.market.iter().zip(&l.market).any(|(x, y)| (x - y).abs() > 1e-4));
}

#[test]
fn independence_panel_gives_small_loadings() {
    let a = ClusterAssignment::new(&[1, 1, 1, 1, 2, 2, 2, 2]).unwrap();
    let shape = CopulaShape::gaussian(8);
    let pits = rank_pit(&simulate(&DMatrix::identity(8, 8), &shape, 1000, 11));
    let fit = fit_factor_copula(&pits, &a, CopulaFamily::Gaussian, false, &FactorFitOptions::default()).unwrap();
    let r = fit.correlation().unwrap();
    let off = r.iter().zip(DMatrix::<f64>::identity(8, 8).iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(off < 0.12, "largest off-diagonal {off}");
    assert!(fit.loglik_in.abs() < 15.0, "loglik {}", fit.loglik_in);
}

#[test]
fn static_fit_recovers_within_group_correlation() {
    // 4 groups x 4 countries, exact group structure
    let design = StylizedDesign::new(4, 4, 0.0);
    let r = stylized_r(&design).unwrap();
    let a = ClusterAssignment::new(&design.groups()).unwrap();
    let shape = CopulaShape::skew_t(25.0, -0.25, 16).unwrap();
    let pits = rank_pit(&simulate(&r, &shape, 1000, 21));
    let fit = fit_factor_copula(&pits, &a, CopulaFamily::SkewT, false, &FactorFitOptions::default()).unwrap();
    let rf = fit.correlation().unwrap();
    // Fisher-z standard error of a correlation at T = 1000 is about (1 - rho^2)/sqrt(T)
    for g in 0..4 {
        let (i, j) = (4 * g, 4 * g + 1);
        let se = (1.0 - r[(i, j)].powi(2)) / 1000f64.sqrt();
        assert!((rf[(i, j)] - r[(i, j)]).abs() < 3.0 * se, "group {g}: {} vs {}", rf[(i, j)], r[(i, j)]);
    }
    let oos = evaluate_factor_oos(&fit, &pits).unwrap();
    assert!((oos.loglik - fit.loglik_in).abs() < 1e-8 * fit.loglik_in.abs());
}

#[test]
fn first_factor_matches_leading_eigenvector_on_factor_data() {
    let a = ClusterAssignment::new(&[1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3]).unwrap();
    let l = FactorLoadings { market: vec![1.2, 0.9, 1.0], cluster: vec![0.6, 0.8, 0.4] };
    let r = factor_r(&l, &a).unwrap();
    let shape = CopulaShape::student_t(20.0, 12).unwrap();
    let pits = rank_pit(&simulate(&r, &shape, 1000, 31));
    let fit = fit_factor_copula(&pits, &a, CopulaFamily::StudentT, false, &FactorFitOptions::default()).unwrap();
    let (basis, _) = SpectralBasis::from_symmetric(&r).unwrap();
    let ip = compare_first_factor(&fit, &basis).unwrap();
    assert!(ip > 0.99, "inner product {ip}");
}

#[test]
fn dynamic_fit_improves_on_static() {
    let a = ClusterAssignment::new(&[1, 1, 1, 2, 2, 2]).unwrap();
    let l = FactorLoadings { market: vec![0.9, 0.7], cluster: vec![0.6, 0.5] };
    let shape = CopulaShape::gaussian(6);
    let pits = rank_pit(&simulate(&factor_r(&l, &a).unwrap(), &shape, 400, 41));
    let st = fit_factor_copula(&pits, &a, CopulaFamily::Gaussian, false, &FactorFitOptions::default()).unwrap();
    let beta = 0.9;
    let mut warm = st.params.clone();
    warm.omega_market.iter_mut().for_each(|w| *w *= 1.0 - beta);
    warm.omega_cluster.iter_mut().for_each(|w| *w *= 1.0 - beta);
    warm.alpha_market = 0.01;
    warm.alpha_cluster = 0.01;
    warm.beta_market = beta;
    warm.beta_cluster = beta;
    let opts = FactorFitOptions { warm_start: Some(warm), ..FactorFitOptions::default() };
    let dy = fit_factor_copula(&pits, &a, CopulaFamily::Gaussian, true, &opts).unwrap();
    assert!(dy.loglik_in >= st.loglik_in - 1e-3, "{} < {}", dy.loglik_in, st.loglik_in);
    assert_eq!(dy.n_params(), st.n_params() + 4);
    let oos = evaluate_factor_oos(&dy, &pits.rows(0, 50).into_owned()).unwrap();
    assert_eq!(oos.per_obs_loglik.len(), 50);
    assert!(oos.loglik.is_finite());
}
