use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectral_copula::copula::population_covariance;
use spectral_copula::dgp::{eigen_paths, simulate_panel, stylized_r, Dgp, EigenPathSpec, StylizedDesign};
use spectral_copula::estimation::rank_pit;
use spectral_copula::CopulaShape;

fn off_diagonal(r: &DMatrix<f64>) -> Vec<f64> {
    let d = r.nrows();
    (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).map(|(i, j)| r[(i, j)]).collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn same_group_value_without_country_factor() {
    let r = stylized_r(&StylizedDesign::standard(0.0)).unwrap();
    let want = (0.75f64.powi(2) + 1.6f64.powi(2)) / (0.75f64.powi(2) + 1.6f64.powi(2) + 1.0);
    assert!((r[(0, 1)] - want).abs() < 1e-15);
    assert!((r[(0, 1)] - 0.757_428_744_693_753_9).abs() < 1e-12);
}

// population summaries of the full design from an independent numpy build
#[test]
fn design_summaries_match_reference() {
    let cases = [
        (0.0, 0.262_873_380_323_385_64, 0.144_712_219_714_099_17, 0.757_428_744_693_753_9, 27.151_011_94, 0.242_571_26),
        (0.75, 0.272_510_520_226_412_64, 0.127_797_952_435_889_2, 0.739_311_311_865_177_3, 28.089_822_64, 0.218_274_4),
        (1.5, 0.288_911_718_207_601_86, 0.095_691_212_446_001_33, 0.716_844_115_906_714_7, 29.828_436_09, 0.159_857_66),
    ];
    for (bc, mean, min, max, top, bottom) in cases {
        let r = stylized_r(&StylizedDesign::standard(bc)).unwrap();
        let off = off_diagonal(&r);
        let m = off.iter().sum::<f64>() / off.len() as f64;
        assert!((m - mean).abs() < 1e-12, "beta_c={bc}");
        assert!((off.iter().copied().fold(f64::INFINITY, f64::min) - min).abs() < 1e-12);
        assert!((off.iter().copied().fold(f64::NEG_INFINITY, f64::max) - max).abs() < 1e-12);
        let ev = r.symmetric_eigenvalues();
        assert!((ev.max() - top).abs() < 1e-7);
        assert!((ev.min() - bottom).abs() < 1e-7);
    }
}

#[test]
fn design_is_symmetric_unit_diagonal_and_pd() {
    for bc in [0.0, 0.75, 1.5] {
        let r = stylized_r(&StylizedDesign::standard(bc)).unwrap();
        assert_eq!(r, r.transpose());
        assert!(r.diagonal().iter().all(|v| *v == 1.0));
        assert!(r.clone().symmetric_eigenvalues().min() > 0.0);
    }
}

#[test]
fn exact_group_structure_without_country_factor() {
    let design = StylizedDesign::standard(0.0);
    let r = stylized_r(&design).unwrap();
    for g in 1..=10 {
        let members: Vec<usize> = (0..100).filter(|&i| design.group(i) == g).collect();
        let v = r[(members[0], members[1])];
        for &i in &members {
            for &j in &members {
                if i != j {
                    assert_eq!(r[(i, j)], v);
                }
            }
        }
    }
}

#[test]
fn invalid_designs_are_rejected() {
    let mut d = StylizedDesign::standard(0.5);
    d.beta_market = -1.0;
    assert!(stylized_r(&d).is_err());
    let zero = StylizedDesign { beta_market: 0.0, beta_group: vec![0.0; 2], beta_country: 0.0, beta_idio: 0.0, n_countries: 2 };
    assert!(stylized_r(&zero).is_err());
    // idiosyncratic loading zero with a single country: rank-deficient
    let singular = StylizedDesign { beta_market: 1.0, beta_group: vec![0.0], beta_country: 0.0, beta_idio: 0.0, n_countries: 3 };
    assert!(stylized_r(&singular).is_err());
}

#[test]
fn periodic_and_static_paths() {
    let lambda = [6.0, 3.0, 0.5, 0.5];
    let horizon = 400;
    let p = eigen_paths(&EigenPathSpec::Periodic { horizon }, &lambda, horizon).unwrap();
    assert_eq!(p[(0, 0)], 6.0);
    assert_eq!(p[(0, 1)], 4.5);
    let min = p.column(0).min();
    assert!((min - 3.0).abs() < 1e-12, "min {min}");
    assert!(p.iter().all(|v| *v > 0.0));
    let s = eigen_paths(&EigenPathSpec::Static, &lambda, 7).unwrap();
    assert!((1..7).all(|t| s.row(t) == s.row(0)));
    assert!(eigen_paths(&EigenPathSpec::Static, &[1.0, -1.0], 3).is_err());
}

#[test]
fn independence_gives_uniform_uncorrelated_pits() {
    let d = 5;
    let dgp = Dgp::from_correlation(&DMatrix::identity(d, d), EigenPathSpec::Static).unwrap();
    let shape = CopulaShape::student_t(8.0, d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let panel = simulate_panel(&mut rng, &dgp, &shape, 20_000).unwrap();
    let n = panel.pits.nrows() as f64;
    for j in 0..d {
        let mut col: Vec<f64> = panel.pits.column(j).iter().copied().collect();
        col.sort_by(f64::total_cmp);
        let ks = col.iter().enumerate().map(|(k, u)| ((k as f64 + 1.0) / n - u).abs().max((u - k as f64 / n).abs())).fold(0.0, f64::max);
        // 1.63 / sqrt(n) is the 1% Kolmogorov critical value
        assert!(ks < 1.63 / n.sqrt(), "column {j}: KS {ks}");
    }
    let ranks = rank_pit(&panel.pits);
    for i in 0..d {
        for j in 0..i {
            let a: Vec<f64> = ranks.column(i).iter().copied().collect();
            let b: Vec<f64> = ranks.column(j).iter().copied().collect();
            assert!(pearson(&a, &b).abs() < 4.0 / n.sqrt());
        }
    }
}

#[test]
fn simulation_is_seed_deterministic() {
    let r = stylized_r(&StylizedDesign::new(3, 3, 1.5)).unwrap();
    let dgp = Dgp::from_correlation(&r, EigenPathSpec::ScoreDriven { a: vec![0.1], b: vec![0.9] }).unwrap();
    let shape = CopulaShape::skew_t(25.0, -0.25, 9).unwrap();
    let a = simulate_panel(&mut ChaCha8Rng::seed_from_u64(9), &dgp, &shape, 200).unwrap();
    let b = simulate_panel(&mut ChaCha8Rng::seed_from_u64(9), &dgp, &shape, 200).unwrap();
    assert_eq!(a.pits, b.pits);
    assert_eq!(a.lambda_path, b.lambda_path);
    let (head, tail) = a.split(150);
    assert_eq!((head.pits.nrows(), tail.pits.nrows()), (150, 50));
    assert_eq!(tail.ystar.row(0), a.ystar.row(150));
}

#[test]
fn score_driven_paths_are_persistent() {
    let design = StylizedDesign::new(5, 5, 1.5);
    let r = stylized_r(&design).unwrap();
    let dgp = Dgp::from_correlation(&r, EigenPathSpec::ScoreDriven { a: vec![0.1, 0.1], b: vec![0.9, 0.9] }).unwrap();
    let shape = CopulaShape::skew_t(25.0, -0.25, 25).unwrap();
    let mut acs = Vec::new();
    for rep in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
        let panel = simulate_panel(&mut rng, &dgp, &shape, 1000).unwrap();
        let f: Vec<f64> = panel.lambda_path.column(0).iter().map(|l| l.ln()).collect();
        assert_eq!(f[0], dgp.anchor[0]);
        acs.push(pearson(&f[..999], &f[1..]));
        // dimensions beyond d0 stay at the targets
        assert!(panel.lambda_path.column(4).iter().all(|l| (l - dgp.lambda()[4]).abs() < 1e-12));
    }
    let mean = acs.iter().sum::<f64>() / acs.len() as f64;
    assert!(mean > 0.85 && mean < 0.99, "mean lag-1 autocorrelation {mean}");
}

#[test]
fn simulated_covariance_matches_mixture_moments() {
    let design = StylizedDesign::new(5, 2, 0.75);
    let r = stylized_r(&design).unwrap();
    let shape = CopulaShape::skew_t(12.0, -0.25, 10).unwrap();
    let dgp = Dgp::from_correlation(&r, EigenPathSpec::Static).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 100_000;
    let y = simulate_panel(&mut rng, &dgp, &shape, n).unwrap().ystar;
    let want = population_covariance(&r, &shape).unwrap();
    let mean = DVector::from_fn(10, |j, _| y.column(j).mean());
    for i in 0..10 {
        for j in 0..=i {
            let prods: Vec<f64> = (0..n).map(|t| (y[(t, i)] - mean[i]) * (y[(t, j)] - mean[j])).collect();
            let m = prods.iter().sum::<f64>() / n as f64;
            let sd = (prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
            assert!((m - want[(i, j)]).abs() < 4.0 * sd, "({i},{j}): {m} vs {} (sd {sd})", want[(i, j)]);
        }
    }
}
