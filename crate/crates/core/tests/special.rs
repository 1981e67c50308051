use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectral_copula::special::{k_prime, log_bessel_k, sample_inverse_gamma, SkewTMarginal};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma, StudentsT};

// Reference values from tests/oracles/special_oracles.py (mpmath, 40 digits).
const LOG_K: &[(f64, f64, f64)] = &[
    (52.0, 300.0, -298.1384067347620438),
    (0.5, 1.0, -0.77420864735527256764),
    (1.5, 2.0, -1.7153171295270808404),
    (600.0, 1e-6, 11940.379901658132179),
    (600.0, 1e5, -100003.73068702951633),
    (0.5, 1e5, -100005.53067137984039),
    (0.5, 1e-6, 7.133545631626864507),
    (13.0, 1.25, 25.371610369661588009),
    (62.5, 3.7, 155.60272390589646028),
    (3.3, 0.7, 3.706077398089767767),
    (0.1, 0.01, 1.5962849927341205809),
    (250.0, 40.0, 377.29628785766113908),
    (0.0, 1.0, -0.8650643989067880968),
    (1.0, 1e-3, 6.907751517131146853),
    (100.0, 100.0, -55.534227715029214314),
    (12.5, 0.05, 64.152139160115267178),
];

#[test]
fn log_bessel_k_matches_reference() {
    for &(v, x, want) in LOG_K {
        let got = log_bessel_k(v, x).unwrap();
        let rel = (got - want).abs() / want.abs().max(1e-300);
        assert!(rel <= 1e-10, "K_{v}({x}): got {got}, want {want}, rel {rel:e}");
    }
}

#[test]
fn log_bessel_k_closed_forms() {
    let pi = std::f64::consts::PI;
    let a = log_bessel_k(0.5, 1.0).unwrap();
    assert!((a - ((pi / 2.0).sqrt() * (-1.0f64).exp()).ln()).abs() < 1e-14);
    let b = log_bessel_k(1.5, 2.0).unwrap();
    assert!((b - ((pi / 4.0).sqrt() * (-2.0f64).exp() * 1.5).ln()).abs() < 1e-14);
}

#[test]
fn k_prime_reference_points() {
    assert!((k_prime(0.5, 3.0).unwrap() + 1.0).abs() < 1e-13);
    let want = -0.25744343047829055361;
    let got = k_prime(10.0, 5.0).unwrap();
    assert!((got - want).abs() < 1e-12 * want.abs(), "{got}");
    // central difference of the log-Bessel composition
    let h = 1e-5;
    let g = |x: f64| 10.0 * x.ln() + log_bessel_k(10.0, x).unwrap();
    let fd = (g(5.0 + h) - g(5.0 - h)) / (2.0 * h);
    assert!((got - fd).abs() < 1e-8);
    assert!((k_prime(50.0, 1e4).unwrap() + 1.0).abs() < 1e-2);
}

#[test]
fn k_prime_matches_finite_differences_on_random_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    use rand::Rng;
    for _ in 0..100 {
        let v: f64 = rng.random_range(0.5..80.0);
        let x: f64 = 10f64.powf(rng.random_range(-2.0..3.0));
        // d ln K_v / dx = k_prime - v/x
        let h = 1e-5 * x;
        let g = |t: f64| log_bessel_k(v, t).unwrap();
        let fd = (g(x + h) - g(x - h)) / (2.0 * h);
        let an = k_prime(v, x).unwrap() - v / x;
        let rel = (an - fd).abs() / an.abs();
        assert!(rel < 1e-6, "v={v} x={x}: {an} vs {fd}");
    }
}

#[test]
fn skewt_integrates_to_one() {
    let m = SkewTMarginal::new(25.0, -0.25).unwrap();
    let total = spectral_copula::special::integrate(|y| m.pdf(y), -60.0, 60.0, 1e-14, 1e-13);
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn skewt_cdf_reference_values() {
    let cases = [
        (25.0, -0.25, 0.0, 0.60165433995735750175),
        (25.0, -0.25, 1.0, 0.8927488083569136364),
        (5.0, 0.25, -2.0, 0.023205346584790273645),
    ];
    for (nu, g, y, want) in cases {
        let m = SkewTMarginal::new(nu, g).unwrap();
        let got = m.cdf(y);
        assert!((got - want).abs() < 1e-9, "nu={nu} g={g} y={y}: {got} vs {want}");
    }
}

#[test]
fn skewt_quantile_reference_values() {
    let m = SkewTMarginal::new(25.0, -0.25).unwrap();
    let q = m.quantile(0.01).unwrap();
    assert!((q - -2.818356910375702908).abs() < 1e-8, "{q}");
    let q = m.quantile(0.9).unwrap();
    assert!((q - 1.0416802674987699501).abs() < 1e-8, "{q}");
    let t = SkewTMarginal::new(25.0, 0.0).unwrap();
    let q = t.quantile(0.975).unwrap();
    assert!((q - 2.0595385527532977489).abs() < 1e-8, "{q}");
}

#[test]
fn cdf_matches_mixture_monte_carlo() {
    // y = v*gamma + sqrt(v)*z, v ~ IG(nu/2, nu/2)
    let (nu, g) = (25.0, -0.25);
    let n = 400_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = sample_inverse_gamma(&mut rng, nu / 2.0, nu / 2.0, n).unwrap();
    use rand_distr::{Distribution, StandardNormal};
    let hits = v
        .iter()
        .filter(|&&vi| {
            let z: f64 = StandardNormal.sample(&mut rng);
            vi * g + vi.sqrt() * z <= 0.0
        })
        .count();
    let p = hits as f64 / n as f64;
    let want = SkewTMarginal::new(nu, g).unwrap().cdf(0.0);
    let se = (want * (1.0 - want) / n as f64).sqrt();
    assert!((p - want).abs() < 3.0 * se, "{p} vs {want}");
}

#[test]
fn symmetric_case_is_student_t() {
    for &nu in &[3.0, 5.0, 25.0, 200.0] {
        let m = SkewTMarginal::new(nu, 0.0).unwrap();
        let t = StudentsT::new(0.0, 1.0, nu).unwrap();
        for k in 0..=200 {
            let y = -10.0 + 0.1 * k as f64;
            assert!((m.logpdf(y) - t.ln_pdf(y)).abs() < 1e-10, "nu={nu} y={y}");
        }
        assert!((m.logpdf(0.0) - t.ln_pdf(0.0)).abs() < 1e-12);
    }
}

#[test]
fn cdf_monotone_and_quantile_round_trip_on_grid() {
    for &nu in &[5.0, 10.0, 25.0, 50.0, 200.0] {
        for &g in &[-0.5, -0.25, 0.0, 0.25] {
            let m = SkewTMarginal::new(nu, g).unwrap();
            let lo = m.quantile(1e-6).unwrap();
            let hi = m.quantile(1.0 - 1e-6).unwrap();
            let mut prev = -1.0;
            for k in 0..200 {
                let y = lo + (hi - lo) * k as f64 / 199.0;
                let c = m.cdf(y);
                assert!(c > prev, "nu={nu} g={g}: cdf not increasing at {y}");
                prev = c;
            }
            for k in 1..100 {
                let u = k as f64 / 100.0;
                let y = m.quantile(u).unwrap();
                assert!((m.cdf(y) - u).abs() <= 1e-8, "nu={nu} g={g} u={u}");
            }
            for &u in &[1e-6, 1e-4, 0.999, 1.0 - 1e-6] {
                let y = m.quantile(u).unwrap();
                assert!((m.cdf(y) - u).abs() <= 1e-8, "nu={nu} g={g} u={u}");
            }
        }
    }
}

#[test]
fn inverse_gamma_moments_and_ks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let v = sample_inverse_gamma(&mut rng, 12.5, 12.5, n).unwrap();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = 25.0f64.powi(2) / (23.0f64.powi(2) * 21.0);
    assert!((mean - 25.0 / 23.0).abs() < 4.0 * (var / n as f64).sqrt(), "{mean}");

    // 1/v ~ Gamma(12.5, rate 12.5)
    let law = Gamma::new(12.5, 12.5).unwrap();
    let mut w: Vec<f64> = v.iter().take(20_000).map(|x| 1.0 / x).collect();
    w.sort_by(f64::total_cmp);
    let m = w.len() as f64;
    let ks = w
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = law.cdf(x);
            (c - i as f64 / m).abs().max(((i + 1) as f64 / m - c).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.628 / m.sqrt(), "KS statistic {ks}");

    let heavy = sample_inverse_gamma(&mut rng, 2.05, 2.05, 100_000).unwrap();
    assert!(heavy.iter().all(|&x| x > 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn quantile_inverts_cdf(nu in 4.5f64..150.0, g in -0.6f64..0.6, u in 1e-5f64..(1.0 - 1e-5)) {
        let m = SkewTMarginal::new(nu, g).unwrap();
        let y = m.quantile(u).unwrap();
        prop_assert!((m.cdf(y) - u).abs() <= 1e-8);
    }

    #[test]
    fn log_bessel_k_satisfies_recurrence(v in 0.5f64..200.0, x in 1e-3f64..500.0) {
        // K_{v+1} = K_{v-1} + (2v/x) K_v
        let a = log_bessel_k(v - 1.0, x).unwrap();
        let b = log_bessel_k(v, x).unwrap();
        let c = log_bessel_k(v + 1.0, x).unwrap();
        let rhs = (a - c).exp() + (2.0 * v / x) * (b - c).exp();
        prop_assert!((rhs - 1.0).abs() < 1e-10);
    }
}
