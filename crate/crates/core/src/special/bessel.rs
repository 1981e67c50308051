//! Modified Bessel function of the second kind, evaluated in log space.
//!
//! The base order `mu` in `[-1/2, 1/2]` is obtained from Temme's series for
//! `x < 2` and from Steed's continued fraction (CF2) otherwise. The requested
//! order is then reached by the forward recurrence
//! `K_{v+1}(x) = (2v/x) K_v(x) + K_{v-1}(x)`, carried as the ratio
//! `r_v = K_{v+1}/K_v`; the ratios are multiplied together and only the product is logged.
//! Forward recurrence is the stable direction for `K`, and every term of the
//! ratio recurrence is positive, so there is no cancellation.

use crate::error::{CopulaError, Result};

const TEMME_SWITCH: f64 = 2.0;
const MAX_ITER: usize = 20_000;

// Chebyshev expansions of Temme's gamma auxiliaries on [-1, 1].
const G1_CHEB: [f64; 14] = [
    -1.145_164_083_662_683_1,
    0.006_360_853_113_470_843,
    0.001_862_451_930_072_068_5,
    0.000_152_833_085_873_453_5,
    0.000_017_017_464_011_802_04,
    -6.459_750_292_334_725e-7,
    -5.181_984_843_251_938e-8,
    4.518_909_289_485_818e-10,
    3.243_322_737_102_087e-11,
    6.830_943_402_494_752e-13,
    2.835_350_275_517_21e-14,
    -7.988_390_576_932_359e-16,
    -3.372_667_730_077_195e-17,
    -3.658_633_480_921_052e-20,
];

const G2_CHEB: [f64; 15] = [
    1.882_645_524_949_671_8,
    -0.077_490_658_396_167_52,
    -0.018_256_714_847_324_93,
    0.000_633_803_020_907_489_6,
    0.000_076_229_054_350_872_9,
    -9.550_164_756_172_044e-7,
    -8.892_726_810_788_635e-8,
    -1.952_133_477_231_961_4e-9,
    -9.400_305_273_588_516e-11,
    4.687_513_384_953_239e-12,
    2.265_853_574_692_576e-13,
    -1.172_550_969_848_801_5e-15,
    -7.044_133_820_024_522e-17,
    -2.437_787_831_010_769_4e-18,
    -7.522_524_321_825_39e-20,
];

fn chebyshev(coeffs: &[f64], x: f64) -> f64 {
    let y2 = 2.0 * x;
    let (mut d, mut dd) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let tmp = d;
        d = y2 * d - dd + c;
        dd = tmp;
    }
    x * d - dd + 0.5 * coeffs[0]
}

/// Returns `(1/Gamma(1+mu), 1/Gamma(1-mu), gamma1, gamma2)` for `|mu| <= 1/2`.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    let t = 4.0 * mu.abs() - 1.0;
    let g1 = chebyshev(&G1_CHEB, t);
    let g2 = chebyshev(&G2_CHEB, t);
    let inv_gamma_1mmu = g2 + mu * g1;
    let inv_gamma_1pmu = g2 - mu * g1;
    (inv_gamma_1pmu, inv_gamma_1mmu, g1, g2)
}

/// Temme's series: `(ln K_mu(x), K_{mu+1}(x)/K_mu(x))` for `x < 2`, `|mu| <= 1/2`.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let ln_half_x = half_x.ln();
    let half_x_mu = (mu * ln_half_x).exp();
    let pi_mu = std::f64::consts::PI * mu;
    let sigma = -mu * ln_half_x;
    let sinrat = if pi_mu.abs() < f64::EPSILON { 1.0 } else { pi_mu / pi_mu.sin() };
    let sinhrat = if sigma.abs() < f64::EPSILON { 1.0 } else { sigma.sinh() / sigma };

    let (inv_g1p, inv_g1m, g1, g2) = temme_gamma(mu);
    let mut fk = sinrat * (sigma.cosh() * g1 - sinhrat * ln_half_x * g2);
    let mut pk = 0.5 / half_x_mu / inv_g1p;
    let mut qk = 0.5 * half_x_mu / inv_g1m;
    let mut ck = 1.0;
    let mut sum0 = fk;
    let mut sum1 = pk;
    for k in 1..MAX_ITER {
        let kf = k as f64;
        fk = (kf * fk + pk + qk) / (kf * kf - mu * mu);
        ck *= half_x * half_x / kf;
        pk /= kf - mu;
        qk /= kf + mu;
        let hk = -kf * fk + pk;
        let del0 = ck * fk;
        sum0 += del0;
        sum1 += ck * hk;
        if del0.abs() < 0.5 * sum0.abs() * f64::EPSILON {
            break;
        }
    }
    let k_mu = sum0;
    let k_mup1 = sum1 * 2.0 / x;
    (k_mu.ln(), k_mup1 / k_mu)
}

/// Steed's CF2 (Temme's form): `(ln K_mu(x), K_{mu+1}(x)/K_mu(x))` for `x >= 2`.
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut bi = 2.0 * (1.0 + x);
    let mut di = 1.0 / bi;
    let mut delhi = di;
    let mut hi = di;
    let mut qi = 0.0;
    let mut qip1 = 1.0;
    let mut ai = -(0.25 - mu * mu);
    let a1 = ai;
    let mut ci = -ai;
    let mut bqi = -ai;
    let mut s = 1.0 + bqi * delhi;
    for i in 2..MAX_ITER {
        ai -= 2.0 * (i - 1) as f64;
        ci = -ai * ci / i as f64;
        let tmp = (qi - bi * qip1) / ai;
        qi = qip1;
        qip1 = tmp;
        bqi += ci * qip1;
        bi += 2.0;
        di = 1.0 / (bi + ai * di);
        delhi = (bi * di - 1.0) * delhi;
        hi += delhi;
        let dels = bqi * delhi;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    hi *= -a1;
    let ln_k = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - s.ln() - x;
    let ratio = (mu + x + 0.5 - hi) / x;
    (ln_k, ratio)
}

fn base(mu: f64, x: f64) -> (f64, f64) {
    if x < TEMME_SWITCH {
        temme_series(mu, x)
    } else {
        steed_cf2(mu, x)
    }
}

fn check_args(order: f64, x: f64) -> Result<()> {
    if !order.is_finite() {
        return Err(CopulaError::domain(format!("Bessel order must be finite, got {order}")));
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(CopulaError::domain(format!("Bessel argument must be finite and > 0, got {x}")));
    }
    Ok(())
}

/// `ln K_v(x)` together with `K_{v-1}(x) / K_v(x)`.
///
/// The second value is what the score needs: `d/dx ln(x^v K_v(x)) = -K_{v-1}/K_v`.
pub fn log_bessel_k_with_ratio(order: f64, x: f64) -> Result<(f64, f64)> {
    check_args(order, x)?;
    let v = order.abs();
    if v < 0.5 {
        // K_{v-1} = K_{1-v}: start the base at -v so the "upper" neighbour is the one we need.
        let (ln_k, up) = base(-v, x);
        return Ok((ln_k, up));
    }
    let n = (v + 0.5).floor() as usize;
    let mu = v - n as f64;
    let (mut ln_k, mut r) = base(mu, x);
    let mut lower = 0.0;
    let mut prod = 1.0;
    for k in 0..n {
        prod *= r;
        if prod > 1e250 {
            ln_k += prod.ln();
            prod = 1.0;
        }
        lower = 1.0 / r;
        r = 2.0 * (mu + k as f64 + 1.0) / x + lower;
    }
    Ok((ln_k + prod.ln(), lower))
}

/// `ln K_order(x)`.
pub fn log_bessel_k(order: f64, x: f64) -> Result<f64> {
    log_bessel_k_with_ratio(order, x).map(|(l, _)| l)
}

/// `d/dx ln(x^order K_order(x)) = order/x + K'_order(x)/K_order(x)`.
///
/// With `K'_v = -(K_{v+1} + K_{v-1})/2` and the three-term recurrence this
/// collapses to `-K_{v-1}(x)/K_v(x)`, which tends to -1 as `x` grows.
pub fn k_prime(order: f64, x: f64) -> Result<f64> {
    log_bessel_k_with_ratio(order, x).map(|(_, lower)| -lower)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_integer_closed_forms() {
        let got = log_bessel_k(0.5, 1.0).unwrap();
        let want = ((PI / 2.0).sqrt() * (-1.0f64).exp()).ln();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");

        let got = log_bessel_k(1.5, 2.0).unwrap();
        let want = ((PI / 4.0).sqrt() * (-2.0f64).exp() * 1.5).ln();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn k_prime_half_order_is_minus_one() {
        // ln(x^{1/2} K_{1/2}(x)) = const - x.
        let got = k_prime(0.5, 3.0).unwrap();
        assert!((got + 1.0).abs() < 1e-13, "{got}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(log_bessel_k(1.0, 0.0).is_err());
        assert!(log_bessel_k(1.0, -2.0).is_err());
        assert!(log_bessel_k(1.0, f64::NAN).is_err());
        assert!(log_bessel_k(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn small_orders_use_reflection() {
        // K_{-v} = K_v
        let a = log_bessel_k(0.3, 0.7).unwrap();
        let b = log_bessel_k(-0.3, 0.7).unwrap();
        assert_eq!(a, b);
        // K_{v-1}/K_v at v = 0.3 equals K_{0.7}/K_{0.3}
        let (_, lower) = log_bessel_k_with_ratio(0.3, 0.7).unwrap();
        let direct = (log_bessel_k(0.7, 0.7).unwrap() - a).exp();
        assert!((lower - direct).abs() < 1e-13 * direct);
    }

    #[test]
    fn crossover_is_continuous() {
        for &v in &[0.0, 0.25, 3.7, 40.5] {
            let lo = log_bessel_k(v, TEMME_SWITCH * (1.0 - 1e-12)).unwrap();
            let hi = log_bessel_k(v, TEMME_SWITCH).unwrap();
            assert!((lo - hi).abs() < 1e-10 * lo.abs().max(1.0), "v={v}: {lo} {hi}");
        }
    }
}
