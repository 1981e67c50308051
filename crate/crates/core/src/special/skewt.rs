//! Univariate generalized-hyperbolic skewed t with unit scale.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::bessel::log_bessel_k;
use super::quadrature::{integrate, integrate_lower_tail, integrate_upper_tail};
use crate::error::{CopulaError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const CDF_REL_TOL: f64 = 1e-12;
const CDF_ABS_TOL: f64 = 1e-300;
/// Floor for quadratic forms entering a Bessel argument.
pub(crate) const QUAD_FLOOR: f64 = 1e-12;

/// Skewed t marginal `g_i` with shape `nu`, skewness `gamma` and scale 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewTMarginal {
    nu: f64,
    gamma: f64,
    #[serde(skip)]
    mode: f64,
    #[serde(skip)]
    log_norm: f64,
}

impl SkewTMarginal {
    pub fn new(nu: f64, gamma: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(CopulaError::domain(format!("nu must be finite and > 0, got {nu}")));
        }
        if !gamma.is_finite() {
            return Err(CopulaError::domain(format!("gamma must be finite, got {gamma}")));
        }
        let log_norm = if gamma == 0.0 {
            ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
        } else {
            let n = 0.5 * (nu + 1.0);
            (1.0 - 0.5 * nu) * std::f64::consts::LN_2 + 0.5 * nu * nu.ln() - 0.5 * LN_2PI
                - ln_gamma(0.5 * nu)
                + n * gamma.abs().ln()
        };
        let mut m = SkewTMarginal { nu, gamma, mode: 0.0, log_norm };
        m.mode = m.locate_mode();
        Ok(m)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mode(&self) -> f64 {
        self.mode
    }

    pub fn logpdf(&self, y: f64) -> f64 {
        let nu = self.nu;
        if self.gamma == 0.0 {
            return self.log_norm - 0.5 * (nu + 1.0) * (y * y / nu).ln_1p();
        }
        let n = 0.5 * (nu + 1.0);
        let s = nu + y * y;
        let arg = (self.gamma.abs() * s.sqrt()).max(QUAD_FLOOR);
        // log_bessel_k only fails for non-positive or non-finite arguments
        let lk = log_bessel_k(n, arg).unwrap_or(f64::NEG_INFINITY);
        self.log_norm + y * self.gamma + lk - 0.5 * n * s.ln()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.logpdf(y).exp()
    }

    fn locate_mode(&self) -> f64 {
        // Unimodal; golden-section search on the log density.
        let (mut a, mut b) = (-10.0_f64, 10.0_f64);
        let g = 0.618_033_988_749_894_9;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.logpdf(c), self.logpdf(d));
        for _ in 0..90 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.logpdf(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.logpdf(d);
            }
            if b - a < 1e-9 {
                break;
            }
        }
        0.5 * (a + b)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y == f64::NEG_INFINITY {
            return 0.0;
        }
        if y == f64::INFINITY {
            return 1.0;
        }
        let f = |t: f64| self.pdf(t);
        if y <= self.mode {
            integrate_lower_tail(f, y, CDF_ABS_TOL, CDF_REL_TOL)
        } else {
            1.0 - integrate_upper_tail(f, y, CDF_ABS_TOL, CDF_REL_TOL)
        }
    }

    fn bracket(&self, u: f64) -> (f64, f64) {
        let t0 = StudentsT::new(0.0, 1.0, self.nu)
            .ok()
            .map(|t| t.inverse_cdf(u))
            .filter(|v| v.is_finite())
            .unwrap_or(0.0);
        let var_factor = if self.nu > 2.5 { self.nu / (self.nu - 2.0) } else { 5.0 };
        let shift = (5.0 * self.gamma.abs() * var_factor).max(1e-3);
        let (mut lo, mut hi) = (t0 - shift, t0 + shift);
        let mut width = shift.max(1.0);
        while self.cdf(lo) > u {
            lo -= width;
            width *= 2.0;
        }
        width = shift.max(1.0);
        while self.cdf(hi) < u {
            hi += width;
            width *= 2.0;
        }
        (lo, hi)
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(CopulaError::domain(format!("quantile level must lie in (0,1), got {u}")));
        }
        let (mut lo, mut hi) = self.bracket(u);
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fy = self.cdf(y) - u;
            if fy.abs() <= 1e-15 {
                return Ok(y);
            }
            if fy < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let step = fy / self.pdf(y);
            let newton = y - step;
            y = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) <= 4.0 * f64::EPSILON * (1.0 + y.abs()) || step.abs() <= 1e-15 * (1.0 + y.abs()) {
                return Ok(y);
            }
        }
        Ok(y)
    }

    /// Quantiles for many levels at once.
    ///
    /// Levels are processed in increasing order; each quantile is found by
    /// Newton steps whose cdf values are integrated from the previous
    /// quantile, so the full tail integral is only done once.
    pub fn quantiles(&self, levels: &[f64]) -> Result<Vec<f64>> {
        let mut order: Vec<usize> = (0..levels.len()).collect();
        for &u in levels {
            if !(u > 0.0 && u < 1.0) {
                return Err(CopulaError::domain(format!("quantile level must lie in (0,1), got {u}")));
            }
        }
        order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
        let mut out = vec![0.0; levels.len()];
        let mut anchor: Option<Anchor> = None;
        for &idx in &order {
            let u = levels[idx];
            let next = match anchor {
                Some(a) if u == a.u => a,
                Some(a) => match self.step_from(&a, u) {
                    Some(n) => n,
                    None => self.fresh_anchor(u)?,
                },
                None => self.fresh_anchor(u)?,
            };
            out[idx] = next.y;
            anchor = Some(next);
        }
        Ok(out)
    }

    fn fresh_anchor(&self, u: f64) -> Result<Anchor> {
        let y = self.quantile(u)?;
        Ok(Anchor { u, y, f: self.cdf(y), p: self.pdf(y), slope: None })
    }

    /// Solves `F(y) = u` starting from a point with known cdf. The first guess
    /// is a second-order expansion; Newton steps integrate the density from
    /// the anchor. At convergence the returned cdf value is `u` itself, which
    /// is exact up to the (negligible) final Newton residual.
    fn step_from(&self, a: &Anchor, u: f64) -> Option<Anchor> {
        let du = u - a.f;
        if du <= 0.0 || a.p <= 0.0 {
            return None;
        }
        let s = a.slope.unwrap_or(0.0);
        let disc = a.p * a.p + 2.0 * s * du;
        let mut y = if disc > 0.0 { a.y + 2.0 * du / (a.p + disc.sqrt()) } else { a.y + du / a.p };
        for _ in 0..40 {
            if !y.is_finite() || y <= a.y {
                return None;
            }
            let r = a.f + integrate(|t| self.pdf(t), a.y, y, 1e-17, 1e-13) - u;
            let py = self.pdf(y);
            let step = r / py;
            if !step.is_finite() {
                return None;
            }
            let slope = (py - a.p) / (y - a.y);
            let y_new = y - step;
            // error left after this Newton step is about |f'| step² / (2 f)
            let predicted = 0.5 * (slope / py).abs() * step * step;
            if step.abs() <= 1e-13 * (1.0 + y_new.abs())
                || (predicted <= 1e-15 * (1.0 + y_new.abs()) && step.abs() <= 1e-6 * (1.0 + y_new.abs()))
            {
                if y_new <= a.y {
                    return None;
                }
                let p = py - slope * step;
                return Some(Anchor { u, y: y_new, f: u, p, slope: Some(slope) });
            }
            y = y_new;
        }
        None
    }
}

#[derive(Debug, Clone, Copy)]
struct Anchor {
    u: f64,
    y: f64,
    /// `F(y)`
    f: f64,
    /// `f(y)`
    p: f64,
    /// Density slope estimated from the previous step.
    slope: Option<f64>,
}

/// `n` draws from the inverse gamma law `IG(shape, rate)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64, n: usize) -> Result<Vec<f64>> {
    let g = inverse_gamma_law(shape, rate)?;
    Ok((0..n).map(|_| 1.0 / g.sample(rng)).collect())
}

pub(crate) fn inverse_gamma_law(shape: f64, rate: f64) -> Result<Gamma<f64>> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(CopulaError::domain(format!("inverse gamma needs shape, rate > 0 (got {shape}, {rate})")));
    }
    Gamma::new(shape, 1.0 / rate).map_err(|e| CopulaError::domain(e.to_string()))
}
