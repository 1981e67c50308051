#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use spectral_copula::special::k_prime;
use spectral_copula::{CopulaShape, SpectralBasis, SpectralState};

pub fn random_orthogonal<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    m.qr().q()
}

pub fn random_basis<R: Rng>(rng: &mut R, d: usize) -> Arc<SpectralBasis> {
    Arc::new(SpectralBasis::new(random_orthogonal(rng, d)).unwrap())
}

pub fn random_state<R: Rng>(rng: &mut R, d: usize) -> SpectralState {
    let basis = random_basis(rng, d);
    let f = DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5));
    SpectralState::new(basis, f).unwrap()
}

pub fn random_vector<R: Rng>(rng: &mut R, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

pub fn with_f(state: &SpectralState, i: usize, delta: f64) -> SpectralState {
    let mut f = state.f().clone();
    f[i] += delta;
    SpectralState::new(Arc::clone(state.basis()), f).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

struct DensityParts {
    log_det: f64,
    q: f64,
    y_gamma: f64,
    gamma_gamma: f64,
}

fn density_parts(state: &SpectralState, y: &DVector<f64>, gamma: &DVector<f64>) -> DensityParts {
    let chol = state.r().clone().cholesky().expect("R must be positive definite");
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ry = chol.solve(y);
    let rg = chol.solve(gamma);
    DensityParts { log_det, q: y.dot(&ry), y_gamma: y.dot(&rg), gamma_gamma: gamma.dot(&rg) }
}

/// Central difference `[log g(f + h e_i) - log g(f - h e_i)] / 2h` with the
/// difference formed term by term, so that the large constant and logarithmic
/// pieces of the log density never cancel in floating point.
pub fn fd_score(shape: &CopulaShape, state: &SpectralState, y: &DVector<f64>, i: usize, h: f64) -> f64 {
    let up = density_parts(&with_f(state, i, h), y, shape.gamma());
    let dn = density_parts(&with_f(state, i, -h), y, shape.gamma());
    let d = y.len() as f64;
    let d_logdet = up.log_det - dn.log_det;
    let dq = up.q - dn.q;
    let diff = if shape.is_gaussian() {
        -0.5 * d_logdet - 0.5 * dq
    } else {
        let nu = shape.nu();
        let n = 0.5 * (nu + d);
        let mut diff = -0.5 * d_logdet - n * (dq / (nu + dn.q)).ln_1p();
        if !shape.is_symmetric() {
            let x2_up = up.gamma_gamma * (nu + up.q);
            let x2_dn = dn.gamma_gamma * (nu + dn.q);
            let (x_up, x_dn) = (x2_up.sqrt(), x2_dn.sqrt());
            // ln K_n(x_up) - ln K_n(x_dn) by Simpson's rule on d ln K_n / dx
            let dlnk = |x: f64| k_prime(n, x).unwrap() - n / x;
            let mid = 0.5 * (x_up + x_dn);
            let dx = (x2_up - x2_dn) / (x_up + x_dn);
            let dk = dx / 6.0 * (dlnk(x_dn) + 4.0 * dlnk(mid) + dlnk(x_up));
            diff += (up.y_gamma - dn.y_gamma) + 0.5 * n * ((x2_up - x2_dn) / x2_dn).ln_1p() + dk;
        }
        diff
    };
    diff / (2.0 * h)
}
