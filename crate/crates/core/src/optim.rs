//! Small unconstrained minimizers used by the estimation code.
//!
//! Both treat a non-finite objective value as a rejected point: the simplex
//! ranks it last and the line search backs away from it.

/// Outcome of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Euclidean norm of the finite-difference gradient at `x` (BFGS only).
    pub grad_norm: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Spread of objective values across the simplex.
    pub f_tol: f64,
    /// Largest coordinate distance from the best vertex.
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { max_evals: 2000, f_tol: 1e-10, x_tol: 1e-7 }
    }
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64], step: &[f64]) -> Minimum {
        let n = x0.len();
        let mut evals = 0;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            sanitize(f(x))
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(x0, &mut evals);
        simplex.push((x0.to_vec(), v0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step[i];
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        let mut iterations = 0;
        let mut converged = false;
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            let spread = if best.is_finite() { worst - best } else { f64::INFINITY };
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(simplex[0].0.iter()).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.f_tol && size <= self.x_tol {
                converged = true;
                break;
            }
            iterations += 1;
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect()
            };
            let xr = along(-1.0);
            let vr = eval(&xr, &mut evals);
            if vr < simplex[0].1 {
                let xe = along(-2.0);
                let ve = eval(&xe, &mut evals);
                simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
                continue;
            }
            if vr < simplex[n - 1].1 {
                simplex[n] = (xr, vr);
                continue;
            }
            let (xc, vc) = if vr < simplex[n].1 {
                let x = along(-0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            };
            if vc < simplex[n].1.min(vr) {
                simplex[n] = (xc, vc);
                continue;
            }
            let x_best = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = x_best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                let v = eval(&x, &mut evals);
                *vertex = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, grad_norm: f64::NAN, evals, iterations, converged }
    }
}

#[derive(Debug, Clone)]
pub struct Bfgs {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Relative central-difference step, `h_i = fd_step · (1 + |x_i|)`.
    pub fd_step: f64,
    /// Longest step allowed in parameter space.
    pub max_step: f64,
}

impl Default for Bfgs {
    fn default() -> Self {
        Bfgs { grad_tol: 1e-6, max_iter: 500, fd_step: 1e-5, max_step: 2.0 }
    }
}

/// Central-difference gradient; falls back to a one-sided difference next to
/// a rejected point.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], fx: f64, rel_step: f64, evals: &mut usize) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = rel_step * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let up = sanitize(f(&xp));
        xp[i] = x[i] - h;
        let dn = sanitize(f(&xp));
        xp[i] = x[i];
        *evals += 2;
        g[i] = match (up.is_finite(), dn.is_finite()) {
            (true, true) => (up - dn) / (2.0 * h),
            (true, false) => (up - fx) / h,
            (false, true) => (fx - dn) / h,
            (false, false) => 0.0,
        };
    }
    g
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Bfgs {
    /// Runs at most `self.max_iter` iterations from `x0`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut evals = 1;
        let mut x = x0.to_vec();
        let mut fx = sanitize(f(&x));
        if !fx.is_finite() || n == 0 {
            return Minimum { x, value: fx, grad_norm: if n == 0 { 0.0 } else { f64::NAN }, evals, iterations: 0, converged: n == 0 };
        }
        let mut g = fd_gradient(&mut f, &x, fx, self.fd_step, &mut evals);
        let mut h = identity(n);
        let mut fresh = true;
        let mut iterations = 0;
        let mut converged = norm(&g) <= self.grad_tol;
        while !converged && iterations < self.max_iter {
            iterations += 1;
            let mut p: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>()).collect();
            let mut slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
            if slope >= 0.0 {
                h = identity(n);
                fresh = true;
                p = g.iter().map(|v| -v).collect();
                slope = -norm(&g).powi(2);
            }
            let pn = norm(&p);
            if pn > self.max_step {
                let s = self.max_step / pn;
                p.iter_mut().for_each(|v| *v *= s);
                slope *= s;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
                let fxn = sanitize(f(&xn));
                evals += 1;
                if fxn.is_finite() && fxn <= fx + 1e-4 * t * slope {
                    accepted = Some((xn, fxn));
                    break;
                }
                t *= 0.5;
            }
            let Some((xn, fxn)) = accepted else {
                if fresh {
                    break;
                }
                h = identity(n);
                fresh = true;
                continue;
            };
            let gn = fd_gradient(&mut f, &xn, fxn, self.fd_step, &mut evals);
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if fresh {
                    let scale = sy / y.iter().map(|v| v * v).sum::<f64>();
                    h = identity(n);
                    h.iter_mut().enumerate().for_each(|(i, row)| row[i] = scale);
                }
                bfgs_update(&mut h, &s, &y, sy);
                fresh = false;
            }
            x = xn;
            fx = fxn;
            g = gn;
            converged = norm(&g) <= self.grad_tol;
        }
        Minimum { x, value: fx, grad_norm: norm(&g), evals, iterations, converged }
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Inverse-Hessian update `H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn simplex_finds_rosenbrock_minimum() {
        let m = NelderMead { max_evals: 5000, f_tol: 1e-14, x_tol: 1e-8 }.minimize(rosenbrock, &[-1.2, 1.0], &[0.5, 0.5]);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn bfgs_finds_rosenbrock_minimum() {
        let m = Bfgs::default().minimize(rosenbrock, &[-1.2, 1.0]);
        assert!(m.converged, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejected_region_is_avoided() {
        // minimum at the edge of an inadmissible half-plane
        let f = |x: &[f64]| if x[0] < 0.5 { f64::NAN } else { (x[0] - 0.6).powi(2) + x[1] * x[1] };
        let m = Bfgs::default().minimize(f, &[2.0, 1.0]);
        assert!((m.x[0] - 0.6).abs() < 1e-5);
        let m = NelderMead::default().minimize(f, &[2.0, 1.0], &[0.3, 0.3]);
        assert!((m.x[0] - 0.6).abs() < 1e-4);
    }

    #[test]
    fn quadratic_in_several_dimensions() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.1 * i as f64).powi(2)).sum::<f64>();
        let m = Bfgs::default().minimize(f, &[1.0; 6]);
        assert!(m.converged);
        for (i, v) in m.x.iter().enumerate() {
            assert!((v - 0.1 * i as f64).abs() < 1e-6);
        }
    }
}
