//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: `(estimate, error estimate)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let est = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (est, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    est: f64,
    err: f64,
}

/// Integrate `f` over `[a, b]` until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |I|)` or `max_panels` panels are in use.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate_with_limit(&f, a, b, abs_tol, rel_tol, 400)
}

pub fn integrate_with_limit<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let (est, err) = gk15(f, a, b);
    let mut panels = vec![Panel { a, b, est, err }];
    let mut total = est;
    let mut total_err = err;
    while total_err > abs_tol.max(rel_tol * total.abs()) && panels.len() < max_panels {
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            panels.push(p);
            break;
        }
        let (e1, r1) = gk15(f, p.a, mid);
        let (e2, r2) = gk15(f, mid, p.b);
        total += e1 + e2 - p.est;
        total_err += r1 + r2 - p.err;
        panels.push(Panel { a: p.a, b: mid, est: e1, err: r1 });
        panels.push(Panel { a: mid, b: p.b, est: e2, err: r2 });
    }
    // Re-sum to shed the drift of the running total.
    panels.iter().map(|p| p.est).sum()
}

/// `∫_{-∞}^{b} f` via `y = b - (1 - s)/s`, `s ∈ (0, 1]`.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let g = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let y = b - (1.0 - s) / s;
        let v = f(y) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_with_limit(&g, 0.0, 1.0, abs_tol, rel_tol, 400)
}

/// `∫_{a}^{∞} f` via `y = a + (1 - s)/s`.
pub fn integrate_upper_tail<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate_lower_tail(|y| f(-y), -a, abs_tol, rel_tol)
}
