//! Independent numerical oracles for the test suites.
//!
//! Nothing here shares code with the library under test: integrals are done
//! by adaptive Gauss–Kronrod quadrature and derivatives by central differences.

/// Gauss–Kronrod 7/15 nodes on [-1, 1] (non-negative half).
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
    0.209_482_141_084_728,
];
/// Gauss weights for the 7-point rule, at the odd Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, whole: (f64, f64), depth: u32) -> f64 {
        let (val, err) = whole;
        if err <= tol || depth == 0 {
            return val;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        rec(f, a, m, 0.5 * tol, left, depth - 1) + rec(f, m, b, 0.5 * tol, right, depth - 1)
    }
    rec(&f, a, b, tol, gk15(&f, a, b), 50)
}

/// Interference functional by quadrature:
/// `γ^(2/β) ∫_{γ^(-2/β)}^∞ du / (1 + u^(β/2))`.
///
/// The substitution `u = v^(-1/m)` with `m = β/2 - 1` turns the infinite
/// range into `[0, γ^(1 - 2/β)]` with the smooth integrand `1/(m (1 + v^(β/(β-2))))`.
pub fn upsilon_quadrature(beta: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let m = beta / 2.0 - 1.0;
    let p = beta / (beta - 2.0);
    let upper = gamma.powf(1.0 - 2.0 / beta);
    let integral = integrate(|v| 1.0 / (1.0 + v.powf(p)), 0.0, upper, 1e-14);
    gamma.powf(2.0 / beta) / m * integral
}

/// Five-point central difference of `f` at `x` with step `h`.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_basics() {
        let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-13);
        let v = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-13);
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn upsilon_quadrature_arctangent_case() {
        assert!((upsilon_quadrature(4.0, 1.0) - std::f64::consts::FRAC_PI_4).abs() < 1e-13);
    }

    #[test]
    fn central_diff_exp() {
        let d = central_diff(f64::exp, 1.0, 1e-3);
        assert!(rel_diff(d, std::f64::consts::E) < 1e-11);
    }
}
