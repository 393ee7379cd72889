//! Gauss-Legendre rules and a small adaptive driver.

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// 8-point Gauss-Legendre rule on `[a, b]` (exact for degree 15).
pub fn gauss_legendre8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        s += w * (f(c - h * x) + f(c + h * x));
    }
    s * h
}

/// Adaptive bisection on top of the 8-point rule.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let whole = gauss_legendre8(f, a, b);
    adaptive_rec(f, a, b, whole, tol, 40)
}

fn adaptive_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = gauss_legendre8(f, a, m);
    let right = gauss_legendre8(f, m, b);
    let both = left + right;
    if depth == 0 || (both - whole).abs() <= tol.max(1e-15 * both.abs()) {
        return both;
    }
    adaptive_rec(f, a, m, left, 0.5 * tol, depth - 1)
        + adaptive_rec(f, m, b, right, 0.5 * tol, depth - 1)
}

/// `int_0^1 (lo + (hi - lo) s)^k ds` for `lo, hi >= 0`, i.e. the cell mean of
/// the `k`-th power of a linear function.
pub fn mean_power_of_linear(lo: f64, hi: f64, k: f64) -> f64 {
    let diff = hi - lo;
    let scale = lo.abs().max(hi.abs());
    if scale == 0.0 {
        return if k == 0.0 { 1.0 } else { 0.0 };
    }
    if diff.abs() <= 1e-4 * scale {
        let f = |s: f64| (lo + diff * s).powf(k);
        return gauss_legendre8(&f, 0.0, 1.0);
    }
    (hi.powf(k + 1.0) - lo.powf(k + 1.0)) / ((k + 1.0) * diff)
}
