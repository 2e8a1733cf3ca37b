//! Scalar maximization: bracketing scan followed by golden-section
//! refinement.

/// Maximize `f` on `[a, b]`: scan `n_scan` equally spaced points to
/// bracket the best one, then golden-section to interval width `tol`.
///
/// Returns `(x_max, f_max)`. Assumes `f` is continuous; for multimodal
/// objectives the scan density decides which mode is found.
pub fn maximize_scalar<F>(f: F, a: f64, b: f64, n_scan: usize, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    assert!(b > a && n_scan >= 3);
    let step = (b - a) / (n_scan - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n_scan {
        let v = f(a + step * i as f64);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = a + step * best_i.saturating_sub(1) as f64;
    let hi = (a + step * (best_i + 1) as f64).min(b);
    golden_section_max(&f, lo, hi, tol)
}

/// Golden-section search for the maximum of `f` on `[a, b]`.
pub fn golden_section_max<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 { (x1, f1) } else { (x2, f2) }
}
