//! Small scalar optimization helpers: golden-section search and grid scans.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes `f` over `[a, b]` by golden-section search until the bracket is below `tol`.
/// Exact for unimodal functions; otherwise returns a local minimizer.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iters += 1;
    }
    // Compare against the ends too, so monotone functions land on the boundary.
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [a, b] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

pub fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_min(|t| -f(t), a, b, tol);
    (x, -v)
}

/// Result of a refined grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub x: f64,
    pub value: f64,
    /// The best grid point was an endpoint of the interval.
    pub at_edge: bool,
}

/// Maximizes `f` on an `n`-point grid over `[lo, hi]` and refines the best
/// `candidates` local maxima by golden-section search. Ties within `tie_tol`
/// go to the smallest `x`.
pub fn grid_max(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
    candidates: usize,
    tol: f64,
    tie_tol: f64,
) -> GridOptimum {
    assert!(n >= 3 && hi > lo);
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || vals[i] >= vals[i - 1];
            let right = i + 1 == n || vals[i] >= vals[i + 1];
            left && right
        })
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    peaks.truncate(candidates.max(1));
    let mut best: Option<(f64, f64, usize)> = None;
    let mut refined: Vec<(f64, f64, usize)> = peaks
        .iter()
        .map(|&i| {
            let a = if i == 0 { xs[0] } else { xs[i - 1] };
            let b = if i + 1 == n { xs[n - 1] } else { xs[i + 1] };
            let (x, v) = golden_max(&f, a, b, tol);
            if v >= vals[i] {
                (x, v, i)
            } else {
                (xs[i], vals[i], i)
            }
        })
        .collect();
    refined.sort_by(|a, b| a.0.total_cmp(&b.0));
    let top = refined.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    for r in refined {
        if r.1 >= top - tie_tol && best.is_none() {
            best = Some(r);
        }
    }
    let (x, value, i) = best.expect("grid has at least one peak");
    GridOptimum {
        x,
        value,
        at_edge: i == 0 || i + 1 == n,
    }
}

pub fn grid_min(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
    candidates: usize,
    tol: f64,
    tie_tol: f64,
) -> GridOptimum {
    let r = grid_max(|x| -f(x), lo, hi, n, candidates, tol, tie_tol);
    GridOptimum {
        value: -r.value,
        ..r
    }
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() < tol {
            return Some(c);
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    Some(0.5 * (a + b))
}
